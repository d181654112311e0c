#pragma once

#include <stdexcept>
#include <string>

namespace cat {

// Root of the engine's error taxonomy. Module headers derive the
// specific failures their contracts name.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IoFailure : public Error {
public:
    using Error::Error;
};

}  // namespace cat
