#pragma once

// Deterministic synthetic descriptions and corpora for retrieval tests
// and the benchmark.

#include <cstddef>
#include <string>

#include "cat/corpus.hpp"
#include "cat/util.hpp"

namespace cat::testsupport {

std::string synthetic_description(cat::Rng& rng);

// Examples over `activities` distinct activity labels, ids "s<N>".
cat::ExampleSet synthetic_example_set(std::size_t n, cat::Rng& rng, std::size_t activities = 20);

}  // namespace cat::testsupport
