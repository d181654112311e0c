#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cat/action.hpp"
#include "cat/errors.hpp"

namespace cat {

class FileUnreadable : public Error {
public:
    using Error::Error;
};

class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line(line), reason(reason) {}
    std::size_t line;
    std::string reason;
};

class DuplicateId : public Error {
public:
    explicit DuplicateId(const std::string& id) : Error("duplicate example id: '" + id + "'"), id(id) {}
    std::string id;
};

class TooFewActivities : public Error {
public:
    using Error::Error;
};

// A prior task description with its ground-truth action sequence.
struct RetrievalExample {
    std::string id;
    std::string description;
    std::string activity;  // "unlabeled" when the record carries none
    std::vector<ActionStep> steps;
};

struct ExampleSet {
    std::vector<RetrievalExample> examples;
    std::string source_digest;

    std::size_t size() const { return examples.size(); }
    bool empty() const { return examples.empty(); }
};

// Canonical content digest over the records themselves; identical record
// content yields an identical digest regardless of file formatting.
std::string example_set_digest(const std::vector<RetrievalExample>& examples);

// Loads a line-delimited JSON example store. Any invalid record fails the
// load; the raised MalformedRecord names the first bad line and its message
// lists every bad line found.
ExampleSet load_examples(const std::filesystem::path& path);

// Writes the store format load_examples reads.
void save_examples(const ExampleSet& set, const std::filesystem::path& path);

struct SplitResult {
    ExampleSet retrieval;
    ExampleSet test;
};

// Leakage-free split: whole activities are assigned to the test side, in
// seeded shuffle order, until the test side reaches test_fraction of the
// examples. The activity crossing the boundary stays in test.
SplitResult split_by_activity(const ExampleSet& set, double test_fraction, std::uint64_t seed);

}  // namespace cat
