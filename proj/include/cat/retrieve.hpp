#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cat/corpus.hpp"
#include "cat/embed.hpp"
#include "cat/errors.hpp"

namespace cat {

class EmptySet : public Error {
public:
    using Error::Error;
};

class ProviderMismatch : public Error {
public:
    using Error::Error;
};

class IndexProviderFailure : public Error {
public:
    IndexProviderFailure(const std::string& example_id, const std::string& detail)
        : Error("embedding failed for example '" + example_id + "': " + detail),
          example_id(example_id),
          detail(detail) {}
    std::string example_id;
    std::string detail;
};

class CorruptIndex : public Error {
public:
    using Error::Error;
};

class DigestMismatch : public Error {
public:
    using Error::Error;
};

struct IndexEntry {
    std::string id;
    EmbeddingVector vector;
};

// One embedding per example, in corpus order. Provider name and corpus
// digest are pinned so stale pairings fail hard.
struct RetrievalIndex {
    std::string provider_name;
    std::size_t dimension = 0;
    std::string source_digest;
    std::vector<IndexEntry> entries;
};

struct RankedId {
    std::size_t position = 0;  // index entry position (corpus order)
    std::string id;
    double score = 0.0;
    int rank = 0;  // 1-based
};

struct RankedExample {
    RetrievalExample example;
    double score = 0.0;
    int rank = 0;
};

// Embeds every description. The per-example loop is OpenMP-parallel;
// entry order is corpus order regardless of threading.
RetrievalIndex build_index(const ExampleSet& set, const EmbeddingProvider& provider);

// Exact scan: the k highest-cosine entries, descending, ties broken by
// earlier corpus position. Scoring is OpenMP-parallel.
std::vector<RankedId> top_k_ids(const RetrievalIndex& index, const std::string& query,
                                std::size_t k, const EmbeddingProvider& provider);

// Same, resolved to full examples; the set must carry the digest the
// index was built from.
std::vector<RankedExample> top_k(const RetrievalIndex& index, const ExampleSet& set,
                                 const std::string& query, std::size_t k,
                                 const EmbeddingProvider& provider);

void ensure_matching_digest(const RetrievalIndex& index, const ExampleSet& set);

// Versioned JSON container; load(save(x)) == x including provider and digest.
void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path, const ExampleSet& against);

// Binds the pieces a retrieval query needs; validates the pairing once.
struct Retriever {
    const RetrievalIndex* index;
    const ExampleSet* set;
    const EmbeddingProvider* provider;

    Retriever(const RetrievalIndex& index, const ExampleSet& set,
              const EmbeddingProvider& provider)
        : index(&index), set(&set), provider(&provider) {
        ensure_matching_digest(index, set);
    }

    std::vector<RankedExample> query(const std::string& text, std::size_t k) const {
        return top_k(*index, *set, text, k, *provider);
    }
};

}  // namespace cat
