#include "cat/retrieve.hpp"

#include <algorithm>
#include <unordered_map>

#include <json.hpp>

#include "cat/util.hpp"

namespace cat {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

}  // namespace

RetrievalIndex build_index(const ExampleSet& set, const EmbeddingProvider& provider) {
    if (set.empty()) throw EmptySet("cannot index an empty example set");

    RetrievalIndex index;
    index.provider_name = provider.name();
    index.dimension = provider.dimension();
    index.source_digest = set.source_digest;
    index.entries.resize(set.size());

    std::vector<std::string> errors(set.size());
    const auto n = static_cast<std::ptrdiff_t>(set.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            const auto& ex = set.examples[idx];
            index.entries[idx] = IndexEntry{ex.id, provider.embed(ex.description)};
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) throw IndexProviderFailure(set.examples[i].id, errors[i]);
    return index;
}

std::vector<RankedId> top_k_ids(const RetrievalIndex& index, const std::string& query,
                                std::size_t k, const EmbeddingProvider& provider) {
    if (provider.name() != index.provider_name)
        throw ProviderMismatch("index was built with provider '" + index.provider_name +
                               "', queried with '" + provider.name() + "'");
    if (k == 0 || index.entries.empty()) return {};

    EmbeddingVector query_vec = provider.embed(query);

    std::vector<double> scores(index.entries.size());
    const auto n = static_cast<std::ptrdiff_t>(index.entries.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        scores[static_cast<std::size_t>(i)] =
            cosine(index.entries[static_cast<std::size_t>(i)].vector, query_vec);

    std::vector<std::size_t> order(index.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&scores](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });

    std::vector<RankedId> out;
    out.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        std::size_t pos = order[r];
        out.push_back(RankedId{pos, index.entries[pos].id, scores[pos], static_cast<int>(r + 1)});
    }
    return out;
}

void ensure_matching_digest(const RetrievalIndex& index, const ExampleSet& set) {
    if (index.source_digest != set.source_digest)
        throw DigestMismatch("index digest " + index.source_digest +
                             " does not match example set digest " + set.source_digest);
}

std::vector<RankedExample> top_k(const RetrievalIndex& index, const ExampleSet& set,
                                 const std::string& query, std::size_t k,
                                 const EmbeddingProvider& provider) {
    ensure_matching_digest(index, set);
    std::vector<RankedExample> out;
    for (const auto& ranked : top_k_ids(index, query, k, provider)) {
        if (ranked.position >= set.size() || set.examples[ranked.position].id != ranked.id)
            throw DigestMismatch("index entry '" + ranked.id +
                                 "' does not line up with the example set");
        out.push_back(RankedExample{set.examples[ranked.position], ranked.score, ranked.rank});
    }
    return out;
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
    json j;
    j["format_version"] = kFormatVersion;
    j["provider_name"] = index.provider_name;
    j["dimension"] = index.dimension;
    j["source_digest"] = index.source_digest;
    j["entries"] = json::array();
    for (const auto& entry : index.entries)
        j["entries"].push_back({{"id", entry.id}, {"vector", entry.vector.values}});
    write_file(path, j.dump(2) + "\n");
}

RetrievalIndex load_index(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw CorruptIndex(std::string("unparseable index file: ") + e.what());
    } catch (const std::runtime_error& e) {
        throw IoFailure(e.what());
    }

    RetrievalIndex index;
    try {
        if (j.at("format_version").get<int>() != kFormatVersion)
            throw CorruptIndex("unsupported index format_version");
        index.provider_name = j.at("provider_name").get<std::string>();
        index.dimension = j.at("dimension").get<std::size_t>();
        index.source_digest = j.at("source_digest").get<std::string>();
        for (const auto& ej : j.at("entries")) {
            IndexEntry entry;
            entry.id = ej.at("id").get<std::string>();
            entry.vector.values = ej.at("vector").get<std::vector<double>>();
            if (entry.vector.size() != index.dimension)
                throw CorruptIndex("entry '" + entry.id + "' has the wrong dimension");
            index.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw CorruptIndex(std::string("malformed index structure: ") + e.what());
    }
    return index;
}

RetrievalIndex load_index(const std::filesystem::path& path, const ExampleSet& against) {
    RetrievalIndex index = load_index(path);
    ensure_matching_digest(index, against);
    return index;
}

}  // namespace cat
