// Times the OpenMP retrieval kernels against the serial reference scan on
// a synthetic corpus, and cross-checks that both return the same ranking.

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cat/corpus.hpp"
#include "cat/embed.hpp"
#include "cat/retrieve.hpp"
#include "cat/util.hpp"

#include "support/reference_scan.hpp"
#include "support/synthetic_text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"benchmark: parallel retrieval kernels vs the serial reference scan"};
    std::size_t n = 20000;
    std::size_t queries = 50;
    std::size_t k = 10;
    std::uint64_t seed = 7;
    app.add_option("--n", n, "synthetic corpus size");
    app.add_option("--queries", queries, "number of query descriptions");
    app.add_option("--k", k, "results per query");
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    std::cout << "openmp threads: " << omp_get_max_threads() << '\n';
#else
    std::cout << "openmp: not enabled, kernels run serial\n";
#endif

    cat::Rng rng(seed);
    cat::ExampleSet corpus = cat::testsupport::synthetic_example_set(n, rng);
    std::vector<std::string> query_texts;
    for (std::size_t i = 0; i < queries; ++i)
        query_texts.push_back(cat::testsupport::synthetic_description(rng));

    cat::NgramProvider provider;

    auto t0 = Clock::now();
    cat::RetrievalIndex index = cat::build_index(corpus, provider);
    double build_ms = ms_since(t0);
    std::cout << "index build (" << n << " examples): " << build_ms << " ms\n";

    // Serial reference: embed + scan without the parallel kernels.
    std::vector<cat::EmbeddingVector> vectors;
    vectors.reserve(index.entries.size());
    for (const auto& entry : index.entries) vectors.push_back(entry.vector);

    auto t1 = Clock::now();
    std::size_t parallel_checksum = 0;
    for (const auto& q : query_texts)
        for (const auto& ranked : cat::top_k_ids(index, q, k, provider))
            parallel_checksum += ranked.position;
    double parallel_ms = ms_since(t1);

    auto t2 = Clock::now();
    std::size_t serial_checksum = 0;
    for (const auto& q : query_texts) {
        cat::EmbeddingVector qv = provider.embed(q);
        for (const auto& ranked : cat::testsupport::reference_top_k(vectors, qv, k))
            serial_checksum += ranked.position;
    }
    double serial_ms = ms_since(t2);

    std::cout << "top-" << k << " x" << queries << " parallel: " << parallel_ms << " ms\n";
    std::cout << "top-" << k << " x" << queries << " serial reference: " << serial_ms << " ms\n";
    if (parallel_ms > 0.0)
        std::cout << "speedup: " << serial_ms / parallel_ms << "x\n";

    if (parallel_checksum != serial_checksum) {
        std::cerr << "MISMATCH: parallel and serial rankings disagree\n";
        return 1;
    }
    std::cout << "rankings agree\n";
    return 0;
}
