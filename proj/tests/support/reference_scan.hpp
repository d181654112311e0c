#pragma once

// Serial reference used as the oracle for the parallel retrieval kernels:
// an independent brute-force cosine scan with the positional tie rule.
// Deliberately kept free of the library's scoring/selection code paths.

#include <cstddef>
#include <vector>

#include "cat/embed.hpp"

namespace cat::testsupport {

struct ReferenceRanked {
    std::size_t position = 0;
    double score = 0.0;
};

double reference_cosine(const cat::EmbeddingVector& a, const cat::EmbeddingVector& b);

std::vector<ReferenceRanked> reference_top_k(const std::vector<cat::EmbeddingVector>& corpus,
                                             const cat::EmbeddingVector& query, std::size_t k);

}  // namespace cat::testsupport
