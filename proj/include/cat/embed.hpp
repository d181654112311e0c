#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "cat/errors.hpp"
#include "cat/hierarchy.hpp"

namespace cat {

class EmptyText : public Error {
public:
    using Error::Error;
};

class ProviderFailure : public Error {
public:
    explicit ProviderFailure(const std::string& detail)
        : Error("embedding provider failure: " + detail), detail(detail) {}
    std::string detail;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ZeroVector : public Error {
public:
    using Error::Error;
};

class AllFieldsEmpty : public Error {
public:
    using Error::Error;
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

// Deterministic text encoder: identical input, identical vector.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual const std::string& name() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
};

// Bundled dependency-free provider: lowercase + whitespace-collapse,
// space-padded character 3-grams hashed into fixed buckets,
// term-frequency weights, L2-normalized.
class NgramProvider : public EmbeddingProvider {
public:
    static constexpr std::size_t kDimension = 256;

    const std::string& name() const override { return name_; }
    std::size_t dimension() const override { return kDimension; }
    EmbeddingVector embed(const std::string& text) const override;

private:
    std::string name_ = "ngram-256";
};

// Remote endpoint behind the same interface: POST {"text": …} returns
// {"vector": [… D floats]}. Failures surface as ProviderFailure; there is
// no silent fallback.
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(std::string endpoint, std::string name, std::size_t dimension);

    const std::string& name() const override { return name_; }
    std::size_t dimension() const override { return dimension_; }
    EmbeddingVector embed(const std::string& text) const override;

private:
    std::string endpoint_;
    std::string name_;
    std::size_t dimension_;
};

// Parses and validates the remote wire response. Exposed for testing.
EmbeddingVector parse_embedding_response(const std::string& body, std::size_t expected_dimension);

double cosine(const EmbeddingVector& v1, const EmbeddingVector& v2);

// Canonical text the mapper encodes for an element:
// text + content-description + resource-id suffix, normalized.
std::string element_repr(const UIElement& element);

}  // namespace cat
