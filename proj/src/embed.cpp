#include "cat/embed.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "cat/util.hpp"

namespace cat {

EmbeddingVector NgramProvider::embed(const std::string& text) const {
    std::string norm = normalize_text(text);
    if (norm.empty()) throw EmptyText("cannot embed empty text");
    // Boundary spaces make word edges count as grams; without them a
    // two-letter target like "me" would share nothing with anything.
    norm = " " + norm + " ";

    EmbeddingVector v;
    v.values.assign(kDimension, 0.0);
    for (std::size_t i = 0; i + 3 <= norm.size(); ++i)
        v.values[fnv1a64(std::string_view(norm).substr(i, 3)) % kDimension] += 1.0;

    double norm_sq = 0.0;
    for (double x : v.values) norm_sq += x * x;
    double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v.values) x *= inv;
    return v;
}

EmbeddingVector parse_embedding_response(const std::string& body, std::size_t expected_dimension) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw ProviderFailure(std::string("bad response JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("vector") || !j.at("vector").is_array())
        throw ProviderFailure("response missing 'vector' array");

    EmbeddingVector v;
    for (const auto& x : j.at("vector")) {
        if (!x.is_number()) throw ProviderFailure("vector entry is not a number");
        v.values.push_back(x.get<double>());
    }
    if (v.size() != expected_dimension)
        throw ProviderFailure("vector has dimension " + std::to_string(v.size()) + ", expected " +
                              std::to_string(expected_dimension));
    for (double x : v.values)
        if (!std::isfinite(x)) throw ProviderFailure("vector entry is not finite");
    return v;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string endpoint, std::string name,
                                                 std::size_t dimension)
    : endpoint_(std::move(endpoint)), name_(std::move(name)), dimension_(dimension) {}

EmbeddingVector RemoteEmbeddingProvider::embed(const std::string& text) const {
    std::string norm = normalize_text(text);
    if (norm.empty()) throw EmptyText("cannot embed empty text");

    auto slash = endpoint_.find('/', endpoint_.find("//") == std::string::npos
                                        ? 0
                                        : endpoint_.find("//") + 2);
    std::string host = slash == std::string::npos ? endpoint_ : endpoint_.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : endpoint_.substr(slash);

    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);

    nlohmann::json req;
    req["text"] = text;
    auto res = client.Post(path, req.dump(), "application/json");
    if (!res) throw ProviderFailure("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw ProviderFailure("endpoint returned status " + std::to_string(res->status));
    return parse_embedding_response(res->body, dimension_);
}

double cosine(const EmbeddingVector& v1, const EmbeddingVector& v2) {
    if (v1.size() != v2.size())
        throw DimensionMismatch("cosine over vectors of length " + std::to_string(v1.size()) +
                                " and " + std::to_string(v2.size()));
    double inner = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    for (std::size_t i = 0; i < v1.size(); ++i) {
        inner += v1.values[i] * v2.values[i];
        n1 += v1.values[i] * v1.values[i];
        n2 += v2.values[i] * v2.values[i];
    }
    if (n1 == 0.0 || n2 == 0.0) throw ZeroVector("cosine is undefined for a zero vector");
    return inner / (std::sqrt(n1) * std::sqrt(n2));
}

std::string element_repr(const UIElement& element) {
    std::string joined;
    auto append = [&joined](std::string_view part) {
        if (part.empty()) return;
        if (!joined.empty()) joined.push_back(' ');
        joined.append(part);
    };
    append(element.text);
    append(element.content_desc);
    append(suffix_after(element.resource_id, '/'));

    std::string norm = normalize_text(joined);
    if (norm.empty())
        throw AllFieldsEmpty("element " + std::to_string(element.element_id) +
                             " has no textual evidence");
    return norm;
}

}  // namespace cat
