#include "cat/mapper.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "cat/util.hpp"

namespace cat {
namespace {

constexpr std::string_view kMappingInstructions =
    "I want you to act as a professional developer. I would like you to analyze a given "
    "target element and the current UI screen, provided in the format of an XML view "
    "hierarchy. Please identify and respond with an element on the UI screen within brackets "
    "[like this], that is semantically related to the target element.";

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

std::optional<std::string> try_element_repr(const UIElement& element) {
    try {
        return element_repr(element);
    } catch (const AllFieldsEmpty&) {
        return std::nullopt;
    }
}

}  // namespace

SimilarityResult map_by_similarity(const std::string& target, const UIScreen& screen,
                                   const EmbeddingProvider& provider, double threshold) {
    if (screen.elements.empty())
        throw NoElements("screen '" + screen.screen_id + "' has no elements");

    EmbeddingVector target_vec = provider.embed(target);

    double best = -std::numeric_limits<double>::infinity();
    const UIElement* best_element = nullptr;
    for (const auto& element : screen.elements) {
        auto repr = try_element_repr(element);
        if (!repr) continue;  // no textual evidence, skipped
        double score = clamp01(cosine(provider.embed(*repr), target_vec));
        if (score > best) {
            best = score;
            best_element = &element;
        }
        // Ties keep the earlier (lower element_id) candidate.
    }

    SimilarityResult result;
    result.best_score = best;
    if (best_element && best >= threshold) result.matched = *best_element;
    return result;
}

PromptMessages build_mapping_prompt(const std::string& target, const UIScreen& screen) {
    std::string body(kMappingInstructions);
    body += "\n\n";
    body += "Target element -> \"" + target + "\"\n";
    body += "Current UI screen -> " + serialize_compact(screen.simplified_root) + "\n";
    body += "Identified element -> ";

    PromptMessages prompt;
    prompt.messages.push_back(Message{Role::user, std::move(body)});
    return prompt;
}

UIElement parse_identified_element(const std::string& completion, const UIScreen& screen) {
    auto open = completion.find('[');
    if (open == std::string::npos) throw NoBrackets("completion contains no bracketed phrase");
    auto close = completion.find(']', open + 1);
    if (close == std::string::npos) throw NoBrackets("completion contains no closed bracket");
    std::string phrase = trim(completion.substr(open + 1, close - open - 1));
    if (phrase.empty()) throw NotOnScreen(phrase);

    // Ordinal answers pick the element directly; the compact serialization
    // shows them, and it is the only handle a textless element has.
    if (std::all_of(phrase.begin(), phrase.end(),
                    [](unsigned char c) { return std::isdigit(c); })) {
        int ordinal = -1;
        try {
            ordinal = std::stoi(phrase);
        } catch (const std::exception&) {
            throw NotOnScreen(phrase);
        }
        for (const auto& element : screen.elements)
            if (element.element_id == ordinal) return element;
        throw NotOnScreen(phrase);
    }

    std::string phrase_norm = normalize_text(phrase);
    struct Scored {
        const UIElement* element;
        std::string repr;
    };
    std::vector<Scored> candidates;
    for (const auto& element : screen.elements) {
        auto repr = try_element_repr(element);
        if (repr) candidates.push_back(Scored{&element, *repr});
    }

    auto pick = [&phrase](const std::vector<const UIElement*>& hits) -> const UIElement* {
        if (hits.empty()) return nullptr;
        if (hits.size() > 1) {
            std::vector<int> ids;
            for (const auto* e : hits) ids.push_back(e->element_id);
            throw AmbiguousMatch(phrase, std::move(ids));
        }
        return hits.front();
    };

    // Stage order: exact equality, exact containment, then the same pair
    // case-insensitively (the phrase as written may differ in case).
    std::string phrase_exact = trim(phrase);
    for (int stage = 0; stage < 4; ++stage) {
        std::vector<const UIElement*> hits;
        for (const auto& c : candidates) {
            bool hit = false;
            switch (stage) {
                case 0: hit = c.repr == phrase_exact; break;
                case 1: hit = !phrase_exact.empty() &&
                              c.repr.find(phrase_exact) != std::string::npos; break;
                case 2: hit = c.repr == phrase_norm; break;
                case 3: hit = !phrase_norm.empty() &&
                              c.repr.find(phrase_norm) != std::string::npos; break;
            }
            if (hit) hits.push_back(c.element);
        }
        if (const UIElement* chosen = pick(hits)) return *chosen;
    }
    throw NotOnScreen(phrase);
}

MappingOutcome resolve(const std::string& target, const UIScreen& screen,
                       const EmbeddingProvider& provider, LlmClient& llm,
                       const MapperConfig& config) {
    SimilarityResult similarity = map_by_similarity(target, screen, provider, config.threshold);
    if (similarity.matched) {
        MappingOutcome outcome;
        outcome.matched = *similarity.matched;
        outcome.best_score = similarity.best_score;
        outcome.method = MappingMethod::similarity;
        return outcome;
    }

    if (!config.optimizer_enabled)
        throw MappingFailed(similarity.best_score, /*optimizer_used=*/false);

    // A client failure here (timeout, fixture miss) fails the step the
    // same way a useless answer does; run-level status carries the detail.
    LlmExchange exchange;
    try {
        exchange = llm.complete(build_mapping_prompt(target, screen));
    } catch (const std::exception&) {
        throw MappingFailed(similarity.best_score, /*optimizer_used=*/true);
    }
    exchange.stage = "map_optimizer";

    try {
        UIElement element = parse_identified_element(exchange.completion_text, screen);
        MappingOutcome outcome;
        outcome.matched = std::move(element);
        outcome.best_score = similarity.best_score;
        outcome.method = MappingMethod::llm_optimizer;
        outcome.exchange = std::move(exchange);
        return outcome;
    } catch (const std::exception&) {
        throw MappingFailed(similarity.best_score, /*optimizer_used=*/true, std::move(exchange));
    }
}

}  // namespace cat
