#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cat/embed.hpp"
#include "cat/errors.hpp"
#include "cat/hierarchy.hpp"
#include "cat/llm.hpp"

namespace cat {

class NoElements : public Error {
public:
    using Error::Error;
};

class NoBrackets : public Error {
public:
    using Error::Error;
};

class NotOnScreen : public Error {
public:
    explicit NotOnScreen(const std::string& phrase)
        : Error("no on-screen element matches '" + phrase + "'"), phrase(phrase) {}
    std::string phrase;
};

class AmbiguousMatch : public Error {
public:
    AmbiguousMatch(const std::string& phrase, std::vector<int> candidates)
        : Error("'" + phrase + "' matches " + std::to_string(candidates.size()) +
                " on-screen elements"),
          phrase(phrase),
          candidates(std::move(candidates)) {}
    std::string phrase;
    std::vector<int> candidates;
};

// Raised when neither stage produced an element. Carries the optimizer
// exchange (when one happened) so the run ledger still accounts for it.
class MappingFailed : public Error {
public:
    MappingFailed(double best_score, bool optimizer_used,
                  std::optional<LlmExchange> exchange = std::nullopt)
        : Error("mapping failed, best similarity " + std::to_string(best_score) +
                (optimizer_used ? " (optimizer consulted)" : " (optimizer disabled)")),
          best_score(best_score),
          optimizer_used(optimizer_used),
          exchange(std::move(exchange)) {}
    double best_score;
    bool optimizer_used;
    std::optional<LlmExchange> exchange;
};

enum class MappingMethod { similarity, llm_optimizer };

struct MappingOutcome {
    UIElement matched;
    double best_score = 0.0;
    MappingMethod method = MappingMethod::similarity;
    std::optional<LlmExchange> exchange;  // present iff the optimizer ran
};

// Similarity stage result: `matched` empty means no element reached the
// threshold; best_score is -inf when no element had textual evidence.
struct SimilarityResult {
    std::optional<UIElement> matched;
    double best_score = 0.0;
};

struct MapperConfig {
    double threshold = 0.80;  // on cosine clamped to [0,1]
    bool optimizer_enabled = true;
};

// Scores every element (element_repr + cosine, clamped to [0,1]) and
// returns the argmax when it reaches the threshold; ties go to the lowest
// element_id. Textless elements score -inf.
SimilarityResult map_by_similarity(const std::string& target, const UIScreen& screen,
                                   const EmbeddingProvider& provider, double threshold);

// Instructions, the target element, the compact serialization of the
// simplified screen, and a dangling `Identified element ->`.
PromptMessages build_mapping_prompt(const std::string& target, const UIScreen& screen);

// First bracketed phrase of the completion, resolved against the screen.
// Resolution prefers, in order: element ordinal, exact repr equality,
// exact containment, case-insensitive equality, case-insensitive
// containment. More than one hit at a stage is AmbiguousMatch.
UIElement parse_identified_element(const std::string& completion, const UIScreen& screen);

// Similarity stage first; on a miss the optimizer makes exactly one LLM
// call when enabled. Throws MappingFailed when no element is produced.
MappingOutcome resolve(const std::string& target, const UIScreen& screen,
                       const EmbeddingProvider& provider, LlmClient& llm,
                       const MapperConfig& config);

}  // namespace cat
