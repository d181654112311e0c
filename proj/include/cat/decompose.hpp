#pragma once

#include <string>
#include <vector>

#include "cat/action.hpp"
#include "cat/corpus.hpp"
#include "cat/errors.hpp"
#include "cat/llm.hpp"
#include "cat/retrieve.hpp"

namespace cat {

class EmptyTask : public Error {
public:
    using Error::Error;
};

class EmptyCompletion : public Error {
public:
    using Error::Error;
};

class MalformedStep : public Error {
public:
    MalformedStep(std::size_t position, const std::string& text)
        : Error("malformed step at offset " + std::to_string(position) + ": " + text),
          position(position),
          text(text) {}
    std::size_t position;
    std::string text;
};

class NonContiguousNumbering : public Error {
public:
    using Error::Error;
};

// A pipeline failure tagged with the phase it came from
// ("retrieval", "llm", "parse"). Carries the exchange when the LLM call
// itself succeeded, so failed runs still account for its cost.
class PipelineError : public Error {
public:
    PipelineError(std::string phase, const std::string& detail,
                  std::optional<LlmExchange> exchange = std::nullopt)
        : Error("[" + phase + "] " + detail),
          phase(std::move(phase)),
          detail(detail),
          exchange(std::move(exchange)) {}
    std::string phase;
    std::string detail;
    std::optional<LlmExchange> exchange;
};

// Prompt text with {task} and {examples} placeholders. The default
// wording ships in the binary; an editable file can override it.
struct PromptTemplate {
    std::string text;

    static PromptTemplate bundled();
    static PromptTemplate from_file(const std::filesystem::path& path);
};

// "N. [kind] [target]" with an optional third bracket: the typed value
// for input, the direction for swipe/scroll.
std::string format_step(const ActionStep& step);
std::string format_plan(const std::vector<ActionStep>& steps);

// One few-shot block: description line plus the formatted plan.
std::string format_example_block(const RetrievalExample& example);

// Instructions, then one block per shot in retrieval-rank order, then the
// testing task ending with a dangling `Actions ->`.
PromptMessages build_decomposition_prompt(const std::string& task,
                                          const std::vector<RetrievalExample>& shots,
                                          const PromptTemplate& tpl = PromptTemplate::bundled());

// Extracts the first well-formed numbered action list from a completion.
// Prose before the list and after its last step is discarded.
std::vector<ActionStep> parse_actions(const std::string& completion);

struct Decomposition {
    std::vector<ActionStep> steps;
    LlmExchange exchange;
};

// Retrieve shots, build the prompt, one LLM call, parse. Failures are
// rethrown as PipelineError tagged with the failing phase.
Decomposition decompose(const std::string& task, const Retriever& retriever, LlmClient& llm,
                        std::size_t shots_k, const PromptTemplate& tpl = PromptTemplate::bundled());

}  // namespace cat
