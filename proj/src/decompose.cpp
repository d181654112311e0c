#include "cat/decompose.hpp"

#include <cctype>
#include <sstream>

#include "cat/util.hpp"

namespace cat {
namespace {

constexpr std::string_view kBundledTemplate =
    "I want you to act as a professional developer. I expect you to analyze the task "
    "description I provide and respond with potential actions that could interact with the "
    "device. Please enumerate these actions and encapsulate the operations within brackets "
    "[like this].\n"
    "\n"
    "{examples}"
    "Here is the testing task:\n"
    "  Task description -> \"{task}\"\n"
    "  Actions -> ";

std::string replace_all(std::string text, std::string_view placeholder, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
    return text;
}

// Scanner over a completion. Positions are byte offsets into the original
// text so errors point at the right place.
class ActionScanner {
public:
    explicit ActionScanner(const std::string& text) : text_(text) {}

    std::vector<ActionStep> parse() {
        std::size_t start = find_list_start();
        if (start == std::string::npos)
            throw MalformedStep(0, "no numbered action list found");
        pos_ = start;

        std::vector<ActionStep> steps;
        int expected = 1;
        while (true) {
            steps.push_back(parse_step(expected));
            ++expected;
            std::size_t after = pos_;
            skip_ws();
            if (eof()) break;
            std::size_t probe = pos_;
            int next_number = 0;
            if (!peek_number_dot(next_number)) {
                pos_ = after;  // trailing prose, discarded
                break;
            }
            if (next_number != expected)
                throw NonContiguousNumbering("expected step " + std::to_string(expected) +
                                             ", found " + std::to_string(next_number));
            pos_ = probe;  // parse_step re-reads the number
        }
        return steps;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;

    bool eof() const { return pos_ >= text_.size(); }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    // "N." where N parses to `number`, cursor left after the dot.
    bool peek_number_dot(int& number) {
        std::size_t p = pos_;
        if (p >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[p]))) return false;
        int n = 0;
        while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
            n = n * 10 + (text_[p] - '0');
            ++p;
        }
        if (p >= text_.size() || text_[p] != '.') return false;
        number = n;
        pos_ = p + 1;
        return true;
    }

    std::size_t find_list_start() {
        for (std::size_t i = 0; i < text_.size(); ++i) {
            if (text_[i] != '1') continue;
            if (i > 0 && std::isdigit(static_cast<unsigned char>(text_[i - 1]))) continue;
            std::size_t p = i + 1;
            if (p >= text_.size() || text_[p] != '.') continue;
            ++p;
            while (p < text_.size() && std::isspace(static_cast<unsigned char>(text_[p]))) ++p;
            if (p < text_.size() && text_[p] == '[') return i;
        }
        return std::string::npos;
    }

    bool next_is_bracket() {
        std::size_t p = pos_;
        while (p < text_.size() && std::isspace(static_cast<unsigned char>(text_[p]))) ++p;
        return p < text_.size() && text_[p] == '[';
    }

    std::string read_bracket() {
        skip_ws();
        std::size_t at = pos_;
        if (eof() || text_[pos_] != '[') throw MalformedStep(at, "expected '['");
        auto end = text_.find(']', pos_ + 1);
        if (end == std::string::npos) throw MalformedStep(at, "unterminated bracket");
        std::string content = trim(text_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
        return content;
    }

    ActionStep parse_step(int expected) {
        skip_ws();
        std::size_t at = pos_;
        int number = 0;
        if (!peek_number_dot(number)) throw MalformedStep(at, "expected a numbered step");
        if (number != expected)
            throw NonContiguousNumbering("expected step " + std::to_string(expected) + ", found " +
                                         std::to_string(number));

        ActionStep step;
        step.index = number;
        step.kind = action_kind_from(read_bracket());

        if (step.kind == ActionKind::back) {
            // The target bracket may be omitted for back.
            if (next_is_bracket()) {
                std::string target = read_bracket();
                if (!target.empty())
                    throw MalformedStep(at, "back step must have an empty target");
            }
            return step;
        }

        step.target_phrase = read_bracket();

        if (step.kind == ActionKind::input) {
            if (!next_is_bracket()) throw MalformedStep(at, "input step requires a value bracket");
            step.value = read_bracket();
        } else if (step.kind == ActionKind::swipe || step.kind == ActionKind::scroll) {
            if (next_is_bracket()) {
                std::size_t bracket_at = pos_;
                std::string dir = read_bracket();
                auto direction = direction_from(to_lower(dir));
                if (!direction)
                    throw MalformedStep(bracket_at, "bad direction '" + dir + "'");
                step.direction = direction;
            }
        }
        return step;
    }
};

}  // namespace

PromptTemplate PromptTemplate::bundled() { return PromptTemplate{std::string(kBundledTemplate)}; }

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
    return PromptTemplate{read_file(path)};
}

std::string format_step(const ActionStep& step) {
    std::ostringstream out;
    out << step.index << ". [" << to_string(step.kind) << "] [" << step.target_phrase << ']';
    if (step.kind == ActionKind::input && step.value) out << " [" << *step.value << ']';
    if ((step.kind == ActionKind::swipe || step.kind == ActionKind::scroll) && step.direction)
        out << " [" << to_string(*step.direction) << ']';
    return out.str();
}

std::string format_plan(const std::vector<ActionStep>& steps) {
    std::string out;
    for (const auto& step : steps) {
        if (!out.empty()) out += ' ';
        out += format_step(step);
    }
    return out;
}

std::string format_example_block(const RetrievalExample& example) {
    std::string out = "Here is an example:\n";
    out += "  Task description -> \"" + example.description + "\"\n";
    out += "  Actions -> " + format_plan(example.steps) + "\n\n";
    return out;
}

PromptMessages build_decomposition_prompt(const std::string& task,
                                          const std::vector<RetrievalExample>& shots,
                                          const PromptTemplate& tpl) {
    if (trim(task).empty()) throw EmptyTask("task description is empty");

    std::string examples;
    for (const auto& shot : shots) examples += format_example_block(shot);

    std::string body = replace_all(tpl.text, "{examples}", examples);
    body = replace_all(body, "{task}", task);

    PromptMessages prompt;
    prompt.messages.push_back(Message{Role::user, std::move(body)});
    return prompt;
}

std::vector<ActionStep> parse_actions(const std::string& completion) {
    if (trim(completion).empty()) throw EmptyCompletion("completion is empty");
    return ActionScanner(completion).parse();
}

Decomposition decompose(const std::string& task, const Retriever& retriever, LlmClient& llm,
                        std::size_t shots_k, const PromptTemplate& tpl) {
    std::vector<RetrievalExample> shots;
    if (shots_k > 0) {
        try {
            for (auto& ranked : retriever.query(task, shots_k))
                shots.push_back(std::move(ranked.example));
        } catch (const std::exception& e) {
            throw PipelineError("retrieval", e.what());
        }
    }

    PromptMessages prompt = build_decomposition_prompt(task, shots, tpl);

    LlmExchange exchange;
    try {
        exchange = llm.complete(prompt);
    } catch (const std::exception& e) {
        throw PipelineError("llm", e.what());
    }
    exchange.stage = "decompose";

    try {
        Decomposition result;
        result.steps = parse_actions(exchange.completion_text);
        result.exchange = std::move(exchange);
        return result;
    } catch (const std::exception& e) {
        throw PipelineError("parse", e.what(), std::move(exchange));
    }
}

}  // namespace cat
