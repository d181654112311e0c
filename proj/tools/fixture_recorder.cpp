// Regenerates the recorded LLM completions the offline test suites replay.
// A scenario file scripts what the model "said" per task description and
// per optimizer target; running a batch through a recording client then
// writes one <digest>.json per prompt. Expected per-task statuses in the
// scenario guard against silent drift when prompts or fixtures change.

#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cat/corpus.hpp"
#include "cat/device.hpp"
#include "cat/embed.hpp"
#include "cat/retrieve.hpp"
#include "cat/runner.hpp"
#include "cat/util.hpp"

namespace {

using nlohmann::json;

struct Scenario {
    std::string corpus_path;
    std::string tasks_path;
    std::string model_path;
    std::size_t shots_k = 1;
    bool optimizer_enabled = true;
    double threshold = 0.80;
    std::map<std::string, std::string> plans;              // task description -> completion
    std::map<std::string, std::string> optimizer_answers;  // target phrase -> completion
    std::map<std::string, std::string> expected;           // task id -> status
};

Scenario load_scenario(const std::string& path) {
    json j = json::parse(cat::read_file(path));
    Scenario s;
    s.corpus_path = j.at("corpus").get<std::string>();
    s.tasks_path = j.at("tasks").get<std::string>();
    s.model_path = j.at("model").get<std::string>();
    s.shots_k = j.value("shots_k", std::size_t{1});
    s.optimizer_enabled = j.value("optimizer_enabled", true);
    s.threshold = j.value("threshold", 0.80);
    for (const auto& [k, v] : j.at("plans").items()) s.plans[k] = v.get<std::string>();
    if (j.contains("optimizer_answers"))
        for (const auto& [k, v] : j.at("optimizer_answers").items())
            s.optimizer_answers[k] = v.get<std::string>();
    if (j.contains("expected"))
        for (const auto& [k, v] : j.at("expected").items()) s.expected[k] = v.get<std::string>();
    return s;
}

std::string extract_quoted_after(const std::string& text, const std::string& marker,
                                 bool last_occurrence) {
    std::size_t at = last_occurrence ? text.rfind(marker) : text.find(marker);
    if (at == std::string::npos) return {};
    std::size_t open = text.find('"', at);
    if (open == std::string::npos) return {};
    std::size_t close = text.find('"', open + 1);
    if (close == std::string::npos) return {};
    return text.substr(open + 1, close - open - 1);
}

// Scripted model: answers decomposition prompts from `plans` and mapping
// prompts from `optimizer_answers`, erroring loudly on anything
// unscripted so fixture gaps never go unnoticed.
std::string scripted_completion(const Scenario& scenario, const cat::PromptMessages& prompt) {
    std::string text;
    for (const auto& m : prompt.messages) text += m.content;

    if (text.find("Identified element ->") != std::string::npos) {
        std::string target = extract_quoted_after(text, "Target element ->", false);
        auto it = scenario.optimizer_answers.find(target);
        if (it == scenario.optimizer_answers.end())
            throw cat::Error("scenario has no optimizer answer for target '" + target + "'");
        return it->second;
    }

    std::string task = extract_quoted_after(text, "Task description ->", true);
    auto it = scenario.plans.find(task);
    if (it == scenario.plans.end())
        throw cat::Error("scenario has no plan for task '" + task + "'");
    return it->second;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"record scripted LLM completions into a replayable fixture directory"};
    std::string scenario_path;
    std::string llm_dir;
    bool record = false;
    app.add_option("--scenario", scenario_path, "scenario JSON")->required();
    app.add_option("--llm-dir", llm_dir, "fixture directory to replay from")->required();
    app.add_flag("--record", record, "record unseen prompts via the scripted model");
    CLI11_PARSE(app, argc, argv);

    try {
        Scenario scenario = load_scenario(scenario_path);

        cat::NgramProvider provider;
        cat::ExampleSet corpus = cat::load_examples(scenario.corpus_path);
        cat::RetrievalIndex index = cat::build_index(corpus, provider);
        cat::Retriever retriever(index, corpus, provider);
        auto tasks = cat::load_tasks(scenario.tasks_path);
        auto model = std::make_shared<const cat::AppModel>(
            cat::load_app_model(scenario.model_path));

        std::shared_ptr<cat::LlmClient> delegate;
        if (record)
            delegate = std::make_shared<cat::CallbackLlmClient>(
                [&scenario](const cat::PromptMessages& prompt) {
                    return scripted_completion(scenario, prompt);
                });
        cat::FixtureLlmClient llm(llm_dir, cat::PriceModel{}, delegate);

        cat::RunnerConfig config;
        config.shots_k = scenario.shots_k;
        config.mapper.threshold = scenario.threshold;
        config.mapper.optimizer_enabled = scenario.optimizer_enabled;

        cat::BatchReport batch = cat::run_batch(
            tasks, config, retriever, llm, provider,
            [&model]() -> std::unique_ptr<cat::DeviceSession> {
                return std::make_unique<cat::SimulatedSession>(model);
            });

        int drift = 0;
        for (const auto& ledger : batch.ledgers) {
            std::string status(cat::to_string(ledger.status));
            std::cout << ledger.task_id << ": " << status;
            std::cout << " steps=" << ledger.steps_executed
                      << " llm_calls=" << ledger.exchanges.size();
            if (ledger.failed_step) std::cout << " failed_step=" << *ledger.failed_step;
            auto expected = scenario.expected.find(ledger.task_id);
            if (expected != scenario.expected.end() && expected->second != status) {
                std::cout << "  << expected " << expected->second;
                if (!ledger.detail.empty()) std::cout << " | " << ledger.detail;
                ++drift;
            }
            std::cout << '\n';
        }
        std::cout << "completion " << batch.completion_rate * 100.0 << "%\n";
        std::cout << "recordings " << llm.recorded_count() << '\n';
        if (drift > 0) {
            std::cerr << drift << " task(s) drifted from the scenario expectations\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
