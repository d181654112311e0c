#include "cat/runner.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cat/util.hpp"

namespace cat {
namespace {

using nlohmann::json;

json exchange_to_json(const LlmExchange& exchange) {
    json j;
    j["stage"] = exchange.stage;
    j["prompt_tokens"] = exchange.prompt_tokens;
    j["completion_tokens"] = exchange.completion_tokens;
    j["latency_ms"] = exchange.latency_ms;
    j["price"] = exchange.cost.str();
    return j;
}

std::map<std::string, int> status_counts(const std::vector<RunLedger>& ledgers) {
    std::map<std::string, int> counts;
    for (const auto& ledger : ledgers) ++counts[std::string(to_string(ledger.status))];
    return counts;
}

}  // namespace

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::completed: return "completed";
        case RunStatus::failed_decomposition: return "failed_decomposition";
        case RunStatus::failed_mapping: return "failed_mapping";
        case RunStatus::failed_transition: return "failed_transition";
        case RunStatus::failed_assertion: return "failed_assertion";
        case RunStatus::aborted_budget: return "aborted_budget";
    }
    return "completed";
}

RunStatus run_status_from(std::string_view text) {
    if (text == "completed") return RunStatus::completed;
    if (text == "failed_decomposition") return RunStatus::failed_decomposition;
    if (text == "failed_mapping") return RunStatus::failed_mapping;
    if (text == "failed_transition") return RunStatus::failed_transition;
    if (text == "failed_assertion") return RunStatus::failed_assertion;
    if (text == "aborted_budget") return RunStatus::aborted_budget;
    throw Error("unknown run status: '" + std::string(text) + "'");
}

std::vector<TaskSpec> load_tasks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot open task file: " + path.string());

    std::vector<TaskSpec> tasks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord(line_no, std::string("invalid JSON: ") + e.what());
        }
        TaskSpec task;
        if (!j.contains("description") || !j.at("description").is_string())
            throw MalformedRecord(line_no, "record missing string field 'description'");
        task.description = j.at("description").get<std::string>();
        if (trim(task.description).empty())
            throw MalformedRecord(line_no, "description is empty");
        task.id = j.value("id", "task-" + std::to_string(line_no));
        if (j.contains("expect_screen"))
            task.expect_screen = j.at("expect_screen").get<std::string>();
        tasks.push_back(std::move(task));
    }
    return tasks;
}

RunLedger run_task(const TaskSpec& task, const RunnerConfig& config, RunnerDeps deps) {
    RunLedger ledger;
    ledger.task_id = task.id;

    auto start = std::chrono::steady_clock::now();
    auto finish = [&ledger, start]() {
        ledger.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - start)
                                  .count();
        ledger.total_price = Money();
        for (const auto& exchange : ledger.exchanges) ledger.total_price += exchange.cost;
    };

    std::vector<ActionStep> plan;
    try {
        Decomposition decomposition =
            decompose(task.description, *deps.retriever, *deps.llm, config.shots_k,
                      config.prompt_template);
        plan = std::move(decomposition.steps);
        ledger.exchanges.push_back(std::move(decomposition.exchange));
    } catch (const PipelineError& e) {
        if (e.exchange) ledger.exchanges.push_back(*e.exchange);
        ledger.status = RunStatus::failed_decomposition;
        ledger.detail = e.what();
        finish();
        return ledger;
    }

    for (const auto& step : plan) {
        if (ledger.steps_executed >= config.max_steps) {
            ledger.status = RunStatus::aborted_budget;
            ledger.detail = "step budget of " + std::to_string(config.max_steps) + " exhausted";
            finish();
            return ledger;
        }

        UIScreen screen;
        try {
            screen = deps.device->capture_screen();
        } catch (const Error& e) {
            ledger.status = RunStatus::failed_transition;
            ledger.failed_step = step.index;
            ledger.detail = std::string("capture failed: ") + e.what();
            finish();
            return ledger;
        }
        ledger.screen_trace.push_back(screen.screen_id);

        const UIElement* element = nullptr;
        MappingOutcome outcome;
        if (step.kind != ActionKind::back) {
            try {
                outcome = resolve(step.target_phrase, screen, *deps.provider, *deps.llm,
                                  config.mapper);
            } catch (const MappingFailed& e) {
                if (e.exchange) ledger.exchanges.push_back(*e.exchange);
                ledger.status = RunStatus::failed_mapping;
                ledger.failed_step = step.index;
                ledger.detail = e.what();
                finish();
                return ledger;
            } catch (const NoElements& e) {
                ledger.status = RunStatus::failed_mapping;
                ledger.failed_step = step.index;
                ledger.detail = e.what();
                finish();
                return ledger;
            }
            if (outcome.exchange) ledger.exchanges.push_back(*outcome.exchange);
            element = &outcome.matched;
        }

        try {
            deps.device->perform(element, step);
        } catch (const NoTransition& e) {
            ledger.status = RunStatus::failed_transition;
            ledger.failed_step = step.index;
            ledger.detail = e.what();
            finish();
            return ledger;
        } catch (const CommandFailed& e) {
            ledger.status = RunStatus::failed_transition;
            ledger.failed_step = step.index;
            ledger.detail = e.what();
            finish();
            return ledger;
        }
        ++ledger.steps_executed;
    }

    try {
        UIScreen final_screen = deps.device->capture_screen();
        ledger.screen_trace.push_back(final_screen.screen_id);
    } catch (const Error& e) {
        ledger.status = RunStatus::failed_transition;
        ledger.detail = std::string("final capture failed: ") + e.what();
        finish();
        return ledger;
    }

    if (task.expect_screen && ledger.screen_trace.back() != *task.expect_screen) {
        ledger.status = RunStatus::failed_assertion;
        ledger.detail = "expected final screen '" + *task.expect_screen + "', got '" +
                        ledger.screen_trace.back() + "'";
    } else {
        ledger.status = RunStatus::completed;
    }
    finish();
    return ledger;
}

BatchReport run_batch(const std::vector<TaskSpec>& tasks, const RunnerConfig& config,
                      const Retriever& retriever, LlmClient& llm,
                      const EmbeddingProvider& provider, const SessionFactory& sessions) {
    if (tasks.empty()) throw EmptyInput("batch requires at least one task");

    std::vector<RunLedger> ledgers(tasks.size());
    std::vector<std::string> errors(tasks.size());
    const auto n = static_cast<std::ptrdiff_t>(tasks.size());
    const int threads = std::max(1, config.parallelism);

#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            auto session = sessions();
            RunnerDeps deps{&retriever, &llm, &provider, session.get()};
            ledgers[idx] = run_task(tasks[idx], config, deps);
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw Error("task '" + tasks[i].id + "' hit an infrastructure fault: " + errors[i]);

    return summarize(std::move(ledgers));
}

BatchReport summarize(std::vector<RunLedger> ledgers) {
    BatchReport report;
    report.n_tasks = ledgers.size();

    std::size_t completed = 0;
    std::int64_t cost_micros = 0;
    std::int64_t wall_ms = 0;
    for (const auto& ledger : ledgers) {
        if (ledger.status == RunStatus::completed) ++completed;
        cost_micros += ledger.total_price.micros();
        wall_ms += ledger.wall_time_ms;
    }
    if (!ledgers.empty()) {
        report.completion_rate =
            static_cast<double>(completed) / static_cast<double>(ledgers.size());
        report.avg_cost = Money::from_micros(
            div_round_half_even(cost_micros, static_cast<std::int64_t>(ledgers.size())));
        report.avg_time_min = static_cast<double>(wall_ms) /
                              static_cast<double>(ledgers.size()) / 60000.0;
    }
    report.ledgers = std::move(ledgers);
    return report;
}

std::string report(const std::vector<RunLedger>& ledgers, ReportFormat format) {
    if (ledgers.empty()) throw EmptyInput("report requires at least one ledger");
    BatchReport summary = summarize(ledgers);

    if (format == ReportFormat::json) {
        json j;
        j["n_tasks"] = summary.n_tasks;
        j["completion_rate"] = summary.completion_rate;
        j["avg_cost"] = summary.avg_cost.str();
        j["avg_time_min"] = summary.avg_time_min;
        j["by_status"] = status_counts(ledgers);
        j["tasks"] = json::array();
        for (const auto& ledger : ledgers) {
            json t;
            t["task_id"] = ledger.task_id;
            t["status"] = std::string(to_string(ledger.status));
            t["steps_executed"] = ledger.steps_executed;
            t["total_price"] = ledger.total_price.str();
            t["wall_time_ms"] = ledger.wall_time_ms;
            j["tasks"].push_back(std::move(t));
        }
        return j.dump(2);
    }

    std::ostringstream out;
    char completion[32];
    std::snprintf(completion, sizeof(completion), "%.1f", summary.completion_rate * 100.0);
    char minutes[32];
    std::snprintf(minutes, sizeof(minutes), "%.2f", summary.avg_time_min);

    out << "tasks " << summary.n_tasks << '\n';
    out << "completion " << completion << "%\n";
    out << "avg_cost $" << summary.avg_cost.str() << '\n';
    out << "avg_time_min " << minutes << '\n';
    for (const auto& [status, count] : status_counts(ledgers))
        out << "status " << status << ": " << count << '\n';
    return out.str();
}

void save_ledgers(const std::vector<RunLedger>& ledgers, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& ledger : ledgers) {
        json j;
        j["task_id"] = ledger.task_id;
        j["status"] = std::string(to_string(ledger.status));
        if (ledger.failed_step) j["failed_step"] = *ledger.failed_step;
        j["steps_executed"] = ledger.steps_executed;
        j["exchanges"] = json::array();
        for (const auto& exchange : ledger.exchanges)
            j["exchanges"].push_back(exchange_to_json(exchange));
        j["total_price"] = ledger.total_price.str();
        j["wall_time_ms"] = ledger.wall_time_ms;
        j["screen_trace"] = ledger.screen_trace;
        if (!ledger.detail.empty()) j["detail"] = ledger.detail;
        out << j.dump() << '\n';
    }
    write_file(path, out.str());
}

std::vector<RunLedger> load_ledgers(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot open ledger file: " + path.string());

    std::vector<RunLedger> ledgers;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw MalformedRecord(line_no, std::string("invalid JSON: ") + e.what());
        }
        RunLedger ledger;
        ledger.task_id = j.at("task_id").get<std::string>();
        ledger.status = run_status_from(j.at("status").get<std::string>());
        if (j.contains("failed_step")) ledger.failed_step = j.at("failed_step").get<int>();
        ledger.steps_executed = j.at("steps_executed").get<int>();
        for (const auto& ej : j.at("exchanges")) {
            LlmExchange exchange;
            exchange.stage = ej.at("stage").get<std::string>();
            exchange.prompt_tokens = ej.at("prompt_tokens").get<std::int64_t>();
            exchange.completion_tokens = ej.at("completion_tokens").get<std::int64_t>();
            exchange.latency_ms = ej.at("latency_ms").get<std::int64_t>();
            exchange.cost = Money::parse(ej.at("price").get<std::string>());
            ledger.exchanges.push_back(std::move(exchange));
        }
        ledger.total_price = Money::parse(j.at("total_price").get<std::string>());
        ledger.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
        ledger.screen_trace = j.at("screen_trace").get<std::vector<std::string>>();
        ledger.detail = j.value("detail", std::string());
        ledgers.push_back(std::move(ledger));
    }
    return ledgers;
}

}  // namespace cat
