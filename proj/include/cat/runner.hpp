#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cat/decompose.hpp"
#include "cat/device.hpp"
#include "cat/llm.hpp"
#include "cat/mapper.hpp"
#include "cat/money.hpp"
#include "cat/retrieve.hpp"

namespace cat {

class EmptyInput : public Error {
public:
    using Error::Error;
};

enum class RunStatus {
    completed,
    failed_decomposition,
    failed_mapping,
    failed_transition,
    failed_assertion,  // every step ran but the final screen missed expect_screen
    aborted_budget,
};

std::string_view to_string(RunStatus status);
RunStatus run_status_from(std::string_view text);

struct RunLedger {
    std::string task_id;
    RunStatus status = RunStatus::completed;
    std::optional<int> failed_step;  // 1-based, for the failed_* statuses
    int steps_executed = 0;
    std::vector<LlmExchange> exchanges;
    Money total_price;                     // exact sum of exchange costs
    std::int64_t wall_time_ms = 0;         // decomposition through the final capture
    std::vector<std::string> screen_trace; // id of every capture, in order
    std::string detail;                    // human-readable failure context
};

struct BatchReport {
    std::size_t n_tasks = 0;
    double completion_rate = 0.0;
    Money avg_cost;
    double avg_time_min = 0.0;
    std::vector<RunLedger> ledgers;
};

// A task to automate: example-store record shape plus an optional final
// screen assertion.
struct TaskSpec {
    std::string id;
    std::string description;
    std::optional<std::string> expect_screen;
};

std::vector<TaskSpec> load_tasks(const std::filesystem::path& path);

struct RunnerConfig {
    std::size_t shots_k = 1;
    MapperConfig mapper;
    int max_steps = 25;
    int parallelism = 1;
    PromptTemplate prompt_template = PromptTemplate::bundled();
};

struct RunnerDeps {
    const Retriever* retriever = nullptr;
    LlmClient* llm = nullptr;
    const EmbeddingProvider* provider = nullptr;
    DeviceSession* device = nullptr;
};

// Decompose once, then capture -> map -> perform per step. Failures land
// in the ledger status; only infrastructure faults throw.
RunLedger run_task(const TaskSpec& task, const RunnerConfig& config, RunnerDeps deps);

// Independent sessions per task (fresh from the factory); task loop is
// OpenMP-parallel up to config.parallelism, ledgers in input order.
BatchReport run_batch(const std::vector<TaskSpec>& tasks, const RunnerConfig& config,
                      const Retriever& retriever, LlmClient& llm,
                      const EmbeddingProvider& provider, const SessionFactory& sessions);

enum class ReportFormat { table, json };

std::string report(const std::vector<RunLedger>& ledgers, ReportFormat format);
BatchReport summarize(std::vector<RunLedger> ledgers);

// Ledger persistence: line-delimited JSON, money as exact decimal strings.
void save_ledgers(const std::vector<RunLedger>& ledgers, const std::filesystem::path& path);
std::vector<RunLedger> load_ledgers(const std::filesystem::path& path);

}  // namespace cat
