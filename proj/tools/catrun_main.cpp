#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cat/corpus.hpp"
#include "cat/decompose.hpp"
#include "cat/device.hpp"
#include "cat/embed.hpp"
#include "cat/llm.hpp"
#include "cat/retrieve.hpp"
#include "cat/runner.hpp"
#include "cat/util.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRunFailure = 3;
constexpr int kExitInfrastructure = 4;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Everything a subcommand can consume, config-file values overridden by
// flags. Unknown config keys are rejected.
struct Options {
    std::string provider = "ngram";
    std::string provider_endpoint;
    std::string provider_name = "remote";
    std::size_t provider_dimension = 0;
    std::string llm;    // fixture:DIR | remote:URL
    std::string model = "gpt-4";
    std::string device;  // sim:PATH | cmd:PATH
    std::string index_path;
    std::string corpus_path;
    double threshold = 0.80;
    bool optimizer_enabled = true;
    std::size_t shots_k = 1;
    int max_steps = 25;
    int parallelism = 1;
    std::string prompt_rate = "3";
    std::string completion_rate = "3";
    std::string prompt_template_path;
    std::uint64_t seed = 0;
};

const std::map<std::string, int>& config_keys() {
    static const std::map<std::string, int> keys = {
        {"provider", 0},           {"provider.endpoint", 0}, {"provider.name", 0},
        {"provider.dimension", 0}, {"llm", 0},               {"model", 0},
        {"device", 0},             {"index", 0},             {"corpus", 0},
        {"mapper.threshold", 0},   {"mapper.optimizer_enabled", 0},
        {"shots_k", 0},            {"max_steps", 0},         {"parallelism", 0},
        {"price.prompt_rate_per_1m", 0}, {"price.completion_rate_per_1m", 0},
        {"prompt_template", 0},    {"seed", 0},
    };
    return keys;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::map<std::string, std::string> values;
    std::string text = cat::read_file(path);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (cat::trim(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) + " is not key=value");
        std::string key = cat::trim(line.substr(0, eq));
        if (!config_keys().count(key)) throw UsageError("unknown config key '" + key + "'");
        values[key] = cat::trim(line.substr(eq + 1));
    }
    return values;
}

// Config-file values apply only where the active subcommand did not get
// the corresponding flag: flags win.
void apply_config(const std::map<std::string, std::string>& values, Options& options,
                  CLI::App* active) {
    auto flag_given = [active](const char* name) {
        if (!active) return false;
        const CLI::Option* opt = active->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    auto get = [&values](const char* key) -> const std::string* {
        auto it = values.find(key);
        return it == values.end() ? nullptr : &it->second;
    };

    try {
        if (const auto* v = get("provider"); v && !flag_given("--provider")) options.provider = *v;
        if (const auto* v = get("provider.endpoint"); v && !flag_given("--provider-endpoint"))
            options.provider_endpoint = *v;
        if (const auto* v = get("provider.name"); v && !flag_given("--provider-name"))
            options.provider_name = *v;
        if (const auto* v = get("provider.dimension"); v && !flag_given("--provider-dim"))
            options.provider_dimension = std::stoul(*v);
        if (const auto* v = get("llm"); v && !flag_given("--llm")) options.llm = *v;
        if (const auto* v = get("model"); v && !flag_given("--model")) options.model = *v;
        if (const auto* v = get("device"); v && !flag_given("--device")) options.device = *v;
        if (const auto* v = get("index"); v && !flag_given("--index")) options.index_path = *v;
        if (const auto* v = get("corpus"); v && !flag_given("--corpus")) options.corpus_path = *v;
        if (const auto* v = get("mapper.threshold"); v && !flag_given("--threshold"))
            options.threshold = std::stod(*v);
        if (const auto* v = get("mapper.optimizer_enabled"); v && !flag_given("--no-optimizer")) {
            if (*v != "true" && *v != "false")
                throw UsageError("mapper.optimizer_enabled must be true or false");
            options.optimizer_enabled = *v == "true";
        }
        if (const auto* v = get("shots_k"); v && !flag_given("--shots"))
            options.shots_k = std::stoul(*v);
        if (const auto* v = get("max_steps"); v && !flag_given("--max-steps"))
            options.max_steps = std::stoi(*v);
        if (const auto* v = get("parallelism"); v && !flag_given("--parallelism"))
            options.parallelism = std::stoi(*v);
        if (const auto* v = get("price.prompt_rate_per_1m"); v && !flag_given("--prompt-rate"))
            options.prompt_rate = *v;
        if (const auto* v = get("price.completion_rate_per_1m");
            v && !flag_given("--completion-rate"))
            options.completion_rate = *v;
        if (const auto* v = get("prompt_template"); v && !flag_given("--prompt-template"))
            options.prompt_template_path = *v;
        if (const auto* v = get("seed"); v && !flag_given("--seed"))
            options.seed = std::stoull(*v);
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad config value: ") + e.what());
    }
}

std::pair<std::string, std::string> split_selector(const std::string& selector) {
    auto colon = selector.find(':');
    if (colon == std::string::npos) return {selector, ""};
    return {selector.substr(0, colon), selector.substr(colon + 1)};
}

std::unique_ptr<cat::EmbeddingProvider> make_provider(const Options& options) {
    if (options.provider == "ngram") return std::make_unique<cat::NgramProvider>();
    if (options.provider == "remote") {
        if (options.provider_endpoint.empty() || options.provider_dimension == 0)
            throw UsageError("remote provider requires provider.endpoint and provider.dimension");
        return std::make_unique<cat::RemoteEmbeddingProvider>(
            options.provider_endpoint, options.provider_name, options.provider_dimension);
    }
    throw UsageError("unknown provider '" + options.provider + "' (expected ngram or remote)");
}

cat::PriceModel make_price_model(const Options& options) {
    cat::PriceModel model;
    model.prompt_rate_per_million = cat::Money::parse(options.prompt_rate);
    model.completion_rate_per_million = cat::Money::parse(options.completion_rate);
    return model;
}

std::unique_ptr<cat::LlmClient> make_llm(const Options& options) {
    if (options.llm.empty()) throw UsageError("--llm is required (fixture:DIR or remote:URL)");
    auto [kind, payload] = split_selector(options.llm);
    if (kind == "fixture") {
        if (payload.empty()) throw UsageError("fixture llm selector needs a directory");
        return std::make_unique<cat::FixtureLlmClient>(payload, make_price_model(options));
    }
    if (kind == "remote") {
        if (payload.empty()) throw UsageError("remote llm selector needs an endpoint URL");
        return std::make_unique<cat::RemoteLlmClient>(payload, options.model,
                                                      make_price_model(options));
    }
    throw UsageError("unknown llm selector '" + options.llm + "'");
}

cat::SessionFactory make_session_factory(const Options& options) {
    if (options.device.empty())
        throw UsageError("--device is required (sim:MODEL.json or cmd:ADAPTER.json)");
    auto [kind, payload] = split_selector(options.device);
    if (kind == "sim") {
        auto model = std::make_shared<const cat::AppModel>(cat::load_app_model(payload));
        return [model]() -> std::unique_ptr<cat::DeviceSession> {
            return std::make_unique<cat::SimulatedSession>(model);
        };
    }
    if (kind == "cmd") {
        cat::AdapterConfig config = cat::AdapterConfig::from_file(payload);
        return [config]() -> std::unique_ptr<cat::DeviceSession> {
            return std::make_unique<cat::ExternalCommandSession>(config);
        };
    }
    throw UsageError("unknown device selector '" + options.device + "'");
}

cat::RunnerConfig make_runner_config(const Options& options) {
    cat::RunnerConfig config;
    config.shots_k = options.shots_k;
    config.mapper.threshold = options.threshold;
    config.mapper.optimizer_enabled = options.optimizer_enabled;
    config.max_steps = options.max_steps;
    config.parallelism = options.parallelism;
    if (!options.prompt_template_path.empty())
        config.prompt_template = cat::PromptTemplate::from_file(options.prompt_template_path);
    return config;
}

struct LoadedRetrieval {
    cat::ExampleSet corpus;
    cat::RetrievalIndex index;
};

LoadedRetrieval load_retrieval(const Options& options, const cat::EmbeddingProvider& provider) {
    if (options.corpus_path.empty()) throw UsageError("--corpus is required");
    LoadedRetrieval loaded;
    loaded.corpus = cat::load_examples(options.corpus_path);
    if (options.index_path.empty())
        loaded.index = cat::build_index(loaded.corpus, provider);
    else
        loaded.index = cat::load_index(options.index_path, loaded.corpus);
    return loaded;
}

void print_ledger(const cat::RunLedger& ledger) {
    std::cout << "task " << ledger.task_id << '\n';
    std::cout << "status " << cat::to_string(ledger.status);
    if (ledger.failed_step) std::cout << " (step " << *ledger.failed_step << ')';
    std::cout << '\n';
    std::cout << "steps_executed " << ledger.steps_executed << '\n';
    std::cout << "llm_calls " << ledger.exchanges.size() << '\n';
    std::cout << "total_price $" << ledger.total_price.str() << '\n';
    std::cout << "wall_time_ms " << ledger.wall_time_ms << '\n';
    std::cout << "screen_trace";
    for (const auto& id : ledger.screen_trace) std::cout << ' ' << id;
    std::cout << '\n';
    if (!ledger.detail.empty()) std::cout << "detail " << ledger.detail << '\n';
}

int cmd_index(const Options& options, const std::string& out_path) {
    auto provider = make_provider(options);
    if (options.corpus_path.empty()) throw UsageError("--corpus is required");
    cat::ExampleSet corpus = cat::load_examples(options.corpus_path);
    cat::RetrievalIndex index = cat::build_index(corpus, *provider);
    cat::save_index(index, out_path);
    std::cout << "indexed " << index.entries.size() << " examples\n";
    return kExitOk;
}

int cmd_run(const Options& options, const std::string& task_text,
            const std::optional<std::string>& expect_screen) {
    auto provider = make_provider(options);
    LoadedRetrieval loaded = load_retrieval(options, *provider);
    cat::Retriever retriever(loaded.index, loaded.corpus, *provider);
    auto llm = make_llm(options);
    auto sessions = make_session_factory(options);

    cat::TaskSpec task;
    task.id = "cli-task";
    task.description = task_text;
    task.expect_screen = expect_screen;

    auto session = sessions();
    cat::RunnerDeps deps{&retriever, llm.get(), provider.get(), session.get()};
    cat::RunLedger ledger = cat::run_task(task, make_runner_config(options), deps);
    print_ledger(ledger);
    return ledger.status == cat::RunStatus::completed ? kExitOk : kExitRunFailure;
}

int cmd_batch(const Options& options, const std::string& tasks_path,
              const std::string& ledgers_path, const std::string& format) {
    std::vector<cat::TaskSpec> tasks = cat::load_tasks(tasks_path);
    if (tasks.empty()) throw UsageError("task file is empty: " + tasks_path);

    auto provider = make_provider(options);
    LoadedRetrieval loaded = load_retrieval(options, *provider);
    cat::Retriever retriever(loaded.index, loaded.corpus, *provider);
    auto llm = make_llm(options);
    auto sessions = make_session_factory(options);

    cat::BatchReport batch = cat::run_batch(tasks, make_runner_config(options), retriever, *llm,
                                            *provider, sessions);
    if (!ledgers_path.empty()) cat::save_ledgers(batch.ledgers, ledgers_path);
    std::cout << cat::report(batch.ledgers,
                             format == "json" ? cat::ReportFormat::json : cat::ReportFormat::table);
    std::cout.flush();
    return kExitOk;
}

int cmd_report(const std::string& ledgers_path, const std::string& format) {
    std::vector<cat::RunLedger> ledgers = cat::load_ledgers(ledgers_path);
    if (ledgers.empty()) throw UsageError("ledger file is empty: " + ledgers_path);
    std::cout << cat::report(ledgers,
                             format == "json" ? cat::ReportFormat::json : cat::ReportFormat::table);
    std::cout.flush();
    return kExitOk;
}

int cmd_split(const Options& options, double fraction, const std::string& test_out,
              const std::string& retrieval_out) {
    if (options.corpus_path.empty()) throw UsageError("--corpus is required");
    if (fraction <= 0.0 || fraction >= 1.0)
        throw UsageError("--fraction must be inside (0,1)");
    cat::ExampleSet corpus = cat::load_examples(options.corpus_path);
    cat::SplitResult split = cat::split_by_activity(corpus, fraction, options.seed);
    cat::save_examples(split.test, test_out);
    cat::save_examples(split.retrieval, retrieval_out);
    std::cout << "test " << split.test.size() << " examples\n";
    std::cout << "retrieval " << split.retrieval.size() << " examples\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"catrun: decompose natural-language app tasks into action steps and drive "
                 "them against a device"};
    app.require_subcommand(1);

    Options options;
    std::string config_path;
    app.add_option("--config", config_path, "key=value config file; flags override it");

    auto add_common = [&options](CLI::App* cmd) {
        cmd->add_option("--provider", options.provider, "embedding provider: ngram or remote");
        cmd->add_option("--provider-endpoint", options.provider_endpoint,
                        "remote embedding endpoint URL");
        cmd->add_option("--provider-name", options.provider_name, "remote provider name tag");
        cmd->add_option("--provider-dim", options.provider_dimension,
                        "remote provider vector dimension");
        cmd->add_option("--corpus", options.corpus_path, "example store (JSON lines)");
    };
    auto add_run_flags = [&options](CLI::App* cmd) {
        cmd->add_option("--llm", options.llm, "llm client: fixture:DIR or remote:URL");
        cmd->add_option("--model", options.model, "remote llm model name");
        cmd->add_option("--device", options.device, "device: sim:MODEL.json or cmd:ADAPTER.json");
        cmd->add_option("--index", options.index_path,
                        "retrieval index file (built in-memory when omitted)");
        cmd->add_option("--shots", options.shots_k, "retrieved examples per prompt (0 = 0-shot)");
        cmd->add_option("--threshold", options.threshold, "similarity gate in [0,1]")
            ->check(CLI::Range(0.0, 1.0));
        cmd->add_flag_callback("--no-optimizer",
                               [&options]() { options.optimizer_enabled = false; },
                               "disable the llm mapping optimizer");
        cmd->add_option("--max-steps", options.max_steps, "device action budget per run");
        cmd->add_option("--prompt-template", options.prompt_template_path,
                        "decomposition prompt template file");
        cmd->add_option("--prompt-rate", options.prompt_rate, "price per 1M prompt tokens");
        cmd->add_option("--completion-rate", options.completion_rate,
                        "price per 1M completion tokens");
    };

    auto* index_cmd = app.add_subcommand("index", "embed a corpus and save the retrieval index");
    std::string index_out;
    add_common(index_cmd);
    index_cmd->add_option("--out", index_out, "index output path")->required();

    auto* run_cmd = app.add_subcommand("run", "automate one task description");
    std::string task_text;
    std::string expect_screen;
    add_common(run_cmd);
    add_run_flags(run_cmd);
    run_cmd->add_option("--task", task_text, "task description")->required();
    run_cmd->add_option("--expect-screen", expect_screen,
                        "assert the run ends on this screen id");

    auto* batch_cmd = app.add_subcommand("batch", "run every task in a file and report");
    std::string tasks_path;
    std::string ledgers_out;
    std::string format = "table";
    add_common(batch_cmd);
    add_run_flags(batch_cmd);
    batch_cmd->add_option("--tasks", tasks_path, "task file (JSON lines)")->required();
    batch_cmd->add_option("--ledgers", ledgers_out, "persist per-task ledgers to this path");
    batch_cmd->add_option("--format", format, "report format: table or json");
    batch_cmd->add_option("--parallelism", options.parallelism, "concurrent task runs");

    auto* report_cmd = app.add_subcommand("report", "render a report from persisted ledgers");
    std::string ledgers_in;
    report_cmd->add_option("--ledgers", ledgers_in, "ledger file from batch")->required();
    report_cmd->add_option("--format", format, "report format: table or json");

    auto* split_cmd = app.add_subcommand("split", "leakage-free corpus split by activity");
    double fraction = 0.05;
    std::string test_out;
    std::string retrieval_out;
    add_common(split_cmd);
    split_cmd->add_option("--fraction", fraction, "test-side fraction in (0,1)");
    split_cmd->add_option("--seed", options.seed, "shuffle seed");
    split_cmd->add_option("--test-out", test_out, "test-side output path")->required();
    split_cmd->add_option("--retrieval-out", retrieval_out, "retrieval-side output path")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (!config_path.empty()) {
            CLI::App* active = nullptr;
            for (CLI::App* cmd : {index_cmd, run_cmd, batch_cmd, report_cmd, split_cmd})
                if (cmd->parsed()) active = cmd;
            apply_config(parse_config_file(config_path), options, active);
        }

        if (index_cmd->parsed()) return cmd_index(options, index_out);
        if (run_cmd->parsed()) {
            std::optional<std::string> expect;
            if (!expect_screen.empty()) expect = expect_screen;
            return cmd_run(options, task_text, expect);
        }
        if (batch_cmd->parsed()) return cmd_batch(options, tasks_path, ledgers_out, format);
        if (report_cmd->parsed()) return cmd_report(ledgers_in, format);
        if (split_cmd->parsed()) return cmd_split(options, fraction, test_out, retrieval_out);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cat::EmptyInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cat::EmptyTask& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInfrastructure;
    }
}
