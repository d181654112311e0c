#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <memory>

#include <json.hpp>

#include "cat/runner.hpp"
#include "cat/util.hpp"
#include "support/testutil.hpp"

using namespace cat;
using cat::testsupport::TempDir;

namespace {

// Tiny three-screen app with unambiguous single-word element names, so
// mapping behavior in these tests never hinges on similarity subtleties.
const char* kModelJson = R"({
  "initial_screen": "s1",
  "screens": {
    "s1": {"hierarchy": {"class": "L", "children": [
      {"class": "android.widget.Button", "text": "alpha", "clickable": true, "bounds": "[0,0][100,100]"},
      {"class": "android.widget.Button", "text": "omega", "clickable": true, "bounds": "[0,120][100,220]"}]}},
    "s2": {"hierarchy": {"class": "L", "children": [
      {"class": "android.widget.Button", "text": "beta", "clickable": true, "bounds": "[0,0][100,100]"},
      {"class": "android.widget.EditText", "desc": "field", "bounds": "[0,120][100,220]"}]}},
    "s3": {"hierarchy": {"class": "L", "children": [
      {"class": "android.widget.TextView", "text": "done"}]}}
  },
  "transitions": [
    {"from": "s1", "element_match": "alpha", "action": "tap", "to": "s2"},
    {"from": "s2", "element_match": "beta", "action": "tap", "to": "s3"},
    {"from": "s2", "element_match": "field", "action": "input", "input_pattern": "*", "to": "s2"}
  ]
})";

struct Harness {
    NgramProvider provider;
    ExampleSet corpus;
    RetrievalIndex index;
    std::shared_ptr<const AppModel> model;
    std::map<std::string, std::string> plans;
    std::string optimizer_answer = "[alpha]";
    std::atomic<int> decompose_calls{0};
    std::atomic<int> optimizer_calls{0};
    CallbackLlmClient llm;

    Harness()
        : corpus(make_corpus()),
          index(build_index(corpus, provider)),
          model(std::make_shared<const AppModel>(app_model_from_json_text(kModelJson))),
          llm([this](const PromptMessages& prompt) { return answer(prompt); }) {}

    static ExampleSet make_corpus() {
        ExampleSet set;
        RetrievalExample ex;
        ex.id = "r1";
        ex.description = "press alpha then beta";
        ex.activity = "a";
        ex.steps = parse_actions("1. [tap] [alpha] 2. [tap] [beta]");
        set.examples.push_back(ex);
        RetrievalExample other;
        other.id = "r2";
        other.description = "type into the field";
        other.activity = "b";
        other.steps = parse_actions("1. [input] [field] [hello]");
        set.examples.push_back(other);
        set.source_digest = example_set_digest(set.examples);
        return set;
    }

    std::string answer(const PromptMessages& prompt) {
        std::string text;
        for (const auto& m : prompt.messages) text += m.content;
        if (text.find("Identified element ->") != std::string::npos) {
            ++optimizer_calls;
            return optimizer_answer;
        }
        ++decompose_calls;
        auto marker = text.rfind("Task description -> \"");
        REQUIRE(marker != std::string::npos);
        auto open = text.find('"', marker);
        auto close = text.find('"', open + 1);
        std::string task = text.substr(open + 1, close - open - 1);
        auto it = plans.find(task);
        REQUIRE_MESSAGE(it != plans.end(), "no scripted plan for task: ", task);
        return it->second;
    }

    RunLedger run(const std::string& description, RunnerConfig config = {},
                  std::optional<std::string> expect = std::nullopt) {
        Retriever retriever(index, corpus, provider);
        SimulatedSession session(model);
        TaskSpec task;
        task.id = "t-" + description;
        task.description = description;
        task.expect_screen = std::move(expect);
        RunnerDeps deps{&retriever, &llm, &provider, &session};
        return run_task(task, config, deps);
    }
};

}  // namespace

TEST_SUITE("runner") {

TEST_CASE("a clean plan runs to completion with the expected trace") {
    Harness h;
    h.plans["press alpha then beta"] = "1. [tap] [alpha] 2. [tap] [beta]";
    RunLedger ledger = h.run("press alpha then beta", {}, std::string("s3"));

    CHECK(ledger.status == RunStatus::completed);
    CHECK(ledger.steps_executed == 2);
    CHECK(ledger.screen_trace == std::vector<std::string>{"s1", "s2", "s3"});
    CHECK(ledger.exchanges.size() == 1);  // decompose only
    CHECK(ledger.exchanges[0].stage == "decompose");
    CHECK(ledger.total_price == ledger.exchanges[0].cost);
    CHECK(h.decompose_calls == 1);
    CHECK(h.optimizer_calls == 0);
}

TEST_CASE("below-threshold targets route through the optimizer once") {
    Harness h;
    h.plans["launch the thing"] = "1. [tap] [launch] 2. [tap] [beta]";
    RunLedger ledger = h.run("launch the thing", {}, std::string("s3"));

    CHECK(ledger.status == RunStatus::completed);
    CHECK(h.optimizer_calls == 1);
    REQUIRE(ledger.exchanges.size() == 2);
    CHECK(ledger.exchanges[1].stage == "map_optimizer");
    Money sum = ledger.exchanges[0].cost + ledger.exchanges[1].cost;
    CHECK(ledger.total_price == sum);
}

TEST_CASE("optimizer disabled turns the same run into failed_mapping with zero mapping tokens") {
    Harness h;
    h.plans["launch the thing"] = "1. [tap] [launch] 2. [tap] [beta]";
    RunnerConfig config;
    config.mapper.optimizer_enabled = false;
    RunLedger ledger = h.run("launch the thing", config);

    CHECK(ledger.status == RunStatus::failed_mapping);
    CHECK(ledger.failed_step == 1);
    CHECK(ledger.steps_executed == 0);
    CHECK(h.optimizer_calls == 0);
    std::int64_t mapping_tokens = 0;
    for (const auto& exchange : ledger.exchanges)
        if (exchange.stage == "map_optimizer")
            mapping_tokens += exchange.prompt_tokens + exchange.completion_tokens;
    CHECK(mapping_tokens == 0);
}

TEST_CASE("unparseable completions fail decomposition but keep the exchange cost") {
    Harness h;
    h.plans["press alpha then beta"] = "I'd rather not say.";
    RunLedger ledger = h.run("press alpha then beta");
    CHECK(ledger.status == RunStatus::failed_decomposition);
    CHECK(ledger.steps_executed == 0);
    REQUIRE(ledger.exchanges.size() == 1);
    CHECK(ledger.total_price == ledger.exchanges[0].cost);
}

TEST_CASE("actions with no transition fail at that step") {
    Harness h;
    h.plans["press omega"] = "1. [tap] [omega]";
    RunLedger ledger = h.run("press omega");
    CHECK(ledger.status == RunStatus::failed_transition);
    CHECK(ledger.failed_step == 1);
}

TEST_CASE("the step budget aborts long plans") {
    Harness h;
    h.plans["type a lot"] =
        "1. [tap] [alpha] 2. [input] [field] [x] 3. [input] [field] [y] 4. [input] [field] [z]";
    RunnerConfig config;
    config.max_steps = 3;
    RunLedger ledger = h.run("type a lot", config);
    CHECK(ledger.status == RunStatus::aborted_budget);
    CHECK(ledger.steps_executed == 3);
}

TEST_CASE("final-screen assertions gate completion") {
    Harness h;
    h.plans["press alpha then beta"] = "1. [tap] [alpha] 2. [tap] [beta]";
    RunLedger ledger = h.run("press alpha then beta", {}, std::string("s1"));
    CHECK(ledger.status == RunStatus::failed_assertion);
    CHECK(ledger.steps_executed == 2);
}

TEST_CASE("back steps pop without mapping") {
    Harness h;
    h.plans["go and come back"] = "1. [tap] [alpha] 2. [back] 3. [tap] [alpha]";
    RunLedger ledger = h.run("go and come back", {}, std::string("s2"));
    CHECK(ledger.status == RunStatus::completed);
    CHECK(ledger.screen_trace == std::vector<std::string>{"s1", "s2", "s1", "s2"});
}

TEST_CASE("batches aggregate ledgers and rates") {
    Harness h;
    h.plans["press alpha then beta"] = "1. [tap] [alpha] 2. [tap] [beta]";
    h.plans["press omega"] = "1. [tap] [omega]";

    std::vector<TaskSpec> tasks;
    for (int i = 0; i < 9; ++i) {
        TaskSpec t;
        t.id = "ok-" + std::to_string(i);
        t.description = "press alpha then beta";
        t.expect_screen = "s3";
        tasks.push_back(t);
    }
    TaskSpec bad;
    bad.id = "bad";
    bad.description = "press omega";
    tasks.push_back(bad);

    Retriever retriever(h.index, h.corpus, h.provider);
    BatchReport batch = run_batch(tasks, RunnerConfig{}, retriever, h.llm, h.provider,
                                  [&h]() -> std::unique_ptr<DeviceSession> {
                                      return std::make_unique<SimulatedSession>(h.model);
                                  });

    CHECK(batch.n_tasks == 10);
    CHECK(batch.completion_rate == doctest::Approx(0.9));
    std::string table = report(batch.ledgers, ReportFormat::table);
    CHECK(table.find("completion 90.0%") != std::string::npos);

    // Ledger conservation: batch average equals the exact micro sum / n.
    std::int64_t total = 0;
    for (const auto& ledger : batch.ledgers) total += ledger.total_price.micros();
    CHECK(batch.avg_cost.micros() == div_round_half_even(total, 10));
}

TEST_CASE("task order does not leak state between runs") {
    Harness h;
    h.plans["press alpha then beta"] = "1. [tap] [alpha] 2. [tap] [beta]";
    h.plans["press omega"] = "1. [tap] [omega]";
    h.plans["launch the thing"] = "1. [tap] [launch] 2. [tap] [beta]";

    std::vector<TaskSpec> tasks;
    for (const char* d : {"press alpha then beta", "press omega", "launch the thing"}) {
        TaskSpec t;
        t.id = d;
        t.description = d;
        tasks.push_back(t);
    }

    auto run_order = [&h](std::vector<TaskSpec> order) {
        Retriever retriever(h.index, h.corpus, h.provider);
        BatchReport batch = run_batch(order, RunnerConfig{}, retriever, h.llm, h.provider,
                                      [&h]() -> std::unique_ptr<DeviceSession> {
                                          return std::make_unique<SimulatedSession>(h.model);
                                      });
        std::map<std::string, std::pair<std::string, std::vector<std::string>>> by_id;
        for (const auto& ledger : batch.ledgers)
            by_id[ledger.task_id] = {std::string(to_string(ledger.status)),
                                     ledger.screen_trace};
        return by_id;
    };

    auto forward = run_order(tasks);
    std::reverse(tasks.begin(), tasks.end());
    auto reversed = run_order(tasks);
    CHECK(forward == reversed);
}

TEST_CASE("parallel batches produce the same ledgers as serial ones") {
    Harness h;
    h.plans["press alpha then beta"] = "1. [tap] [alpha] 2. [tap] [beta]";
    h.plans["press omega"] = "1. [tap] [omega]";
    h.plans["launch the thing"] = "1. [tap] [launch] 2. [tap] [beta]";

    std::vector<TaskSpec> tasks;
    for (int i = 0; i < 12; ++i) {
        TaskSpec t;
        t.id = "t" + std::to_string(i);
        t.description = i % 3 == 0   ? "press alpha then beta"
                        : i % 3 == 1 ? "press omega"
                                     : "launch the thing";
        tasks.push_back(t);
    }

    auto run_with = [&h, &tasks](int parallelism) {
        RunnerConfig config;
        config.parallelism = parallelism;
        Retriever retriever(h.index, h.corpus, h.provider);
        return run_batch(tasks, config, retriever, h.llm, h.provider,
                         [&h]() -> std::unique_ptr<DeviceSession> {
                             return std::make_unique<SimulatedSession>(h.model);
                         });
    };

    BatchReport serial = run_with(1);
    BatchReport parallel = run_with(4);
    REQUIRE(serial.ledgers.size() == parallel.ledgers.size());
    for (std::size_t i = 0; i < serial.ledgers.size(); ++i) {
        CHECK(serial.ledgers[i].task_id == parallel.ledgers[i].task_id);
        CHECK(serial.ledgers[i].status == parallel.ledgers[i].status);
        CHECK(serial.ledgers[i].screen_trace == parallel.ledgers[i].screen_trace);
        CHECK(serial.ledgers[i].total_price == parallel.ledgers[i].total_price);
    }
    CHECK(serial.completion_rate == parallel.completion_rate);
}

TEST_CASE("single completed run dominates its batch stats") {
    Harness h;
    h.plans["press alpha then beta"] = "1. [tap] [alpha] 2. [tap] [beta]";
    TaskSpec t;
    t.id = "solo";
    t.description = "press alpha then beta";
    Retriever retriever(h.index, h.corpus, h.provider);
    BatchReport batch = run_batch({t}, RunnerConfig{}, retriever, h.llm, h.provider,
                                  [&h]() -> std::unique_ptr<DeviceSession> {
                                      return std::make_unique<SimulatedSession>(h.model);
                                  });
    CHECK(batch.completion_rate == 1.0);
    CHECK(batch.avg_cost == batch.ledgers[0].total_price);
}

TEST_CASE("report arithmetic and formats") {
    std::vector<RunLedger> ledgers(2);
    ledgers[0].task_id = "a";
    ledgers[0].status = RunStatus::completed;
    ledgers[0].total_price = Money::parse("0.10");
    ledgers[0].wall_time_ms = 60000;
    ledgers[1].task_id = "b";
    ledgers[1].status = RunStatus::failed_mapping;
    ledgers[1].total_price = Money::parse("0.20");
    ledgers[1].wall_time_ms = 120000;

    std::string table = report(ledgers, ReportFormat::table);
    CHECK(table.find("completion 50.0%") != std::string::npos);
    CHECK(table.find("avg_cost $0.150000") != std::string::npos);
    CHECK(table.find("avg_time_min 1.50") != std::string::npos);
    CHECK(table.find("status completed: 1") != std::string::npos);
    CHECK(table.find("status failed_mapping: 1") != std::string::npos);

    std::string json_text = report(ledgers, ReportFormat::json);
    auto parsed = nlohmann::json::parse(json_text);
    CHECK(parsed.at("n_tasks").get<int>() == 2);
    CHECK(parsed.at("completion_rate").get<double>() == 0.5);
    CHECK(parsed.at("avg_cost").get<std::string>() == "0.150000");
    CHECK(parsed.at("by_status").at("completed").get<int>() == 1);

    CHECK_THROWS_AS(report({}, ReportFormat::table), EmptyInput);
}

TEST_CASE("ledgers persist and reload with exact money") {
    Harness h;
    h.plans["press alpha then beta"] = "1. [tap] [alpha] 2. [tap] [beta]";
    h.plans["press omega"] = "1. [tap] [omega]";
    RunLedger ok = h.run("press alpha then beta", {}, std::string("s3"));
    RunLedger bad = h.run("press omega");

    TempDir dir("ledgers");
    save_ledgers({ok, bad}, dir.file("runs.jsonl"));
    auto loaded = load_ledgers(dir.file("runs.jsonl"));
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].status == RunStatus::completed);
    CHECK(loaded[0].total_price == ok.total_price);
    CHECK(loaded[0].screen_trace == ok.screen_trace);
    CHECK(loaded[1].status == RunStatus::failed_transition);
    CHECK(loaded[1].failed_step == bad.failed_step);

    CHECK(report(loaded, ReportFormat::table) == report({ok, bad}, ReportFormat::table));
}

TEST_CASE("task files load with optional assertions") {
    TempDir dir("tasks");
    write_file(dir.file("tasks.jsonl"),
               R"({"id":"t1","description":"press alpha","expect_screen":"s2"})"
               "\n"
               R"({"description":"press omega"})"
               "\n");
    auto tasks = load_tasks(dir.file("tasks.jsonl"));
    REQUIRE(tasks.size() == 2);
    CHECK(tasks[0].expect_screen == "s2");
    CHECK_FALSE(tasks[1].expect_screen.has_value());
    CHECK(tasks[1].id == "task-2");

    CHECK_THROWS_AS(load_tasks(dir.file("missing.jsonl")), FileUnreadable);
}

}  // TEST_SUITE
