#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "cat/decompose.hpp"
#include "cat/llm.hpp"
#include "cat/util.hpp"
#include "support/testutil.hpp"

using namespace cat;
using cat::testsupport::TempDir;

namespace {

PromptMessages simple_prompt(const std::string& content) {
    PromptMessages prompt;
    prompt.messages.push_back(Message{Role::user, content});
    return prompt;
}

PriceModel rates(const char* prompt_rate, const char* completion_rate) {
    PriceModel model;
    model.prompt_rate_per_million = Money::parse(prompt_rate);
    model.completion_rate_per_million = Money::parse(completion_rate);
    return model;
}

}  // namespace

TEST_SUITE("llm") {

TEST_CASE("money parses and formats six exact decimals") {
    CHECK(Money::parse("3").str() == "3.000000");
    CHECK(Money::parse("0.34").str() == "0.340000");
    CHECK(Money::parse("$0.006000").str() == "0.006000");
    CHECK(Money::parse("-1.25").str() == "-1.250000");
    CHECK_THROWS_AS(Money::parse("0.1234567"), MoneyParseError);
    CHECK_THROWS_AS(Money::parse("abc"), MoneyParseError);
    CHECK_THROWS_AS(Money::parse(""), MoneyParseError);
}

TEST_CASE("pricing matches the motivating arithmetic") {
    // 2,000 prompt tokens at $3 per million tokens
    CHECK(price(2000, 0, rates("3", "3")).str() == "0.006000");
    CHECK(price(0, 0, rates("3", "3")).is_zero());
    CHECK(price(1000000, 0, rates("3", "3")).str() == "3.000000");
    // asymmetric rates
    CHECK(price(1000, 1000, rates("3", "6")).str() == "0.009000");
}

TEST_CASE("price additivity at integer-micro-per-token rates") {
    PriceModel model = rates("3", "3");
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::int64_t a = static_cast<std::int64_t>(rng.next_below(100000));
        std::int64_t b = static_cast<std::int64_t>(rng.next_below(100000));
        std::int64_t c = static_cast<std::int64_t>(rng.next_below(100000));
        std::int64_t d = static_cast<std::int64_t>(rng.next_below(100000));
        CHECK(price(a, b, model) + price(c, d, model) == price(a + c, b + d, model));
    }
}

TEST_CASE("zero-rate model prices everything to zero") {
    PriceModel model = rates("0", "0");
    CHECK(price(123456, 654321, model).is_zero());
}

TEST_CASE("round-half-even the sub-micro residue") {
    // 1 token at $0.50 per 1M = 0.5 micro-dollars: ties go to even (0).
    CHECK(price(1, 0, rates("0.5", "0")).micros() == 0);
    CHECK(price(3, 0, rates("0.5", "0")).micros() == 2);  // 1.5 -> 2
    CHECK(price(2, 0, rates("0.5", "0")).micros() == 1);
}

TEST_CASE("token estimator") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("12345678") == 2);
    CHECK(estimate_tokens("123456789") == 3);

    // Recount the bundled decomposition prompt independently.
    PromptMessages prompt = build_decomposition_prompt("change username to TEST", {});
    std::size_t chars = 0;
    for (const auto& m : prompt.messages) chars += m.content.size();
    CHECK(prompt.estimated_tokens() == static_cast<int>((chars + 3) / 4));
}

TEST_CASE("prompt digest distinguishes role and content") {
    PromptMessages a = simple_prompt("hello");
    PromptMessages b = simple_prompt("hello!");
    PromptMessages c = a;
    c.messages[0].role = Role::system;
    CHECK(prompt_digest(a) != prompt_digest(b));
    CHECK(prompt_digest(a) != prompt_digest(c));
    CHECK(prompt_digest(a) == prompt_digest(simple_prompt("hello")));
}

TEST_CASE("record once, replay identically") {
    TempDir dir("fixtures");
    PromptMessages prompt = simple_prompt("what next?");

    int live_calls = 0;
    {
        auto delegate = std::make_shared<CallbackLlmClient>(
            [&live_calls](const PromptMessages&) {
                ++live_calls;
                return std::string("1. [tap] [ok]");
            });
        FixtureLlmClient recorder(dir.path(), PriceModel{}, delegate);
        LlmExchange first = recorder.complete(prompt);
        LlmExchange second = recorder.complete(prompt);
        CHECK(first.completion_text == second.completion_text);
        CHECK(live_calls == 1);
    }

    FixtureLlmClient replay1(dir.path());
    FixtureLlmClient replay2(dir.path());
    LlmExchange a = replay1.complete(prompt);
    LlmExchange b = replay2.complete(prompt);
    CHECK(a.completion_text == "1. [tap] [ok]");
    CHECK(a.completion_text == b.completion_text);
    CHECK(a.prompt_tokens == b.prompt_tokens);
    CHECK(a.cost == b.cost);
    CHECK(a.cost == price(a.prompt_tokens, a.completion_tokens, replay1.price_model()));
}

TEST_CASE("strict replay misses loudly") {
    TempDir dir("fixtures");
    FixtureLlmClient replay(dir.path());
    CHECK_THROWS_AS(replay.complete(simple_prompt("never recorded")), FixtureMiss);
}

TEST_CASE("recording takes an exclusive directory lock") {
    TempDir dir("fixtures");
    auto delegate = std::make_shared<CallbackLlmClient>(
        [](const PromptMessages&) { return std::string("x"); });
    FixtureLlmClient recorder(dir.path(), PriceModel{}, delegate);
    CHECK_THROWS_AS(FixtureLlmClient(dir.path(), PriceModel{}, delegate), Error);
}

TEST_CASE("wire response parsing") {
    LlmWireResponse ok = parse_llm_response(
        R"({"text":"1. [tap] [me]","usage":{"prompt_tokens":12,"completion_tokens":5}})");
    CHECK(ok.text == "1. [tap] [me]");
    CHECK(ok.prompt_tokens == 12);
    CHECK(ok.completion_tokens == 5);

    LlmWireResponse no_usage = parse_llm_response(R"({"text":"hi"})");
    CHECK(no_usage.prompt_tokens == -1);

    CHECK_THROWS_AS(parse_llm_response("garbage"), LlmProviderError);
    CHECK_THROWS_AS(parse_llm_response(R"({"nope":1})"), LlmProviderError);
}

TEST_CASE("remote client round-trips through a loopback endpoint") {
    httplib::Server server;
    std::string seen_auth;
    server.Post("/v1/chat", [&seen_auth](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(
            R"({"text":"1. [tap] [settings]","usage":{"prompt_tokens":40,"completion_tokens":8}})",
            "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&server]() { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("CAT_LLM_API_KEY", "sk-test-123", 1);
    RemoteLlmClient client("http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "gpt-4");
    LlmExchange exchange = client.complete(simple_prompt("open settings"));
    CHECK(exchange.completion_text == "1. [tap] [settings]");
    CHECK(exchange.prompt_tokens == 40);
    CHECK(exchange.completion_tokens == 8);
    CHECK(exchange.cost == price(40, 8, client.price_model()));
    CHECK(seen_auth == "Bearer sk-test-123");
    unsetenv("CAT_LLM_API_KEY");

    server.stop();
    thread.join();
}

TEST_CASE("remote client surfaces provider errors with status") {
    httplib::Server server;
    server.Post("/v1/chat", [](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content("overloaded", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&server]() { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteLlmClient client("http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "gpt-4");
    CHECK_THROWS_AS(client.complete(simple_prompt("x")), LlmProviderError);

    server.stop();
    thread.join();
}

}  // TEST_SUITE
