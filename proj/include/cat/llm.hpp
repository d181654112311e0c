#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cat/errors.hpp"
#include "cat/money.hpp"

namespace cat {

class Timeout : public Error {
public:
    using Error::Error;
};

class LlmProviderError : public Error {
public:
    LlmProviderError(int status, const std::string& body)
        : Error("llm endpoint returned status " + std::to_string(status) + ": " + body),
          status(status),
          body(body) {}
    int status;
    std::string body;
};

class FixtureMiss : public Error {
public:
    explicit FixtureMiss(const std::string& digest)
        : Error("no recorded completion for prompt digest " + digest), digest(digest) {}
    std::string digest;
};

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

struct Message {
    Role role = Role::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct PromptMessages {
    std::vector<Message> messages;

    bool empty() const { return messages.empty(); }
    int estimated_tokens() const;
    bool operator==(const PromptMessages&) const = default;
};

// Stable fingerprint of a prompt; fixture recordings are keyed by it so
// any prompt edit invalidates stale recordings loudly.
std::string prompt_digest(const PromptMessages& prompt);

// ceil(characters / 4). An estimate for when a provider reports no usage;
// never overrides provider-reported counts.
int estimate_tokens(std::string_view text);

struct PriceModel {
    Money prompt_rate_per_million = Money::parse("3");      // seeded from $3 / 1000K tokens
    Money completion_rate_per_million = Money::parse("3");
};

// Exact decimal price of one exchange, ties-to-even at six places.
Money price(std::int64_t prompt_tokens, std::int64_t completion_tokens, const PriceModel& model);

struct LlmExchange {
    std::string stage;  // accounting tag: "decompose", "map_optimizer", …
    PromptMessages prompt;
    std::string completion_text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t latency_ms = 0;
    Money cost;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmExchange complete(const PromptMessages& prompt) = 0;
    virtual const PriceModel& price_model() const = 0;
};

// Chat-completion wire client. Key comes from CAT_LLM_API_KEY.
class RemoteLlmClient : public LlmClient {
public:
    RemoteLlmClient(std::string endpoint, std::string model, PriceModel prices = {});

    LlmExchange complete(const PromptMessages& prompt) override;
    const PriceModel& price_model() const override { return prices_; }

private:
    std::string endpoint_;
    std::string model_;
    PriceModel prices_;
};

// Parses the remote wire response. Exposed for testing.
// Expected shape: {"text": str, "usage": {"prompt_tokens": int, "completion_tokens": int}}.
struct LlmWireResponse {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};
LlmWireResponse parse_llm_response(const std::string& body);

// Adapts a plain function into a client; token counts come from the
// bundled estimator. Used by tests and the fixture recorder.
class CallbackLlmClient : public LlmClient {
public:
    using Fn = std::function<std::string(const PromptMessages&)>;
    explicit CallbackLlmClient(Fn fn, PriceModel prices = {})
        : fn_(std::move(fn)), prices_(prices) {}

    LlmExchange complete(const PromptMessages& prompt) override;
    const PriceModel& price_model() const override { return prices_; }

private:
    Fn fn_;
    PriceModel prices_;
};

// Deterministic record/replay client over a directory of
// <digest>.json files. Replay is a pure function of the prompt digest.
// With a delegate, unseen prompts are forwarded and the exchange is
// recorded; without one, they raise FixtureMiss.
class FixtureLlmClient : public LlmClient {
public:
    explicit FixtureLlmClient(std::filesystem::path directory, PriceModel prices = {},
                              std::shared_ptr<LlmClient> record_delegate = nullptr);
    ~FixtureLlmClient() override;

    LlmExchange complete(const PromptMessages& prompt) override;
    const PriceModel& price_model() const override { return prices_; }

    std::size_t recorded_count() const { return recordings_.size(); }

private:
    struct Recording {
        std::string completion_text;
        std::int64_t prompt_tokens = 0;
        std::int64_t completion_tokens = 0;
    };

    std::filesystem::path directory_;
    PriceModel prices_;
    std::shared_ptr<LlmClient> delegate_;
    std::unordered_map<std::string, Recording> recordings_;
};

}  // namespace cat
