#include "cat/llm.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "cat/util.hpp"

namespace cat {
namespace {

using nlohmann::json;

std::string canonical_prompt(const PromptMessages& prompt) {
    std::string out;
    for (const auto& m : prompt.messages) {
        out += to_string(m.role);
        out += '\x1f';
        out += m.content;
        out += '\x1e';
    }
    return out;
}

class DirectoryLock {
public:
    static void acquire(const std::filesystem::path& dir) {
        auto lock = dir / ".lock";
        if (std::filesystem::exists(lock))
            throw Error("fixture directory is locked for recording: " + lock.string());
        write_file(lock, "recording\n");
    }
    static void release(const std::filesystem::path& dir) {
        std::error_code ec;
        std::filesystem::remove(dir / ".lock", ec);
    }
};

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

int PromptMessages::estimated_tokens() const {
    int total = 0;
    for (const auto& m : messages) total += estimate_tokens(m.content);
    return total;
}

std::string prompt_digest(const PromptMessages& prompt) {
    return to_hex(fnv1a64(canonical_prompt(prompt)));
}

int estimate_tokens(std::string_view text) {
    return static_cast<int>((text.size() + 3) / 4);
}

Money price(std::int64_t prompt_tokens, std::int64_t completion_tokens, const PriceModel& model) {
    __int128 numerator = static_cast<__int128>(prompt_tokens) * model.prompt_rate_per_million.micros() +
                         static_cast<__int128>(completion_tokens) *
                             model.completion_rate_per_million.micros();
    return Money::from_micros(div_round_half_even(numerator, 1000000));
}

LlmWireResponse parse_llm_response(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw LlmProviderError(200, std::string("unparseable response body: ") + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string())
        throw LlmProviderError(200, "response missing 'text'");

    LlmWireResponse out;
    out.text = j.at("text").get<std::string>();
    if (j.contains("usage") && j.at("usage").is_object()) {
        const auto& usage = j.at("usage");
        if (usage.contains("prompt_tokens"))
            out.prompt_tokens = usage.at("prompt_tokens").get<std::int64_t>();
        if (usage.contains("completion_tokens"))
            out.completion_tokens = usage.at("completion_tokens").get<std::int64_t>();
    } else {
        out.prompt_tokens = -1;  // provider reported no usage
        out.completion_tokens = -1;
    }
    return out;
}

RemoteLlmClient::RemoteLlmClient(std::string endpoint, std::string model, PriceModel prices)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), prices_(prices) {}

LlmExchange RemoteLlmClient::complete(const PromptMessages& prompt) {
    auto slash = endpoint_.find('/', endpoint_.find("//") == std::string::npos
                                        ? 0
                                        : endpoint_.find("//") + 2);
    std::string host = slash == std::string::npos ? endpoint_ : endpoint_.substr(0, slash);
    std::string path = slash == std::string::npos ? "/" : endpoint_.substr(slash);

    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    if (const char* key = std::getenv("CAT_LLM_API_KEY"))
        client.set_default_headers({{"Authorization", std::string("Bearer ") + key}});

    json req;
    req["model"] = model_;
    req["messages"] = json::array();
    for (const auto& m : prompt.messages)
        req["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, req.dump(), "application/json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();

    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write)
            throw Timeout("llm request timed out: " + httplib::to_string(err));
        throw LlmProviderError(0, "request failed: " + httplib::to_string(err));
    }
    if (res->status != 200) throw LlmProviderError(res->status, res->body);

    LlmWireResponse wire = parse_llm_response(res->body);
    LlmExchange exchange;
    exchange.prompt = prompt;
    exchange.completion_text = wire.text;
    exchange.prompt_tokens =
        wire.prompt_tokens >= 0 ? wire.prompt_tokens : prompt.estimated_tokens();
    exchange.completion_tokens =
        wire.completion_tokens >= 0 ? wire.completion_tokens : estimate_tokens(wire.text);
    exchange.latency_ms = elapsed;
    exchange.cost = price(exchange.prompt_tokens, exchange.completion_tokens, prices_);
    return exchange;
}

LlmExchange CallbackLlmClient::complete(const PromptMessages& prompt) {
    LlmExchange exchange;
    exchange.prompt = prompt;
    exchange.completion_text = fn_(prompt);
    exchange.prompt_tokens = prompt.estimated_tokens();
    exchange.completion_tokens = estimate_tokens(exchange.completion_text);
    exchange.latency_ms = 0;
    exchange.cost = price(exchange.prompt_tokens, exchange.completion_tokens, prices_);
    return exchange;
}

FixtureLlmClient::FixtureLlmClient(std::filesystem::path directory, PriceModel prices,
                                   std::shared_ptr<LlmClient> record_delegate)
    : directory_(std::move(directory)), prices_(prices), delegate_(std::move(record_delegate)) {
    if (delegate_) {
        std::filesystem::create_directories(directory_);
        DirectoryLock::acquire(directory_);
    }

    try {
        if (!std::filesystem::is_directory(directory_))
            throw IoFailure("fixture directory does not exist: " + directory_.string());

        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(directory_))
            if (entry.path().extension() == ".json") files.push_back(entry.path());

        for (const auto& file : files) {
            json j;
            try {
                j = json::parse(read_file(file));
            } catch (const json::exception& e) {
                throw IoFailure("corrupt fixture " + file.string() + ": " + e.what());
            }
            Recording rec;
            rec.completion_text = j.at("completion_text").get<std::string>();
            rec.prompt_tokens = j.at("usage").at("prompt_tokens").get<std::int64_t>();
            rec.completion_tokens = j.at("usage").at("completion_tokens").get<std::int64_t>();
            recordings_[j.at("prompt_digest").get<std::string>()] = std::move(rec);
        }
    } catch (...) {
        if (delegate_) DirectoryLock::release(directory_);
        throw;
    }
}

FixtureLlmClient::~FixtureLlmClient() {
    if (delegate_) DirectoryLock::release(directory_);
}

LlmExchange FixtureLlmClient::complete(const PromptMessages& prompt) {
    std::string digest = prompt_digest(prompt);
    auto it = recordings_.find(digest);
    if (it == recordings_.end()) {
        if (!delegate_) throw FixtureMiss(digest);

        LlmExchange live = delegate_->complete(prompt);
        Recording rec{live.completion_text, live.prompt_tokens, live.completion_tokens};

        json j;
        j["prompt_digest"] = digest;
        j["completion_text"] = rec.completion_text;
        j["usage"] = {{"prompt_tokens", rec.prompt_tokens},
                      {"completion_tokens", rec.completion_tokens}};
        write_file(directory_ / (digest + ".json"), j.dump(2) + "\n");

        it = recordings_.emplace(digest, std::move(rec)).first;
    }

    LlmExchange exchange;
    exchange.prompt = prompt;
    exchange.completion_text = it->second.completion_text;
    exchange.prompt_tokens = it->second.prompt_tokens;
    exchange.completion_tokens = it->second.completion_tokens;
    exchange.latency_ms = 0;
    exchange.cost = price(exchange.prompt_tokens, exchange.completion_tokens, prices_);
    return exchange;
}

}  // namespace cat
