#include "cat/device.hpp"

#include <chrono>
#include <cstdio>
#include <sys/wait.h>
#include <thread>

#include <json.hpp>

#include "cat/embed.hpp"
#include "cat/util.hpp"

namespace cat {
namespace {

using nlohmann::json;

HierarchyNode node_from_json(const json& j) {
    if (!j.is_object()) throw MalformedModel("hierarchy node is not an object");
    HierarchyNode node;
    node.class_name = j.value("class", std::string("android.view.View"));
    node.attributes["class"] = node.class_name;
    if (j.contains("text")) node.attributes["text"] = j.at("text").get<std::string>();
    if (j.contains("desc")) node.attributes["content-desc"] = j.at("desc").get<std::string>();
    if (j.contains("id")) node.attributes["resource-id"] = j.at("id").get<std::string>();
    if (j.contains("bounds")) node.attributes["bounds"] = j.at("bounds").get<std::string>();
    for (const char* flag : {"clickable", "long-clickable", "editable"})
        if (j.contains(flag)) node.attributes[flag] = j.at(flag).get<bool>() ? "true" : "false";
    if (j.contains("children"))
        for (const auto& cj : j.at("children")) node.children.push_back(node_from_json(cj));
    return node;
}

// Elements whose canonical repr equals the normalized match string, or —
// when nothing matches exactly — contains it. The equality stage keeps a
// short match like "me" from colliding with "messenger".
std::vector<const UIElement*> matching_elements(const std::vector<UIElement>& elements,
                                                const std::string& match) {
    std::string needle = normalize_text(match);
    std::vector<const UIElement*> exact;
    std::vector<const UIElement*> contains;
    for (const auto& element : elements) {
        try {
            std::string repr = element_repr(element);
            if (repr == needle) exact.push_back(&element);
            else if (repr.find(needle) != std::string::npos) contains.push_back(&element);
        } catch (const AllFieldsEmpty&) {
        }
    }
    return exact.empty() ? contains : exact;
}

const UIElement& match_unique(const UIScreen& screen, const std::string& match) {
    auto hits = matching_elements(screen.elements, match);
    if (hits.empty())
        throw MalformedModel("element_match '" + match + "' matches nothing on screen '" +
                             screen.screen_id + "'");
    if (hits.size() > 1)
        throw AmbiguousElementMatch("element_match '" + match + "' matches " +
                                    std::to_string(hits.size()) + " elements on screen '" +
                                    screen.screen_id + "'");
    return *hits.front();
}

struct CommandResult {
    int exit_code = -1;
    std::string output;
};

CommandResult run_command(const std::string& command) {
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) throw CommandFailed("cannot spawn command: " + command);
    CommandResult result;
    char buffer[4096];
    std::size_t got;
    while ((got = fread(buffer, 1, sizeof(buffer), pipe)) > 0)
        result.output.append(buffer, got);
    int status = pclose(pipe);
    result.exit_code = status < 0 ? -1 : WEXITSTATUS(status);
    return result;
}

std::string substitute(std::string cmd, const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        std::string placeholder = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = cmd.find(placeholder, pos)) != std::string::npos) {
            cmd.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return cmd;
}

}  // namespace

AppModel app_model_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedModel(std::string("invalid model JSON: ") + e.what());
    }

    AppModel model;
    try {
        model.initial_screen = j.at("initial_screen").get<std::string>();
        for (const auto& [id, sj] : j.at("screens").items())
            model.screens[id] = node_from_json(sj.at("hierarchy"));
        if (j.contains("transitions")) {
            for (const auto& tj : j.at("transitions")) {
                Transition t;
                t.from = tj.at("from").get<std::string>();
                t.element_match = tj.at("element_match").get<std::string>();
                t.action = action_kind_from(tj.at("action").get<std::string>());
                if (tj.contains("input_pattern"))
                    t.input_pattern = tj.at("input_pattern").get<std::string>();
                t.to = tj.at("to").get<std::string>();
                model.transitions.push_back(std::move(t));
            }
        }
    } catch (const json::exception& e) {
        throw MalformedModel(std::string("malformed model structure: ") + e.what());
    }

    if (!model.screens.count(model.initial_screen))
        throw MalformedModel("initial_screen '" + model.initial_screen + "' is not a screen");
    for (const auto& t : model.transitions) {
        if (!model.screens.count(t.from)) throw DanglingTransition(t.from, t.to);
        if (!model.screens.count(t.to)) throw DanglingTransition(t.from, t.to);
        // Resolves or throws: match must be unique on its source screen.
        match_unique(make_screen(t.from, model.screens.at(t.from)), t.element_match);
    }
    return model;
}

AppModel load_app_model(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::runtime_error& e) {
        throw IoFailure(e.what());
    }
    return app_model_from_json_text(text);
}

SimulatedSession::SimulatedSession(std::shared_ptr<const AppModel> model)
    : model_(std::move(model)), current_(model_->initial_screen) {}

UIScreen SimulatedSession::capture_screen() {
    UIScreen screen = make_screen(current_, model_->screens.at(current_));
    last_capture_ = screen;
    return screen;
}

PerformResult SimulatedSession::perform(const UIElement* element, const ActionStep& step) {
    if (step.kind == ActionKind::back) {
        if (back_stack_.empty()) return PerformResult{false};
        std::string previous = back_stack_.back();
        back_stack_.pop_back();
        bool changed = previous != current_;
        current_ = std::move(previous);
        last_capture_.reset();
        return PerformResult{changed};
    }

    if (!element) throw Error("perform requires an element for non-back actions");
    if (!last_capture_) throw StaleElement("perform before any capture");
    const auto& elements = last_capture_->elements;
    if (element->element_id < 0 ||
        static_cast<std::size_t>(element->element_id) >= elements.size() ||
        !(elements[static_cast<std::size_t>(element->element_id)] == *element))
        throw StaleElement("element is not from the latest capture");

    for (const auto& t : model_->transitions) {
        if (t.from != current_ || t.action != step.kind) continue;
        const UIElement& expected = match_unique(*last_capture_, t.element_match);
        if (expected.element_id != element->element_id) continue;
        if (step.kind == ActionKind::input) {
            if (!step.value) throw NoTransition("input step carries no value");
            const std::string pattern = t.input_pattern.value_or("*");
            if (pattern != "*" && pattern != *step.value)
                throw NoTransition("typed value does not match the transition pattern");
        }
        back_stack_.push_back(current_);
        bool changed = t.to != current_;
        current_ = t.to;
        last_capture_.reset();
        return PerformResult{changed};
    }
    throw NoTransition("no transition from screen '" + current_ + "' for " +
                       std::string(to_string(step.kind)) + " on element " +
                       std::to_string(element->element_id));
}

AdapterConfig AdapterConfig::from_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw MalformedModel(std::string("invalid adapter config: ") + e.what());
    }
    AdapterConfig config;
    config.dump_cmd = j.at("dump").get<std::string>();
    config.tap_cmd = j.value("tap", std::string());
    config.long_tap_cmd = j.value("long_tap", std::string());
    config.input_cmd = j.value("input", std::string());
    config.swipe_cmd = j.value("swipe", std::string());
    config.scroll_cmd = j.value("scroll", config.swipe_cmd);
    config.back_cmd = j.value("back", std::string());
    config.post_action_delay_ms = j.value("post_action_delay_ms", 1000);
    return config;
}

ExternalCommandSession::ExternalCommandSession(AdapterConfig config) : config_(std::move(config)) {
    if (config_.dump_cmd.empty()) throw MalformedModel("adapter config has no dump command");
}

UIScreen ExternalCommandSession::capture_screen() {
    CommandResult result = run_command(config_.dump_cmd);
    if (result.exit_code != 0)
        throw CaptureFailed("dump command exited with " + std::to_string(result.exit_code));
    if (trim(result.output).empty()) throw CaptureFailed("dump command produced no output");

    UIScreen screen;
    try {
        screen = make_screen("x" + to_hex(fnv1a64(result.output)),
                             parse_hierarchy(result.output));
    } catch (const Error& e) {
        throw CaptureFailed(std::string("dump did not parse: ") + e.what());
    }
    last_capture_ = screen;
    return screen;
}

PerformResult ExternalCommandSession::perform(const UIElement* element, const ActionStep& step) {
    std::map<std::string, std::string> values;
    std::string cmd;

    if (step.kind == ActionKind::back) {
        cmd = config_.back_cmd;
    } else {
        if (!element) throw Error("perform requires an element for non-back actions");
        if (!last_capture_) throw StaleElement("perform before any capture");
        const auto& elements = last_capture_->elements;
        if (element->element_id < 0 ||
            static_cast<std::size_t>(element->element_id) >= elements.size() ||
            !(elements[static_cast<std::size_t>(element->element_id)] == *element))
            throw StaleElement("element is not from the latest capture");
        if (!element->bounds)
            throw CommandFailed("element " + std::to_string(element->element_id) +
                                " has no bounds to act on");
        values["x"] = std::to_string(element->bounds->center_x());
        values["y"] = std::to_string(element->bounds->center_y());
        switch (step.kind) {
            case ActionKind::tap: cmd = config_.tap_cmd; break;
            case ActionKind::long_tap: cmd = config_.long_tap_cmd; break;
            case ActionKind::input:
                cmd = config_.input_cmd;
                values["text"] = step.value.value_or("");
                break;
            case ActionKind::swipe: cmd = config_.swipe_cmd; break;
            case ActionKind::scroll: cmd = config_.scroll_cmd; break;
            case ActionKind::back: break;
        }
        if (step.direction) values["direction"] = std::string(to_string(*step.direction));
    }

    if (cmd.empty())
        throw CommandFailed("no adapter command configured for action '" +
                            std::string(to_string(step.kind)) + "'");

    CommandResult result = run_command(substitute(cmd, values));
    if (result.exit_code != 0)
        throw CommandFailed("action command exited with " + std::to_string(result.exit_code));

    if (config_.post_action_delay_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.post_action_delay_ms));

    last_capture_.reset();
    // The real screen is only known at the next capture; report a change
    // conservatively.
    return PerformResult{true};
}

}  // namespace cat
