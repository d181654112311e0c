#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cat/action.hpp"
#include "cat/errors.hpp"
#include "cat/hierarchy.hpp"

namespace cat {

class SessionClosed : public Error {
public:
    using Error::Error;
};

class CaptureFailed : public Error {
public:
    using Error::Error;
};

class NoTransition : public Error {
public:
    using Error::Error;
};

class CommandFailed : public Error {
public:
    using Error::Error;
};

class StaleElement : public Error {
public:
    using Error::Error;
};

class MalformedModel : public Error {
public:
    using Error::Error;
};

class DanglingTransition : public Error {
public:
    DanglingTransition(const std::string& from, const std::string& to)
        : Error("transition references unknown screen: " + from + " -> " + to),
          from(from),
          to(to) {}
    std::string from;
    std::string to;
};

class AmbiguousElementMatch : public Error {
public:
    using Error::Error;
};

// Declarative stand-in for an app under test: screens with inline
// hierarchies and an explicit transition table.
struct Transition {
    std::string from;
    std::string element_match;
    ActionKind action = ActionKind::tap;
    std::optional<std::string> input_pattern;  // literal or "*", input only
    std::string to;
};

struct AppModel {
    std::string initial_screen;
    std::map<std::string, HierarchyNode> screens;  // id -> raw hierarchy
    std::vector<Transition> transitions;
};

// Eagerly validated: endpoints exist and every element_match resolves to
// exactly one element on its `from` screen.
AppModel load_app_model(const std::filesystem::path& path);
AppModel app_model_from_json_text(const std::string& text);

struct PerformResult {
    bool screen_changed = false;
};

// One logical thread of device control. capture after perform reflects
// the post-action screen; an element handed to perform must come from
// this session's latest capture.
class DeviceSession {
public:
    virtual ~DeviceSession() = default;
    virtual UIScreen capture_screen() = 0;
    virtual PerformResult perform(const UIElement* element, const ActionStep& step) = 0;
};

class SimulatedSession : public DeviceSession {
public:
    explicit SimulatedSession(std::shared_ptr<const AppModel> model);

    UIScreen capture_screen() override;
    PerformResult perform(const UIElement* element, const ActionStep& step) override;

    const std::string& current_screen_id() const { return current_; }

private:
    std::shared_ptr<const AppModel> model_;
    std::string current_;
    std::vector<std::string> back_stack_;
    std::optional<UIScreen> last_capture_;
};

// External-command adapter: a real device is driven by configured command
// templates. Placeholders: {x} {y} {text} {direction}. The dump command
// must emit UIAutomator XML on stdout.
struct AdapterConfig {
    std::string dump_cmd;
    std::string tap_cmd;
    std::string long_tap_cmd;
    std::string input_cmd;
    std::string swipe_cmd;
    std::string scroll_cmd;
    std::string back_cmd;
    int post_action_delay_ms = 1000;

    static AdapterConfig from_file(const std::filesystem::path& path);
};

class ExternalCommandSession : public DeviceSession {
public:
    explicit ExternalCommandSession(AdapterConfig config);

    UIScreen capture_screen() override;
    PerformResult perform(const UIElement* element, const ActionStep& step) override;

private:
    AdapterConfig config_;
    std::optional<UIScreen> last_capture_;
};

using SessionFactory = std::function<std::unique_ptr<DeviceSession>()>;

}  // namespace cat
