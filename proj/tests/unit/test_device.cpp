#include <doctest.h>

#include <memory>

#include "cat/device.hpp"
#include "cat/util.hpp"
#include "support/testutil.hpp"

using namespace cat;
using cat::testsupport::TempDir;
namespace ts = cat::testsupport;

namespace {

std::shared_ptr<const AppModel> demo_model() {
    static auto model = std::make_shared<const AppModel>(
        load_app_model(ts::fixtures_dir() / "models/settings_demo.json"));
    return model;
}

const UIElement& find_element(const UIScreen& screen, const std::string& text) {
    for (const auto& element : screen.elements)
        if (element.text == text || element.content_desc == text) return element;
    throw std::runtime_error("no element '" + text + "' on " + screen.screen_id);
}

ActionStep tap_step(int index) {
    ActionStep step;
    step.index = index;
    step.kind = ActionKind::tap;
    return step;
}

}  // namespace

TEST_SUITE("device") {

TEST_CASE("demo model loads with five screens") {
    auto model = demo_model();
    CHECK(model->screens.size() == 5);
    CHECK(model->initial_screen == "home");
}

TEST_CASE("fresh session captures the initial screen with five elements") {
    SimulatedSession session(demo_model());
    UIScreen screen = session.capture_screen();
    CHECK(screen.screen_id == "home");
    CHECK(screen.elements.size() == 5);

    UIScreen again = session.capture_screen();
    CHECK(again.screen_id == screen.screen_id);
    CHECK(again.elements == screen.elements);
}

TEST_CASE("tapping settings on home changes the screen") {
    SimulatedSession session(demo_model());
    UIScreen home = session.capture_screen();
    UIElement settings = find_element(home, "settings");

    PerformResult result = session.perform(&settings, tap_step(1));
    CHECK(result.screen_changed);
    CHECK(session.capture_screen().screen_id == "settings");
}

TEST_CASE("elements without a transition raise NoTransition") {
    SimulatedSession session(demo_model());
    UIScreen home = session.capture_screen();
    UIElement about = find_element(home, "about");
    CHECK_THROWS_AS(session.perform(&about, tap_step(1)), NoTransition);
}

TEST_CASE("back on the initial screen is a no-op") {
    SimulatedSession session(demo_model());
    session.capture_screen();
    ActionStep back;
    back.index = 1;
    back.kind = ActionKind::back;
    PerformResult result = session.perform(nullptr, back);
    CHECK_FALSE(result.screen_changed);
    CHECK(session.capture_screen().screen_id == "home");
}

TEST_CASE("back returns to a screen structurally equal to the pre-tap capture") {
    SimulatedSession session(demo_model());
    UIScreen before = session.capture_screen();
    UIElement settings = find_element(before, "settings");
    session.perform(&settings, tap_step(1));
    session.capture_screen();

    ActionStep back;
    back.index = 2;
    back.kind = ActionKind::back;
    CHECK(session.perform(nullptr, back).screen_changed);
    UIScreen after = session.capture_screen();
    CHECK(after.screen_id == before.screen_id);
    CHECK(after.elements == before.elements);
}

TEST_CASE("stale elements are rejected") {
    SimulatedSession session(demo_model());
    UIScreen home = session.capture_screen();
    UIElement settings = find_element(home, "settings");
    session.perform(&settings, tap_step(1));
    // No capture since the perform: the old element is stale.
    CHECK_THROWS_AS(session.perform(&settings, tap_step(2)), StaleElement);
}

TEST_CASE("input transitions match the typed value against the pattern") {
    SimulatedSession session(demo_model());
    UIScreen home = session.capture_screen();
    session.perform(&find_element(home, "settings"), tap_step(1));
    UIScreen settings = session.capture_screen();
    session.perform(&find_element(settings, "name"), tap_step(2));
    UIScreen edit = session.capture_screen();

    ActionStep type_name;
    type_name.index = 3;
    type_name.kind = ActionKind::input;
    type_name.value = "TEST";
    UIElement field = find_element(edit, "name field");
    CHECK_FALSE(session.perform(&field, type_name).screen_changed);  // self-loop

    UIScreen edit2 = session.capture_screen();
    session.perform(&find_element(edit2, "save"), tap_step(4));
    CHECK(session.capture_screen().screen_id == "name_saved");
}

TEST_CASE("literal input patterns reject mismatched values") {
    auto model = std::make_shared<const AppModel>(app_model_from_json_text(R"({
        "initial_screen": "pin",
        "screens": {
          "pin": {"hierarchy": {"class": "L", "children": [
            {"class": "android.widget.EditText", "desc": "pin field"},
            {"class": "android.widget.TextView", "text": "enter pin"}]}},
          "unlocked": {"hierarchy": {"class": "L", "children": [
            {"class": "android.widget.TextView", "text": "welcome"}]}}
        },
        "transitions": [{"from": "pin", "element_match": "pin field", "action": "input",
                         "input_pattern": "1234", "to": "unlocked"}]
    })"));
    SimulatedSession session(model);
    UIScreen screen = session.capture_screen();
    const UIElement& field = find_element(screen, "pin field");

    ActionStep wrong;
    wrong.index = 1;
    wrong.kind = ActionKind::input;
    wrong.value = "9999";
    CHECK_THROWS_AS(session.perform(&field, wrong), NoTransition);

    ActionStep right = wrong;
    right.value = "1234";
    CHECK(session.perform(&field, right).screen_changed);
    CHECK(session.capture_screen().screen_id == "unlocked");
}

TEST_CASE("both drivers produce screens whose elements track the simplified tree") {
    SimulatedSession sim(demo_model());
    UIScreen sim_screen = sim.capture_screen();
    CHECK(sim_screen.elements == extract_elements(sim_screen.simplified_root));

    TempDir dir("parity");
    write_file(dir.file("adapter.json"),
               std::string(R"({"dump": "cat )") +
                   (ts::fixtures_dir() / "hierarchy/sample_dump.xml").string() +
                   R"(", "post_action_delay_ms": 0})");
    ExternalCommandSession cmd(AdapterConfig::from_file(dir.file("adapter.json")));
    UIScreen cmd_screen = cmd.capture_screen();
    CHECK(cmd_screen.elements == extract_elements(cmd_screen.simplified_root));
    CHECK_FALSE(cmd_screen.elements.empty());
}

TEST_CASE("identical action sequences give identical screen traces") {
    auto walk = [] {
        SimulatedSession session(demo_model());
        std::vector<std::string> trace;
        trace.push_back(session.capture_screen().screen_id);
        UIScreen home = session.capture_screen();
        session.perform(&find_element(home, "settings"), tap_step(1));
        trace.push_back(session.capture_screen().screen_id);
        UIScreen settings = session.capture_screen();
        session.perform(&find_element(settings, "name"), tap_step(2));
        trace.push_back(session.capture_screen().screen_id);
        return trace;
    };
    CHECK(walk() == walk());
}

TEST_CASE("model validation failures") {
    CHECK_THROWS_AS(app_model_from_json_text("not json"), MalformedModel);
    CHECK_THROWS_AS(app_model_from_json_text(R"({"screens":{}})"), MalformedModel);

    // Transition to an unknown screen.
    CHECK_THROWS_AS(app_model_from_json_text(R"({
        "initial_screen": "a",
        "screens": {"a": {"hierarchy": {"class": "L", "children": [
            {"class": "B", "text": "go", "clickable": true}]}}},
        "transitions": [{"from": "a", "element_match": "go", "action": "tap", "to": "nowhere"}]
    })"),
                    DanglingTransition);

    // element_match hitting two elements.
    CHECK_THROWS_AS(app_model_from_json_text(R"({
        "initial_screen": "a",
        "screens": {"a": {"hierarchy": {"class": "L", "children": [
            {"class": "B", "text": "send file", "clickable": true},
            {"class": "B", "text": "send mail", "clickable": true}]}}},
        "transitions": [{"from": "a", "element_match": "send", "action": "tap", "to": "a"}]
    })"),
                    AmbiguousElementMatch);

    // element_match hitting nothing.
    CHECK_THROWS_AS(app_model_from_json_text(R"({
        "initial_screen": "a",
        "screens": {"a": {"hierarchy": {"class": "L", "children": [
            {"class": "B", "text": "go", "clickable": true}]}}},
        "transitions": [{"from": "a", "element_match": "missing", "action": "tap", "to": "a"}]
    })"),
                    MalformedModel);
}

TEST_CASE("external command adapter drives dump and action commands") {
    TempDir dir("adapter");
    // The dump command replays the committed sample; actions append to a log.
    auto dump_src = ts::fixtures_dir() / "hierarchy/sample_dump.xml";
    auto log = dir.file("actions.log");
    std::string config_json = std::string("{\n") +
        "  \"dump\": \"cat " + dump_src.string() + "\",\n" +
        "  \"tap\": \"echo tap {x} {y} >> " + log.string() + "\",\n" +
        "  \"input\": \"echo input {x} {y} {text} >> " + log.string() + "\",\n" +
        "  \"back\": \"echo back >> " + log.string() + "\",\n" +
        "  \"post_action_delay_ms\": 0\n}\n";
    write_file(dir.file("adapter.json"), config_json);

    ExternalCommandSession session(AdapterConfig::from_file(dir.file("adapter.json")));
    UIScreen screen = session.capture_screen();
    CHECK(screen.elements.size() > 0);

    // Tap the search button from the toolbar (it has bounds).
    const UIElement* search = nullptr;
    for (const auto& element : screen.elements)
        if (element.content_desc == "search") search = &element;
    REQUIRE(search != nullptr);
    CHECK(session.perform(search, tap_step(1)).screen_changed);

    std::string logged = read_file(log);
    CHECK(logged.find("tap 890 90") != std::string::npos);

    // Same dump, same screen id: the adapter derives ids from content.
    UIScreen again = session.capture_screen();
    CHECK(again.screen_id == screen.screen_id);
}

TEST_CASE("adapter failures") {
    TempDir dir("adapter");
    write_file(dir.file("bad_dump.json"),
               R"({"dump": "false", "tap": "true", "post_action_delay_ms": 0})");
    ExternalCommandSession failing(AdapterConfig::from_file(dir.file("bad_dump.json")));
    CHECK_THROWS_AS(failing.capture_screen(), CaptureFailed);

    write_file(dir.file("bad_tap.json"),
               std::string(R"({"dump": "cat )") +
                   (ts::fixtures_dir() / "hierarchy/sample_dump.xml").string() +
                   R"(", "tap": "false", "post_action_delay_ms": 0})");
    ExternalCommandSession bad_tap(AdapterConfig::from_file(dir.file("bad_tap.json")));
    UIScreen screen = bad_tap.capture_screen();
    const UIElement* search = nullptr;
    for (const auto& element : screen.elements)
        if (element.content_desc == "search") search = &element;
    REQUIRE(search != nullptr);
    CHECK_THROWS_AS(bad_tap.perform(search, tap_step(1)), CommandFailed);
}

}  // TEST_SUITE
