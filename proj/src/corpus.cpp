#include "cat/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cat/util.hpp"

namespace cat {
namespace {

using nlohmann::json;

json step_to_json(const ActionStep& step) {
    json j;
    j["action"] = std::string(to_string(step.kind));
    j["target"] = step.target_phrase;
    if (step.value) j["value"] = *step.value;
    if (step.direction) j["direction"] = std::string(to_string(*step.direction));
    return j;
}

json example_to_json(const RetrievalExample& ex) {
    json j;
    j["id"] = ex.id;
    j["description"] = ex.description;
    j["activity"] = ex.activity;
    j["steps"] = json::array();
    for (const auto& step : ex.steps) j["steps"].push_back(step_to_json(step));
    return j;
}

ActionStep step_from_json(const json& j, int index) {
    if (!j.is_object()) throw Error("step is not an object");
    if (!j.contains("action") || !j.at("action").is_string())
        throw Error("step missing string field 'action'");
    if (!j.contains("target") || !j.at("target").is_string())
        throw Error("step missing string field 'target'");

    ActionStep step;
    step.index = index;
    step.kind = action_kind_from(j.at("action").get<std::string>());
    step.target_phrase = j.at("target").get<std::string>();
    if (j.contains("value")) {
        if (!j.at("value").is_string()) throw Error("step field 'value' must be a string");
        step.value = j.at("value").get<std::string>();
    }
    if (j.contains("direction")) {
        if (!j.at("direction").is_string()) throw Error("step field 'direction' must be a string");
        auto dir = direction_from(j.at("direction").get<std::string>());
        if (!dir) throw Error("bad step direction: '" + j.at("direction").get<std::string>() + "'");
        step.direction = dir;
    }

    if (step.kind == ActionKind::input && !step.value)
        throw Error("input step requires a value");
    if (step.kind == ActionKind::back && !step.target_phrase.empty())
        throw Error("back step must have an empty target");
    return step;
}

RetrievalExample example_from_json(const json& j) {
    if (!j.is_object()) throw Error("record is not a JSON object");
    if (!j.contains("id") || !j.at("id").is_string())
        throw Error("record missing string field 'id'");
    if (!j.contains("description") || !j.at("description").is_string())
        throw Error("record missing string field 'description'");

    RetrievalExample ex;
    ex.id = j.at("id").get<std::string>();
    ex.description = j.at("description").get<std::string>();
    if (trim(ex.description).empty()) throw Error("description is empty");

    if (j.contains("activity")) {
        if (!j.at("activity").is_string()) throw Error("field 'activity' must be a string");
        ex.activity = j.at("activity").get<std::string>();
    }
    if (ex.activity.empty()) ex.activity = "unlabeled";

    if (!j.contains("steps") || !j.at("steps").is_array() || j.at("steps").empty())
        throw Error("record requires a non-empty 'steps' array");
    int index = 1;
    for (const auto& sj : j.at("steps")) ex.steps.push_back(step_from_json(sj, index++));
    return ex;
}

}  // namespace

std::string example_set_digest(const std::vector<RetrievalExample>& examples) {
    std::uint64_t h = kFnvOffset;
    for (const auto& ex : examples) {
        std::string line = example_to_json(ex).dump();
        h = fnv1a64(line, h);
        h = fnv1a64("\n", h);
    }
    return to_hex(h);
}

ExampleSet load_examples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileUnreadable("cannot open example store: " + path.string());

    ExampleSet set;
    std::vector<std::pair<std::size_t, std::string>> bad_lines;
    std::unordered_set<std::string> seen_ids;
    std::string duplicate;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            RetrievalExample ex = example_from_json(j);
            if (!seen_ids.insert(ex.id).second && duplicate.empty()) duplicate = ex.id;
            set.examples.push_back(std::move(ex));
        } catch (const json::exception& e) {
            bad_lines.emplace_back(line_no, std::string("invalid JSON: ") + e.what());
        } catch (const std::exception& e) {
            bad_lines.emplace_back(line_no, e.what());
        }
    }

    if (!bad_lines.empty()) {
        std::ostringstream msg;
        msg << bad_lines.front().second;
        if (bad_lines.size() > 1) {
            msg << " (invalid records on lines";
            for (const auto& [n, _] : bad_lines) msg << ' ' << n;
            msg << ')';
        }
        throw MalformedRecord(bad_lines.front().first, msg.str());
    }
    if (!duplicate.empty()) throw DuplicateId(duplicate);

    set.source_digest = example_set_digest(set.examples);
    return set;
}

void save_examples(const ExampleSet& set, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& ex : set.examples) out << example_to_json(ex).dump() << '\n';
    write_file(path, out.str());
}

SplitResult split_by_activity(const ExampleSet& set, double test_fraction, std::uint64_t seed) {
    std::vector<std::string> activities;
    std::unordered_map<std::string, std::size_t> activity_sizes;
    for (const auto& ex : set.examples) {
        auto [it, inserted] = activity_sizes.try_emplace(ex.activity, 0);
        if (inserted) activities.push_back(ex.activity);
        ++it->second;
    }
    if (activities.size() < 2)
        throw TooFewActivities("split requires at least 2 distinct activities, got " +
                               std::to_string(activities.size()));

    Rng rng(seed);
    rng.shuffle(activities);

    const double target = test_fraction * static_cast<double>(set.size());
    std::unordered_set<std::string> test_activities;
    std::size_t test_count = 0;
    for (const auto& activity : activities) {
        if (static_cast<double>(test_count) >= target) break;
        test_activities.insert(activity);
        test_count += activity_sizes.at(activity);
    }

    SplitResult result;
    for (const auto& ex : set.examples) {
        if (test_activities.count(ex.activity))
            result.test.examples.push_back(ex);
        else
            result.retrieval.examples.push_back(ex);
    }
    result.test.source_digest = example_set_digest(result.test.examples);
    result.retrieval.source_digest = example_set_digest(result.retrieval.examples);
    return result;
}

}  // namespace cat
