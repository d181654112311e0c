#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "cat/errors.hpp"

namespace cat {

enum class ActionKind { tap, long_tap, input, swipe, back, scroll };
enum class Direction { up, down, left, right };

class UnknownActionKind : public Error {
public:
    explicit UnknownActionKind(const std::string& kind)
        : Error("unknown action kind: '" + kind + "'"), kind(kind) {}
    std::string kind;
};

std::string_view to_string(ActionKind kind);
std::string_view to_string(Direction direction);
ActionKind action_kind_from(std::string_view text);
std::optional<Direction> direction_from(std::string_view text);

// One executable operation of a decomposed plan.
// Invariants: indices contiguous from 1 within a plan; input carries a
// value; back carries an empty target phrase.
struct ActionStep {
    int index = 0;
    ActionKind kind = ActionKind::tap;
    std::string target_phrase;
    std::optional<std::string> value;
    std::optional<Direction> direction;

    bool operator==(const ActionStep&) const = default;
};

}  // namespace cat
