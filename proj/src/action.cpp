#include "cat/action.hpp"

namespace cat {

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::tap: return "tap";
        case ActionKind::long_tap: return "long_tap";
        case ActionKind::input: return "input";
        case ActionKind::swipe: return "swipe";
        case ActionKind::back: return "back";
        case ActionKind::scroll: return "scroll";
    }
    return "tap";
}

std::string_view to_string(Direction direction) {
    switch (direction) {
        case Direction::up: return "up";
        case Direction::down: return "down";
        case Direction::left: return "left";
        case Direction::right: return "right";
    }
    return "up";
}

ActionKind action_kind_from(std::string_view text) {
    if (text == "tap") return ActionKind::tap;
    if (text == "long_tap") return ActionKind::long_tap;
    if (text == "input") return ActionKind::input;
    if (text == "swipe") return ActionKind::swipe;
    if (text == "back") return ActionKind::back;
    if (text == "scroll") return ActionKind::scroll;
    throw UnknownActionKind(std::string(text));
}

std::optional<Direction> direction_from(std::string_view text) {
    if (text == "up") return Direction::up;
    if (text == "down") return Direction::down;
    if (text == "left") return Direction::left;
    if (text == "right") return Direction::right;
    return std::nullopt;
}

}  // namespace cat
