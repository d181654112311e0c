#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cat/errors.hpp"

namespace cat {

class XmlParseError : public Error {
public:
    XmlParseError(std::size_t position, const std::string& reason)
        : Error("xml error at offset " + std::to_string(position) + ": " + reason),
          position(position),
          reason(reason) {}
    std::size_t position;
    std::string reason;
};

class EmptyDocument : public Error {
public:
    using Error::Error;
};

// One node of a view-hierarchy dump. class_name comes from the `class`
// attribute when present (UIAutomator stores the widget class there),
// otherwise from the element tag.
struct HierarchyNode {
    std::string class_name;
    std::map<std::string, std::string> attributes;
    std::vector<HierarchyNode> children;

    std::string attr(const std::string& key) const {
        auto it = attributes.find(key);
        return it == attributes.end() ? std::string() : it->second;
    }
    bool attr_true(const std::string& key) const { return attr(key) == "true"; }
};

struct Bounds {
    int left = 0;
    int top = 0;
    int right = 0;
    int bottom = 0;

    bool operator==(const Bounds&) const = default;
    int center_x() const { return (left + right) / 2; }
    int center_y() const { return (top + bottom) / 2; }
};

// An atomic element surviving simplification: a leaf, or any interactive
// node. The unit the mapper scores.
struct UIElement {
    int element_id = 0;  // document order in the simplified tree
    std::string text;
    std::string content_desc;
    std::string resource_id;
    std::string class_name;
    std::optional<Bounds> bounds;
    bool interactive = false;

    bool operator==(const UIElement&) const = default;
};

struct UIScreen {
    std::string screen_id;
    HierarchyNode raw_root;
    HierarchyNode simplified_root;
    std::vector<UIElement> elements;  // == extract_elements(simplified_root)
};

// clickable, long-clickable, or editable. EditText widgets count as
// editable even when the dump has no explicit attribute for it.
bool is_interactive(const HierarchyNode& node);

// "[l,t][r,b]"; malformed or degenerate bounds degrade to absent.
std::optional<Bounds> parse_bounds(const std::string& raw);

// Parses a UIAutomator-style XML dump into the full tree, attributes
// retained verbatim.
HierarchyNode parse_hierarchy(const std::string& xml_text);

// Splices out every non-interactive container with exactly one child,
// repeatedly and including at the root. Leaves and interactive nodes
// survive; child order is preserved.
HierarchyNode simplify(const HierarchyNode& root);

// Document-order atomic elements of a simplified tree.
std::vector<UIElement> extract_elements(const HierarchyNode& root);

// One line per atomic element: `[ordinal] Class text="…" desc="…" id="…"`,
// empty attributes omitted. The short form the optimizer prompt embeds.
std::string serialize_compact(const HierarchyNode& root);

// Bundles simplify + extract so the UIScreen invariant holds by construction.
UIScreen make_screen(std::string screen_id, HierarchyNode raw_root);

std::size_t count_nodes(const HierarchyNode& root);
std::size_t tree_depth(const HierarchyNode& root);

}  // namespace cat
