#include "cat/hierarchy.hpp"

#include <cctype>
#include <cstdio>
#include <sstream>

#include "cat/util.hpp"

namespace cat {
namespace {

// Minimal XML reader covering the UIAutomator dump dialect: declaration,
// comments, nested elements with quoted attributes, character entities.
// Text content between tags is ignored (dumps carry none).
class XmlReader {
public:
    explicit XmlReader(const std::string& text) : text_(text) {}

    HierarchyNode parse_document() {
        skip_prolog();
        if (eof()) throw EmptyDocument("document has no root element");
        HierarchyNode root = parse_element();
        skip_misc();
        if (!eof()) fail("trailing content after root element");
        return root;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return text_[pos_]; }
    bool starts_with(std::string_view s) const { return text_.compare(pos_, s.size(), s) == 0; }

    [[noreturn]] void fail(const std::string& reason) const { throw XmlParseError(pos_, reason); }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    }

    void skip_comment() {
        pos_ += 4;  // "<!--"
        auto end = text_.find("-->", pos_);
        if (end == std::string::npos) fail("unterminated comment");
        pos_ = end + 3;
    }

    void skip_prolog() {
        skip_ws();
        if (eof()) throw EmptyDocument("empty document");
        while (!eof()) {
            if (starts_with("<?")) {
                auto end = text_.find("?>", pos_);
                if (end == std::string::npos) fail("unterminated declaration");
                pos_ = end + 2;
            } else if (starts_with("<!--")) {
                skip_comment();
            } else {
                break;
            }
            skip_ws();
        }
        skip_ws();
    }

    void skip_misc() {
        skip_ws();
        while (!eof() && starts_with("<!--")) {
            skip_comment();
            skip_ws();
        }
    }

    std::string read_name() {
        std::size_t start = pos_;
        while (!eof()) {
            char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' ||
                c == '.')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) fail("expected a name");
        return text_.substr(start, pos_ - start);
    }

    std::string decode_entities(std::string_view raw) {
        std::string out;
        out.reserve(raw.size());
        for (std::size_t i = 0; i < raw.size();) {
            if (raw[i] != '&') {
                out.push_back(raw[i++]);
                continue;
            }
            auto semi = raw.find(';', i);
            if (semi == std::string_view::npos) fail("unterminated entity");
            std::string_view entity = raw.substr(i + 1, semi - i - 1);
            if (entity == "amp") out.push_back('&');
            else if (entity == "lt") out.push_back('<');
            else if (entity == "gt") out.push_back('>');
            else if (entity == "quot") out.push_back('"');
            else if (entity == "apos") out.push_back('\'');
            else if (!entity.empty() && entity[0] == '#') {
                int base = 10;
                std::string_view digits = entity.substr(1);
                if (!digits.empty() && (digits[0] == 'x' || digits[0] == 'X')) {
                    base = 16;
                    digits = digits.substr(1);
                }
                unsigned long code = 0;
                try {
                    code = std::stoul(std::string(digits), nullptr, base);
                } catch (...) {
                    fail("bad character reference");
                }
                // Keep it byte-oriented; dumps are ASCII in practice.
                if (code > 0xff) out.push_back('?');
                else out.push_back(static_cast<char>(code));
            } else {
                fail("unknown entity '&" + std::string(entity) + ";'");
            }
            i = semi + 1;
        }
        return out;
    }

    std::string read_quoted_value() {
        if (eof() || (peek() != '"' && peek() != '\'')) fail("expected quoted attribute value");
        char quote = peek();
        ++pos_;
        std::size_t start = pos_;
        auto end = text_.find(quote, pos_);
        if (end == std::string::npos) fail("unterminated attribute value");
        pos_ = end + 1;
        return decode_entities(std::string_view(text_).substr(start, end - start));
    }

    HierarchyNode parse_element() {
        if (eof() || peek() != '<') fail("expected '<'");
        ++pos_;
        std::string tag = read_name();

        HierarchyNode node;
        node.class_name = tag;

        while (true) {
            skip_ws();
            if (eof()) fail("unclosed tag '" + tag + "'");
            if (peek() == '/' || peek() == '>') break;
            std::string attr_name = read_name();
            skip_ws();
            if (eof() || peek() != '=') fail("expected '=' after attribute '" + attr_name + "'");
            ++pos_;
            skip_ws();
            node.attributes[attr_name] = read_quoted_value();
        }

        if (starts_with("/>")) {
            pos_ += 2;
        } else {
            ++pos_;  // '>'
            parse_children(node, tag);
        }

        auto it = node.attributes.find("class");
        if (it != node.attributes.end() && !it->second.empty()) node.class_name = it->second;
        return node;
    }

    void parse_children(HierarchyNode& node, const std::string& tag) {
        while (true) {
            // Skip any text content up to the next markup.
            while (!eof() && peek() != '<') ++pos_;
            if (eof()) fail("unclosed tag '" + tag + "'");
            if (starts_with("<!--")) {
                skip_comment();
                continue;
            }
            if (starts_with("</")) {
                pos_ += 2;
                std::string closing = read_name();
                if (closing != tag)
                    fail("mismatched closing tag '" + closing + "', expected '" + tag + "'");
                skip_ws();
                if (eof() || peek() != '>') fail("malformed closing tag");
                ++pos_;
                return;
            }
            node.children.push_back(parse_element());
        }
    }
};

bool class_is_edit_text(const std::string& class_name) {
    return class_name.find("EditText") != std::string::npos;
}

void extract_into(const HierarchyNode& node, std::vector<UIElement>& out) {
    if (node.children.empty() || is_interactive(node)) {
        UIElement el;
        el.element_id = static_cast<int>(out.size());
        el.text = node.attr("text");
        el.content_desc = node.attr("content-desc");
        el.resource_id = node.attr("resource-id");
        el.class_name = node.class_name;
        el.bounds = parse_bounds(node.attr("bounds"));
        el.interactive = is_interactive(node);
        out.push_back(std::move(el));
    }
    for (const auto& child : node.children) extract_into(child, out);
}

}  // namespace

bool is_interactive(const HierarchyNode& node) {
    return node.attr_true("clickable") || node.attr_true("long-clickable") ||
           node.attr_true("editable") || class_is_edit_text(node.class_name);
}

std::optional<Bounds> parse_bounds(const std::string& raw) {
    Bounds b;
    int consumed = 0;
    if (std::sscanf(raw.c_str(), "[%d,%d][%d,%d]%n", &b.left, &b.top, &b.right, &b.bottom,
                    &consumed) != 4)
        return std::nullopt;
    if (static_cast<std::size_t>(consumed) != raw.size()) return std::nullopt;
    if (b.right <= b.left || b.bottom <= b.top) return std::nullopt;
    return b;
}

HierarchyNode parse_hierarchy(const std::string& xml_text) {
    if (trim(xml_text).empty()) throw EmptyDocument("empty document");
    return XmlReader(xml_text).parse_document();
}

HierarchyNode simplify(const HierarchyNode& root) {
    HierarchyNode node;
    node.class_name = root.class_name;
    node.attributes = root.attributes;
    node.children.reserve(root.children.size());
    for (const auto& child : root.children) node.children.push_back(simplify(child));
    // Single-child non-interactive containers dissolve into their child;
    // the child is already fully simplified.
    if (node.children.size() == 1 && !is_interactive(node)) return std::move(node.children.front());
    return node;
}

std::vector<UIElement> extract_elements(const HierarchyNode& root) {
    std::vector<UIElement> out;
    extract_into(root, out);
    return out;
}

std::string serialize_compact(const HierarchyNode& root) {
    std::ostringstream out;
    bool first = true;
    for (const auto& el : extract_elements(root)) {
        if (!first) out << '\n';
        first = false;
        out << '[' << el.element_id << "] " << suffix_after(el.class_name, '.');
        if (!el.text.empty()) out << " text=\"" << el.text << '"';
        if (!el.content_desc.empty()) out << " desc=\"" << el.content_desc << '"';
        if (!el.resource_id.empty()) out << " id=\"" << suffix_after(el.resource_id, '/') << '"';
    }
    return out.str();
}

UIScreen make_screen(std::string screen_id, HierarchyNode raw_root) {
    UIScreen screen;
    screen.screen_id = std::move(screen_id);
    screen.simplified_root = simplify(raw_root);
    screen.raw_root = std::move(raw_root);
    screen.elements = extract_elements(screen.simplified_root);
    return screen;
}

std::size_t count_nodes(const HierarchyNode& root) {
    std::size_t n = 1;
    for (const auto& child : root.children) n += count_nodes(child);
    return n;
}

std::size_t tree_depth(const HierarchyNode& root) {
    std::size_t deepest = 0;
    for (const auto& child : root.children) deepest = std::max(deepest, tree_depth(child));
    return 1 + deepest;
}

}  // namespace cat
