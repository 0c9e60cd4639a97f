#pragma once

// Action vocabulary shared by the planner, grounding and the environment:
// the six GUI primitives, planner-level ActionSpec and the executable
// GroundedAction with its canonical binding string.

#include "mga/core.hpp"

#include <charconv>
#include <regex>

namespace mga {

enum class Op { click, double_click, right_click, type, hotkey, scroll };

inline constexpr std::array<std::string_view, 6> kOpNames = {
    "click", "double_click", "right_click", "type", "hotkey", "scroll"};

inline std::string_view to_string(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

inline std::optional<Op> parse_op(std::string_view s) {
    for (std::size_t i = 0; i < kOpNames.size(); ++i)
        if (kOpNames[i] == s) return static_cast<Op>(i);
    return std::nullopt;
}

inline bool is_pointer_op(Op op) {
    return op == Op::click || op == Op::double_click || op == Op::right_click || op == Op::scroll;
}

// ---------------------------------------------------------------------------
// Target queries
// ---------------------------------------------------------------------------

struct ByLabel {
    std::string text;
    friend bool operator==(const ByLabel&, const ByLabel&) = default;
};
struct ByRole {
    Role role;
    friend bool operator==(const ByRole&, const ByRole&) = default;
};
struct ByPoint {
    Point point;
    friend bool operator==(const ByPoint&, const ByPoint&) = default;
};
struct ById {
    std::string id;
    friend bool operator==(const ById&, const ById&) = default;
};

// monostate: no target (hotkeys, typing into the focused field).
using TargetQuery = std::variant<std::monostate, ByLabel, ByRole, ByPoint, ById>;

inline bool has_target(const TargetQuery& q) { return !std::holds_alternative<std::monostate>(q); }

inline Json target_to_json(const TargetQuery& q) {
    struct {
        Json operator()(std::monostate) const { return nullptr; }
        Json operator()(const ByLabel& t) const { return {{"by_label", t.text}}; }
        Json operator()(const ByRole& t) const { return {{"by_role", to_string(t.role)}}; }
        Json operator()(const ByPoint& t) const { return {{"by_point", {t.point.x, t.point.y}}}; }
        Json operator()(const ById& t) const { return {{"by_id", t.id}}; }
    } visitor;
    return std::visit(visitor, q);
}

inline TargetQuery target_from_json(const Json& j, const std::string& where) {
    if (j.is_null()) return std::monostate{};
    if (!j.is_object() || j.size() != 1) throw ParseError(where, "target must be null or a one-key object");
    const auto& [key, value] = *j.items().begin();
    if (key == "by_label" && value.is_string()) return ByLabel{value.get<std::string>()};
    if (key == "by_id" && value.is_string()) return ById{value.get<std::string>()};
    if (key == "by_role" && value.is_string()) {
        if (auto r = parse_role(value.get<std::string>())) return ByRole{*r};
        throw ParseError(where + ".by_role", "unknown role '" + value.get<std::string>() + "'");
    }
    if (key == "by_point" && value.is_array() && value.size() == 2 && value[0].is_number_integer() &&
        value[1].is_number_integer())
        return ByPoint{{value[0].get<int>(), value[1].get<int>()}};
    throw ParseError(where, "unrecognized target '" + key + "'");
}

inline std::string target_to_text(const TargetQuery& q) {
    struct {
        std::string operator()(std::monostate) const { return "none"; }
        std::string operator()(const ByLabel& t) const { return "label:" + normalize_label(t.text); }
        std::string operator()(const ByRole& t) const { return "role:" + std::string(to_string(t.role)); }
        std::string operator()(const ByPoint& t) const {
            return "point:" + std::to_string(t.point.x) + "," + std::to_string(t.point.y);
        }
        std::string operator()(const ById& t) const { return "id:" + t.id; }
    } visitor;
    return std::visit(visitor, q);
}

// ---------------------------------------------------------------------------
// ActionSpec: planner output before validation. `verb` stays a string so
// that unknown verbs can be rejected with a useful message.
// ---------------------------------------------------------------------------

struct ActionSpec {
    std::string verb;
    TargetQuery target;
    std::optional<std::string> argument;
    friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

inline Json to_json(const ActionSpec& a) {
    Json j{{"verb", a.verb}, {"target", target_to_json(a.target)}};
    j["argument"] = a.argument ? Json(*a.argument) : Json(nullptr);
    return j;
}

inline ActionSpec action_spec_from_json(const Json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where, "action must be an object");
    ActionSpec a;
    if (!j.contains("verb") || !j["verb"].is_string()) throw ParseError(where + ".verb", "missing verb");
    a.verb = j["verb"].get<std::string>();
    a.target = target_from_json(j.value("target", Json(nullptr)), where + ".target");
    if (j.contains("argument") && !j["argument"].is_null()) {
        if (!j["argument"].is_string()) throw ParseError(where + ".argument", "argument must be a string");
        a.argument = j["argument"].get<std::string>();
    }
    return a;
}

// Canonical text for an ActionSpec; labels are normalized so that the
// same intent always produces the same key.
inline std::string action_key(const ActionSpec& a) {
    std::string key = a.verb + "|" + target_to_text(a.target) + "|";
    if (a.argument) key += *a.argument;
    return key;
}

inline std::string action_digest(const ActionSpec& a) { return short_digest(action_key(a)); }

// ---------------------------------------------------------------------------
// Payloads
// ---------------------------------------------------------------------------

struct TextPayload {
    std::string text;
    friend bool operator==(const TextPayload&, const TextPayload&) = default;
};
struct KeysPayload {
    std::string chord;
    friend bool operator==(const KeysPayload&, const KeysPayload&) = default;
};
struct ScrollPayload {
    int delta = 0;
    friend bool operator==(const ScrollPayload&, const ScrollPayload&) = default;
};

using Payload = std::variant<std::monostate, TextPayload, KeysPayload, ScrollPayload>;

// Key chords are '+'-joined tokens of [a-z0-9_]; input is lowercased.
inline std::optional<std::string> normalize_chord(std::string_view chord) {
    static const std::regex kChord("^[a-z0-9_]+(\\+[a-z0-9_]+)*$");
    std::string lowered;
    for (unsigned char c : chord) lowered.push_back(static_cast<char>(std::tolower(c)));
    if (!std::regex_match(lowered, kChord)) return std::nullopt;
    return lowered;
}

inline std::optional<int> parse_int(std::string_view s) {
    int value = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || begin == end) return std::nullopt;
    return value;
}

// ---------------------------------------------------------------------------
// Quoted strings used in binding strings and action lines.
// ---------------------------------------------------------------------------

inline std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

// Reads a quoted string starting at s[pos] == '"'; advances pos past it.
inline std::optional<std::string> unquote_at(std::string_view s, std::size_t& pos) {
    if (pos >= s.size() || s[pos] != '"') return std::nullopt;
    std::string out;
    for (std::size_t i = pos + 1; i < s.size(); ++i) {
        char c = s[i];
        if (c == '"') {
            pos = i + 1;
            return out;
        }
        if (c == '\\') {
            if (++i >= s.size()) return std::nullopt;
            switch (s[i]) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                default: return std::nullopt;
            }
            continue;
        }
        out.push_back(c);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// GroundedAction: a_t = (op, p).
// ---------------------------------------------------------------------------

using ActionTarget = std::variant<std::monostate, Point, std::string>;

struct GroundedAction {
    Op op = Op::click;
    ActionTarget target;  // Point, element id, or none for keyboard ops
    Payload payload;

    std::string binding() const;
    friend bool operator==(const GroundedAction&, const GroundedAction&) = default;
};

// Pointer ops need a point or element id, hotkey takes none, type may take
// either. Payload kind must match the op.
inline void check_grounded(const GroundedAction& a) {
    bool targeted = !std::holds_alternative<std::monostate>(a.target);
    if (is_pointer_op(a.op) && !targeted) throw ValidationError(std::string(to_string(a.op)) + " needs a target");
    if (a.op == Op::hotkey && targeted) throw ValidationError("hotkey takes no target");
    if (auto* id = std::get_if<std::string>(&a.target); id && id->empty())
        throw ValidationError("empty element id");
    switch (a.op) {
        case Op::type:
            if (!std::holds_alternative<TextPayload>(a.payload)) throw ValidationError("type needs text");
            break;
        case Op::hotkey:
            if (!std::holds_alternative<KeysPayload>(a.payload) ||
                !normalize_chord(std::get<KeysPayload>(a.payload).chord))
                throw ValidationError("hotkey needs a key chord");
            break;
        case Op::scroll:
            if (!std::holds_alternative<ScrollPayload>(a.payload)) throw ValidationError("scroll needs a delta");
            break;
        default:
            if (!std::holds_alternative<std::monostate>(a.payload))
                throw ValidationError(std::string(to_string(a.op)) + " takes no payload");
    }
}

// Canonical form: op(k=v,...) with key order id, x, y, clicks, button, text,
// keys, delta. Mouse buttons fold into click(...).
inline std::string GroundedAction::binding() const {
    std::vector<std::string> parts;
    if (auto* p = std::get_if<Point>(&target)) {
        parts.push_back("x=" + std::to_string(p->x));
        parts.push_back("y=" + std::to_string(p->y));
    } else if (auto* id = std::get_if<std::string>(&target)) {
        parts.push_back("id=" + quote(*id));
    }
    std::string name;
    switch (op) {
        case Op::click:
        case Op::double_click:
        case Op::right_click:
            name = "click";
            parts.push_back(op == Op::double_click ? "clicks=2" : "clicks=1");
            parts.push_back(op == Op::right_click ? "button=right" : "button=left");
            break;
        case Op::type:
            name = "type";
            parts.push_back("text=" + quote(std::get<TextPayload>(payload).text));
            break;
        case Op::hotkey:
            name = "hotkey";
            parts.push_back("keys=" + quote(std::get<KeysPayload>(payload).chord));
            break;
        case Op::scroll:
            name = "scroll";
            parts.push_back("delta=" + std::to_string(std::get<ScrollPayload>(payload).delta));
            break;
    }
    std::string out = name + "(";
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
    return out + ")";
}

// Inverse of GroundedAction::binding. Only canonical strings are accepted,
// which keeps the grammar bijective.
inline GroundedAction parse_binding(std::string_view s) {
    auto fail = [&](const std::string& why) -> ParseError { return ParseError("binding", why + " in '" + std::string(s) + "'"); };
    auto open = s.find('(');
    if (open == std::string_view::npos || s.empty() || s.back() != ')') throw fail("expected op(...)");
    std::string name(s.substr(0, open));
    std::vector<std::pair<std::string, std::string>> kv;
    std::size_t pos = open + 1;
    const std::size_t end = s.size() - 1;
    while (pos < end) {
        auto eq = s.find('=', pos);
        if (eq == std::string_view::npos || eq >= end) throw fail("expected key=value");
        std::string key(s.substr(pos, eq - pos));
        pos = eq + 1;
        std::string value;
        if (pos < end && s[pos] == '"') {
            auto str = unquote_at(s.substr(0, end), pos);
            if (!str) throw fail("bad quoted value");
            value = "\"" + *str;  // marker: quoted
        } else {
            auto comma = s.find(',', pos);
            if (comma == std::string_view::npos || comma > end) comma = end;
            value = std::string(s.substr(pos, comma - pos));
            pos = comma;
        }
        kv.emplace_back(std::move(key), std::move(value));
        if (pos < end) {
            if (s[pos] != ',') throw fail("expected ','");
            ++pos;
            if (pos == end) throw fail("trailing ','");
        }
    }

    std::size_t i = 0;
    auto take = [&](const char* key) -> std::optional<std::string> {
        if (i < kv.size() && kv[i].first == key) return kv[i++].second;
        return std::nullopt;
    };
    auto quoted = [&](const std::optional<std::string>& v) -> std::string {
        if (!v || v->empty() || (*v)[0] != '"') throw fail("expected quoted value");
        return v->substr(1);
    };
    auto integer = [&](const std::optional<std::string>& v) -> int {
        if (!v || v->empty() || (*v)[0] == '"') throw fail("expected integer");
        auto n = parse_int(*v);
        if (!n || (*v)[0] == '+' || std::to_string(*n) != *v) throw fail("non-canonical integer");
        return *n;
    };

    GroundedAction a;
    if (auto id = take("id")) {
        a.target = quoted(id);
    } else if (auto x = take("x")) {
        int px = integer(x);
        auto y = take("y");
        if (!y) throw fail("x without y");
        a.target = Point{px, integer(y)};
    }
    if (name == "click") {
        int clicks = integer(take("clicks"));
        auto button = take("button");
        if (button == "left" && clicks == 1) a.op = Op::click;
        else if (button == "left" && clicks == 2) a.op = Op::double_click;
        else if (button == "right" && clicks == 1) a.op = Op::right_click;
        else throw fail("unsupported clicks/button combination");
    } else if (name == "type") {
        a.op = Op::type;
        a.payload = TextPayload{quoted(take("text"))};
    } else if (name == "hotkey") {
        a.op = Op::hotkey;
        a.payload = KeysPayload{quoted(take("keys"))};
    } else if (name == "scroll") {
        a.op = Op::scroll;
        a.payload = ScrollPayload{integer(take("delta"))};
    } else {
        throw fail("unknown op '" + name + "'");
    }
    if (i != kv.size()) throw fail("unexpected key '" + kv[i].first + "'");
    try {
        check_grounded(a);
    } catch (const ValidationError& e) {
        throw fail(e.what());
    }
    if (a.binding() != s) throw fail("non-canonical binding");
    return a;
}

inline Json to_json(const GroundedAction& a) {
    Json j{{"op", to_string(a.op)}, {"binding", a.binding()}};
    if (auto* p = std::get_if<Point>(&a.target)) j["point"] = {p->x, p->y};
    if (auto* id = std::get_if<std::string>(&a.target)) j["element_id"] = *id;
    return j;
}

}  // namespace mga
