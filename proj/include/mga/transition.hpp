#pragma once

// Environment dynamics: the transition-rule table and apply_action.
//
//   click        checkbox -> toggle, text_field -> focus, menu -> open/close,
//                button/menu_item/tab -> activate (fire declared effects)
//   double_click text_field -> select, otherwise as click
//   right_click  element with a context menu -> open it
//   type         inserts into the focused (or targeted) text_field
//   hotkey       fires the scene-level binding for the chord
//   scroll       shifts the enclosing scroll_region's "offset" by delta
//
// Pointer input landing inside a modal's bbox is intercepted unless it hits
// an actionable element of the modal layer.

#include "mga/action.hpp"
#include "mga/env.hpp"

namespace mga::env {

enum class Outcome { ok, intercepted, no_target, no_effect };

inline std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::ok: return "ok";
        case Outcome::intercepted: return "intercepted";
        case Outcome::no_target: return "no_target";
        case Outcome::no_effect: return "no_effect";
    }
    return "?";
}

enum class Rule { none, toggle, focus, select, open_menu, close_menu, open_context_menu, activate, insert_text, dispatch, scroll };

inline std::string_view to_string(Rule r) {
    static constexpr std::array<std::string_view, 11> kNames = {
        "none", "toggle", "focus", "select", "open_menu", "close_menu",
        "open_context_menu", "activate", "insert_text", "dispatch", "scroll"};
    return kNames[static_cast<std::size_t>(r)];
}

struct EffectRecord {
    std::string element_id;  // or "$flags", "$fs", "$scene"
    std::string key;
    std::optional<Scalar> old_value;
    std::optional<Scalar> new_value;
    friend bool operator==(const EffectRecord&, const EffectRecord&) = default;
};

inline Json to_json(const EffectRecord& r) {
    return {{"element", r.element_id},
            {"key", r.key},
            {"old", r.old_value ? scalar_to_json(*r.old_value) : Json(nullptr)},
            {"new", r.new_value ? scalar_to_json(*r.new_value) : Json(nullptr)}};
}

struct TransitionResult {
    Scene scene;
    std::vector<EffectRecord> effects;
    Outcome outcome = Outcome::no_effect;
    Rule rule = Rule::none;                 // rule that fired (none unless ok)
    std::optional<std::string> receiver;    // element that received the input
};

// Summary without the scene snapshot; used in traces and memory.
inline Json summarize(const TransitionResult& r) {
    Json effects = Json::array();
    for (const auto& e : r.effects) effects.push_back(to_json(e));
    return {{"outcome", to_string(r.outcome)},
            {"rule", to_string(r.rule)},
            {"receiver", r.receiver ? Json(*r.receiver) : Json(nullptr)},
            {"effects", effects},
            {"post_digest", scene_digest(r.scene)}};
}

inline std::optional<std::size_t> enclosing_scroll_region(const Scene& scene, std::size_t index) {
    std::optional<std::size_t> cur = index;
    for (std::size_t guard = 0; cur && guard <= scene.elements.size(); ++guard) {
        if (scene.elements[*cur].role == Role::scroll_region) return cur;
        const auto& parent = scene.elements[*cur].parent;
        cur = parent ? scene.index_of(*parent) : std::nullopt;
    }
    return std::nullopt;
}

// The rule that `op` fires on element `index`, assuming the input reaches it.
inline Rule rule_for(const Scene& scene, Op op, std::size_t index) {
    const Element& e = scene.elements[index];
    switch (op) {
        case Op::type:
            return e.role == Role::text_field && e.actionable() ? Rule::insert_text : Rule::none;
        case Op::hotkey:
            return Rule::dispatch;
        case Op::scroll: {
            auto region = enclosing_scroll_region(scene, index);
            return region && scene.elements[*region].actionable() ? Rule::scroll : Rule::none;
        }
        case Op::right_click:
            return e.actionable() && !e.context_menu.empty() ? Rule::open_context_menu : Rule::none;
        case Op::click:
        case Op::double_click:
            break;
    }
    if (!e.actionable()) return Rule::none;
    switch (e.role) {
        case Role::checkbox: return Rule::toggle;
        case Role::text_field:
            if (op == Op::double_click) return Rule::select;
            return scene.focus == e.id ? Rule::none : Rule::focus;
        case Role::menu: {
            auto open = e.get("open");
            return open && scalar_equal(*open, Scalar{true}) ? Rule::close_menu : Rule::open_menu;
        }
        case Role::button:
        case Role::menu_item:
        case Role::tab:
            return Rule::activate;
        default:
            return e.effects.empty() ? Rule::none : Rule::activate;
    }
}

// Rule the action is expected to fire on its intended element, ignoring
// occlusion. `element_id` is the element grounding chose (if any).
inline Rule expected_rule(const Scene& scene, Op op, const std::optional<std::string>& element_id) {
    if (op == Op::hotkey) return Rule::dispatch;
    if (!element_id) return op == Op::type ? Rule::insert_text : Rule::none;
    auto index = scene.index_of(*element_id);
    if (!index) return Rule::none;
    return rule_for(scene, op, *index);
}

namespace detail {

class Mutator {
public:
    explicit Mutator(const Scene& base) : scene_(base) {}

    Scene& scene() { return scene_; }
    std::vector<EffectRecord>& effects() { return effects_; }

    void set_state(const std::string& id, const std::string& key, const Scalar& value) {
        auto i = scene_.index_of(id);
        if (!i) return;
        auto& state = scene_.elements[*i].state;
        auto it = state.find(key);
        std::optional<Scalar> old;
        if (it != state.end()) {
            if (it->second == value) return;
            old = it->second;
        }
        state[key] = value;
        effects_.push_back({id, key, old, value});
    }

    void set_flag(const std::string& name, const Scalar& value) {
        auto it = scene_.flags.find(name);
        std::optional<Scalar> old;
        if (it != scene_.flags.end()) {
            if (it->second == value) return;
            old = it->second;
        }
        scene_.flags[name] = value;
        effects_.push_back({"$flags", name, old, value});
    }

    void write_file(const std::string& path, const std::string& bytes) {
        const std::string* prev = scene_.fs.read(path);
        if (prev && *prev == bytes) return;
        std::optional<Scalar> old;
        if (prev) old = *prev;
        scene_.fs.write(path, bytes);
        effects_.push_back({"$fs", path, old, bytes});
    }

    void delete_file(const std::string& path) {
        const std::string* prev = scene_.fs.read(path);
        if (!prev) return;
        Scalar old = *prev;
        scene_.fs.remove(path);
        effects_.push_back({"$fs", path, old, std::nullopt});
    }

    void set_focus(const std::optional<std::string>& id) {
        if (scene_.focus == id) return;
        auto to_scalar = [](const std::optional<std::string>& v) -> std::optional<Scalar> {
            if (!v) return std::nullopt;
            return Scalar{*v};
        };
        effects_.push_back({"$scene", "focus", to_scalar(scene_.focus), to_scalar(id)});
        scene_.focus = id;
    }

    void add_element(Element e) {
        if (scene_.find(e.id)) return;
        effects_.push_back({e.id, "$present", Scalar{false}, Scalar{true}});
        scene_.elements.push_back(std::move(e));
    }

    void push_modal(const std::string& id) {
        if (std::find(scene_.modal_stack.begin(), scene_.modal_stack.end(), id) != scene_.modal_stack.end())
            return;
        std::string old = join(scene_.modal_stack);
        scene_.modal_stack.push_back(id);
        effects_.push_back({"$scene", "modal_stack", Scalar{old}, Scalar{join(scene_.modal_stack)}});
    }

    // Removes `id` and all of its descendants.
    void remove_subtree(const std::string& id) {
        if (!scene_.find(id)) return;
        std::vector<std::string> doomed;
        for (const auto& e : scene_.elements)
            if (is_self_or_ancestor(scene_, id, e.id)) doomed.push_back(e.id);
        for (const auto& d : doomed) effects_.push_back({d, "$present", Scalar{true}, Scalar{false}});
        auto gone = [&](const std::string& x) { return std::find(doomed.begin(), doomed.end(), x) != doomed.end(); };
        std::erase_if(scene_.elements, [&](const Element& e) { return gone(e.id); });
        std::string old = join(scene_.modal_stack);
        std::erase_if(scene_.modal_stack, gone);
        if (old != join(scene_.modal_stack))
            effects_.push_back({"$scene", "modal_stack", Scalar{old}, Scalar{join(scene_.modal_stack)}});
        if (scene_.focus && gone(*scene_.focus)) set_focus(std::nullopt);
    }

    void fire(const std::vector<EffectDecl>& effects) {
        for (const auto& fx : effects) std::visit([this](const auto& e) { apply(e); }, fx);
    }

private:
    static std::string join(const std::vector<std::string>& ids) {
        std::string out;
        for (const auto& id : ids) out += (out.empty() ? "" : ",") + id;
        return out;
    }

    void apply(const SetState& e) { set_state(e.target, e.key, e.value); }
    void apply(const SetFlag& e) { set_flag(e.name, e.value); }
    void apply(const WriteFile& e) {
        if (e.from_element.empty()) return write_file(e.path, e.content);
        const Element* src = scene_.find(e.from_element);
        auto value = src ? src->get(e.from_key) : std::nullopt;
        if (!value) return;
        auto* text = std::get_if<std::string>(&*value);
        write_file(e.path, text ? *text : scalar_to_text(*value));
    }
    void apply(const DeleteFile& e) { delete_file(e.path); }
    void apply(const Spawn& e) {
        for (const auto& el : e.elements) add_element(el);
        if (e.modal) push_modal(e.elements.front().id);
    }
    void apply(const Close& e) { remove_subtree(e.target); }
    void apply(const Focus& e) {
        const Element* el = scene_.find(e.target);
        if (el && el->interactable) set_focus(e.target);
    }

    Scene scene_;
    std::vector<EffectRecord> effects_;
};

inline std::string text_of(const Element& e) {
    auto v = e.get("text");
    if (!v) return {};
    if (auto* s = std::get_if<std::string>(&*v)) return *s;
    return scalar_to_text(*v);
}

inline bool is_true(const std::optional<Scalar>& v) { return v && scalar_equal(*v, Scalar{true}); }

inline void insert_text(Mutator& m, const std::string& field_id, const std::string& payload) {
    const Element* field = m.scene().find(field_id);
    std::string text = is_true(field->get("selected")) ? payload : text_of(*field) + payload;
    m.set_state(field_id, "text", Scalar{text});
    m.set_state(field_id, "selected", Scalar{false});
}

// Fires `rule` on element `index` of the mutator's scene.
inline void fire_rule(Mutator& m, Rule rule, std::size_t index, const GroundedAction& action) {
    const Element e = m.scene().elements[index];
    switch (rule) {
        case Rule::toggle:
            m.set_state(e.id, "checked", Scalar{!is_true(e.get("checked"))});
            m.fire(e.effects);
            break;
        case Rule::focus:
            m.set_focus(e.id);
            break;
        case Rule::select:
            m.set_focus(e.id);
            m.set_state(e.id, "selected", Scalar{true});
            break;
        case Rule::open_menu:
            m.set_state(e.id, "open", Scalar{true});
            for (auto item : e.items) {
                if (!item.parent) item.parent = e.id;
                m.add_element(item);
            }
            break;
        case Rule::close_menu:
            for (const auto& item : e.items) m.remove_subtree(item.id);
            m.set_state(e.id, "open", Scalar{false});
            break;
        case Rule::open_context_menu:
            m.set_state(e.id, "context_open", Scalar{true});
            for (auto item : e.context_menu) {
                if (!item.parent) item.parent = e.id;
                m.add_element(item);
            }
            break;
        case Rule::activate:
            m.fire(e.effects);
            if (e.role == Role::menu_item && e.parent) {
                // Activating an entry dismisses the menu it came from.
                if (const Element* owner = m.scene().find(*e.parent)) {
                    const Element o = *owner;
                    bool from_items = std::any_of(o.items.begin(), o.items.end(),
                                                  [&](const Element& it) { return it.id == e.id; });
                    for (const auto& item : from_items ? o.items : o.context_menu) m.remove_subtree(item.id);
                    m.set_state(o.id, from_items ? "open" : "context_open", Scalar{false});
                }
            }
            break;
        case Rule::insert_text:
            m.set_focus(e.id);
            insert_text(m, e.id, std::get<TextPayload>(action.payload).text);
            break;
        case Rule::scroll: {
            auto region = *enclosing_scroll_region(m.scene(), index);
            const Element& r = m.scene().elements[region];
            std::int64_t offset = 0;
            if (auto v = r.get("offset"); v && std::holds_alternative<std::int64_t>(*v))
                offset = std::get<std::int64_t>(*v);
            int delta = std::get<ScrollPayload>(action.payload).delta;
            if (delta != 0) m.set_state(r.id, "offset", Scalar{offset + delta});
            break;
        }
        case Rule::dispatch:
        case Rule::none:
            break;
    }
}

inline TransitionResult unchanged(const Scene& scene, Outcome outcome, std::optional<std::string> receiver = {}) {
    return TransitionResult{scene, {}, outcome, Rule::none, std::move(receiver)};
}

}  // namespace detail

// Pure transition function: identical (scene, action) pairs give identical
// results. outcome != ok leaves the scene untouched.
inline TransitionResult apply_action(const Scene& scene, const GroundedAction& action) {
    using namespace detail;
    check_grounded(action);

    if (action.op == Op::hotkey) {
        const auto& chord = std::get<KeysPayload>(action.payload).chord;
        auto it = scene.hotkeys.find(chord);
        if (it == scene.hotkeys.end()) return unchanged(scene, Outcome::no_effect);
        Mutator m(scene);
        m.fire(it->second);
        if (m.effects().empty()) return unchanged(scene, Outcome::no_effect);
        return TransitionResult{std::move(m.scene()), std::move(m.effects()), Outcome::ok, Rule::dispatch, {}};
    }

    if (std::holds_alternative<std::monostate>(action.target)) {
        // Untargeted type: goes to the focused field.
        const Element* field = scene.focus ? scene.find(*scene.focus) : nullptr;
        if (!field || rule_for(scene, Op::type, *scene.index_of(field->id)) != Rule::insert_text)
            return unchanged(scene, Outcome::no_effect);
        Mutator m(scene);
        insert_text(m, field->id, std::get<TextPayload>(action.payload).text);
        if (m.effects().empty()) return unchanged(scene, Outcome::no_effect);
        return TransitionResult{std::move(m.scene()), std::move(m.effects()), Outcome::ok, Rule::insert_text,
                                field->id};
    }

    // Lower the target to a point; element-id targets keep their intent for
    // the interception check.
    Point point;
    std::optional<std::size_t> intended;
    if (auto* p = std::get_if<Point>(&action.target)) {
        if (!scene.in_viewport(*p)) return unchanged(scene, Outcome::no_target);
        point = *p;
    } else {
        intended = scene.index_of(std::get<std::string>(action.target));
        if (!intended) return unchanged(scene, Outcome::no_target);
        point = scene.elements[*intended].bbox.centroid();
    }

    auto hit = hit_test_index(scene, point);
    if (!hit) return unchanged(scene, Outcome::no_target);

    auto layers = modal_layers(scene);
    int covering = 0;  // 1 + index of the topmost modal whose bbox holds the point
    for (std::size_t k = 0; k < scene.modal_stack.size(); ++k)
        if (scene.find(scene.modal_stack[k])->bbox.contains(point)) covering = static_cast<int>(k) + 1;
    if (covering > 0) {
        if (intended && layers[*intended] < covering) return unchanged(scene, Outcome::intercepted, scene.elements[*hit].id);
        if (!intended && !scene.elements[*hit].actionable())
            return unchanged(scene, Outcome::intercepted, scene.elements[*hit].id);
    }

    const std::string receiver = scene.elements[*hit].id;
    Rule rule = rule_for(scene, action.op, *hit);
    if (rule == Rule::none) return unchanged(scene, Outcome::no_effect, receiver);
    Mutator m(scene);
    fire_rule(m, rule, *hit, action);
    if (m.effects().empty()) return unchanged(scene, Outcome::no_effect, receiver);
    return TransitionResult{std::move(m.scene()), std::move(m.effects()), Outcome::ok, rule, receiver};
}

}  // namespace mga::env
