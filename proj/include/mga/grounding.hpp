#pragma once

// Three-stage grounding: parse the ActionSpec into (op, query, payload),
// localize the query against the observation, bind the chosen element to a
// GroundedAction at its centroid.

#include "mga/observer.hpp"

namespace mga::ground {

struct ParsedAction {
    Op op = Op::click;
    TargetQuery target;
    Payload payload;
    friend bool operator==(const ParsedAction&, const ParsedAction&) = default;
};

// Checks verb/argument/target invariants of an ActionSpec.
inline void validate_action(const ActionSpec& a) {
    auto op = parse_op(a.verb);
    if (!op) throw ValidationError("unknown verb '" + a.verb + "'");
    switch (*op) {
        case Op::type:
            if (!a.argument) throw ValidationError("type needs argument text");
            break;
        case Op::hotkey:
            if (!a.argument || !normalize_chord(*a.argument)) throw ValidationError("hotkey needs a key chord argument");
            if (has_target(a.target)) throw ValidationError("hotkey takes no target");
            break;
        case Op::scroll:
            if (!a.argument || !parse_int(*a.argument)) throw ValidationError("scroll needs an integer delta argument");
            break;
        default:
            if (a.argument) throw ValidationError(a.verb + " takes no argument");
    }
    if (is_pointer_op(*op) && !has_target(a.target)) throw ValidationError(a.verb + " needs a target");
    if (auto* l = std::get_if<ByLabel>(&a.target); l && normalize_label(l->text).empty())
        throw ValidationError("empty label query");
}

inline ParsedAction parse_action(const ActionSpec& spec) {
    validate_action(spec);
    ParsedAction p{*parse_op(spec.verb), spec.target, std::monostate{}};
    switch (p.op) {
        case Op::type: p.payload = TextPayload{*spec.argument}; break;
        case Op::hotkey: p.payload = KeysPayload{*normalize_chord(*spec.argument)}; break;
        case Op::scroll: p.payload = ScrollPayload{*parse_int(*spec.argument)}; break;
        default: break;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Localization
// ---------------------------------------------------------------------------

// untargeted: the query carries no target (keyboard ops).
enum class Status { resolved, not_found, ambiguous, occluded, untargeted };

inline std::string_view to_string(Status s) {
    switch (s) {
        case Status::resolved: return "resolved";
        case Status::not_found: return "not_found";
        case Status::ambiguous: return "ambiguous";
        case Status::occluded: return "occluded";
        case Status::untargeted: return "untargeted";
    }
    return "?";
}

struct ResolutionReport {
    Status status = Status::not_found;
    std::vector<std::string> candidates;
    std::optional<std::string> chosen;
    friend bool operator==(const ResolutionReport&, const ResolutionReport&) = default;
};

inline Json to_json(const ResolutionReport& r) {
    return {{"status", to_string(r.status)},
            {"candidates", r.candidates},
            {"chosen", r.chosen ? Json(*r.chosen) : Json(nullptr)}};
}

namespace detail {

inline ResolutionReport from_matches(std::vector<std::string> actionable, std::vector<std::string> present,
                                     bool modal_active) {
    if (actionable.size() == 1) return {Status::resolved, actionable, actionable.front()};
    if (actionable.size() > 1) return {Status::ambiguous, std::move(actionable), std::nullopt};
    if (!present.empty() && modal_active) return {Status::occluded, std::move(present), std::nullopt};
    return {Status::not_found, {}, std::nullopt};
}

}  // namespace detail

// Resolves a query against the structured observation. Only inventory
// entries are eligible; elements known to the layout but hidden while a
// modal is open are reported as occluded.
inline ResolutionReport localize(const TargetQuery& query, const obs::Observation& o) {
    const bool modal_active = !o.context.active_modals.empty();
    std::vector<std::string> actionable, present;
    auto role_of = [&](const std::string& id) -> std::optional<Role> {
        auto it = o.semantic.find(id);
        return it == o.semantic.end() ? std::nullopt : std::optional<Role>(it->second);
    };

    if (std::holds_alternative<std::monostate>(query)) return {Status::untargeted, {}, std::nullopt};

    if (auto* l = std::get_if<ByLabel>(&query)) {
        const std::string want = normalize_label(l->text);
        for (const auto& a : o.inventory)
            if (normalize_label(a.label) == want) actionable.push_back(a.id);
        for (const auto& s : o.spatial)
            if (normalize_label(s.label) == want) present.push_back(s.id);
    } else if (auto* r = std::get_if<ByRole>(&query)) {
        for (const auto& a : o.inventory)
            if (role_of(a.id) == r->role) actionable.push_back(a.id);
        for (const auto& [id, role] : o.semantic)
            if (role == r->role) present.push_back(id);
    } else if (auto* i = std::get_if<ById>(&query)) {
        if (o.in_inventory(i->id)) actionable.push_back(i->id);
        if (o.semantic.count(i->id)) present.push_back(i->id);
    } else {
        Point p = std::get<ByPoint>(query).point;
        const obs::LayoutEntry* top = nullptr;
        for (const auto& s : o.spatial)
            if (s.bbox.contains(p) && (!top || s.stack > top->stack)) top = &s;
        if (!top) return {Status::not_found, {}, std::nullopt};
        if (o.in_inventory(top->id)) actionable.push_back(top->id);
        present.push_back(top->id);
    }
    return detail::from_matches(std::move(actionable), std::move(present), modal_active);
}

// Raw label reading of the frame, used when no structured observation is
// available. Knows nothing about occlusion, modals or interactability.
inline ResolutionReport localize_visual(const TargetQuery& query, const env::Frame& frame) {
    const env::Scene& scene = *frame.snapshot;
    std::vector<std::string> matches;
    if (std::holds_alternative<std::monostate>(query)) return {Status::untargeted, {}, std::nullopt};
    if (auto* l = std::get_if<ByLabel>(&query)) {
        const std::string want = normalize_label(l->text);
        for (const auto& e : scene.elements)
            if (normalize_label(e.label) == want) matches.push_back(e.id);
    } else if (auto* r = std::get_if<ByRole>(&query)) {
        for (const auto& e : scene.elements)
            if (e.role == r->role) matches.push_back(e.id);
    } else if (auto* i = std::get_if<ById>(&query)) {
        if (scene.find(i->id)) matches.push_back(i->id);
    } else {
        Point p = std::get<ByPoint>(query).point;
        if (scene.in_viewport(p))
            if (auto hit = env::hit_test(scene, p)) matches.push_back(*hit);
    }
    return detail::from_matches(std::move(matches), {}, false);
}

// ---------------------------------------------------------------------------
// Binding
// ---------------------------------------------------------------------------

class BindingError : public Error {
public:
    BindingError(Status status, const std::string& what) : Error(what), status_(status) {}
    Status status() const { return status_; }

private:
    Status status_;
};

using BBoxLookup = std::function<std::optional<BBox>(const std::string&)>;

inline GroundedAction bind(Op op, const ResolutionReport& report, const Payload& payload, const BBoxLookup& bbox_of) {
    GroundedAction a{op, std::monostate{}, payload};
    if (report.status == Status::untargeted) {
        if (is_pointer_op(op)) throw BindingError(report.status, std::string(to_string(op)) + " needs a target");
    } else if (report.status != Status::resolved || !report.chosen) {
        throw BindingError(report.status, "cannot bind: target " + std::string(to_string(report.status)));
    } else {
        auto box = bbox_of(*report.chosen);
        if (!box) throw BindingError(Status::not_found, "no geometry for '" + *report.chosen + "'");
        a.target = box->centroid();
    }
    check_grounded(a);
    return a;
}

inline GroundedAction bind(Op op, const ResolutionReport& report, const Payload& payload, const obs::Observation& o) {
    return bind(op, report, payload, [&](const std::string& id) -> std::optional<BBox> {
        if (auto* s = o.layout_of(id)) return s->bbox;
        return std::nullopt;
    });
}

inline GroundedAction bind(Op op, const ResolutionReport& report, const Payload& payload, const env::Frame& frame) {
    return bind(op, report, payload, [&](const std::string& id) -> std::optional<BBox> {
        if (auto* e = frame.snapshot->find(id)) return e->bbox;
        return std::nullopt;
    });
}

struct Grounding {
    ResolutionReport report;
    GroundedAction action;
};

// Full pipeline. An empty observation falls back to the raw frame reading.
inline Grounding ground(const ActionSpec& spec, const obs::Observation& observation, const env::Frame& frame) {
    ParsedAction p = parse_action(spec);
    if (obs::is_empty(observation)) {
        auto report = localize_visual(p.target, frame);
        return {report, bind(p.op, report, p.payload, frame)};
    }
    auto report = localize(p.target, observation);
    return {report, bind(p.op, report, p.payload, observation)};
}

// Report only; used when binding fails and the report still belongs in the trace.
inline ResolutionReport resolve(const ActionSpec& spec, const obs::Observation& observation, const env::Frame& frame) {
    ParsedAction p = parse_action(spec);
    return obs::is_empty(observation) ? localize_visual(p.target, frame) : localize(p.target, observation);
}

}  // namespace mga::ground
