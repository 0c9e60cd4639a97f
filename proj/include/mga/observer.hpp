#pragma once

// Task-agnostic spatial-semantic observer. Produces the structured
// observation of a frame in four parts (spatial map, semantic roles,
// actionable inventory, context/state) and the (bbox, role) grounding map.
// observe() takes no instruction: the same frame always yields the same
// observation regardless of the task being run.

#include "mga/backend.hpp"
#include "mga/action.hpp"
#include "mga/env.hpp"

namespace mga::obs {

enum class Region { top_bar, left_panel, right_panel, center, bottom_bar };
enum class Relation { above, below, left_of, right_of, contains };

inline std::string_view to_string(Region r) {
    static constexpr std::array<std::string_view, 5> kNames = {"top_bar", "left_panel", "right_panel", "center",
                                                               "bottom_bar"};
    return kNames[static_cast<std::size_t>(r)];
}
inline std::string_view to_string(Relation r) {
    static constexpr std::array<std::string_view, 5> kNames = {"above", "below", "left_of", "right_of", "contains"};
    return kNames[static_cast<std::size_t>(r)];
}

template <typename Enum, std::size_t N>
std::optional<Enum> parse_token(std::string_view s, const std::array<std::string_view, N>& names) {
    for (std::size_t i = 0; i < N; ++i)
        if (names[i] == s) return static_cast<Enum>(i);
    return std::nullopt;
}

struct LayoutEntry {
    std::string id;
    BBox bbox;
    std::string label;
    int stack = 0;  // paint-order rank; higher paints over lower
    Region region = Region::center;
    std::vector<std::pair<Relation, std::string>> relations;
    friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

struct ActionableEntry {
    std::string id;
    std::string label;
    std::vector<Op> ops;
    friend bool operator==(const ActionableEntry&, const ActionableEntry&) = default;
};

struct ContextInfo {
    std::vector<std::string> active_modals;
    std::vector<std::string> loading;
    std::vector<std::string> highlighted;
    std::optional<std::string> focus;
    friend bool operator==(const ContextInfo&, const ContextInfo&) = default;
};

struct Observation {
    std::vector<LayoutEntry> spatial;
    std::map<std::string, Role> semantic;
    std::vector<ActionableEntry> inventory;
    ContextInfo context;

    const LayoutEntry* layout_of(std::string_view id) const {
        for (const auto& e : spatial)
            if (e.id == id) return &e;
        return nullptr;
    }
    bool in_inventory(std::string_view id) const {
        return std::any_of(inventory.begin(), inventory.end(), [&](const ActionableEntry& a) { return a.id == id; });
    }
    friend bool operator==(const Observation&, const Observation&) = default;
};

// The designated empty observation used by the no_ss ablation.
inline Observation empty_observation() { return {}; }
inline bool is_empty(const Observation& o) { return o == empty_observation(); }

struct GroundingMapEntry {
    BBox bbox;
    Role role;
    friend bool operator==(const GroundingMapEntry&, const GroundingMapEntry&) = default;
};

class ObservationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

// Fixed bands by centroid: top/bottom 12%, left/right 20%, else center.
inline Region region_of(const BBox& b, int width, int height) {
    Point c = b.centroid();
    if (static_cast<long>(c.y) * 100 < 12L * height) return Region::top_bar;
    if (static_cast<long>(c.y) * 100 >= 88L * height) return Region::bottom_bar;
    if (static_cast<long>(c.x) * 100 < 20L * width) return Region::left_panel;
    if (static_cast<long>(c.x) * 100 >= 80L * width) return Region::right_panel;
    return Region::center;
}

inline std::vector<std::pair<Relation, std::string>> relations_of(const env::Scene& scene, std::size_t i) {
    std::vector<std::pair<Relation, std::string>> out;
    const BBox& a = scene.elements[i].bbox;
    for (std::size_t j = 0; j < scene.elements.size(); ++j) {
        if (i == j) continue;
        const BBox& b = scene.elements[j].bbox;
        const std::string& other = scene.elements[j].id;
        if (a.y + a.h <= b.y) out.emplace_back(Relation::above, other);
        if (b.y + b.h <= a.y) out.emplace_back(Relation::below, other);
        if (a.x + a.w <= b.x) out.emplace_back(Relation::left_of, other);
        if (b.x + b.w <= a.x) out.emplace_back(Relation::right_of, other);
        if (a.contains(b) && !(a == b)) out.emplace_back(Relation::contains, other);
    }
    return out;
}

// Occluded: every probe point (centroid and four corners) hit-tests to an
// element outside this element's own subtree.
inline bool is_occluded(const env::Scene& scene, std::size_t i) {
    const auto& e = scene.elements[i];
    for (Point p : e.bbox.probe_points()) {
        auto hit = env::hit_test_index(scene, p);
        if (hit && env::is_self_or_ancestor(scene, e.id, scene.elements[*hit].id)) return false;
    }
    return true;
}

inline bool in_topmost_modal(const env::Scene& scene, std::string_view id) {
    return !scene.modal_stack.empty() && env::is_self_or_ancestor(scene, scene.modal_stack.back(), id);
}

inline std::vector<Op> supported_ops(const env::Element& e) {
    std::vector<Op> ops{Op::click, Op::double_click};
    if (!e.context_menu.empty()) ops.push_back(Op::right_click);
    if (e.role == Role::text_field) ops.push_back(Op::type);
    if (e.role == Role::scroll_region) ops.push_back(Op::scroll);
    return ops;
}

// Deterministic scene-derived observation.
inline Observation extract(const env::Frame& frame) {
    if (!frame.snapshot) throw ObservationError("frame has no snapshot");
    const env::Scene& scene = *frame.snapshot;
    Observation o;
    auto order = env::paint_order(scene);
    std::vector<int> rank(scene.elements.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);

    for (std::size_t i = 0; i < scene.elements.size(); ++i) {
        const auto& e = scene.elements[i];
        o.spatial.push_back({e.id, e.bbox, e.label, rank[i], region_of(e.bbox, scene.width, scene.height),
                             relations_of(scene, i)});
        o.semantic[e.id] = e.role;
        if (e.actionable() && (!is_occluded(scene, i) || in_topmost_modal(scene, e.id)))
            o.inventory.push_back({e.id, e.label, supported_ops(e)});
        if (e.get("progress")) o.context.loading.push_back(e.id);
        if (auto h = e.get("highlighted"); h && scalar_equal(*h, Scalar{true})) o.context.highlighted.push_back(e.id);
    }
    o.context.active_modals = scene.modal_stack;
    o.context.focus = scene.focus;
    return o;
}

// ---------------------------------------------------------------------------
// Serialization (traces and the remote wire format)
// ---------------------------------------------------------------------------

inline Json to_json(const Observation& o) {
    Json spatial = Json::array();
    for (const auto& s : o.spatial) {
        Json rel = Json::array();
        for (const auto& [r, other] : s.relations) rel.push_back({to_string(r), other});
        spatial.push_back({{"id", s.id},
                           {"bbox", bbox_to_json(s.bbox)},
                           {"label", s.label},
                           {"stack", s.stack},
                           {"region", to_string(s.region)},
                           {"relations", rel}});
    }
    Json semantic = Json::object();
    for (const auto& [id, role] : o.semantic) semantic[id] = to_string(role);
    Json inventory = Json::array();
    for (const auto& a : o.inventory) {
        Json ops = Json::array();
        for (Op op : a.ops) ops.push_back(to_string(op));
        inventory.push_back({{"id", a.id}, {"label", a.label}, {"ops", ops}});
    }
    Json context{{"active_modals", o.context.active_modals},
                 {"loading", o.context.loading},
                 {"highlighted", o.context.highlighted},
                 {"focus", o.context.focus ? Json(*o.context.focus) : Json(nullptr)}};
    return {{"spatial", spatial}, {"semantic", semantic}, {"inventory", inventory}, {"context", context}};
}

inline Observation observation_from_json(const Json& j) {
    static constexpr std::array<std::string_view, 5> kRegions = {"top_bar", "left_panel", "right_panel", "center",
                                                                 "bottom_bar"};
    static constexpr std::array<std::string_view, 5> kRelations = {"above", "below", "left_of", "right_of",
                                                                   "contains"};
    auto strings = [](const Json& arr, const std::string& where) {
        if (!arr.is_array()) throw ParseError(where, "expected an array");
        std::vector<std::string> out;
        for (const auto& v : arr) {
            if (!v.is_string()) throw ParseError(where, "expected strings");
            out.push_back(v.get<std::string>());
        }
        return out;
    };
    try {
        Observation o;
        for (std::size_t i = 0; i < j.at("spatial").size(); ++i) {
            const Json& s = j.at("spatial")[i];
            const std::string at = "spatial[" + std::to_string(i) + "]";
            LayoutEntry e;
            e.id = s.at("id").get<std::string>();
            const Json& b = s.at("bbox");
            e.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
            e.label = s.value("label", std::string{});
            e.stack = s.value("stack", 0);
            auto region = parse_token<Region>(s.at("region").get<std::string>(), kRegions);
            if (!region) throw ParseError(at + ".region", "unknown region");
            e.region = *region;
            for (const auto& r : s.value("relations", Json::array())) {
                auto rel = parse_token<Relation>(r.at(0).get<std::string>(), kRelations);
                if (!rel) throw ParseError(at + ".relations", "unknown relation");
                e.relations.emplace_back(*rel, r.at(1).get<std::string>());
            }
            o.spatial.push_back(std::move(e));
        }
        for (const auto& [id, role] : j.at("semantic").items()) {
            auto r = parse_role(role.get<std::string>());
            if (!r) throw ParseError("semantic." + id, "unknown role");
            o.semantic[id] = *r;
        }
        for (const auto& a : j.at("inventory")) {
            ActionableEntry entry{a.at("id").get<std::string>(), a.value("label", std::string{}), {}};
            for (const auto& op : a.value("ops", Json::array())) {
                auto parsed = parse_op(op.get<std::string>());
                if (!parsed) throw ParseError("inventory", "unknown op");
                entry.ops.push_back(*parsed);
            }
            o.inventory.push_back(std::move(entry));
        }
        const Json& c = j.at("context");
        o.context.active_modals = strings(c.at("active_modals"), "context.active_modals");
        o.context.loading = strings(c.value("loading", Json::array()), "context.loading");
        o.context.highlighted = strings(c.value("highlighted", Json::array()), "context.highlighted");
        if (c.contains("focus") && !c["focus"].is_null()) o.context.focus = c["focus"].get<std::string>();
        return o;
    } catch (const Json::exception& e) {
        throw ParseError("observation", e.what());
    }
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

class ObserverBackend {
public:
    virtual ~ObserverBackend() = default;
    virtual Observation observe(const env::Frame& frame) = 0;
};

class OracleObserver final : public ObserverBackend {
public:
    Observation observe(const env::Frame& frame) override { return extract(frame); }
};

// Sends the serialized frame through a model backend and parses the reply
// as an Observation document.
class RemoteObserver final : public ObserverBackend {
public:
    explicit RemoteObserver(backend::ModelBackend& model) : model_(model) {}

    Observation observe(const env::Frame& frame) override {
        auto bundle = backend::PromptBundle::make(
            backend::RoleTag::observer, {{"frame", env::save_scene(*frame.snapshot).dump()}});
        backend::BackendResponse reply;
        try {
            reply = model_.complete(bundle);
            return observation_from_json(Json::parse(reply.text));
        } catch (const Error& e) {
            throw ObservationError(std::string("remote observer: ") + e.what());
        } catch (const Json::exception& e) {
            throw ObservationError(std::string("remote observer reply: ") + e.what());
        }
    }

private:
    backend::ModelBackend& model_;
};

inline Observation observe(const env::Frame& frame, ObserverBackend& backend) { return backend.observe(frame); }

// One (bbox, role) pair per element of the frame, in document order.
inline std::vector<GroundingMapEntry> grounding_map(const Observation& observation, const env::Frame& frame) {
    std::vector<GroundingMapEntry> out;
    for (const auto& e : frame.snapshot->elements) {
        const LayoutEntry* layout = observation.layout_of(e.id);
        auto role = observation.semantic.find(e.id);
        out.push_back({layout ? layout->bbox : e.bbox, role != observation.semantic.end() ? role->second : e.role});
    }
    return out;
}

}  // namespace mga::obs
