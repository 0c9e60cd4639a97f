#pragma once

// Scene generators and brute-force oracles shared by the unit tests and the
// acceptance suite. The oracles are written independently of the library:
// they scan every element instead of reusing hit_test/paint_order.

#include "mga/mga.hpp"

#include <random>

namespace support {

using namespace mga;

inline env::Element make(std::string id, BBox box, Role role, std::string label = "", bool interactable = false,
                         int z = 0, std::optional<std::string> parent = std::nullopt) {
    env::Element e;
    e.id = std::move(id);
    e.bbox = box;
    e.role = role;
    e.label = std::move(label);
    e.interactable = interactable;
    e.z = z;
    e.parent = std::move(parent);
    return e;
}

inline env::Scene scene_of(std::vector<env::Element> elements, int w = 400, int h = 300) {
    env::Scene s;
    s.width = w;
    s.height = h;
    s.elements = std::move(elements);
    return s;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

inline bool inside(const BBox& b, Point p) { return p.x >= b.x && p.x < b.x + b.w && p.y >= b.y && p.y < b.y + b.h; }

inline bool descends_from(const env::Scene& s, const std::string& id, const std::string& ancestor) {
    std::string cur = id;
    for (std::size_t n = 0; n <= s.elements.size(); ++n) {
        if (cur == ancestor) return true;
        const env::Element* e = nullptr;
        for (const auto& x : s.elements)
            if (x.id == cur) e = &x;
        if (!e || !e->parent) return false;
        cur = *e->parent;
    }
    return false;
}

inline int oracle_layer(const env::Scene& s, const std::string& id) {
    int layer = 0;
    for (std::size_t k = 0; k < s.modal_stack.size(); ++k)
        if (descends_from(s, id, s.modal_stack[k])) layer = static_cast<int>(k) + 1;
    return layer;
}

// Topmost element at p by (modal layer, z, document order).
inline std::optional<std::string> oracle_hit(const env::Scene& s, Point p) {
    std::optional<std::tuple<int, int, std::size_t>> best;
    std::optional<std::string> id;
    for (std::size_t i = 0; i < s.elements.size(); ++i) {
        const auto& e = s.elements[i];
        if (!inside(e.bbox, p)) continue;
        auto key = std::make_tuple(oracle_layer(s, e.id), e.z, i);
        if (!best || key > *best) {
            best = key;
            id = e.id;
        }
    }
    return id;
}

inline std::vector<Point> oracle_probes(const BBox& b) {
    return {{b.x + b.w / 2, b.y + b.h / 2},
            {b.x, b.y},
            {b.x + b.w - 1, b.y},
            {b.x, b.y + b.h - 1},
            {b.x + b.w - 1, b.y + b.h - 1}};
}

inline bool oracle_occluded(const env::Scene& s, const env::Element& e) {
    for (Point p : oracle_probes(e.bbox)) {
        auto hit = oracle_hit(s, p);
        if (hit && descends_from(s, *hit, e.id)) return false;
    }
    return true;
}

inline bool oracle_actionable(const env::Element& e) {
    auto it = e.state.find("enabled");
    bool disabled = it != e.state.end() && std::holds_alternative<bool>(it->second) && !std::get<bool>(it->second);
    return e.interactable && !disabled;
}

inline std::set<std::string> oracle_inventory(const env::Scene& s) {
    std::set<std::string> out;
    for (const auto& e : s.elements) {
        if (!oracle_actionable(e)) continue;
        bool in_top_modal = !s.modal_stack.empty() && descends_from(s, e.id, s.modal_stack.back());
        if (!oracle_occluded(s, e) || in_top_modal) out.insert(e.id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

inline BBox random_box(std::mt19937& rng, int w, int h, int min_side = 8) {
    std::uniform_int_distribution<int> bw(min_side, w / 2), bh(min_side, h / 2);
    int bwv = bw(rng), bhv = bh(rng);
    std::uniform_int_distribution<int> x(0, w - bwv), y(0, h - bhv);
    return {x(rng), y(rng), bwv, bhv};
}

inline BBox box_within(std::mt19937& rng, const BBox& outer, int min_side = 4) {
    std::uniform_int_distribution<int> bw(std::min(min_side, outer.w), std::max(min_side, outer.w / 3));
    std::uniform_int_distribution<int> bh(std::min(min_side, outer.h), std::max(min_side, outer.h / 3));
    int w = std::min(bw(rng), outer.w), h = std::min(bh(rng), outer.h);
    std::uniform_int_distribution<int> x(outer.x, outer.x + outer.w - w), y(outer.y, outer.y + outer.h - h);
    return {x(rng), y(rng), w, h};
}

// Random scene without modals: mixed roles, overlaps, some disabled
// elements, occasional parent links to earlier elements.
inline env::Scene random_scene(std::mt19937& rng, int n_min = 3, int n_max = 12) {
    static const Role kRoles[] = {Role::button, Role::checkbox, Role::text_field, Role::label, Role::list, Role::tab};
    std::uniform_int_distribution<int> count(n_min, n_max), z(0, 5), role(0, 5), coin(0, 3);
    env::Scene s = scene_of({});
    int n = count(rng);
    for (int i = 0; i < n; ++i) {
        env::Element e = make("e" + std::to_string(i), random_box(rng, s.width, s.height), kRoles[role(rng)],
                              "L" + std::to_string(i), coin(rng) != 0, z(rng));
        if (e.role == Role::label) e.interactable = false;
        if (coin(rng) == 0) e.state["enabled"] = false;
        if (i > 0 && coin(rng) == 0) {
            const auto& p = s.elements[std::uniform_int_distribution<int>(0, i - 1)(rng)];
            if (p.bbox.contains(e.bbox)) e.parent = p.id;
        }
        s.elements.push_back(std::move(e));
    }
    return s;
}

// Adds a modal dialog with 0-3 child buttons placed along its top strip.
inline env::Scene with_random_modal(env::Scene s, std::mt19937& rng) {
    BBox box = random_box(rng, s.width, s.height, 40);
    env::Element dialog = make("modal", box, Role::dialog, "Dialog", false, std::uniform_int_distribution<int>(0, 5)(rng));
    s.elements.push_back(dialog);
    int children = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int k = 0; k < children; ++k) {
        BBox strip{box.x, box.y, box.w, std::max(1, box.h / 5)};
        env::Element b = make("modal_btn" + std::to_string(k), box_within(rng, strip, 2), Role::button,
                              k == 0 ? "Close" : "Opt" + std::to_string(k), true, dialog.z + 1, "modal");
        b.effects.push_back(env::Close{"modal"});
        s.elements.push_back(std::move(b));
    }
    s.modal_stack.push_back("modal");
    return s;
}

}  // namespace support
