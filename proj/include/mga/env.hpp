#pragma once

// Simulated GUI environment: scene graph, virtual file system, documents,
// hit testing and frames.

#include "mga/core.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <set>

namespace mga::env {

struct Element;

// ---------------------------------------------------------------------------
// Declared effects. Elements and hotkeys carry these in the scene document;
// the simulator fires them on activation.
// ---------------------------------------------------------------------------

struct SetState {
    std::string target;
    std::string key;
    Scalar value;
    friend bool operator==(const SetState&, const SetState&) = default;
};
struct SetFlag {
    std::string name;
    Scalar value;
    friend bool operator==(const SetFlag&, const SetFlag&) = default;
};
// Writes `content`, or the current value of (from_element, from_key) when
// from_element is set.
struct WriteFile {
    std::string path;
    std::string content;
    std::string from_element;
    std::string from_key;
    friend bool operator==(const WriteFile&, const WriteFile&) = default;
};
struct DeleteFile {
    std::string path;
    friend bool operator==(const DeleteFile&, const DeleteFile&) = default;
};
// Materializes elements; with modal=true the first spawned element (a
// dialog) is pushed onto the modal stack.
struct Spawn {
    std::vector<Element> elements;
    bool modal = false;
    friend bool operator==(const Spawn&, const Spawn&);
};
// Removes the target and its descendants (and pops it from the modal stack).
struct Close {
    std::string target;
    friend bool operator==(const Close&, const Close&) = default;
};
struct Focus {
    std::string target;
    friend bool operator==(const Focus&, const Focus&) = default;
};

using EffectDecl = std::variant<SetState, SetFlag, WriteFile, DeleteFile, Spawn, Close, Focus>;

// ---------------------------------------------------------------------------
// Element / Scene
// ---------------------------------------------------------------------------

using StateMap = std::map<std::string, Scalar>;

struct Element {
    std::string id;
    BBox bbox;
    Role role = Role::label;
    std::string label;
    StateMap state;
    int z = 0;
    std::optional<std::string> parent;
    bool interactable = false;
    std::vector<EffectDecl> effects;
    std::vector<Element> items;         // menu: materialized when opened
    std::vector<Element> context_menu;  // materialized on right click

    // interactable and not disabled through state "enabled" == false
    bool actionable() const {
        auto it = state.find("enabled");
        return interactable && !(it != state.end() && scalar_equal(it->second, Scalar{false}));
    }
    std::optional<Scalar> get(const std::string& key) const {
        auto it = state.find(key);
        if (it == state.end()) return std::nullopt;
        return it->second;
    }
    friend bool operator==(const Element&, const Element&) = default;
};

inline bool operator==(const Spawn& a, const Spawn& b) { return a.modal == b.modal && a.elements == b.elements; }

inline std::string normalize_path(std::string_view raw) {
    if (raw.empty() || raw.front() != '/') throw ParseError("", "path must be absolute: '" + std::string(raw) + "'");
    std::string norm = std::filesystem::path(std::string(raw)).lexically_normal().generic_string();
    while (norm.size() > 1 && norm.back() == '/') norm.pop_back();
    if (norm == "/") throw ParseError("", "path names the root directory");
    return norm;
}

// Flat path -> bytes store. Keys are always normalized.
class VirtualFS {
public:
    void write(std::string_view path, std::string bytes) { entries_[normalize_path(path)] = std::move(bytes); }
    bool remove(std::string_view path) { return entries_.erase(normalize_path(path)) > 0; }
    const std::string* read(std::string_view path) const {
        auto it = entries_.find(normalize_path(path));
        return it == entries_.end() ? nullptr : &it->second;
    }
    const std::map<std::string, std::string>& entries() const { return entries_; }
    friend bool operator==(const VirtualFS&, const VirtualFS&) = default;

private:
    std::map<std::string, std::string> entries_;
};

struct Scene {
    int width = 1920;
    int height = 1080;
    std::vector<Element> elements;
    std::vector<std::string> modal_stack;
    std::optional<std::string> focus;
    VirtualFS fs;
    StateMap flags;
    std::map<std::string, std::vector<EffectDecl>> hotkeys;

    std::optional<std::size_t> index_of(std::string_view id) const {
        for (std::size_t i = 0; i < elements.size(); ++i)
            if (elements[i].id == id) return i;
        return std::nullopt;
    }
    const Element* find(std::string_view id) const {
        auto i = index_of(id);
        return i ? &elements[*i] : nullptr;
    }
    bool in_viewport(Point p) const { return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height; }
    friend bool operator==(const Scene&, const Scene&) = default;
};

// True when `ancestor` is `id` itself or one of its ancestors.
inline bool is_self_or_ancestor(const Scene& scene, std::string_view ancestor, std::string_view id) {
    std::optional<std::string> cur{std::string(id)};
    for (std::size_t guard = 0; cur && guard <= scene.elements.size(); ++guard) {
        if (*cur == ancestor) return true;
        const Element* e = scene.find(*cur);
        cur = e ? e->parent : std::nullopt;
    }
    return false;
}

// Modal layer per element: 1 + index of the highest modal_stack entry that
// is the element or one of its ancestors, 0 for non-modal content.
inline std::vector<int> modal_layers(const Scene& scene) {
    std::vector<int> layers(scene.elements.size(), 0);
    for (std::size_t i = 0; i < scene.elements.size(); ++i)
        for (std::size_t m = 0; m < scene.modal_stack.size(); ++m)
            if (is_self_or_ancestor(scene, scene.modal_stack[m], scene.elements[i].id))
                layers[i] = static_cast<int>(m) + 1;
    return layers;
}

// Element indices from bottom to top: ordered by (modal layer, z, document
// order). Later entries paint over earlier ones.
inline std::vector<std::size_t> paint_order(const Scene& scene) {
    auto layers = modal_layers(scene);
    std::vector<std::size_t> order(scene.elements.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::pair(layers[a], scene.elements[a].z) < std::pair(layers[b], scene.elements[b].z);
    });
    return order;
}

inline std::optional<std::size_t> hit_test_index(const Scene& scene, Point p) {
    if (!scene.in_viewport(p))
        throw OutOfBounds("point (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") outside viewport");
    auto order = paint_order(scene);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (scene.elements[*it].bbox.contains(p)) return *it;
    return std::nullopt;
}

// Topmost element containing `p`; throws OutOfBounds outside the viewport.
inline std::optional<std::string> hit_test(const Scene& scene, Point p) {
    auto i = hit_test_index(scene, p);
    if (!i) return std::nullopt;
    return scene.elements[*i].id;
}

// ---------------------------------------------------------------------------
// Scene documents
// ---------------------------------------------------------------------------

namespace detail {

inline Json state_to_json(const StateMap& m) {
    Json j = Json::object();
    for (const auto& [k, v] : m) j[k] = scalar_to_json(v);
    return j;
}

inline StateMap state_from_json(const Json& j, const std::string& where) {
    if (j.is_null()) return {};
    if (!j.is_object()) throw ParseError(where, "expected an object");
    StateMap m;
    for (const auto& [k, v] : j.items()) m[k] = scalar_from_json(v, where + "." + k);
    return m;
}

inline const Json& require(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ParseError(where + "." + key, "missing field");
    return j.at(key);
}

inline std::string require_string(const Json& j, const char* key, const std::string& where) {
    const Json& v = require(j, key, where);
    if (!v.is_string()) throw ParseError(where + "." + key, "expected a string");
    return v.get<std::string>();
}

}  // namespace detail

Json element_to_json(const Element& e);
Element element_from_json(const Json& j, const std::string& where);

inline Json effect_to_json(const EffectDecl& effect) {
    struct {
        Json operator()(const SetState& e) const {
            return {{"set_state", {{"target", e.target}, {"key", e.key}, {"value", scalar_to_json(e.value)}}}};
        }
        Json operator()(const SetFlag& e) const {
            return {{"set_flag", {{"name", e.name}, {"value", scalar_to_json(e.value)}}}};
        }
        Json operator()(const WriteFile& e) const {
            Json body{{"path", e.path}};
            if (e.from_element.empty()) body["content"] = e.content;
            else body["from"] = {{"element", e.from_element}, {"key", e.from_key}};
            return {{"write_file", body}};
        }
        Json operator()(const DeleteFile& e) const { return {{"delete_file", {{"path", e.path}}}}; }
        Json operator()(const Spawn& e) const {
            Json els = Json::array();
            for (const auto& el : e.elements) els.push_back(element_to_json(el));
            return {{"spawn", {{"modal", e.modal}, {"elements", els}}}};
        }
        Json operator()(const Close& e) const { return {{"close", {{"target", e.target}}}}; }
        Json operator()(const Focus& e) const { return {{"focus", {{"target", e.target}}}}; }
    } visitor;
    return std::visit(visitor, effect);
}

inline EffectDecl effect_from_json(const Json& j, const std::string& where) {
    using namespace detail;
    if (!j.is_object() || j.size() != 1) throw ParseError(where, "effect must be a one-key object");
    const auto& [kind, body] = *j.items().begin();
    const std::string at = where + "." + kind;
    if (!body.is_object()) throw ParseError(at, "effect body must be an object");
    if (kind == "set_state")
        return SetState{require_string(body, "target", at), require_string(body, "key", at),
                        scalar_from_json(require(body, "value", at), at + ".value")};
    if (kind == "set_flag")
        return SetFlag{require_string(body, "name", at), scalar_from_json(require(body, "value", at), at + ".value")};
    if (kind == "write_file") {
        WriteFile w;
        std::string path = require_string(body, "path", at);
        try {
            w.path = normalize_path(path);
        } catch (const ParseError& e) {
            throw ParseError(at + ".path", e.what());
        }
        if (body.contains("from")) {
            w.from_element = require_string(body["from"], "element", at + ".from");
            w.from_key = require_string(body["from"], "key", at + ".from");
        } else {
            w.content = require_string(body, "content", at);
        }
        return w;
    }
    if (kind == "delete_file") {
        std::string path = require_string(body, "path", at);
        try {
            return DeleteFile{normalize_path(path)};
        } catch (const ParseError& e) {
            throw ParseError(at + ".path", e.what());
        }
    }
    if (kind == "spawn") {
        Spawn s;
        s.modal = body.value("modal", false);
        const Json& els = require(body, "elements", at);
        if (!els.is_array() || els.empty()) throw ParseError(at + ".elements", "expected a nonempty array");
        for (std::size_t i = 0; i < els.size(); ++i)
            s.elements.push_back(element_from_json(els[i], at + ".elements[" + std::to_string(i) + "]"));
        if (s.modal && s.elements.front().role != Role::dialog)
            throw ParseError(at + ".elements[0]", "modal spawn must start with a dialog");
        return s;
    }
    if (kind == "close") return Close{require_string(body, "target", at)};
    if (kind == "focus") return Focus{require_string(body, "target", at)};
    throw ParseError(where, "unknown effect kind '" + kind + "'");
}

inline Json element_to_json(const Element& e) {
    Json j{{"id", e.id},
           {"bbox", bbox_to_json(e.bbox)},
           {"role", to_string(e.role)},
           {"label", e.label},
           {"state", detail::state_to_json(e.state)},
           {"z", e.z},
           {"interactable", e.interactable}};
    j["parent"] = e.parent ? Json(*e.parent) : Json(nullptr);
    Json effects = Json::array();
    for (const auto& fx : e.effects) effects.push_back(effect_to_json(fx));
    j["effects"] = effects;
    Json items = Json::array();
    for (const auto& it : e.items) items.push_back(element_to_json(it));
    j["items"] = items;
    Json ctx = Json::array();
    for (const auto& it : e.context_menu) ctx.push_back(element_to_json(it));
    j["context_menu"] = ctx;
    return j;
}

inline Element element_from_json(const Json& j, const std::string& where) {
    using namespace detail;
    if (!j.is_object()) throw ParseError(where, "element must be an object");
    Element e;
    e.id = require_string(j, "id", where);
    if (e.id.empty()) throw ParseError(where + ".id", "empty id");
    const Json& bb = require(j, "bbox", where);
    if (!bb.is_array() || bb.size() != 4 || !std::all_of(bb.begin(), bb.end(), [](const Json& v) {
            return v.is_number_integer();
        }))
        throw ParseError(where + ".bbox", "expected [x, y, w, h] integers");
    e.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
    if (e.bbox.x < 0 || e.bbox.y < 0 || e.bbox.w < 1 || e.bbox.h < 1)
        throw ParseError(where + ".bbox", "coordinates must be >= 0 and extents >= 1");
    std::string role = require_string(j, "role", where);
    auto r = parse_role(role);
    if (!r) throw ParseError(where + ".role", "unknown role '" + role + "'");
    e.role = *r;
    if (j.contains("label") && !j["label"].is_string()) throw ParseError(where + ".label", "expected a string");
    e.label = j.value("label", std::string{});
    e.state = state_from_json(j.value("state", Json(nullptr)), where + ".state");
    if (j.contains("z") && !j["z"].is_number_integer()) throw ParseError(where + ".z", "expected an integer");
    e.z = j.value("z", 0);
    if (j.contains("parent") && !j["parent"].is_null()) {
        if (!j["parent"].is_string()) throw ParseError(where + ".parent", "expected a string or null");
        e.parent = j["parent"].get<std::string>();
    }
    if (j.contains("interactable") && !j["interactable"].is_boolean())
        throw ParseError(where + ".interactable", "expected a boolean");
    e.interactable = j.value("interactable", false);
    auto list = [&](const char* key) -> Json {
        Json v = j.value(key, Json::array());
        if (!v.is_array()) throw ParseError(where + "." + key, "expected an array");
        return v;
    };
    Json fx = list("effects");
    for (std::size_t i = 0; i < fx.size(); ++i)
        e.effects.push_back(effect_from_json(fx[i], where + ".effects[" + std::to_string(i) + "]"));
    Json items = list("items");
    for (std::size_t i = 0; i < items.size(); ++i) {
        std::string at = where + ".items[" + std::to_string(i) + "]";
        Element item = element_from_json(items[i], at);
        if (item.role != Role::menu_item) throw ParseError(at + ".role", "menu items must have role menu_item");
        item.parent = e.id;
        e.items.push_back(std::move(item));
    }
    Json ctx = list("context_menu");
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        std::string at = where + ".context_menu[" + std::to_string(i) + "]";
        Element item = element_from_json(ctx[i], at);
        if (item.role != Role::menu_item) throw ParseError(at + ".role", "context menu entries must be menu_item");
        item.parent = e.id;
        e.context_menu.push_back(std::move(item));
    }
    if (!e.items.empty() && e.role != Role::menu) throw ParseError(where + ".items", "only menus declare items");
    return e;
}

// Canonical document form; keys sorted, optional fields always present.
inline Json save_scene(const Scene& scene) {
    Json j;
    j["viewport"] = {scene.width, scene.height};
    Json els = Json::array();
    for (const auto& e : scene.elements) els.push_back(element_to_json(e));
    j["elements"] = els;
    j["modal_stack"] = scene.modal_stack;
    j["focus"] = scene.focus ? Json(*scene.focus) : Json(nullptr);
    Json fs = Json::object();
    for (const auto& [path, bytes] : scene.fs.entries()) fs[path] = bytes;
    j["fs"] = fs;
    j["flags"] = detail::state_to_json(scene.flags);
    Json hk = Json::object();
    for (const auto& [chord, effects] : scene.hotkeys) {
        Json arr = Json::array();
        for (const auto& fx : effects) arr.push_back(effect_to_json(fx));
        hk[chord] = arr;
    }
    j["hotkeys"] = hk;
    return j;
}

namespace detail {

inline void collect_declared_ids(const Element& e, const std::string& where,
                                 std::map<std::string, std::string>& seen, const Scene& scene);

inline void collect_effect_ids(const std::vector<EffectDecl>& effects, const std::string& where,
                               std::map<std::string, std::string>& seen, const Scene& scene) {
    for (std::size_t i = 0; i < effects.size(); ++i)
        if (auto* s = std::get_if<Spawn>(&effects[i]))
            for (std::size_t k = 0; k < s->elements.size(); ++k)
                collect_declared_ids(s->elements[k],
                                     where + ".effects[" + std::to_string(i) + "].spawn.elements[" +
                                         std::to_string(k) + "]",
                                     seen, scene);
}

inline void collect_declared_ids(const Element& e, const std::string& where,
                                 std::map<std::string, std::string>& seen, const Scene& scene) {
    if (!seen.emplace(e.id, where).second)
        throw ParseError(where + ".id", "duplicate element id '" + e.id + "' (first at " + seen[e.id] + ")");
    BBox view{0, 0, scene.width, scene.height};
    if (!view.contains(e.bbox)) throw ParseError(where + ".bbox", "bbox lies outside the viewport");
    for (std::size_t i = 0; i < e.items.size(); ++i)
        collect_declared_ids(e.items[i], where + ".items[" + std::to_string(i) + "]", seen, scene);
    for (std::size_t i = 0; i < e.context_menu.size(); ++i)
        collect_declared_ids(e.context_menu[i], where + ".context_menu[" + std::to_string(i) + "]", seen, scene);
    collect_effect_ids(e.effects, where, seen, scene);
}

}  // namespace detail

// Checks every Scene/Element invariant; throws ParseError naming the path.
inline void validate_scene(const Scene& scene) {
    if (scene.width < 1 || scene.height < 1) throw ParseError("viewport", "viewport must be positive");
    std::map<std::string, std::string> declared;
    for (std::size_t i = 0; i < scene.elements.size(); ++i)
        detail::collect_declared_ids(scene.elements[i], "elements[" + std::to_string(i) + "]", declared, scene);
    for (const auto& [chord, effects] : scene.hotkeys)
        detail::collect_effect_ids(effects, "hotkeys." + chord, declared, scene);

    for (std::size_t i = 0; i < scene.elements.size(); ++i) {
        const Element& e = scene.elements[i];
        const std::string at = "elements[" + std::to_string(i) + "]";
        if (!e.parent) continue;
        if (!scene.find(*e.parent)) throw ParseError(at + ".parent", "dangling parent '" + *e.parent + "'");
        std::optional<std::string> cur = e.parent;
        for (std::size_t steps = 0; cur; ++steps) {
            if (*cur == e.id || steps > scene.elements.size())
                throw ParseError(at + ".parent", "parent chain of '" + e.id + "' is cyclic");
            cur = scene.find(*cur)->parent;
        }
    }
    for (std::size_t i = 0; i < scene.modal_stack.size(); ++i) {
        const Element* m = scene.find(scene.modal_stack[i]);
        const std::string at = "modal_stack[" + std::to_string(i) + "]";
        if (!m) throw ParseError(at, "unknown element '" + scene.modal_stack[i] + "'");
        if (m->role != Role::dialog) throw ParseError(at, "modal '" + m->id + "' is not a dialog");
    }
    if (scene.focus) {
        const Element* f = scene.find(*scene.focus);
        if (!f || !f->interactable) throw ParseError("focus", "focus must name an interactable element");
    }
}

inline Scene load_scene(const Json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw ParseError("", "scene document must be an object");
    Scene scene;
    if (doc.contains("viewport")) {
        const Json& vp = doc["viewport"];
        if (!vp.is_array() || vp.size() != 2 || !vp[0].is_number_integer() || !vp[1].is_number_integer())
            throw ParseError("viewport", "expected [width, height] integers");
        scene.width = vp[0].get<int>();
        scene.height = vp[1].get<int>();
    }
    Json els = doc.value("elements", Json::array());
    if (!els.is_array()) throw ParseError("elements", "expected an array");
    for (std::size_t i = 0; i < els.size(); ++i)
        scene.elements.push_back(element_from_json(els[i], "elements[" + std::to_string(i) + "]"));
    Json modals = doc.value("modal_stack", Json::array());
    if (!modals.is_array()) throw ParseError("modal_stack", "expected an array");
    for (std::size_t i = 0; i < modals.size(); ++i) {
        if (!modals[i].is_string()) throw ParseError("modal_stack[" + std::to_string(i) + "]", "expected an id");
        scene.modal_stack.push_back(modals[i].get<std::string>());
    }
    if (doc.contains("focus") && !doc["focus"].is_null()) {
        if (!doc["focus"].is_string()) throw ParseError("focus", "expected an id or null");
        scene.focus = doc["focus"].get<std::string>();
    }
    Json fs = doc.value("fs", Json::object());
    if (!fs.is_object()) throw ParseError("fs", "expected an object");
    for (const auto& [path, bytes] : fs.items()) {
        const std::string at = "fs." + path;
        if (!bytes.is_string()) throw ParseError(at, "file content must be a string");
        std::string norm;
        try {
            norm = normalize_path(path);
        } catch (const ParseError& e) {
            throw ParseError(at, e.what());
        }
        if (scene.fs.read(norm)) throw ParseError(at, "duplicate path after normalization");
        scene.fs.write(norm, bytes.get<std::string>());
    }
    scene.flags = state_from_json(doc.value("flags", Json(nullptr)), "flags");
    Json hk = doc.value("hotkeys", Json::object());
    if (!hk.is_object()) throw ParseError("hotkeys", "expected an object");
    for (const auto& [chord, effects] : hk.items()) {
        const std::string at = "hotkeys." + chord;
        if (!effects.is_array()) throw ParseError(at, "expected an array of effects");
        std::vector<EffectDecl> list;
        for (std::size_t i = 0; i < effects.size(); ++i)
            list.push_back(effect_from_json(effects[i], at + "[" + std::to_string(i) + "]"));
        scene.hotkeys[chord] = std::move(list);
    }
    validate_scene(scene);
    return scene;
}

inline Scene load_scene_text(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError("", std::string("malformed JSON: ") + e.what());
    }
    return load_scene(doc);
}

inline std::string scene_digest(const Scene& scene) { return sha256_hex(save_scene(scene).dump()); }

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

struct Frame {
    int step = 0;
    std::string scene_digest;
    std::shared_ptr<const Scene> snapshot;
};

inline Frame render_frame(const Scene& scene, int step) {
    if (step < 0) throw ContractError("frame step must be >= 0");
    return Frame{step, scene_digest(scene), std::make_shared<const Scene>(scene)};
}

}  // namespace mga::env
