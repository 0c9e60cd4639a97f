#pragma once

// Externalized abstract memory. Each update folds the latest step analysis
// into a bounded MemoryUnit across five dimensions: interface state
// evolution, operation effects, behavioral patterns, issues, and state
// consistency. Raw frames and observations are never stored.

#include "mga/backend.hpp"
#include "mga/transition.hpp"

namespace mga::memory {

inline constexpr std::size_t kWindow = 10;        // fingerprint ring and evolution window
inline constexpr int kLoopThreshold = 3;          // repetitions within the window that make a loop
inline constexpr std::size_t kMaxEffectEntries = 64;

struct EvolutionEntry {
    int step = 0;
    std::string delta;
    std::vector<env::EffectRecord> changes;
    friend bool operator==(const EvolutionEntry&, const EvolutionEntry&) = default;
};

// Latest known effect of one distinct action.
struct EffectEntry {
    int step = 0;
    std::string action_digest;
    std::string intended;
    std::string observed;
    std::vector<std::string> side_effects;
    bool effective() const { return intended == observed && observed != "none" && observed.find(':') == std::string::npos; }
    friend bool operator==(const EffectEntry&, const EffectEntry&) = default;
};

enum class PatternKind { loop, oscillation, progress };
enum class IssueClass { redundant, erroneous, inconsistent, inefficiency };

inline std::string_view to_string(PatternKind k) {
    switch (k) {
        case PatternKind::loop: return "loop";
        case PatternKind::oscillation: return "oscillation";
        case PatternKind::progress: return "progress";
    }
    return "?";
}
inline std::string_view to_string(IssueClass c) {
    switch (c) {
        case IssueClass::redundant: return "redundant";
        case IssueClass::erroneous: return "erroneous";
        case IssueClass::inconsistent: return "inconsistent";
        case IssueClass::inefficiency: return "inefficiency";
    }
    return "?";
}

struct PatternEntry {
    PatternKind kind = PatternKind::loop;
    std::string action_digest;
    int count = 0;
    friend bool operator==(const PatternEntry&, const PatternEntry&) = default;
};

struct IssueEntry {
    IssueClass cls = IssueClass::erroneous;
    std::string action_digest;
    std::string note;
    friend bool operator==(const IssueEntry&, const IssueEntry&) = default;
};

struct ConsistencyVerdict {
    bool ok = true;
    std::string explanation;
    friend bool operator==(const ConsistencyVerdict&, const ConsistencyVerdict&) = default;
};

struct Fingerprint {
    std::string action_digest;
    std::string post_digest;
    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

struct MemoryUnit {
    int step = 0;  // number of step analyses absorbed
    std::vector<EvolutionEntry> evolution;
    std::vector<EffectEntry> effects;
    std::vector<PatternEntry> patterns;
    std::vector<IssueEntry> issues;
    ConsistencyVerdict consistency;
    std::vector<Fingerprint> fingerprints;  // last kWindow (action, post-scene) pairs

    // True while a loop is in the window or once a repeat was ever recorded.
    bool loop_flagged(std::string_view action_digest) const {
        return std::any_of(patterns.begin(), patterns.end(), [&](const PatternEntry& p) {
                   return p.kind == PatternKind::loop && p.action_digest == action_digest;
               }) ||
               std::any_of(issues.begin(), issues.end(), [&](const IssueEntry& i) {
                   return i.cls == IssueClass::redundant && i.action_digest == action_digest;
               });
    }
    const EffectEntry* effect_of(std::string_view action_digest) const {
        for (const auto& e : effects)
            if (e.action_digest == action_digest) return &e;
        return nullptr;
    }
    friend bool operator==(const MemoryUnit&, const MemoryUnit&) = default;
};

inline MemoryUnit empty_memory() { return {}; }

class MemoryError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Step analysis
// ---------------------------------------------------------------------------

struct StepAnalysis {
    int step = 0;
    std::string thought;
    std::optional<ActionSpec> action;          // absent when the decision failed to parse
    std::string action_digest;
    std::optional<std::string> binding;        // grounded action, when grounding succeeded
    std::optional<std::string> target_id;      // element grounding chose
    std::string pre_digest;
    std::string post_digest;
    std::string intended;                      // rule token from the transition table
    std::string observed;                      // fired rule, outcome token, or not_executed:<why>
    std::string outcome;                       // ok | intercepted | no_target | no_effect | not_executed
    std::vector<env::EffectRecord> effects;
};

inline std::string observed_token(const env::TransitionResult& r) {
    switch (r.outcome) {
        case env::Outcome::ok: return std::string(to_string(r.rule));
        case env::Outcome::no_effect: return "none";
        default: return std::string(to_string(r.outcome));
    }
}

// Analysis of an executed step. The intended outcome comes from the rule
// table applied to the pre-step scene and the element grounding chose.
inline StepAnalysis analyze_executed(int step, std::string thought, const ActionSpec& spec,
                                     const GroundedAction& grounded, const std::optional<std::string>& target_id,
                                     const env::Scene& pre, const env::TransitionResult& result) {
    StepAnalysis a;
    a.step = step;
    a.thought = std::move(thought);
    a.action = spec;
    a.action_digest = action_digest(spec);
    a.binding = grounded.binding();
    a.target_id = target_id;
    a.pre_digest = env::scene_digest(pre);
    a.post_digest = env::scene_digest(result.scene);
    a.intended = std::string(to_string(env::expected_rule(pre, grounded.op, target_id)));
    a.observed = observed_token(result);
    a.outcome = std::string(to_string(result.outcome));
    a.effects = result.effects;
    return a;
}

// Analysis of a step whose decision or grounding failed before execution.
inline StepAnalysis analyze_failed(int step, std::string thought, const std::optional<ActionSpec>& spec,
                                   const env::Scene& scene, const std::string& why) {
    StepAnalysis a;
    a.step = step;
    a.thought = std::move(thought);
    a.action = spec;
    a.action_digest = spec ? action_digest(*spec) : short_digest("unparsed");
    a.pre_digest = env::scene_digest(scene);
    a.post_digest = a.pre_digest;
    a.intended = spec ? "execute" : "decide";
    a.observed = "not_executed:" + why;
    a.outcome = "not_executed";
    return a;
}

// ---------------------------------------------------------------------------
// Update
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void keep_last(std::vector<T>& v, std::size_t n) {
    if (v.size() > n) v.erase(v.begin(), v.end() - static_cast<std::ptrdiff_t>(n));
}

inline void add_issue(MemoryUnit& u, IssueClass cls, const std::string& digest, const std::string& note) {
    IssueEntry issue{cls, digest, note};
    if (std::find(u.issues.begin(), u.issues.end(), issue) == u.issues.end()) u.issues.push_back(issue);
}

inline void upsert_pattern(MemoryUnit& u, PatternKind kind, const std::string& digest, int count) {
    for (auto& p : u.patterns)
        if (p.kind == kind && p.action_digest == digest) {
            p.count = count;
            return;
        }
    u.patterns.push_back({kind, digest, count});
}

inline std::string describe(const StepAnalysis& a) {
    std::string what = a.action ? action_key(*a.action) : std::string("unparsed decision");
    if (a.outcome == "not_executed") return what + " -> not executed (" + a.observed.substr(13) + ")";
    if (a.outcome != "ok") return what + " -> " + a.outcome;
    std::string out = what + " -> " + a.observed + ":";
    std::size_t shown = 0;
    for (const auto& e : a.effects) {
        if (shown++ == 4) {
            out += " +" + std::to_string(a.effects.size() - 4) + " more";
            break;
        }
        out += " " + e.element_id + "." + e.key + "=" + (e.new_value ? scalar_to_text(*e.new_value) : "null");
    }
    return out;
}

}  // namespace detail

// Deterministic summarizer. analysis.step must equal prev.step (the number of
// steps absorbed so far); the result has step prev.step + 1.
inline MemoryUnit update_memory(const std::string& instruction, const MemoryUnit& prev, const StepAnalysis& analysis) {
    (void)instruction;  // the deterministic summarizer is instruction-independent
    using namespace detail;
    if (analysis.step != prev.step)
        throw ContractError("memory update out of order: unit has absorbed " + std::to_string(prev.step) +
                            " steps, analysis is for step " + std::to_string(analysis.step));
    MemoryUnit u = prev;
    u.step = prev.step + 1;
    const std::string& digest = analysis.action_digest;

    // (a) interface state evolution
    u.evolution.push_back({analysis.step, describe(analysis), analysis.effects});
    keep_last(u.evolution, kWindow);

    // (b) operation effects: one entry per distinct action, most recent last
    EffectEntry effect{analysis.step, digest, analysis.intended, analysis.observed, {}};
    for (const auto& e : analysis.effects)
        if (!analysis.target_id || e.element_id != *analysis.target_id)
            effect.side_effects.push_back(e.element_id + "." + e.key);
    std::erase_if(u.effects, [&](const EffectEntry& e) { return e.action_digest == digest; });
    u.effects.push_back(std::move(effect));
    if (u.effects.size() > kMaxEffectEntries) u.effects.erase(u.effects.begin());

    // (c) behavioral patterns over the fingerprint ring
    Fingerprint fp{digest, analysis.post_digest};
    u.fingerprints.push_back(fp);
    keep_last(u.fingerprints, kWindow);
    // Loop patterns mirror the current window; the redundant issue stays.
    std::erase_if(u.patterns, [](const PatternEntry& p) { return p.kind == PatternKind::loop; });
    for (const auto& f : u.fingerprints) {
        const int c = static_cast<int>(std::count(u.fingerprints.begin(), u.fingerprints.end(), f));
        if (c < kLoopThreshold) continue;
        auto it = std::find_if(u.patterns.begin(), u.patterns.end(), [&](const PatternEntry& p) {
            return p.kind == PatternKind::loop && p.action_digest == f.action_digest;
        });
        if (it == u.patterns.end()) u.patterns.push_back({PatternKind::loop, f.action_digest, c});
        else it->count = std::max(it->count, c);
    }
    if (std::count(u.fingerprints.begin(), u.fingerprints.end(), fp) >= kLoopThreshold)
        add_issue(u, IssueClass::redundant, digest, "repeat");
    const auto n = u.fingerprints.size();
    if (n >= 3 && u.fingerprints[n - 3].post_digest == analysis.post_digest &&
        analysis.pre_digest != analysis.post_digest) {
        int count = 1;
        for (const auto& p : u.patterns)
            if (p.kind == PatternKind::oscillation && p.action_digest == digest) count = p.count + 1;
        upsert_pattern(u, PatternKind::oscillation, digest, count);
        add_issue(u, IssueClass::inefficiency, digest, "oscillation");
    }
    if (analysis.outcome == "ok" && analysis.intended == analysis.observed) {
        int advancing = 0;  // same action, distinct resulting states
        std::set<std::string> seen;
        for (const auto& f : u.fingerprints)
            if (f.action_digest == digest && seen.insert(f.post_digest).second) ++advancing;
        if (advancing >= kLoopThreshold) upsert_pattern(u, PatternKind::progress, digest, advancing);
    }

    // (d) issues and (e) consistency
    if (analysis.outcome == "intercepted" || analysis.outcome == "no_target" || analysis.outcome == "not_executed")
        add_issue(u, IssueClass::erroneous, digest, analysis.outcome == "not_executed" ? analysis.observed : analysis.outcome);
    if (analysis.intended == analysis.observed) {
        u.consistency = {true, ""};
    } else {
        u.consistency = {false, "expected " + analysis.intended + ", observed " + analysis.observed};
        add_issue(u, IssueClass::inconsistent, digest, "expected_" + analysis.intended);
    }
    return u;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline Json to_json(const MemoryUnit& u) {
    Json evolution = Json::array();
    for (const auto& e : u.evolution) {
        Json changes = Json::array();
        for (const auto& c : e.changes) changes.push_back(env::to_json(c));
        evolution.push_back({{"step", e.step}, {"delta", e.delta}, {"changes", changes}});
    }
    Json effects = Json::array();
    for (const auto& e : u.effects)
        effects.push_back({{"step", e.step},
                           {"action", e.action_digest},
                           {"intended", e.intended},
                           {"observed", e.observed},
                           {"side_effects", e.side_effects}});
    Json patterns = Json::array();
    for (const auto& p : u.patterns)
        patterns.push_back({{"pattern", to_string(p.kind)}, {"action", p.action_digest}, {"count", p.count}});
    Json issues = Json::array();
    for (const auto& i : u.issues)
        issues.push_back({{"class", to_string(i.cls)}, {"action", i.action_digest}, {"note", i.note}});
    Json fingerprints = Json::array();
    for (const auto& f : u.fingerprints) fingerprints.push_back({f.action_digest, f.post_digest});
    return {{"step", u.step},
            {"evolution", evolution},
            {"effects", effects},
            {"patterns", patterns},
            {"issues", issues},
            {"consistency", {{"verdict", u.consistency.ok ? "ok" : "violated"}, {"explanation", u.consistency.explanation}}},
            {"fingerprints", fingerprints}};
}

inline MemoryUnit memory_from_json(const Json& j) {
    auto scalar_or_null = [](const Json& v) -> std::optional<Scalar> {
        if (v.is_null()) return std::nullopt;
        return scalar_from_json(v, "memory");
    };
    try {
        MemoryUnit u;
        u.step = j.at("step").get<int>();
        for (const auto& e : j.at("evolution")) {
            EvolutionEntry entry{e.at("step").get<int>(), e.at("delta").get<std::string>(), {}};
            for (const auto& c : e.at("changes"))
                entry.changes.push_back({c.at("element").get<std::string>(), c.at("key").get<std::string>(),
                                         scalar_or_null(c.at("old")), scalar_or_null(c.at("new"))});
            u.evolution.push_back(std::move(entry));
        }
        for (const auto& e : j.at("effects"))
            u.effects.push_back({e.at("step").get<int>(), e.at("action").get<std::string>(),
                                 e.at("intended").get<std::string>(), e.at("observed").get<std::string>(),
                                 e.at("side_effects").get<std::vector<std::string>>()});
        for (const auto& p : j.at("patterns")) {
            const std::string kind = p.at("pattern").get<std::string>();
            PatternKind k = kind == "loop"          ? PatternKind::loop
                            : kind == "oscillation" ? PatternKind::oscillation
                            : kind == "progress"    ? PatternKind::progress
                                                    : throw ParseError("patterns", "unknown pattern '" + kind + "'");
            u.patterns.push_back({k, p.at("action").get<std::string>(), p.at("count").get<int>()});
        }
        for (const auto& i : j.at("issues")) {
            const std::string cls = i.at("class").get<std::string>();
            IssueClass c = cls == "redundant"      ? IssueClass::redundant
                           : cls == "erroneous"    ? IssueClass::erroneous
                           : cls == "inconsistent" ? IssueClass::inconsistent
                           : cls == "inefficiency" ? IssueClass::inefficiency
                                                   : throw ParseError("issues", "unknown issue class '" + cls + "'");
            u.issues.push_back({c, i.at("action").get<std::string>(), i.at("note").get<std::string>()});
        }
        const Json& c = j.at("consistency");
        const std::string verdict = c.at("verdict").get<std::string>();
        if (verdict != "ok" && verdict != "violated") throw ParseError("consistency", "verdict must be ok|violated");
        u.consistency = {verdict == "ok", c.value("explanation", std::string{})};
        for (const auto& f : j.at("fingerprints"))
            u.fingerprints.push_back({f.at(0).get<std::string>(), f.at(1).get<std::string>()});
        if (u.fingerprints.size() > kWindow) throw ParseError("fingerprints", "ring exceeds the window");
        return u;
    } catch (const Json::exception& e) {
        throw ParseError("memory", e.what());
    }
}

inline Json to_json(const StepAnalysis& a) {
    Json effects = Json::array();
    for (const auto& e : a.effects) effects.push_back(env::to_json(e));
    return {{"step", a.step},
            {"thought", a.thought},
            {"action", a.action ? to_json(*a.action) : Json(nullptr)},
            {"action_digest", a.action_digest},
            {"binding", a.binding ? Json(*a.binding) : Json(nullptr)},
            {"target", a.target_id ? Json(*a.target_id) : Json(nullptr)},
            {"pre_digest", a.pre_digest},
            {"post_digest", a.post_digest},
            {"intended", a.intended},
            {"observed", a.observed},
            {"outcome", a.outcome},
            {"effects", effects}};
}

// ---------------------------------------------------------------------------
// Planner digest
// ---------------------------------------------------------------------------

inline constexpr std::string_view kEmptyMemoryText = "memory: empty";
inline constexpr std::size_t kDigestMaxLength = 2000;

// Lists, in order: evolution deltas (newest first), open issues, active loop
// patterns, consistency verdict. Oldest evolution entries are dropped first
// when the text exceeds max_length.
inline std::string summarize_for_planner(const MemoryUnit& unit, std::size_t max_length = kDigestMaxLength) {
    if (unit == empty_memory()) return std::string(kEmptyMemoryText);
    auto render = [&](std::size_t evolution_kept, std::size_t issues_kept) {
        std::string out = "memory after " + std::to_string(unit.step) + " step(s)\n";
        for (std::size_t i = 0; i < evolution_kept; ++i) {
            const auto& e = unit.evolution[unit.evolution.size() - 1 - i];
            out += (i == 0 ? "latest: " : "earlier: ") + e.delta + "\n";
        }
        out += "issues:";
        if (issues_kept == 0) out += " none";
        for (std::size_t i = unit.issues.size() - issues_kept; i < unit.issues.size(); ++i) {
            const auto& is = unit.issues[i];
            out += " " + std::string(to_string(is.cls)) + "[" + is.action_digest + "]:" + is.note;
        }
        out += "\npatterns:";
        bool any = false;
        for (const auto& p : unit.patterns) {
            if (p.kind != PatternKind::loop) continue;
            out += " loop[" + p.action_digest + "]x" + std::to_string(p.count);
            any = true;
        }
        if (!any) out += " none";
        out += "\nconsistency: " + (unit.consistency.ok ? std::string("ok") : "violated (" + unit.consistency.explanation + ")");
        return out;
    };
    std::size_t evolution_kept = unit.evolution.size();
    std::size_t issues_kept = unit.issues.size();
    std::string text = render(evolution_kept, issues_kept);
    while (text.size() > max_length && evolution_kept > 0) text = render(--evolution_kept, issues_kept);
    while (text.size() > max_length && issues_kept > 0) text = render(evolution_kept, --issues_kept);
    if (text.size() > max_length) text.resize(max_length);
    return text;
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

class MemoryBackend {
public:
    virtual ~MemoryBackend() = default;
    virtual MemoryUnit update(const std::string& instruction, const MemoryUnit& prev, const StepAnalysis& analysis) = 0;
};

class DeterministicMemory final : public MemoryBackend {
public:
    MemoryUnit update(const std::string& instruction, const MemoryUnit& prev, const StepAnalysis& analysis) override {
        return update_memory(instruction, prev, analysis);
    }
};

// Model-backed summarizer; the reply must be a MemoryUnit document that
// advances the step counter by one.
class RemoteMemory final : public MemoryBackend {
public:
    explicit RemoteMemory(backend::ModelBackend& model) : model_(model) {}

    MemoryUnit update(const std::string& instruction, const MemoryUnit& prev, const StepAnalysis& analysis) override {
        auto bundle = backend::PromptBundle::make(backend::RoleTag::memory, {{"instruction", instruction},
                                                                             {"memory", to_json(prev).dump()},
                                                                             {"analysis", to_json(analysis).dump()}});
        try {
            MemoryUnit next = memory_from_json(Json::parse(model_.complete(bundle).text));
            if (next.step != prev.step + 1) throw MemoryError("remote memory did not advance the step counter");
            return next;
        } catch (const MemoryError&) {
            throw;
        } catch (const Error& e) {
            throw MemoryError(std::string("remote memory: ") + e.what());
        } catch (const Json::exception& e) {
            throw MemoryError(std::string("remote memory reply: ") + e.what());
        }
    }

private:
    backend::ModelBackend& model_;
};

}  // namespace mga::memory
