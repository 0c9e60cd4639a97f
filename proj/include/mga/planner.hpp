#pragma once

// Step-wise planner. Each call sees only the current frame, its
// observation and the previous memory unit; there is no channel for older
// frames or decisions.

#include "mga/evaluator.hpp"
#include "mga/grounding.hpp"
#include "mga/memory.hpp"

namespace mga::plan {

struct Terminate {
    bool success_claimed = false;
    friend bool operator==(const Terminate&, const Terminate&) = default;
};

struct Decision {
    std::string thought;
    std::variant<ActionSpec, Terminate> body;

    bool terminates() const { return std::holds_alternative<Terminate>(body); }
    const ActionSpec& action() const { return std::get<ActionSpec>(body); }
    friend bool operator==(const Decision&, const Decision&) = default;
};

inline Json to_json(const Decision& d) {
    Json j{{"thought", d.thought}};
    if (auto* t = std::get_if<Terminate>(&d.body))
        j["terminate"] = {{"success_claimed", t->success_claimed}};
    else
        j["action"] = to_json(std::get<ActionSpec>(d.body));
    return j;
}

inline Decision decision_from_json(const Json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where, "decision must be an object");
    if (j.contains("action") == j.contains("terminate"))
        throw ParseError(where, "exactly one of action/terminate is required");
    Decision d;
    d.thought = j.value("thought", std::string{});
    if (j.contains("terminate")) {
        const Json& t = j["terminate"];
        if (t.is_boolean())
            d.body = Terminate{t.get<bool>()};
        else if (t.is_object() && t.contains("success_claimed") && t["success_claimed"].is_boolean())
            d.body = Terminate{t["success_claimed"].get<bool>()};
        else
            throw ParseError(where + ".terminate", "expected a boolean success claim");
    } else {
        d.body = action_spec_from_json(j["action"], where + ".action");
    }
    return d;
}

inline Decision validate_decision(Decision d) {
    if (d.thought.empty()) throw ValidationError("decision needs a thought");
    if (auto* a = std::get_if<ActionSpec>(&d.body)) ground::validate_action(*a);
    return d;
}

// ---------------------------------------------------------------------------
// PlannerInput
// ---------------------------------------------------------------------------

class PlannerInput {
public:
    static PlannerInput make(std::string instruction, const env::Frame& frame, obs::Observation observation,
                             memory::MemoryUnit memory) {
        if (!frame.snapshot) throw ContractError("planner input needs a rendered frame");
        return PlannerInput(std::move(instruction), frame, std::move(observation), std::move(memory));
    }

    const std::string& instruction() const { return instruction_; }
    const env::Frame& frame() const { return frame_; }
    const std::string& frame_digest() const { return frame_.scene_digest; }
    const obs::Observation& observation() const { return observation_; }
    const memory::MemoryUnit& memory() const { return memory_; }
    const std::string& memory_digest() const { return memory_digest_; }

private:
    PlannerInput(std::string instruction, env::Frame frame, obs::Observation observation, memory::MemoryUnit memory)
        : instruction_(std::move(instruction)),
          frame_(std::move(frame)),
          observation_(std::move(observation)),
          memory_(std::move(memory)),
          memory_digest_(memory::summarize_for_planner(memory_)) {}

    std::string instruction_;
    env::Frame frame_;
    obs::Observation observation_;
    memory::MemoryUnit memory_;
    std::string memory_digest_;
};

class PlannerError : public Error {
public:
    enum class Kind { exhausted, guard_mismatch, decision_parse, backend };
    PlannerError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class PlannerBackend {
public:
    virtual ~PlannerBackend() = default;
    virtual Decision plan(const PlannerInput& input) = 0;
};

inline Decision plan(const PlannerInput& input, PlannerBackend& backend) { return validate_decision(backend.plan(input)); }

// ---------------------------------------------------------------------------
// Scripted
// ---------------------------------------------------------------------------

struct ScriptRecord {
    eval::ExprPtr guard;  // null: always matches
    Decision decision;
};

// Plan file: a JSON array of {"guard": expr|null, "thought": text,
// "action": ActionSpec | "terminate": bool}.
inline std::vector<ScriptRecord> load_script(const Json& doc) {
    if (!doc.is_array()) throw ParseError("script", "expected an array of records");
    std::vector<ScriptRecord> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string at = "script[" + std::to_string(i) + "]";
        ScriptRecord r;
        const Json& g = doc[i].value("guard", Json(nullptr));
        if (!g.is_null()) {
            if (!g.is_string()) throw ParseError(at + ".guard", "guard must be an expression string");
            r.guard = eval::parse_expr(g.get<std::string>());
        }
        r.decision = decision_from_json(doc[i], at);
        if (r.decision.thought.empty()) r.decision.thought = "scripted step " + std::to_string(i);
        r.decision = validate_decision(std::move(r.decision));
        out.push_back(std::move(r));
    }
    return out;
}

class ScriptedPlanner final : public PlannerBackend {
public:
    explicit ScriptedPlanner(std::vector<ScriptRecord> records) : records_(records.begin(), records.end()) {}

    // The head record is consumed only when its guard holds.
    Decision plan(const PlannerInput& input) override {
        std::lock_guard lock(mutex_);
        if (records_.empty()) throw PlannerError(PlannerError::Kind::exhausted, "scripted plan exhausted");
        const ScriptRecord& head = records_.front();
        if (head.guard) {
            eval::EvalContext ctx{*input.frame().snapshot, &input.observation()};
            if (!eval::evaluate(*head.guard, ctx).passed)
                throw PlannerError(PlannerError::Kind::guard_mismatch,
                                   "guard does not hold: " + eval::to_string(*head.guard));
        }
        Decision d = head.decision;
        records_.pop_front();
        return d;
    }

    std::size_t remaining() const {
        std::lock_guard lock(mutex_);
        return records_.size();
    }

private:
    mutable std::mutex mutex_;
    std::deque<ScriptRecord> records_;
};

// ---------------------------------------------------------------------------
// Heuristic
// ---------------------------------------------------------------------------

namespace detail {

inline const std::set<std::string>& stopwords() {
    static const std::set<std::string> kWords{"a",    "an",   "and",  "as",   "at",    "be",   "by",   "for",
                                              "from", "in",   "into", "is",   "it",    "its",  "my",   "of",
                                              "on",   "or",   "the",  "then", "this",  "that", "to",   "with",
                                              "all",  "each", "every", "please", "your", "so",  "using", "via"};
    return kWords;
}

inline const std::set<std::string>& dismiss_words() {
    static const std::set<std::string> kWords{"close", "done", "ok", "cancel", "x", "dismiss", "\xc3\x97"};
    return kWords;
}

inline std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : normalize_label(text)) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += c;
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Instruction keywords with quoted spans removed; the first quoted span is
// returned separately as text to type.
inline std::pair<std::set<std::string>, std::optional<std::string>> split_instruction(std::string_view instruction) {
    std::string bare;
    std::optional<std::string> quoted;
    bool inside = false;
    std::string current;
    for (char c : instruction) {
        if (c == '"') {
            if (inside && !quoted) quoted = current;
            inside = !inside;
            current.clear();
            bare += ' ';
            continue;
        }
        (inside ? current : bare) += c;
    }
    std::set<std::string> words;
    for (auto& t : tokens(bare))
        if (!stopwords().count(t)) words.insert(t);
    return {words, quoted};
}

struct Candidate {
    std::string id;
    std::string label;
    Role role = Role::label;
    BBox bbox;
    int stack = 0;
};

inline TargetQuery query_for(const Candidate& c, const std::vector<Candidate>& all) {
    const std::string want = normalize_label(c.label);
    if (want.empty()) return ById{c.id};
    auto same = std::count_if(all.begin(), all.end(), [&](const Candidate& o) { return normalize_label(o.label) == want; });
    return same == 1 ? TargetQuery{ByLabel{c.label}} : TargetQuery{ById{c.id}};
}

}  // namespace detail

// Deterministic stand-in for a model planner. Priority:
//   1. a modal is open: click a control of the topmost modal, preferring
//      dismiss labels (close/done/ok/cancel/x);
//   2. drop candidates whose action memory flags as a loop, or whose last
//      execution already had its intended effect;
//   3. best keyword overlap between instruction and label (ties: smaller id);
//   4. terminate(true) when the goal hint holds;
//   5. terminate(false).
// Without a structured observation it falls back to reading frame labels.
class HeuristicPlanner final : public PlannerBackend {
public:
    explicit HeuristicPlanner(eval::ExprPtr goal_hint = nullptr) : goal_hint_(std::move(goal_hint)) {}

    Decision plan(const PlannerInput& input) override {
        using namespace detail;
        const auto& o = input.observation();
        const auto& mem = input.memory();
        const bool structured = !obs::is_empty(o);

        std::vector<Candidate> all;
        if (structured) {
            for (const auto& a : o.inventory) {
                const auto* s = o.layout_of(a.id);
                auto role = o.semantic.find(a.id);
                all.push_back({a.id, a.label, role == o.semantic.end() ? Role::label : role->second,
                               s ? s->bbox : BBox{}, s ? s->stack : 0});
            }
        } else {
            for (const auto& e : input.frame().snapshot->elements)
                if (!normalize_label(e.label).empty()) all.push_back({e.id, e.label, e.role, e.bbox, 0});
        }
        auto click = [&](const Candidate& c) { return ActionSpec{"click", query_for(c, all), std::nullopt}; };

        // 1. topmost modal
        if (structured && !o.context.active_modals.empty()) {
            const std::string& modal = o.context.active_modals.back();
            if (const auto* m = o.layout_of(modal)) {
                std::vector<const Candidate*> inside, dismiss;
                for (const auto& c : all)
                    if (c.id == modal || (m->bbox.contains(c.bbox) && c.stack > m->stack)) inside.push_back(&c);
                std::sort(inside.begin(), inside.end(), [](auto* a, auto* b) { return a->id < b->id; });
                for (auto* c : inside)
                    if (dismiss_words().count(normalize_label(c->label))) dismiss.push_back(c);
                for (const auto* pool : {&dismiss, &inside})
                    for (auto* c : *pool)
                        if (!mem.loop_flagged(action_digest(click(*c))))
                            return {"Modal '" + modal + "' blocks the window; dismiss it via '" + c->label + "'.",
                                    click(*c)};
                if (!inside.empty())
                    return {"Modal '" + modal + "' is still open; retry '" + inside.front()->label + "'.",
                            click(*inside.front())};
                // No controls at all: the modal itself is the only target.
                return {"Modal '" + modal + "' has no controls; click it.",
                        ActionSpec{"click", ById{modal}, std::nullopt}};
            }
        }

        // 2 + 3. keyword overlap over the remaining candidates
        auto [words, quoted] = split_instruction(input.instruction());
        const Candidate* best = nullptr;
        int best_score = 0;
        ActionSpec best_action;
        for (const auto& c : all) {
            int score = 0;
            std::set<std::string> label_words;
            for (auto& t : tokens(c.label)) label_words.insert(t);
            for (const auto& w : words) score += label_words.count(w) ? 1 : 0;
            if (score == 0) continue;
            ActionSpec action = quoted && c.role == Role::text_field ? ActionSpec{"type", query_for(c, all), quoted}
                                                                     : click(c);
            const std::string digest = action_digest(action);
            if (mem.loop_flagged(digest)) continue;
            if (const auto* e = mem.effect_of(digest); e && e->effective()) continue;
            if (score > best_score || (score == best_score && c.id < best->id)) {
                best = &c;
                best_score = score;
                best_action = std::move(action);
            }
        }
        if (best) {
            std::string verb = best_action.verb == "type" ? "type into" : "click";
            return {"The instruction mentions '" + best->label + "'; " + verb + " it.", best_action};
        }

        // 4 + 5.
        if (goal_hint_) {
            eval::EvalContext ctx{*input.frame().snapshot, structured ? &o : nullptr};
            if (eval::evaluate(*goal_hint_, ctx).passed) return {"The goal condition holds; finish.", Terminate{true}};
        }
        return {"No remaining control matches the instruction; stop.", Terminate{false}};
    }

private:
    eval::ExprPtr goal_hint_;
};

// ---------------------------------------------------------------------------
// Remote
// ---------------------------------------------------------------------------

// Reply format:
//   Thought: <text>
//   Action: <verb> [label="..."|role=<role>|point=(x,y)|id="..."] [text="..."|keys="..."|delta=<n>]
//   Action: terminate success=true|false
inline Decision parse_reply(std::string_view reply) {
    auto fail = [](const std::string& why) { return PlannerError(PlannerError::Kind::decision_parse, why); };
    std::string thought;
    std::optional<std::string> action_line;
    std::istringstream in{std::string(reply)};
    std::string line;
    bool in_thought = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("Thought:", 0) == 0) {
            thought = line.substr(8);
            in_thought = true;
        } else if (line.rfind("Action:", 0) == 0) {
            if (action_line) throw fail("reply has more than one action line");
            action_line = line.substr(7);
            in_thought = false;
        } else if (in_thought) {
            thought += "\n" + line;
        }
    }
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\n");
        auto e = s.find_last_not_of(" \t\n");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    thought = trim(thought);
    if (thought.empty()) throw fail("reply has no thought");
    if (!action_line) throw fail("reply has no action line");

    std::string_view s = *action_line;
    std::size_t pos = 0;
    auto skip = [&] {
        while (pos < s.size() && s[pos] == ' ') ++pos;
    };
    auto word = [&] {
        skip();
        std::size_t start = pos;
        while (pos < s.size() && s[pos] != ' ' && s[pos] != '=') ++pos;
        return std::string(s.substr(start, pos - start));
    };

    const std::string verb = word();
    if (verb == "terminate") {
        skip();
        std::string rest = trim(std::string(s.substr(pos)));
        if (rest == "success=true") return {thought, Terminate{true}};
        if (rest == "success=false") return {thought, Terminate{false}};
        throw fail("terminate needs success=true|false");
    }
    ActionSpec action{verb, std::monostate{}, std::nullopt};
    while (true) {
        skip();
        if (pos >= s.size()) break;
        const std::string key = word();
        if (pos >= s.size() || s[pos] != '=') throw fail("expected '=' after '" + key + "'");
        ++pos;
        auto quoted_value = [&] {
            auto v = unquote_at(s, pos);
            if (!v) throw fail("bad quoted value for '" + key + "'");
            return *v;
        };
        auto bare_value = [&] {
            std::size_t start = pos;
            while (pos < s.size() && s[pos] != ' ') ++pos;
            return std::string(s.substr(start, pos - start));
        };
        auto set_target = [&](TargetQuery q) {
            if (has_target(action.target)) throw fail("more than one target");
            action.target = std::move(q);
        };
        auto set_argument = [&](std::string v) {
            if (action.argument) throw fail("more than one argument");
            action.argument = std::move(v);
        };
        if (key == "label") {
            set_target(ByLabel{quoted_value()});
        } else if (key == "id") {
            set_target(ById{quoted_value()});
        } else if (key == "role") {
            auto r = parse_role(bare_value());
            if (!r) throw fail("unknown role");
            set_target(ByRole{*r});
        } else if (key == "point") {
            static const std::regex kPoint(R"(^\((-?\d+),\s*(-?\d+)\))");
            std::match_results<std::string_view::const_iterator> m;
            if (!std::regex_search(s.begin() + static_cast<std::ptrdiff_t>(pos), s.end(), m, kPoint))
                throw fail("point must be (x,y)");
            set_target(ByPoint{{*parse_int(m[1].str()), *parse_int(m[2].str())}});
            pos += static_cast<std::size_t>(m.length(0));
        } else if (key == "text" || key == "keys") {
            set_argument(quoted_value());
        } else if (key == "delta") {
            set_argument(bare_value());
        } else {
            throw fail("unknown action field '" + key + "'");
        }
    }
    Decision d{thought, action};
    try {
        return validate_decision(std::move(d));
    } catch (const ValidationError& e) {
        throw fail(e.what());
    }
}

// Prompt assembly in fixed field order; the reply goes through parse_reply.
class RemotePlanner final : public PlannerBackend {
public:
    explicit RemotePlanner(backend::ModelBackend& model) : model_(model) {}

    static backend::PromptBundle bundle_for(const PlannerInput& input) {
        return backend::PromptBundle::make(backend::RoleTag::planner,
                                           {{"instruction", input.instruction()},
                                            {"observation", obs::to_json(input.observation()).dump()},
                                            {"memory_digest", input.memory_digest()}});
    }

    Decision plan(const PlannerInput& input) override {
        backend::BackendResponse reply;
        try {
            reply = model_.complete(bundle_for(input));
        } catch (const backend::BackendError& e) {
            throw PlannerError(PlannerError::Kind::backend, e.what());
        }
        return parse_reply(reply.text);
    }

private:
    backend::ModelBackend& model_;
};

}  // namespace mga::plan
