#pragma once

// Episode loop, suite runner, NDJSON traces, replay and reports.
//
// Per step t: render I_t, observe Z_t, build the planner input from
// (I_t, Z_t, S_{t-1}), plan, ground, apply, fold the step into S_t.

#include "mga/planner.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

namespace mga::harness {

namespace fs = std::filesystem;

inline constexpr std::string_view kTraceVersion = "mga-trace/1";
inline constexpr int kDefaultBudget = 50;
inline constexpr std::array<std::string_view, 5> kDomains = {"office", "daily", "professional", "os", "multi_app"};

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

struct TaskSpec {
    std::string id;
    std::string domain;
    std::string instruction;
    Json scene_doc;
    std::string eval;
    int budget = kDefaultBudget;
    std::optional<std::string> goal_hint;
    Json script;  // scripted-planner records, or null
};

inline TaskSpec load_task(const Json& j, const fs::path& base_dir = {}) {
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) throw ParseError(std::string("task.") + key, "missing string");
        return j[key].get<std::string>();
    };
    if (!j.is_object()) throw ParseError("task", "expected an object");
    TaskSpec t;
    t.id = str("id");
    static const std::regex kToken("^[A-Za-z0-9_.-]+$");
    if (!std::regex_match(t.id, kToken)) throw ParseError("task.id", "id must be a token");
    t.domain = str("domain");
    if (std::find(kDomains.begin(), kDomains.end(), t.domain) == kDomains.end())
        throw ParseError("task.domain", "unknown domain '" + t.domain + "'");
    t.instruction = str("instruction");
    t.eval = str("eval");
    if (j.contains("budget")) {
        if (!j["budget"].is_number_integer() || j["budget"].get<int>() < 1)
            throw ParseError("task.budget", "budget must be an integer >= 1");
        t.budget = j["budget"].get<int>();
    }
    if (j.contains("goal_hint") && !j["goal_hint"].is_null()) t.goal_hint = str("goal_hint");
    if (j.contains("scene")) {
        t.scene_doc = j["scene"];
    } else if (j.contains("scene_file")) {
        fs::path p = base_dir / str("scene_file");
        std::ifstream in(p);
        if (!in) throw ParseError("task.scene_file", "cannot read " + p.string());
        try {
            t.scene_doc = Json::parse(in);
        } catch (const Json::exception& e) {
            throw ParseError(p.string(), e.what());
        }
    } else {
        throw ParseError("task", "needs scene or scene_file");
    }
    t.script = j.value("script", Json(nullptr));
    return t;
}

inline TaskSpec load_task_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read task file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw ParseError(path.string(), e.what());
    }
    return load_task(j, path.parent_path());
}

// Every *.json file in the directory, ordered by id.
inline std::vector<TaskSpec> load_suite(const fs::path& dir) {
    std::vector<TaskSpec> tasks;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") tasks.push_back(load_task_file(entry.path()));
    if (tasks.empty()) throw Error("no task files in " + dir.string());
    std::sort(tasks.begin(), tasks.end(), [](const TaskSpec& a, const TaskSpec& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < tasks.size(); ++i)
        if (tasks[i].id == tasks[i - 1].id) throw Error("duplicate task id '" + tasks[i].id + "'");
    return tasks;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Ablation { none, no_ss, no_memory };
enum class PlannerKind { scripted, heuristic, remote };

inline std::string_view to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_ss: return "no_ss";
        case Ablation::no_memory: return "no_memory";
    }
    return "?";
}
inline std::string_view to_string(PlannerKind k) {
    switch (k) {
        case PlannerKind::scripted: return "scripted";
        case PlannerKind::heuristic: return "heuristic";
        case PlannerKind::remote: return "remote";
    }
    return "?";
}
inline std::optional<Ablation> parse_ablation(std::string_view s) {
    for (Ablation a : {Ablation::none, Ablation::no_ss, Ablation::no_memory})
        if (to_string(a) == s) return a;
    return std::nullopt;
}
inline std::optional<PlannerKind> parse_planner_kind(std::string_view s) {
    for (PlannerKind k : {PlannerKind::scripted, PlannerKind::heuristic, PlannerKind::remote})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

struct RunConfig {
    Ablation ablation = Ablation::none;
    std::optional<int> budget;  // overrides the task budget
    std::uint64_t seed = 0;
    PlannerKind planner = PlannerKind::heuristic;
    int parallelism = 1;
};

inline Json to_json(const RunConfig& c) {
    return {{"ablation", to_string(c.ablation)},
            {"budget", c.budget ? Json(*c.budget) : Json(nullptr)},
            {"seed", c.seed},
            {"planner", to_string(c.planner)}};
}

using PlannerFactory = std::function<std::unique_ptr<plan::PlannerBackend>(const TaskSpec&)>;

// Standard planner construction. `model` is required for the remote kind.
inline std::unique_ptr<plan::PlannerBackend> make_planner(PlannerKind kind, const TaskSpec& task,
                                                          backend::ModelBackend* model = nullptr) {
    switch (kind) {
        case PlannerKind::scripted:
            if (task.script.is_null()) throw Error("task '" + task.id + "' has no script");
            return std::make_unique<plan::ScriptedPlanner>(plan::load_script(task.script));
        case PlannerKind::heuristic:
            return std::make_unique<plan::HeuristicPlanner>(task.goal_hint ? eval::parse_expr(*task.goal_hint) : nullptr);
        case PlannerKind::remote:
            if (!model) throw Error("remote planner needs a model backend");
            return std::make_unique<plan::RemotePlanner>(*model);
    }
    throw Error("unknown planner kind");
}

struct Backends {
    PlannerFactory planner;
    obs::ObserverBackend* observer = nullptr;  // null: scene-derived observer
    memory::MemoryBackend* memory = nullptr;   // null: deterministic summarizer

    static Backends standard(PlannerKind kind, backend::ModelBackend* model = nullptr) {
        return {[kind, model](const TaskSpec& t) { return make_planner(kind, t, model); }, nullptr, nullptr};
    }
};

// ---------------------------------------------------------------------------
// Results and traces
// ---------------------------------------------------------------------------

enum class Termination { planner_done, budget_exhausted, fatal_error };

inline std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::planner_done: return "planner_done";
        case Termination::budget_exhausted: return "budget_exhausted";
        case Termination::fatal_error: return "fatal_error";
    }
    return "?";
}

struct EpisodeResult {
    std::string task_id;
    std::string domain;
    bool passed = false;
    int steps_used = 0;
    Termination termination = Termination::fatal_error;
    eval::Verdict verdict;
    std::optional<bool> success_claimed;
    std::optional<std::string> error;
};

inline Json to_json(const EpisodeResult& r) {
    return {{"task", r.task_id},
            {"domain", r.domain},
            {"passed", r.passed},
            {"steps_used", r.steps_used},
            {"termination", to_string(r.termination)},
            {"verdict", eval::to_json(r.verdict)},
            {"success_claimed", r.success_claimed ? Json(*r.success_claimed) : Json(nullptr)},
            {"error", r.error ? Json(*r.error) : Json(nullptr)}};
}

// header, one record per step, result; serialized as NDJSON.
struct Trace {
    Json header;
    std::vector<Json> steps;
    Json result;

    std::string to_ndjson() const {
        std::string out = header.dump() + "\n";
        for (const auto& s : steps) out += s.dump() + "\n";
        if (!result.is_null()) out += result.dump() + "\n";
        return out;
    }
};

inline Trace parse_trace(std::string_view text) {
    Trace t;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw ParseError("trace line " + std::to_string(line_no), e.what());
        }
        const std::string kind = j.value("kind", std::string{});
        if (kind == "header") {
            if (!t.header.is_null()) throw ParseError("trace", "duplicate header");
            t.header = std::move(j);
        } else if (kind == "step") {
            t.steps.push_back(std::move(j));
        } else if (kind == "result") {
            t.result = std::move(j);
        } else {
            throw ParseError("trace line " + std::to_string(line_no), "unknown record kind '" + kind + "'");
        }
    }
    if (t.header.is_null()) throw ParseError("trace", "missing header");
    return t;
}

inline Trace read_trace_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read trace " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str());
}

struct Episode {
    EpisodeResult result;
    Trace trace;
};

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

namespace detail {

inline void emit(std::ostream* sink, const Json& record) {
    if (!sink) return;
    *sink << record.dump() << '\n';
    sink->flush();
}

inline Episode fatal(Episode ep, const std::string& why, std::ostream* sink) {
    ep.result.termination = Termination::fatal_error;
    ep.result.passed = false;
    ep.result.error = why;
    ep.trace.result = to_json(ep.result);
    ep.trace.result["kind"] = "result";
    emit(sink, ep.trace.result);
    return ep;
}

}  // namespace detail

inline Episode run_episode(const TaskSpec& task, const RunConfig& config, const Backends& backends,
                           std::ostream* sink = nullptr) {
    Episode ep;
    ep.result.task_id = task.id;
    ep.result.domain = task.domain;
    const int budget = config.budget.value_or(task.budget);
    ep.trace.header = {{"kind", "header"},
                       {"version", kTraceVersion},
                       {"task", task.id},
                       {"domain", task.domain},
                       {"instruction", task.instruction},
                       {"budget", budget},
                       {"config", to_json(config)}};

    env::Scene scene;
    eval::ExprPtr eval_expr;
    std::unique_ptr<plan::PlannerBackend> planner;
    try {
        if (budget < 1) throw ContractError("budget must be >= 1");
        scene = env::load_scene(task.scene_doc);
        eval_expr = eval::parse_expr(task.eval);
        planner = backends.planner ? backends.planner(task) : make_planner(config.planner, task);
    } catch (const std::exception& e) {
        detail::emit(sink, ep.trace.header);
        return detail::fatal(std::move(ep), e.what(), sink);
    }
    ep.trace.header["initial_digest"] = env::scene_digest(scene);
    detail::emit(sink, ep.trace.header);

    obs::OracleObserver default_observer;
    memory::DeterministicMemory default_memory;
    obs::ObserverBackend& observer = backends.observer ? *backends.observer : default_observer;
    memory::MemoryBackend& memory_backend = backends.memory ? *backends.memory : default_memory;
    const bool use_memory = config.ablation != Ablation::no_memory;
    const bool use_observation = config.ablation != Ablation::no_ss;

    memory::MemoryUnit memory = memory::empty_memory();
    bool finished = false;
    int t = 0;
    for (; t < budget && !finished; ++t) {
        env::Frame frame = env::render_frame(scene, t);
        Json record{{"kind", "step"}, {"step", t}, {"frame_digest", frame.scene_digest}};
        const memory::MemoryUnit memory_in = use_memory ? memory : memory::empty_memory();
        record["memory_in"] = memory::to_json(memory_in);
        Json failure = nullptr;
        std::optional<memory::StepAnalysis> analysis;
        std::string thought;
        std::optional<ActionSpec> spec;

        obs::Observation observation;
        bool observed = true;
        if (use_observation) {
            try {
                observation = observer.observe(frame);
            } catch (const Error& e) {
                observed = false;
                failure = {{"stage", "observe"}, {"error", e.what()}};
                analysis = memory::analyze_failed(memory_in.step, "", std::nullopt, scene, "observation_error");
            }
        }
        record["observation"] = obs::to_json(observation);

        if (observed) {
            auto input = plan::PlannerInput::make(task.instruction, frame, observation, memory_in);
            std::optional<plan::Decision> decision;
            try {
                decision = plan::plan(input, *planner);
            } catch (const Error& e) {
                failure = {{"stage", "plan"}, {"error", e.what()}};
                analysis = memory::analyze_failed(memory_in.step, "", std::nullopt, scene, "planner_error");
            }
            record["decision"] = decision ? plan::to_json(*decision) : Json(nullptr);

            if (decision && decision->terminates()) {
                ep.result.success_claimed = std::get<plan::Terminate>(decision->body).success_claimed;
                ep.result.termination = Termination::planner_done;
                finished = true;
            } else if (decision) {
                thought = decision->thought;
                spec = decision->action();
                try {
                    auto g = ground::ground(*spec, observation, frame);
                    record["resolution"] = ground::to_json(g.report);
                    record["binding"] = g.action.binding();
                    const std::optional<std::string> chosen = g.report.chosen;
                    record["target"] = chosen ? Json(*chosen) : Json(nullptr);
                    env::TransitionResult result = env::apply_action(scene, g.action);
                    record["transition"] = env::summarize(result);
                    record["fingerprint"] = {action_digest(*spec), env::scene_digest(result.scene)};
                    analysis = memory::analyze_executed(memory_in.step, thought, *spec, g.action, chosen, scene, result);
                    scene = std::move(result.scene);
                } catch (const ground::BindingError& e) {
                    record["resolution"] = ground::to_json(ground::resolve(*spec, observation, frame));
                    failure = {{"stage", "ground"}, {"status", ground::to_string(e.status())}, {"error", e.what()}};
                    analysis = memory::analyze_failed(memory_in.step, thought, spec, scene,
                                                      std::string(ground::to_string(e.status())));
                } catch (const Error& e) {
                    failure = {{"stage", "ground"}, {"error", e.what()}};
                    analysis = memory::analyze_failed(memory_in.step, thought, spec, scene, "grounding_error");
                }
            }
        }
        record["failure"] = failure;

        if (use_memory && analysis) {
            try {
                memory = memory_backend.update(task.instruction, memory, *analysis);
            } catch (const Error& e) {
                record["memory_error"] = e.what();
            }
        }
        record["memory_out"] = memory::to_json(use_memory ? memory : memory::empty_memory());
        detail::emit(sink, record);
        ep.trace.steps.push_back(std::move(record));
    }
    ep.result.steps_used = t;
    if (!finished) ep.result.termination = Termination::budget_exhausted;
    ep.result.verdict = eval::evaluate(*eval_expr, scene);
    ep.result.passed = ep.result.verdict.passed;
    ep.trace.result = to_json(ep.result);
    ep.trace.result["kind"] = "result";
    ep.trace.result["final_digest"] = env::scene_digest(scene);
    detail::emit(sink, ep.trace.result);
    return ep;
}

// ---------------------------------------------------------------------------
// Suites and reports
// ---------------------------------------------------------------------------

struct DomainStats {
    int passed = 0;
    int total = 0;
};

struct SuiteReport {
    RunConfig config;
    std::vector<EpisodeResult> results;  // ordered by task id
    std::map<std::string, DomainStats> domains;
    DomainStats overall;

    bool passed(std::string_view task_id) const {
        for (const auto& r : results)
            if (r.task_id == task_id) return r.passed;
        return false;
    }
};

inline std::string format_rate(const DomainStats& s) {
    if (s.total == 0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * s.passed / s.total);
    return buf;
}

inline Json to_json(const SuiteReport& r) {
    Json results = Json::array();
    for (const auto& e : r.results) results.push_back(to_json(e));
    Json domains = Json::object();
    for (auto d : kDomains) {
        auto it = r.domains.find(std::string(d));
        DomainStats s = it == r.domains.end() ? DomainStats{} : it->second;
        domains[std::string(d)] = {{"passed", s.passed}, {"total", s.total}, {"rate", format_rate(s)}};
    }
    return {{"version", kTraceVersion},
            {"config", to_json(r.config)},
            {"results", results},
            {"domains", domains},
            {"overall", {{"passed", r.overall.passed}, {"total", r.overall.total}, {"rate", format_rate(r.overall)}}}};
}

// Domain columns plus overall, success rates in percent.
inline std::string format_table(const SuiteReport& r) {
    std::string head = "|", rule = "|", row = "|";
    for (auto d : kDomains) {
        auto it = r.domains.find(std::string(d));
        std::string cell = format_rate(it == r.domains.end() ? DomainStats{} : it->second);
        std::size_t w = std::max(d.size(), cell.size());
        head += " " + std::string(d) + std::string(w - d.size(), ' ') + " |";
        rule += std::string(w + 2, '-') + "|";
        row += " " + std::string(w - cell.size(), ' ') + cell + " |";
    }
    std::string cell = format_rate(r.overall);
    std::size_t w = std::max<std::size_t>(7, cell.size());
    head += " overall" + std::string(w - 7, ' ') + " |";
    rule += std::string(w + 2, '-') + "|";
    row += " " + std::string(w - cell.size(), ' ') + cell + " |";
    return head + "\n" + rule + "\n" + row + "\n";
}

inline SuiteReport aggregate(const RunConfig& config, std::vector<EpisodeResult> results) {
    SuiteReport r;
    r.config = config;
    std::sort(results.begin(), results.end(),
              [](const EpisodeResult& a, const EpisodeResult& b) { return a.task_id < b.task_id; });
    r.results = std::move(results);
    for (const auto& e : r.results) {
        auto& d = r.domains[e.domain];
        ++d.total;
        ++r.overall.total;
        if (e.passed) {
            ++d.passed;
            ++r.overall.passed;
        }
    }
    return r;
}

// Runs every task, up to config.parallelism at once. When out_dir is set,
// traces go to out_dir/traces/<id>.ndjson and the report to
// out_dir/report.json and out_dir/report.md.
inline SuiteReport run_suite(const std::vector<TaskSpec>& tasks, const RunConfig& config, const Backends& backends,
                             const std::optional<fs::path>& out_dir = std::nullopt) {
    if (tasks.empty()) throw ContractError("suite needs at least one task");
    if (out_dir) fs::create_directories(*out_dir / "traces");
    std::vector<EpisodeResult> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                std::ofstream file;
                if (out_dir) file.open(*out_dir / "traces" / (tasks[i].id + ".ndjson"), std::ios::binary | std::ios::trunc);
                results[i] = run_episode(tasks[i], config, backends, out_dir ? &file : nullptr).result;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    const int n = std::clamp(config.parallelism, 1, static_cast<int>(tasks.size()));
    std::vector<std::thread> pool;
    for (int k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);

    SuiteReport report = aggregate(config, std::move(results));
    if (out_dir) {
        std::ofstream(*out_dir / "report.json", std::ios::binary | std::ios::trunc) << to_json(report).dump(2) << "\n";
        std::ofstream(*out_dir / "report.md", std::ios::binary | std::ios::trunc) << format_table(report);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

class ReplayError : public Error {
public:
    using Error::Error;
};

struct ReplayReport {
    bool clean = true;
    int steps_checked = 0;
    std::optional<int> divergence_step;
    std::string reason;
};

inline Json to_json(const ReplayReport& r) {
    return {{"clean", r.clean},
            {"steps_checked", r.steps_checked},
            {"divergence_step", r.divergence_step ? Json(*r.divergence_step) : Json(nullptr)},
            {"reason", r.reason}};
}

// Re-executes each recorded binding from the task's initial scene and
// compares frame and post-action digests with the recording.
inline ReplayReport replay(const Trace& trace, const TaskSpec& task) {
    const std::string version = trace.header.value("version", std::string{});
    if (version != kTraceVersion)
        throw ReplayError("trace version '" + version + "' is not " + std::string(kTraceVersion) + "; refusing to replay");
    if (trace.header.value("task", std::string{}) != task.id)
        throw ReplayError("trace was recorded for task '" + trace.header.value("task", std::string{}) + "', not '" +
                          task.id + "'");
    env::Scene scene = env::load_scene(task.scene_doc);
    ReplayReport report;
    auto diverge = [&](int step, std::string why) {
        report.clean = false;
        report.divergence_step = step;
        report.reason = std::move(why);
        return report;
    };
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const Json& s = trace.steps[i];
        const int step = static_cast<int>(i);
        if (s.value("step", -1) != step) return diverge(step, "step indices are not contiguous");
        if (s.value("frame_digest", std::string{}) != env::scene_digest(scene))
            return diverge(step, "frame digest differs");
        if (s.contains("binding") && s["binding"].is_string()) {
            GroundedAction action;
            try {
                action = parse_binding(s["binding"].get<std::string>());
                check_grounded(action);
            } catch (const Error& e) {
                return diverge(step, std::string("unparseable binding: ") + e.what());
            }
            auto result = env::apply_action(scene, action);
            const Json& recorded = s.value("transition", Json::object());
            if (recorded.value("post_digest", std::string{}) != env::scene_digest(result.scene))
                return diverge(step, "post-action digest differs");
            scene = std::move(result.scene);
        }
        ++report.steps_checked;
    }
    if (trace.result.contains("final_digest") && trace.result["final_digest"] != env::scene_digest(scene))
        return diverge(static_cast<int>(trace.steps.size()), "final digest differs");
    return report;
}

}  // namespace mga::harness
