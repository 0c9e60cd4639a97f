// mga: run tasks or suites, replay traces, evaluate expressions.

#include "mga/mga.hpp"
#include "mga/remote.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace mga;
namespace fs = std::filesystem;

int cmd_run(const std::string& task_file, const std::string& suite_dir, const harness::RunConfig& config,
            const std::string& observer_kind, const std::string& memory_kind, const fs::path& out) {
    std::unique_ptr<backend::RemoteBackend> model;
    auto remote = [&]() -> backend::RemoteBackend& {
        if (!model) model = std::make_unique<backend::RemoteBackend>(backend::RemoteConfig::from_env());
        return *model;
    };
    harness::Backends backends = harness::Backends::standard(
        config.planner, config.planner == harness::PlannerKind::remote ? &remote() : nullptr);
    std::unique_ptr<obs::ObserverBackend> observer;
    std::unique_ptr<memory::MemoryBackend> memory;
    if (observer_kind == "remote") {
        observer = std::make_unique<obs::RemoteObserver>(remote());
        backends.observer = observer.get();
    }
    if (memory_kind == "remote") {
        memory = std::make_unique<memory::RemoteMemory>(remote());
        backends.memory = memory.get();
    }

    std::vector<harness::TaskSpec> tasks =
        task_file.empty() ? harness::load_suite(suite_dir) : std::vector{harness::load_task_file(task_file)};
    harness::SuiteReport report = harness::run_suite(tasks, config, backends, out);
    for (const auto& r : report.results)
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.task_id << "  steps=" << r.steps_used << "  "
                  << harness::to_string(r.termination) << (r.error ? "  error: " + *r.error : "") << "\n";
    std::cout << "\n" << harness::format_table(report);
    std::cout << "\nreport: " << (out / "report.json").string() << "\n";
    return 0;
}

int cmd_replay(const std::string& trace_file, const std::string& task_file) {
    auto trace = harness::read_trace_file(trace_file);
    auto task = harness::load_task_file(task_file);
    try {
        auto report = harness::replay(trace, task);
        std::cout << harness::to_json(report).dump(2) << "\n";
        return report.clean ? 0 : 1;
    } catch (const harness::ReplayError& e) {
        std::cerr << "replay refused: " << e.what() << "\n";
        return 2;
    }
}

int cmd_eval(const std::string& expr, const std::string& scene_file) {
    std::ifstream in(scene_file);
    if (!in) throw Error("cannot read scene " + scene_file);
    std::stringstream buf;
    buf << in.rdbuf();
    env::Scene scene = env::load_scene_text(buf.str());
    auto verdict = eval::evaluate(*eval::parse_expr(expr), scene);
    std::cout << eval::to_json(verdict).dump(2) << "\n";
    return verdict.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memory-driven GUI agent runtime over a simulated GUI"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a task or a suite of tasks");
    std::string task_file, suite_dir, ablation = "none", planner = "heuristic", observer = "oracle",
                                      memory_kind = "deterministic", out = "out";
    int budget = 0, parallel = 1;
    std::uint64_t seed = 0;
    auto* task_opt = run->add_option("--task", task_file, "Task file")->check(CLI::ExistingFile);
    auto* suite_opt = run->add_option("--suite", suite_dir, "Directory of task files")->check(CLI::ExistingDirectory);
    task_opt->excludes(suite_opt);
    run->add_option("--budget", budget, "Step budget for every task (default: per task)")->check(CLI::PositiveNumber);
    run->add_option("--ablate", ablation, "Ablation")->check(CLI::IsMember({"none", "no_ss", "no_memory"}));
    run->add_option("--seed", seed, "Seed recorded in the report");
    run->add_option("--backend-planner", planner, "Planner backend")
        ->check(CLI::IsMember({"scripted", "heuristic", "remote"}));
    run->add_option("--backend-observer", observer, "Observer backend")->check(CLI::IsMember({"oracle", "remote"}));
    run->add_option("--backend-memory", memory_kind, "Memory backend")
        ->check(CLI::IsMember({"deterministic", "remote"}));
    run->add_option("--parallel", parallel, "Concurrent episodes")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "Output directory for traces and the report");

    auto* rep = app.add_subcommand("replay", "Re-execute a trace and check its digests");
    std::string trace_file, replay_task;
    rep->add_option("--trace", trace_file, "Trace file")->required()->check(CLI::ExistingFile);
    rep->add_option("--task", replay_task, "Task file the trace was recorded from")->required()->check(CLI::ExistingFile);

    auto* ev = app.add_subcommand("eval", "Evaluate an expression against a scene document");
    std::string expr, scene_file;
    ev->add_option("--expr", expr, "Expression")->required();
    ev->add_option("--scene", scene_file, "Scene document")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (task_file.empty() && suite_dir.empty()) throw CLI::RequiredError("--task or --suite");
            harness::RunConfig config;
            config.ablation = *harness::parse_ablation(ablation);
            if (budget > 0) config.budget = budget;
            config.seed = seed;
            config.planner = *harness::parse_planner_kind(planner);
            config.parallelism = parallel;
            return cmd_run(task_file, suite_dir, config, observer, memory_kind, out);
        }
        if (*rep) return cmd_replay(trace_file, replay_task);
        if (*ev) return cmd_eval(expr, scene_file);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
