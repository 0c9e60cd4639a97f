// Walks the flight-booking scenario one step at a time with the heuristic
// planner and prints what each stage produced.

#include "mga/mga.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace mga;
    const std::string path = argc > 1 ? argv[1] : "scenarios/daily_flight_miles.json";
    auto task = harness::load_task_file(path);

    env::Scene scene = env::load_scene(task.scene_doc);
    plan::HeuristicPlanner planner(task.goal_hint ? eval::parse_expr(*task.goal_hint) : nullptr);
    memory::MemoryUnit mem = memory::empty_memory();

    for (int t = 0; t < task.budget; ++t) {
        env::Frame frame = env::render_frame(scene, t);
        obs::Observation z = obs::extract(frame);
        auto decision = plan::plan(plan::PlannerInput::make(task.instruction, frame, z, mem), planner);
        std::cout << "step " << t << ": " << decision.thought << "\n";
        if (decision.terminates()) break;

        auto g = ground::ground(decision.action(), z, frame);
        auto result = env::apply_action(scene, g.action);
        std::cout << "  " << g.action.binding() << " -> " << env::to_string(result.outcome) << "\n";
        mem = memory::update_memory(task.instruction, mem,
                                    memory::analyze_executed(mem.step, decision.thought, decision.action(), g.action,
                                                             g.report.chosen, scene, result));
        scene = result.scene;
    }
    auto verdict = eval::evaluate(*eval::parse_expr(task.eval), scene);
    std::cout << (verdict.passed ? "passed" : "failed") << "\n";
    return verdict.passed ? 0 : 1;
}
