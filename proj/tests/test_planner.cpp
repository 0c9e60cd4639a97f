#include "support.hpp"

#include <gtest/gtest.h>

#include <type_traits>

using namespace mga;
using support::make;
using support::scene_of;

namespace {

std::string scenario(const std::string& name) { return std::string(MGA_SCENARIO_DIR) + "/" + name + ".json"; }

plan::PlannerInput input_for(const std::string& instruction, const env::Scene& s,
                             memory::MemoryUnit m = memory::empty_memory()) {
    auto frame = env::render_frame(s, 0);
    return plan::PlannerInput::make(instruction, frame, obs::extract(frame), std::move(m));
}

// Resolves a decision's target against the scene it was planned for.
std::optional<std::string> target_of(const plan::Decision& d, const env::Scene& s) {
    if (d.terminates()) return std::nullopt;
    auto frame = env::render_frame(s, 0);
    return ground::localize(d.action().target, obs::extract(frame)).chosen;
}

}  // namespace

// ---------------------------------------------------------------------------
// History isolation
// ---------------------------------------------------------------------------

static_assert(!std::is_default_constructible_v<plan::PlannerInput>);
static_assert(!std::is_constructible_v<plan::PlannerInput, std::string, env::Frame, obs::Observation,
                                       memory::MemoryUnit>);
static_assert(std::is_same_v<decltype(&plan::PlannerInput::make),
                             plan::PlannerInput (*)(std::string, const env::Frame&, obs::Observation, memory::MemoryUnit)>);
static_assert(std::is_copy_constructible_v<plan::PlannerInput>);

TEST(PlannerInput, CarriesOnlyTheTripleAndInstruction) {
    auto s = scene_of({make("b", {0, 0, 10, 10}, Role::button, "B", true)});
    auto in = input_for("press B", s);
    EXPECT_EQ(in.instruction(), "press B");
    EXPECT_EQ(in.frame_digest(), env::scene_digest(s));
    EXPECT_EQ(in.memory_digest(), "memory: empty");
    env::Frame blank;
    EXPECT_THROW(plan::PlannerInput::make("x", blank, {}, {}), ContractError);
}

// ---------------------------------------------------------------------------
// validate_decision
// ---------------------------------------------------------------------------

TEST(Validate, Examples) {
    EXPECT_NO_THROW(plan::validate_decision({"t", ActionSpec{"type", ByLabel{"Search"}, std::string("cats")}}));
    EXPECT_THROW(plan::validate_decision({"t", ActionSpec{"type", ByLabel{"Search"}, std::nullopt}}), ValidationError);
    EXPECT_THROW(plan::validate_decision({"t", ActionSpec{"drag", ByLabel{"Search"}, std::nullopt}}), ValidationError);
    EXPECT_NO_THROW(plan::validate_decision({"t", plan::Terminate{true}}));
    EXPECT_THROW(plan::validate_decision({"", plan::Terminate{true}}), ValidationError);
}

TEST(Decision, JsonRoundTrip) {
    plan::Decision a{"open it", ActionSpec{"click", ByLabel{"Media"}, std::nullopt}};
    plan::Decision b{"done", plan::Terminate{true}};
    EXPECT_EQ(plan::decision_from_json(plan::to_json(a), "d"), a);
    EXPECT_EQ(plan::decision_from_json(plan::to_json(b), "d"), b);
    EXPECT_EQ(plan::decision_from_json(Json{{"thought", "x"}, {"terminate", false}}, "d").body,
              (std::variant<ActionSpec, plan::Terminate>{plan::Terminate{false}}));
    EXPECT_THROW(plan::decision_from_json(Json{{"thought", "x"}}, "d"), ParseError);
    EXPECT_THROW(plan::decision_from_json(Json{{"thought", "x"}, {"terminate", true}, {"action", Json::object()}}, "d"),
                 ParseError);
}

// ---------------------------------------------------------------------------
// Heuristic backend
// ---------------------------------------------------------------------------

TEST(Heuristic, VlcOpensMediaMenuFirst) {
    auto task = harness::load_task_file(scenario("daily_vlc_open_media"));
    auto s = env::load_scene(task.scene_doc);
    plan::HeuristicPlanner planner(eval::parse_expr(*task.goal_hint));
    auto d = plan::plan(input_for(task.instruction, s), planner);
    ASSERT_FALSE(d.terminates());
    EXPECT_EQ(d.action().verb, "click");
    EXPECT_EQ(d.action().target, TargetQuery{ByLabel{"Media"}});
    EXPECT_NE(d.thought.find("Media"), std::string::npos);
}

TEST(Heuristic, ModalIsDismissedFirst) {
    auto s = scene_of({make("cb", {100, 100, 20, 20}, Role::checkbox, "Miles", true),
                       make("dlg", {50, 50, 200, 150}, Role::dialog, "Dates", false, 10),
                       make("next", {60, 60, 40, 20}, Role::button, "Next", true, 11, "dlg"),
                       make("done", {110, 60, 40, 20}, Role::button, "Done", true, 11, "dlg")});
    s.modal_stack = {"dlg"};
    plan::HeuristicPlanner planner;
    auto d = plan::plan(input_for("Check the Miles box", s), planner);
    ASSERT_FALSE(d.terminates());
    EXPECT_EQ(target_of(d, s), "done");
}

TEST(Heuristic, ModalPriorityHoldsOnGeneratedScenes) {
    std::mt19937 rng(61);
    plan::HeuristicPlanner planner;
    for (int n = 0; n < 300; ++n) {
        auto s = support::with_random_modal(support::random_scene(rng), rng);
        // Instruction names a background element, which must not win.
        std::string instruction = "Click " + s.elements.front().label;
        auto d = plan::plan(input_for(instruction, s), planner);
        ASSERT_FALSE(d.terminates()) << env::save_scene(s).dump();
        auto frame = env::render_frame(s, 0);
        std::optional<std::string> target;
        if (auto* id = std::get_if<ById>(&d.action().target)) target = id->id;
        else target = ground::localize(d.action().target, obs::extract(frame)).chosen;
        ASSERT_TRUE(target);
        EXPECT_TRUE(support::descends_from(s, *target, s.modal_stack.back())) << *target;
    }
}

TEST(Heuristic, LoopedActionIsSuppressed) {
    auto task = harness::load_task_file(scenario("office_export_pdf"));
    auto s = env::load_scene(task.scene_doc);
    plan::HeuristicPlanner planner(eval::parse_expr(*task.goal_hint));
    auto first = plan::plan(input_for(task.instruction, s), planner);
    ASSERT_FALSE(first.terminates());

    // Memory reporting a loop on the first choice.
    memory::MemoryUnit m;
    for (int t = 0; t < 3; ++t) {
        memory::StepAnalysis a;
        a.step = t;
        a.action = first.action();
        a.action_digest = action_digest(first.action());
        a.pre_digest = a.post_digest = env::scene_digest(s);
        a.intended = "activate";
        a.observed = "activate";
        a.outcome = "ok";
        m = memory::update_memory(task.instruction, m, a);
    }
    ASSERT_TRUE(m.loop_flagged(action_digest(first.action())));
    auto second = plan::plan(input_for(task.instruction, s, m), planner);
    EXPECT_NE(second, first);
    if (!second.terminates()) EXPECT_NE(action_digest(second.action()), action_digest(first.action()));
}

TEST(Heuristic, KeywordTiesGoToSmallerId) {
    auto s = scene_of({make("z_save", {0, 0, 50, 20}, Role::button, "Save", true),
                       make("a_save", {100, 0, 50, 20}, Role::button, "Save", true)});
    plan::HeuristicPlanner planner;
    auto d = plan::plan(input_for("Save the file", s), planner);
    ASSERT_FALSE(d.terminates());
    EXPECT_EQ(d.action().target, TargetQuery{ById{"a_save"}});
}

TEST(Heuristic, QuotedTextIsTypedIntoFields) {
    auto s = scene_of({make("title", {0, 0, 200, 20}, Role::text_field, "Title", true)});
    plan::HeuristicPlanner planner;
    auto d = plan::plan(input_for("Set the title to \"Q3 Summary\"", s), planner);
    ASSERT_FALSE(d.terminates());
    EXPECT_EQ(d.action().verb, "type");
    EXPECT_EQ(d.action().argument, "Q3 Summary");
}

TEST(Heuristic, TerminatesOnGoalOrGivesUp) {
    auto s = scene_of({make("b", {0, 0, 50, 20}, Role::button, "Unrelated", true)});
    s.flags["done"] = true;
    plan::HeuristicPlanner with_goal(eval::parse_expr("done"));
    plan::HeuristicPlanner without_goal;
    EXPECT_EQ(plan::plan(input_for("finish it", s), with_goal).body,
              (std::variant<ActionSpec, plan::Terminate>{plan::Terminate{true}}));
    EXPECT_EQ(plan::plan(input_for("finish it", s), without_goal).body,
              (std::variant<ActionSpec, plan::Terminate>{plan::Terminate{false}}));
}

TEST(Heuristic, DeterministicOverScenarios) {
    for (const auto& task : harness::load_suite(MGA_SCENARIO_DIR)) {
        auto s = env::load_scene(task.scene_doc);
        eval::ExprPtr hint = task.goal_hint ? eval::parse_expr(*task.goal_hint) : nullptr;
        plan::HeuristicPlanner a(hint), b(hint);
        EXPECT_EQ(plan::plan(input_for(task.instruction, s), a), plan::plan(input_for(task.instruction, s), b)) << task.id;
    }
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

TEST(Scripted, GuardsAndExhaustion) {
    auto records = plan::load_script(Json::parse(R"js([
        {"guard": "inventory_contains(\"Go\")", "action": {"verb": "click", "target": {"by_label": "Go"}}},
        {"terminate": true}
    ])js"));
    ASSERT_EQ(records.size(), 2u);
    EXPECT_EQ(records[0].decision.thought, "scripted step 0");
    plan::ScriptedPlanner planner(records);

    auto without = scene_of({make("other", {0, 0, 50, 20}, Role::button, "Stop", true)});
    try {
        planner.plan(input_for("go", without));
        FAIL();
    } catch (const plan::PlannerError& e) {
        EXPECT_EQ(e.kind(), plan::PlannerError::Kind::guard_mismatch);
    }
    EXPECT_EQ(planner.remaining(), 2u);

    auto with = scene_of({make("go", {0, 0, 50, 20}, Role::button, "Go", true)});
    EXPECT_FALSE(planner.plan(input_for("go", with)).terminates());
    EXPECT_TRUE(planner.plan(input_for("go", with)).terminates());
    try {
        planner.plan(input_for("go", with));
        FAIL();
    } catch (const plan::PlannerError& e) {
        EXPECT_EQ(e.kind(), plan::PlannerError::Kind::exhausted);
    }
}

TEST(Scripted, MalformedPlansAreRejected) {
    EXPECT_THROW(plan::load_script(Json::object()), ParseError);
    EXPECT_THROW(plan::load_script(Json::parse(R"([{"guard": 3, "terminate": true}])")), ParseError);
    EXPECT_THROW(plan::load_script(Json::parse(R"js([{"guard": "nope(", "terminate": true}])js")), ParseError);
    EXPECT_THROW(plan::load_script(Json::parse(R"([{"action": {"verb": "drag", "target": {"by_label": "x"}}}])")),
                 ValidationError);
}

// ---------------------------------------------------------------------------
// Remote backend reply parsing
// ---------------------------------------------------------------------------

TEST(ParseReply, TwoPartReplies) {
    auto d = plan::parse_reply("Thought: The video lives under Media.\nAction: click label=\"Media\"\n");
    EXPECT_EQ(d.thought, "The video lives under Media.");
    EXPECT_EQ(d.action(), (ActionSpec{"click", ByLabel{"Media"}, std::nullopt}));

    EXPECT_EQ(plan::parse_reply("Thought: type\nAction: type id=\"q\" text=\"a \\\"b\\\"\"").action(),
              (ActionSpec{"type", ById{"q"}, std::string("a \"b\"")}));
    EXPECT_EQ(plan::parse_reply("Thought: s\nAction: scroll role=scroll_region delta=-3").action(),
              (ActionSpec{"scroll", ByRole{Role::scroll_region}, std::string("-3")}));
    EXPECT_EQ(plan::parse_reply("Thought: p\nAction: right_click point=(10, 20)").action(),
              (ActionSpec{"right_click", ByPoint{{10, 20}}, std::nullopt}));
    EXPECT_EQ(plan::parse_reply("Thought: k\nAction: hotkey keys=\"ctrl+s\"").action(),
              (ActionSpec{"hotkey", std::monostate{}, std::string("ctrl+s")}));
    EXPECT_EQ(plan::parse_reply("Thought: multi\nline\nAction: terminate success=true").thought, "multi\nline");
    EXPECT_TRUE(plan::parse_reply("Thought: x\nAction: terminate success=false").terminates());
}

TEST(ParseReply, MalformedRepliesAreDecisionParseErrors) {
    for (const char* bad : {"", "Action: click label=\"a\"", "Thought: x", "Thought: x\nAction: click",
                            "Thought: x\nAction: drag label=\"a\"", "Thought: x\nAction: click label=a",
                            "Thought: x\nAction: click label=\"a\" id=\"b\"", "Thought: x\nAction: terminate",
                            "Thought: x\nAction: click label=\"a\"\nAction: click label=\"b\"",
                            "Thought: x\nAction: click colour=\"a\""}) {
        try {
            plan::parse_reply(bad);
            ADD_FAILURE() << bad;
        } catch (const plan::PlannerError& e) {
            EXPECT_EQ(e.kind(), plan::PlannerError::Kind::decision_parse) << bad;
        }
    }
}

TEST(Remote, BundleFieldOrderAndErrors) {
    auto s = scene_of({make("b", {0, 0, 10, 10}, Role::button, "B", true)});
    auto in = input_for("press B", s);
    auto bundle = plan::RemotePlanner::bundle_for(in);
    ASSERT_EQ(bundle.fields.size(), 3u);
    EXPECT_EQ(bundle.fields[0].first, "instruction");
    EXPECT_EQ(bundle.fields[1].first, "observation");
    EXPECT_EQ(bundle.fields[2].first, "memory_digest");

    backend::ScriptedBackend model({"Thought: press\nAction: click label=\"B\"", "garbage"});
    plan::RemotePlanner planner(model);
    EXPECT_EQ(plan::plan(in, planner).action(), (ActionSpec{"click", ByLabel{"B"}, std::nullopt}));
    try {
        planner.plan(in);
        FAIL();
    } catch (const plan::PlannerError& e) {
        EXPECT_EQ(e.kind(), plan::PlannerError::Kind::decision_parse);
    }
    try {
        planner.plan(in);
        FAIL();
    } catch (const plan::PlannerError& e) {
        EXPECT_EQ(e.kind(), plan::PlannerError::Kind::backend);
    }
}
