#include "support.hpp"

#include <gtest/gtest.h>

using namespace mga;
using support::make;
using support::scene_of;

namespace {

struct Fixture {
    env::Scene scene;
    env::Frame frame;
    obs::Observation o;
    explicit Fixture(env::Scene s) : scene(std::move(s)), frame(env::render_frame(scene, 0)), o(obs::extract(frame)) {}
};

env::Scene vlc() {
    auto media = make("media", {10, 0, 80, 24}, Role::menu, "Media", true);
    auto ok1 = make("ok1", {100, 100, 60, 20}, Role::button, "OK", true);
    auto ok2 = make("ok2", {200, 100, 60, 20}, Role::button, " ok ", true);
    return scene_of({media, ok1, ok2, make("title", {100, 0, 200, 24}, Role::label, "VLC media player")});
}

}  // namespace

TEST(ParseAction, PassThroughExamples) {
    auto media = ground::parse_action({"click", ByLabel{"Media"}, std::nullopt});
    EXPECT_EQ(media, (ground::ParsedAction{Op::click, ByLabel{"Media"}, std::monostate{}}));
    auto save = ground::parse_action({"hotkey", std::monostate{}, std::string("Ctrl+S")});
    EXPECT_EQ(save, (ground::ParsedAction{Op::hotkey, std::monostate{}, KeysPayload{"ctrl+s"}}));
    auto scroll = ground::parse_action({"scroll", ByRole{Role::scroll_region}, std::string("-3")});
    EXPECT_EQ(scroll, (ground::ParsedAction{Op::scroll, ByRole{Role::scroll_region}, ScrollPayload{-3}}));
}

TEST(ParseAction, ValidationRejectsMalformedSpecs) {
    for (const ActionSpec& bad : {ActionSpec{"drag", ByLabel{"a"}, std::nullopt},
                                  ActionSpec{"click", std::monostate{}, std::nullopt},
                                  ActionSpec{"click", ByLabel{"a"}, std::string("x")},
                                  ActionSpec{"type", ById{"f"}, std::nullopt},
                                  ActionSpec{"hotkey", ByLabel{"a"}, std::string("ctrl+s")},
                                  ActionSpec{"hotkey", std::monostate{}, std::string("ctrl+")},
                                  ActionSpec{"scroll", ByRole{Role::list}, std::string("lots")},
                                  ActionSpec{"click", ByLabel{"   "}, std::nullopt}})
        EXPECT_THROW(ground::validate_action(bad), ValidationError) << to_json(bad).dump();
    EXPECT_NO_THROW(ground::validate_action({"type", std::monostate{}, std::string("hi")}));
}

TEST(Localize, Examples) {
    Fixture f(vlc());
    auto media = ground::localize(ByLabel{"media"}, f.o);
    EXPECT_EQ(media.status, ground::Status::resolved);
    EXPECT_EQ(media.chosen, "media");
    auto ok = ground::localize(ByLabel{"OK"}, f.o);
    EXPECT_EQ(ok.status, ground::Status::ambiguous);
    EXPECT_EQ(ok.candidates, (std::vector<std::string>{"ok1", "ok2"}));
    EXPECT_FALSE(ok.chosen);
    EXPECT_EQ(ground::localize(ByLabel{"Playlist"}, f.o).status, ground::Status::not_found);
    EXPECT_EQ(ground::localize(std::monostate{}, f.o).status, ground::Status::untargeted);
    EXPECT_EQ(ground::localize(ByPoint{{15, 5}}, f.o).chosen, "media");
    EXPECT_EQ(ground::localize(ByPoint{{399, 299}}, f.o).status, ground::Status::not_found);
    // Labels without an actionable element are not targets.
    EXPECT_EQ(ground::localize(ByLabel{"VLC media player"}, f.o).status, ground::Status::not_found);
}

TEST(Localize, CheckboxUnderModalIsOccluded) {
    auto s = scene_of({make("cb", {100, 100, 20, 20}, Role::checkbox, "Miles", true),
                       make("dlg", {50, 50, 200, 150}, Role::dialog, "Dates", false, 10),
                       make("done", {60, 60, 40, 20}, Role::button, "Done", true, 11, "dlg")});
    s.modal_stack = {"dlg"};
    Fixture f(s);
    ASSERT_TRUE(support::oracle_occluded(s, *s.find("cb")));
    auto r = ground::localize(ByLabel{"Miles"}, f.o);
    EXPECT_EQ(r.status, ground::Status::occluded);
    EXPECT_EQ(r.candidates, std::vector<std::string>{"cb"});
    EXPECT_EQ(ground::localize(ByLabel{"Done"}, f.o).status, ground::Status::resolved);
    try {
        ground::bind(Op::click, r, std::monostate{}, f.o);
        FAIL();
    } catch (const ground::BindingError& e) {
        EXPECT_EQ(e.status(), ground::Status::occluded);
    }
}

TEST(Localize, OccludedStatusAgreesWithOracle) {
    std::mt19937 rng(51);
    for (int n = 0; n < 200; ++n) {
        auto s = support::with_random_modal(support::random_scene(rng), rng);
        Fixture f(s);
        auto inventory = support::oracle_inventory(s);
        for (const auto& e : s.elements) {
            auto r = ground::localize(ById{e.id}, f.o);
            if (inventory.count(e.id)) EXPECT_EQ(r.status, ground::Status::resolved);
            else EXPECT_EQ(r.status, ground::Status::occluded) << e.id;
        }
    }
}

TEST(Bind, ReferenceCoordinates) {
    // bbox whose floor-centroid is (676, 377)
    auto s = scene_of({make("media", {656, 367, 40, 20}, Role::menu, "Media", true)}, 1280, 800);
    Fixture f(s);
    auto g = ground::ground({"click", ByLabel{"Media"}, std::nullopt}, f.o, f.frame);
    EXPECT_EQ(g.action.binding(), "click(x=676,y=377,clicks=1,button=left)");
    auto d = ground::ground({"double_click", ByLabel{"Media"}, std::nullopt}, f.o, f.frame);
    EXPECT_EQ(d.action.binding(), "click(x=676,y=377,clicks=2,button=left)");

    auto box = scene_of({make("b", {10, 10, 30, 30}, Role::button, "B", true)});
    Fixture fb(box);
    EXPECT_EQ(std::get<Point>(ground::ground({"click", ById{"b"}, std::nullopt}, fb.o, fb.frame).action.target),
              (Point{25, 25}));
}

TEST(Bind, UntargetedKeyboardActions) {
    Fixture f(vlc());
    auto g = ground::ground({"hotkey", std::monostate{}, std::string("ctrl+o")}, f.o, f.frame);
    EXPECT_EQ(g.report.status, ground::Status::untargeted);
    EXPECT_EQ(g.action.binding(), "hotkey(keys=\"ctrl+o\")");
    EXPECT_THROW(ground::bind(Op::click, {ground::Status::untargeted, {}, std::nullopt}, std::monostate{}, f.o),
                 ground::BindingError);
}

TEST(Bind, AmbiguityIsNeverTieBroken) {
    Fixture f(vlc());
    try {
        ground::ground({"click", ByLabel{"ok"}, std::nullopt}, f.o, f.frame);
        FAIL();
    } catch (const ground::BindingError& e) {
        EXPECT_EQ(e.status(), ground::Status::ambiguous);
    }
}

TEST(Ground, CentroidContainmentAndNoFabrication) {
    std::mt19937 rng(52);
    int covered = 0, direct = 0;
    for (int n = 0; n < 300; ++n) {
        auto s = support::random_scene(rng);
        if (n % 2) s = support::with_random_modal(s, rng);
        Fixture f(s);
        for (const auto& e : s.elements) {
            for (const TargetQuery& q : {TargetQuery{ById{e.id}}, TargetQuery{ByLabel{e.label}}}) {
                auto r = ground::localize(q, f.o);
                if (r.chosen) {
                    ASSERT_TRUE(f.o.semantic.count(*r.chosen));
                    ASSERT_TRUE(s.find(*r.chosen));
                }
                for (const auto& c : r.candidates) ASSERT_TRUE(f.o.semantic.count(c));
                if (r.status != ground::Status::resolved) continue;
                auto a = ground::bind(Op::click, r, std::monostate{}, f.o);
                Point p = std::get<Point>(a.target);
                const env::Element* chosen = s.find(*r.chosen);
                ASSERT_TRUE(support::inside(chosen->bbox, p));
                // The bound point reaches the chosen element whenever its
                // centroid is not covered by something else.
                auto hit = support::oracle_hit(s, p);
                if (hit && support::descends_from(s, *hit, chosen->id)) {
                    ++direct;
                    auto result = env::apply_action(s, a);
                    ASSERT_TRUE(result.receiver);
                    EXPECT_TRUE(support::descends_from(s, *result.receiver, chosen->id));
                } else {
                    ++covered;
                }
            }
        }
    }
    EXPECT_GT(direct, 500);
    RecordProperty("covered_centroids", covered);
}

TEST(Ground, VisualFallbackWithoutObservation) {
    auto s = scene_of({make("cb", {100, 100, 20, 20}, Role::checkbox, "Miles", true),
                       make("dlg", {50, 50, 200, 150}, Role::dialog, "Dates", false, 10)});
    s.modal_stack = {"dlg"};
    auto frame = env::render_frame(s, 0);
    // The raw frame reading knows nothing about the modal.
    auto g = ground::ground({"click", ByLabel{"Miles"}, std::nullopt}, obs::empty_observation(), frame);
    EXPECT_EQ(g.report.status, ground::Status::resolved);
    EXPECT_EQ(env::apply_action(s, g.action).outcome, env::Outcome::intercepted);
}

TEST(Ground, ReportSerialization) {
    ground::ResolutionReport r{ground::Status::ambiguous, {"a", "b"}, std::nullopt};
    EXPECT_EQ(ground::to_json(r), (Json{{"status", "ambiguous"}, {"candidates", {"a", "b"}}, {"chosen", nullptr}}));
}
