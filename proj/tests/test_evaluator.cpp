#include "support.hpp"

#include <gtest/gtest.h>

using namespace mga;
using support::make;
using support::scene_of;

namespace {

using Kind = eval::EvalExpr::Kind;

eval::ExprPtr P(const std::string& s) { return eval::parse_expr(s); }

bool same(const eval::ExprPtr& a, const eval::ExprPtr& b) { return eval::structurally_equal(*a, *b); }

// Test-side expression tree over flag atoms a0..a3, printed with random
// parenthesization and evaluated directly.
struct Gen {
    enum { atom, conj, disj } kind;
    int var = 0;
    std::shared_ptr<Gen> l, r;
};

std::shared_ptr<Gen> gen_tree(std::mt19937& rng, int depth) {
    auto g = std::make_shared<Gen>();
    if (depth == 0 || rng() % 3 == 0) {
        g->kind = Gen::atom;
        g->var = static_cast<int>(rng() % 4);
        return g;
    }
    g->kind = rng() % 2 ? Gen::conj : Gen::disj;
    g->l = gen_tree(rng, depth - 1);
    g->r = gen_tree(rng, depth - 1);
    return g;
}

std::string print(const Gen& g) {
    if (g.kind == Gen::atom) return "a" + std::to_string(g.var);
    return "(" + print(*g.l) + (g.kind == Gen::conj ? " AND " : " OR ") + print(*g.r) + ")";
}

bool truth(const Gen& g, unsigned mask) {
    switch (g.kind) {
        case Gen::atom: return (mask >> g.var) & 1u;
        case Gen::conj: return truth(*g.l, mask) && truth(*g.r, mask);
        default: return truth(*g.l, mask) || truth(*g.r, mask);
    }
}

env::Scene with_flags(unsigned mask) {
    env::Scene s;
    for (int v = 0; v < 4; ++v) s.flags["a" + std::to_string(v)] = bool((mask >> v) & 1u);
    return s;
}

}  // namespace

TEST(Parse, ExportEmailExampleTreeShape) {
    auto e = P("(file_exported AND MD5_matches) AND (email_sent == True)");
    ASSERT_EQ(e->kind, Kind::conj);
    ASSERT_EQ(e->left->kind, Kind::conj);
    EXPECT_EQ(e->left->left->kind, Kind::atom);
    EXPECT_EQ(e->left->right->kind, Kind::atom);
    ASSERT_EQ(e->right->kind, Kind::atom);
    EXPECT_EQ(e->right->atom, (eval::Predicate{"flag_equals", {Scalar{std::string("email_sent")}, Scalar{true}}}));
    EXPECT_EQ(e->left->left->atom.name, "flag_equals");
}

TEST(Parse, AndBindsTighterThanOr) {
    auto e = P("a AND b OR c");
    ASSERT_EQ(e->kind, Kind::disj);
    EXPECT_EQ(e->left->kind, Kind::conj);
    EXPECT_TRUE(same(e, P("(a AND b) OR c")));
    EXPECT_TRUE(same(P("a OR b AND c"), P("a OR (b AND c)")));
    EXPECT_FALSE(same(P("a AND (b OR c)"), P("a AND b OR c")));
}

TEST(Parse, UnparenthesizedChainsFollowPrecedence) {
    // Oracle: an OR of AND-runs, evaluated directly on the token list.
    std::mt19937 rng(31);
    for (int n = 0; n < 300; ++n) {
        int len = 1 + static_cast<int>(rng() % 6);
        std::vector<int> vars;
        std::vector<bool> is_and;
        std::string text;
        for (int i = 0; i < len; ++i) {
            vars.push_back(static_cast<int>(rng() % 4));
            if (i) {
                is_and.push_back(rng() % 2);
                text += is_and.back() ? " AND " : " OR ";
            }
            text += "a" + std::to_string(vars.back());
        }
        auto expr = P(text);
        for (unsigned mask = 0; mask < 16; ++mask) {
            bool any = false, run = (mask >> vars[0]) & 1u;
            for (int i = 1; i < len; ++i) {
                bool v = (mask >> vars[i]) & 1u;
                if (is_and[i - 1]) run = run && v;
                else {
                    any = any || run;
                    run = v;
                }
            }
            any = any || run;
            ASSERT_EQ(eval::evaluate(*expr, with_flags(mask)).passed, any) << text << " mask " << mask;
        }
    }
}

TEST(Parse, SyntaxErrors) {
    try {
        P("a AND");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("end of input"), std::string::npos) << e.what();
        EXPECT_EQ(e.where(), "offset 5");
    }
    EXPECT_THROW(P(""), ParseError);
    EXPECT_THROW(P("(a OR b"), ParseError);
    EXPECT_THROW(P("a b"), ParseError);
    EXPECT_THROW(P("nope(1)"), ParseError);
    EXPECT_THROW(P("file_exists()"), ParseError);
    EXPECT_THROW(P("file_exists(\"/a\", 2)"), ParseError);
    EXPECT_THROW(P("x == "), ParseError);
    EXPECT_THROW(P("file_exists(\"/a)"), ParseError);
}

TEST(Parse, PrintReparsesStructurallyEqual) {
    std::mt19937 rng(32);
    for (int n = 0; n < 500; ++n) {
        auto g = gen_tree(rng, 4);
        auto e = P(print(*g));
        auto again = P(eval::to_string(*e));
        EXPECT_TRUE(same(e, again)) << eval::to_string(*e);
    }
    auto mixed = P("file_hash_matches(\"/out/a b.txt\", \"00ff\") OR element_state(cb, \"checked\", 2.5) AND x == -3");
    EXPECT_TRUE(same(mixed, P(eval::to_string(*mixed))));
}

TEST(Evaluate, TruthTableOracleUpToFourAtoms) {
    std::mt19937 rng(33);
    for (int n = 0; n < 400; ++n) {
        auto g = gen_tree(rng, 3);
        auto e = P(print(*g));
        for (unsigned mask = 0; mask < 16; ++mask) {
            auto v = eval::evaluate(*e, with_flags(mask));
            ASSERT_EQ(v.passed, truth(*g, mask)) << print(*g) << " mask " << mask;
            std::vector<eval::Predicate> atoms;
            eval::collect_atoms(*e, atoms);
            // Eager: every atom instance has a recorded result.
            for (const auto& a : atoms) ASSERT_TRUE(v.atom_results.count(eval::to_string(a)));
        }
    }
}

TEST(Evaluate, TrueAndFalseIsFalse) {
    env::Scene s;
    s.flags["t"] = true;
    s.flags["f"] = false;
    auto v = eval::evaluate(*P("t AND f"), s);
    EXPECT_FALSE(v.passed);
    EXPECT_EQ(v.atom_results.size(), 2u);
    EXPECT_TRUE(v.flagged.empty());
}

TEST(Evaluate, MissingReferencesAreFalseAndFlagged) {
    env::Scene s;
    auto v = eval::evaluate(*P("ghost OR element_state(nope, \"checked\", true)"), s);
    EXPECT_FALSE(v.passed);
    EXPECT_EQ(v.flagged.size(), 2u);
}

TEST(Evaluate, Deterministic) {
    auto task = harness::load_task_file(std::string(MGA_SCENARIO_DIR) + "/daily_flight_miles.json");
    auto s = env::load_scene(task.scene_doc);
    auto a = eval::to_json(eval::evaluate(*P(task.eval), s));
    auto b = eval::to_json(eval::evaluate(*P(task.eval), s));
    EXPECT_EQ(a, b);
}

TEST(Predicates, Catalog) {
    auto names = eval::core_registry().names();
    EXPECT_EQ(std::set<std::string>(names.begin(), names.end()),
              (std::set<std::string>{"file_exists", "file_hash_matches", "file_contains", "element_exists", "element_state",
                                     "element_text", "flag_equals", "window_open", "no_modal", "focus_is", "element_count",
                                     "inventory_contains"}));
    eval::Registry r = eval::register_core_predicates();
    EXPECT_THROW(r.add("no_modal", 0, nullptr), Error);
}

TEST(Predicates, FilesAndHashes) {
    env::Scene s;
    s.fs.write("/out/a.csv", "hello");
    auto passes = [&](const std::string& e) { return eval::evaluate(*P(e), s).passed; };
    EXPECT_TRUE(passes("file_exists(\"/out/a.csv\")"));
    EXPECT_FALSE(passes("file_exists(\"/out/b.csv\")"));
    // Reference digests of "hello", computed outside the library.
    EXPECT_TRUE(passes("file_hash_matches(\"/out/a.csv\", \"5d41402abc4b2a76b9719d911017c592\")"));
    EXPECT_TRUE(passes(
        "file_hash_matches(\"/out/a.csv\", \"2CF24DBA5FB0A30E26E83B2AC5B9E29E1B161E5C1FA7425E73043362938B9824\")"));
    EXPECT_FALSE(passes("file_hash_matches(\"/out/a.csv\", \"00000000000000000000000000000000\")"));
    EXPECT_TRUE(passes("file_contains(\"/out/a.csv\", \"ell\")"));
    EXPECT_FALSE(passes("file_contains(\"/out/a.csv\", \"xyz\")"));
}

TEST(Predicates, SceneState) {
    auto cb = make("cb", {10, 10, 20, 20}, Role::checkbox, "Miles", true);
    cb.state["checked"] = true;
    auto field = make("f", {10, 40, 100, 20}, Role::text_field, "Title", true);
    field.state["text"] = std::string("Q3 Summary");
    auto dlg = make("dlg", {200, 100, 100, 100}, Role::dialog, "Save As");
    auto s = scene_of({cb, field, dlg});
    s.flags["email_sent"] = true;
    s.focus = "f";
    auto passes = [&](const std::string& e) { return eval::evaluate(*P(e), s).passed; };
    EXPECT_TRUE(passes("element_state(cb, \"checked\", true)"));
    EXPECT_FALSE(passes("element_state(cb, \"checked\", false)"));
    EXPECT_TRUE(passes("element_exists(\"f\")"));
    EXPECT_TRUE(passes("element_text(f, \"Q3 Summary\")"));
    EXPECT_TRUE(passes("flag_equals(\"email_sent\", true)"));
    EXPECT_TRUE(passes("email_sent == True"));
    EXPECT_TRUE(passes("window_open(\"save as\")"));
    EXPECT_TRUE(passes("no_modal()"));
    EXPECT_TRUE(passes("focus_is(f)"));
    EXPECT_TRUE(passes("element_count(\"checkbox\", 1)"));
    EXPECT_TRUE(passes("inventory_contains(\"Miles\")"));
    s.modal_stack = {"dlg"};
    EXPECT_FALSE(passes("no_modal()"));
}

TEST(Predicates, InventoryUsesSuppliedObservation) {
    auto s = scene_of({make("b", {10, 10, 20, 20}, Role::button, "Go", true)});
    auto expr = P("inventory_contains(\"go\")");
    obs::Observation empty;
    EXPECT_TRUE(eval::evaluate(*expr, eval::EvalContext{s, nullptr}).passed);
    EXPECT_FALSE(eval::evaluate(*expr, eval::EvalContext{s, &empty}).passed);
}
