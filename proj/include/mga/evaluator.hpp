#pragma once

// Rule-based task evaluation: atomic predicates over the final scene,
// composed with AND/OR.
//
// Grammar (AND binds tighter than OR):
//   expr    := conj ('OR' conj)*
//   conj    := primary ('AND' primary)*
//   primary := '(' expr ')' | atom
//   atom    := NAME '(' [arg (',' arg)*] ')'   registered predicate
//            | NAME '==' literal                 -> flag_equals(NAME, literal)
//            | NAME                              -> flag_equals(NAME, true)
//   arg     := literal | NAME
//   literal := "string" | 'string' | number | true | false | True | False

#include "mga/env.hpp"
#include "mga/observer.hpp"

#include <cmath>
#include <functional>
#include <set>

namespace mga::eval {

struct Predicate {
    std::string name;
    std::vector<Scalar> args;
    friend bool operator==(const Predicate&, const Predicate&) = default;
};

inline std::string to_string(const Predicate& p) {
    std::string out = p.name + "(";
    for (std::size_t i = 0; i < p.args.size(); ++i) out += (i ? ", " : "") + scalar_to_text(p.args[i]);
    return out + ")";
}

struct EvalExpr;
using ExprPtr = std::shared_ptr<const EvalExpr>;

struct EvalExpr {
    enum class Kind { atom, conj, disj };
    Kind kind = Kind::atom;
    Predicate atom;  // kind == atom
    ExprPtr left;    // conj / disj
    ExprPtr right;

    static ExprPtr make_atom(Predicate p) { return std::make_shared<const EvalExpr>(EvalExpr{Kind::atom, std::move(p), {}, {}}); }
    static ExprPtr make_and(ExprPtr l, ExprPtr r) { return std::make_shared<const EvalExpr>(EvalExpr{Kind::conj, {}, std::move(l), std::move(r)}); }
    static ExprPtr make_or(ExprPtr l, ExprPtr r) { return std::make_shared<const EvalExpr>(EvalExpr{Kind::disj, {}, std::move(l), std::move(r)}); }
};

inline bool structurally_equal(const EvalExpr& a, const EvalExpr& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == EvalExpr::Kind::atom) return a.atom == b.atom;
    return structurally_equal(*a.left, *b.left) && structurally_equal(*a.right, *b.right);
}

// Fully parenthesized; parse(to_string(e)) is structurally equal to e.
inline std::string to_string(const EvalExpr& e) {
    switch (e.kind) {
        case EvalExpr::Kind::atom: return to_string(e.atom);
        case EvalExpr::Kind::conj: return "(" + to_string(*e.left) + " AND " + to_string(*e.right) + ")";
        case EvalExpr::Kind::disj: return "(" + to_string(*e.left) + " OR " + to_string(*e.right) + ")";
    }
    return {};
}

inline void collect_atoms(const EvalExpr& e, std::vector<Predicate>& out) {
    if (e.kind == EvalExpr::Kind::atom) {
        out.push_back(e.atom);
        return;
    }
    collect_atoms(*e.left, out);
    collect_atoms(*e.right, out);
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

struct EvalContext {
    const env::Scene& scene;
    const obs::Observation* observation = nullptr;  // computed on demand when absent
};

struct AtomValue {
    bool value = false;
    bool missing = false;  // referenced path/element/key does not exist
};

using PredicateFn = std::function<AtomValue(const EvalContext&, const std::vector<Scalar>&)>;

class Registry {
public:
    struct Entry {
        std::size_t arity;
        PredicateFn fn;
    };

    void add(const std::string& name, std::size_t arity, PredicateFn fn) {
        if (!entries_.emplace(name, Entry{arity, std::move(fn)}).second)
            throw Error("predicate '" + name + "' is already registered");
    }
    const Entry* find(const std::string& name) const {
        auto it = entries_.find(name);
        return it == entries_.end() ? nullptr : &it->second;
    }
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [name, entry] : entries_) out.push_back(name);
        return out;
    }

private:
    std::map<std::string, Entry> entries_;
};

namespace detail {

inline const std::string* as_string(const Scalar& s) { return std::get_if<std::string>(&s); }

inline AtomValue missing() { return {false, true}; }
inline AtomValue result(bool v) { return {v, false}; }

}  // namespace detail

inline Registry register_core_predicates() {
    using namespace detail;
    Registry r;
    auto file = [](const EvalContext& c, const Scalar& path) -> const std::string* {
        const std::string* p = as_string(path);
        if (!p) return nullptr;
        try {
            return c.scene.fs.read(*p);
        } catch (const ParseError&) {
            return nullptr;
        }
    };
    r.add("file_exists", 1, [file](const EvalContext& c, const std::vector<Scalar>& a) {
        return result(file(c, a[0]) != nullptr);
    });
    r.add("file_hash_matches", 2, [file](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* bytes = file(c, a[0]);
        const std::string* hex = as_string(a[1]);
        if (!bytes || !hex) return missing();
        std::string want = normalize_label(*hex);
        if (want.size() == 32) return result(md5_hex(*bytes) == want);
        if (want.size() == 64) return result(sha256_hex(*bytes) == want);
        return missing();
    });
    r.add("file_contains", 2, [file](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* bytes = file(c, a[0]);
        const std::string* text = as_string(a[1]);
        if (!bytes || !text) return missing();
        return result(bytes->find(*text) != std::string::npos);
    });
    r.add("element_exists", 1, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* id = as_string(a[0]);
        return result(id && c.scene.find(*id));
    });
    r.add("element_state", 3, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* id = as_string(a[0]);
        const std::string* key = as_string(a[1]);
        const env::Element* e = id ? c.scene.find(*id) : nullptr;
        if (!e || !key) return missing();
        auto v = e->get(*key);
        if (!v) return missing();
        return result(scalar_equal(*v, a[2]));
    });
    r.add("element_text", 2, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* id = as_string(a[0]);
        const std::string* text = as_string(a[1]);
        const env::Element* e = id ? c.scene.find(*id) : nullptr;
        if (!e || !text) return missing();
        auto v = e->get("text");
        const std::string* actual = v ? std::get_if<std::string>(&*v) : nullptr;
        return result((actual ? *actual : std::string{}) == *text);
    });
    r.add("flag_equals", 2, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* name = as_string(a[0]);
        if (!name) return missing();
        auto it = c.scene.flags.find(*name);
        if (it == c.scene.flags.end()) return missing();
        return result(scalar_equal(it->second, a[1]));
    });
    r.add("window_open", 1, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* label = as_string(a[0]);
        if (!label) return missing();
        std::string want = normalize_label(*label);
        return result(std::any_of(c.scene.elements.begin(), c.scene.elements.end(), [&](const env::Element& e) {
            return e.role == Role::dialog && normalize_label(e.label) == want;
        }));
    });
    r.add("no_modal", 0, [](const EvalContext& c, const std::vector<Scalar>&) {
        return result(c.scene.modal_stack.empty());
    });
    r.add("focus_is", 1, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* id = as_string(a[0]);
        if (!id) return missing();
        return result(c.scene.focus == *id);
    });
    r.add("element_count", 2, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* role_name = as_string(a[0]);
        auto role = role_name ? parse_role(*role_name) : std::nullopt;
        if (!role) return missing();
        auto n = std::count_if(c.scene.elements.begin(), c.scene.elements.end(),
                               [&](const env::Element& e) { return e.role == *role; });
        return result(scalar_equal(Scalar{static_cast<std::int64_t>(n)}, a[1]));
    });
    r.add("inventory_contains", 1, [](const EvalContext& c, const std::vector<Scalar>& a) {
        const std::string* label = as_string(a[0]);
        if (!label) return missing();
        obs::Observation computed;
        const obs::Observation* o = c.observation;
        if (!o) {
            computed = obs::extract(env::render_frame(c.scene, 0));
            o = &computed;
        }
        std::string want = normalize_label(*label);
        return result(std::any_of(o->inventory.begin(), o->inventory.end(), [&](const obs::ActionableEntry& e) {
            return normalize_label(e.label) == want;
        }));
    });
    return r;
}

inline const Registry& core_registry() {
    static const Registry registry = register_core_predicates();
    return registry;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
    enum class Kind { name, string, number, lparen, rparen, comma, eqeq, kw_and, kw_or, end };
    Kind kind;
    std::string text;
    std::size_t pos;
};

inline std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto error = [&](std::size_t at, const std::string& why) {
        return ParseError("offset " + std::to_string(at), why);
    };
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (c == '(') out.push_back({Token::Kind::lparen, "(", i++});
        else if (c == ')') out.push_back({Token::Kind::rparen, ")", i++});
        else if (c == ',') out.push_back({Token::Kind::comma, ",", i++});
        else if (c == '=') {
            if (i + 1 >= s.size() || s[i + 1] != '=') throw error(i, "expected '=='");
            out.push_back({Token::Kind::eqeq, "==", i});
            i += 2;
        } else if (c == '"' || c == '\'') {
            std::string text;
            ++i;
            while (i < s.size() && s[i] != c) {
                if (s[i] == '\\' && i + 1 < s.size()) text.push_back(s[i++]);
                text.push_back(s[i++]);
            }
            if (i >= s.size()) throw error(start, "unterminated string");
            ++i;
            // Escapes follow JSON string rules.
            if (c == '\'') {
                std::string escaped;
                for (std::size_t k = 0; k < text.size(); ++k) {
                    if (text[k] == '\\' && k + 1 < text.size() && text[k + 1] == '\'') continue;
                    if (text[k] == '"') escaped.push_back('\\');
                    escaped.push_back(text[k]);
                }
                text = escaped;
            }
            try {
                text = Json::parse("\"" + text + "\"").get<std::string>();
            } catch (const Json::exception&) {
                throw error(start, "malformed string literal");
            }
            out.push_back({Token::Kind::string, text, start});
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
            ++i;
            while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
            std::string text(s.substr(start, i - start));
            if (text == "-") throw error(start, "expected a number");
            out.push_back({Token::Kind::number, text, start});
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == '.')) ++i;
            std::string text(s.substr(start, i - start));
            if (text == "AND" || text == "and") out.push_back({Token::Kind::kw_and, text, start});
            else if (text == "OR" || text == "or") out.push_back({Token::Kind::kw_or, text, start});
            else out.push_back({Token::Kind::name, text, start});
        } else {
            throw error(i, std::string("unexpected character '") + c + "'");
        }
    }
    out.push_back({Token::Kind::end, "", s.size()});
    return out;
}

class Parser {
public:
    Parser(std::vector<Token> tokens, const Registry& registry) : tokens_(std::move(tokens)), registry_(registry) {}

    ExprPtr parse() {
        ExprPtr e = expr();
        if (peek().kind != Token::Kind::end) throw error(peek(), "unexpected '" + peek().text + "'");
        return e;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_++]; }
    static ParseError error(const Token& t, const std::string& why) {
        if (t.kind == Token::Kind::end)
            return ParseError("offset " + std::to_string(t.pos), why == "" ? "unexpected end of input" : why + " at end of input");
        return ParseError("offset " + std::to_string(t.pos), why);
    }

    ExprPtr expr() {
        ExprPtr left = conj();
        while (peek().kind == Token::Kind::kw_or) {
            next();
            left = EvalExpr::make_or(left, conj());
        }
        return left;
    }
    ExprPtr conj() {
        ExprPtr left = primary();
        while (peek().kind == Token::Kind::kw_and) {
            next();
            left = EvalExpr::make_and(left, primary());
        }
        return left;
    }
    ExprPtr primary() {
        if (peek().kind == Token::Kind::lparen) {
            next();
            ExprPtr inner = expr();
            if (peek().kind != Token::Kind::rparen) throw error(peek(), "expected ')'");
            next();
            return inner;
        }
        if (peek().kind != Token::Kind::name) throw error(peek(), "expected a predicate");
        const Token name = next();
        if (peek().kind == Token::Kind::lparen) {
            next();
            std::vector<Scalar> args;
            if (peek().kind != Token::Kind::rparen) {
                args.push_back(argument());
                while (peek().kind == Token::Kind::comma) {
                    next();
                    args.push_back(argument());
                }
            }
            if (peek().kind != Token::Kind::rparen) throw error(peek(), "expected ')' or ','");
            next();
            const Registry::Entry* entry = registry_.find(name.text);
            if (!entry) throw error(name, "unknown predicate '" + name.text + "'");
            if (entry->arity != args.size())
                throw error(name, "predicate '" + name.text + "' takes " + std::to_string(entry->arity) +
                                      " argument(s), got " + std::to_string(args.size()));
            return EvalExpr::make_atom({name.text, std::move(args)});
        }
        Scalar value{true};
        if (peek().kind == Token::Kind::eqeq) {
            next();
            value = literal();
        }
        return EvalExpr::make_atom({"flag_equals", {Scalar{name.text}, value}});
    }

    Scalar argument() {
        if (peek().kind == Token::Kind::name && !is_bool(peek().text)) return Scalar{next().text};
        return literal();
    }

    static bool is_bool(const std::string& s) { return s == "true" || s == "True" || s == "false" || s == "False"; }

    Scalar literal() {
        const Token& t = peek();
        switch (t.kind) {
            case Token::Kind::string: next(); return Scalar{t.text};
            case Token::Kind::number: {
                next();
                if (t.text.find('.') != std::string::npos) {
                    try {
                        std::size_t used = 0;
                        double d = std::stod(t.text, &used);
                        if (used == t.text.size()) return Scalar{d};
                    } catch (const std::exception&) {
                    }
                    throw error(t, "malformed number '" + t.text + "'");
                }
                try {
                    return Scalar{static_cast<std::int64_t>(std::stoll(t.text))};
                } catch (const std::exception&) {
                    throw error(t, "malformed number '" + t.text + "'");
                }
            }
            case Token::Kind::name:
                if (is_bool(t.text)) {
                    next();
                    return Scalar{t.text == "true" || t.text == "True"};
                }
                [[fallthrough]];
            default:
                throw error(t, "expected a literal");
        }
    }

    std::vector<Token> tokens_;
    const Registry& registry_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline ExprPtr parse_expr(std::string_view text, const Registry& registry = core_registry()) {
    return detail::Parser(detail::tokenize(text), registry).parse();
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct Verdict {
    bool passed = false;
    std::map<std::string, bool> atom_results;  // predicate instance -> truth
    std::set<std::string> flagged;             // instances whose references were missing
};

inline bool combine(const EvalExpr& e, const std::map<std::string, bool>& atoms) {
    switch (e.kind) {
        case EvalExpr::Kind::atom: return atoms.at(to_string(e.atom));
        case EvalExpr::Kind::conj: return combine(*e.left, atoms) && combine(*e.right, atoms);
        case EvalExpr::Kind::disj: return combine(*e.left, atoms) || combine(*e.right, atoms);
    }
    return false;
}

// Every atom is evaluated (no short-circuit) so the verdict is total.
inline Verdict evaluate(const EvalExpr& expr, const EvalContext& ctx, const Registry& registry = core_registry()) {
    std::vector<Predicate> atoms;
    collect_atoms(expr, atoms);
    Verdict v;
    for (const auto& atom : atoms) {
        const std::string key = to_string(atom);
        const Registry::Entry* entry = registry.find(atom.name);
        AtomValue value = entry && entry->arity == atom.args.size() ? entry->fn(ctx, atom.args) : AtomValue{false, true};
        v.atom_results[key] = value.value;
        if (value.missing) v.flagged.insert(key);
    }
    v.passed = combine(expr, v.atom_results);
    return v;
}

inline Verdict evaluate(const EvalExpr& expr, const env::Scene& final_scene) {
    return evaluate(expr, EvalContext{final_scene, nullptr});
}

inline Json to_json(const Verdict& v) {
    Json atoms = Json::object();
    for (const auto& [k, b] : v.atom_results) atoms[k] = b;
    return {{"passed", v.passed}, {"atom_results", atoms}, {"flagged", v.flagged}};
}

}  // namespace mga::eval
