#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "minileak/common.hpp"
#include "minileak/ingest.hpp"
#include "minileak/lexer.hpp"
#include "minileak/markup.hpp"
#include "minileak/parser.hpp"
#include "minileak/script_model.hpp"
#include "minileak/taxonomy.hpp"

namespace minileak {

/// A reviewable location. `holder` names the variable or object that carries
/// taint after this step (empty when not applicable).
struct Evidence {
    std::string file;
    std::size_t line = 1;
    std::string snippet;
    std::string holder;
    bool operator==(const Evidence&) const = default;
};

inline constexpr std::size_t kMaxSnippet = 160;

inline Evidence make_evidence(const SourceFile& file, std::size_t line, std::string holder = {}) {
    const auto text = trim(file.line_text(line));
    return Evidence{file.path, line, std::string(utf8_truncate(text, kMaxSnippet)), std::move(holder)};
}

struct Finding {
    std::string id;
    SensitiveCategory category = SensitiveCategory::OTHER_PII;
    Evidence source;
    std::optional<Evidence> sink;
    std::vector<Evidence> flow;
    Disposition disposition = Disposition::COLLECTED;
    double confidence = 0.0;
    Detector detector = Detector::RULE;
    bool corroborated = false;
    std::vector<std::string> notes;
    bool operator==(const Finding&) const = default;
};

inline std::string finding_id(std::string_view file, SensitiveCategory category, std::size_t source_line,
                              Disposition disposition, Detector detector) {
    std::string key(file);
    key += '\x1f';
    key += to_string(category);
    key += '\x1f';
    key += std::to_string(source_line);
    key += '\x1f';
    key += to_string(disposition);
    key += '\x1f';
    key += to_string(detector);
    return sha256_hex(key).substr(0, 16);
}

inline void assign_id(Finding& f) {
    f.id = finding_id(f.source.file, f.category, f.source.line, f.disposition, f.detector);
}

/// Canonical order: (file, source line, category, detector), then disposition and id.
inline bool finding_less(const Finding& a, const Finding& b) {
    if (a.source.file != b.source.file) return a.source.file < b.source.file;
    if (a.source.line != b.source.line) return a.source.line < b.source.line;
    if (a.category != b.category) return a.category < b.category;
    if (a.detector != b.detector) return a.detector < b.detector;
    if (a.disposition != b.disposition) return a.disposition < b.disposition;
    return a.id < b.id;
}

/// Sorts canonically and keeps one finding per id (highest confidence wins).
inline void canonicalize(std::vector<Finding>& findings) {
    std::stable_sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        if (a.id != b.id) return a.id < b.id;
        return a.confidence > b.confidence;
    });
    findings.erase(std::unique(findings.begin(), findings.end(),
                               [](const Finding& a, const Finding& b) { return a.id == b.id; }),
                   findings.end());
    std::sort(findings.begin(), findings.end(), finding_less);
}

// ---------------------------------------------------------------------------
// Dataflow state
// ---------------------------------------------------------------------------

/// One category carried by one holder; `flow.front()` is the origin.
struct TaintFact {
    std::string holder;
    SensitiveCategory category = SensitiveCategory::OTHER_PII;
    double confidence = 0.0;
    SourceKind source_kind = SourceKind::IDENT_HEURISTIC;
    std::vector<Evidence> flow;

    const Evidence& origin() const { return flow.front(); }
    bool operator==(const TaintFact&) const = default;
};

using FactSet = std::map<std::string, std::vector<TaintFact>>;

namespace detail {

inline bool same_origin(const TaintFact& a, const TaintFact& b) {
    return a.category == b.category && a.source_kind == b.source_kind && a.origin().file == b.origin().file &&
           a.origin().line == b.origin().line;
}

inline void add_fact(std::vector<TaintFact>& into, TaintFact fact) {
    for (const auto& f : into)
        if (same_origin(f, fact)) return;
    into.push_back(std::move(fact));
}

inline void append_step(std::vector<Evidence>& flow, const Evidence& step) {
    if (!flow.empty() && flow.back().line == step.line && flow.back().file == step.file && flow.back().holder.empty()) {
        flow.back().holder = step.holder;
        return;
    }
    flow.push_back(step);
}

} // namespace detail

inline FactSet merge_facts(const FactSet& a, const FactSet& b) {
    FactSet out = a;
    for (const auto& [holder, facts] : b)
        for (const auto& f : facts) detail::add_fact(out[holder], f);
    return out;
}

/// Names that scope the interpretation of chains inside one function.
struct FlowEnv {
    const SourceFile* file = nullptr;
    const PageRegistration* registration = nullptr;
    bool gate_open = true;
    std::set<std::string> defined;      // locals and caller-bound params
    std::set<std::string> this_aliases; // `var self = this`
    std::set<std::string> app_aliases;  // `var app = getApp()`
    std::vector<std::string> form_fields; // named inputs when walking a form submit handler
};

/// `self.x` → `this.x`, `app.globalData` → `getApp().globalData`, `this.data.k` → `data.k`.
inline MemberChain canonical_chain(const MemberChain& chain, const FlowEnv& env) {
    if (chain.empty()) return chain;
    MemberChain c = chain;
    auto& root = c.segments.front();
    if (!root.is_call && env.this_aliases.count(root.name)) root.name = "this";
    if (!root.is_call && env.app_aliases.count(root.name)) {
        root.name = "getApp";
        root.is_call = true;
    }
    if (c.segments.size() >= 2 && c.segments[0].name == "this" && !c.segments[0].is_call && c.segments[1].name == "data")
        c.segments.erase(c.segments.begin());
    return c;
}

/// Holder written by an assignment to `target`: the variable itself, or the
/// enclosing object for field writes (field-insensitive).
inline std::string assign_holder(const MemberChain& canon_target) {
    if (canon_target.segments.size() == 1) return canon_target.render();
    return canon_target.prefix(canon_target.segments.size() - 1).render();
}

inline std::string call_holder(const MemberChain& canon_callee) { return canon_callee.render() + "()"; }

inline bool is_this_like(const std::string& name, const FlowEnv& env) {
    return name == "this" || env.this_aliases.count(name) > 0;
}

/// `this.F`, `self.F` or bare `F` naming a function of the registration.
inline const FunctionModel* resolve_callee(const MemberChain& callee, const PageRegistration& reg, const FlowEnv& env) {
    const auto& s = callee.segments;
    if (s.size() == 2 && !s[0].is_call && is_this_like(s[0].name, env) && !s[1].is_index)
        return reg.find_function(s[1].name);
    if (s.size() == 1 && !s[0].is_index && !env.defined.count(s[0].name)) return reg.find_function(s[0].name);
    return nullptr;
}

struct SinkHit {
    const SinkSpec* spec = nullptr;
    std::string holder;
    std::vector<TaintFact> taints;
    Span span;
};

struct NestedFunction {
    std::shared_ptr<const FunctionModel> fn;
    std::vector<TaintFact> param_taint; // applied to every parameter
};

struct EvalResult {
    std::vector<TaintFact> taints;  // value taint (holder unset)
    std::vector<TaintFact> sources; // structural source hits (COLLECTED candidates)
    std::vector<SinkHit> sinks;     // call sinks reached inside the expression
    std::vector<NestedFunction> nested;

    void absorb(EvalResult&& o, bool take_value = true) {
        if (take_value)
            for (auto& t : o.taints) detail::add_fact(taints, std::move(t));
        for (auto& s : o.sources) sources.push_back(std::move(s));
        for (auto& s : o.sinks) sinks.push_back(std::move(s));
        for (auto& n : o.nested) nested.push_back(std::move(n));
    }
};

namespace detail {

inline EvalResult eval_expr(const Expr& e, const FactSet& facts, const Taxonomy& tax, const FlowEnv& env);

inline Evidence evidence_at(const FlowEnv& env, std::size_t line, std::string holder = {}) {
    if (env.file) return make_evidence(*env.file, line, std::move(holder));
    return Evidence{"", line, "", std::move(holder)};
}

inline TaintFact source_fact(const SourceMatch& m, const FlowEnv& env, std::size_t line) {
    TaintFact f;
    f.category = m.category;
    f.confidence = m.spec->base_confidence;
    f.source_kind = m.spec->kind;
    f.flow.push_back(evidence_at(env, line));
    return f;
}

inline EvalResult eval_call(const MemberChain& raw_callee, const std::vector<Expr>& args, const Span& span,
                            const FactSet& facts, const Taxonomy& tax, const FlowEnv& env) {
    EvalResult r;
    const auto callee = canonical_chain(raw_callee, env);
    std::vector<TaintFact> arg_taint;
    std::vector<std::shared_ptr<const FunctionModel>> callbacks;
    for (const auto& a : args) {
        if (const auto* fl = a.as<FunctionLit>()) {
            callbacks.push_back(fl->fn);
            continue;
        }
        if (const auto* obj = a.as<ObjectLit>()) {
            for (const auto& [key, value] : obj->entries) {
                if (const auto* fl = value.as<FunctionLit>()) {
                    callbacks.push_back(fl->fn);
                    continue;
                }
                auto sub = eval_expr(value, facts, tax, env);
                for (const auto& t : sub.taints) add_fact(arg_taint, t);
                r.absorb(std::move(sub), false);
            }
            continue;
        }
        auto sub = eval_expr(a, facts, tax, env);
        for (const auto& t : sub.taints) add_fact(arg_taint, t);
        r.absorb(std::move(sub), false);
    }
    for (const auto& t : arg_taint) add_fact(r.taints, t);

    if (callee.segments.size() > 1) {
        Expr receiver{callee.prefix(callee.segments.size() - 1), raw_callee.span};
        r.absorb(eval_expr(receiver, facts, tax, env));
    }
    // Values previously passed to the same callee (pseudo-holder).
    if (auto it = facts.find(call_holder(callee)); it != facts.end())
        for (const auto& t : it->second) add_fact(r.taints, t);

    std::vector<TaintFact> api_taint;
    for (const auto& m : match_source(callee, tax, ChainSite::Callee, env.gate_open)) {
        auto f = source_fact(m, env, span.line);
        r.sources.push_back(f);
        add_fact(api_taint, f);
        add_fact(r.taints, f);
    }
    for (auto& cb : callbacks) r.nested.push_back(NestedFunction{cb, api_taint});

    if (const auto* sink = match_sink(callee, tax, ChainSite::Callee)) {
        if (!arg_taint.empty()) r.sinks.push_back(SinkHit{sink, call_holder(callee), arg_taint, span});
    }
    return r;
}

inline EvalResult eval_chain(const MemberChain& raw, const Span& span, const FactSet& facts, const Taxonomy& tax,
                             const FlowEnv& env) {
    EvalResult r;
    const auto chain = canonical_chain(raw, env);
    if (chain.empty()) return r;
    for (std::size_t k = 1; k <= chain.segments.size(); ++k) {
        if (auto it = facts.find(chain.prefix(k).render()); it != facts.end())
            for (const auto& t : it->second) add_fact(r.taints, t);
    }
    // Calls in the middle of the chain are call sites in their own right.
    for (std::size_t k = 0; k + 1 < chain.segments.size(); ++k) {
        if (!chain.segments[k].is_call) continue;
        auto callee = chain.prefix(k + 1);
        callee.segments.back().is_call = false;
        const auto call_args = chain.segments[k].args;
        callee.segments.back().args.clear();
        r.absorb(eval_call(callee, call_args, span, facts, tax, env));
    }
    bool structural = false;
    // `e.detail.value` in a submit handler carries every named input of the form.
    if (!env.form_fields.empty() && chain.segments.size() == 3 && chain.segments[1].name == "detail" &&
        chain.segments[2].name == "value" &&
        std::none_of(chain.segments.begin(), chain.segments.end(), [](const ChainSegment& s) { return s.is_call; })) {
        const auto spec = std::find_if(tax.sources.begin(), tax.sources.end(),
                                       [](const SourceSpec& s) { return s.kind == SourceKind::FORM_INPUT; });
        if (spec != tax.sources.end()) {
            for (const auto& field : env.form_fields) {
                for (const auto* h : tax.lookup_lexeme(field, env.gate_open)) {
                    structural = true;
                    auto f = source_fact(SourceMatch{&*spec, h->category}, env, span.line);
                    r.sources.push_back(f);
                    add_fact(r.taints, std::move(f));
                }
            }
        }
    }
    const bool derived = std::any_of(chain.segments.begin(), chain.segments.end() - 1,
                                     [](const ChainSegment& s) { return s.is_call && s.name != "getApp"; });
    if (!derived) {
        for (const auto& m : match_source(chain, tax, ChainSite::Read, env.gate_open)) {
            if (m.spec->kind == SourceKind::IDENT_HEURISTIC) continue;
            structural = true;
            auto f = source_fact(m, env, span.line);
            r.sources.push_back(f);
            add_fact(r.taints, std::move(f));
        }
    }
    // Identifier heuristic on values whose origin is outside this function.
    const auto& root = chain.segments.front();
    const bool local = !root.is_call && env.defined.count(root.name) > 0;
    if (r.taints.empty() && !structural && !local && !derived) {
        if (auto lex = lexeme_of(chain)) {
            for (const auto* h : tax.lookup_lexeme(*lex, env.gate_open)) {
                TaintFact f;
                f.category = h->category;
                f.confidence = h->base_confidence;
                f.source_kind = SourceKind::IDENT_HEURISTIC;
                f.flow.push_back(evidence_at(env, span.line));
                add_fact(r.taints, std::move(f));
            }
        }
    }
    return r;
}

inline EvalResult eval_expr(const Expr& e, const FactSet& facts, const Taxonomy& tax, const FlowEnv& env) {
    EvalResult r;
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, MemberChain>) {
                r = eval_chain(node, e.span, facts, tax, env);
            } else if constexpr (std::is_same_v<T, CallExpr>) {
                r = eval_call(node.callee, node.args, e.span, facts, tax, env);
            } else if constexpr (std::is_same_v<T, Concat>) {
                for (const auto& p : node.parts) r.absorb(eval_expr(p, facts, tax, env));
            } else if constexpr (std::is_same_v<T, ObjectLit>) {
                for (const auto& [k, v] : node.entries) {
                    if (const auto* fl = std::get_if<FunctionLit>(&v.node)) {
                        r.nested.push_back(NestedFunction{fl->fn, {}});
                        continue;
                    }
                    r.absorb(eval_expr(v, facts, tax, env));
                }
            } else if constexpr (std::is_same_v<T, FunctionLit>) {
                r.nested.push_back(NestedFunction{node.fn, {}});
            }
        },
        e.node);
    return r;
}

inline std::vector<TaintFact> with_step(std::vector<TaintFact> taints, const Evidence& step) {
    for (auto& t : taints) {
        t.holder = step.holder;
        append_step(t.flow, step);
    }
    return taints;
}

} // namespace detail

/// Evaluates the value side of an action (no state change).
inline EvalResult evaluate_action(const Action& action, const FactSet& facts, const Taxonomy& tax, const FlowEnv& env) {
    if (const auto* a = action.as<Assign>()) return detail::eval_expr(a->value, facts, tax, env);
    if (const auto* c = action.as<Call>()) return detail::eval_call(c->callee, c->args, action.span, facts, tax, env);
    if (const auto* r = action.as<Return>()) return detail::eval_expr(r->value, facts, tax, env);
    return {};
}

inline void update_env(FlowEnv& env, const Action& action) {
    if (const auto* a = action.as<Assign>()) {
        if (a->target.segments.size() == 1) {
            const auto& name = a->target.root();
            env.defined.insert(name);
            if (const auto* c = a->value.as<MemberChain>(); c && c->segments.size() == 1 && c->root() == "this")
                env.this_aliases.insert(name);
            if (const auto* c = a->value.as<CallExpr>();
                c && c->callee.segments.size() == 1 && c->callee.root() == "getApp" && c->args.empty())
                env.app_aliases.insert(name);
        }
    } else if (const auto* b = action.as<Branch>()) {
        for (const auto& x : b->then_arm) update_env(env, x);
        for (const auto& x : b->else_arm) update_env(env, x);
    }
}

/// Transfer function for one action. Strong update on simple variables, weak
/// (union) update on object fields, union over both arms of a branch.
/// A call to a function of `env.registration` binds `Callee::param` holders.
inline FactSet propagate(const FactSet& facts, const Action& action, const Taxonomy& tax, const FlowEnv& env = {}) {
    FactSet out = facts;
    if (const auto* br = action.as<Branch>()) {
        auto run_arm = [&](const std::vector<Action>& arm) {
            FactSet f = facts;
            FlowEnv e = env;
            for (const auto& a : arm) {
                f = propagate(f, a, tax, e);
                update_env(e, a);
            }
            return f;
        };
        return merge_facts(run_arm(br->then_arm), run_arm(br->else_arm));
    }
    if (const auto* as = action.as<Assign>()) {
        const auto target = canonical_chain(as->target, env);
        auto r = detail::eval_expr(as->value, facts, tax, env);
        const auto holder = assign_holder(target);
        auto taints = detail::with_step(std::move(r.taints), detail::evidence_at(env, action.span.line, holder));
        if (target.segments.size() == 1) {
            if (taints.empty()) out.erase(holder);
            else out[holder] = std::move(taints);
        } else if (!taints.empty()) {
            for (auto& t : taints) detail::add_fact(out[holder], std::move(t));
        }
        return out;
    }
    if (const auto* call = action.as<Call>()) {
        const auto callee = canonical_chain(call->callee, env);
        auto r = detail::eval_call(call->callee, call->args, action.span, facts, tax, env);
        const auto holder = call_holder(callee);
        if (!r.taints.empty())
            for (auto& t : detail::with_step(r.taints, detail::evidence_at(env, action.span.line, holder)))
                detail::add_fact(out[holder], std::move(t));
        const auto& segs = callee.segments;
        if (segs.size() >= 2 && !segs.front().is_call && segs.front().name != "this" &&
            env.defined.count(segs.front().name)) {
            // Mutating method on a local object, e.g. `list.push(x)`.
            const auto recv = callee.prefix(segs.size() - 1).render();
            std::vector<TaintFact> arg_taint;
            for (const auto& a : call->args)
                for (auto& t : detail::eval_expr(a, facts, tax, env).taints) detail::add_fact(arg_taint, std::move(t));
            if (!arg_taint.empty())
                for (auto& t : detail::with_step(std::move(arg_taint), detail::evidence_at(env, action.span.line, recv)))
                    detail::add_fact(out[recv], std::move(t));
        }
        if (env.registration) {
            if (const auto* fn = resolve_callee(call->callee, *env.registration, env)) {
                for (std::size_t i = 0; i < fn->params.size() && i < call->args.size(); ++i) {
                    const auto holder_name = fn->name + "::" + fn->params[i];
                    auto taints = detail::with_step(detail::eval_expr(call->args[i], facts, tax, env).taints,
                                                    detail::evidence_at(env, action.span.line, holder_name));
                    if (taints.empty()) out.erase(holder_name);
                    else out[holder_name] = std::move(taints);
                }
            }
        }
        return out;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Intra-registration call graph
// ---------------------------------------------------------------------------

struct CallEdge {
    std::string caller;
    std::string callee;
    std::vector<std::pair<std::string, std::size_t>> bindings; // param -> argument index
    std::size_t line = 0;
    bool operator==(const CallEdge&) const = default;
};

struct UnresolvedCall {
    std::string caller;
    std::string callee;
    std::size_t line = 0;
    bool operator==(const UnresolvedCall&) const = default;
};

struct CallGraph {
    std::vector<CallEdge> edges;
    std::vector<UnresolvedCall> unresolved;

    bool has_edge(std::string_view from, std::string_view to) const {
        return std::any_of(edges.begin(), edges.end(), [&](const CallEdge& e) { return e.caller == from && e.callee == to; });
    }
};

namespace detail {

inline void collect_calls(const std::string& caller, const std::vector<Action>& actions, const PageRegistration& reg,
                          FlowEnv env, CallGraph& graph) {
    auto visit_expr_fns = [&](const Expr& e, auto&& self) -> void {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, FunctionLit>) {
                    collect_calls(caller, node.fn->actions, reg, env, graph);
                } else if constexpr (std::is_same_v<T, ObjectLit>) {
                    for (const auto& [k, v] : node.entries) self(v, self);
                } else if constexpr (std::is_same_v<T, CallExpr>) {
                    for (const auto& a : node.args) self(a, self);
                } else if constexpr (std::is_same_v<T, Concat>) {
                    for (const auto& p : node.parts) self(p, self);
                }
            },
            e.node);
    };
    for (const auto& a : actions) {
        if (const auto* br = a.as<Branch>()) {
            collect_calls(caller, br->then_arm, reg, env, graph);
            collect_calls(caller, br->else_arm, reg, env, graph);
        } else if (const auto* call = a.as<Call>()) {
            if (const auto* fn = resolve_callee(call->callee, reg, env)) {
                CallEdge edge{caller, fn->name, {}, a.span.line};
                for (std::size_t i = 0; i < fn->params.size() && i < call->args.size(); ++i)
                    edge.bindings.emplace_back(fn->params[i], i);
                graph.edges.push_back(std::move(edge));
            } else if (!call->callee.segments.empty() && is_this_like(call->callee.root(), env)) {
                graph.unresolved.push_back({caller, call->callee.render(), a.span.line});
            }
            for (const auto& arg : call->args) visit_expr_fns(arg, visit_expr_fns);
        } else if (const auto* as = a.as<Assign>()) {
            visit_expr_fns(as->value, visit_expr_fns);
        }
        update_env(env, a);
    }
}

} // namespace detail

inline CallGraph resolve_intra_calls(const PageRegistration& reg) {
    CallGraph g;
    for (const auto& fn : reg.functions) {
        FlowEnv env;
        env.registration = &reg;
        detail::collect_calls(fn.name, fn.actions, reg, env, g);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Page analysis
// ---------------------------------------------------------------------------

/// True when the registration mentions a name or gender lexeme, which opens
/// the birth-date/time gate for `date`, `time`, `hour`, `minute`.
inline bool birth_context(const PageRegistration& reg, const std::vector<Token>& tokens, const Taxonomy& tax) {
    for (const auto& t : tokens) {
        if (t.offset < reg.span.begin || t.offset >= reg.span.end || t.kind != TokenKind::IDENT) continue;
        for (const auto* h : tax.lookup_lexeme(t.lexeme))
            if (is_context_category(h->category)) return true;
    }
    return false;
}

/// Module-level `var app = getApp()` names (outside any registration).
inline std::set<std::string> top_level_app_aliases(const ScriptModel& model, const std::vector<Token>& tokens) {
    std::vector<const Token*> sig;
    for (const auto& t : tokens)
        if (t.kind != TokenKind::COMMENT && t.kind != TokenKind::NEWLINE) sig.push_back(&t);
    auto inside = [&](const Token& t) {
        return std::any_of(model.registrations.begin(), model.registrations.end(), [&](const PageRegistration& r) {
            return t.offset >= r.span.begin && t.offset < r.span.end;
        });
    };
    std::set<std::string> out;
    for (std::size_t i = 0; i + 5 < sig.size(); ++i) {
        const auto& kw = *sig[i];
        if (kw.kind != TokenKind::KEYWORD || (kw.lexeme != "var" && kw.lexeme != "let" && kw.lexeme != "const")) continue;
        if (inside(kw)) continue;
        if (sig[i + 1]->kind == TokenKind::IDENT && sig[i + 2]->is_punct("=") && sig[i + 3]->lexeme == "getApp" &&
            sig[i + 4]->is_punct("(") && sig[i + 5]->is_punct(")"))
            out.insert(sig[i + 1]->lexeme);
    }
    return out;
}

namespace detail {

class PageWalker {
public:
    PageWalker(const SourceFile& file, const PageRegistration& reg, const ScriptModel& model, const Taxonomy& tax,
               bool gate_open, std::set<std::string> app_aliases, std::vector<Finding>& out)
        : file_(file), reg_(reg), model_(model), tax_(tax), gate_open_(gate_open), app_aliases_(std::move(app_aliases)),
          out_(out) {}

    void run_entry(const FunctionModel& fn, std::vector<std::string> form_fields = {}) {
        FlowEnv env = base_env();
        env.form_fields = std::move(form_fields);
        std::set<std::string> visited{fn.name};
        walk(fn.actions, FactSet{}, env, 0, visited);
    }

private:
    const SourceFile& file_;
    const PageRegistration& reg_;
    const ScriptModel& model_;
    const Taxonomy& tax_;
    bool gate_open_;
    std::set<std::string> app_aliases_;
    std::vector<Finding>& out_;

    FlowEnv base_env() const {
        FlowEnv env;
        env.file = &file_;
        env.registration = &reg_;
        env.gate_open = gate_open_;
        for (const auto& r : model_.requires_) env.defined.insert(r.local_name);
        env.app_aliases = app_aliases_;
        return env;
    }

    void emit(const TaintFact& t, Disposition disp, std::optional<Evidence> sink) {
        Finding f;
        f.category = t.category;
        f.flow = t.flow;
        if (sink) append_step(f.flow, *sink);
        f.source = f.flow.front();
        if (disp != Disposition::COLLECTED) f.sink = f.flow.back();
        f.disposition = disp;
        f.confidence = t.confidence;
        f.detector = Detector::RULE;
        assign_id(f);
        out_.push_back(std::move(f));
    }

    void report(const EvalResult& r) {
        for (const auto& s : r.sources) emit(s, Disposition::COLLECTED, std::nullopt);
        for (const auto& hit : r.sinks)
            for (const auto& t : hit.taints) emit(t, hit.spec->disposition, evidence_at_line(hit.span.line, hit.holder));
    }

    Evidence evidence_at_line(std::size_t line, std::string holder) const { return make_evidence(file_, line, std::move(holder)); }

    void walk_nested(const EvalResult& r, const FactSet& facts, const FlowEnv& env, int depth,
                     std::set<std::string>& visited) {
        for (const auto& n : r.nested) {
            FactSet inner = facts;
            FlowEnv ienv = env;
            for (const auto& p : n.fn->params) {
                ienv.defined.insert(p);
                ienv.this_aliases.erase(p);
                if (n.param_taint.empty()) {
                    inner.erase(p);
                    continue;
                }
                auto taints = n.param_taint;
                for (auto& t : taints) {
                    t.holder = p;
                    append_step(t.flow, evidence_at_line(n.fn->span.line, p));
                }
                inner[p] = std::move(taints);
            }
            walk(n.fn->actions, inner, ienv, depth, visited);
        }
    }

    FactSet walk(const std::vector<Action>& actions, FactSet facts, FlowEnv& env, int depth,
                 std::set<std::string>& visited) {
        for (const auto& action : actions) {
            if (const auto* br = action.as<Branch>()) {
                FlowEnv then_env = env, else_env = env;
                auto a = walk(br->then_arm, facts, then_env, depth, visited);
                auto b = walk(br->else_arm, facts, else_env, depth, visited);
                facts = merge_facts(a, b);
                update_env(env, action);
                continue;
            }
            const auto r = evaluate_action(action, facts, tax_, env);
            report(r);
            if (const auto* as = action.as<Assign>()) {
                const auto target = canonical_chain(as->target, env);
                if (const auto* sink = match_sink(target, tax_, ChainSite::Read)) {
                    const auto step = evidence_at_line(action.span.line, assign_holder(target));
                    for (const auto& t : r.taints) emit(t, sink->disposition, step);
                }
            }
            walk_nested(r, facts, env, depth, visited);

            auto next = propagate(facts, action, tax_, env);
            if (const auto* call = action.as<Call>(); call && depth == 0) {
                if (const auto* fn = resolve_callee(call->callee, reg_, env); fn && !visited.count(fn->name)) {
                    visited.insert(fn->name);
                    FactSet callee_facts;
                    FlowEnv callee_env = base_env();
                    const auto prefix = fn->name + "::";
                    for (const auto& p : fn->params) {
                        callee_env.defined.insert(p);
                        if (auto it = next.find(prefix + p); it != next.end()) {
                            auto taints = it->second;
                            for (auto& t : taints) t.holder = p;
                            callee_facts[p] = std::move(taints);
                        }
                    }
                    walk(fn->actions, callee_facts, callee_env, depth + 1, visited);
                }
            }
            update_env(env, action);
            facts = std::move(next);
        }
        return facts;
    }
};

} // namespace detail

/// Rule-based detector for one page script. Output is canonical (sorted, ids unique).
inline std::vector<Finding> analyze_page(const ScriptModel& model, const SourceFile& script,
                                         const std::vector<MarkupForm>& forms, const Taxonomy& taxonomy) {
    std::vector<Finding> findings;
    const auto tokens = tokenize(script.text);
    const auto app_aliases = top_level_app_aliases(model, tokens);
    for (const auto& reg : model.registrations) {
        const bool gate = birth_context(reg, tokens, taxonomy);
        const auto graph = resolve_intra_calls(reg);
        std::set<std::string> called;
        for (const auto& e : graph.edges)
            if (e.caller != e.callee) called.insert(e.callee);
        std::map<std::string, std::vector<std::string>> submit_handlers;
        for (const auto& f : forms) {
            auto& fields = submit_handlers[f.submit_handler];
            for (const auto& in : f.inputs) fields.push_back(in.name);
        }

        detail::PageWalker walker(script, reg, model, taxonomy, gate, app_aliases, findings);
        std::set<std::string> analyzed;
        for (const auto& fn : reg.functions) {
            const auto handler = submit_handlers.find(fn.name);
            if (called.count(fn.name) && handler == submit_handlers.end()) continue;
            walker.run_entry(fn, handler == submit_handlers.end() ? std::vector<std::string>{} : handler->second);
            analyzed.insert(fn.name);
        }
        // Functions only reachable through cycles still get analyzed.
        for (const auto& fn : reg.functions) {
            const bool reached = std::any_of(graph.edges.begin(), graph.edges.end(), [&](const CallEdge& e) {
                return e.callee == fn.name && analyzed.count(e.caller);
            });
            if (!analyzed.count(fn.name) && !reached) {
                walker.run_entry(fn);
                analyzed.insert(fn.name);
            }
        }
    }
    canonicalize(findings);
    return findings;
}

} // namespace minileak
