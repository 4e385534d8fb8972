#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "flow_replay.hpp"
#include "minileak/eval.hpp"
#include "minileak/ingest.hpp"
#include "minileak/pipeline.hpp"
#include "minileak/ruleflow.hpp"
#include "support.hpp"

using namespace minileak;
using minileak::testing::chain;

namespace {

using C = SensitiveCategory;
using D = Disposition;

struct Analyzed {
    SourceFile file;
    ExtractResult parsed;
    std::vector<Finding> findings;
};

Analyzed analyze_text(const std::string& text, const std::string& markup = {}, const Taxonomy& tax = builtin_taxonomy()) {
    Analyzed a{SourceFile::from_text("pages/t/t.js", text), extract_script_model(text), {}};
    a.findings = analyze_page(a.parsed.model, a.file, extract_markup_forms(markup), tax);
    return a;
}

Analyzed bazi(const Taxonomy& tax = builtin_taxonomy()) {
    const auto root = minileak::testing::bazi_root();
    const auto script = minileak::testing::bazi_script();
    Analyzed a{script, extract_script_model(script.text), {}};
    a.findings = analyze_page(a.parsed.model, a.file,
                              extract_markup_forms(minileak::testing::slurp(root / "pages/input/input.wxml")), tax);
    return a;
}

std::set<std::pair<C, D>> category_dispositions(const std::vector<Finding>& fs) {
    std::set<std::pair<C, D>> out;
    for (const auto& f : fs) out.insert({f.category, f.disposition});
    return out;
}

/// Actions of function `f` in `Page({ f: function (e) { BODY } })`.
struct Body {
    ExtractResult parsed;
    const FunctionModel* fn = nullptr;
};

Body body(const std::string& code) {
    Body b{extract_script_model("Page({ f: function (e) {\n" + code + "\n} })"), nullptr};
    b.fn = b.parsed.model.registrations.at(0).find_function("f");
    return b;
}

TaintFact fact(const std::string& holder, C c) {
    TaintFact t;
    t.holder = holder;
    t.category = c;
    t.confidence = 0.6;
    t.flow.push_back(Evidence{"x.js", 1, "", holder});
    return t;
}

std::set<C> categories_of(const FactSet& fs, const std::string& holder) {
    std::set<C> out;
    if (auto it = fs.find(holder); it != fs.end())
        for (const auto& t : it->second) out.insert(t.category);
    return out;
}

std::vector<PageUnit> all_units() {
    std::vector<PageUnit> units = load_project(minileak::testing::bazi_root()).pages;
    for (const auto& p : discover_corpus(minileak::testing::fixtures() / "corpus")) {
        auto more = load_project(p.root).pages;
        units.insert(units.end(), more.begin(), more.end());
    }
    return units;
}

std::set<std::string> ids_for(const std::vector<PageUnit>& units, const Taxonomy& tax) {
    std::set<std::string> ids;
    for (const auto& u : units)
        for (const auto& f : rule_findings(u, tax)) ids.insert(f.id);
    return ids;
}

} // namespace

TEST(AnalyzePage, BaziCategoriesAndDispositions) {
    const auto a = bazi();
    const auto cd = category_dispositions(a.findings);
    for (auto c : {C::SURNAME, C::GIVEN_NAME, C::GENDER, C::BIRTHDATE, C::BIRTH_TIME, C::EMAIL, C::NICKNAME})
        EXPECT_TRUE(cd.count({c, D::COLLECTED})) << to_string(c);
    EXPECT_TRUE(cd.count({C::OPENID, D::COLLECTED}) || cd.count({C::WECHAT_ID, D::COLLECTED}));
    for (auto c : {C::SURNAME, C::GIVEN_NAME, C::GENDER, C::BIRTHDATE, C::BIRTH_TIME, C::EMAIL})
        EXPECT_TRUE(cd.count({c, D::STORED_GLOBAL})) << to_string(c);
    for (const auto& f : a.findings) {
        EXPECT_EQ(f.detector, Detector::RULE);
        EXPECT_EQ(f.source, f.flow.front());
        if (f.disposition != D::COLLECTED) {
            ASSERT_TRUE(f.sink);
            EXPECT_EQ(f.sink->line, 87u);
            EXPECT_EQ(f.sink->snippet, "getApp().globalData.curUser = curUser;");
        }
    }
}

TEST(AnalyzePage, BaziConfidences) {
    for (const auto& f : bazi().findings) {
        if (f.category == C::NICKNAME || f.category == C::OPENID || f.category == C::WECHAT_ID)
            EXPECT_DOUBLE_EQ(f.confidence, 0.9) << to_string(f.category);
        else
            EXPECT_DOUBLE_EQ(f.confidence, 0.85) << to_string(f.category);
    }
}

TEST(AnalyzePage, SurnameFlowCrossesOneCall) {
    const auto a = bazi();
    const Finding* surname = nullptr;
    for (const auto& f : a.findings)
        if (f.category == C::SURNAME && f.disposition == D::STORED_GLOBAL) surname = &f;
    ASSERT_NE(surname, nullptr);
    std::vector<std::size_t> lines;
    for (const auto& e : surname->flow) lines.push_back(e.line);
    EXPECT_EQ(lines, (std::vector<std::size_t>{54, 69, 78, 87}));
    EXPECT_EQ(surname->flow[1].holder, "updateUser::Xing");
    EXPECT_EQ(surname->source.snippet, "var xing = e.detail.value.xing;");
}

TEST(AnalyzePage, NoSourcesNoFindings) {
    EXPECT_TRUE(analyze_text("var a = 1;").findings.empty());
    EXPECT_TRUE(analyze_text("Page({ f: function () { var a = 1; } })").findings.empty());
}

TEST(AnalyzePage, PhoneToRequest) {
    const auto a = analyze_text("Page({\n  f: function (e) {\n    var p = e.detail.value.phone;\n    wx.request({data: p});\n  }\n})\n");
    ASSERT_EQ(a.findings.size(), 2u);
    const auto& collected = a.findings[0].disposition == D::COLLECTED ? a.findings[0] : a.findings[1];
    const auto& sent = a.findings[0].disposition == D::COLLECTED ? a.findings[1] : a.findings[0];
    EXPECT_EQ(collected.category, C::PHONE);
    EXPECT_EQ(collected.disposition, D::COLLECTED);
    EXPECT_EQ(sent.category, C::PHONE);
    EXPECT_EQ(sent.disposition, D::TRANSMITTED);
    ASSERT_EQ(sent.flow.size(), 2u);
    EXPECT_EQ(sent.flow[0].line, 3u);
    EXPECT_EQ(sent.flow[1].line, 4u);
    EXPECT_EQ(sent.sink->snippet, "wx.request({data: p});");
}

TEST(AnalyzePage, StorageAndNavigationSinks) {
    const auto a = analyze_text(
        "Page({\n  f: function (e) {\n    var m = e.detail.value.mobile;\n    wx.setStorageSync('m', m);\n"
        "    wx.navigateTo({url: '/p?m=' + m});\n  }\n})\n");
    const auto cd = category_dispositions(a.findings);
    EXPECT_TRUE(cd.count({C::PHONE, D::STORED_LOCAL}));
    EXPECT_TRUE(cd.count({C::PHONE, D::NAV_EXPOSED}));
}

TEST(AnalyzePage, StrongUpdateClearsTaint) {
    const auto a = analyze_text(
        "Page({\n  f: function (e) {\n    var p = e.detail.value.phone;\n    p = 'x';\n    wx.request({data: p});\n  }\n})\n");
    for (const auto& f : a.findings) EXPECT_EQ(f.disposition, D::COLLECTED);
}

TEST(AnalyzePage, BranchArmsMerged) {
    const auto a = analyze_text(
        "Page({\n  f: function (e) {\n    var v = '';\n    if (e.x) {\n      v = e.detail.value.email;\n    } else {\n"
        "      v = 'none';\n    }\n    wx.request({data: v});\n  }\n})\n");
    EXPECT_TRUE(category_dispositions(a.findings).count({C::EMAIL, D::TRANSMITTED}));
}

TEST(AnalyzePage, Deterministic) {
    const auto a = bazi().findings;
    const auto b = bazi().findings;
    EXPECT_EQ(a, b);
    std::set<std::string> ids;
    for (const auto& f : a) EXPECT_TRUE(ids.insert(f.id).second);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), finding_less));
}

TEST(AnalyzePage, EvidenceIntegrity) {
    for (const auto& unit : all_units()) {
        for (const auto& f : rule_findings(unit, builtin_taxonomy())) {
            for (const auto& e : f.flow) {
                ASSERT_EQ(e.file, unit.script.path);
                const auto line = unit.script.line_text(e.line);
                EXPECT_FALSE(e.snippet.empty());
                EXPECT_LE(e.snippet.size(), kMaxSnippet);
                EXPECT_NE(line.find(e.snippet), std::string_view::npos) << e.file << ":" << e.line;
            }
            EXPECT_GE(f.confidence, 0.0);
            EXPECT_LE(f.confidence, 1.0);
            EXPECT_EQ(f.disposition != D::COLLECTED, f.sink.has_value());
        }
    }
}

TEST(Propagate, FieldWriteIsWeakUpdateOnObject) {
    const auto b = body("curUser.Xing = xing;");
    ASSERT_EQ(b.fn->actions.size(), 1u);
    FactSet in{{"xing", {fact("xing", C::SURNAME)}}, {"curUser", {fact("curUser", C::EMAIL)}}};
    const auto out = propagate(in, b.fn->actions[0], builtin_taxonomy());
    EXPECT_EQ(categories_of(out, "curUser"), (std::set<C>{C::SURNAME, C::EMAIL}));
    EXPECT_EQ(categories_of(out, "xing"), (std::set<C>{C::SURNAME}));
}

TEST(Propagate, EmptyInStaysEmpty) {
    const auto b = body("var a = b;\nobj.k = v;\nfoo(a, b);\nif (x) { y = z; } else { w = 1; }");
    for (const auto& act : b.fn->actions) EXPECT_TRUE(propagate({}, act, builtin_taxonomy()).empty());
}

TEST(Propagate, SourceIntroducesFact) {
    const auto b = body("var m = e.detail.value.email;");
    const auto out = propagate({}, b.fn->actions.at(0), builtin_taxonomy());
    EXPECT_EQ(categories_of(out, "m"), (std::set<C>{C::EMAIL}));
}

TEST(Propagate, DerivedValueInheritsReceiverTaint) {
    const auto b = body("var hour = t.split(\":\")[0];");
    FactSet in{{"t", {fact("t", C::BIRTH_TIME)}}};
    const auto out = propagate(in, b.fn->actions.at(0), builtin_taxonomy());
    EXPECT_EQ(categories_of(out, "hour"), (std::set<C>{C::BIRTH_TIME}));
}

TEST(Propagate, ConcatPropagatesOperands) {
    const auto b = body("var s = 'a' + t + '';");
    FactSet in{{"t", {fact("t", C::BIRTH_TIME)}}};
    EXPECT_EQ(categories_of(propagate(in, b.fn->actions.at(0), builtin_taxonomy()), "s"), (std::set<C>{C::BIRTH_TIME}));
}

TEST(Propagate, StrongUpdateOnVariable) {
    const auto b = body("x = y;");
    FactSet in{{"x", {fact("x", C::EMAIL)}}, {"y", {fact("y", C::PHONE)}}};
    EXPECT_EQ(categories_of(propagate(in, b.fn->actions.at(0), builtin_taxonomy()), "x"), (std::set<C>{C::PHONE}));
}

TEST(Propagate, BranchUnion) {
    const auto b = body("if (c) { x = a; } else { x = b; }");
    FactSet in{{"a", {fact("a", C::EMAIL)}}, {"b", {fact("b", C::PHONE)}}};
    EXPECT_EQ(categories_of(propagate(in, b.fn->actions.at(0), builtin_taxonomy()), "x"), (std::set<C>{C::EMAIL, C::PHONE}));
}

TEST(Propagate, MonotoneOnUntouchedHolders) {
    std::mt19937 rng(5);
    const auto b = body("var q = 1;\nobj.k = v;\nwx.request({data: v});\nz = 'lit';");
    const std::vector<std::string> holders = {"v", "w", "obj", "other", "z"};
    for (int i = 0; i < 200; ++i) {
        FactSet in;
        for (const auto& h : holders)
            if (rng() % 2) in[h].push_back(fact(h, static_cast<C>(rng() % 17)));
        for (const auto& act : b.fn->actions) {
            const auto out = propagate(in, act, builtin_taxonomy());
            for (const auto& [h, fs] : in) {
                if (h == "z" || h == "q") continue;
                for (const auto& c : categories_of(in, h)) EXPECT_TRUE(categories_of(out, h).count(c)) << h;
            }
        }
    }
}

TEST(CallGraph, BaziEdgeWithNineBindings) {
    const auto a = bazi();
    const auto g = resolve_intra_calls(a.parsed.model.registrations.at(0));
    ASSERT_EQ(g.edges.size(), 1u);
    const auto& e = g.edges[0];
    EXPECT_EQ(e.caller, "formBindsubmit");
    EXPECT_EQ(e.callee, "updateUser");
    EXPECT_EQ(e.line, 69u);
    ASSERT_EQ(e.bindings.size(), 9u);
    const char* params[] = {"Username", "Xing", "Ming", "Sex", "Birthday", "Hour", "Minute", "Wechat", "Email"};
    for (std::size_t i = 0; i < 9; ++i) {
        EXPECT_EQ(e.bindings[i].first, params[i]);
        EXPECT_EQ(e.bindings[i].second, i);
    }
}

TEST(CallGraph, NoCrossCalls) {
    const auto r = extract_script_model("Page({ a: function () { wx.x(); }, b: function () { var q = 1; } })");
    const auto g = resolve_intra_calls(r.model.registrations.at(0));
    EXPECT_TRUE(g.edges.empty());
}

TEST(CallGraph, UnresolvedThisCallsRecorded) {
    const auto r = extract_script_model("Page({ a: function () { this.missing(1); } })");
    const auto g = resolve_intra_calls(r.model.registrations.at(0));
    ASSERT_EQ(g.unresolved.size(), 1u);
    EXPECT_EQ(g.unresolved[0].callee, "this.missing");
}

TEST(CallGraph, MutualRecursionTerminatesAtFixpoint) {
    const std::string src =
        "Page({\n  f: function (x) {\n    this.g(x);\n    wx.request({data: x});\n  },\n"
        "  g: function (y) {\n    this.f(y);\n  },\n"
        "  h: function (e) {\n    var p = e.detail.value.phone;\n    this.f(p);\n  }\n})\n";
    const auto a = analyze_text(src);
    const auto& reg = a.parsed.model.registrations.at(0);
    const auto g = resolve_intra_calls(reg);
    EXPECT_TRUE(g.has_edge("f", "g"));
    EXPECT_TRUE(g.has_edge("g", "f"));
    EXPECT_TRUE(g.has_edge("h", "f"));
    EXPECT_TRUE(category_dispositions(a.findings).count({C::PHONE, D::TRANSMITTED}));

    // Hand iteration: x carries PHONE; through f it binds g::y; through g it binds f::x.
    const auto tax = builtin_taxonomy();
    FlowEnv env;
    env.registration = &reg;
    const auto* f = reg.find_function("f");
    const auto* gf = reg.find_function("g");
    auto run = [&](const FunctionModel& fn, FactSet facts) {
        for (const auto& act : fn.actions) facts = propagate(facts, act, tax, env);
        return facts;
    };
    FactSet x0{{"x", {fact("x", C::PHONE)}}};
    const auto after_f = run(*f, x0);
    EXPECT_EQ(categories_of(after_f, "g::y"), (std::set<C>{C::PHONE}));
    const auto after_g = run(*gf, FactSet{{"y", after_f.at("g::y")}});
    EXPECT_EQ(categories_of(after_g, "f::x"), categories_of(x0, "x"));
    const auto again = run(*f, FactSet{{"x", after_g.at("f::x")}});
    EXPECT_EQ(categories_of(again, "g::y"), categories_of(after_f, "g::y"));
}

TEST(CallGraph, RandomCyclicGraphsTerminate) {
    std::mt19937 rng(11);
    for (int round = 0; round < 100; ++round) {
        const int n = 2 + static_cast<int>(rng() % 6);
        std::string src = "Page({\n";
        for (int i = 0; i < n; ++i) {
            src += "  f" + std::to_string(i) + ": function (a) {\n";
            if (i == 0) src += "    a = e.detail.value.email;\n";
            const int calls = static_cast<int>(rng() % 3) + 1;
            for (int k = 0; k < calls; ++k) src += "    this.f" + std::to_string(rng() % n) + "(a);\n";
            if (rng() % 2) src += "    wx.request({data: a});\n";
            src += "  },\n";
        }
        src += "})\n";
        const auto start = std::chrono::steady_clock::now();
        const auto a = analyze_text(src);
        EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(2)) << src;
        EXPECT_EQ(analyze_text(src).findings, a.findings);
    }
}

TEST(FlowSoundness, BaziFlowsReplay) {
    const auto a = bazi();
    const auto tax = builtin_taxonomy();
    const auto idx = minileak::testing::build_replay_index(a.parsed.model, a.parsed.model.registrations.at(0), a.file, tax);
    std::size_t checked = 0;
    for (const auto& f : a.findings) {
        if (f.disposition == D::COLLECTED) continue;
        ++checked;
        const auto err = minileak::testing::replay_flow(f, idx, tax);
        EXPECT_FALSE(err) << to_string(f.category) << ": " << *err;
    }
    EXPECT_GE(checked, 6u);
}

TEST(FlowSoundness, CorpusFlowsReplay) {
    const auto tax = builtin_taxonomy();
    for (const auto& unit : all_units()) {
        const auto parsed = extract_script_model(unit.script.text);
        const auto findings = rule_findings(unit, tax);
        for (const auto& reg : parsed.model.registrations) {
            const auto idx = minileak::testing::build_replay_index(parsed.model, reg, unit.script, tax);
            for (const auto& f : findings) {
                if (f.disposition == D::COLLECTED) continue;
                if (f.source.line < reg.span.line) continue;
                const auto err = minileak::testing::replay_flow(f, idx, tax);
                EXPECT_FALSE(err) << unit.script.path << " " << to_string(f.category) << ": " << *err;
            }
        }
    }
}

TEST(Monotonicity, TaxonomyGrowthGivesSuperset) {
    const auto units = all_units();
    const auto full = builtin_taxonomy();
    std::vector<std::string> idents;
    for (const auto& u : units)
        for (const auto& t : tokenize(u.script.text))
            if (t.kind == TokenKind::IDENT) idents.push_back(t.lexeme);
    std::mt19937 rng(2024);
    for (int round = 0; round < 200; ++round) {
        Taxonomy t;
        t.version = 1;
        Taxonomy rest;
        for (const auto& s : full.sources) (rng() % 2 ? t : rest).sources.push_back(s);
        for (const auto& s : full.sinks) (rng() % 2 ? t : rest).sinks.push_back(s);
        Taxonomy bigger = t;
        for (const auto& s : rest.sources)
            if (rng() % 2) bigger.sources.push_back(s);
        for (const auto& s : rest.sinks)
            if (rng() % 2) bigger.sinks.push_back(s);
        const int extra = static_cast<int>(rng() % 4);
        for (int k = 0; k < extra; ++k)
            bigger.add_source(SourceKind::IDENT_HEURISTIC, idents[rng() % idents.size()], static_cast<C>(rng() % 17),
                              static_cast<double>(rng() % 101) / 100.0);
        const auto small_ids = ids_for(units, t);
        const auto big_ids = ids_for(units, bigger);
        for (const auto& id : small_ids) ASSERT_TRUE(big_ids.count(id)) << "round " << round << " lost " << id;
    }
}
