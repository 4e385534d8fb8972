#include <gtest/gtest.h>

#include <random>

#include "minileak/parser.hpp"
#include "support.hpp"

using namespace minileak;

namespace {

void collect_expr(const Expr& e, std::vector<MemberChain>& out);

void collect_chain(const MemberChain& c, std::vector<MemberChain>& out) {
    out.push_back(c);
    for (const auto& s : c.segments)
        for (const auto& a : s.args) collect_expr(a, out);
}

void collect_actions(const std::vector<Action>& actions, std::vector<MemberChain>& out);

void collect_expr(const Expr& e, std::vector<MemberChain>& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, MemberChain>) collect_chain(n, out);
            else if constexpr (std::is_same_v<T, Concat>)
                for (const auto& p : n.parts) collect_expr(p, out);
            else if constexpr (std::is_same_v<T, CallExpr>) {
                collect_chain(n.callee, out);
                for (const auto& a : n.args) collect_expr(a, out);
            } else if constexpr (std::is_same_v<T, ObjectLit>)
                for (const auto& [k, v] : n.entries) collect_expr(v, out);
            else if constexpr (std::is_same_v<T, FunctionLit>)
                collect_actions(n.fn->actions, out);
        },
        e.node);
}

void collect_actions(const std::vector<Action>& actions, std::vector<MemberChain>& out) {
    for (const auto& a : actions) {
        if (const auto* as = a.as<Assign>()) {
            collect_chain(as->target, out);
            collect_expr(as->value, out);
        } else if (const auto* c = a.as<Call>()) {
            collect_chain(c->callee, out);
            for (const auto& x : c->args) collect_expr(x, out);
        } else if (const auto* r = a.as<Return>()) {
            collect_expr(r->value, out);
        } else if (const auto* b = a.as<Branch>()) {
            collect_actions(b->then_arm, out);
            collect_actions(b->else_arm, out);
        }
    }
}

const Call* find_call(const std::vector<Action>& actions, std::string_view rendered) {
    for (const auto& a : actions) {
        if (const auto* c = a.as<Call>(); c && c->callee.render() == rendered) return c;
        if (const auto* b = a.as<Branch>()) {
            if (auto* x = find_call(b->then_arm, rendered)) return x;
            if (auto* x = find_call(b->else_arm, rendered)) return x;
        }
    }
    return nullptr;
}

void check_spans(const std::vector<Action>& actions, const Span& body) {
    std::size_t prev = 0;
    for (const auto& a : actions) {
        EXPECT_TRUE(body.contains(a.span)) << a.span.line;
        EXPECT_GE(a.span.begin, prev);
        prev = a.span.begin;
        if (const auto* b = a.as<Branch>()) {
            check_spans(b->then_arm, a.span);
            check_spans(b->else_arm, a.span);
        }
    }
}

ExtractResult bazi() { return extract_script_model(minileak::testing::bazi_script().text); }

} // namespace

TEST(ExtractScriptModel, BaziRegistration) {
    const auto r = bazi();
    EXPECT_FALSE(r.no_registration);
    ASSERT_EQ(r.model.registrations.size(), 1u);
    const auto& reg = r.model.registrations[0];
    EXPECT_EQ(reg.kind, RegistrationKind::PAGE);
    EXPECT_EQ(reg.span.line, 3u);
    for (auto f : {"items", "date", "time", "xing", "ming", "sex", "hiddenToast", "loadingHidden"})
        EXPECT_TRUE(reg.data_fields.count(f)) << f;
    for (auto f : {"bindDateChange", "bindTimeChange", "xingInputEvent", "mingInputEvent", "formBindsubmit", "updateUser"})
        EXPECT_NE(reg.find_function(f), nullptr) << f;
    ASSERT_EQ(r.model.requires_.size(), 2u);
    EXPECT_EQ(r.model.requires_[0].local_name, "CurBazi");
    EXPECT_EQ(r.model.requires_[0].module_path, "../../utils/curBazi.js");
}

TEST(ExtractScriptModel, UpdateUserCallHasNineArgs) {
    const auto r = bazi();
    const auto* fn = r.model.registrations[0].find_function("formBindsubmit");
    ASSERT_NE(fn, nullptr);
    const auto* call = find_call(fn->actions, "self.updateUser");
    ASSERT_NE(call, nullptr);
    ASSERT_EQ(call->args.size(), 9u);
    const char* names[] = {"username", "xing", "ming", "sex", "birthday", "hour", "minute", "wechat", "email"};
    for (std::size_t i = 0; i < 9; ++i) {
        const auto* c = call->args[i].as<MemberChain>();
        ASSERT_NE(c, nullptr);
        EXPECT_EQ(c->render(), names[i]);
    }
    const auto* upd = r.model.registrations[0].find_function("updateUser");
    ASSERT_NE(upd, nullptr);
    EXPECT_EQ(upd->params.size(), 9u);
}

TEST(ExtractScriptModel, ZeroGapsInBaziHandlers) {
    const auto r = bazi();
    for (auto name : {"formBindsubmit", "updateUser"}) {
        const auto* fn = r.model.registrations[0].find_function(name);
        ASSERT_NE(fn, nullptr);
        EXPECT_TRUE(gaps_within(r, *fn).empty()) << name;
        EXPECT_TRUE(fn->gaps.empty()) << name;
    }
}

TEST(ExtractScriptModel, SetDataBecomesDataAssign) {
    const auto r = bazi();
    const auto* fn = r.model.registrations[0].find_function("xingInputEvent");
    ASSERT_NE(fn, nullptr);
    ASSERT_EQ(fn->actions.size(), 1u);
    const auto* as = fn->actions[0].as<Assign>();
    ASSERT_NE(as, nullptr);
    EXPECT_EQ(as->target.render(), "data.xing");
    ASSERT_NE(as->value.as<MemberChain>(), nullptr);
    EXPECT_EQ(as->value.as<MemberChain>()->render(), "e.detail.value");
}

TEST(ExtractScriptModel, ConcatAndDerivedValues) {
    const auto r = bazi();
    const auto* fn = r.model.registrations[0].find_function("formBindsubmit");
    std::vector<MemberChain> chains;
    collect_actions(fn->actions, chains);
    bool saw_time = false, saw_split = false;
    for (const auto& c : chains) {
        saw_time |= c.render() == "e.detail.value.time";
        saw_split |= c.render().rfind("times.split()", 0) == 0;
    }
    EXPECT_TRUE(saw_time);
    EXPECT_TRUE(saw_split);
}

TEST(ExtractScriptModel, ActionsOrderedAndInsideBodies) {
    const auto r = bazi();
    for (const auto& fn : r.model.registrations[0].functions) {
        EXPECT_TRUE(fn.span.contains(fn.body_span)) << fn.name;
        check_spans(fn.actions, fn.body_span);
        for (const auto& g : fn.gaps) EXPECT_TRUE(fn.body_span.contains(g.span));
    }
}

TEST(ExtractScriptModel, EmptyFile) {
    const auto r = extract_script_model(std::string_view{});
    EXPECT_TRUE(r.no_registration);
    EXPECT_TRUE(r.model.registrations.empty());
    EXPECT_TRUE(r.gaps.empty());
}

TEST(ExtractScriptModel, UnsupportedStatementsBecomeGaps) {
    const auto r = extract_script_model("Page({\n  f: function () {\n    var a = 1;\n    for (;;) { a++ }\n    wx.x(a);\n  }\n})\n");
    ASSERT_EQ(r.model.registrations.size(), 1u);
    const auto* fn = r.model.registrations[0].find_function("f");
    ASSERT_NE(fn, nullptr);
    EXPECT_FALSE(gaps_within(r, *fn).empty());
    EXPECT_NE(find_call(fn->actions, "wx.x"), nullptr);
}

TEST(ExtractScriptModel, Deterministic) {
    EXPECT_EQ(bazi().model, bazi().model);
}

TEST(ExtractScriptModel, TotalOnRandomInput) {
    std::mt19937 rng(99);
    const std::string pieces[] = {"Page({", "App({", "})", "{", "}", "(", ")", "f: function (e) {", "var x = ",
                                  "e.detail.value.a", ";", "\n", "if (", "else", "wx.request(", ",", "this.setData({",
                                  "'s'", "1", "+", "=>", "return ", ":", "."};
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const int n = static_cast<int>(rng() % 40);
        for (int k = 0; k < n; ++k) s += pieces[rng() % std::size(pieces)];
        EXPECT_NO_THROW(extract_script_model(s)) << s;
    }
}

TEST(ChainMatches, Examples) {
    const auto nick = MemberChain{{{"getApp", true, false, {}}, {"globalData", false, false, {}},
                                   {"userInfo", false, false, {}}, {"nickName", false, false, {}}},
                                  {}};
    EXPECT_TRUE(chain_matches(nick, "getApp().globalData.userInfo.nickName"));
    EXPECT_TRUE(chain_matches(nick, "getApp().globalData.userInfo.**"));
    EXPECT_FALSE(chain_matches(nick, "getApp.globalData.userInfo.nickName"));
    const auto openid = MemberChain{{{"getApp", true, false, {}}, {"globalData", false, false, {}},
                                     {"openid", false, false, {}}},
                                    {}};
    EXPECT_FALSE(chain_matches(openid, "getApp().globalData.userInfo.**"));
    EXPECT_TRUE(chain_matches(MemberChain::of({"e", "detail", "value", "xing"}), "e.detail.value.*"));
    EXPECT_FALSE(chain_matches(MemberChain::of({"e", "detail", "value"}), "e.detail.value.*"));
    EXPECT_TRUE(chain_matches(MemberChain::of({"e", "detail", "value"}), "e.detail.value.**"));
}

TEST(ChainMatches, PatternSyntax) {
    for (auto bad : {"", "a..b", "**.a", "a.()", "a.b-c", "."}) {
        try {
            ChainPattern::parse(bad);
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::PatternSyntax);
        }
    }
}

TEST(ChainMatches, ExactlySixFormReadsInBazi) {
    const auto r = bazi();
    std::vector<MemberChain> chains;
    for (const auto& fn : r.model.registrations[0].functions) collect_actions(fn.actions, chains);
    std::set<std::size_t> lines;
    std::size_t hits = 0;
    for (const auto& c : chains) {
        if (!chain_matches(c, "e.detail.value.*")) continue;
        ++hits;
        lines.insert(c.span.line);
    }
    EXPECT_EQ(hits, 6u);
    EXPECT_EQ(lines, (std::set<std::size_t>{54, 55, 56, 64, 67, 68}));
}

TEST(MemberChain, RenderReproducesSource) {
    const auto r = extract_script_model("Page({ f: function () { var u = getApp().globalData.userInfo.nickName; } })");
    const auto* fn = r.model.registrations[0].find_function("f");
    ASSERT_NE(fn, nullptr);
    const auto* as = fn->actions.at(0).as<Assign>();
    ASSERT_NE(as, nullptr);
    EXPECT_EQ(as->value.as<MemberChain>()->render(), "getApp().globalData.userInfo.nickName");
}
