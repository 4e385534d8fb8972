#include <gtest/gtest.h>

#include "minileak/taxonomy.hpp"
#include "support.hpp"

using namespace minileak;
using minileak::testing::chain;

namespace {

std::vector<std::pair<SourceKind, SensitiveCategory>> hits(const MemberChain& c, const Taxonomy& t,
                                                           ChainSite site = ChainSite::Read) {
    std::vector<std::pair<SourceKind, SensitiveCategory>> out;
    for (const auto& m : match_source(c, t, site)) out.emplace_back(m.spec->kind, m.category);
    return out;
}

using Hits = std::vector<std::pair<SourceKind, SensitiveCategory>>;

} // namespace

TEST(Builtin, LexiconLookups) {
    const auto t = builtin_taxonomy();
    const auto x = match_source("xing", t);
    ASSERT_EQ(x.size(), 1u);
    EXPECT_EQ(x[0].spec->kind, SourceKind::IDENT_HEURISTIC);
    EXPECT_EQ(x[0].category, SensitiveCategory::SURNAME);
    EXPECT_TRUE(match_source("zzz", t).empty());
    EXPECT_EQ(match_source("EMAIL", t).at(0).category, SensitiveCategory::EMAIL);
}

TEST(Builtin, ContextGate) {
    const auto t = builtin_taxonomy();
    EXPECT_TRUE(match_source("date", t, false).empty());
    EXPECT_TRUE(match_source("hour", t, false).empty());
    EXPECT_EQ(match_source("date", t, true).at(0).category, SensitiveCategory::BIRTHDATE);
    EXPECT_EQ(match_source("minute", t, true).at(0).category, SensitiveCategory::BIRTH_TIME);
    EXPECT_FALSE(match_source("birthday", t, false).empty());
}

TEST(Builtin, GlobalStateReads) {
    const auto t = builtin_taxonomy();
    EXPECT_EQ(hits(chain("getApp().globalData.openid"), t),
              (Hits{{SourceKind::GLOBAL_STATE_READ, SensitiveCategory::OPENID}}));
    EXPECT_EQ(hits(chain("getApp().globalData.userInfo.nickName"), t),
              (Hits{{SourceKind::GLOBAL_STATE_READ, SensitiveCategory::NICKNAME}}));
    EXPECT_EQ(hits(chain("getApp().globalData.userInfo.avatarUrl"), t),
              (Hits{{SourceKind::GLOBAL_STATE_READ, SensitiveCategory::AVATAR}}));
}

TEST(Builtin, FormInputUsesLexicon) {
    const auto t = builtin_taxonomy();
    EXPECT_EQ(hits(chain("e.detail.value.email"), t), (Hits{{SourceKind::FORM_INPUT, SensitiveCategory::EMAIL}}));
    EXPECT_EQ(hits(chain("e.detail.value.xing"), t), (Hits{{SourceKind::FORM_INPUT, SensitiveCategory::SURNAME}}));
    EXPECT_TRUE(hits(chain("e.detail.value.remark"), t).empty());
}

TEST(Builtin, ApiCallsMatchCallees) {
    const auto t = builtin_taxonomy();
    EXPECT_EQ(hits(chain("wx.getLocation"), t, ChainSite::Callee), (Hits{{SourceKind::API_CALL, SensitiveCategory::LOCATION}}));
    EXPECT_EQ(hits(chain("wx.chooseAddress"), t, ChainSite::Callee), (Hits{{SourceKind::API_CALL, SensitiveCategory::ADDRESS}}));
    EXPECT_EQ(hits(chain("wx.login"), t, ChainSite::Callee), (Hits{{SourceKind::API_CALL, SensitiveCategory::OPENID}}));
    EXPECT_EQ(hits(chain("wx.requestPayment"), t, ChainSite::Callee), (Hits{{SourceKind::API_CALL, SensitiveCategory::PAYMENT}}));
    EXPECT_EQ(hits(chain("wx.getUserInfo"), t, ChainSite::Callee).size(), 2u);
    EXPECT_TRUE(hits(chain("wx.login"), t, ChainSite::Read).empty());
}

TEST(Builtin, Sinks) {
    const auto t = builtin_taxonomy();
    const auto* g = match_sink(chain("getApp().globalData.curUser"), t, ChainSite::Read);
    ASSERT_NE(g, nullptr);
    EXPECT_EQ(g->kind, SinkKind::GLOBAL_STATE_WRITE);
    EXPECT_EQ(g->disposition, Disposition::STORED_GLOBAL);
    const auto* r = match_sink(chain("wx.request"), t, ChainSite::Callee);
    ASSERT_NE(r, nullptr);
    EXPECT_EQ(r->kind, SinkKind::NETWORK);
    EXPECT_EQ(match_sink(chain("wx.uploadFile"), t, ChainSite::Callee)->kind, SinkKind::NETWORK);
    EXPECT_EQ(match_sink(chain("wx.setStorageSync"), t, ChainSite::Callee)->kind, SinkKind::STORAGE);
    EXPECT_EQ(match_sink(chain("wx.navigateTo"), t, ChainSite::Callee)->kind, SinkKind::NAV_PARAM);
    EXPECT_EQ(match_sink(chain("wx.request"), t, ChainSite::Read), nullptr);
    EXPECT_EQ(match_sink(chain("wx.showToast"), t, ChainSite::Callee), nullptr);
}

TEST(Builtin, NoDuplicateSources) {
    const auto t = builtin_taxonomy();
    std::set<std::tuple<SourceKind, std::string, SensitiveCategory>> seen;
    for (const auto& s : t.sources) {
        EXPECT_TRUE(seen.insert({s.kind, s.pattern, s.category}).second) << s.pattern;
        EXPECT_GE(s.base_confidence, 0.0);
        EXPECT_LE(s.base_confidence, 1.0);
    }
}

TEST(Builtin, ResultCategoriesReachable) {
    const auto t = builtin_taxonomy();
    for (auto lex : {"xing", "ming", "sex", "birthday", "email", "wechat", "nickname"})
        EXPECT_FALSE(match_source(lex, t).empty()) << lex;
}

TEST(Overrides, AddRemoveAndVersion) {
    const auto base = builtin_taxonomy();
    const auto t = apply_overrides("# extra\nsource IDENT_HEURISTIC surname SURNAME\nremove source API_CALL wx.login\n", base);
    EXPECT_EQ(t.version, base.version + 1);
    EXPECT_EQ(match_source("surname", t).at(0).category, SensitiveCategory::SURNAME);
    EXPECT_TRUE(hits(chain("wx.login"), t, ChainSite::Callee).empty());
    EXPECT_FALSE(hits(chain("wx.login"), base, ChainSite::Callee).empty());
}

TEST(Overrides, MergeByKindAndPattern) {
    const auto t = apply_overrides("source IDENT_HEURISTIC email EMAIL 0.3\nsink NETWORK wx.request NAV_EXPOSED\n",
                                   builtin_taxonomy());
    const auto m = match_source("email", t);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_DOUBLE_EQ(m[0].spec->base_confidence, 0.3);
    EXPECT_EQ(match_sink(chain("wx.request"), t, ChainSite::Callee)->disposition, Disposition::NAV_EXPOSED);
    EXPECT_EQ(t.sinks.size(), builtin_taxonomy().sinks.size());
}

TEST(Overrides, ParseErrorsCarryLineNumbers) {
    const std::pair<const char*, std::size_t> cases[] = {
        {"source IDENT_HEURISTIC x", 1},
        {"\n\nsource BOGUS x EMAIL", 3},
        {"source IDENT_HEURISTIC x EMAIL 1.5", 1},
        {"# ok\nsink NETWORK a..b TRANSMITTED", 2},
        {"frobnicate", 1},
        {"remove thing API_CALL wx.login", 1},
        {"source API_CALL wx.x NOT_A_CATEGORY", 1},
    };
    for (const auto& [text, line] : cases) {
        try {
            apply_overrides(text, builtin_taxonomy());
            FAIL() << text;
        } catch (const OverrideParseError& e) {
            EXPECT_EQ(e.code(), ErrorCode::OverrideParse);
            EXPECT_EQ(e.line(), line) << text;
        }
    }
}

TEST(Overrides, LoadFromFile) {
    minileak::testing::TempDir d;
    minileak::testing::write_file(d / "t.txt", "source IDENT_HEURISTIC qq WECHAT_ID\n");
    const auto t = load_overrides(d / "t.txt", builtin_taxonomy());
    EXPECT_EQ(match_source("qq", t).at(0).category, SensitiveCategory::WECHAT_ID);
    EXPECT_THROW(load_overrides(d / "missing.txt", builtin_taxonomy()), OverrideParseError);
}

TEST(Overrides, SequentialEqualsPremerged) {
    const std::string a = "source IDENT_HEURISTIC surname SURNAME\nremove source API_CALL wx.login\n";
    const std::string b = "source API_CALL wx.login OPENID 0.5\nremove source IDENT_HEURISTIC tel\nsink STORAGE my.save STORED_LOCAL\n";
    const auto seq = apply_overrides(b, apply_overrides(a, builtin_taxonomy()));
    const auto once = apply_overrides(a + b, builtin_taxonomy());
    const std::vector<MemberChain> probes = {chain("wx.login"), chain("e.detail.value.surname"), chain("e.detail.value.tel"),
                                             chain("my.save"), chain("getApp().globalData.openid")};
    for (const auto& p : probes) {
        for (auto site : {ChainSite::Read, ChainSite::Callee}) {
            auto x = match_source(p, seq, site), y = match_source(p, once, site);
            ASSERT_EQ(x.size(), y.size()) << p.render();
            for (std::size_t i = 0; i < x.size(); ++i) {
                EXPECT_EQ(x[i].category, y[i].category);
                EXPECT_EQ(x[i].spec->kind, y[i].spec->kind);
                EXPECT_EQ(x[i].spec->base_confidence, y[i].spec->base_confidence);
            }
            const auto* s1 = match_sink(p, seq, site);
            const auto* s2 = match_sink(p, once, site);
            EXPECT_EQ(s1 == nullptr, s2 == nullptr);
            if (s1 && s2) {
                EXPECT_EQ(s1->disposition, s2->disposition);
            }
        }
    }
}

TEST(Overrides, TextRoundTrip) {
    const auto t = builtin_taxonomy();
    Taxonomy empty;
    empty.version = 0;
    const auto back = apply_overrides(to_override_text(t), empty);
    ASSERT_EQ(back.sources.size(), t.sources.size());
    ASSERT_EQ(back.sinks.size(), t.sinks.size());
    for (std::size_t i = 0; i < t.sources.size(); ++i) {
        EXPECT_EQ(back.sources[i].pattern, t.sources[i].pattern);
        EXPECT_EQ(back.sources[i].category, t.sources[i].category);
    }
}

TEST(Matching, DeterministicOrder) {
    const auto t = builtin_taxonomy();
    const auto c = chain("getApp().globalData.userInfo.nickName");
    EXPECT_EQ(hits(c, t), hits(c, t));
}
