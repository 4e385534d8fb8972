#include <gtest/gtest.h>

#include <random>

#include "minileak/lexer.hpp"
#include "support.hpp"

using namespace minileak;

namespace {

std::vector<std::pair<TokenKind, std::string>> kinds(const std::vector<Token>& toks) {
    std::vector<std::pair<TokenKind, std::string>> out;
    for (const auto& t : toks) out.emplace_back(t.kind, t.lexeme);
    return out;
}

} // namespace

TEST(Tokenize, SmallestStatement) {
    const auto toks = tokenize("var xing = '';");
    using K = TokenKind;
    EXPECT_EQ(kinds(toks), (std::vector<std::pair<K, std::string>>{
                               {K::KEYWORD, "var"}, {K::IDENT, "xing"}, {K::PUNCT, "="}, {K::STRING, "''"}, {K::PUNCT, ";"}}));
    EXPECT_EQ(toks[1].line, 1u);
    EXPECT_EQ(toks[1].col, 5u);
}

TEST(Tokenize, SwitchTabChain) {
    const auto toks = tokenize("wx.switchTab({url: '../my/index'})");
    ASSERT_GE(toks.size(), 3u);
    EXPECT_EQ(toks[0].lexeme, "wx");
    EXPECT_EQ(toks[1].lexeme, ".");
    EXPECT_EQ(toks[2].lexeme, "switchTab");
    const bool has_url = std::any_of(toks.begin(), toks.end(), [](const Token& t) {
        return t.kind == TokenKind::STRING && t.lexeme == "'../my/index'";
    });
    EXPECT_TRUE(has_url);
}

TEST(Tokenize, CommentsAndNewlinesRetained) {
    const auto toks = tokenize("a // note\n/* block\n */ b");
    std::size_t comments = 0, newlines = 0;
    for (const auto& t : toks) {
        comments += t.kind == TokenKind::COMMENT;
        newlines += t.kind == TokenKind::NEWLINE;
    }
    EXPECT_EQ(comments, 2u);
    EXPECT_GE(newlines, 1u);
    EXPECT_EQ(toks.back().lexeme, "b");
    EXPECT_EQ(toks.back().line, 3u);
}

TEST(Tokenize, UnterminatedInputsAreTotal) {
    for (std::string_view s : {"'abc", "/* open", "\"x\\", "`tpl ${a", "\x01\x02", "0x", "a.b.", "\xff"}) {
        const auto toks = tokenize(s);
        EXPECT_TRUE(reconstructs(toks, s)) << s;
    }
}

TEST(Tokenize, BaziRoundTrip) {
    const auto src = minileak::testing::bazi_script();
    const auto toks = tokenize(src.text);
    EXPECT_TRUE(reconstructs(toks, src.text));
    for (const auto& t : toks) {
        ASSERT_GE(t.line, 1u);
        EXPECT_EQ(src.line_of(t.offset), t.line) << t.lexeme;
    }
}

TEST(Tokenize, LosslessOnRandomBytes) {
    std::mt19937 rng(20240611);
    const std::string alphabet = "abcxyz_$019 \t\n\r'\"`\\/*.+-=(){}[];:,<>!?&|\xe5\xa7\x93";
    for (int i = 0; i < 10000; ++i) {
        const auto len = rng() % 64;
        std::string s;
        for (std::size_t k = 0; k < len; ++k) {
            if (rng() % 8 == 0) s.push_back(static_cast<char>(rng() % 256));
            else s.push_back(alphabet[rng() % alphabet.size()]);
        }
        ASSERT_TRUE(reconstructs(tokenize(s), s)) << "case " << i;
    }
}
