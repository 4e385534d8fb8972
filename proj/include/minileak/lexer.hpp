#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace minileak {

enum class TokenKind : std::uint8_t { IDENT, STRING, NUMBER, PUNCT, KEYWORD, COMMENT, NEWLINE };

inline std::string_view to_string(TokenKind k) {
    switch (k) {
    case TokenKind::IDENT: return "IDENT";
    case TokenKind::STRING: return "STRING";
    case TokenKind::NUMBER: return "NUMBER";
    case TokenKind::PUNCT: return "PUNCT";
    case TokenKind::KEYWORD: return "KEYWORD";
    case TokenKind::COMMENT: return "COMMENT";
    case TokenKind::NEWLINE: return "NEWLINE";
    }
    return "PUNCT";
}

struct Token {
    TokenKind kind = TokenKind::PUNCT;
    std::string lexeme;
    std::size_t line = 1; // 1-based
    std::size_t col = 1;  // 1-based, in bytes
    std::size_t offset = 0;

    std::size_t end() const { return offset + lexeme.size(); }
    bool is(TokenKind k, std::string_view text) const { return kind == k && lexeme == text; }
    bool is_punct(std::string_view text) const { return is(TokenKind::PUNCT, text); }
};

namespace detail {

inline constexpr std::string_view kKeywords[] = {
    "break",  "case",   "catch",    "class",      "const",  "continue", "debugger", "default", "delete",
    "do",     "else",   "export",   "extends",    "finally", "for",     "function", "if",      "import",
    "in",     "instanceof", "let",  "new",        "return", "super",    "switch",   "this",    "throw",
    "try",    "typeof", "var",      "void",       "while",  "with",     "yield",    "async",   "await",
    "true",   "false",  "null",     "undefined",  "of",     "static",
};

inline bool is_keyword(std::string_view s) {
    for (auto k : kKeywords)
        if (k == s) return true;
    return false;
}

inline bool is_inline_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }
inline bool is_ident_start(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$' || c >= 0x80;
}
inline bool is_ident_part(unsigned char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Longest first.
inline constexpr std::string_view kPuncts[] = {
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "?\?=",
    "=>", "==", "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "**", "<<", ">>",
    "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", ".",
};

} // namespace detail

/// Lossless tokenizer for the mini-app script dialect. Inline whitespace is
/// skipped (and recoverable from offsets); newlines and comments are tokens.
/// Never fails: a byte that starts no token becomes a one-byte PUNCT.
inline std::vector<Token> tokenize(std::string_view text) {
    using namespace detail;
    std::vector<Token> out;
    std::size_t i = 0, line = 1, line_start = 0;
    const auto n = text.size();

    auto emit = [&](TokenKind kind, std::size_t begin, std::size_t end) {
        out.push_back(Token{kind, std::string(text.substr(begin, end - begin)), line, begin - line_start + 1, begin});
        // Multi-line tokens (block comments, template strings) advance the line counter.
        for (std::size_t k = begin; k < end; ++k) {
            if (text[k] == '\n' && kind != TokenKind::NEWLINE) {
                ++line;
                line_start = k + 1;
            }
        }
    };

    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_inline_space(static_cast<char>(c))) {
            ++i;
            continue;
        }
        if (c == '\n') {
            emit(TokenKind::NEWLINE, i, i + 1);
            ++i;
            ++line;
            line_start = i;
            continue;
        }
        if (c == '/' && i + 1 < n && text[i + 1] == '/') {
            auto j = text.find('\n', i);
            if (j == std::string_view::npos) j = n;
            emit(TokenKind::COMMENT, i, j);
            i = j;
            continue;
        }
        if (c == '/' && i + 1 < n && text[i + 1] == '*') {
            auto j = text.find("*/", i + 2);
            j = j == std::string_view::npos ? n : j + 2;
            emit(TokenKind::COMMENT, i, j);
            i = j;
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') {
            std::size_t j = i + 1;
            while (j < n) {
                const char d = text[j];
                if (d == '\\' && j + 1 < n) {
                    // Line continuations are fine; the escaped byte is consumed.
                    if (text[j + 1] == '\n' && c != '`') break;
                    j += 2;
                    continue;
                }
                if (d == static_cast<char>(c)) {
                    ++j;
                    break;
                }
                if (d == '\n' && c != '`') break; // unterminated: stop before the newline
                ++j;
            }
            emit(TokenKind::STRING, i, j);
            i = j;
            continue;
        }
        if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(static_cast<unsigned char>(text[i + 1])))) {
            std::size_t j = i;
            if (c == '0' && j + 1 < n && (text[j + 1] == 'x' || text[j + 1] == 'X' || text[j + 1] == 'b' ||
                                          text[j + 1] == 'B' || text[j + 1] == 'o' || text[j + 1] == 'O')) {
                j += 2;
                while (j < n && (std::isxdigit(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
            } else {
                while (j < n && (is_digit(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
                if (j < n && text[j] == '.') {
                    ++j;
                    while (j < n && is_digit(static_cast<unsigned char>(text[j]))) ++j;
                }
                if (j < n && (text[j] == 'e' || text[j] == 'E')) {
                    std::size_t k = j + 1;
                    if (k < n && (text[k] == '+' || text[k] == '-')) ++k;
                    if (k < n && is_digit(static_cast<unsigned char>(text[k]))) {
                        j = k;
                        while (j < n && is_digit(static_cast<unsigned char>(text[j]))) ++j;
                    }
                }
            }
            if (j < n && text[j] == 'n') ++j; // BigInt suffix
            emit(TokenKind::NUMBER, i, j);
            i = j;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < n && is_ident_part(static_cast<unsigned char>(text[j]))) ++j;
            const auto word = text.substr(i, j - i);
            emit(is_keyword(word) ? TokenKind::KEYWORD : TokenKind::IDENT, i, j);
            i = j;
            continue;
        }
        bool matched = false;
        for (auto p : kPuncts) {
            if (text.substr(i, p.size()) == p) {
                emit(TokenKind::PUNCT, i, i + p.size());
                i += p.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        // Any other byte (single-char operators, control bytes) is a one-byte PUNCT.
        emit(TokenKind::PUNCT, i, i + 1);
        ++i;
    }
    return out;
}

/// Rebuilds the source from tokens, filling gaps from `text`. Returns false
/// when a gap holds anything but inline whitespace or a lexeme disagrees.
inline bool reconstructs(const std::vector<Token>& tokens, std::string_view text) {
    std::string rebuilt;
    std::size_t pos = 0;
    for (const auto& t : tokens) {
        if (t.offset < pos) return false;
        for (std::size_t k = pos; k < t.offset; ++k) {
            if (!detail::is_inline_space(text[k])) return false;
            rebuilt.push_back(text[k]);
        }
        rebuilt += t.lexeme;
        pos = t.end();
    }
    for (std::size_t k = pos; k < text.size(); ++k) {
        if (!detail::is_inline_space(text[k])) return false;
        rebuilt.push_back(text[k]);
    }
    return rebuilt == text;
}

} // namespace minileak
