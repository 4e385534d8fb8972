#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "minileak/common.hpp"

namespace minileak {

/// Byte range [begin, end) in a source file plus the lines it touches.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t line = 1;
    std::size_t end_line = 1;

    bool contains(const Span& other) const { return begin <= other.begin && other.end <= end; }
    bool operator==(const Span&) const = default;
};

struct Expr;
struct FunctionModel;

struct ChainSegment {
    std::string name;
    bool is_call = false;
    bool is_index = false;
    std::vector<Expr> args; // call arguments when is_call

    bool operator==(const ChainSegment&) const;
};

/// Dotted access path such as `getApp().globalData.userInfo.nickName`.
struct MemberChain {
    std::vector<ChainSegment> segments;
    Span span;

    bool empty() const { return segments.empty(); }
    const std::string& root() const { return segments.front().name; }
    const ChainSegment& last() const { return segments.back(); }

    /// Dotted text with `()` on call segments; call arguments are omitted.
    std::string render() const {
        std::string out;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const auto& s = segments[i];
            if (s.is_index) {
                out += '[';
                out += s.name;
                out += ']';
            } else {
                if (i > 0) out += '.';
                out += s.name;
            }
            if (s.is_call) out += "()";
        }
        return out;
    }

    /// Chain consisting of the first `n` segments.
    MemberChain prefix(std::size_t n) const {
        MemberChain c;
        c.segments.assign(segments.begin(), segments.begin() + static_cast<std::ptrdiff_t>(std::min(n, segments.size())));
        c.span = span;
        return c;
    }

    static MemberChain of(std::initializer_list<std::string_view> names) {
        MemberChain c;
        for (auto n : names) c.segments.push_back(ChainSegment{std::string(n), false, false, {}});
        return c;
    }

    bool operator==(const MemberChain&) const;
};

struct StringLit {
    std::string raw;
    bool operator==(const StringLit&) const = default;
};
struct NumberLit {
    std::string raw;
    bool operator==(const NumberLit&) const = default;
};
/// Value-propagating combination: `a + b`, `a || b`, `c ? a : b`, array literals.
struct Concat {
    std::vector<Expr> parts;
    bool operator==(const Concat&) const;
};
struct CallExpr {
    MemberChain callee;
    std::vector<Expr> args;
    bool operator==(const CallExpr&) const;
};
struct ObjectLit {
    std::vector<std::pair<std::string, Expr>> entries;
    bool operator==(const ObjectLit&) const;
};
struct FunctionLit {
    std::shared_ptr<const FunctionModel> fn;
    bool operator==(const FunctionLit&) const;
};
struct Unknown {
    bool operator==(const Unknown&) const = default;
};

struct Expr {
    std::variant<MemberChain, StringLit, NumberLit, Concat, CallExpr, ObjectLit, FunctionLit, Unknown> node;
    Span span;

    template <typename T> const T* as() const { return std::get_if<T>(&node); }
    bool operator==(const Expr&) const = default;
};

inline bool ChainSegment::operator==(const ChainSegment& o) const {
    return name == o.name && is_call == o.is_call && is_index == o.is_index && args == o.args;
}
inline bool MemberChain::operator==(const MemberChain& o) const { return segments == o.segments && span == o.span; }
inline bool Concat::operator==(const Concat& o) const { return parts == o.parts; }
inline bool CallExpr::operator==(const CallExpr& o) const { return callee == o.callee && args == o.args; }
inline bool ObjectLit::operator==(const ObjectLit& o) const { return entries == o.entries; }

struct Action;

struct Assign {
    MemberChain target;
    Expr value;
    bool operator==(const Assign&) const = default;
};
struct Call {
    MemberChain callee;
    std::vector<Expr> args;
    bool operator==(const Call&) const = default;
};
struct Return {
    Expr value;
    bool operator==(const Return&) const = default;
};
/// Both arms are over-approximated: conditions are not modeled.
struct Branch {
    std::vector<Action> then_arm;
    std::vector<Action> else_arm;
    bool operator==(const Branch&) const;
};

struct Action {
    std::variant<Assign, Call, Return, Branch> node;
    Span span;

    template <typename T> const T* as() const { return std::get_if<T>(&node); }
    bool operator==(const Action&) const = default;
};

inline bool Branch::operator==(const Branch& o) const { return then_arm == o.then_arm && else_arm == o.else_arm; }

struct ParseGap {
    Span span;
    std::string reason;
    bool operator==(const ParseGap&) const = default;
};

struct FunctionModel {
    std::string name;
    std::vector<std::string> params;
    std::vector<Action> actions;
    Span span;      // whole property / literal
    Span body_span; // braces included
    std::vector<ParseGap> gaps;
    bool operator==(const FunctionModel&) const = default;
};

inline bool FunctionLit::operator==(const FunctionLit& o) const {
    if (fn == o.fn) return true;
    return fn && o.fn && *fn == *o.fn;
}

struct LiteralInfo {
    std::string kind; // string, number, boolean, null, array, object, expression
    std::string raw;
    Span span;
    bool operator==(const LiteralInfo&) const = default;
};

enum class RegistrationKind { PAGE, APP };

inline std::string_view to_string(RegistrationKind k) { return k == RegistrationKind::PAGE ? "PAGE" : "APP"; }

struct PageRegistration {
    RegistrationKind kind = RegistrationKind::PAGE;
    Span span; // the `Page(` / `App(` call
    std::map<std::string, LiteralInfo> data_fields;
    std::vector<FunctionModel> functions; // source order, unique names

    const FunctionModel* find_function(std::string_view name) const {
        for (const auto& f : functions)
            if (f.name == name) return &f;
        return nullptr;
    }
    bool operator==(const PageRegistration&) const = default;
};

struct RequireDecl {
    std::string local_name;
    std::string module_path;
    bool operator==(const RequireDecl&) const = default;
};

struct ScriptModel {
    std::vector<RequireDecl> requires_;
    std::vector<PageRegistration> registrations;
    bool operator==(const ScriptModel&) const = default;
};

// ---------------------------------------------------------------------------
// Chain patterns: dotted segments, `name()` for calls, `*` one segment,
// trailing `**` any (possibly empty) suffix.
// ---------------------------------------------------------------------------

struct PatternSegment {
    enum class Kind { Literal, AnyOne, AnySuffix } kind = Kind::Literal;
    std::string name;
    bool is_call = false;
    bool operator==(const PatternSegment&) const = default;
};

class ChainPattern {
public:
    static ChainPattern parse(std::string_view text) {
        ChainPattern p;
        p.text_ = std::string(text);
        if (text.empty()) throw Error(ErrorCode::PatternSyntax, "empty pattern");
        std::size_t i = 0;
        while (true) {
            auto j = text.find('.', i);
            const auto seg = text.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i);
            if (seg.empty()) throw Error(ErrorCode::PatternSyntax, "empty segment in '" + p.text_ + "'");
            PatternSegment ps;
            if (seg == "**") {
                ps.kind = PatternSegment::Kind::AnySuffix;
                if (j != std::string_view::npos)
                    throw Error(ErrorCode::PatternSyntax, "'**' must be the last segment in '" + p.text_ + "'");
            } else if (seg == "*") {
                ps.kind = PatternSegment::Kind::AnyOne;
            } else {
                auto name = seg;
                if (name.size() >= 2 && name.substr(name.size() - 2) == "()") {
                    ps.is_call = true;
                    name.remove_suffix(2);
                }
                if (name.empty()) throw Error(ErrorCode::PatternSyntax, "call without a name in '" + p.text_ + "'");
                for (char c : name) {
                    const auto u = static_cast<unsigned char>(c);
                    const bool ok = (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') ||
                                    c == '_' || c == '$' || u >= 0x80;
                    if (!ok) throw Error(ErrorCode::PatternSyntax, "invalid character in '" + p.text_ + "'");
                }
                ps.name = std::string(name);
            }
            p.segments_.push_back(std::move(ps));
            if (j == std::string_view::npos) break;
            i = j + 1;
        }
        return p;
    }

    const std::string& text() const { return text_; }
    const std::vector<PatternSegment>& segments() const { return segments_; }

    bool ends_with_wildcard() const {
        return !segments_.empty() && segments_.back().kind != PatternSegment::Kind::Literal;
    }

    /// Number of leading literal segments.
    std::size_t literal_prefix() const {
        std::size_t n = 0;
        while (n < segments_.size() && segments_[n].kind == PatternSegment::Kind::Literal) ++n;
        return n;
    }

    bool matches(const MemberChain& chain) const {
        const auto& segs = chain.segments;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& ps = segments_[i];
            if (ps.kind == PatternSegment::Kind::AnySuffix) return true;
            if (i >= segs.size()) return false;
            if (ps.kind == PatternSegment::Kind::AnyOne) continue;
            if (segs[i].is_index || segs[i].name != ps.name || segs[i].is_call != ps.is_call) return false;
        }
        return segs.size() == segments_.size();
    }

    bool operator==(const ChainPattern& o) const { return text_ == o.text_; }

private:
    std::string text_;
    std::vector<PatternSegment> segments_;
};

inline bool chain_matches(const MemberChain& chain, std::string_view pattern) {
    return ChainPattern::parse(pattern).matches(chain);
}

} // namespace minileak
