#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "minileak/common.hpp"
#include "minileak/script_model.hpp"

namespace minileak {

enum class SourceKind : std::uint8_t { API_CALL, FORM_INPUT, GLOBAL_STATE_READ, IDENT_HEURISTIC };
enum class SinkKind : std::uint8_t { NETWORK, STORAGE, GLOBAL_STATE_WRITE, NAV_PARAM };

inline std::string_view to_string(SourceKind k) {
    switch (k) {
    case SourceKind::API_CALL: return "API_CALL";
    case SourceKind::FORM_INPUT: return "FORM_INPUT";
    case SourceKind::GLOBAL_STATE_READ: return "GLOBAL_STATE_READ";
    case SourceKind::IDENT_HEURISTIC: return "IDENT_HEURISTIC";
    }
    return "IDENT_HEURISTIC";
}

inline std::string_view to_string(SinkKind k) {
    switch (k) {
    case SinkKind::NETWORK: return "NETWORK";
    case SinkKind::STORAGE: return "STORAGE";
    case SinkKind::GLOBAL_STATE_WRITE: return "GLOBAL_STATE_WRITE";
    case SinkKind::NAV_PARAM: return "NAV_PARAM";
    }
    return "NETWORK";
}

inline std::optional<SourceKind> parse_source_kind(std::string_view s) {
    for (auto k : {SourceKind::API_CALL, SourceKind::FORM_INPUT, SourceKind::GLOBAL_STATE_READ, SourceKind::IDENT_HEURISTIC})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

inline std::optional<SinkKind> parse_sink_kind(std::string_view s) {
    for (auto k : {SinkKind::NETWORK, SinkKind::STORAGE, SinkKind::GLOBAL_STATE_WRITE, SinkKind::NAV_PARAM})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

/// Default confidence per source kind, ordered by strength of evidence.
inline double base_confidence(SourceKind k) {
    switch (k) {
    case SourceKind::API_CALL: return 0.95;
    case SourceKind::GLOBAL_STATE_READ: return 0.9;
    case SourceKind::FORM_INPUT: return 0.85;
    case SourceKind::IDENT_HEURISTIC: return 0.6;
    }
    return 0.6;
}

struct SourceSpec {
    SourceKind kind = SourceKind::IDENT_HEURISTIC;
    /// Chain pattern, or a single identifier lexeme (lowercase) for IDENT_HEURISTIC.
    std::string pattern;
    /// For wildcard-terminated chain patterns, OTHER_PII means "use the lexicon category".
    SensitiveCategory category = SensitiveCategory::OTHER_PII;
    double base_confidence = 0.6;
    std::optional<ChainPattern> compiled;

    bool operator==(const SourceSpec& o) const {
        return kind == o.kind && pattern == o.pattern && category == o.category && base_confidence == o.base_confidence;
    }
};

struct SinkSpec {
    SinkKind kind = SinkKind::NETWORK;
    std::string pattern;
    Disposition disposition = Disposition::TRANSMITTED;
    ChainPattern compiled;

    bool operator==(const SinkSpec& o) const {
        return kind == o.kind && pattern == o.pattern && disposition == o.disposition;
    }
};

/// Lexemes that only count as birth data when the same registration also
/// mentions a name or gender lexeme.
inline bool is_context_gated(std::string_view lexeme) {
    return lexeme == "date" || lexeme == "time" || lexeme == "hour" || lexeme == "minute";
}

inline bool is_context_category(SensitiveCategory c) {
    return c == SensitiveCategory::SURNAME || c == SensitiveCategory::GIVEN_NAME || c == SensitiveCategory::FULL_NAME ||
           c == SensitiveCategory::GENDER;
}

struct Taxonomy {
    std::vector<SourceSpec> sources;
    std::vector<SinkSpec> sinks;
    int version = 1;

    void add_source(SourceKind kind, std::string pattern, SensitiveCategory cat, std::optional<double> conf = {}) {
        SourceSpec s;
        s.kind = kind;
        s.pattern = kind == SourceKind::IDENT_HEURISTIC ? to_lower(pattern) : std::move(pattern);
        s.category = cat;
        s.base_confidence = conf.value_or(base_confidence(kind));
        if (s.pattern.empty()) throw Error(ErrorCode::PatternSyntax, "empty source pattern");
        if (s.base_confidence < 0.0 || s.base_confidence > 1.0)
            throw Error(ErrorCode::PatternSyntax, "confidence outside [0,1]");
        if (kind != SourceKind::IDENT_HEURISTIC) s.compiled = ChainPattern::parse(s.pattern);
        for (auto& existing : sources) {
            if (existing.kind == s.kind && existing.pattern == s.pattern && existing.category == s.category) {
                existing = std::move(s);
                return;
            }
        }
        sources.push_back(std::move(s));
    }

    void add_sink(SinkKind kind, std::string pattern, Disposition disp) {
        SinkSpec s{kind, pattern, disp, ChainPattern::parse(pattern)};
        for (auto& existing : sinks) {
            if (existing.kind == s.kind && existing.pattern == s.pattern) {
                existing = std::move(s);
                return;
            }
        }
        sinks.push_back(std::move(s));
    }

    void remove_source(SourceKind kind, std::string_view pattern) {
        const auto key = kind == SourceKind::IDENT_HEURISTIC ? to_lower(pattern) : std::string(pattern);
        std::erase_if(sources, [&](const SourceSpec& s) { return s.kind == kind && s.pattern == key; });
    }

    void remove_sink(SinkKind kind, std::string_view pattern) {
        std::erase_if(sinks, [&](const SinkSpec& s) { return s.kind == kind && s.pattern == pattern; });
    }

    /// Lexicon lookup, case-insensitive. Gated birth lexemes need `gate_open`.
    std::vector<const SourceSpec*> lookup_lexeme(std::string_view ident, bool gate_open = true) const {
        std::vector<const SourceSpec*> out;
        const auto lower = to_lower(ident);
        if (!gate_open && is_context_gated(lower)) return out;
        for (const auto& s : sources)
            if (s.kind == SourceKind::IDENT_HEURISTIC && s.pattern == lower) out.push_back(&s);
        return out;
    }
};

inline Taxonomy builtin_taxonomy() {
    using C = SensitiveCategory;
    Taxonomy t;
    t.version = 1;

    const std::pair<const char*, C> lexicon[] = {
        {"xing", C::SURNAME},         {"ming", C::GIVEN_NAME},     {"name", C::FULL_NAME},
        {"username", C::FULL_NAME},   {"realname", C::FULL_NAME},  {"fullname", C::FULL_NAME},
        {"nickname", C::NICKNAME},    {"sex", C::GENDER},          {"gender", C::GENDER},
        {"birthday", C::BIRTHDATE},   {"birthdate", C::BIRTHDATE}, {"date", C::BIRTHDATE},
        {"hour", C::BIRTH_TIME},      {"minute", C::BIRTH_TIME},   {"time", C::BIRTH_TIME},
        {"email", C::EMAIL},          {"phone", C::PHONE},         {"mobile", C::PHONE},
        {"tel", C::PHONE},            {"phonenumber", C::PHONE},   {"wechat", C::WECHAT_ID},
        {"openid", C::OPENID},        {"unionid", C::OPENID},      {"latitude", C::LOCATION},
        {"longitude", C::LOCATION},   {"location", C::LOCATION},   {"address", C::ADDRESS},
        {"idcard", C::ID_NUMBER},     {"idnumber", C::ID_NUMBER},  {"avatar", C::AVATAR},
        {"avatarurl", C::AVATAR},
    };
    for (const auto& [lexeme, cat] : lexicon) t.add_source(SourceKind::IDENT_HEURISTIC, lexeme, cat);

    t.add_source(SourceKind::FORM_INPUT, "*.detail.value.*", C::OTHER_PII);

    t.add_source(SourceKind::GLOBAL_STATE_READ, "getApp().globalData.userInfo.**", C::NICKNAME);
    t.add_source(SourceKind::GLOBAL_STATE_READ, "getApp().globalData.userInfo.**", C::AVATAR);
    t.add_source(SourceKind::GLOBAL_STATE_READ, "getApp().globalData.openid", C::OPENID);
    t.add_source(SourceKind::GLOBAL_STATE_READ, "getApp().globalData.**", C::OTHER_PII);

    t.add_source(SourceKind::API_CALL, "wx.getUserInfo", C::NICKNAME);
    t.add_source(SourceKind::API_CALL, "wx.getUserInfo", C::AVATAR);
    t.add_source(SourceKind::API_CALL, "wx.getUserProfile", C::NICKNAME);
    t.add_source(SourceKind::API_CALL, "wx.getUserProfile", C::AVATAR);
    t.add_source(SourceKind::API_CALL, "wx.getLocation", C::LOCATION);
    t.add_source(SourceKind::API_CALL, "wx.chooseLocation", C::LOCATION);
    t.add_source(SourceKind::API_CALL, "wx.chooseAddress", C::ADDRESS);
    t.add_source(SourceKind::API_CALL, "wx.login", C::OPENID);
    t.add_source(SourceKind::API_CALL, "wx.requestPayment", C::PAYMENT);

    t.add_sink(SinkKind::NETWORK, "wx.request", Disposition::TRANSMITTED);
    t.add_sink(SinkKind::NETWORK, "wx.uploadFile", Disposition::TRANSMITTED);
    t.add_sink(SinkKind::NETWORK, "wx.sendSocketMessage", Disposition::TRANSMITTED);
    t.add_sink(SinkKind::STORAGE, "wx.setStorage", Disposition::STORED_LOCAL);
    t.add_sink(SinkKind::STORAGE, "wx.setStorageSync", Disposition::STORED_LOCAL);
    t.add_sink(SinkKind::GLOBAL_STATE_WRITE, "getApp().globalData.**", Disposition::STORED_GLOBAL);
    t.add_sink(SinkKind::NAV_PARAM, "wx.navigateTo", Disposition::NAV_EXPOSED);
    t.add_sink(SinkKind::NAV_PARAM, "wx.redirectTo", Disposition::NAV_EXPOSED);
    t.add_sink(SinkKind::NAV_PARAM, "wx.reLaunch", Disposition::NAV_EXPOSED);
    return t;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// Where a chain occurs: read as a value, or used as a call's callee.
enum class ChainSite { Read, Callee };

struct SourceMatch {
    const SourceSpec* spec = nullptr;
    SensitiveCategory category = SensitiveCategory::OTHER_PII;
    bool operator==(const SourceMatch&) const = default;
};

/// Final segment usable for lexicon lookups: plain property names only.
inline std::optional<std::string> lexeme_of(const MemberChain& chain) {
    if (chain.empty()) return std::nullopt;
    const auto& last = chain.last();
    if (last.is_call || last.is_index) return std::nullopt;
    return last.name;
}

/// Structural matches first (taxonomy order). The lexicon is consulted on its
/// own only when no structural source matched a read.
inline std::vector<SourceMatch> match_source(const MemberChain& chain, const Taxonomy& taxonomy,
                                             ChainSite site = ChainSite::Read, bool gate_open = true) {
    std::vector<SourceMatch> out;
    auto push = [&](const SourceSpec* spec, SensitiveCategory c) {
        for (const auto& m : out)
            if (m.category == c && m.spec->kind == spec->kind) return;
        out.push_back({spec, c});
    };
    const auto lexeme = lexeme_of(chain);
    for (const auto& spec : taxonomy.sources) {
        if (spec.kind == SourceKind::IDENT_HEURISTIC || !spec.compiled) continue;
        if ((spec.kind == SourceKind::API_CALL) != (site == ChainSite::Callee)) continue;
        const auto& pat = *spec.compiled;
        if (!pat.matches(chain)) continue;
        const bool wildcard_consumed = pat.ends_with_wildcard() && chain.segments.size() > pat.literal_prefix();
        if (wildcard_consumed) {
            if (!lexeme) continue;
            const auto hits = taxonomy.lookup_lexeme(*lexeme, gate_open);
            for (const auto* h : hits) push(&spec, h->category);
        } else if (!(pat.ends_with_wildcard() && spec.category == SensitiveCategory::OTHER_PII)) {
            push(&spec, spec.category);
        }
    }
    if (out.empty() && site == ChainSite::Read && lexeme) {
        for (const auto* h : taxonomy.lookup_lexeme(*lexeme, gate_open)) push(h, h->category);
    }
    return out;
}

/// Identifier-only lookup (variable names).
inline std::vector<SourceMatch> match_source(std::string_view ident, const Taxonomy& taxonomy, bool gate_open = true) {
    std::vector<SourceMatch> out;
    for (const auto* h : taxonomy.lookup_lexeme(ident, gate_open)) out.push_back({h, h->category});
    return out;
}

/// GLOBAL_STATE_WRITE sinks match assignment targets; the rest match callees.
inline const SinkSpec* match_sink(const MemberChain& chain, const Taxonomy& taxonomy, ChainSite site) {
    for (const auto& sink : taxonomy.sinks) {
        const bool assign_kind = sink.kind == SinkKind::GLOBAL_STATE_WRITE;
        if (assign_kind != (site == ChainSite::Read)) continue;
        if (sink.compiled.matches(chain)) return &sink;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Override files
// ---------------------------------------------------------------------------

class OverrideParseError : public Error {
public:
    OverrideParseError(std::size_t line, const std::string& reason)
        : Error(ErrorCode::OverrideParse, "line " + std::to_string(line) + ": " + reason), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline Taxonomy apply_overrides(std::string_view text, Taxonomy base) {
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream words(line);
        std::vector<std::string> w;
        for (std::string s; words >> s;) w.push_back(s);
        if (w.empty()) continue;
        try {
            if (w[0] == "source") {
                if (w.size() != 4 && w.size() != 5) throw OverrideParseError(line_no, "expected: source <kind> <pattern> <CATEGORY> [confidence]");
                auto kind = parse_source_kind(w[1]);
                if (!kind) throw OverrideParseError(line_no, "unknown source kind '" + w[1] + "'");
                auto cat = parse_category(w[3]);
                if (!cat) throw OverrideParseError(line_no, "unknown category '" + w[3] + "'");
                std::optional<double> conf;
                if (w.size() == 5) {
                    std::size_t used = 0;
                    double v = 0;
                    try {
                        v = std::stod(w[4], &used);
                    } catch (const std::exception&) {
                        used = 0;
                    }
                    if (used != w[4].size() || !(v >= 0.0 && v <= 1.0))
                        throw OverrideParseError(line_no, "confidence must be a number in [0,1]");
                    conf = v;
                }
                base.add_source(*kind, w[2], *cat, conf);
            } else if (w[0] == "sink") {
                if (w.size() != 4) throw OverrideParseError(line_no, "expected: sink <kind> <pattern> <DISPOSITION>");
                auto kind = parse_sink_kind(w[1]);
                if (!kind) throw OverrideParseError(line_no, "unknown sink kind '" + w[1] + "'");
                auto disp = parse_disposition(w[3]);
                if (!disp) throw OverrideParseError(line_no, "unknown disposition '" + w[3] + "'");
                base.add_sink(*kind, w[2], *disp);
            } else if (w[0] == "remove") {
                if (w.size() != 4) throw OverrideParseError(line_no, "expected: remove source|sink <kind> <pattern>");
                if (w[1] == "source") {
                    auto kind = parse_source_kind(w[2]);
                    if (!kind) throw OverrideParseError(line_no, "unknown source kind '" + w[2] + "'");
                    base.remove_source(*kind, w[3]);
                } else if (w[1] == "sink") {
                    auto kind = parse_sink_kind(w[2]);
                    if (!kind) throw OverrideParseError(line_no, "unknown sink kind '" + w[2] + "'");
                    base.remove_sink(*kind, w[3]);
                } else {
                    throw OverrideParseError(line_no, "remove expects 'source' or 'sink'");
                }
            } else {
                throw OverrideParseError(line_no, "unknown directive '" + w[0] + "'");
            }
        } catch (const OverrideParseError&) {
            throw;
        } catch (const Error& e) {
            throw OverrideParseError(line_no, e.what());
        }
    }
    ++base.version;
    return base;
}

inline Taxonomy load_overrides(const std::filesystem::path& file, const Taxonomy& base) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw OverrideParseError(0, "cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return apply_overrides(ss.str(), base);
}

/// Effective taxonomy in override-file syntax.
inline std::string to_override_text(const Taxonomy& t) {
    std::ostringstream out;
    out << "# taxonomy version " << t.version << "\n";
    for (const auto& s : t.sources) {
        out << "source " << to_string(s.kind) << ' ' << s.pattern << ' ' << to_string(s.category) << ' '
            << s.base_confidence << "\n";
    }
    for (const auto& s : t.sinks)
        out << "sink " << to_string(s.kind) << ' ' << s.pattern << ' ' << to_string(s.disposition) << "\n";
    return out.str();
}

} // namespace minileak
