#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "minileak/common.hpp"
#include "minileak/llm/prompt.hpp"
#include "minileak/ruleflow.hpp"

namespace minileak::llm {

struct ParseFailure {
    std::string reason;
    std::string raw;
    bool operator==(const ParseFailure&) const = default;
};

struct ParsedReply {
    std::vector<Finding> findings;
    std::optional<ParseFailure> failure;
    std::size_t dropped_out_of_range = 0;
    std::size_t malformed_entries = 0;
    bool lenient = false; // decoded by the lenient pass

    bool ok() const { return !failure.has_value(); }
};

namespace detail {

/// End offset (exclusive) of the balanced `[...]` starting at `open`, honoring
/// quoted strings, or npos.
inline std::size_t balanced_end(std::string_view s, std::size_t open) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'') quote = c;
        else if (c == '[' || c == '{') ++depth;
        else if (c == ']' || c == '}') {
            if (--depth == 0) return i + 1;
            if (depth < 0) return std::string_view::npos;
        }
    }
    return std::string_view::npos;
}

inline std::optional<nlohmann::json> first_array(std::string_view text) {
    for (std::size_t i = text.find('['); i != std::string_view::npos; i = text.find('[', i + 1)) {
        const auto end = balanced_end(text, i);
        if (end == std::string_view::npos) continue;
        auto j = nlohmann::json::parse(text.substr(i, end - i), nullptr, false);
        if (!j.is_discarded() && j.is_array()) return j;
    }
    return std::nullopt;
}

/// Rewrites single-quoted strings as double-quoted JSON strings.
inline std::string requote(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (!quote) {
            if (c == '"' || c == '\'') {
                quote = c;
                out += '"';
            } else {
                out += c;
            }
            continue;
        }
        if (c == '\\' && i + 1 < s.size()) {
            if (quote == '\'' && s[i + 1] == '\'') out += '\'';
            else {
                out += c;
                out += s[i + 1];
            }
            ++i;
        } else if (c == quote) {
            out += '"';
            quote = 0;
        } else if (c == '"') {
            out += "\\\"";
        } else {
            out += c;
        }
    }
    return out;
}

/// Drops commas that directly precede `]` or `}` outside strings.
inline std::string strip_trailing_commas(std::string_view s) {
    std::string out;
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            out += c;
            if (c == '\\' && i + 1 < s.size()) out += s[++i];
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        if (c == ',') {
            auto j = i + 1;
            while (j < s.size() && (s[j] == ' ' || s[j] == '\n' || s[j] == '\r' || s[j] == '\t')) ++j;
            if (j < s.size() && (s[j] == ']' || s[j] == '}')) continue;
        }
        out += c;
    }
    return out;
}

inline std::string strip_fences(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto nl = s.find('\n', i);
        const auto end = nl == std::string_view::npos ? s.size() : nl + 1;
        const auto line = trim(s.substr(i, end - i));
        if (line.substr(0, 3) != "```") out.append(s.substr(i, end - i));
        i = end;
    }
    return out;
}

inline std::optional<nlohmann::json> lenient_array(std::string_view text) {
    const auto cleaned = strip_trailing_commas(requote(strip_fences(text)));
    if (auto j = first_array(cleaned)) return j;
    // {"findings": [...]} wrapper.
    for (std::size_t i = cleaned.find('{'); i != std::string::npos; i = cleaned.find('{', i + 1)) {
        const auto end = balanced_end(cleaned, i);
        if (end == std::string_view::npos) continue;
        auto j = nlohmann::json::parse(cleaned.substr(i, end - i), nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        for (auto& [k, v] : j.items())
            if (v.is_array()) return v;
    }
    return std::nullopt;
}

inline std::string normalize_category_text(std::string_view s) {
    std::string out;
    for (char c : trim(s)) {
        if (c == ' ' || c == '-') out += '_';
        else out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

inline const PromptChunk* resolve_chunk(const PromptBundle& b, const std::string& file, std::size_t line) {
    for (const auto& c : b.chunks) {
        const bool same = c.file == file || (!file.empty() && c.file.size() > file.size() &&
                                              c.file.compare(c.file.size() - file.size(), file.size(), file) == 0 &&
                                              c.file[c.file.size() - file.size() - 1] == '/');
        if (same && c.start_line <= line && line <= c.end_line) return &c;
    }
    return nullptr;
}

inline std::string chunk_line(const PromptChunk& c, std::size_t line) {
    const auto text = strip_line_numbers(c.text);
    std::size_t cur = c.start_line, i = 0;
    while (cur < line && i < text.size()) {
        auto nl = text.find('\n', i);
        if (nl == std::string::npos) return {};
        i = nl + 1;
        ++cur;
    }
    auto nl = text.find('\n', i);
    return text.substr(i, nl == std::string::npos ? std::string::npos : nl - i);
}

} // namespace detail

/// Decodes a model reply into LLM findings. Without a bundle, line ranges are
/// not checked and evidence comes from the reply itself.
inline ParsedReply parse_reply(std::string_view raw, const PromptBundle* bundle = nullptr) {
    ParsedReply out;
    auto arr = detail::first_array(raw);
    if (!arr) {
        arr = detail::lenient_array(raw);
        out.lenient = arr.has_value();
    }
    if (!arr) {
        out.failure = ParseFailure{"no JSON array found in reply", std::string(raw)};
        return out;
    }
    for (const auto& e : *arr) {
        if (!e.is_object()) {
            ++out.malformed_entries;
            continue;
        }
        Finding f;
        f.detector = Detector::LLM;
        const auto cat_text = e.contains("category") && e["category"].is_string() ? e["category"].get<std::string>() : "";
        if (auto c = parse_category(detail::normalize_category_text(cat_text))) {
            f.category = *c;
        } else {
            f.category = SensitiveCategory::OTHER_PII;
            f.notes.push_back("unknown category '" + cat_text + "'");
        }
        long long line = 0;
        if (e.contains("line")) {
            const auto& l = e["line"];
            if (l.is_number_integer()) line = l.get<long long>();
            else if (l.is_number()) {
                const double d = l.get<double>();
                line = d >= 1 && d < 1e12 ? static_cast<long long>(d) : 0;
            }
            else if (l.is_string()) line = std::atoll(l.get<std::string>().c_str());
        }
        if (line < 1) {
            ++out.malformed_entries;
            continue;
        }
        std::string file = e.contains("file") && e["file"].is_string() ? e["file"].get<std::string>() : "";
        const std::string evidence =
            e.contains("evidence") && e["evidence"].is_string() ? e["evidence"].get<std::string>() : "";
        if (e.contains("disposition") && e["disposition"].is_string()) {
            const auto d = e["disposition"].get<std::string>();
            if (auto pd = parse_disposition(detail::normalize_category_text(d))) f.disposition = *pd;
            else f.notes.push_back("unknown disposition '" + d + "'");
        }
        f.confidence = 0.5;
        if (e.contains("confidence") && e["confidence"].is_number())
            f.confidence = std::clamp(e["confidence"].get<double>(), 0.0, 1.0);

        const auto uline = static_cast<std::size_t>(line);
        if (bundle) {
            if (file.empty() && !bundle->chunks.empty()) file = bundle->chunks.front().file;
            const auto* chunk = detail::resolve_chunk(*bundle, file, uline);
            if (!chunk) {
                ++out.dropped_out_of_range;
                continue;
            }
            const auto text = detail::chunk_line(*chunk, uline);
            f.source = Evidence{chunk->file, uline, std::string(utf8_truncate(trim(text), kMaxSnippet)), {}};
        } else {
            f.source = Evidence{file, uline, std::string(utf8_truncate(trim(evidence), kMaxSnippet)), {}};
        }
        if (!evidence.empty()) f.notes.push_back("model evidence: " + std::string(utf8_truncate(evidence, kMaxSnippet)));
        f.flow = {f.source};
        if (f.disposition != Disposition::COLLECTED) f.sink = f.source;
        assign_id(f);
        out.findings.push_back(std::move(f));
    }
    return out;
}

} // namespace minileak::llm
