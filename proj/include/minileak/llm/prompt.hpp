#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "minileak/common.hpp"
#include "minileak/ingest.hpp"
#include "minileak/parser.hpp"
#include "minileak/taxonomy.hpp"

namespace minileak::llm {

inline constexpr std::string_view kPromptVersion = "minileak-prompt/1";
inline constexpr int kMinBudgetTokens = 512;

struct PromptChunk {
    std::string chunk_id; // "<file>#L<start>-<end>"
    std::string file;
    std::size_t start_line = 1;
    std::size_t end_line = 1;
    std::string text; // line-numbered

    bool operator==(const PromptChunk&) const = default;
};

struct PromptBundle {
    std::string system_text;
    std::vector<PromptChunk> chunks;
    int token_estimate = 0;

    std::string user_message() const;
    bool covers(std::string_view file, std::size_t line) const {
        return std::any_of(chunks.begin(), chunks.end(), [&](const PromptChunk& c) {
            return c.file == file && c.start_line <= line && line <= c.end_line;
        });
    }
    bool operator==(const PromptBundle&) const = default;
};

inline std::size_t count_chars(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

inline int estimate_tokens(std::size_t chars) { return static_cast<int>((chars + 3) / 4); }

inline std::string system_text(const Taxonomy& taxonomy) {
    std::string s;
    s += "You are a privacy auditor for WeChat Mini Program source code (prompt ";
    s += kPromptVersion;
    s += ").\n";
    s += "Identify every place where the code collects, stores, or transmits sensitive user information.\n";
    s += "Each code line is prefixed with its 1-based line number and ' | '. Cite those numbers.\n";
    s += "Allowed category values (use exactly one of these names):\n";
    for (auto name : kCategoryNames) {
        s += "  ";
        s += name;
        s += '\n';
    }
    s += "Allowed disposition values: COLLECTED, STORED_GLOBAL, STORED_LOCAL, TRANSMITTED, NAV_EXPOSED.\n";
    s += "Platform APIs known to return sensitive data:";
    std::set<std::string> apis;
    for (const auto& src : taxonomy.sources)
        if (src.kind == SourceKind::API_CALL) apis.insert(src.pattern);
    for (const auto& a : apis) s += " " + a;
    s += "\n";
    s += "Answer with a JSON array only. Each element is an object with keys "
         "\"category\", \"file\", \"line\", \"evidence\", \"disposition\", \"confidence\" "
         "(confidence is a number between 0 and 1). Answer [] when nothing is found.\n";
    return s;
}

inline std::string number_lines(const SourceFile& file, std::size_t first, std::size_t last) {
    std::string out;
    for (std::size_t l = first; l <= last; ++l) {
        const auto begin = file.line_starts[l - 1];
        const auto end = l < file.line_starts.size() ? file.line_starts[l] : file.text.size();
        auto num = std::to_string(l);
        if (num.size() < 5) num.insert(0, 5 - num.size(), ' ');
        out += num;
        out += " | ";
        out.append(file.text, begin, end - begin);
    }
    return out;
}

/// Inverse of number_lines: the exact source slice.
inline std::string strip_line_numbers(std::string_view numbered) {
    std::string out;
    std::size_t i = 0;
    while (i < numbered.size()) {
        auto nl = numbered.find('\n', i);
        const auto end = nl == std::string_view::npos ? numbered.size() : nl + 1;
        auto line = numbered.substr(i, end - i);
        const auto bar = line.find(" | ");
        out += bar == std::string_view::npos ? line : line.substr(bar + 3);
        i = end;
    }
    return out;
}

inline std::string PromptBundle::user_message() const {
    std::string s;
    for (const auto& c : chunks) {
        s += "File: " + c.file + " (lines " + std::to_string(c.start_line) + "-" + std::to_string(c.end_line) + ")\n";
        s += "```\n";
        s += c.text;
        if (!c.text.empty() && c.text.back() != '\n') s += '\n';
        s += "```\n";
    }
    return s;
}

inline int bundle_tokens(const PromptBundle& b) {
    return estimate_tokens(count_chars(b.system_text) + count_chars(b.user_message()));
}

namespace detail {

struct Piece {
    const SourceFile* file;
    std::size_t first, last;
};

/// Splits a file's lines at the given boundary lines (each starts a new piece).
inline std::vector<Piece> pieces_of(const SourceFile& f, std::set<std::size_t> boundaries) {
    std::vector<Piece> out;
    const auto n = f.line_count();
    if (n == 0) return out;
    boundaries.insert(1);
    std::vector<std::size_t> starts(boundaries.begin(), boundaries.end());
    starts.erase(std::remove_if(starts.begin(), starts.end(), [&](std::size_t l) { return l < 1 || l > n; }),
                 starts.end());
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const auto last = i + 1 < starts.size() ? starts[i + 1] - 1 : n;
        out.push_back({&f, starts[i], last});
    }
    return out;
}

inline PromptChunk make_chunk(const SourceFile& f, std::size_t first, std::size_t last) {
    return PromptChunk{f.path + "#L" + std::to_string(first) + "-" + std::to_string(last), f.path, first, last,
                       number_lines(f, first, last)};
}

class Packer {
public:
    Packer(std::string system, int budget) : system_(std::move(system)), budget_(budget) {}

    void add_line_range(const SourceFile& f, std::size_t first, std::size_t last) {
        if (try_append(f, first, last)) return;
        if (!current_.chunks.empty()) flush();
        if (try_append(f, first, last)) return;
        // Too large for an empty bundle: hard split by lines.
        for (std::size_t l = first; l <= last; ++l) {
            if (try_append(f, l, l)) continue;
            if (!current_.chunks.empty()) flush();
            if (!try_append(f, l, l)) {
                // A single line above budget still gets its own bundle.
                current_.chunks.push_back(make_chunk(f, l, l));
                flush();
            }
        }
    }

    std::vector<PromptBundle> finish() {
        if (!current_.chunks.empty()) flush();
        return std::move(out_);
    }

private:
    std::string system_;
    int budget_;
    PromptBundle current_;
    std::vector<PromptBundle> out_;

    bool try_append(const SourceFile& f, std::size_t first, std::size_t last) {
        PromptBundle trial = current_;
        trial.system_text = system_;
        if (!trial.chunks.empty() && trial.chunks.back().file == f.path && trial.chunks.back().end_line + 1 == first)
            trial.chunks.back() = make_chunk(f, trial.chunks.back().start_line, last);
        else
            trial.chunks.push_back(make_chunk(f, first, last));
        if (bundle_tokens(trial) > budget_) return false;
        current_ = std::move(trial);
        return true;
    }

    void flush() {
        current_.system_text = system_;
        current_.token_estimate = bundle_tokens(current_);
        out_.push_back(std::move(current_));
        current_ = PromptBundle{};
    }
};

} // namespace detail

/// Builds line-numbered prompts for one page (script, then markup). Code is
/// split at function boundaries when it does not fit, by lines otherwise.
inline std::vector<PromptBundle> build_prompt(const PageUnit& unit, const Taxonomy& taxonomy, int budget_tokens,
                                              bool include_markup = true) {
    if (budget_tokens < kMinBudgetTokens)
        throw Error(ErrorCode::Usage, "prompt budget must be at least " + std::to_string(kMinBudgetTokens) + " tokens");
    if (trim(unit.script.text).empty()) return {};
    const auto result = extract_script_model(unit.script.text);
    std::set<std::size_t> boundaries;
    for (const auto& reg : result.model.registrations)
        for (const auto& fn : reg.functions) boundaries.insert(fn.span.line);

    detail::Packer packer(system_text(taxonomy), budget_tokens);
    std::vector<detail::Piece> pieces = detail::pieces_of(unit.script, boundaries);
    if (include_markup && unit.markup) {
        auto m = detail::pieces_of(*unit.markup, {});
        pieces.insert(pieces.end(), m.begin(), m.end());
    }
    for (const auto& p : pieces) packer.add_line_range(*p.file, p.first, p.last);
    return packer.finish();
}

} // namespace minileak::llm
