#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "minileak/common.hpp"
#include "minileak/ingest.hpp"
#include "minileak/ruleflow.hpp"

namespace minileak {

struct GroundTruthLabel {
    std::string file;
    SensitiveCategory category = SensitiveCategory::OTHER_PII;
    std::optional<std::size_t> line;
    std::optional<Disposition> disposition;
    bool operator==(const GroundTruthLabel&) const = default;
};

inline std::vector<GroundTruthLabel> labels_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(ErrorCode::CorpusLayoutError, "labels must be a JSON array");
    std::vector<GroundTruthLabel> out;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("file") || !e.contains("category") || !e["file"].is_string() ||
            !e["category"].is_string())
            throw Error(ErrorCode::CorpusLayoutError, "label entries need string 'file' and 'category'");
        GroundTruthLabel l;
        l.file = e["file"].get<std::string>();
        const auto cat = e["category"].get<std::string>();
        auto c = parse_category(cat);
        if (!c) throw Error(ErrorCode::UnknownCategoryInLabels, "unknown category in labels: '" + cat + "'");
        l.category = *c;
        if (e.contains("line") && !e["line"].is_null()) l.line = e["line"].get<std::size_t>();
        if (e.contains("disposition") && !e["disposition"].is_null()) {
            const auto d = e["disposition"].get<std::string>();
            l.disposition = parse_disposition(d);
            if (!l.disposition) throw Error(ErrorCode::CorpusLayoutError, "unknown disposition in labels: '" + d + "'");
        }
        out.push_back(std::move(l));
    }
    return out;
}

inline std::vector<GroundTruthLabel> load_labels(const std::filesystem::path& path) {
    auto text = detail::read_file(path);
    if (!text) throw Error(ErrorCode::CorpusLayoutError, "cannot read labels file " + path.string());
    auto j = nlohmann::json::parse(*text, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::CorpusLayoutError, "labels file is not valid JSON: " + path.string());
    return labels_from_json(j);
}

enum class MatchPolicy { CATEGORY_PER_FILE, LINE_WINDOW };

inline std::optional<MatchPolicy> parse_policy(std::string_view s) {
    if (s == "category-per-file") return MatchPolicy::CATEGORY_PER_FILE;
    if (s == "line-window") return MatchPolicy::LINE_WINDOW;
    return std::nullopt;
}

inline constexpr std::size_t kLineWindow = 2;

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;

    double precision() const { return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
    double recall() const { return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
    Counts& operator+=(const Counts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    bool operator==(const Counts&) const = default;
};

struct Metrics {
    Counts total;
    std::map<SensitiveCategory, Counts> per_category;

    std::size_t tp() const { return total.tp; }
    std::size_t fp() const { return total.fp; }
    std::size_t fn() const { return total.fn; }
    double precision() const { return total.precision(); }
    double recall() const { return total.recall(); }
    double f1() const { return total.f1(); }

    Metrics& operator+=(const Metrics& o) {
        total += o.total;
        for (const auto& [c, n] : o.per_category) per_category[c] += n;
        return *this;
    }
    bool operator==(const Metrics&) const = default;
};

/// A scorable unit: a single finding (line-window) or every finding of one
/// (file, category) pair (category-per-file).
struct ScoreUnit {
    std::string file;
    SensitiveCategory category = SensitiveCategory::OTHER_PII;
    std::size_t line = 0; // smallest source line
    std::set<Disposition> dispositions;
    std::set<std::size_t> lines;
    bool operator==(const ScoreUnit&) const = default;
};

inline std::vector<ScoreUnit> score_units(const std::vector<Finding>& findings, MatchPolicy policy) {
    std::vector<ScoreUnit> units;
    if (policy == MatchPolicy::LINE_WINDOW) {
        for (const auto& f : findings)
            units.push_back({f.source.file, f.category, f.source.line, {f.disposition}, {f.source.line}});
    } else {
        std::map<std::pair<std::string, SensitiveCategory>, ScoreUnit> by_key;
        for (const auto& f : findings) {
            auto& u = by_key[{f.source.file, f.category}];
            if (u.lines.empty() || f.source.line < u.line) u.line = f.source.line;
            u.file = f.source.file;
            u.category = f.category;
            u.dispositions.insert(f.disposition);
            u.lines.insert(f.source.line);
        }
        for (auto& [k, u] : by_key) units.push_back(std::move(u));
    }
    std::sort(units.begin(), units.end(), [](const ScoreUnit& a, const ScoreUnit& b) {
        return std::tie(a.file, a.category, a.line, a.dispositions) < std::tie(b.file, b.category, b.line, b.dispositions);
    });
    return units;
}

inline bool label_matches(const GroundTruthLabel& l, const ScoreUnit& u, MatchPolicy policy) {
    if (l.file != u.file || l.category != u.category) return false;
    if (l.disposition && !u.dispositions.count(*l.disposition)) return false;
    if (policy == MatchPolicy::LINE_WINDOW && l.line) {
        const auto d = l.line > u.line ? *l.line - u.line : u.line - *l.line;
        if (d > kLineWindow) return false;
    }
    return true;
}

inline bool label_less(const GroundTruthLabel& a, const GroundTruthLabel& b) {
    return std::tie(a.file, a.category, a.line, a.disposition) < std::tie(b.file, b.category, b.line, b.disposition);
}

/// Greedy one-to-one matching over sorted labels and sorted units.
inline Metrics score(const std::vector<Finding>& findings, std::vector<GroundTruthLabel> labels,
                     MatchPolicy policy = MatchPolicy::CATEGORY_PER_FILE) {
    const auto units = score_units(findings, policy);
    std::sort(labels.begin(), labels.end(), label_less);
    std::vector<bool> used(units.size());
    Metrics m;
    for (const auto& l : labels) {
        bool hit = false;
        for (std::size_t u = 0; u < units.size(); ++u) {
            if (used[u] || !label_matches(l, units[u], policy)) continue;
            used[u] = true;
            hit = true;
            break;
        }
        auto& c = m.per_category[l.category];
        if (hit) {
            ++m.total.tp;
            ++c.tp;
        } else {
            ++m.total.fn;
            ++c.fn;
        }
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
        if (used[u]) continue;
        ++m.total.fp;
        ++m.per_category[units[u].category].fp;
    }
    return m;
}

inline nlohmann::ordered_json to_json(const Counts& c) {
    nlohmann::ordered_json j;
    j["tp"] = c.tp;
    j["fp"] = c.fp;
    j["fn"] = c.fn;
    j["precision"] = c.precision();
    j["recall"] = c.recall();
    j["f1"] = c.f1();
    return j;
}

inline nlohmann::ordered_json to_json(const Metrics& m) {
    auto j = to_json(m.total);
    j["per_category"] = nlohmann::ordered_json::object();
    for (const auto& [c, n] : m.per_category) j["per_category"][std::string(to_string(c))] = to_json(n);
    return j;
}

// ---------------------------------------------------------------------------
// Corpus runs
// ---------------------------------------------------------------------------

struct CorpusProject {
    std::string name;
    std::filesystem::path root;
    std::filesystem::path labels;
};

/// One subdirectory per project holding `labels.json`; the project root is its
/// `project/` child when present, otherwise the subdirectory itself.
inline std::vector<CorpusProject> discover_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::CorpusLayoutError, "corpus directory not found: " + dir.string());
    std::vector<CorpusProject> out;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_directory()) continue;
        CorpusProject p;
        p.name = entry.path().filename().string();
        p.labels = entry.path() / "labels.json";
        if (!fs::is_regular_file(p.labels))
            throw Error(ErrorCode::CorpusLayoutError, "project '" + p.name + "' has no labels.json");
        p.root = fs::is_directory(entry.path() / "project") ? entry.path() / "project" : entry.path();
        out.push_back(std::move(p));
    }
    if (ec) throw Error(ErrorCode::CorpusLayoutError, "cannot list corpus directory: " + ec.message());
    if (out.empty()) throw Error(ErrorCode::CorpusLayoutError, "corpus directory has no project subdirectories");
    std::sort(out.begin(), out.end(), [](const CorpusProject& a, const CorpusProject& b) { return a.name < b.name; });
    return out;
}

struct ProjectScore {
    std::string name;
    Metrics metrics;
};

struct CorpusResult {
    std::vector<ProjectScore> projects;
    Metrics aggregate; // micro-average
    double f1_floor = 0.0;
    bool passed() const { return aggregate.f1() >= f1_floor; }
};

using ProjectScanner = std::function<std::vector<Finding>(const CorpusProject&)>;

inline CorpusResult run_corpus(const std::filesystem::path& dir, const ProjectScanner& scan,
                               MatchPolicy policy = MatchPolicy::CATEGORY_PER_FILE, double f1_floor = 0.0) {
    CorpusResult r;
    r.f1_floor = f1_floor;
    for (const auto& p : discover_corpus(dir)) {
        const auto labels = load_labels(p.labels);
        for (const auto& l : labels)
            if (!std::filesystem::is_regular_file(p.root / l.file))
                throw Error(ErrorCode::CorpusLayoutError, "label in '" + p.name + "' names a missing file: " + l.file);
        auto m = score(scan(p), labels, policy);
        r.aggregate += m;
        r.projects.push_back({p.name, std::move(m)});
    }
    return r;
}

inline nlohmann::ordered_json to_json(const CorpusResult& r) {
    nlohmann::ordered_json j;
    j["projects"] = nlohmann::ordered_json::array();
    for (const auto& p : r.projects) {
        nlohmann::ordered_json pj;
        pj["name"] = p.name;
        pj["metrics"] = to_json(p.metrics);
        j["projects"].push_back(std::move(pj));
    }
    j["aggregate"] = to_json(r.aggregate);
    j["f1_floor"] = r.f1_floor;
    j["passed"] = r.passed();
    return j;
}

} // namespace minileak
