#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "minileak/common.hpp"
#include "minileak/ruleflow.hpp"

namespace minileak {

inline constexpr std::size_t kFuseWindow = 2;

inline double noisy_or(double a, double b) { return 1.0 - (1.0 - a) * (1.0 - b); }

namespace detail {

inline std::size_t line_distance(const Finding& a, const Finding& b) {
    return a.source.line > b.source.line ? a.source.line - b.source.line : b.source.line - a.source.line;
}

inline Finding merge_pair(const Finding& r, const Finding& l) {
    Finding f;
    f.category = r.category;
    f.detector = Detector::FUSED;
    f.corroborated = true;
    f.confidence = std::clamp(noisy_or(r.confidence, l.confidence), 0.0, 1.0);
    f.disposition = severity_rank(l.disposition) > severity_rank(r.disposition) ? l.disposition : r.disposition;
    const bool left_first = r.source.line <= l.source.line;
    const Finding& first = left_first ? r : l;
    const Finding& second = left_first ? l : r;
    f.source = first.source;
    f.flow = first.flow;
    for (const auto& e : second.flow)
        if (e.line > f.flow.back().line || e.file != f.flow.back().file) f.flow.push_back(e);
    if (first.sink || second.sink) {
        const Finding& with_sink = severity_rank(first.disposition) >= severity_rank(second.disposition) ? first : second;
        f.sink = with_sink.sink ? with_sink.sink : (first.sink ? first.sink : second.sink);
    }
    if (f.disposition != Disposition::COLLECTED && !f.sink) f.sink = f.flow.back();
    for (const auto* src : {&r, &l})
        for (const auto& n : src->notes)
            if (std::find(f.notes.begin(), f.notes.end(), n) == f.notes.end()) f.notes.push_back(n);
    assign_id(f);
    return f;
}

} // namespace detail

/// Merges findings that agree on (file, category, source line within ±2) into
/// FUSED findings with noisy-or confidence; others pass through uncorroborated.
inline std::vector<Finding> fuse(const std::vector<Finding>& rule, const std::vector<Finding>& llm) {
    struct Candidate {
        std::size_t distance;
        bool same_disposition;
        std::size_t min_line;
        std::size_t i, j;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < rule.size(); ++i)
        for (std::size_t j = 0; j < llm.size(); ++j) {
            const auto& a = rule[i];
            const auto& b = llm[j];
            if (a.source.file != b.source.file || a.category != b.category) continue;
            const auto d = detail::line_distance(a, b);
            if (d > kFuseWindow) continue;
            cands.push_back({d, a.disposition == b.disposition, std::min(a.source.line, b.source.line), i, j});
        }
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
        return std::tie(x.distance, y.same_disposition, x.min_line, x.i, x.j) <
               std::tie(y.distance, x.same_disposition, y.min_line, y.i, y.j);
    });
    std::vector<bool> used_r(rule.size()), used_l(llm.size());
    std::vector<Finding> out;
    for (const auto& c : cands) {
        if (used_r[c.i] || used_l[c.j]) continue;
        used_r[c.i] = used_l[c.j] = true;
        out.push_back(detail::merge_pair(rule[c.i], llm[c.j]));
    }
    auto pass = [&](const std::vector<Finding>& xs, const std::vector<bool>& used) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (used[i]) continue;
            Finding f = xs[i];
            if (f.detector != Detector::FUSED) f.corroborated = false;
            out.push_back(std::move(f));
        }
    };
    pass(rule, used_r);
    pass(llm, used_l);
    canonicalize(out);
    return out;
}

struct ThresholdResult {
    std::vector<Finding> kept;
    std::size_t filtered = 0;
};

inline ThresholdResult apply_threshold(const std::vector<Finding>& findings, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw Error(ErrorCode::Usage, "threshold must be in [0,1]");
    ThresholdResult r;
    for (const auto& f : findings) {
        if (f.confidence >= theta) r.kept.push_back(f);
        else ++r.filtered;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Report model and serialization
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSchemaVersion = "1";
inline constexpr std::string_view kToolName = "minileak";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct ScanReport {
    std::string project_root; // basename
    std::string project_hash;
    int taxonomy_version = 1;
    double threshold = 0.0;
    std::vector<Finding> findings;
    std::map<std::string, std::size_t> parse_gaps;
    std::vector<std::string> llm_errors;
    std::size_t filtered = 0;
    std::optional<std::string> created_at;
    bool operator==(const ScanReport&) const = default;
};

enum class ReportFormat { TEXT, JSON, SARIF };

inline std::optional<ReportFormat> parse_format(std::string_view s) {
    if (s == "text") return ReportFormat::TEXT;
    if (s == "json") return ReportFormat::JSON;
    if (s == "sarif") return ReportFormat::SARIF;
    return std::nullopt;
}

using ojson = nlohmann::ordered_json;

inline ojson to_json(const Evidence& e) {
    ojson j;
    j["file"] = e.file;
    j["line"] = e.line;
    j["snippet"] = e.snippet;
    if (!e.holder.empty()) j["holder"] = e.holder;
    return j;
}

inline Evidence evidence_from_json(const nlohmann::json& j) {
    Evidence e;
    e.file = j.at("file").get<std::string>();
    e.line = j.at("line").get<std::size_t>();
    e.snippet = j.at("snippet").get<std::string>();
    if (j.contains("holder")) e.holder = j.at("holder").get<std::string>();
    return e;
}

inline ojson to_json(const Finding& f) {
    ojson j;
    j["id"] = f.id;
    j["category"] = to_string(f.category);
    j["detector"] = to_string(f.detector);
    j["disposition"] = to_string(f.disposition);
    j["severity"] = severity_label(f.disposition);
    j["confidence"] = f.confidence;
    j["source"] = to_json(f.source);
    if (f.sink) j["sink"] = to_json(*f.sink);
    j["flow"] = ojson::array();
    for (const auto& e : f.flow) j["flow"].push_back(to_json(e));
    j["corroborated"] = f.corroborated;
    if (!f.notes.empty()) j["notes"] = f.notes;
    return j;
}

inline Finding finding_from_json(const nlohmann::json& j) {
    Finding f;
    f.id = j.at("id").get<std::string>();
    auto cat = parse_category(j.at("category").get<std::string>());
    auto det = parse_detector(j.at("detector").get<std::string>());
    auto disp = parse_disposition(j.at("disposition").get<std::string>());
    if (!cat || !det || !disp) throw Error(ErrorCode::Usage, "invalid enum value in finding " + f.id);
    f.category = *cat;
    f.detector = *det;
    f.disposition = *disp;
    f.confidence = j.at("confidence").get<double>();
    f.source = evidence_from_json(j.at("source"));
    if (j.contains("sink")) f.sink = evidence_from_json(j.at("sink"));
    for (const auto& e : j.at("flow")) f.flow.push_back(evidence_from_json(e));
    f.corroborated = j.at("corroborated").get<bool>();
    if (j.contains("notes")) f.notes = j.at("notes").get<std::vector<std::string>>();
    return f;
}

inline ojson to_json(const ScanReport& r) {
    ojson j;
    j["schema_version"] = kSchemaVersion;
    j["project"] = {{"root", r.project_root}, {"hash", r.project_hash}};
    j["taxonomy_version"] = r.taxonomy_version;
    j["threshold"] = r.threshold;
    j["findings"] = ojson::array();
    for (const auto& f : r.findings) j["findings"].push_back(to_json(f));
    j["parse_gaps"] = ojson::object();
    for (const auto& [file, n] : r.parse_gaps) j["parse_gaps"][file] = n;
    j["llm_errors"] = r.llm_errors;
    j["filtered_below_threshold"] = r.filtered;
    if (r.created_at) j["created_at"] = *r.created_at;
    return j;
}

inline ScanReport report_from_json(const nlohmann::json& j) {
    ScanReport r;
    r.project_root = j.at("project").at("root").get<std::string>();
    r.project_hash = j.at("project").at("hash").get<std::string>();
    r.taxonomy_version = j.at("taxonomy_version").get<int>();
    r.threshold = j.at("threshold").get<double>();
    for (const auto& f : j.at("findings")) r.findings.push_back(finding_from_json(f));
    for (const auto& [file, n] : j.at("parse_gaps").items()) r.parse_gaps[file] = n.get<std::size_t>();
    r.llm_errors = j.at("llm_errors").get<std::vector<std::string>>();
    if (j.contains("filtered_below_threshold")) r.filtered = j.at("filtered_below_threshold").get<std::size_t>();
    if (j.contains("created_at")) r.created_at = j.at("created_at").get<std::string>();
    return r;
}

inline std::string format_confidence(double c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", c);
    return buf;
}

inline std::string text_line(const Finding& f) {
    std::string s;
    s += severity_label(f.disposition);
    s += ' ';
    s += to_string(f.category);
    s += ' ';
    s += f.source.file + ":" + std::to_string(f.source.line);
    s += ' ';
    s += to_string(f.disposition);
    s += " (" + format_confidence(f.confidence) + ")";
    s += " — ";
    s += f.source.snippet;
    return s;
}

inline std::string sarif_level(Disposition d) {
    switch (d) {
    case Disposition::TRANSMITTED:
    case Disposition::STORED_GLOBAL: return "error";
    case Disposition::NAV_EXPOSED:
    case Disposition::STORED_LOCAL: return "warning";
    case Disposition::COLLECTED: return "note";
    }
    return "note";
}

inline ojson to_sarif(const ScanReport& r) {
    ojson rules = ojson::array();
    for (auto name : kCategoryNames)
        rules.push_back({{"id", name}, {"shortDescription", {{"text", std::string("Sensitive data: ") + std::string(name)}}}});
    ojson results = ojson::array();
    for (const auto& f : r.findings) {
        ojson res;
        res["ruleId"] = to_string(f.category);
        res["level"] = sarif_level(f.disposition);
        res["message"] = {{"text", std::string(to_string(f.category)) + " " + std::string(to_string(f.disposition)) +
                                       " (" + std::string(to_string(f.detector)) + ", confidence " +
                                       format_confidence(f.confidence) + ")"}};
        res["locations"] = ojson::array({{{"physicalLocation",
                                           {{"artifactLocation", {{"uri", f.source.file}}},
                                            {"region", {{"startLine", f.source.line}, {"snippet", {{"text", f.source.snippet}}}}}}}}});
        res["partialFingerprints"] = {{"minileakFindingId/v1", f.id}};
        res["properties"] = {{"disposition", to_string(f.disposition)},
                             {"detector", to_string(f.detector)},
                             {"confidence", f.confidence},
                             {"corroborated", f.corroborated}};
        results.push_back(std::move(res));
    }
    ojson run;
    run["tool"] = {{"driver", {{"name", kToolName}, {"version", kToolVersion}, {"rules", rules}}}};
    run["results"] = std::move(results);
    ojson j;
    j["$schema"] = "https://json.schemastore.org/sarif-2.1.0.json";
    j["version"] = "2.1.0";
    j["runs"] = ojson::array({run});
    return j;
}

inline std::string emit(const ScanReport& r, ReportFormat format) {
    switch (format) {
    case ReportFormat::JSON: return to_json(r).dump(2) + "\n";
    case ReportFormat::SARIF: return to_sarif(r).dump(2) + "\n";
    case ReportFormat::TEXT: break;
    }
    std::string out;
    for (const auto& f : r.findings) out += text_line(f) + "\n";
    out += std::to_string(r.findings.size()) + " finding(s)";
    if (r.filtered) out += ", " + std::to_string(r.filtered) + " below threshold";
    out += "\n";
    return out;
}

} // namespace minileak
