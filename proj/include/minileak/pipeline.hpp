#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "minileak/common.hpp"
#include "minileak/ingest.hpp"
#include "minileak/llm/backend.hpp"
#include "minileak/llm/detect.hpp"
#include "minileak/markup.hpp"
#include "minileak/parser.hpp"
#include "minileak/report.hpp"
#include "minileak/ruleflow.hpp"
#include "minileak/taxonomy.hpp"

namespace minileak {

enum class DetectorMode { RULE, LLM, BOTH };

inline std::optional<DetectorMode> parse_detector_mode(std::string_view s) {
    if (s == "rule") return DetectorMode::RULE;
    if (s == "llm") return DetectorMode::LLM;
    if (s == "both") return DetectorMode::BOTH;
    return std::nullopt;
}

struct ScanOptions {
    DetectorMode detector = DetectorMode::RULE;
    double threshold = 0.0;
    Taxonomy taxonomy = builtin_taxonomy();
    bool deterministic = false;
    llm::DetectOptions llm;
    llm::Backend* backend = nullptr; // required for LLM and BOTH
    LoadOptions load;
};

struct ScanOutcome {
    ScanReport report;
    std::vector<std::string> diagnostics; // skipped files, missing pages
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Rule findings for one page plus its parse-gap count.
inline std::vector<Finding> rule_findings(const PageUnit& unit, const Taxonomy& taxonomy, std::size_t* gap_count = nullptr) {
    const auto result = extract_script_model(unit.script.text);
    if (gap_count) *gap_count = result.gaps.size();
    std::vector<MarkupForm> forms;
    if (unit.markup) forms = extract_markup_forms(unit.markup->text);
    return analyze_page(result.model, unit.script, forms, taxonomy);
}

inline ScanOutcome scan_project(const std::filesystem::path& root, const ScanOptions& opts) {
    if (opts.detector != DetectorMode::RULE && !opts.backend)
        throw Error(ErrorCode::Usage, "LLM detection needs a backend (--mock-llm or --llm-endpoint)");
    const auto project = load_project(root, opts.load);
    ScanOutcome out;
    for (const auto& s : project.skipped) out.diagnostics.push_back("skipped " + s.path + ": " + s.reason);
    for (const auto& m : project.missing_pages) out.diagnostics.push_back("page listed in app.json not found: " + m);

    auto& rep = out.report;
    rep.project_root = std::filesystem::weakly_canonical(root).filename().string();
    if (rep.project_root.empty()) rep.project_root = root.filename().string();
    rep.project_hash = project_hash(project);
    rep.taxonomy_version = opts.taxonomy.version;
    rep.threshold = opts.threshold;

    std::vector<Finding> rule, llm_found;
    for (const auto& unit : project.pages) {
        if (opts.detector != DetectorMode::LLM) {
            std::size_t gaps = 0;
            auto f = rule_findings(unit, opts.taxonomy, &gaps);
            rep.parse_gaps[unit.script.path] = gaps;
            rule.insert(rule.end(), f.begin(), f.end());
        }
        if (opts.detector != DetectorMode::RULE) {
            auto d = llm::detect(*opts.backend, unit, opts.taxonomy, opts.llm);
            for (const auto& e : d.errors)
                rep.llm_errors.push_back(e.file + ":" + std::to_string(e.start_line) + ": " + e.message);
            for (const auto& p : d.parse_failures) rep.llm_errors.push_back(p);
            llm_found.insert(llm_found.end(), d.findings.begin(), d.findings.end());
        }
    }
    canonicalize(rule);
    canonicalize(llm_found);
    std::vector<Finding> all;
    switch (opts.detector) {
    case DetectorMode::RULE: all = std::move(rule); break;
    case DetectorMode::LLM: all = std::move(llm_found); break;
    case DetectorMode::BOTH: all = fuse(rule, llm_found); break;
    }
    auto kept = apply_threshold(all, opts.threshold);
    rep.findings = std::move(kept.kept);
    rep.filtered = kept.filtered;
    if (!opts.deterministic) rep.created_at = utc_timestamp();
    return out;
}

} // namespace minileak
