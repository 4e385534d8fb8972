#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "minileak/common.hpp"
#include "minileak/eval.hpp"
#include "minileak/llm/backend.hpp"
#include "minileak/llm/http_transport.hpp"
#include "minileak/pipeline.hpp"
#include "minileak/report.hpp"
#include "minileak/taxonomy.hpp"

namespace minileak::cli {

inline constexpr int kExitClean = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitError = 2;

inline constexpr const char* kEndpointEnv = "MINILEAK_LLM_ENDPOINT";
inline constexpr const char* kModelEnv = "MINILEAK_LLM_MODEL";

struct CliConfig {
    std::string project;
    std::string detector = "rule";
    double threshold = 0.0;
    std::string format = "text";
    std::string out_path;
    std::string llm_endpoint;
    std::string llm_model;
    std::string mock_llm;
    std::string taxonomy_path;
    bool deterministic = false;
    int max_inflight = 4;
    int llm_budget = 4096;
    // eval
    std::string corpus;
    double f1_floor = 0.0;
    std::string policy = "category-per-file";
    // explain
    std::string finding_id;
};

namespace detail {

/// Backend plus the transport it borrows.
struct BackendHolder {
    std::unique_ptr<llm::Transport> transport;
    std::unique_ptr<llm::Backend> backend;
};

inline BackendHolder make_backend(const CliConfig& cfg, DetectorMode mode) {
    BackendHolder h;
    if (mode == DetectorMode::RULE) return h;
    if (!cfg.mock_llm.empty()) {
        h.backend = std::make_unique<llm::MockBackend>(cfg.mock_llm);
        return h;
    }
    if (cfg.llm_endpoint.empty())
        throw Error(ErrorCode::Usage, "--detector llm/both needs --mock-llm or --llm-endpoint");
    llm::BackendConfig bc;
    bc.endpoint = cfg.llm_endpoint;
    bc.model = cfg.llm_model;
    bc.max_inflight = cfg.max_inflight;
    h.transport = std::make_unique<llm::HttpTransport>();
    h.backend = std::make_unique<llm::LiveBackend>(bc, *h.transport);
    return h;
}

inline Taxonomy effective_taxonomy(const CliConfig& cfg) {
    auto t = builtin_taxonomy();
    if (!cfg.taxonomy_path.empty()) t = load_overrides(cfg.taxonomy_path, t);
    return t;
}

inline DetectorMode detector_mode(const CliConfig& cfg) {
    auto m = parse_detector_mode(cfg.detector);
    if (!m) throw Error(ErrorCode::Usage, "--detector must be rule, llm or both");
    return *m;
}

inline ScanOptions scan_options(const CliConfig& cfg, DetectorMode mode, llm::Backend* backend) {
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0)) throw Error(ErrorCode::Usage, "--threshold must be in [0,1]");
    if (cfg.max_inflight < 1 || cfg.max_inflight > 1024) throw Error(ErrorCode::Usage, "--max-inflight must be in [1,1024]");
    ScanOptions o;
    o.detector = mode;
    o.threshold = cfg.threshold;
    o.taxonomy = effective_taxonomy(cfg);
    o.deterministic = cfg.deterministic;
    o.llm.max_inflight = cfg.max_inflight;
    o.llm.budget_tokens = cfg.llm_budget;
    o.backend = backend;
    return o;
}

inline void write_output(const CliConfig& cfg, const std::string& bytes, std::ostream& out) {
    if (cfg.out_path.empty()) {
        out << bytes;
        out.flush();
        return;
    }
    std::ofstream f(cfg.out_path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Usage, "cannot write " + cfg.out_path);
    f << bytes;
}

inline void apply_env(CLI::App& sub, CliConfig& cfg) {
    if (sub.count("--llm-endpoint") == 0)
        if (const char* v = std::getenv(kEndpointEnv); v && *v) cfg.llm_endpoint = v;
    if (sub.count("--llm-model") == 0)
        if (const char* v = std::getenv(kModelEnv); v && *v) cfg.llm_model = v;
}

inline void add_scan_options(CLI::App& sub, CliConfig& cfg, bool require_project) {
    auto* p = sub.add_option("--project", cfg.project, "Mini program root (directory containing app.json)");
    if (require_project) p->required();
    sub.add_option("--detector", cfg.detector, "rule, llm or both")->check(CLI::IsMember({"rule", "llm", "both"}));
    sub.add_option("--threshold", cfg.threshold, "Minimum confidence to report")->check(CLI::Range(0.0, 1.0));
    sub.add_option("--llm-endpoint", cfg.llm_endpoint, "Chat-completion endpoint URL");
    sub.add_option("--llm-model", cfg.llm_model, "Model id sent to the endpoint");
    sub.add_option("--mock-llm", cfg.mock_llm, "Directory of <sha256>.reply.txt replay fixtures");
    sub.add_option("--taxonomy", cfg.taxonomy_path, "Taxonomy override file");
    sub.add_flag("--deterministic", cfg.deterministic, "Omit the timestamp from reports");
    sub.add_option("--max-inflight", cfg.max_inflight, "Concurrent LLM requests")->check(CLI::Range(1, 1024));
    sub.add_option("--llm-budget", cfg.llm_budget, "Prompt budget in tokens per bundle")->check(CLI::Range(512, 1 << 20));
}

inline int cmd_scan(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto format = parse_format(cfg.format);
    if (!format) throw Error(ErrorCode::Usage, "--format must be text, json or sarif");
    const auto mode = detector_mode(cfg);
    auto holder = make_backend(cfg, mode);
    const auto outcome = scan_project(cfg.project, scan_options(cfg, mode, holder.backend.get()));
    for (const auto& d : outcome.diagnostics) err << "warning: " << d << "\n";
    for (const auto& e : outcome.report.llm_errors) err << "llm: " << e << "\n";
    write_output(cfg, emit(outcome.report, *format), out);
    return outcome.report.findings.empty() ? kExitClean : kExitFindings;
}

inline int cmd_explain(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto mode = detector_mode(cfg);
    auto holder = make_backend(cfg, mode);
    auto opts = scan_options(cfg, mode, holder.backend.get());
    opts.deterministic = true;
    const auto outcome = scan_project(cfg.project, opts);
    std::vector<const Finding*> hits;
    for (const auto& f : outcome.report.findings)
        if (f.id.rfind(cfg.finding_id, 0) == 0) hits.push_back(&f);
    if (hits.empty()) throw Error(ErrorCode::Usage, "no finding with id " + cfg.finding_id);
    if (hits.size() > 1) throw Error(ErrorCode::Usage, "finding id prefix " + cfg.finding_id + " is ambiguous");
    const auto& f = *hits.front();
    std::string s;
    s += f.id + "  " + std::string(severity_label(f.disposition)) + " " + std::string(to_string(f.category)) + " " +
         std::string(to_string(f.disposition)) + " " + std::string(to_string(f.detector)) + " (" +
         format_confidence(f.confidence) + ")\n";
    for (std::size_t i = 0; i < f.flow.size(); ++i) {
        const auto& e = f.flow[i];
        s += "  " + std::to_string(i + 1) + ". " + e.file + ":" + std::to_string(e.line);
        if (!e.holder.empty()) s += " [" + e.holder + "]";
        s += "  " + e.snippet + "\n";
    }
    for (const auto& n : f.notes) s += "  note: " + n + "\n";
    (void)err;
    write_output(cfg, s, out);
    return kExitClean;
}

inline int cmd_eval(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto mode = detector_mode(cfg);
    const auto policy = parse_policy(cfg.policy);
    if (!policy) throw Error(ErrorCode::Usage, "--policy must be category-per-file or line-window");
    auto holder = make_backend(cfg, mode);
    auto opts = scan_options(cfg, mode, holder.backend.get());
    opts.deterministic = true;
    const auto result = run_corpus(
        cfg.corpus,
        [&](const CorpusProject& p) {
            auto o = scan_project(p.root, opts);
            for (const auto& d : o.diagnostics) err << "warning: " << p.name << ": " << d << "\n";
            return o.report.findings;
        },
        *policy, cfg.f1_floor);
    write_output(cfg, to_json(result).dump(2) + "\n", out);
    err << "aggregate precision=" << format_confidence(result.aggregate.precision())
        << " recall=" << format_confidence(result.aggregate.recall()) << " f1=" << format_confidence(result.aggregate.f1())
        << " floor=" << format_confidence(cfg.f1_floor) << (result.passed() ? " PASS" : " FAIL") << "\n";
    return result.passed() ? kExitClean : kExitFindings;
}

inline int cmd_taxonomy(const CliConfig& cfg, std::ostream& out) {
    write_output(cfg, to_override_text(effective_taxonomy(cfg)), out);
    return kExitClean;
}

} // namespace detail

/// Entry point. Reports go to `out` (or --out); diagnostics only to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Detects collection, storage and transmission of sensitive user data in WeChat mini programs",
                 "minileak"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
    CliConfig cfg;

    auto* scan = app.add_subcommand("scan", "Scan one project and emit a report");
    detail::add_scan_options(*scan, cfg, true);
    scan->add_option("--format", cfg.format, "text, json or sarif")->check(CLI::IsMember({"text", "json", "sarif"}));
    scan->add_option("--out", cfg.out_path, "Write the report here instead of stdout");

    auto* eval = app.add_subcommand("eval", "Score a labeled corpus");
    detail::add_scan_options(*eval, cfg, false);
    eval->add_option("--corpus", cfg.corpus, "Corpus directory (one labeled project per subdirectory)")->required();
    eval->add_option("--f1-floor", cfg.f1_floor, "Exit 1 when aggregate F1 is below this")->check(CLI::Range(0.0, 1.0));
    eval->add_option("--policy", cfg.policy, "category-per-file or line-window")
        ->check(CLI::IsMember({"category-per-file", "line-window"}));
    eval->add_option("--out", cfg.out_path, "Write metrics JSON here instead of stdout");

    auto* tax = app.add_subcommand("taxonomy", "Print the effective taxonomy");
    tax->add_option("--taxonomy", cfg.taxonomy_path, "Taxonomy override file");
    tax->add_option("--out", cfg.out_path, "Write here instead of stdout");

    auto* explain = app.add_subcommand("explain", "Print the flow path of one finding");
    explain->add_option("finding-id", cfg.finding_id, "Finding id or unique prefix")->required();
    detail::add_scan_options(*explain, cfg, true);
    explain->add_option("--out", cfg.out_path, "Write here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        return kExitError;
    }
    try {
        if (scan->parsed()) {
            detail::apply_env(*scan, cfg);
            return detail::cmd_scan(cfg, out, err);
        }
        if (eval->parsed()) {
            detail::apply_env(*eval, cfg);
            return detail::cmd_eval(cfg, out, err);
        }
        if (tax->parsed()) return detail::cmd_taxonomy(cfg, out);
        if (explain->parsed()) {
            detail::apply_env(*explain, cfg);
            return detail::cmd_explain(cfg, out, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

} // namespace minileak::cli
