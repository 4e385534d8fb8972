#pragma once

#include <atomic>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "minileak/llm/backend.hpp"
#include "minileak/llm/prompt.hpp"
#include "minileak/llm/reply.hpp"
#include "minileak/ruleflow.hpp"

namespace minileak::llm {

struct BundleError {
    std::string file;
    std::size_t start_line = 0;
    ErrorCode code = ErrorCode::BackendUnreachable;
    std::string message;
    bool operator==(const BundleError&) const = default;
};

struct DetectResult {
    std::vector<Finding> findings;
    std::vector<BundleError> errors;
    std::vector<LlmReply> replies; // bundle order; empty raw_text for failed bundles
    std::vector<std::string> parse_failures; // "<file>:<start line>: <reason>"
    std::size_t dropped_out_of_range = 0;
};

struct DetectOptions {
    int budget_tokens = 4096;
    int max_inflight = 4;
    bool include_markup = true;
};

/// Runs every bundle through the backend (at most `max_inflight` at once) and
/// collects findings in canonical order. Per-bundle failures become errors.
inline DetectResult detect_bundles(Backend& backend, const std::vector<PromptBundle>& bundles, int max_inflight) {
    DetectResult out;
    struct Slot {
        std::optional<LlmReply> reply;
        std::optional<BundleError> error;
    };
    std::vector<Slot> slots(bundles.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < bundles.size(); i = next++) {
            const auto& b = bundles[i];
            const auto file = b.chunks.empty() ? std::string{} : b.chunks.front().file;
            const auto start = b.chunks.empty() ? 0 : b.chunks.front().start_line;
            try {
                slots[i].reply = invoke(backend, b);
            } catch (const Error& e) {
                slots[i].error = BundleError{file, start, e.code(), e.what()};
            } catch (const std::exception& e) {
                slots[i].error = BundleError{file, start, ErrorCode::BackendUnreachable, e.what()};
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, max_inflight)), bundles.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    for (auto& s : slots) {
        if (s.error) {
            out.errors.push_back(*s.error);
            out.replies.emplace_back();
            continue;
        }
        auto& r = *s.reply;
        if (r.parsed.failure) {
            const auto& b = bundles[static_cast<std::size_t>(&s - slots.data())];
            out.parse_failures.push_back(b.chunks.front().file + ":" + std::to_string(b.chunks.front().start_line) +
                                         ": " + r.parsed.failure->reason);
        }
        out.dropped_out_of_range += r.parsed.dropped_out_of_range;
        for (auto& f : r.parsed.findings) out.findings.push_back(f);
        out.replies.push_back(std::move(r));
    }
    canonicalize(out.findings);
    return out;
}

inline DetectResult detect(Backend& backend, const PageUnit& unit, const Taxonomy& taxonomy,
                           const DetectOptions& opts = {}) {
    const auto bundles = build_prompt(unit, taxonomy, opts.budget_tokens, opts.include_markup);
    return detect_bundles(backend, bundles, opts.max_inflight);
}

} // namespace minileak::llm
