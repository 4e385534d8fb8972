#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "minileak/common.hpp"

namespace minileak {

enum class FileKind { SCRIPT, MARKUP, CONFIG, STYLE, OTHER };

inline std::string_view to_string(FileKind k) {
    switch (k) {
    case FileKind::SCRIPT: return "SCRIPT";
    case FileKind::MARKUP: return "MARKUP";
    case FileKind::CONFIG: return "CONFIG";
    case FileKind::STYLE: return "STYLE";
    case FileKind::OTHER: return "OTHER";
    }
    return "OTHER";
}

/// Pure function of the extension; case-sensitive like the platform itself.
inline FileKind classify_file(std::string_view path) {
    const auto slash = path.find_last_of('/');
    const auto base = slash == std::string_view::npos ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    if (dot == std::string_view::npos || dot == 0) return FileKind::OTHER;
    const auto ext = base.substr(dot);
    if (ext == ".js" || ext == ".wxs") return FileKind::SCRIPT;
    if (ext == ".wxml") return FileKind::MARKUP;
    if (ext == ".json") return FileKind::CONFIG;
    if (ext == ".wxss") return FileKind::STYLE;
    return FileKind::OTHER;
}

inline std::vector<std::size_t> compute_line_starts(std::string_view text) {
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i < text.size(); ++i)
        if (text[i] == '\n' && i + 1 < text.size()) starts.push_back(i + 1);
    return starts;
}

struct SourceFile {
    std::string path; // relative, '/'-separated, normalized
    FileKind kind = FileKind::OTHER;
    std::string text;
    std::vector<std::size_t> line_starts{0};

    static SourceFile from_text(std::string path, std::string text) {
        SourceFile f;
        f.kind = classify_file(path);
        f.path = std::move(path);
        f.text = std::move(text);
        f.line_starts = compute_line_starts(f.text);
        return f;
    }

    std::size_t line_count() const { return text.empty() ? 0 : line_starts.size(); }

    /// 1-based line containing byte `offset`.
    std::size_t line_of(std::size_t offset) const {
        auto it = std::upper_bound(line_starts.begin(), line_starts.end(), offset);
        return static_cast<std::size_t>(it - line_starts.begin());
    }

    /// Text of 1-based `line` without its terminating newline. Empty when out of range.
    std::string_view line_text(std::size_t line) const {
        if (line == 0 || line > line_starts.size()) return {};
        const auto begin = line_starts[line - 1];
        auto end = line < line_starts.size() ? line_starts[line] : text.size();
        if (end > begin && text[end - 1] == '\n') --end;
        return std::string_view(text).substr(begin, end - begin);
    }
};

struct PageUnit {
    std::string page_path;
    SourceFile script;
    std::optional<SourceFile> markup;
    std::optional<SourceFile> page_config;
};

struct SkippedFile {
    std::string path;
    std::string reason;
};

struct AppConfig {
    std::vector<std::string> pages;
    nlohmann::ordered_json raw;
};

struct LoadOptions {
    std::uintmax_t max_file_bytes = 2u * 1024u * 1024u;
    /// Add `app.js` as a synthetic page unit named "app".
    bool include_app_script = true;
};

struct MiniappProject {
    std::string root;
    AppConfig app_config;
    std::vector<SourceFile> files;
    std::vector<PageUnit> pages;
    std::vector<std::string> missing_pages;
    std::vector<SkippedFile> skipped;

    const SourceFile* find(std::string_view rel) const {
        auto it = std::lower_bound(files.begin(), files.end(), rel,
                                   [](const SourceFile& f, std::string_view p) { return f.path < p; });
        return it != files.end() && it->path == rel ? &*it : nullptr;
    }
};

namespace detail {

/// Normalizes a '/'-separated relative path. Returns nullopt when it escapes
/// its base or is absolute after stripping leading slashes.
inline std::optional<std::string> normalize_relative(std::string_view p) {
    while (!p.empty() && p.front() == '/') p.remove_prefix(1);
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i <= p.size()) {
        auto j = p.find('/', i);
        if (j == std::string_view::npos) j = p.size();
        auto seg = p.substr(i, j - i);
        if (seg == "..") {
            if (parts.empty()) return std::nullopt;
            parts.pop_back();
        } else if (!seg.empty() && seg != ".") {
            parts.emplace_back(seg);
        }
        i = j + 1;
    }
    if (parts.empty()) return std::nullopt;
    std::string out;
    for (const auto& s : parts) {
        if (!out.empty()) out.push_back('/');
        out += s;
    }
    return out;
}

inline std::optional<std::string> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) return std::nullopt;
    return std::move(ss).str();
}

} // namespace detail

/// One unit per resolvable page, in app config order; `app` last when present.
inline std::vector<PageUnit> page_units(const MiniappProject& project) { return project.pages; }

inline MiniappProject load_project(const std::filesystem::path& root_dir, const LoadOptions& opts = {}) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root_dir, ec))
        throw Error(ErrorCode::RootNotFound, root_dir.string());

    const auto root = fs::weakly_canonical(root_dir, ec).lexically_normal();
    MiniappProject project;
    project.root = root.generic_string();

    const auto app_json = root / "app.json";
    if (!fs::is_regular_file(app_json, ec))
        throw Error(ErrorCode::AppConfigMissing, "no app.json at " + project.root);

    for (fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec), end;
         it != end; it.increment(ec)) {
        if (ec) break;
        const auto& entry = *it;
        const auto rel_raw = entry.path().lexically_relative(root).generic_string();
        auto rel = detail::normalize_relative(rel_raw);
        if (entry.is_symlink(ec)) {
            project.skipped.push_back({rel.value_or(rel_raw), "symlink"});
            if (entry.is_directory(ec)) it.disable_recursion_pending();
            continue;
        }
        if (!entry.is_regular_file(ec)) continue;
        if (!rel) {
            project.skipped.push_back({rel_raw, "path escapes root"});
            continue;
        }
        const auto size = entry.file_size(ec);
        if (ec) {
            project.skipped.push_back({*rel, "unreadable"});
            ec.clear();
            continue;
        }
        if (size > opts.max_file_bytes) {
            project.skipped.push_back({*rel, "oversized (" + std::to_string(size) + " bytes)"});
            continue;
        }
        auto text = detail::read_file(entry.path());
        if (!text) {
            project.skipped.push_back({*rel, "unreadable"});
            continue;
        }
        if (!is_valid_utf8(*text)) {
            project.skipped.push_back({*rel, "non-UTF-8 content"});
            continue;
        }
        project.files.push_back(SourceFile::from_text(*rel, std::move(*text)));
    }
    std::sort(project.files.begin(), project.files.end(),
              [](const SourceFile& a, const SourceFile& b) { return a.path < b.path; });
    std::sort(project.skipped.begin(), project.skipped.end(),
              [](const SkippedFile& a, const SkippedFile& b) { return a.path < b.path; });

    const auto* app_file = project.find("app.json");
    if (!app_file) throw Error(ErrorCode::AppConfigMissing, "app.json could not be read");
    auto parsed = nlohmann::ordered_json::parse(app_file->text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw Error(ErrorCode::AppConfigMissing, "app.json is not a JSON object");
    project.app_config.raw = parsed;
    if (auto pages = parsed.find("pages"); pages != parsed.end() && pages->is_array()) {
        for (const auto& p : *pages)
            if (p.is_string()) project.app_config.pages.push_back(p.get<std::string>());
    }

    for (const auto& page : project.app_config.pages) {
        auto norm = detail::normalize_relative(page);
        const SourceFile* script = norm ? project.find(*norm + ".js") : nullptr;
        if (!script) {
            project.missing_pages.push_back(page);
            continue;
        }
        PageUnit unit{*norm, *script, std::nullopt, std::nullopt};
        if (const auto* m = project.find(*norm + ".wxml")) unit.markup = *m;
        if (const auto* c = project.find(*norm + ".json")) unit.page_config = *c;
        project.pages.push_back(std::move(unit));
    }
    if (opts.include_app_script) {
        if (const auto* app_js = project.find("app.js")) project.pages.push_back(PageUnit{"app", *app_js, std::nullopt, std::nullopt});
    }
    return project;
}

/// Content-addressed identity of the loaded tree.
inline std::string project_hash(const MiniappProject& project) {
    std::string buf;
    for (const auto& f : project.files) {
        buf += f.path;
        buf.push_back('\0');
        buf += sha256_hex(f.text);
        buf.push_back('\n');
    }
    return sha256_hex(buf);
}

inline nlohmann::ordered_json to_json(const MiniappProject& project) {
    nlohmann::ordered_json j;
    j["root"] = project.root;
    j["pages_config"] = project.app_config.pages;
    auto& files = j["files"] = nlohmann::ordered_json::array();
    for (const auto& f : project.files)
        files.push_back({{"path", f.path}, {"kind", to_string(f.kind)}, {"sha256", sha256_hex(f.text)},
                         {"lines", f.line_count()}});
    auto& pages = j["pages"] = nlohmann::ordered_json::array();
    for (const auto& p : project.pages)
        pages.push_back({{"page", p.page_path},
                         {"script", p.script.path},
                         {"markup", p.markup ? nlohmann::ordered_json(p.markup->path) : nlohmann::ordered_json()},
                         {"config", p.page_config ? nlohmann::ordered_json(p.page_config->path) : nlohmann::ordered_json()}});
    j["missing_pages"] = project.missing_pages;
    auto& skipped = j["skipped"] = nlohmann::ordered_json::array();
    for (const auto& s : project.skipped) skipped.push_back({{"path", s.path}, {"reason", s.reason}});
    return j;
}

} // namespace minileak
