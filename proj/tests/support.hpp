#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "minileak/ingest.hpp"
#include "minileak/script_model.hpp"

namespace minileak::testing {

inline std::filesystem::path fixtures() { return MINILEAK_FIXTURES; }
inline std::filesystem::path bazi_root() { return fixtures() / "bazi"; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

inline SourceFile bazi_script() {
    return SourceFile::from_text("pages/input/input.js", slurp(bazi_root() / "pages/input/input.js"));
}

/// Builds a chain from dotted text such as `getApp().globalData.openid`.
inline MemberChain chain(std::string_view text) {
    MemberChain c;
    std::size_t i = 0;
    while (i <= text.size()) {
        auto j = text.find('.', i);
        if (j == std::string_view::npos) j = text.size();
        auto seg = text.substr(i, j - i);
        ChainSegment s;
        if (seg.size() > 2 && seg.substr(seg.size() - 2) == "()") {
            s.is_call = true;
            seg.remove_suffix(2);
        }
        s.name = std::string(seg);
        c.segments.push_back(std::move(s));
        i = j + 1;
    }
    return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("minileak-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(std::string_view rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

struct CliRun {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs the built CLI binary with `args` (shell-quoted by the caller).
inline CliRun run_cli_binary(const std::string& args) {
    TempDir tmp;
    const auto out_path = tmp / "stdout";
    const auto err_path = tmp / "stderr";
    const std::string cmd = std::string("'") + MINILEAK_CLI + "' " + args + " >'" + out_path.string() + "' 2>'" +
                            err_path.string() + "'";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

} // namespace minileak::testing
