#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

namespace minileak {

enum class ErrorCode {
    RootNotFound,
    AppConfigMissing,
    OverrideParse,
    PatternSyntax,
    BackendUnreachable,
    AuthFailed,
    BudgetExceeded,
    UnknownCategoryInLabels,
    CorpusLayoutError,
    Usage,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::AppConfigMissing: return "AppConfigMissing";
    case ErrorCode::OverrideParse: return "OverrideParse";
    case ErrorCode::PatternSyntax: return "PatternSyntax";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::AuthFailed: return "AuthFailed";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::UnknownCategoryInLabels: return "UnknownCategoryInLabels";
    case ErrorCode::CorpusLayoutError: return "CorpusLayoutError";
    case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

/// Every recoverable failure in the library is reported as an Error carrying
/// a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Closed enums shared by every module. Serialized names are stable.
// ---------------------------------------------------------------------------

enum class SensitiveCategory : std::uint8_t {
    SURNAME,
    GIVEN_NAME,
    FULL_NAME,
    NICKNAME,
    GENDER,
    BIRTHDATE,
    BIRTH_TIME,
    EMAIL,
    PHONE,
    WECHAT_ID,
    OPENID,
    LOCATION,
    ADDRESS,
    PAYMENT,
    ID_NUMBER,
    AVATAR,
    OTHER_PII,
};

inline constexpr std::array<std::string_view, 17> kCategoryNames = {
    "SURNAME",  "GIVEN_NAME", "FULL_NAME", "NICKNAME", "GENDER",   "BIRTHDATE",
    "BIRTH_TIME", "EMAIL",    "PHONE",     "WECHAT_ID", "OPENID",  "LOCATION",
    "ADDRESS",  "PAYMENT",    "ID_NUMBER", "AVATAR",   "OTHER_PII",
};

inline std::string_view to_string(SensitiveCategory c) {
    return kCategoryNames[static_cast<std::size_t>(c)];
}

inline std::optional<SensitiveCategory> parse_category(std::string_view s) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        if (kCategoryNames[i] == s) return static_cast<SensitiveCategory>(i);
    return std::nullopt;
}

inline std::vector<SensitiveCategory> all_categories() {
    std::vector<SensitiveCategory> out;
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        out.push_back(static_cast<SensitiveCategory>(i));
    return out;
}

enum class Disposition : std::uint8_t {
    COLLECTED,
    STORED_GLOBAL,
    STORED_LOCAL,
    TRANSMITTED,
    NAV_EXPOSED,
};

inline constexpr std::array<std::string_view, 5> kDispositionNames = {
    "COLLECTED", "STORED_GLOBAL", "STORED_LOCAL", "TRANSMITTED", "NAV_EXPOSED",
};

inline std::string_view to_string(Disposition d) {
    return kDispositionNames[static_cast<std::size_t>(d)];
}

inline std::optional<Disposition> parse_disposition(std::string_view s) {
    for (std::size_t i = 0; i < kDispositionNames.size(); ++i)
        if (kDispositionNames[i] == s) return static_cast<Disposition>(i);
    return std::nullopt;
}

/// Severity rank: TRANSMITTED > STORED_GLOBAL > NAV_EXPOSED > STORED_LOCAL > COLLECTED.
inline int severity_rank(Disposition d) {
    switch (d) {
    case Disposition::TRANSMITTED: return 4;
    case Disposition::STORED_GLOBAL: return 3;
    case Disposition::NAV_EXPOSED: return 2;
    case Disposition::STORED_LOCAL: return 1;
    case Disposition::COLLECTED: return 0;
    }
    return 0;
}

inline std::string_view severity_label(Disposition d) {
    switch (severity_rank(d)) {
    case 4: return "CRITICAL";
    case 3: return "HIGH";
    case 2: return "MEDIUM";
    case 1: return "LOW";
    default: return "INFO";
    }
}

enum class Detector : std::uint8_t { RULE, LLM, FUSED };

inline std::string_view to_string(Detector d) {
    switch (d) {
    case Detector::RULE: return "RULE";
    case Detector::LLM: return "LLM";
    case Detector::FUSED: return "FUSED";
    }
    return "RULE";
}

inline std::optional<Detector> parse_detector(std::string_view s) {
    if (s == "RULE") return Detector::RULE;
    if (s == "LLM") return Detector::LLM;
    if (s == "FUSED") return Detector::FUSED;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Small text utilities
// ---------------------------------------------------------------------------

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c); });
    return out;
}

inline std::string_view trim(std::string_view s) {
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; };
    while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
    return s;
}

/// Strict UTF-8 validation (rejects overlongs, surrogates, > U+10FFFF).
inline bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    const auto n = s.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            ++i;
            continue;
        }
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > n) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

/// Truncate to at most `max_bytes` without splitting a UTF-8 sequence.
inline std::string_view utf8_truncate(std::string_view s, std::size_t max_bytes) {
    if (s.size() <= max_bytes) return s;
    std::size_t cut = max_bytes;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    return s.substr(0, cut);
}

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0F]);
    }
    return out;
}

} // namespace minileak
