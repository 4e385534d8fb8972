#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "minileak/script_model.hpp"

namespace minileak {

struct FormInput {
    std::string name;
    std::string widget; // input, textarea, picker, radio-group, ...
    std::size_t line = 1;
    bool operator==(const FormInput&) const = default;
};

struct MarkupForm {
    std::string submit_handler;
    std::vector<FormInput> inputs; // document order
    Span span;
    bool operator==(const MarkupForm&) const = default;
};

namespace detail {

struct Tag {
    std::string name;
    std::map<std::string, std::string> attrs;
    bool closing = false;
    bool self_closing = false;
    std::size_t begin = 0, end = 0;
};

inline bool is_tag_name_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || (u >= '0' && u <= '9') || c == '-' || c == '_' ||
           c == ':';
}

/// Parses the tag starting at text[i] == '<'. Returns false for anything that
/// is not a well-formed-enough tag; the caller then skips one byte.
inline bool scan_tag(std::string_view text, std::size_t i, Tag& tag) {
    std::size_t j = i + 1;
    tag = Tag{};
    tag.begin = i;
    if (j < text.size() && text[j] == '/') {
        tag.closing = true;
        ++j;
    }
    const auto name_start = j;
    while (j < text.size() && is_tag_name_char(text[j])) ++j;
    if (j == name_start) return false;
    tag.name = to_lower(text.substr(name_start, j - name_start));
    while (j < text.size()) {
        while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\n' || text[j] == '\r')) ++j;
        if (j >= text.size()) break;
        if (text[j] == '>') {
            tag.end = j + 1;
            return true;
        }
        if (text[j] == '/' && j + 1 < text.size() && text[j + 1] == '>') {
            tag.self_closing = true;
            tag.end = j + 2;
            return true;
        }
        if (text[j] == '<') break; // unterminated tag; resume scanning here
        const auto an = j;
        while (j < text.size() && text[j] != '=' && text[j] != '>' && text[j] != '/' && text[j] != ' ' &&
               text[j] != '\t' && text[j] != '\n' && text[j] != '\r' && text[j] != '<')
            ++j;
        std::string attr(text.substr(an, j - an));
        if (attr.empty()) {
            ++j;
            continue;
        }
        std::string value;
        if (j < text.size() && text[j] == '=') {
            ++j;
            if (j < text.size() && (text[j] == '"' || text[j] == '\'')) {
                const char q = text[j];
                const auto close = text.find(q, j + 1);
                if (close == std::string_view::npos) return false;
                value = std::string(text.substr(j + 1, close - j - 1));
                j = close + 1;
            } else {
                const auto vs = j;
                while (j < text.size() && text[j] != ' ' && text[j] != '>' && text[j] != '\n' && text[j] != '\t') ++j;
                value = std::string(text.substr(vs, j - vs));
            }
        }
        tag.attrs[to_lower(attr)] = value;
    }
    tag.end = j;
    return true;
}

inline bool is_form_widget(std::string_view tag) {
    return tag == "input" || tag == "textarea" || tag == "picker" || tag == "picker-view" || tag == "radio-group" ||
           tag == "checkbox-group" || tag == "switch" || tag == "slider" || tag == "editor";
}

inline std::size_t line_at(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t k = 0; k < offset && k < text.size(); ++k)
        if (text[k] == '\n') ++line;
    return line;
}

} // namespace detail

/// Finds `<form bindsubmit="H">` elements and the named widgets inside them.
/// Comments are skipped, unclosed forms end at EOF.
inline std::vector<MarkupForm> extract_markup_forms(std::string_view text) {
    std::vector<MarkupForm> forms;
    std::vector<std::size_t> open; // indexes into forms
    std::size_t i = 0;
    auto close_form = [&](std::size_t end) {
        auto& f = forms[open.back()];
        f.span.end = end;
        f.span.end_line = detail::line_at(text, end == 0 ? 0 : end - 1);
        open.pop_back();
    };
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        if (text.substr(i, 4) == "<!--") {
            const auto end = text.find("-->", i + 4);
            i = end == std::string_view::npos ? text.size() : end + 3;
            continue;
        }
        detail::Tag tag;
        if (!detail::scan_tag(text, i, tag)) {
            ++i;
            continue;
        }
        i = std::max(tag.end, i + 1);
        if (tag.name == "wxs" && !tag.closing && !tag.self_closing) {
            const auto end = text.find("</wxs>", i);
            i = end == std::string_view::npos ? text.size() : end + 6;
            continue;
        }
        if (tag.name == "form") {
            if (tag.closing) {
                if (!open.empty()) close_form(tag.end);
                continue;
            }
            MarkupForm form;
            for (auto key : {"bindsubmit", "bind:submit", "catchsubmit", "catch:submit"}) {
                if (auto it = tag.attrs.find(key); it != tag.attrs.end()) {
                    form.submit_handler = it->second;
                    break;
                }
            }
            form.span = Span{tag.begin, tag.end, detail::line_at(text, tag.begin), detail::line_at(text, tag.end - 1)};
            forms.push_back(std::move(form));
            if (!tag.self_closing) open.push_back(forms.size() - 1);
            continue;
        }
        if (!tag.closing && !open.empty() && detail::is_form_widget(tag.name)) {
            if (auto it = tag.attrs.find("name"); it != tag.attrs.end() && !it->second.empty())
                forms[open.back()].inputs.push_back({it->second, tag.name, detail::line_at(text, tag.begin)});
        }
    }
    while (!open.empty()) close_form(text.size());
    return forms;
}

} // namespace minileak
