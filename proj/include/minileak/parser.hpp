#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "minileak/lexer.hpp"
#include "minileak/script_model.hpp"

namespace minileak {

struct ExtractResult {
    ScriptModel model;
    std::vector<ParseGap> gaps;
    /// Set when the script contains no `Page(`/`App(` registration.
    bool no_registration = false;
};

namespace detail {

/// Recursive-descent recognizer over the significant tokens (comments and
/// newlines removed; a newline-before flag is kept for statement ends).
class ScriptParser {
public:
    explicit ScriptParser(const std::vector<Token>& tokens) {
        bool nl = false;
        for (const auto& t : tokens) {
            if (t.kind == TokenKind::NEWLINE) {
                nl = true;
                continue;
            }
            if (t.kind == TokenKind::COMMENT) {
                for (char c : t.lexeme)
                    if (c == '\n') nl = true;
                continue;
            }
            toks_.push_back(&t);
            nl_before_.push_back(nl);
            nl = false;
        }
    }

    ExtractResult run() {
        ExtractResult out;
        while (!at_end()) {
            const auto start = pos_;
            if (try_require(out.model)) continue;
            if (auto kind = registration_start()) {
                out.model.registrations.push_back(parse_registration(*kind, out.gaps));
                continue;
            }
            skip_statement();
            if (pos_ == start) ++pos_;
            out.gaps.push_back({span(start, pos_), "unsupported top-level statement"});
        }
        out.no_registration = out.model.registrations.empty();
        return out;
    }

private:
    std::vector<const Token*> toks_;
    std::vector<bool> nl_before_;
    std::size_t pos_ = 0;
    std::vector<std::set<std::string>> this_aliases_{{}};
    std::vector<ParseGap>* current_gaps_ = nullptr;

    /// Wraps a nested function literal; its gaps surface in the enclosing function.
    Expr function_literal(FunctionModel fn, std::size_t start) {
        if (current_gaps_)
            for (const auto& g : fn.gaps) current_gaps_->push_back(g);
        return Expr{FunctionLit{std::make_shared<const FunctionModel>(std::move(fn))}, span(start, pos_)};
    }

    // --- token helpers -----------------------------------------------------

    bool at_end() const { return pos_ >= toks_.size(); }
    const Token* peek(std::size_t k = 0) const { return pos_ + k < toks_.size() ? toks_[pos_ + k] : nullptr; }
    bool peek_punct(std::string_view p, std::size_t k = 0) const {
        const auto* t = peek(k);
        return t && t->is_punct(p);
    }
    bool peek_kw(std::string_view w, std::size_t k = 0) const {
        const auto* t = peek(k);
        return t && t->is(TokenKind::KEYWORD, w);
    }
    bool accept_punct(std::string_view p) {
        if (peek_punct(p)) {
            ++pos_;
            return true;
        }
        return false;
    }
    bool newline_before(std::size_t idx) const { return idx < nl_before_.size() && nl_before_[idx]; }

    static bool is_name_token(const Token* t) {
        return t && (t->kind == TokenKind::IDENT || t->kind == TokenKind::KEYWORD);
    }

    /// Span covering significant tokens [from, to).
    Span span(std::size_t from, std::size_t to) const {
        if (toks_.empty()) return {};
        if (from >= toks_.size()) from = toks_.size() - 1;
        if (to <= from) to = from + 1;
        if (to > toks_.size()) to = toks_.size();
        const auto* a = toks_[from];
        const auto* b = toks_[to - 1];
        std::size_t end_line = b->line;
        for (char c : b->lexeme)
            if (c == '\n') ++end_line;
        return Span{a->offset, b->end(), a->line, end_line};
    }

    /// Advances past one balanced bracket group starting at an opener.
    void skip_balanced() {
        int depth = 0;
        while (!at_end()) {
            const auto* t = toks_[pos_];
            if (t->kind == TokenKind::PUNCT) {
                if (t->lexeme == "(" || t->lexeme == "[" || t->lexeme == "{") ++depth;
                else if (t->lexeme == ")" || t->lexeme == "]" || t->lexeme == "}") --depth;
            }
            ++pos_;
            if (depth <= 0) return;
        }
    }

    /// Skips tokens until `,` or a closer at depth 0 (not consumed).
    void skip_until_separator() {
        while (!at_end()) {
            const auto* t = toks_[pos_];
            if (t->kind == TokenKind::PUNCT) {
                if (t->lexeme == "," || t->lexeme == ")" || t->lexeme == "]" || t->lexeme == "}") return;
                if (t->lexeme == "(" || t->lexeme == "[" || t->lexeme == "{") {
                    skip_balanced();
                    continue;
                }
            }
            ++pos_;
        }
    }

    /// Skips one statement: to `;` at depth 0 (consumed), a `}` at depth 0
    /// (not consumed) or a newline after a complete bracket group.
    void skip_statement() {
        const auto start = pos_;
        while (!at_end()) {
            if (pos_ > start && newline_before(pos_)) return;
            const auto* t = toks_[pos_];
            if (t->kind == TokenKind::PUNCT) {
                if (t->lexeme == ";") {
                    ++pos_;
                    return;
                }
                if (t->lexeme == "}" || t->lexeme == ")" || t->lexeme == "]") {
                    if (pos_ == start) ++pos_;
                    return;
                }
                if (t->lexeme == "(" || t->lexeme == "[" || t->lexeme == "{") {
                    skip_balanced();
                    continue;
                }
            }
            ++pos_;
        }
    }

    // --- top level ---------------------------------------------------------

    bool try_require(ScriptModel& model) {
        if (!(peek_kw("var") || peek_kw("let") || peek_kw("const"))) return false;
        const auto* name = peek(1);
        if (!name || name->kind != TokenKind::IDENT || !peek_punct("=", 2)) return false;
        const auto* fn = peek(3);
        if (!fn || !fn->is(TokenKind::IDENT, "require") || !peek_punct("(", 4)) return false;
        const auto* path = peek(5);
        if (!path || path->kind != TokenKind::STRING || !peek_punct(")", 6)) return false;
        model.requires_.push_back({name->lexeme, unquote(path->lexeme)});
        pos_ += 7;
        accept_punct(";");
        return true;
    }

    std::optional<RegistrationKind> registration_start() const {
        const auto* t = peek();
        if (!t || t->kind != TokenKind::IDENT || !peek_punct("(", 1) || !peek_punct("{", 2)) return std::nullopt;
        if (t->lexeme == "Page") return RegistrationKind::PAGE;
        if (t->lexeme == "App") return RegistrationKind::APP;
        return std::nullopt;
    }

    PageRegistration parse_registration(RegistrationKind kind, std::vector<ParseGap>& gaps) {
        PageRegistration reg;
        reg.kind = kind;
        const auto start = pos_;
        pos_ += 3; // Name ( {
        parse_registration_props(reg, gaps);
        accept_punct("}");
        accept_punct(")");
        accept_punct(";");
        reg.span = span(start, pos_);
        return reg;
    }

    void parse_registration_props(PageRegistration& reg, std::vector<ParseGap>& gaps) {
        while (!at_end() && !peek_punct("}")) {
            if (accept_punct(",")) continue;
            const auto prop_start = pos_;
            const auto* key = peek();
            if (!key || !(is_name_token(key) || key->kind == TokenKind::STRING || key->kind == TokenKind::NUMBER)) {
                skip_until_separator();
                if (pos_ == prop_start) ++pos_;
                gaps.push_back({span(prop_start, pos_), "unrecognized registration property"});
                continue;
            }
            std::string name = key->kind == TokenKind::STRING ? unquote(key->lexeme) : key->lexeme;
            if (key->is(TokenKind::KEYWORD, "async") && is_name_token(peek(1)) && peek_punct("(", 2)) {
                ++pos_;
                key = peek();
                name = key->lexeme;
            }
            ++pos_;
            if (peek_punct("(")) {
                add_function(reg, parse_function_rest(name, prop_start), gaps);
                continue;
            }
            if (!accept_punct(":")) {
                skip_until_separator();
                gaps.push_back({span(prop_start, pos_), "unrecognized registration property"});
                continue;
            }
            if (name == "data" && peek_punct("{")) {
                parse_data_fields(reg);
                continue;
            }
            if (auto fn = try_function_value(name, prop_start)) {
                add_function(reg, std::move(*fn), gaps);
                continue;
            }
            skip_until_separator(); // plain option value
        }
    }

    void add_function(PageRegistration& reg, FunctionModel fn, std::vector<ParseGap>& gaps) {
        for (auto& existing : reg.functions) {
            if (existing.name == fn.name) {
                gaps.push_back({fn.span, "duplicate function '" + fn.name + "' (later definition ignored)"});
                return;
            }
        }
        for (const auto& g : fn.gaps) gaps.push_back(g);
        reg.functions.push_back(std::move(fn));
    }

    void parse_data_fields(PageRegistration& reg) {
        ++pos_; // {
        while (!at_end() && !peek_punct("}")) {
            if (accept_punct(",")) continue;
            const auto* key = peek();
            if (!key || !(is_name_token(key) || key->kind == TokenKind::STRING) || !peek_punct(":", 1)) {
                skip_until_separator();
                if (!at_end() && !peek_punct("}") && !peek_punct(",")) ++pos_;
                continue;
            }
            const std::string name = key->kind == TokenKind::STRING ? unquote(key->lexeme) : key->lexeme;
            pos_ += 2;
            const auto vstart = pos_;
            skip_until_separator();
            const auto vspan = span(vstart, pos_);
            LiteralInfo info;
            info.span = vspan;
            const auto* first = vstart < toks_.size() ? toks_[vstart] : nullptr;
            std::string raw;
            for (auto k = vstart; k < pos_; ++k) {
                if (k > vstart) raw += ' ';
                raw += toks_[k]->lexeme;
            }
            info.raw = raw;
            if (pos_ - vstart == 1 && first->kind == TokenKind::STRING) info.kind = "string";
            else if (pos_ - vstart == 1 && first->kind == TokenKind::NUMBER) info.kind = "number";
            else if (pos_ - vstart == 1 && (first->lexeme == "true" || first->lexeme == "false")) info.kind = "boolean";
            else if (pos_ - vstart == 1 && first->lexeme == "null") info.kind = "null";
            else if (first && first->is_punct("[")) info.kind = "array";
            else if (first && first->is_punct("{")) info.kind = "object";
            else info.kind = "expression";
            reg.data_fields[name] = std::move(info);
        }
        accept_punct("}");
    }

    /// `function (..) {..}`, `async function`, `(..) => {..}`, `x => ..`.
    std::optional<FunctionModel> try_function_value(const std::string& name, std::size_t start) {
        const auto save = pos_;
        if (peek_kw("async")) ++pos_;
        if (peek_kw("function")) {
            ++pos_;
            accept_punct("*");
            if (is_name_token(peek()) && peek_punct("(", 1)) ++pos_;
            if (peek_punct("(")) return parse_function_rest(name, start);
        } else if (peek_punct("(") && arrow_after_parens()) {
            return parse_function_rest(name, start);
        } else if (peek() && peek()->kind == TokenKind::IDENT && peek_punct("=>", 1)) {
            return parse_function_rest(name, start);
        }
        pos_ = save;
        return std::nullopt;
    }

    bool arrow_after_parens() const {
        int depth = 0;
        for (auto k = pos_; k < toks_.size(); ++k) {
            const auto* t = toks_[k];
            if (t->is_punct("(")) ++depth;
            else if (t->is_punct(")") && --depth == 0) return k + 1 < toks_.size() && toks_[k + 1]->is_punct("=>");
        }
        return false;
    }

    /// At `(` of the parameter list, or at a bare arrow parameter.
    FunctionModel parse_function_rest(const std::string& name, std::size_t start) {
        FunctionModel fn;
        fn.name = name;
        if (peek() && peek()->kind == TokenKind::IDENT && peek_punct("=>", 1)) {
            fn.params.push_back(peek()->lexeme);
            ++pos_;
        } else {
            fn.params = parse_params();
        }
        const bool arrow = accept_punct("=>");
        this_aliases_.push_back(this_aliases_.back());
        auto* saved_gaps = current_gaps_;
        current_gaps_ = &fn.gaps;
        if (peek_punct("{")) {
            const auto body_start = pos_;
            ++pos_;
            parse_block_body(fn.actions, fn.gaps);
            accept_punct("}");
            fn.body_span = span(body_start, pos_);
        } else if (arrow) {
            // Expression body: modeled as a single Return.
            const auto body_start = pos_;
            auto value = parse_expr();
            fn.body_span = span(body_start, pos_);
            fn.actions.push_back(Action{Return{std::move(value)}, fn.body_span});
        }
        current_gaps_ = saved_gaps;
        this_aliases_.pop_back();
        fn.span = span(start, pos_);
        return fn;
    }

    std::vector<std::string> parse_params() {
        std::vector<std::string> params;
        if (!accept_punct("(")) return params;
        while (!at_end() && !peek_punct(")")) {
            if (accept_punct(",")) continue;
            accept_punct("...");
            const auto* t = peek();
            if (t && t->kind == TokenKind::IDENT) {
                params.push_back(t->lexeme);
                ++pos_;
            } else {
                params.push_back("{}");
            }
            skip_until_separator(); // defaults, destructuring patterns
        }
        accept_punct(")");
        return params;
    }

    // --- statements ----------------------------------------------------------

    void parse_block_body(std::vector<Action>& out, std::vector<ParseGap>& gaps) {
        while (!at_end() && !peek_punct("}")) {
            const auto before = pos_;
            parse_statement(out, gaps);
            if (pos_ == before) {
                ++pos_;
                gaps.push_back({span(before, pos_), "unexpected token"});
            }
        }
    }

    /// Parses one statement; appends actions or a gap covering it.
    void parse_statement(std::vector<Action>& out, std::vector<ParseGap>& gaps) {
        const auto start = pos_;
        if (accept_punct(";")) return;
        if (peek_punct("{")) {
            ++pos_;
            std::vector<Action> inner;
            parse_block_body(inner, gaps);
            accept_punct("}");
            if (!inner.empty()) {
                inner.front().span.begin = span(start, start + 1).begin;
                inner.front().span.line = span(start, start + 1).line;
                const auto closing = span(pos_ - 1, pos_);
                inner.back().span.end = closing.end;
                inner.back().span.end_line = closing.end_line;
            }
            for (auto& a : inner) out.push_back(std::move(a));
            return;
        }
        if (peek_kw("var") || peek_kw("let") || peek_kw("const")) {
            parse_declaration(out, gaps);
            return;
        }
        if (peek_kw("if")) {
            ++pos_;
            skip_condition();
            Branch br;
            parse_arm(br.then_arm, gaps);
            if (peek_kw("else")) {
                ++pos_;
                parse_arm(br.else_arm, gaps);
            }
            out.push_back(Action{std::move(br), span(start, pos_)});
            return;
        }
        if (peek_kw("for") || peek_kw("while")) {
            ++pos_;
            skip_condition();
            Branch br;
            parse_arm(br.then_arm, gaps);
            out.push_back(Action{std::move(br), span(start, pos_)});
            return;
        }
        if (peek_kw("do")) {
            ++pos_;
            Branch br;
            parse_arm(br.then_arm, gaps);
            if (peek_kw("while")) {
                ++pos_;
                skip_condition();
            }
            accept_punct(";");
            out.push_back(Action{std::move(br), span(start, pos_)});
            return;
        }
        if (peek_kw("try")) {
            ++pos_;
            Branch br;
            parse_arm(br.then_arm, gaps);
            if (peek_kw("catch")) {
                ++pos_;
                if (peek_punct("(")) skip_balanced();
                parse_arm(br.else_arm, gaps);
            }
            if (peek_kw("finally")) {
                ++pos_;
                std::vector<Action> fin;
                parse_arm(fin, gaps);
                for (auto& a : fin) br.then_arm.push_back(std::move(a));
            }
            out.push_back(Action{std::move(br), span(start, pos_)});
            return;
        }
        if (peek_kw("return")) {
            ++pos_;
            Expr value{Unknown{}, span(start, pos_)};
            if (!at_end() && !peek_punct(";") && !peek_punct("}") && !newline_before(pos_)) value = parse_expr();
            if (!finish_statement()) {
                gap_statement(start, gaps, "unparsed return expression");
                return;
            }
            out.push_back(Action{Return{std::move(value)}, span(start, pos_)});
            return;
        }
        if (peek_kw("switch") || peek_kw("function") || peek_kw("class") || peek_kw("throw") || peek_kw("break") ||
            peek_kw("continue") || peek_kw("debugger") || peek_kw("with") || peek_kw("import") ||
            peek_kw("export")) {
            const auto* kw = peek();
            ++pos_;
            if (kw->lexeme == "function" || kw->lexeme == "class") {
                while (!at_end() && !peek_punct("{")) ++pos_;
                skip_balanced();
            } else if (kw->lexeme == "switch") {
                if (peek_punct("(")) skip_balanced();
                if (peek_punct("{")) skip_balanced();
            } else {
                pos_ = start;
                skip_statement();
            }
            gaps.push_back({span(start, pos_), "unsupported '" + kw->lexeme + "' statement"});
            return;
        }
        parse_expression_statement(out, gaps);
    }

    void parse_arm(std::vector<Action>& out, std::vector<ParseGap>& gaps) {
        if (peek_punct("{")) {
            ++pos_;
            parse_block_body(out, gaps);
            accept_punct("}");
        } else if (!at_end()) {
            parse_statement(out, gaps);
        }
    }

    void skip_condition() {
        if (peek_punct("(")) skip_balanced();
    }

    /// Accepts `;`, or an implicit end (newline, `}`, EOF).
    bool finish_statement() {
        if (accept_punct(";")) return true;
        return at_end() || peek_punct("}") || newline_before(pos_);
    }

    void gap_statement(std::size_t start, std::vector<ParseGap>& gaps, std::string reason) {
        if (!at_end() && !peek_punct("}")) skip_statement();
        gaps.push_back({span(start, pos_), std::move(reason)});
    }

    void parse_declaration(std::vector<Action>& out, std::vector<ParseGap>& gaps) {
        const auto start = pos_;
        ++pos_; // var / let / const
        std::vector<Action> decls;
        while (true) {
            const auto decl_start = decls.empty() ? start : pos_;
            if (peek_punct("{")) {
                // Object destructuring: `const { a, b: c } = expr`
                std::vector<std::pair<std::string, std::string>> binds; // property, local
                ++pos_;
                while (!at_end() && !peek_punct("}")) {
                    if (accept_punct(",")) continue;
                    const auto* t = peek();
                    if (!is_name_token(t)) {
                        skip_until_separator();
                        continue;
                    }
                    std::string prop = t->lexeme, local = t->lexeme;
                    ++pos_;
                    if (accept_punct(":") && peek() && peek()->kind == TokenKind::IDENT) {
                        local = peek()->lexeme;
                        ++pos_;
                    }
                    skip_until_separator();
                    binds.emplace_back(prop, local);
                }
                accept_punct("}");
                if (!accept_punct("=")) {
                    gap_statement(start, gaps, "unsupported destructuring declaration");
                    return;
                }
                auto value = parse_expr();
                const auto* base = value.as<MemberChain>();
                for (const auto& [prop, local] : binds) {
                    Expr v{Unknown{}, value.span};
                    if (base) {
                        MemberChain c = *base;
                        c.segments.push_back(ChainSegment{prop, false, false, {}});
                        v.node = std::move(c);
                    } else {
                        v = value;
                    }
                    MemberChain target = MemberChain::of({local});
                    target.span = value.span;
                    decls.push_back(Action{Assign{std::move(target), std::move(v)}, span(decl_start, pos_)});
                }
            } else if (peek() && peek()->kind == TokenKind::IDENT) {
                const auto name_idx = pos_;
                MemberChain target = MemberChain::of({peek()->lexeme});
                target.span = span(name_idx, name_idx + 1);
                ++pos_;
                Expr value{Unknown{}, target.span};
                if (accept_punct("=")) {
                    value = parse_expr();
                    if (const auto* c = value.as<MemberChain>(); c && c->segments.size() == 1 && c->root() == "this")
                        this_aliases_.back().insert(target.root());
                }
                decls.push_back(Action{Assign{std::move(target), std::move(value)}, span(decl_start, pos_)});
            } else {
                gap_statement(start, gaps, "unsupported declaration pattern");
                return;
            }
            if (accept_punct(",")) {
                decls.back().span = span(decl_start, pos_);
                continue;
            }
            break;
        }
        if (!finish_statement()) {
            gap_statement(start, gaps, "unparsed declaration tail");
            return;
        }
        if (!decls.empty()) {
            const auto end = span(pos_ - 1, pos_);
            decls.back().span.end = end.end;
            decls.back().span.end_line = end.end_line;
        }
        for (auto& d : decls) out.push_back(std::move(d));
    }

    bool is_this_like(const std::string& name) const {
        return name == "this" || this_aliases_.back().count(name) > 0;
    }

    void parse_expression_statement(std::vector<Action>& out, std::vector<ParseGap>& gaps) {
        const auto start = pos_;
        auto lhs = parse_expr();
        static const std::set<std::string> kCompound = {"+=", "-=", "*=", "/=", "%=", "||=", "&&=", "?\?=",
                                                        "|=", "&=", "^=", "**=", "<<=", ">>=", ">>>="};
        const auto* op = peek();
        if (op && op->kind == TokenKind::PUNCT && (op->lexeme == "=" || kCompound.count(op->lexeme))) {
            const auto* target = lhs.as<MemberChain>();
            if (!target) {
                gap_statement(start, gaps, "assignment to unsupported target");
                return;
            }
            const bool compound = op->lexeme != "=";
            ++pos_;
            auto value = parse_expr();
            if (compound) {
                Expr self{*target, target->span};
                Concat cat;
                cat.parts.push_back(std::move(self));
                cat.parts.push_back(std::move(value));
                value = Expr{std::move(cat), span(start, pos_)};
            }
            if (!finish_statement()) {
                gap_statement(start, gaps, "unparsed assignment tail");
                return;
            }
            out.push_back(Action{Assign{*target, std::move(value)}, span(start, pos_)});
            return;
        }
        auto* call = std::get_if<CallExpr>(&lhs.node);
        if (!call) {
            gap_statement(start, gaps, "expression statement without call or assignment");
            return;
        }
        if (!finish_statement()) {
            gap_statement(start, gaps, "unparsed call tail");
            return;
        }
        const auto stmt = span(start, pos_);
        const auto& segs = call->callee.segments;
        if (segs.size() == 2 && is_this_like(segs[0].name) && !segs[0].is_call && segs[1].name == "setData" &&
            !call->args.empty()) {
            if (const auto* obj = call->args.front().as<ObjectLit>(); obj && !obj->entries.empty()) {
                const auto first = out.size();
                for (const auto& [key, value] : obj->entries) {
                    MemberChain target = MemberChain::of({"data"});
                    for (auto part = std::size_t{0}; part < key.size();) {
                        // `'a.b'` style keys address nested page state.
                        auto dot = key.find('.', part);
                        if (dot == std::string::npos) dot = key.size();
                        target.segments.push_back(ChainSegment{key.substr(part, dot - part), false, false, {}});
                        part = dot + 1;
                    }
                    target.span = value.span;
                    Span s = value.span;
                    out.push_back(Action{Assign{std::move(target), value}, s});
                }
                out[first].span.begin = stmt.begin;
                out[first].span.line = stmt.line;
                out.back().span.end = stmt.end;
                out.back().span.end_line = stmt.end_line;
                // Entries in between extend to their successor so commas and keys are covered.
                for (auto k = first; k + 1 < out.size(); ++k) {
                    out[k].span.end = out[k + 1].span.begin;
                    out[k].span.end_line = out[k + 1].span.line;
                }
                return;
            }
        }
        out.push_back(Action{Call{call->callee, call->args}, stmt});
    }

    // --- expressions ---------------------------------------------------------

    static bool is_propagating_op(std::string_view op) { return op == "+" || op == "||" || op == "&&" || op == "??"; }

    static bool is_binary_op(const Token* t) {
        if (!t) return false;
        if (t->kind == TokenKind::KEYWORD) return t->lexeme == "instanceof" || t->lexeme == "in";
        if (t->kind != TokenKind::PUNCT) return false;
        static const std::set<std::string> kOps = {"+", "-", "*", "/", "%", "**", "==", "!=", "===", "!==",
                                                   "<", ">", "<=", ">=", "&&", "||", "??", "&", "|", "^",
                                                   "<<", ">>", ">>>"};
        return kOps.count(t->lexeme) > 0;
    }

    Expr parse_expr() {
        const auto start = pos_;
        auto cond = parse_binary();
        if (accept_punct("?")) {
            auto a = parse_expr();
            accept_punct(":");
            auto b = parse_expr();
            Concat cat;
            cat.parts.push_back(std::move(a));
            cat.parts.push_back(std::move(b));
            return Expr{std::move(cat), span(start, pos_)};
        }
        return cond;
    }

    Expr parse_binary() {
        const auto start = pos_;
        std::vector<Expr> operands;
        operands.push_back(parse_unary());
        bool propagating = false;
        while (is_binary_op(peek())) {
            propagating = propagating || is_propagating_op(peek()->lexeme);
            ++pos_;
            operands.push_back(parse_unary());
        }
        if (operands.size() == 1) return std::move(operands.front());
        if (!propagating) return Expr{Unknown{}, span(start, pos_)};
        return Expr{Concat{std::move(operands)}, span(start, pos_)};
    }

    Expr parse_unary() {
        const auto start = pos_;
        const auto* t = peek();
        if (!t) return Expr{Unknown{}, span(start, start)};
        if (t->kind == TokenKind::PUNCT && (t->lexeme == "..." )) {
            ++pos_;
            return parse_unary();
        }
        if (t->is(TokenKind::KEYWORD, "await")) {
            ++pos_;
            return parse_unary();
        }
        if ((t->kind == TokenKind::PUNCT && (t->lexeme == "!" || t->lexeme == "-" || t->lexeme == "+" ||
                                             t->lexeme == "~" || t->lexeme == "++" || t->lexeme == "--")) ||
            t->is(TokenKind::KEYWORD, "typeof") || t->is(TokenKind::KEYWORD, "void") ||
            t->is(TokenKind::KEYWORD, "delete")) {
            ++pos_;
            parse_unary();
            return Expr{Unknown{}, span(start, pos_)};
        }
        if (t->is(TokenKind::KEYWORD, "new")) {
            ++pos_;
            auto inner = parse_unary();
            if (auto* c = inner.as<MemberChain>()) return Expr{CallExpr{*c, {}}, span(start, pos_)};
            inner.span = span(start, pos_);
            return inner;
        }
        auto e = parse_postfix_primary();
        if (peek_punct("++") || peek_punct("--")) {
            if (!newline_before(pos_)) {
                ++pos_;
                return Expr{Unknown{}, span(start, pos_)};
            }
        }
        return e;
    }

    std::vector<Expr> parse_args() {
        std::vector<Expr> args;
        ++pos_; // (
        while (!at_end() && !peek_punct(")")) {
            if (accept_punct(",")) continue;
            const auto before = pos_;
            args.push_back(parse_expr());
            if (pos_ == before || (!peek_punct(",") && !peek_punct(")"))) {
                skip_until_separator();
                if (pos_ == before) ++pos_;
            }
        }
        accept_punct(")");
        return args;
    }

    Expr parse_postfix_primary() {
        const auto start = pos_;
        const auto* t = peek();
        if (t->kind == TokenKind::STRING) {
            ++pos_;
            if (t->lexeme.front() == '`' && t->lexeme.find("${") != std::string::npos) return parse_template(*t);
            return Expr{StringLit{t->lexeme}, span(start, pos_)};
        }
        if (t->kind == TokenKind::NUMBER) {
            ++pos_;
            return Expr{NumberLit{t->lexeme}, span(start, pos_)};
        }
        if (t->is(TokenKind::KEYWORD, "async") && (peek_kw("function", 1) || peek_punct("(", 1) ||
                                                   (peek(1) && peek(1)->kind == TokenKind::IDENT && peek_punct("=>", 2)))) {
            ++pos_;
            return parse_postfix_primary();
        }
        if (t->is(TokenKind::KEYWORD, "function")) {
            ++pos_;
            accept_punct("*");
            if (is_name_token(peek()) && peek_punct("(", 1)) ++pos_;
            return function_literal(parse_function_rest("<anonymous>", start), start);
        }
        if (t->kind == TokenKind::IDENT && peek_punct("=>", 1)) {
            return function_literal(parse_function_rest("<arrow>", start), start);
        }
        if (t->is_punct("(")) {
            if (arrow_after_parens()) {
                return function_literal(parse_function_rest("<arrow>", start), start);
            }
            ++pos_;
            auto inner = parse_expr();
            while (accept_punct(",")) inner = parse_expr(); // comma operator: last value
            if (!accept_punct(")")) {
                skip_until_separator();
                accept_punct(")");
            }
            if (auto* c = inner.as<MemberChain>()) {
                MemberChain chain = *c;
                return parse_chain_tail(std::move(chain), start);
            }
            // Postfix access on a computed value inherits the operand's taint.
            while (peek_punct(".") || peek_punct("?.") || peek_punct("[") || peek_punct("(")) {
                if (peek_punct("[") || peek_punct("(")) skip_balanced();
                else pos_ += is_name_token(peek(1)) ? 2 : 1;
            }
            Concat cat;
            cat.parts.push_back(std::move(inner));
            return Expr{std::move(cat), span(start, pos_)};
        }
        if (t->is_punct("{")) return parse_object_literal();
        if (t->is_punct("[")) {
            ++pos_;
            Concat cat;
            while (!at_end() && !peek_punct("]")) {
                if (accept_punct(",")) continue;
                const auto before = pos_;
                cat.parts.push_back(parse_expr());
                if (pos_ == before || (!peek_punct(",") && !peek_punct("]"))) {
                    skip_until_separator();
                    if (pos_ == before) ++pos_;
                }
            }
            accept_punct("]");
            Expr arr{std::move(cat), span(start, pos_)};
            if (peek_punct(".") || peek_punct("[")) {
                // `[a, b].join()`: derived from the elements.
                while (peek_punct(".") || peek_punct("?.") || peek_punct("[") || peek_punct("(")) {
                    if (peek_punct("[") || peek_punct("(")) skip_balanced();
                    else pos_ += is_name_token(peek(1)) ? 2 : 1;
                }
                arr.span = span(start, pos_);
            }
            return arr;
        }
        if (t->kind == TokenKind::IDENT || t->is(TokenKind::KEYWORD, "this") || t->is(TokenKind::KEYWORD, "super")) {
            ++pos_;
            MemberChain chain;
            chain.segments.push_back(ChainSegment{t->lexeme, false, false, {}});
            return parse_chain_tail(std::move(chain), start);
        }
        if (t->kind == TokenKind::KEYWORD &&
            (t->lexeme == "true" || t->lexeme == "false" || t->lexeme == "null" || t->lexeme == "undefined")) {
            ++pos_;
            return Expr{Unknown{}, span(start, pos_)};
        }
        // Regex literals, stray punctuation, etc.: consume one token.
        ++pos_;
        return Expr{Unknown{}, span(start, pos_)};
    }

    Expr parse_chain_tail(MemberChain chain, std::size_t start) {
        bool ends_with_call = false;
        while (!at_end()) {
            if ((peek_punct(".") || peek_punct("?.")) && is_name_token(peek(1))) {
                chain.segments.push_back(ChainSegment{peek(1)->lexeme, false, false, {}});
                pos_ += 2;
                ends_with_call = false;
                continue;
            }
            if (peek_punct("?.") && (peek_punct("(", 1) || peek_punct("[", 1))) {
                ++pos_;
                continue;
            }
            if (peek_punct("[")) {
                const auto open = pos_;
                skip_balanced();
                std::string raw;
                for (auto k = open + 1; k + 1 < pos_; ++k) raw += toks_[k]->lexeme;
                if (pos_ - open == 3 && toks_[open + 1]->kind == TokenKind::STRING)
                    chain.segments.push_back(ChainSegment{unquote(toks_[open + 1]->lexeme), false, false, {}});
                else
                    chain.segments.push_back(ChainSegment{raw, false, true, {}});
                ends_with_call = false;
                continue;
            }
            if (peek_punct("(")) {
                if (chain.segments.back().is_call) {
                    // `f()()`: the second call is opaque.
                    skip_balanced();
                    Concat cat;
                    cat.parts.push_back(Expr{chain, span(start, pos_)});
                    return Expr{std::move(cat), span(start, pos_)};
                }
                chain.segments.back().is_call = true;
                chain.segments.back().args = parse_args();
                ends_with_call = true;
                continue;
            }
            if (peek() && peek()->kind == TokenKind::STRING && peek()->lexeme.front() == '`') {
                ++pos_; // tagged template
                continue;
            }
            break;
        }
        chain.span = span(start, pos_);
        if (ends_with_call) {
            auto args = std::move(chain.segments.back().args);
            chain.segments.back().args.clear();
            chain.segments.back().is_call = false;
            return Expr{CallExpr{std::move(chain), std::move(args)}, span(start, pos_)};
        }
        return Expr{std::move(chain), span(start, pos_)};
    }

    Expr parse_object_literal() {
        const auto start = pos_;
        ++pos_; // {
        ObjectLit obj;
        while (!at_end() && !peek_punct("}")) {
            if (accept_punct(",")) continue;
            const auto entry_start = pos_;
            if (accept_punct("...")) {
                obj.entries.emplace_back("...", parse_expr());
                continue;
            }
            const auto* key = peek();
            std::string name;
            if (key->is_punct("[")) {
                skip_balanced();
                name = "[]";
            } else if (is_name_token(key) || key->kind == TokenKind::STRING || key->kind == TokenKind::NUMBER) {
                name = key->kind == TokenKind::STRING ? unquote(key->lexeme) : key->lexeme;
                ++pos_;
            } else {
                skip_until_separator();
                if (pos_ == entry_start) ++pos_;
                continue;
            }
            if (accept_punct(":")) {
                const auto before = pos_;
                obj.entries.emplace_back(name, parse_expr());
                if (pos_ == before || (!peek_punct(",") && !peek_punct("}"))) skip_until_separator();
            } else if (peek_punct("(")) {
                auto fn = parse_function_rest(name, entry_start);
                obj.entries.emplace_back(name, function_literal(std::move(fn), entry_start));
            } else {
                MemberChain c = MemberChain::of({name});
                c.span = span(entry_start, pos_);
                obj.entries.emplace_back(name, Expr{c, c.span});
                if (!peek_punct(",") && !peek_punct("}")) skip_until_separator();
            }
        }
        accept_punct("}");
        return Expr{std::move(obj), span(start, pos_)};
    }

    /// `${...}` substitutions become a Concat of their parsed expressions.
    Expr parse_template(const Token& tok) {
        const auto outer = span(pos_ - 1, pos_);
        Concat cat;
        const std::string_view text = tok.lexeme;
        std::size_t i = 0;
        while ((i = text.find("${", i)) != std::string_view::npos) {
            std::size_t depth = 1, j = i + 2;
            while (j < text.size() && depth > 0) {
                if (text[j] == '{') ++depth;
                else if (text[j] == '}') --depth;
                ++j;
            }
            const auto inner = text.substr(i + 2, (depth == 0 ? j - 1 : j) - (i + 2));
            auto sub_tokens = tokenize(inner);
            std::size_t line_shift = 0;
            for (std::size_t k = 0; k < i + 2; ++k)
                if (text[k] == '\n') ++line_shift;
            for (auto& st : sub_tokens) {
                st.offset += tok.offset + i + 2;
                st.line += tok.line - 1 + line_shift;
            }
            ScriptParser sub(sub_tokens);
            sub.this_aliases_ = {this_aliases_.back()};
            if (!sub.at_end()) cat.parts.push_back(sub.parse_expr());
            i = j;
        }
        return Expr{std::move(cat), outer};
    }

public:
    static std::string unquote(std::string_view s) {
        if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"' || s.front() == '`') && s.back() == s.front())
            return std::string(s.substr(1, s.size() - 2));
        if (!s.empty() && (s.front() == '\'' || s.front() == '"' || s.front() == '`'))
            return std::string(s.substr(1));
        return std::string(s);
    }
};

} // namespace detail

/// Tolerant structural extraction. Unmodeled regions are reported as gaps;
/// the function never throws.
inline ExtractResult extract_script_model(const std::vector<Token>& tokens) {
    return detail::ScriptParser(tokens).run();
}

inline ExtractResult extract_script_model(std::string_view text) {
    const auto tokens = tokenize(text);
    return extract_script_model(tokens);
}

/// Gaps recorded inside `fn`'s body.
inline std::vector<ParseGap> gaps_within(const ExtractResult& result, const FunctionModel& fn) {
    std::vector<ParseGap> out;
    for (const auto& g : result.gaps)
        if (fn.body_span.contains(g.span)) out.push_back(g);
    return out;
}

} // namespace minileak
