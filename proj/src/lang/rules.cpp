#include "mech/lang/lexer.hpp"
#include "mech/lang/rules.hpp"

namespace mech {

namespace {

struct RuleError {};

class RulesParser {
public:
    RulesParser(std::string_view text, std::string file) : file_(std::move(file)) {
        for (auto& t : tokenize(text))
            if (t.kind != TokenKind::Newline) toks_.push_back(std::move(t));
    }

    RulesParseResult run() {
        RulesParseResult result;
        RuleSet set;
        try {
            while (peek().kind != TokenKind::End) chain(set);
            result.rules = std::move(set);
        } catch (RuleError&) {
            result.diagnostics = std::move(diags_);
        }
        return result;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::string file_;
    std::vector<Diagnostic> diags_;

    const Token& peek() const { return toks_[std::min(pos_, toks_.size() - 1)]; }
    const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    bool at_punct(std::string_view p) const { return peek().kind == TokenKind::Punct && peek().text == p; }
    bool at_word(std::string_view w) const { return peek().kind == TokenKind::Ident && peek().text == w; }

    [[noreturn]] void fail(const Token& t, std::string message) {
        Diagnostic d;
        d.code = "SYNTAX_ERROR";
        d.message = std::move(message);
        d.span = span_of(t, file_);
        diags_.push_back(std::move(d));
        throw RuleError{};
    }

    static std::string describe(const Token& t) {
        switch (t.kind) {
        case TokenKind::End: return "end of input";
        case TokenKind::String: return "string literal";
        case TokenKind::Invalid: return t.text;
        default: return "'" + t.text + "'";
        }
    }

    const Token& expect_punct(std::string_view p) {
        if (!at_punct(p)) fail(peek(), "expected '" + std::string(p) + "', found " + describe(peek()));
        return next();
    }
    const Token& expect_word(std::string_view w) {
        if (!at_word(w)) fail(peek(), "expected '" + std::string(w) + "', found " + describe(peek()));
        return next();
    }
    const Token& expect_ident(std::string_view what) {
        if (peek().kind != TokenKind::Ident)
            fail(peek(), "expected " + std::string(what) + ", found " + describe(peek()));
        return next();
    }

    void chain(RuleSet& set) {
        const Token& first = expect_word("if");
        set.rules.push_back(guarded(first));
        while (at_word("else")) {
            const Token& e = next();
            if (at_word("if")) {
                next();
                set.rules.push_back(guarded(e));
                continue;
            }
            Rule r;
            r.model = consequent();
            r.span = span_between(e, prev(), file_);
            set.rules.push_back(std::move(r));
            break;
        }
    }

    Rule guarded(const Token& first) {
        Rule r;
        r.condition = parse_or();
        expect_word("then");
        r.model = consequent();
        r.span = span_between(first, prev(), file_);
        return r;
    }

    std::string consequent() {
        expect_punct("{");
        expect_word("prefer");
        std::string model = expect_ident("a model id").text;
        if (at_punct(";")) next();
        expect_punct("}");
        return model;
    }

    RuleExpr parse_or() {
        const Token& first = peek();
        RuleExpr lhs = parse_and();
        if (!at_punct("||")) return lhs;
        RuleExpr e;
        e.kind = RuleExpr::Kind::Or;
        e.children.push_back(std::move(lhs));
        while (at_punct("||")) {
            next();
            e.children.push_back(parse_and());
        }
        e.span = span_between(first, prev(), file_);
        return e;
    }

    RuleExpr parse_and() {
        const Token& first = peek();
        RuleExpr lhs = parse_primary();
        if (!at_punct("&&")) return lhs;
        RuleExpr e;
        e.kind = RuleExpr::Kind::And;
        e.children.push_back(std::move(lhs));
        while (at_punct("&&")) {
            next();
            e.children.push_back(parse_primary());
        }
        e.span = span_between(first, prev(), file_);
        return e;
    }

    RuleExpr parse_primary() {
        if (at_punct("(")) {
            next();
            RuleExpr e = parse_or();
            expect_punct(")");
            return e;
        }
        const Token& id = expect_ident("an identifier or '('");
        expect_punct("==");
        const Token& sym = expect_ident("a symbol");
        RuleExpr e;
        e.identifier = id.text;
        e.symbol = sym.text;
        e.span = span_between(id, sym, file_);
        return e;
    }
};

void collect(const RuleExpr& e, std::set<std::string>& out) {
    if (e.kind == RuleExpr::Kind::Compare) out.insert(e.identifier);
    for (const auto& c : e.children) collect(c, out);
}

}  // namespace

RulesParseResult parse_rules(std::string_view text, const std::string& file_name) {
    return RulesParser(text, file_name).run();
}

std::set<std::string> rule_identifiers(const RuleSet& rules) {
    std::set<std::string> out;
    for (const auto& r : rules.rules)
        if (r.condition) collect(*r.condition, out);
    return out;
}

}  // namespace mech
