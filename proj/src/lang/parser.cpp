#include "mech/lang/lexer.hpp"
#include "mech/lang/mech_format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>

namespace mech {

namespace {

struct Abort {};
struct EndOfInput {};

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::string suggestion(std::string_view word, std::initializer_list<std::string_view> candidates) {
    std::string best;
    std::size_t best_d = 3;
    for (auto c : candidates) {
        auto d = edit_distance(word, c);
        if (d < best_d) {
            best_d = d;
            best = std::string(c);
        }
    }
    return best.empty() ? std::string() : "; did you mean '" + best + "'?";
}

bool is_integral_text(std::string_view text) {
    return text.find_first_of(".eE/") == std::string_view::npos;
}

class MechParser {
public:
    MechParser(std::string_view text, std::string file) : toks_(tokenize(text)), file_(std::move(file)) {}

    ParseResult parse_document() {
        doc_.file = file_;
        try {
            while (true) {
                skip_newlines();
                const Token& t = peek();
                if (t.kind == TokenKind::End) break;
                if (at_punct("}")) {
                    report(t, "SYNTAX_ERROR", "unmatched '}'");
                    next();
                    continue;
                }
                try {
                    top_decl();
                    end_statement();
                } catch (Abort&) {
                    skip_statement();
                }
            }
        } catch (EndOfInput&) {
        }
        ParseResult result;
        if (!diags_.empty()) {
            sort_diagnostics(diags_);
            result.diagnostics = std::move(diags_);
        } else {
            doc_.link_relations();
            result.document = std::move(doc_);
        }
        return result;
    }

    ExprParseResult parse_standalone_expr() {
        ExprParseResult result;
        try {
            skip_newlines();
            StateExpr e = parse_or();
            skip_newlines();
            if (peek().kind != TokenKind::End) unexpected(peek(), "end of expression");
            result.expr = std::move(e);
        } catch (Abort&) {
            result.diagnostics = std::move(diags_);
        }
        return result;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::string file_;
    std::vector<Diagnostic> diags_;
    ModelDocument doc_;
    bool have_metadata_ = false;

    // -- token access ------------------------------------------------------

    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }

    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }

    bool at_punct(std::string_view p, std::size_t k = 0) const {
        return peek(k).kind == TokenKind::Punct && peek(k).text == p;
    }
    bool at_ident(std::string_view w, std::size_t k = 0) const {
        return peek(k).kind == TokenKind::Ident && peek(k).text == w;
    }
    bool at_eol() const {
        auto k = peek().kind;
        return k == TokenKind::Newline || k == TokenKind::End || at_punct("}");
    }

    SourceSpan span(const Token& t) const { return span_of(t, file_); }
    SourceSpan span(const Token& a, const Token& b) const { return span_between(a, b, file_); }

    // -- diagnostics -------------------------------------------------------

    void report(const Token& t, std::string code, std::string message, std::vector<RelatedSpan> related = {}) {
        Diagnostic d;
        d.severity = Severity::Error;
        d.code = std::move(code);
        d.message = std::move(message);
        d.span = span(t);
        d.related = std::move(related);
        diags_.push_back(std::move(d));
    }

    [[noreturn]] void fail(const Token& t, std::string code, std::string message) {
        report(t, std::move(code), std::move(message));
        throw Abort{};
    }

    static std::string describe(const Token& t) {
        switch (t.kind) {
        case TokenKind::Ident: return "'" + t.text + "'";
        case TokenKind::Number: return "number '" + t.text + "'";
        case TokenKind::String: return "string literal";
        case TokenKind::Unit: return "unit [" + t.text + "]";
        case TokenKind::Punct: return "'" + t.text + "'";
        case TokenKind::Newline: return "end of line";
        case TokenKind::End: return "end of input";
        case TokenKind::Invalid: return t.text;
        }
        return "token";
    }

    [[noreturn]] void unexpected(const Token& t, std::string_view expected) {
        if (t.kind == TokenKind::Invalid) {
            std::string code = "SYNTAX_ERROR";
            if (t.text.rfind("malformed number", 0) == 0) code = "MALFORMED_NUMBER";
            if (t.text.find("unit") != std::string::npos) code = "MALFORMED_UNIT";
            fail(t, code, t.text);
        }
        fail(t, "SYNTAX_ERROR", "expected " + std::string(expected) + ", found " + describe(t));
    }

    const Token& expect_punct(std::string_view p) {
        if (!at_punct(p)) unexpected(peek(), "'" + std::string(p) + "'");
        return next();
    }

    const Token& expect_ident(std::string_view what) {
        if (peek().kind != TokenKind::Ident) unexpected(peek(), what);
        return next();
    }

    const Token& expect_string(std::string_view what) {
        if (peek().kind != TokenKind::String) unexpected(peek(), what);
        return next();
    }

    void end_statement() {
        if (peek().kind == TokenKind::Newline) {
            next();
            return;
        }
        if (peek().kind == TokenKind::End || at_punct("}")) return;
        unexpected(peek(), "end of line");
    }

    void skip_newlines() {
        while (peek().kind == TokenKind::Newline) next();
    }

    /// Skips the rest of a statement, including any block it opens.
    void skip_statement() {
        int depth = 0;
        while (true) {
            const Token& t = peek();
            if (t.kind == TokenKind::End) return;
            if (depth == 0 && at_punct("}")) return;
            if (depth == 0 && t.kind == TokenKind::Newline) {
                next();
                return;
            }
            if (at_punct("{")) ++depth;
            if (at_punct("}")) --depth;
            next();
        }
    }

    /// Parses `{ ... }`; `line` handles one body statement. Returns the
    /// closing brace.
    const Token& block(const Token& opener, std::string_view what, const std::function<void()>& line) {
        expect_punct("{");
        while (true) {
            skip_newlines();
            if (peek().kind == TokenKind::End) {
                report(opener, "UNTERMINATED_BLOCK", std::string(what) + " block opened here is never closed");
                throw EndOfInput{};
            }
            if (at_punct("}")) return next();
            try {
                line();
                end_statement();
            } catch (Abort&) {
                skip_statement();
            }
        }
    }

    void once(std::set<std::string>& seen, const Token& key) {
        if (!seen.insert(key.text).second) fail(key, "SYNTAX_ERROR", "duplicate field '" + key.text + "'");
    }

    [[noreturn]] void unknown_field(const Token& key, std::string_view where,
                                    std::initializer_list<std::string_view> known) {
        fail(key, "UNKNOWN_KEYWORD",
             "unknown " + std::string(where) + " field '" + key.text + "'" + suggestion(key.text, known));
    }

    template <class T>
    void check_duplicate(const Token& id_tok, std::string_view kind, const std::vector<T>& existing,
                         const std::string& id) {
        for (const auto& e : existing) {
            if (e.id == id) {
                report(id_tok, "DUPLICATE_ID", std::string(kind) + " '" + id + "' is already declared",
                       {{e.span, "first declared here"}});
                return;
            }
        }
    }

    // -- literals ----------------------------------------------------------

    std::int64_t parse_int(const Token& t, std::string_view what) {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size())
            fail(t, "MALFORMED_NUMBER", "malformed " + std::string(what) + " '" + t.text + "'");
        return v;
    }

    double parse_double(const Token& t) {
        double v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size() || !std::isfinite(v))
            fail(t, "MALFORMED_NUMBER", "malformed number '" + t.text + "'");
        return v;
    }

    std::int64_t nonneg_int(std::string_view what) {
        if (peek().kind != TokenKind::Number) unexpected(peek(), what);
        const Token& t = next();
        if (!is_integral_text(t.text)) fail(t, "MALFORMED_NUMBER", std::string(what) + " must be an integer");
        auto v = parse_int(t, what);
        if (v < 0) fail(t, "MALFORMED_NUMBER", std::string(what) + " must be nonnegative");
        return v;
    }

    QualityValue parse_value() {
        const Token& t = peek();
        if (t.kind == TokenKind::Ident) {
            next();
            if (t.text == "true") return true;
            if (t.text == "false") return false;
            return Symbol{t.text};
        }
        if (t.kind == TokenKind::Number) {
            next();
            if (t.text.find('/') != std::string::npos)
                fail(t, "MALFORMED_NUMBER", "fractions are only allowed for delays");
            if (peek().kind == TokenKind::Unit) {
                const Token& u = next();
                return Scalar{parse_double(t), u.text};
            }
            if (peek().kind == TokenKind::Invalid) unexpected(peek(), "a unit");
            if (!is_integral_text(t.text))
                fail(t, "MALFORMED_NUMBER", "scalar '" + t.text + "' needs a unit, e.g. " + t.text + " [L]");
            auto v = parse_int(t, "count");
            if (v < 0) fail(t, "MALFORMED_NUMBER", "count must be nonnegative; signed quantities need a unit");
            return Count{v};
        }
        unexpected(t, "a value");
    }

    std::variant<std::int64_t, Scalar> parse_delta(bool negate) {
        if (peek().kind != TokenKind::Number) unexpected(peek(), "an amount");
        const Token& t = next();
        if (peek().kind == TokenKind::Invalid) unexpected(peek(), "a unit");
        if (peek().kind == TokenKind::Unit) {
            const Token& u = next();
            double v = parse_double(t);
            return Scalar{negate ? -v : v, u.text};
        }
        if (!is_integral_text(t.text))
            fail(t, "MALFORMED_NUMBER", "amount '" + t.text + "' needs a unit, e.g. " + t.text + " [L]");
        auto v = parse_int(t, "amount");
        if (negate) {
            if (v == INT64_MIN) fail(t, "MALFORMED_NUMBER", "amount out of range");
            v = -v;
        }
        return v;
    }

    Time parse_time(std::string_view what) {
        if (peek().kind != TokenKind::Number) unexpected(peek(), what);
        const Token& t = next();
        const std::string& s = t.text;
        if (!s.empty() && s[0] == '-') fail(t, "MALFORMED_NUMBER", std::string(what) + " must be nonnegative");
        if (s.find_first_of("eE") != std::string::npos)
            fail(t, "MALFORMED_NUMBER", std::string(what) + " must be an integer, fraction or decimal");
        auto to_int = [&](std::string_view digits) {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
            if (ec != std::errc() || p != digits.data() + digits.size())
                fail(t, "MALFORMED_NUMBER", "malformed " + std::string(what) + " '" + s + "'");
            return v;
        };
        if (auto slash = s.find('/'); slash != std::string::npos) {
            if (s.find('.') != std::string::npos)
                fail(t, "MALFORMED_NUMBER", "malformed " + std::string(what) + " '" + s + "'");
            auto num = to_int(std::string_view(s).substr(0, slash));
            auto den = to_int(std::string_view(s).substr(slash + 1));
            if (den == 0) fail(t, "MALFORMED_NUMBER", "zero denominator in '" + s + "'");
            return Time(num, den);
        }
        if (auto dot = s.find('.'); dot != std::string::npos) {
            std::string digits = s.substr(0, dot) + s.substr(dot + 1);
            std::size_t frac = s.size() - dot - 1;
            if (digits.size() > 18) fail(t, "MALFORMED_NUMBER", "too many digits in '" + s + "'");
            std::int64_t den = 1;
            for (std::size_t i = 0; i < frac; ++i) den *= 10;
            return Time(to_int(digits), den);
        }
        return Time(to_int(s));
    }

    std::string parse_curie(bool allow_star) {
        const Token& prefix = expect_ident("a CURIE such as CHEBI:15377");
        if (!at_punct(":") || !peek().glued) unexpected(peek(), "':' directly after '" + prefix.text + "'");
        next();
        std::string out = prefix.text + ":";
        const Token& local = peek();
        bool took = false;
        if ((local.kind == TokenKind::Ident || local.kind == TokenKind::Number) && local.glued) {
            out += local.text;
            next();
            took = true;
        }
        if (allow_star && at_punct("*") && peek().glued) {
            out += "*";
            next();
            took = true;
        }
        if (!took) unexpected(peek(), "the local part of '" + prefix.text + ":'");
        return out;
    }

    std::vector<std::string> curie_list() {
        std::vector<std::string> out;
        if (at_eol()) return out;
        out.push_back(parse_curie(false));
        while (at_punct(",")) {
            next();
            out.push_back(parse_curie(false));
        }
        return out;
    }

    std::vector<std::string> id_list(std::string_view what) {
        std::vector<std::string> out;
        if (at_eol()) return out;
        out.push_back(expect_ident(what).text);
        while (at_punct(",")) {
            next();
            out.push_back(expect_ident(what).text);
        }
        return out;
    }

    std::vector<std::string> string_list() {
        std::vector<std::string> out;
        if (at_eol()) return out;
        out.push_back(expect_string("a string").text);
        while (at_punct(",")) {
            next();
            out.push_back(expect_string("a string").text);
        }
        return out;
    }

    std::vector<TokenCount> token_list() {
        std::vector<TokenCount> out;
        if (at_eol()) return out;
        while (true) {
            TokenCount tc;
            tc.place = expect_ident("a place id").text;
            if (at_punct("*")) {
                next();
                const Token& n = peek();
                tc.count = nonneg_int("token count");
                if (tc.count == 0) fail(n, "MALFORMED_NUMBER", "token count must be at least 1");
            }
            out.push_back(tc);
            if (!at_punct(",")) break;
            next();
        }
        return out;
    }

    std::string quality_path() {
        std::string agg = expect_ident("an aggregate id").text;
        expect_punct(".");
        return agg + "." + expect_ident("a quality name").text;
    }

    // -- expressions -------------------------------------------------------

    Comparator parse_cmp() {
        const Token& t = peek();
        if (t.kind == TokenKind::Punct) {
            if (auto c = parse_comparator(t.text)) {
                next();
                return *c;
            }
        }
        unexpected(t, "a comparator (==, !=, <, <=, >, >=)");
    }

    StateExpr parse_or() {
        const Token& first = peek();
        StateExpr lhs = parse_and();
        if (!at_punct("||")) return lhs;
        std::vector<StateExpr> terms{std::move(lhs)};
        while (at_punct("||")) {
            next();
            terms.push_back(parse_and());
        }
        StateExpr e = StateExpr::disj(std::move(terms));
        e.span = span(first, prev());
        return e;
    }

    StateExpr parse_and() {
        const Token& first = peek();
        StateExpr lhs = parse_unary();
        if (!at_punct("&&")) return lhs;
        std::vector<StateExpr> terms{std::move(lhs)};
        while (at_punct("&&")) {
            next();
            terms.push_back(parse_unary());
        }
        StateExpr e = StateExpr::conj(std::move(terms));
        e.span = span(first, prev());
        return e;
    }

    StateExpr parse_unary() {
        if (at_punct("!")) {
            const Token& bang = next();
            StateExpr e = StateExpr::negation(parse_unary());
            e.span = span(bang, prev());
            return e;
        }
        return parse_primary();
    }

    StateExpr parse_primary() {
        const Token& first = peek();
        if (at_punct("(")) {
            next();
            StateExpr e = parse_or();
            expect_punct(")");
            return e;
        }
        if (first.kind != TokenKind::Ident) unexpected(first, "a condition");
        auto finish = [&](StateAtom atom) {
            StateExpr e = StateExpr::make_atom(std::move(atom));
            e.span = span(first, prev());
            return e;
        };
        if (!at_punct(".", 1)) {
            if (first.text == "true" || first.text == "false") {
                next();
                StateExpr e = first.text == "true" ? StateExpr::always() : StateExpr::disj({});
                e.span = span(first);
                return e;
            }
            if (first.text == "tokens" && at_punct("(", 1)) {
                next();
                next();
                TokenState ts;
                ts.place = expect_ident("a place id").text;
                expect_punct(")");
                if (!at_punct(">=")) unexpected(peek(), "'>=' (token conditions have the form tokens(p) >= n)");
                next();
                ts.required = nonneg_int("token count");
                return finish(ts);
            }
            if (first.text == "emergent" && at_punct("(", 1)) {
                next();
                next();
                EmergentState es{expect_ident("an emergent predicate id").text};
                expect_punct(")");
                return finish(es);
            }
            if (first.text == "rq" && peek(1).kind == TokenKind::Ident) {
                next();
                ConfigurationState cs;
                cs.relation = next().text;
                cs.op = parse_cmp();
                cs.value = parse_value();
                return finish(cs);
            }
            next();
            unexpected(peek(), "'.' after aggregate id '" + first.text + "'");
        }
        QualityState qs;
        qs.aggregate = next().text;
        next();
        qs.quality = expect_ident("a quality name").text;
        qs.op = parse_cmp();
        qs.value = parse_value();
        return finish(qs);
    }

    // -- declarations ------------------------------------------------------

    void top_decl() {
        const Token& kw = peek();
        if (kw.kind != TokenKind::Ident) unexpected(kw, "a declaration");
        const std::string& w = kw.text;
        if (w == "metadata") {
            next();
            if (have_metadata_) report(kw, "DUPLICATE_ID", "document metadata is already declared");
            have_metadata_ = true;
            parse_metadata(kw, doc_.metadata);
        } else if (w == "domain") {
            parse_domain();
        } else if (w == "aggregate" || w == "template") {
            parse_aggregate();
        } else if (w == "relation") {
            parse_relation();
        } else if (w == "emergent") {
            parse_emergent();
        } else if (w == "place") {
            parse_place();
        } else if (w == "transitional") {
            parse_transitional();
        } else if (w == "unit") {
            parse_unit();
        } else if (w == "mechanism") {
            parse_mechanism();
        } else if (w == "microworld") {
            parse_microworld();
        } else if (w == "conserve") {
            parse_conservation();
        } else {
            fail(kw, "UNKNOWN_KEYWORD",
                 "unknown keyword '" + w + "'" +
                     suggestion(w, {"metadata", "domain", "aggregate", "template", "relation", "emergent", "place",
                                    "transitional", "unit", "mechanism", "microworld", "conserve"}));
        }
    }

    void parse_metadata(const Token& kw, MechanismMetadata& m) {
        std::set<std::string> seen;
        const Token& close = block(kw, "metadata", [&] {
            const Token& key = expect_ident("a metadata field");
            static const std::map<std::string, std::optional<std::string> MechanismMetadata::*> text_fields = {
                {"model_type", &MechanismMetadata::model_type},
                {"dynamic_elements", &MechanismMetadata::dynamic_elements},
                {"context", &MechanismMetadata::context},
                {"author", &MechanismMetadata::author},
                {"date", &MechanismMetadata::date},
                {"version", &MechanismMetadata::version},
                {"explanations", &MechanismMetadata::explanations},
                {"variations", &MechanismMetadata::variations},
                {"implications", &MechanismMetadata::implications},
            };
            bool known = key.text == "mechanism_type" || key.text == "function_type" || key.text == "evidence" ||
                         text_fields.count(key.text);
            if (!known)
                unknown_field(key, "metadata",
                              {"mechanism_type", "model_type", "function_type", "dynamic_elements", "context",
                               "author", "date", "version", "explanations", "variations", "implications",
                               "evidence"});
            once(seen, key);
            expect_punct(":");
            if (key.text == "mechanism_type") {
                const Token& v = expect_ident("a mechanism type");
                m.mechanism_type = parse_mechanism_type(v.text);
                if (!m.mechanism_type)
                    fail(v, "SYNTAX_ERROR",
                         "unknown mechanism type '" + v.text +
                             "'; expected SimpleLinear, Cyclic, Concurrent, Feedback, Continuous, Stochastic or "
                             "Asynchronous");
            } else if (key.text == "function_type") {
                const Token& v = expect_ident("a function type");
                m.function_type = parse_function_type(v.text);
                if (!m.function_type)
                    fail(v, "SYNTAX_ERROR",
                         "unknown function type '" + v.text + "'; expected Designed, Evolved, Natural or NoneApparent");
            } else if (key.text == "evidence") {
                m.evidence = string_list();
            } else {
                m.*(text_fields.at(key.text)) = expect_string("a quoted string").text;
            }
        });
        m.span = span(kw, close);
    }

    void parse_domain() {
        const Token& kw = next();
        EnumDomain d;
        const Token& id = expect_ident("a domain id");
        d.id = id.text;
        expect_punct("{");
        std::vector<std::pair<const Token*, std::string>> symbols;
        skip_newlines();
        while (!at_punct("}")) {
            const Token& s = expect_ident("a symbol");
            if (s.text == "true" || s.text == "false")
                fail(s, "SYNTAX_ERROR", "'" + s.text + "' is reserved for boolean values");
            symbols.emplace_back(&s, s.text);
            skip_newlines();
            if (at_punct(",")) {
                next();
                skip_newlines();
                continue;
            }
            skip_newlines();
            if (!at_punct("}")) unexpected(peek(), "',' or '}'");
        }
        const Token& close = next();
        d.span = span(kw, close);
        check_duplicate(id, "domain", doc_.domains, d.id);
        for (auto& [tok, sym] : symbols) {
            bool dup = std::find(d.symbols.begin(), d.symbols.end(), sym) != d.symbols.end();
            const EnumDomain* other = doc_.domain_of_symbol(sym);
            if (dup)
                report(*tok, "DUPLICATE_ID", "symbol '" + sym + "' appears twice in domain '" + d.id + "'");
            else if (other)
                report(*tok, "DUPLICATE_ID", "symbol '" + sym + "' already belongs to domain '" + other->id + "'",
                       {{other->span, "declared here"}});
            else
                d.symbols.push_back(sym);
        }
        doc_.domains.push_back(std::move(d));
    }

    void parse_aggregate() {
        const Token& kw = next();
        bool is_template = kw.text == "template";
        const Token& id = expect_ident(is_template ? "a template id" : "an aggregate id");
        Aggregate a;
        a.id = id.text;
        std::set<std::string> seen;
        const Token& close = block(kw, kw.text, [&] {
            const Token& key = expect_ident("an aggregate field");
            if (key.text == "label") {
                once(seen, key);
                expect_punct(":");
                a.label = expect_string("a quoted label").text;
            } else if (key.text == "ontology") {
                once(seen, key);
                expect_punct(":");
                a.ontology_refs = curie_list();
            } else if (key.text == "quality") {
                const Token& name = expect_ident("a quality name");
                expect_punct(":");
                QualityDecl q;
                q.name = name.text;
                q.value = parse_value();
                q.span = span(key, prev());
                if (a.quality(q.name)) {
                    auto first = std::find_if(a.qualities.begin(), a.qualities.end(),
                                              [&](const QualityDecl& d) { return d.name == q.name; });
                    report(name, "DUPLICATE_ID", "quality '" + q.name + "' is already declared in '" + a.id + "'",
                           {{first->span, "first declared here"}});
                } else {
                    a.qualities.push_back(std::move(q));
                }
            } else if (key.text == "part") {
                PartLink link;
                link.child = expect_ident("a part aggregate id").text;
                if (peek().kind == TokenKind::Ident) {
                    const Token& role = next();
                    auto r = parse_part_role(role.text);
                    if (!r) fail(role, "SYNTAX_ERROR", "part role must be functional or structural");
                    link.role = *r;
                }
                a.parts.push_back(link);
            } else if (key.text == "position") {
                once(seen, key);
                expect_punct(":");
                expect_punct("(");
                std::vector<double> coords;
                while (true) {
                    if (peek().kind != TokenKind::Number) unexpected(peek(), "a coordinate");
                    const Token& n = next();
                    if (n.text.find('/') != std::string::npos)
                        fail(n, "MALFORMED_NUMBER", "coordinates are decimal numbers");
                    coords.push_back(parse_double(n));
                    if (at_punct(")")) break;
                    expect_punct(",");
                }
                next();
                a.position = std::move(coords);
            } else {
                unknown_field(key, kw.text, {"label", "ontology", "quality", "part", "position"});
            }
        });
        a.span = span(kw, close);
        auto& list = is_template ? doc_.templates : doc_.aggregates;
        check_duplicate(id, kw.text, list, a.id);
        list.push_back(std::move(a));
    }

    void parse_relation() {
        const Token& kw = next();
        const Token& id = expect_ident("a relation id");
        RelationalQuality r;
        r.id = id.text;
        bool has_value = false;
        std::set<std::string> seen;
        const Token& close = block(kw, "relation", [&] {
            const Token& key = expect_ident("a relation field");
            if (key.text == "name") {
                once(seen, key);
                expect_punct(":");
                r.name = expect_string("a quoted name").text;
            } else if (key.text == "participants") {
                once(seen, key);
                expect_punct(":");
                r.participants = id_list("an aggregate id");
            } else if (key.text == "value") {
                once(seen, key);
                expect_punct(":");
                r.value = parse_value();
                has_value = true;
            } else {
                unknown_field(key, "relation", {"name", "participants", "value"});
            }
        });
        r.span = span(kw, close);
        if (!has_value) report(kw, "SYNTAX_ERROR", "relation '" + r.id + "' needs a value");
        check_duplicate(id, "relation", doc_.relations, r.id);
        doc_.relations.push_back(std::move(r));
    }

    void parse_emergent() {
        const Token& kw = next();
        const Token& id = expect_ident("an emergent predicate id");
        EmergentPredicate e;
        e.id = id.text;
        std::set<std::string> seen;
        const Token& close = block(kw, "emergent", [&] {
            const Token& key = expect_ident("an emergent field");
            if (key.text == "over") {
                once(seen, key);
                expect_punct(":");
                e.over = id_list("an aggregate id");
            } else if (key.text == "when") {
                once(seen, key);
                expect_punct(":");
                e.when = parse_or();
            } else {
                unknown_field(key, "emergent", {"over", "when"});
            }
        });
        e.span = span(kw, close);
        check_duplicate(id, "emergent predicate", doc_.emergents, e.id);
        doc_.emergents.push_back(std::move(e));
    }

    void parse_place() {
        const Token& kw = next();
        const Token& id = expect_ident("a place id");
        Place p;
        p.id = id.text;
        if (at_punct(":")) {
            next();
            p.initial_tokens = nonneg_int("initial token count");
        }
        p.span = span(kw, prev());
        check_duplicate(id, "place", doc_.places, p.id);
        doc_.places.push_back(std::move(p));
    }

    Effect parse_effect() {
        auto word = [&](std::string_view w) { return at_ident(w) && !at_punct(".", 1); };
        if (word("create")) {
            next();
            CreateAggregate c;
            c.id = expect_ident("the new aggregate id").text;
            if (!at_ident("from")) unexpected(peek(), "'from'");
            next();
            c.from_template = expect_ident("a template id").text;
            return c;
        }
        if (word("destroy")) {
            next();
            return DestroyAggregate{expect_ident("an aggregate id").text};
        }
        if (word("rq")) {
            next();
            SetRelation s;
            s.relation = expect_ident("a relation id").text;
            expect_punct("=");
            s.value = parse_value();
            return s;
        }
        if (word("send")) {
            next();
            SendMessage m;
            m.sender = expect_ident("a sender aggregate id").text;
            expect_punct("->");
            m.receiver = expect_ident("a receiver aggregate id").text;
            expect_punct(".");
            m.quality = expect_ident("a quality name").text;
            expect_punct("=");
            m.value = parse_value();
            if (at_ident("after")) {
                next();
                m.latency = parse_time("latency");
            }
            return m;
        }
        std::string agg = expect_ident("an effect").text;
        expect_punct(".");
        std::string quality = expect_ident("a quality name").text;
        if (at_punct("=")) {
            next();
            return SetQuality{agg, quality, parse_value()};
        }
        if (at_punct("+=") || at_punct("-=")) {
            bool negate = next().text == "-=";
            return AdjustQuality{agg, quality, parse_delta(negate)};
        }
        unexpected(peek(), "'=', '+=' or '-='");
    }

    void parse_transitional() {
        const Token& kw = next();
        const Token& id = expect_ident("a transitional id");
        Transitional t;
        t.id = id.text;
        std::set<std::string> seen;
        const Token& close = block(kw, "transitional", [&] {
            const Token& key = expect_ident("a transitional field");
            if (key.text == "effect") {
                EffectDecl e;
                e.effect = parse_effect();
                e.span = span(key, prev());
                t.effects.push_back(std::move(e));
                return;
            }
            static const std::initializer_list<std::string_view> known = {"label",    "kind",       "delay",
                                                                          "function", "refinement", "effect"};
            if (std::find(known.begin(), known.end(), key.text) == known.end())
                unknown_field(key, "transitional", known);
            once(seen, key);
            expect_punct(":");
            if (key.text == "label") {
                t.label = expect_string("a quoted label").text;
            } else if (key.text == "kind") {
                const Token& v = expect_ident("a transitional kind");
                auto k = parse_transitional_kind(v.text);
                if (!k)
                    fail(v, "SYNTAX_ERROR",
                         "unknown transitional kind '" + v.text +
                             "'; expected quality-change, create-aggregate, destroy-aggregate, rq-change or "
                             "message-send");
                t.kind = *k;
            } else if (key.text == "delay") {
                t.delay = parse_time("delay");
            } else if (key.text == "function") {
                t.function = expect_string("a quoted function annotation").text;
            } else {
                t.refinement = expect_ident("a mechanism id").text;
            }
        });
        t.span = span(kw, close);
        check_duplicate(id, "transitional", doc_.transitionals, t.id);
        doc_.transitionals.push_back(std::move(t));
    }

    void parse_unit() {
        const Token& kw = next();
        const Token& id = expect_ident("a unit id");
        TransitionalUnit u;
        u.id = id.text;
        std::set<std::string> seen;
        const Token& close = block(kw, "unit", [&] {
            const Token& key = expect_ident("a unit field");
            static const std::initializer_list<std::string_view> known = {
                "transitional", "inputs", "outputs", "consumes", "produces", "source", "sink"};
            if (std::find(known.begin(), known.end(), key.text) == known.end()) unknown_field(key, "unit", known);
            once(seen, key);
            expect_punct(":");
            if (key.text == "transitional")
                u.transitional = expect_ident("a transitional id").text;
            else if (key.text == "inputs")
                u.inputs = parse_or();
            else if (key.text == "outputs")
                u.outputs = parse_or();
            else if (key.text == "consumes")
                u.consumes = token_list();
            else if (key.text == "produces")
                u.produces = token_list();
            else if (key.text == "source")
                u.sources = curie_list();
            else
                u.sinks = curie_list();
        });
        u.span = span(kw, close);
        if (u.transitional.empty()) report(kw, "SYNTAX_ERROR", "unit '" + u.id + "' needs a transitional");
        check_duplicate(id, "unit", doc_.units, u.id);
        doc_.units.push_back(std::move(u));
    }

    void parse_mechanism() {
        const Token& kw = next();
        const Token& id = expect_ident("a mechanism id");
        Mechanism m;
        m.id = id.text;
        std::set<std::string> seen;
        const Token& close = block(kw, "mechanism", [&] {
            const Token& key = expect_ident("a mechanism field");
            if (key.text == "metadata") {
                once(seen, key);
                parse_metadata(key, m.metadata);
                return;
            }
            if (key.text == "part") {
                MechanismPart part;
                part.aggregate = expect_ident("a part aggregate id").text;
                if (peek().kind == TokenKind::Ident) {
                    const Token& role = next();
                    auto r = parse_part_role(role.text);
                    if (!r) fail(role, "SYNTAX_ERROR", "part role must be functional or structural");
                    part.role = *r;
                }
                m.parts.push_back(part);
                return;
            }
            static const std::initializer_list<std::string_view> known = {
                "metadata", "setup",        "termination", "summary", "part",
                "places",   "organization", "observe",     "conserve"};
            if (std::find(known.begin(), known.end(), key.text) == known.end())
                unknown_field(key, "mechanism", known);
            once(seen, key);
            expect_punct(":");
            if (key.text == "setup") {
                m.phenomenon.setup = parse_or();
            } else if (key.text == "termination") {
                m.phenomenon.termination = parse_or();
            } else if (key.text == "summary") {
                m.phenomenon.summary = expect_string("a quoted summary").text;
            } else if (key.text == "places") {
                m.places = id_list("a place id");
            } else if (key.text == "organization") {
                m.organization = id_list("a unit id");
            } else if (key.text == "observe") {
                if (!at_eol()) {
                    m.observables.push_back(quality_path());
                    while (at_punct(",")) {
                        next();
                        m.observables.push_back(quality_path());
                    }
                }
            } else {
                m.conserved = curie_list();
            }
        });
        m.span = span(kw, close);
        check_duplicate(id, "mechanism", doc_.mechanisms, m.id);
        doc_.mechanisms.push_back(std::move(m));
    }

    void parse_microworld() {
        const Token& kw = next();
        const Token& id = expect_ident("a microworld id");
        MicroworldDecl w;
        w.id = id.text;
        std::set<std::string> seen;
        const Token& close = block(kw, "microworld", [&] {
            const Token& key = expect_ident("a microworld field");
            if (key.text == "mechanisms") {
                once(seen, key);
                expect_punct(":");
                w.mechanisms = id_list("a mechanism id");
            } else if (key.text == "axiom") {
                expect_punct(":");
                w.axioms.push_back(parse_or());
            } else {
                unknown_field(key, "microworld", {"mechanisms", "axiom"});
            }
        });
        w.span = span(kw, close);
        if (doc_.microworld) {
            report(id, "DUPLICATE_ID", "a microworld is already declared", {{doc_.microworld->span, "declared here"}});
            return;
        }
        doc_.microworld = std::move(w);
    }

    void parse_conservation() {
        const Token& kw = next();
        const Token& name_tok = peek();
        ConservationDecl c;
        c.name = parse_curie(false);
        std::set<std::string> seen;
        const Token& close = block(kw, "conserve", [&] {
            const Token& key = expect_ident("a conservation field");
            if (key.text == "multiplier") {
                once(seen, key);
                expect_punct(":");
                c.multiplier = expect_ident("a quality name").text;
            } else if (key.text == "weight") {
                once(seen, key);
                expect_punct(":");
                c.weight_quality = expect_ident("a quality name").text;
            } else if (key.text == "match") {
                WeightMatch m;
                m.pattern = parse_curie(true);
                expect_punct("=");
                m.weight = nonneg_int("weight");
                c.matches.push_back(std::move(m));
            } else {
                unknown_field(key, "conserve", {"multiplier", "weight", "match"});
            }
        });
        c.span = span(kw, close);
        for (const auto& other : doc_.conservation) {
            if (other.name == c.name) {
                report(name_tok, "DUPLICATE_ID", "conserved quantity '" + c.name + "' is already declared",
                       {{other.span, "first declared here"}});
                return;
            }
        }
        doc_.conservation.push_back(std::move(c));
    }
};

}  // namespace

ParseResult parse_mech(std::string_view text, const std::string& file_name) {
    return MechParser(text, file_name).parse_document();
}

ExprParseResult parse_state_expr(std::string_view text, const std::string& file_name) {
    return MechParser(text, file_name).parse_standalone_expr();
}

}  // namespace mech
