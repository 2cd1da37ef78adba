#include "support.hpp"

#include "mech/lang/json_export.hpp"
#include "mech/lang/lexer.hpp"
#include "mech/lang/rules.hpp"

#include <algorithm>

using namespace mech;
using namespace mech::test;

namespace {

int line_count(const std::string& text) { return static_cast<int>(std::count(text.begin(), text.end(), '\n')) + 1; }

bool has_code(const std::vector<Diagnostic>& diags, const std::string& code) {
    return std::any_of(diags.begin(), diags.end(), [&](const Diagnostic& d) { return d.code == code; });
}

void check_spans(const std::vector<Diagnostic>& diags, const std::string& text) {
    int lines = line_count(text);
    for (const auto& d : diags) {
        CHECK(d.span.start_line >= 1);
        CHECK(d.span.start_line <= lines);
        CHECK(d.span.start_column >= 1);
        CHECK(d.span.end_line >= d.span.start_line);
    }
}

}  // namespace

TEST_SUITE("lang") {

TEST_CASE("corpus documents survive parse, serialize, parse") {
    for (const auto& f : builtin_corpus_files()) {
        CAPTURE(f.name);
        ModelDocument first = parse_ok(f.text, f.name);
        std::string canon = serialize_mech(first);
        ModelDocument second = parse_ok(canon, f.name);
        CHECK(first == second);
        CHECK(serialize_mech(second) == canon);
    }
}

TEST_CASE("generated documents survive parse, serialize, parse") {
    Rng rng(20240101);
    for (int i = 0; i < 300; ++i) {
        ModelDocument doc = random_document(rng);
        std::string text = serialize_mech(doc);
        CAPTURE(text);
        ModelDocument parsed = parse_ok(text);
        CHECK(parsed == doc);
        CHECK(serialize_mech(parsed) == text);
    }
}

TEST_CASE("serialized output starts with the header and is stable") {
    CHECK(serialize_mech(ModelDocument{}) == "# mechanism model\n");
    ModelDocument water = parse_ok(corpus_text("water.mech"));
    CHECK(serialize_mech(water) == serialize_mech(water));
    CHECK(serialize_mech(water).rfind("# mechanism model\n", 0) == 0);
}

TEST_CASE("arbitrary bytes give a document or diagnostics, never both") {
    Rng rng(7);
    std::vector<std::string> seeds;
    for (const auto& f : builtin_corpus_files()) seeds.push_back(f.text);
    static const std::vector<std::string> fragments = {"{", "}", "(", ")", "aggregate", "unit", "mechanism", ".",
                                                       "==", "&&", "||", "!", "[", "]", "\"", "\n", "#", "-",
                                                       "1/0", "1e999", "tokens(", "->", "+=", ":", ",", "\r\n"};
    int documents = 0, failures = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string text;
        int mode = i % 4;
        if (mode == 0) {
            int n = rng.range(0, 200);
            for (int k = 0; k < n; ++k) text += static_cast<char>(rng.range(0, 255));
        } else if (mode == 1) {
            int n = rng.range(0, 40);
            for (int k = 0; k < n; ++k) text += rng.pick(fragments) + (rng.coin() ? " " : "");
        } else {
            text = rng.pick(seeds);
            int edits = rng.range(1, 6);
            for (int k = 0; k < edits && !text.empty(); ++k) {
                auto pos = static_cast<std::size_t>(rng.range(0, static_cast<int>(text.size()) - 1));
                switch (rng.range(0, 2)) {
                case 0: text.erase(pos, static_cast<std::size_t>(rng.range(1, 30))); break;
                case 1: text.insert(pos, rng.pick(fragments)); break;
                default: text[pos] = static_cast<char>(rng.range(32, 126));
                }
            }
        }
        ParseResult r = parse_mech(text, "fuzz");
        REQUIRE(r.document.has_value() != !r.diagnostics.empty());
        if (r.document) {
            ++documents;
        } else {
            ++failures;
            check_spans(r.diagnostics, text);
        }
    }
    CHECK(documents > 0);
    CHECK(failures > 0);
}

TEST_CASE("unknown keywords are skipped with a suggestion") {
    ParseResult r = parse_mech("aggregat tank {\n  quality level: FULL\n}\naggregate pump {}\n", "kw.mech");
    REQUIRE_FALSE(r.ok());
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].code == "UNKNOWN_KEYWORD");
    CHECK(r.diagnostics[0].message.find("aggregate") != std::string::npos);
    CHECK(r.diagnostics[0].span.start_line == 1);
}

TEST_CASE("unterminated blocks are reported once") {
    ParseResult r = parse_mech("mechanism m {\n  metadata {\n    author: \"x\"\n", "open.mech");
    REQUIRE_FALSE(r.ok());
    CHECK(std::count_if(r.diagnostics.begin(), r.diagnostics.end(),
                        [](const Diagnostic& d) { return d.code == "UNTERMINATED_BLOCK"; }) == 1);
}

TEST_CASE("duplicate ids, malformed numbers and units") {
    CHECK(has_code(parse_mech("aggregate a {}\naggregate a {}\n").diagnostics, "DUPLICATE_ID"));
    CHECK(has_code(parse_mech("aggregate a {\n  quality q: 12abc\n}\n").diagnostics, "MALFORMED_NUMBER"));
    CHECK(has_code(parse_mech("aggregate a {\n  quality q: 2.5\n}\n").diagnostics, "MALFORMED_NUMBER"));
    CHECK(has_code(parse_mech("aggregate a {\n  quality q: 2.5 [m\n}\n").diagnostics, "MALFORMED_UNIT"));
}

TEST_CASE("values and effects parse to their kinds") {
    ModelDocument d = parse_ok(
        "domain D { X, Y }\n"
        "aggregate a {\n  quality s: X\n  quality b: true\n  quality c: 3\n  quality r: 2.5 [m/s]\n}\n"
        "template t {}\n"
        "transitional step {\n  kind: quality-change\n  delay: 5/2\n"
        "  effect a.c -= 2\n  effect a.r += 0.5 [m/s]\n  effect create n from t\n"
        "  effect send a -> a.s = Y after 1.5\n}\n");
    const Aggregate* a = d.find_aggregate("a");
    REQUIRE(a);
    CHECK(std::get<Symbol>(*a->quality("s")).name == "X");
    CHECK(std::get<bool>(*a->quality("b")));
    CHECK(std::get<Count>(*a->quality("c")).value == 3);
    CHECK(std::get<Scalar>(*a->quality("r")).unit == "m/s");
    const Transitional* t = d.find_transitional("step");
    REQUIRE(t);
    CHECK(t->delay == Time(5, 2));
    REQUIRE(t->effects.size() == 4);
    CHECK(std::get<std::int64_t>(std::get<AdjustQuality>(t->effects[0].effect).delta) == -2);
    CHECK(std::get<SendMessage>(t->effects[3].effect).latency == Time(3, 2));
}

TEST_CASE("state expressions keep precedence") {
    auto r = parse_state_expr("a.x == 1 || a.y == 2 && !(a.z == 3)");
    REQUIRE(r.expr);
    CHECK(r.expr->kind == StateExpr::Kind::Or);
    CHECK(r.expr->children[1].kind == StateExpr::Kind::And);
    CHECK(format_expr(*r.expr) == "a.x == 1 || (a.y == 2 && !(a.z == 3))");
    CHECK_FALSE(parse_state_expr("a.x ==").expr);
}

TEST_CASE("lexer marks glued tokens and skips comments") {
    auto toks = tokenize("a.b // note\n# other\nc");
    std::vector<std::string> texts;
    for (const auto& t : toks)
        if (t.kind != TokenKind::Newline && t.kind != TokenKind::End) texts.push_back(t.text);
    CHECK(texts == std::vector<std::string>{"a", ".", "b", "c"});
    CHECK(toks[1].glued);
}

TEST_CASE("the bundled preference rules parse into two guarded rules") {
    RulesParseResult r = parse_rules(builtin_nad_rules(), "nad.rules");
    REQUIRE(r.rules);
    REQUIRE(r.rules->rules.size() == 2);
    CHECK(r.rules->rules[0].model == "ConceptualModel1");
    CHECK(r.rules->rules[1].model == "ConceptualModel2");
    CHECK(rule_identifiers(*r.rules) == std::set<std::string>{"NAD", "Degeneration"});
}

TEST_CASE("rule chains and rule syntax errors") {
    RulesParseResult chain =
        parse_rules("if (A == X) then {prefer M1;} else if (A == Y || B == Z) then {prefer M2;} else {prefer M3;}");
    REQUIRE(chain.rules);
    REQUIRE(chain.rules->rules.size() == 3);
    CHECK_FALSE(chain.rules->rules[2].condition);
    CHECK(parse_rules("").rules->rules.empty());

    RulesParseResult bad = parse_rules("if (A == X) then {prefer;}\nif (B = Y) then {prefer M;}");
    CHECK_FALSE(bad.rules);
    REQUIRE(bad.diagnostics.size() == 1);
    CHECK(bad.diagnostics[0].code == "SYNTAX_ERROR");
    CHECK(bad.diagnostics[0].span.start_line == 1);
}

TEST_CASE("document JSON carries spans and typed values") {
    ModelDocument d = parse_ok(corpus_text("water.mech"), "water.mech");
    Json j = to_json(d);
    CHECK(j["aggregates"].size() == d.aggregates.size());
    CHECK(j["aggregates"][0]["span"]["start_line"].get<int>() > 0);
    CHECK(j["mechanisms"][0]["phenomenon"]["termination"]["text"] == "H2O.count == 2");
}

}
