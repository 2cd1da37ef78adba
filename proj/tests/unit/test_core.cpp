#include "support.hpp"

#include "mech/core/entailment.hpp"
#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"

#include <map>

using namespace mech;
using namespace mech::test;

namespace {

std::vector<Aggregate> random_dag(Rng& rng, int n) {
    std::vector<Aggregate> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)].id = "a" + std::to_string(i);
        for (int j = i + 1; j < n; ++j)
            if (rng.coin(0.06)) out[static_cast<std::size_t>(i)].parts.push_back({"a" + std::to_string(j), PartRole::Functional});
    }
    return out;
}

std::vector<std::vector<bool>> closure_matrix(const std::vector<Aggregate>& aggs) {
    std::size_t n = aggs.size();
    std::vector<std::vector<bool>> m(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& p : aggs[i].parts) m[i][static_cast<std::size_t>(std::stoi(p.child.substr(1)))] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (m[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (m[k][j]) m[i][j] = true;
    return m;
}

struct ExprCase {
    StateExpr expr;
    std::function<bool(const std::map<std::string, std::int64_t>&, const std::map<std::string, bool>&)> oracle;
};

ExprCase random_expr(Rng& rng, int depth) {
    int choice = depth <= 0 ? rng.range(0, 1) : rng.range(0, 4);
    if (choice == 0) {
        std::string q = "n" + std::to_string(rng.range(0, 2));
        std::int64_t v = rng.range(0, 4);
        static const std::vector<Comparator> ops = {Comparator::Eq, Comparator::Ne, Comparator::Lt,
                                                    Comparator::Le, Comparator::Gt, Comparator::Ge};
        Comparator op = rng.pick(ops);
        return {StateExpr::make_atom(QualityState{"x", q, op, Count{v}}),
                [q, v, op](const auto& counts, const auto&) {
                    std::int64_t a = counts.at(q);
                    switch (op) {
                    case Comparator::Eq: return a == v;
                    case Comparator::Ne: return a != v;
                    case Comparator::Lt: return a < v;
                    case Comparator::Le: return a <= v;
                    case Comparator::Gt: return a > v;
                    case Comparator::Ge: return a >= v;
                    }
                    return false;
                }};
    }
    if (choice == 1) {
        std::string q = "b" + std::to_string(rng.range(0, 1));
        bool v = rng.coin();
        return {StateExpr::make_atom(QualityState{"x", q, Comparator::Eq, v}),
                [q, v](const auto&, const auto& flags) { return flags.at(q) == v; }};
    }
    if (choice == 2) {
        ExprCase inner = random_expr(rng, depth - 1);
        return {StateExpr::negation(inner.expr), [o = inner.oracle](const auto& c, const auto& f) { return !o(c, f); }};
    }
    int n = rng.range(0, 3);
    std::vector<StateExpr> terms;
    std::vector<decltype(ExprCase::oracle)> oracles;
    for (int i = 0; i < n; ++i) {
        ExprCase c = random_expr(rng, depth - 1);
        terms.push_back(c.expr);
        oracles.push_back(c.oracle);
    }
    bool conj = choice == 3;
    return {conj ? StateExpr::conj(terms) : StateExpr::disj(terms), [oracles, conj](const auto& c, const auto& f) {
                for (const auto& o : oracles)
                    if (o(c, f) != conj) return !conj;
                return conj;
            }};
}

Microworld world_of(const std::map<std::string, std::int64_t>& counts, const std::map<std::string, bool>& flags) {
    Aggregate x;
    x.id = "x";
    for (const auto& [k, v] : counts) x.qualities.push_back({k, Count{v}, {}});
    for (const auto& [k, v] : flags) x.qualities.push_back({k, v, {}});
    Microworld w;
    w.aggregates["x"] = x;
    return w;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("part closure matches a transitive closure on random DAGs") {
    Rng rng(11);
    for (int round = 0; round < 200; ++round) {
        auto aggs = random_dag(rng, 50);
        auto m = closure_matrix(aggs);
        std::map<std::string, Aggregate> by_id;
        for (const auto& a : aggs) by_id[a.id] = a;
        CHECK(find_part_cycle(by_id).empty());
        for (std::size_t i = 0; i < aggs.size(); i += 7) {
            std::set<std::string> expected;
            for (std::size_t j = 0; j < aggs.size(); ++j)
                if (m[i][j]) expected.insert("a" + std::to_string(j));
            CHECK(part_closure(aggs[i].id, by_id) == expected);
            CHECK(part_closure(aggs[i].id, std::span<const Aggregate>(aggs)) == expected);
        }
    }
}

TEST_CASE("part cycles are detected and named") {
    std::map<std::string, Aggregate> aggs;
    for (std::string id : {"a", "b", "c"}) aggs[id].id = id;
    aggs["a"].parts.push_back({"b", PartRole::Functional});
    aggs["b"].parts.push_back({"c", PartRole::Structural});
    aggs["c"].parts.push_back({"a", PartRole::Functional});
    auto cycle = find_part_cycle(aggs);
    REQUIRE(cycle.size() == 4);
    CHECK(cycle.front() == cycle.back());
    try {
        part_closure("a", aggs);
        FAIL("expected CycleDetected");
    } catch (const MechError& e) {
        CHECK(e.code() == ErrorCode::CycleDetected);
    }
    CHECK_THROWS_AS(part_closure("zz", aggs), MechError);
}

TEST_CASE("state evaluation agrees with a direct evaluator") {
    Rng rng(3);
    for (int round = 0; round < 2000; ++round) {
        ExprCase c = random_expr(rng, 3);
        std::map<std::string, std::int64_t> counts{{"n0", rng.range(0, 4)}, {"n1", rng.range(0, 4)}, {"n2", rng.range(0, 4)}};
        std::map<std::string, bool> flags{{"b0", rng.coin()}, {"b1", rng.coin()}};
        Microworld w = world_of(counts, flags);
        bool expected = c.oracle(counts, flags);
        CHECK(evaluate_state(c.expr, w) == expected);
        StateExpr negated = StateExpr::negation(c.expr);
        CHECK(evaluate_state(negated, w) == !expected);
    }
}

TEST_CASE("De Morgan holds for evaluation") {
    Rng rng(5);
    for (int round = 0; round < 500; ++round) {
        ExprCase a = random_expr(rng, 2), b = random_expr(rng, 2);
        Microworld w = world_of({{"n0", rng.range(0, 4)}, {"n1", rng.range(0, 4)}, {"n2", rng.range(0, 4)}},
                                {{"b0", rng.coin()}, {"b1", rng.coin()}});
        bool lhs = evaluate_state(StateExpr::negation(StateExpr::conj({a.expr, b.expr})), w);
        bool rhs = evaluate_state(StateExpr::disj({StateExpr::negation(a.expr), StateExpr::negation(b.expr)}), w);
        CHECK(lhs == rhs);
    }
}

TEST_CASE("comparisons across kinds and units throw") {
    CHECK(compare_values(Scalar{1.5, "L"}, Comparator::Lt, Scalar{2, "L"}));
    CHECK_THROWS_AS(compare_values(Scalar{1, "L"}, Comparator::Eq, Scalar{1, "m"}), MechError);
    CHECK_THROWS_AS(compare_values(Count{1}, Comparator::Eq, true), MechError);
    CHECK_THROWS_AS(compare_values(true, Comparator::Lt, false), MechError);
}

TEST_CASE("conservation totals match an atom table for water") {
    ModelDocument doc = parse_ok(corpus_text("water.mech"));
    static const std::map<std::string, std::pair<int, int>> atoms = {
        {"CHEBI:18276", {2, 0}}, {"CHEBI:15379", {0, 2}}, {"CHEBI:15378", {1, 0}},
        {"CHEBI:29356", {0, 1}}, {"CHEBI:15377", {2, 1}}};
    Microworld w = initial_world(doc);
    auto oracle = [&](const Microworld& world, bool hydrogen) {
        std::int64_t total = 0;
        for (const auto& [id, a] : world.aggregates) {
            if (a.ontology_refs.empty()) continue;
            auto it = atoms.find(a.ontology_refs[0]);
            if (it == atoms.end()) continue;
            total += std::get<Count>(*a.quality("count")).value * (hydrogen ? it->second.first : it->second.second);
        }
        return total;
    };
    const ConservationDecl* h = doc.find_conservation("atom:H");
    const ConservationDecl* o = doc.find_conservation("atom:O");
    REQUIRE(h);
    REQUIRE(o);
    CHECK(conservation_total(*h, w) == 4);
    CHECK(conservation_total(*o, w) == 2);
    CHECK(conservation_total(*h, w) == oracle(w, true));
    for (const char* unit : {"decomposition", "combination"}) {
        w = apply_transitional_unit(doc, *doc.find_unit(unit), w);
        CHECK(conservation_total(*h, w) == oracle(w, true));
        CHECK(conservation_total(*o, w) == oracle(w, false));
        CHECK(conservation_total(*h, w) == 4);
    }
    CHECK(std::get<Count>(*w.aggregates["H2O"].quality("count")).value == 2);
}

TEST_CASE("ontology patterns and CURIEs") {
    CHECK(is_curie("CHEBI:15377"));
    CHECK_FALSE(is_curie("15377"));
    CHECK_FALSE(is_curie(":x"));
    CHECK(ontology_pattern_matches("CHEBI:*", "CHEBI:15377"));
    CHECK_FALSE(ontology_pattern_matches("CHEBI:1", "CHEBI:15377"));
}

TEST_CASE("unit application enforces pre and post conditions") {
    ModelDocument doc = parse_ok(corpus_text("water.mech"));
    Microworld w = initial_world(doc);
    try {
        apply_transitional_unit(doc, *doc.find_unit("combination"), w);
        FAIL("expected PreconditionNotMet");
    } catch (const MechError& e) {
        CHECK(e.code() == ErrorCode::PreconditionNotMet);
    }
    Microworld before = w;
    Microworld after = apply_transitional_unit(doc, *doc.find_unit("decomposition"), w);
    CHECK(w == before);
    CHECK(after.tokens("spark") == 0);
}

TEST_CASE("io compatibility follows the water chain") {
    ModelDocument doc = parse_ok(corpus_text("water.mech"));
    const auto& d = *doc.find_unit("decomposition");
    const auto& c = *doc.find_unit("combination");
    CHECK(io_compatible(d, c, doc));
    CHECK(io_compatible(c, d, doc));
    CHECK_FALSE(io_compatible(c, c, doc));
    TransitionalUnit bad = c;
    bad.transitional = "nope";
    CHECK_THROWS_AS(io_compatible(d, bad, doc), MechError);
}

TEST_CASE("value boxes refine and join") {
    ValueBox b = ValueBox::count_at_least(0);
    b.refine(Comparator::Lt, Count{3});
    CHECK(b.definitely(Comparator::Le, Count{2}));
    CHECK(b.possibly(Comparator::Eq, Count{0}));
    CHECK_FALSE(b.possibly(Comparator::Eq, Count{3}));
    ValueBox p = ValueBox::point(Count{7});
    b.join(p);
    CHECK(b.possibly(Comparator::Eq, Count{7}));
    CHECK_FALSE(b.definitely(Comparator::Le, Count{2}));
    ValueBox s = ValueBox::point(Symbol{"RED"});
    CHECK(s.definitely(Comparator::Ne, Symbol{"GREEN"}));
    s.refine(Comparator::Eq, Symbol{"GREEN"});
    CHECK(s.empty());
}

TEST_CASE("markings normalize and print") {
    CHECK(normalized({{"a", 0}, {"b", 2}}) == Marking{{"b", 2}});
    CHECK(format_time(Time(5, 2)) == "5/2");
    CHECK(format_time(Time(4)) == "4");
    CHECK(format_time_fraction(Time(4)) == "4/1");
}

}
