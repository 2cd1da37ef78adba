#include "support.hpp"

#include "mech/lang/json_export.hpp"

#include <algorithm>

using namespace mech;
using namespace mech::test;

namespace {

std::vector<std::string> codes(const std::vector<Diagnostic>& diags) {
    std::vector<std::string> out;
    for (const auto& d : diags) out.push_back(d.code);
    return out;
}

std::size_t count_code(const std::vector<Diagnostic>& diags, const std::string& code) {
    return static_cast<std::size_t>(
        std::count_if(diags.begin(), diags.end(), [&](const Diagnostic& d) { return d.code == code; }));
}

CompileResult compile_text(const std::string& text, const CompileOptions& options = {}) {
    return compile(parse_ok(text, "case.mech"), options);
}

std::string header() {
    return "metadata {\n  author: \"t\"\n  date: \"2024-01-01\"\n  version: \"1\"\n  function_type: Designed\n}\n"
           "aggregate lamp {\n  quality lit: false\n}\n";
}

/// Mechanism m0 runs a unit refined by m1, and so on down to m<depth>.
std::string refinement_chain(int depth) {
    std::string text = header();
    for (int i = 0; i <= depth; ++i) {
        std::string n = std::to_string(i);
        text += "transitional t" + n + " {\n  kind: quality-change\n";
        if (i < depth) text += "  refinement: m" + std::to_string(i + 1) + "\n";
        text += "  effect lamp.lit = true\n}\n";
        text += "unit u" + n + " {\n  transitional: t" + n + "\n  inputs: lamp.lit == false\n  outputs: lamp.lit == true\n}\n";
        text += "mechanism m" + n + " {\n  metadata {\n    mechanism_type: SimpleLinear\n  }\n"
                "  setup: lamp.lit == false\n  termination: lamp.lit == true\n  part lamp functional\n"
                "  organization: u" + n + "\n}\n";
    }
    return text;
}

struct BoolUnit {
    std::vector<std::pair<int, bool>> needs;
    std::vector<std::pair<int, bool>> writes;
};

struct BoolModel {
    std::vector<bool> initial;
    std::vector<BoolUnit> units;
};

std::string fact(int f) { return "f" + std::to_string(f); }

ModelDocument to_document(const BoolModel& m) {
    std::string text = "aggregate s {\n";
    for (std::size_t f = 0; f < m.initial.size(); ++f)
        text += "  quality " + fact(static_cast<int>(f)) + ": " + (m.initial[f] ? "true" : "false") + "\n";
    text += "}\n";
    std::string org;
    for (std::size_t i = 0; i < m.units.size(); ++i) {
        std::string id = std::to_string(i);
        const BoolUnit& u = m.units[i];
        text += "transitional x" + id + " {\n  kind: quality-change\n";
        std::map<int, bool> last;
        for (auto [f, v] : u.writes) {
            text += "  effect s." + fact(f) + " = " + (v ? "true" : "false") + "\n";
            last[f] = v;
        }
        text += "}\n";
        auto conj = [](const std::vector<std::pair<int, bool>>& lits) {
            std::string out;
            for (auto [f, v] : lits) out += (out.empty() ? "" : " && ") + std::string("s.") + fact(f) + " == " + (v ? "true" : "false");
            return out.empty() ? std::string("true") : out;
        };
        text += "unit u" + id + " {\n  transitional: x" + id + "\n  inputs: " + conj(u.needs) + "\n  outputs: " +
                conj(std::vector<std::pair<int, bool>>(last.begin(), last.end())) + "\n}\n";
        org += (org.empty() ? "" : ", ") + std::string("u") + id;
    }
    text += "mechanism chain {\n  setup: true\n  termination: true\n  part s functional\n  organization: " + org + "\n}\n";
    return parse_ok(text, "chain.mech");
}

BoolModel random_bool_model(Rng& rng) {
    BoolModel m;
    int facts = 12;
    for (int f = 0; f < facts; ++f) m.initial.push_back(rng.coin());
    int n = rng.range(1, 8);
    for (int i = 0; i < n; ++i) {
        BoolUnit u;
        std::vector<int> order(static_cast<std::size_t>(facts));
        for (int f = 0; f < facts; ++f) order[static_cast<std::size_t>(f)] = f;
        std::shuffle(order.begin(), order.end(), rng.engine);
        int needs = rng.range(0, 3);
        for (int k = 0; k < needs; ++k) u.needs.push_back({order[static_cast<std::size_t>(k)], rng.coin()});
        int writes = rng.range(0, 3);
        for (int k = 0; k < writes; ++k) u.writes.push_back({rng.range(0, facts - 1), rng.coin()});
        m.units.push_back(u);
    }
    return m;
}

/// Forward closure over the values each fact can take.
std::map<std::string, std::string> chain_oracle(const BoolModel& m) {
    std::vector<std::set<bool>> reach(m.initial.size());
    for (std::size_t f = 0; f < m.initial.size(); ++f) reach[f].insert(m.initial[f]);
    std::vector<bool> fired(m.units.size(), false);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < m.units.size(); ++i) {
            bool ok = std::all_of(m.units[i].needs.begin(), m.units[i].needs.end(),
                                  [&](auto lit) { return reach[static_cast<std::size_t>(lit.first)].count(lit.second) > 0; });
            if (!ok) continue;
            if (!fired[i]) fired[i] = changed = true;
            std::map<int, bool> last;
            for (auto [f, v] : m.units[i].writes) last[f] = v;
            for (auto [f, v] : last)
                if (reach[static_cast<std::size_t>(f)].insert(v).second) changed = true;
        }
    }
    std::map<std::string, std::string> verdicts;
    for (std::size_t i = 0; i < m.units.size(); ++i) {
        if (fired[i]) continue;
        std::set<int> blocking;
        for (auto [f, v] : m.units[i].needs)
            if (!reach[static_cast<std::size_t>(f)].count(v)) blocking.insert(f);
        bool produced = false;
        for (std::size_t j = 0; j < m.units.size(); ++j) {
            if (j == i || !fired[j]) continue;
            for (auto [f, v] : m.units[j].writes)
                if (blocking.count(f)) produced = true;
        }
        verdicts["u" + std::to_string(i)] = produced ? "CHAIN_MISMATCH" : "UNREACHABLE_UNIT";
    }
    return verdicts;
}

}  // namespace

TEST_SUITE("compiler") {

TEST_CASE("every corpus model compiles cleanly") {
    for (const auto& f : builtin_corpus_files()) {
        CAPTURE(f.name);
        CompileResult r = compile(parse_ok(f.text, f.name));
        CHECK(r.ok());
        CHECK(r.diagnostics.empty());
    }
}

TEST_CASE("corpus classifications") {
    CompiledModel water = compile_corpus("water.mech");
    CHECK(water.classification.at("water-synthesis").inferred == MechanismType::SimpleLinear);
    CHECK(water.mechanism_graphs.at("water-synthesis").is_path());
    CHECK(water.mechanism_graphs.at("water-synthesis").edges.count({"decomposition", "combination"}));

    CompiledModel tank = compile_corpus("tank.mech");
    const Classification& tc = tank.classification.at("tank-cycle");
    CHECK(tc.inferred == MechanismType::Concurrent);
    CHECK(tc.cyclic);
    CHECK(tc.concurrent);

    CompiledModel vehicle = compile_corpus("vehicle.mech");
    for (const char* m : {"vehicle-motion", "gasoline-engine", "diesel-engine", "electric-engine"})
        CHECK(vehicle.classification.at(m).inferred == MechanismType::SimpleLinear);

    CompiledModel traffic = compile_corpus("traffic.mech");
    CHECK_FALSE(traffic.classification.at("traffic-stop").inferred.has_value());
}

TEST_CASE("a raised input threshold is a chain mismatch naming both units") {
    std::string text = mutate(corpus_text("water.mech"), "unit combination", "H_plus.count >= 4", "H_plus.count >= 5");
    CompileResult r = compile_text(text);
    REQUIRE_FALSE(r.ok());
    REQUIRE(r.diagnostics.size() == 1);
    const Diagnostic& d = r.diagnostics[0];
    CHECK(d.code == "CHAIN_MISMATCH");
    CHECK(d.severity == Severity::Error);
    REQUIRE(d.related.size() == 2);
    CHECK(d.related[0].note.find("combination") != std::string::npos);
    CHECK(d.related[1].note.find("decomposition") != std::string::npos);
    CHECK(d.message.find("H_plus.count") != std::string::npos);
}

TEST_CASE("the broken fixture matches the golden diagnostics") {
    std::string text = read_file(fixture_path("broken_water.mech"));
    CompileResult r = compile(parse_ok(text, "broken_water.mech"));
    Json golden = Json::parse(read_file(fixture_path("../golden/check_broken_water.json")));
    CHECK(to_json(r.diagnostics).dump(2) == golden.dump(2));
}

TEST_CASE("three water products break hydrogen and oxygen conservation") {
    std::string text = mutate(corpus_text("water.mech"), "transitional recombine", "H2O.count += 2", "H2O.count += 3");
    text = mutate(text, "unit combination", "H2O.count >= 2", "H2O.count >= 3");
    CompileResult r = compile_text(text);
    REQUIRE_FALSE(r.ok());
    REQUIRE(count_code(r.diagnostics, "CONSERVATION_VIOLATION") == 2);
    bool h = false, o = false;
    for (const auto& d : r.diagnostics) {
        if (d.message.find("atom:H: 4 before, 6 after") != std::string::npos) h = true;
        if (d.message.find("atom:O: 2 before, 3 after") != std::string::npos) o = true;
    }
    CHECK(h);
    CHECK(o);
}

TEST_CASE("a unit without effects and a single-unit mechanism") {
    std::string text = header() +
                       "transitional wait {\n  kind: quality-change\n}\n"
                       "unit idle {\n  transitional: wait\n  inputs: lamp.lit == false\n  outputs: true\n}\n"
                       "mechanism m {\n  metadata {\n    mechanism_type: SimpleLinear\n  }\n"
                       "  setup: lamp.lit == false\n  termination: lamp.lit == false\n  part lamp functional\n"
                       "  organization: idle\n}\n";
    CompileResult r = compile_text(text);
    REQUIRE(r.ok());
    const DependencyGraph& g = r.compiled->mechanism_graphs.at("m");
    CHECK(g.nodes == std::vector<std::string>{"idle"});
    CHECK(g.is_path());
}

TEST_CASE("outputs that do not follow from the effects") {
    std::string text = mutate(corpus_text("water.mech"), "unit combination", "H2O.count >= 2", "H2O.count >= 9");
    CompileResult r = compile_text(text);
    REQUIRE_FALSE(r.ok());
    CHECK(codes(r.diagnostics) == std::vector<std::string>{"OUTPUT_NOT_ENTAILED"});
}

TEST_CASE("refinement depth is bounded") {
    CHECK(compile_text(refinement_chain(6), {nullptr, 8}).ok());
    CompileResult deep = compile_text(refinement_chain(10), {nullptr, 8});
    REQUIRE_FALSE(deep.ok());
    CHECK(count_code(deep.diagnostics, "UNBOUNDED_REFINEMENT") >= 1);
    CHECK(compile_text(refinement_chain(10), {nullptr, 16}).ok());

    CompileResult self = compile(parse_ok(read_file(fixture_path("self_refine.mech")), "self_refine.mech"));
    REQUIRE_FALSE(self.ok());
    CHECK(codes(self.diagnostics) == std::vector<std::string>{"UNBOUNDED_REFINEMENT"});
}

TEST_CASE("a refinement must carry the same signature") {
    std::string text = mutate(corpus_text("vehicle.mech"), "mechanism gasoline-engine", "setup: vehicle.moving == false",
                              "setup: vehicle.moving == false && piston.stroke == DOWN");
    CompileResult r = compile_text(text);
    REQUIRE_FALSE(r.ok());
    CHECK(count_code(r.diagnostics, "REFINEMENT_SIGNATURE_MISMATCH") == 1);
}

TEST_CASE("vehicle flattening replaces the drive unit") {
    CompiledModel cm = compile_corpus("vehicle.mech");
    CHECK(cm.model.find_unit("drive") == nullptr);
    REQUIRE(cm.model.find_unit("drive__ignite"));
    REQUIRE(cm.model.find_unit("drive__power_stroke"));
    const Mechanism* top = cm.model.find_mechanism("vehicle-motion");
    REQUIRE(top);
    CHECK(top->organization == std::vector<std::string>{"drive__ignite", "drive__power_stroke"});
    REQUIRE(cm.refinements.size() == 1);
    CHECK(cm.refinements[0].unit == "drive");
    CHECK(cm.refinements[0].mechanism == "gasoline-engine");
    CHECK(cm.source.find_unit("drive") != nullptr);

    CompiledModel atomic = compile_corpus("vehicle.mech", {nullptr, 16, false});
    CHECK(atomic.model == atomic.source);
}

TEST_CASE("models without refinements flatten to themselves") {
    for (const char* name : {"water.mech", "tank.mech", "traffic.mech"}) {
        CompiledModel cm = compile_corpus(name);
        CHECK(cm.model == cm.source);
        CHECK(cm.refinements.empty());
    }
}

TEST_CASE("missing metadata and mismatched types") {
    CompileResult missing = compile(parse_ok(read_file(fixture_path("missing_author.mech"))));
    REQUIRE_FALSE(missing.ok());
    CHECK(codes(missing.diagnostics) == std::vector<std::string>{"METADATA_MISSING"});
    CHECK(missing.diagnostics[0].message.find("author") != std::string::npos);

    std::string cyclic = mutate(corpus_text("water.mech"), "mechanism water-synthesis", "mechanism_type: SimpleLinear",
                                "mechanism_type: Cyclic");
    CompileResult r = compile_text(cyclic);
    REQUIRE(r.ok());
    CHECK(codes(r.diagnostics) == std::vector<std::string>{"TYPE_MISMATCH"});
    CHECK(codes(r.compiled->warnings) == std::vector<std::string>{"TYPE_MISMATCH"});
}

TEST_CASE("unresolved references stop compilation") {
    std::string text = mutate(corpus_text("water.mech"), "unit combination", "transitional: recombine", "transitional: nothing");
    CompileResult r = compile_text(text);
    REQUIRE_FALSE(r.ok());
    CHECK(count_code(r.diagnostics, "UNRESOLVED_REFERENCE") >= 1);
}

TEST_CASE("compilation is deterministic and flattening is idempotent") {
    for (const auto& f : builtin_corpus_files()) {
        CAPTURE(f.name);
        ModelDocument doc = parse_ok(f.text, f.name);
        CompiledModel a = compile_ok(doc);
        CompiledModel b = compile_ok(doc);
        CHECK(serialize_mech(a.model) == serialize_mech(b.model));
        CHECK(a.graph.edges == b.graph.edges);
        CompiledModel again = compile_ok(parse_ok(serialize_mech(a.model)));
        CHECK(serialize_mech(again.model) == serialize_mech(a.model));
    }
    std::string broken = read_file(fixture_path("broken_water.mech"));
    CHECK(render_text(compile_text(broken).diagnostics) == render_text(compile_text(broken).diagnostics));
}

TEST_CASE("chain checking agrees with a boolean forward closure") {
    Rng rng(99);
    int mismatches = 0, unreachable = 0;
    for (int round = 0; round < 300; ++round) {
        BoolModel m = random_bool_model(rng);
        ModelDocument doc = to_document(m);
        auto expected = chain_oracle(m);
        std::map<std::string, std::string> actual;
        for (const auto& d : check_chain(doc.mechanisms[0], doc)) {
            std::string unit = d.code == "CHAIN_MISMATCH" ? d.message.substr(16) : d.message.substr(6);
            unit = unit.substr(0, unit.find('\''));
            actual[unit] = d.code;
        }
        CAPTURE(serialize_mech(doc));
        CHECK(actual == expected);
        for (const auto& [u, c] : expected) (c == "CHAIN_MISMATCH" ? mismatches : unreachable)++;
    }
    CHECK(mismatches > 0);
    CHECK(unreachable > 0);
}

}
