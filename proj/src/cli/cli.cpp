#include "mech/cli/cli.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"
#include "mech/engine/engine.hpp"
#include "mech/kb/knowledgebase.hpp"
#include "mech/lang/json_export.hpp"
#include "mech/lang/mech_format.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace mech {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<Time> parse_time(const std::string& text) {
    auto parse_int = [](std::string_view s) -> std::optional<std::int64_t> {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
        return v;
    };
    try {
        if (auto slash = text.find('/'); slash != std::string::npos) {
            auto n = parse_int(std::string_view(text).substr(0, slash));
            auto d = parse_int(std::string_view(text).substr(slash + 1));
            if (!n || !d || *d <= 0 || *n < 0) return std::nullopt;
            return Time(*n, *d);
        }
        auto dot = text.find('.');
        if (dot == std::string::npos) {
            auto n = parse_int(text);
            if (!n || *n < 0) return std::nullopt;
            return Time(*n);
        }
        std::string frac = text.substr(dot + 1);
        if (frac.size() > 12) return std::nullopt;
        auto whole = parse_int(std::string_view(text).substr(0, dot));
        auto part = frac.empty() ? std::optional<std::int64_t>(0) : parse_int(frac);
        if (!whole || !part || *whole < 0 || (!frac.empty() && frac[0] == '-')) return std::nullopt;
        std::int64_t scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
        return Time(*whole) + Time(*part, scale);
    } catch (const boost::bad_rational&) {
        return std::nullopt;
    }
}

std::optional<Knowledgebase> open_default_kb() {
    fs::path dir = default_kb_directory();
    if (!fs::exists(dir / "index.json")) return std::nullopt;
    return Knowledgebase::open(dir, false);
}

struct Loaded {
    std::optional<ModelDocument> document;
    std::vector<Diagnostic> diagnostics;
};

Loaded load_and_compile(const std::string& path, const Knowledgebase* kb, CompileOptions options,
                        std::optional<CompiledModel>* compiled) {
    Loaded l;
    ParseResult pr = parse_mech(read_text(path), path);
    if (!pr.ok()) {
        l.diagnostics = std::move(pr.diagnostics);
        sort_diagnostics(l.diagnostics);
        return l;
    }
    options.kb = kb;
    CompileResult cr = compile(*pr.document, options);
    l.diagnostics = std::move(cr.diagnostics);
    l.document = std::move(pr.document);
    if (compiled) *compiled = std::move(cr.compiled);
    return l;
}

std::string summary_line(const std::vector<Diagnostic>& diags) {
    return std::to_string(count_errors(diags)) + " errors, " + std::to_string(count_warnings(diags)) + " warnings";
}

int cmd_check(const std::vector<std::string>& files, bool json, int max_depth, std::ostream& out) {
    auto kb = open_default_kb();
    std::vector<Diagnostic> all;
    for (const auto& f : files) {
        CompileOptions opts;
        opts.max_depth = max_depth;
        Loaded l = load_and_compile(f, kb ? &*kb : nullptr, opts, nullptr);
        if (!json) {
            out << render_text(l.diagnostics);
            if (files.size() > 1) out << f << ": " << summary_line(l.diagnostics) << "\n";
        }
        all.insert(all.end(), l.diagnostics.begin(), l.diagnostics.end());
    }
    if (json)
        out << to_json(all).dump(2) << "\n";
    else
        out << summary_line(all) << "\n";
    return count_errors(all) > 0 ? kExitDiagnostics : kExitOk;
}

struct RunArgs {
    std::string file;
    bool until_termination = false;
    std::string max_time;
    std::optional<std::size_t> max_steps;
    std::uint64_t seed = 0;
    std::string policy = "lexicographic";
    std::string trace;
    bool no_flatten = false;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
    int horizons = (a.until_termination ? 1 : 0) + (a.max_time.empty() ? 0 : 1) + (a.max_steps ? 1 : 0);
    if (horizons > 1) throw UsageError("choose one of --until-termination, --max-time, --max-steps");
    auto policy = parse_tie_break(a.policy);
    if (!policy) throw UsageError("unknown policy '" + a.policy + "' (lexicographic or seeded-random)");
    Horizon horizon = Horizon::until_termination();
    if (!a.max_time.empty()) {
        auto t = parse_time(a.max_time);
        if (!t) throw UsageError("--max-time expects a nonnegative number or fraction");
        horizon = Horizon::time(*t);
    } else if (a.max_steps) {
        horizon = Horizon::steps(*a.max_steps);
    }

    auto kb = open_default_kb();
    std::optional<CompiledModel> compiled;
    CompileOptions opts;
    opts.flatten = !a.no_flatten;
    Loaded l = load_and_compile(a.file, kb ? &*kb : nullptr, opts, &compiled);
    if (!compiled) {
        err << render_text(l.diagnostics) << summary_line(l.diagnostics) << "\n";
        return kExitDiagnostics;
    }

    RunOptions ro;
    ro.policy = *policy;
    std::vector<TraceEvent> partial;
    ro.on_step = [&](const std::vector<TraceEvent>& events, const WorldState&) {
        partial.insert(partial.end(), events.begin(), events.end());
    };
    auto write_trace = [&](const std::vector<TraceEvent>& trace) {
        if (a.trace.empty()) return;
        std::ofstream f(a.trace, std::ios::binary | std::ios::trunc);
        if (!f) throw MechError(ErrorCode::Io, "cannot write " + a.trace);
        f << trace_to_jsonl(trace);
    };
    try {
        WorldState w = init_world(*compiled, a.seed);
        RunResult r = run(std::move(w), *compiled, horizon, ro);
        write_trace(r.trace);
        std::size_t started = 0, completed = 0;
        for (const auto& e : r.trace) {
            if (e.kind == TraceKind::UnitStarted) ++started;
            if (e.kind == TraceKind::UnitCompleted) ++completed;
        }
        bool terminated = !r.trace.empty() && r.trace.back().kind == TraceKind::TerminationReached;
        out << "steps: " << r.steps << "\n";
        out << "unit events: " << started << " started, " << completed << " completed\n";
        out << "final clock: " << format_time(r.final.clock()) << "\n";
        out << "termination reached: " << (terminated ? "yes" : "no") << "\n";
        out << "outcome: " << to_string(r.outcome) << "\n";
        return r.outcome == RunOutcome::Deadlock ? kExitRuntime : kExitOk;
    } catch (const MechError& e) {
        write_trace(partial);
        err << "run failed: " << to_string(e.code()) << ": " << e.what() << "\n";
        return kExitRuntime;
    }
}

void print_field(std::ostream& out, int indent, std::string_view name, const std::optional<std::string>& value) {
    out << std::string(static_cast<std::size_t>(indent), ' ') << name << ": " << (value ? *value : "(absent)") << "\n";
}

int cmd_report(const std::string& file, std::ostream& out, std::ostream& err) {
    auto kb = open_default_kb();
    std::optional<CompiledModel> compiled;
    Loaded l = load_and_compile(file, kb ? &*kb : nullptr, {}, &compiled);
    if (!compiled) {
        err << render_text(l.diagnostics) << summary_line(l.diagnostics) << "\n";
        return kExitDiagnostics;
    }
    const ModelDocument& d = compiled->source;
    bool first = true;
    for (const auto& m : d.mechanisms) {
        if (!first) out << "\n";
        first = false;
        MechanismMetadata md = m.metadata.merged_over(d.metadata);
        auto opt = [](const auto& v) -> std::optional<std::string> {
            if (!v) return std::nullopt;
            return std::string(to_string(*v));
        };
        out << "mechanism " << m.id << "\n";
        out << "  metadata\n";
        print_field(out, 4, "mechanism_type", opt(md.mechanism_type));
        print_field(out, 4, "model_type", md.model_type);
        print_field(out, 4, "function_type", opt(md.function_type));
        print_field(out, 4, "dynamic_elements", md.dynamic_elements);
        print_field(out, 4, "context", md.context);
        print_field(out, 4, "author", md.author);
        print_field(out, 4, "date", md.date);
        print_field(out, 4, "version", md.version);
        out << "  core components\n";
        out << "    phenomenon\n";
        out << "      setup: " << format_expr(m.phenomenon.setup) << "\n";
        out << "      termination: " << format_expr(m.phenomenon.termination) << "\n";
        print_field(out, 6, "summary", m.phenomenon.summary);
        out << "    parts:";
        if (m.parts.empty()) out << " (absent)";
        for (std::size_t i = 0; i < m.parts.size(); ++i)
            out << (i ? ", " : " ") << m.parts[i].aggregate << " (" << to_string(m.parts[i].role) << ")";
        out << "\n    organization:";
        if (m.organization.empty()) out << " (absent)";
        for (std::size_t i = 0; i < m.organization.size(); ++i) {
            const TransitionalUnit* u = d.find_unit(m.organization[i]);
            out << (i ? " -> " : " ") << m.organization[i];
            if (u) out << " [" << u->transitional << "]";
        }
        out << "\n  additional elements\n";
        print_field(out, 4, "explanations", md.explanations);
        print_field(out, 4, "variations", md.variations);
        print_field(out, 4, "implications", md.implications);
        std::optional<std::string> evidence;
        for (const auto& e : md.evidence) evidence = evidence ? *evidence + ", " + e : e;
        print_field(out, 4, "evidence", evidence);
        out << "  structure\n";
        auto it = compiled->classification.find(m.id);
        std::optional<std::string> inferred;
        if (it != compiled->classification.end() && it->second.inferred) inferred = std::string(to_string(*it->second.inferred));
        print_field(out, 4, "inferred", inferred);
        if (it != compiled->classification.end())
            out << "    cyclic marking structure: " << (it->second.cyclic ? "yes" : "no") << "\n";
    }
    if (!l.diagnostics.empty()) out << "\n" << render_text(l.diagnostics);
    out << summary_line(l.diagnostics) << "\n";
    return kExitOk;
}

StateExpr parse_pattern(const std::string& text, std::string_view what) {
    ExprParseResult r = parse_state_expr(text, std::string(what));
    if (!r.expr) throw UsageError("malformed " + std::string(what) + " pattern: " + text);
    return *r.expr;
}

struct KbArgs {
    std::string dir;
    bool init = false;
    std::string add_file;
    std::vector<std::string> ids;
    std::vector<std::string> tags;
    std::string kind, tag, input, output, function;
    bool json = false;
    std::string usage_id;
    std::vector<std::string> usage_files;
    std::string rules;
    std::vector<std::string> binds;
};

Knowledgebase open_kb(const KbArgs& a) {
    fs::path dir = a.dir.empty() ? default_kb_directory() : fs::path(a.dir);
    if (!a.init && !fs::exists(dir)) throw MechError(ErrorCode::Io, "no knowledgebase at " + dir.string() + " (use --init)");
    return Knowledgebase::open(dir, true);
}

void print_entries(const std::vector<KbEntry>& entries, bool json, std::ostream& out) {
    if (json) {
        Json arr = Json::array();
        for (const auto& e : entries) {
            Json tags = Json::array();
            for (const auto& t : e.tags) tags.push_back(t);
            arr.push_back(Json{{"id", e.id},
                               {"kind", to_string(e.kind)},
                               {"tags", tags},
                               {"function", e.function ? Json(*e.function) : Json(nullptr)}});
        }
        out << arr.dump(2) << "\n";
        return;
    }
    for (const auto& e : entries) {
        out << e.id << "\t" << to_string(e.kind);
        std::string tags;
        for (const auto& t : e.tags) tags += (tags.empty() ? "" : ",") + t;
        if (!tags.empty()) out << "\t" << tags;
        out << "\n";
    }
}

int kb_add(const KbArgs& a, std::ostream& out, std::ostream& err) {
    Knowledgebase kb = open_kb(a);
    ParseResult pr = parse_mech(read_text(a.add_file), a.add_file);
    if (!pr.ok()) {
        err << render_text(pr.diagnostics) << summary_line(pr.diagnostics) << "\n";
        return kExitDiagnostics;
    }
    const ModelDocument& d = *pr.document;
    std::vector<std::string> ids = a.ids;
    if (ids.empty())
        for (const auto& m : d.mechanisms) ids.push_back(m.id);
    for (const auto& id : ids) {
        std::optional<EntryKind> kind = a.kind.empty() ? element_kind(d, id) : parse_entry_kind(a.kind);
        if (!kind) throw UsageError("'" + id + "' is not declared in " + a.add_file);
        std::string registered = kb.register_entry(make_entry(d, id, *kind, a.tags));
        out << "registered " << registered << "\n";
    }
    return kExitOk;
}

int kb_query(const KbArgs& a, std::ostream& out) {
    Knowledgebase kb = open_kb(a);
    KbQuery q;
    if (!a.kind.empty()) {
        q.kind = parse_entry_kind(a.kind);
        if (!q.kind) throw UsageError("unknown kind '" + a.kind + "'");
    }
    if (!a.tag.empty()) q.tag = a.tag;
    if (!a.input.empty()) q.input_signature = parse_pattern(a.input, "input");
    if (!a.output.empty()) q.output_signature = parse_pattern(a.output, "output");
    if (!a.function.empty()) q.function_substring = a.function;
    print_entries(kb.query(q), a.json, out);
    return kExitOk;
}

int kb_usage(const KbArgs& a, std::ostream& out, std::ostream& err) {
    Knowledgebase kb = open_kb(a);
    std::vector<CompiledModel> models;
    std::vector<ModelDocument> docs;
    if (a.usage_files.empty()) {
        docs = builtin_corpus();
    } else {
        for (const auto& f : a.usage_files) {
            ParseResult pr = parse_mech(read_text(f), f);
            if (!pr.ok()) {
                err << render_text(pr.diagnostics);
                return kExitDiagnostics;
            }
            docs.push_back(std::move(*pr.document));
        }
    }
    for (const auto& d : docs) {
        CompileOptions opts;
        opts.kb = &kb;
        CompileResult cr = compile(d, opts);
        if (!cr.ok()) {
            err << render_text(cr.diagnostics) << summary_line(cr.diagnostics) << "\n";
            return kExitDiagnostics;
        }
        models.push_back(std::move(*cr.compiled));
    }
    out << kb.usage_count(a.usage_id, models) << "\n";
    return kExitOk;
}

int kb_prefer(const KbArgs& a, std::ostream& out, std::ostream& err) {
    Binding binding;
    for (const auto& b : a.binds) {
        auto eq = b.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == b.size() || b.find('=', eq + 1) != std::string::npos)
            throw UsageError("malformed binding '" + b + "' (expected NAME=SYMBOL)");
        binding[b.substr(0, eq)] = b.substr(eq + 1);
    }
    std::string text = a.rules.empty() ? builtin_nad_rules() : read_text(a.rules);
    RulesParseResult pr = parse_rules(text, a.rules.empty() ? "nad.rules" : a.rules);
    if (!pr.rules) {
        err << render_text(pr.diagnostics);
        return kExitDiagnostics;
    }
    auto model = evaluate_rules(*pr.rules, binding);
    out << (model ? *model : "no-match") << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mechanism modelling toolkit: check, run, report and catalogue .mech models", "mech"};
    app.require_subcommand(1);

    std::vector<std::string> check_files;
    bool check_json = false;
    int max_depth = 16;
    auto* check = app.add_subcommand("check", "Parse and compile models, printing diagnostics");
    check->add_option("files", check_files, "Model files")->required();
    check->add_flag("--json", check_json, "Print diagnostics as a JSON array");
    check->add_option("--max-depth", max_depth, "Refinement depth limit")->check(CLI::PositiveNumber);

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Execute a model and write its trace");
    run_cmd->add_option("file", run_args.file, "Model file")->required();
    run_cmd->add_flag("--until-termination", run_args.until_termination, "Stop once termination holds (default)");
    run_cmd->add_option("--max-time", run_args.max_time, "Stop at this simulated time");
    run_cmd->add_option("--max-steps", run_args.max_steps, "Stop after this many scheduler steps");
    run_cmd->add_option("--seed", run_args.seed, "Seed for the seeded-random policy");
    run_cmd->add_option("--policy", run_args.policy, "lexicographic or seeded-random");
    run_cmd->add_option("--trace", run_args.trace, "Write the trace as JSON Lines");
    run_cmd->add_flag("--no-flatten", run_args.no_flatten, "Run refined units atomically");

    KbArgs kb_args;
    auto* kb = app.add_subcommand("kb", "Manage the knowledgebase");
    kb->require_subcommand(1);
    kb->add_option("--dir", kb_args.dir, "Knowledgebase directory (default $MECH_KB or ./kb)");
    kb->add_flag("--init", kb_args.init, "Create the knowledgebase if missing");
    auto* kb_add_cmd = kb->add_subcommand("add", "Register elements of a model file");
    kb_add_cmd->add_option("file", kb_args.add_file, "Model file")->required();
    kb_add_cmd->add_option("--id", kb_args.ids, "Element id to register (default: every mechanism)");
    kb_add_cmd->add_option("--tag", kb_args.tags, "Tag to attach");
    kb_add_cmd->add_option("--kind", kb_args.kind, "aggregate-template, transitional-unit or mechanism");
    auto* kb_list = kb->add_subcommand("list", "List entries");
    kb_list->add_flag("--json", kb_args.json, "Print JSON");
    auto* kb_query_cmd = kb->add_subcommand("query", "Find entries matching every given criterion");
    kb_query_cmd->add_option("--kind", kb_args.kind, "Entry kind");
    kb_query_cmd->add_option("--tag", kb_args.tag, "Tag");
    kb_query_cmd->add_option("--input", kb_args.input, "State pattern that must establish the entry inputs");
    kb_query_cmd->add_option("--output", kb_args.output, "State pattern the entry outputs must establish");
    kb_query_cmd->add_option("--function", kb_args.function, "Substring of the function text");
    kb_query_cmd->add_flag("--json", kb_args.json, "Print JSON");
    auto* kb_usage_cmd = kb->add_subcommand("usage", "Count mechanisms using an entry");
    kb_usage_cmd->add_option("id", kb_args.usage_id, "Entry id")->required();
    kb_usage_cmd->add_option("files", kb_args.usage_files, "Models to scan (default: bundled corpus)");
    auto* kb_prefer_cmd = kb->add_subcommand("prefer", "Evaluate preference rules for a binding");
    kb_prefer_cmd->add_option("--rules", kb_args.rules, "Rules file (default: bundled NAD rules)");
    kb_prefer_cmd->add_option("--bind", kb_args.binds, "NAME=SYMBOL binding");

    std::string report_file;
    auto* report = app.add_subcommand("report", "Print the structured description of each mechanism");
    report->add_option("file", report_file, "Model file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* sub = &app;
        while (!sub->get_subcommands().empty()) sub = sub->get_subcommands().front();
        err << sub->help(sub == &app ? "" : "mech");
        return kExitUsage;
    }

    try {
        if (*check) return cmd_check(check_files, check_json, max_depth, out);
        if (*run_cmd) return cmd_run(run_args, out, err);
        if (*report) return cmd_report(report_file, out, err);
        if (*kb) {
            if (*kb_add_cmd) return kb_add(kb_args, out, err);
            if (*kb_list) {
                print_entries(open_kb(kb_args).entries(), kb_args.json, out);
                return kExitOk;
            }
            if (*kb_query_cmd) return kb_query(kb_args, out);
            if (*kb_usage_cmd) return kb_usage(kb_args, out, err);
            if (*kb_prefer_cmd) return kb_prefer(kb_args, out, err);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const MechError& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace mech
