#include "mech/kb/knowledgebase.hpp"

#include "mech/core/entailment.hpp"
#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"
#include "mech/lang/json_export.hpp"
#include "mech/lang/mech_format.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fcntl.h>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <sys/file.h>
#include <unistd.h>

namespace mech {

namespace fs = std::filesystem;

std::string_view to_string(EntryKind k) {
    switch (k) {
    case EntryKind::AggregateTemplate: return "aggregate-template";
    case EntryKind::TransitionalUnit: return "transitional-unit";
    case EntryKind::Mechanism: return "mechanism";
    }
    return "mechanism";
}

std::optional<EntryKind> parse_entry_kind(std::string_view text) {
    if (text == "aggregate-template") return EntryKind::AggregateTemplate;
    if (text == "transitional-unit") return EntryKind::TransitionalUnit;
    if (text == "mechanism") return EntryKind::Mechanism;
    return std::nullopt;
}

bool signature_entails(const StateExpr& a, const StateExpr& b) {
    AbstractState s;
    assume(s, to_ground(a));
    return entails(s, to_ground(b));
}

std::optional<EntryKind> element_kind(const ModelDocument& document, const std::string& id) {
    if (document.find_mechanism(id)) return EntryKind::Mechanism;
    if (document.find_unit(id)) return EntryKind::TransitionalUnit;
    if (document.find_template(id) || document.find_aggregate(id)) return EntryKind::AggregateTemplate;
    return std::nullopt;
}

ModelDocument extract_slice(const ModelDocument& d, const std::string& id, EntryKind kind) {
    ModelDocument s;
    s.file = d.file;
    s.metadata = d.metadata;
    s.domains = d.domains;
    s.conservation = d.conservation;

    if (kind == EntryKind::AggregateTemplate) {
        std::set<std::string> keep;
        auto below = [&](const std::string& root) {
            auto c = part_closure(root, std::span<const Aggregate>(d.aggregates));
            keep.insert(c.begin(), c.end());
            keep.insert(root);
        };
        if (const Aggregate* t = d.find_template(id)) {
            s.templates.push_back(*t);
            for (const auto& p : t->parts) below(p.child);
        } else if (d.find_aggregate(id)) {
            below(id);
        } else {
            throw MechError(ErrorCode::UnknownEntry, "no aggregate or template named '" + id + "'");
        }
        for (const auto& a : d.aggregates)
            if (keep.count(a.id)) s.aggregates.push_back(a);
        s.link_relations();
        return s;
    }

    s.aggregates = d.aggregates;
    s.templates = d.templates;
    s.relations = d.relations;
    s.emergents = d.emergents;
    s.places = d.places;

    std::set<std::string> mechs, units, transitionals;
    std::function<void(const std::string&)> add_unit;
    std::function<void(const std::string&)> add_mech = [&](const std::string& mid) {
        const Mechanism* m = d.find_mechanism(mid);
        if (!m || !mechs.insert(mid).second) return;
        for (const auto& u : m->organization) add_unit(u);
    };
    add_unit = [&](const std::string& uid) {
        const TransitionalUnit* u = d.find_unit(uid);
        if (!u || !units.insert(uid).second) return;
        const Transitional* t = d.find_transitional(u->transitional);
        if (!t) return;
        transitionals.insert(t->id);
        if (t->refinement) add_mech(*t->refinement);
    };
    if (kind == EntryKind::Mechanism) {
        if (!d.find_mechanism(id)) throw MechError(ErrorCode::UnknownEntry, "no mechanism named '" + id + "'");
        add_mech(id);
    } else {
        if (!d.find_unit(id)) throw MechError(ErrorCode::UnknownEntry, "no unit named '" + id + "'");
        add_unit(id);
    }
    for (const auto& t : d.transitionals)
        if (transitionals.count(t.id)) s.transitionals.push_back(t);
    for (const auto& u : d.units)
        if (units.count(u.id)) s.units.push_back(u);
    for (const auto& m : d.mechanisms)
        if (mechs.count(m.id)) s.mechanisms.push_back(m);
    s.link_relations();
    return s;
}

KbEntry make_entry(const ModelDocument& document, const std::string& id, EntryKind kind,
                   std::vector<std::string> tags) {
    KbEntry e;
    e.id = id;
    e.kind = kind;
    e.payload = extract_slice(document, id, kind);
    e.tags = std::move(tags);
    MechanismMetadata md = document.metadata;
    if (kind == EntryKind::Mechanism) {
        const Mechanism* m = document.find_mechanism(id);
        md = m->metadata.merged_over(document.metadata);
        for (const auto& t : document.transitionals)
            if (t.refinement == id && t.function) {
                e.function = t.function;
                break;
            }
        for (const auto& uid : m->organization) {
            if (e.function) break;
            if (const auto* u = document.find_unit(uid))
                if (const auto* t = document.find_transitional(u->transitional)) e.function = t->function;
        }
    } else if (kind == EntryKind::TransitionalUnit) {
        if (const auto* u = document.find_unit(id))
            if (const auto* t = document.find_transitional(u->transitional)) e.function = t->function;
    }
    e.provenance = {document.file, md.author.value_or(""), md.version.value_or("")};
    return e;
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw MechError(ErrorCode::Io, "sha-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

fs::path default_kb_directory() {
    if (const char* env = std::getenv("MECH_KB"); env && *env) return env;
    return "kb";
}

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MechError(ErrorCode::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& p, const std::string& text) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw MechError(ErrorCode::Io, "cannot write " + tmp.string());
        out << text;
        if (!out) throw MechError(ErrorCode::Io, "cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

class IndexLock {
public:
    explicit IndexLock(const fs::path& dir) {
        fd_ = ::open((dir / "index.lock").c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw MechError(ErrorCode::Io, "cannot open lock in " + dir.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw MechError(ErrorCode::Io, "cannot lock " + dir.string());
        }
    }
    ~IndexLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    IndexLock(const IndexLock&) = delete;
    IndexLock& operator=(const IndexLock&) = delete;

private:
    int fd_ = -1;
};

Json read_index(const fs::path& dir) {
    fs::path p = dir / "index.json";
    if (!fs::exists(p)) return Json::array();
    try {
        Json j = Json::parse(read_file(p));
        if (!j.is_array()) throw MechError(ErrorCode::InvalidPayload, "index.json is not an array");
        return j;
    } catch (const Json::parse_error& e) {
        throw MechError(ErrorCode::InvalidPayload, std::string("index.json: ") + e.what());
    }
}

Json index_record(const KbEntry& e, const std::string& hash) {
    Json tags = Json::array();
    for (const auto& t : e.tags) tags.push_back(t);
    return Json{{"id", e.id},
                {"kind", to_string(e.kind)},
                {"tags", tags},
                {"hash", hash},
                {"function", e.function ? Json(*e.function) : Json(nullptr)},
                {"provenance",
                 Json{{"source_file", e.provenance.source_file},
                      {"author", e.provenance.author},
                      {"version", e.provenance.version}}}};
}

fs::path entry_path(const fs::path& dir, EntryKind kind, const std::string& id) {
    return dir / std::string(to_string(kind)) / (id + ".mech");
}

const StateExpr* entry_inputs(const KbEntry& e) {
    if (e.kind == EntryKind::Mechanism) {
        if (const auto* m = e.payload.find_mechanism(e.id)) return &m->phenomenon.setup;
    } else if (e.kind == EntryKind::TransitionalUnit) {
        if (const auto* u = e.payload.find_unit(e.id)) return &u->inputs;
    }
    return nullptr;
}

const StateExpr* entry_outputs(const KbEntry& e) {
    if (e.kind == EntryKind::Mechanism) {
        if (const auto* m = e.payload.find_mechanism(e.id)) return &m->phenomenon.termination;
    } else if (e.kind == EntryKind::TransitionalUnit) {
        if (const auto* u = e.payload.find_unit(e.id)) return &u->outputs;
    }
    return nullptr;
}

bool identifier_ok(const std::string& id) {
    if (id.empty() || id.front() == '.' || id.front() == '-') return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

}  // namespace

Knowledgebase Knowledgebase::open(const fs::path& dir, bool create) {
    if (!fs::exists(dir)) {
        if (!create) throw MechError(ErrorCode::Io, "knowledgebase directory " + dir.string() + " does not exist");
        fs::create_directories(dir);
    }
    Knowledgebase kb;
    kb.dir_ = dir;
    for (const auto& rec : read_index(dir)) {
        std::string id = rec.value("id", "");
        auto kind = parse_entry_kind(rec.value("kind", ""));
        if (!kind || !identifier_ok(id)) throw MechError(ErrorCode::InvalidPayload, "malformed index record");
        fs::path p = entry_path(dir, *kind, id);
        std::string text = read_file(p);
        if (sha256_hex(text) != rec.value("hash", ""))
            throw MechError(ErrorCode::InvalidPayload, p.string() + " does not match its recorded hash");
        ParseResult pr = parse_mech(text, p.string());
        if (!pr.ok()) throw MechError(ErrorCode::InvalidPayload, p.string() + " does not parse");
        KbEntry e;
        e.id = id;
        e.kind = *kind;
        e.payload = std::move(*pr.document);
        if (rec.contains("function") && rec["function"].is_string()) e.function = rec["function"].get<std::string>();
        if (rec.contains("tags"))
            for (const auto& t : rec["tags"]) e.tags.push_back(t.get<std::string>());
        if (rec.contains("provenance")) {
            const auto& pv = rec["provenance"];
            e.provenance = {pv.value("source_file", ""), pv.value("author", ""), pv.value("version", "")};
        }
        kb.entries_.push_back(std::move(e));
    }
    std::sort(kb.entries_.begin(), kb.entries_.end(), [](const KbEntry& a, const KbEntry& b) { return a.id < b.id; });
    return kb;
}

void Knowledgebase::persist(const KbEntry& entry) const {
    const fs::path& dir = *dir_;
    IndexLock lock(dir);
    Json index = read_index(dir);
    for (const auto& rec : index)
        if (rec.value("id", "") == entry.id)
            throw MechError(ErrorCode::DuplicateId, "entry '" + entry.id + "' already exists");
    std::string text = serialize_mech(entry.payload);
    fs::path p = entry_path(dir, entry.kind, entry.id);
    fs::create_directories(p.parent_path());
    write_file_atomic(p, text);
    index.push_back(index_record(entry, sha256_hex(text)));
    write_file_atomic(dir / "index.json", index.dump(2) + "\n");
}

std::string Knowledgebase::register_entry(KbEntry entry) {
    if (!identifier_ok(entry.id)) throw MechError(ErrorCode::InvalidPayload, "invalid entry id '" + entry.id + "'");
    if (find(entry.id)) throw MechError(ErrorCode::DuplicateId, "entry '" + entry.id + "' already exists");
    auto declared = element_kind(entry.payload, entry.id);
    if (!declared || *declared != entry.kind)
        throw MechError(ErrorCode::InvalidPayload,
                        "payload does not declare " + std::string(to_string(entry.kind)) + " '" + entry.id + "'");
    CompileResult cr = compile(entry.payload);
    if (!cr.ok()) {
        std::string first;
        for (const auto& d : cr.diagnostics)
            if (d.severity == Severity::Error) {
                first = d.code + ": " + d.message;
                break;
            }
        throw MechError(ErrorCode::InvalidPayload, "entry '" + entry.id + "' does not compile: " + first);
    }
    if (dir_) persist(entry);
    std::string id = entry.id;
    auto pos = std::lower_bound(entries_.begin(), entries_.end(), id,
                                [](const KbEntry& e, const std::string& key) { return e.id < key; });
    entries_.insert(pos, std::move(entry));
    return id;
}

const KbEntry* Knowledgebase::find(const std::string& id) const {
    for (const auto& e : entries_)
        if (e.id == id) return &e;
    return nullptr;
}

std::vector<KbEntry> Knowledgebase::query(const KbQuery& q) const {
    std::vector<KbEntry> out;
    for (const auto& e : entries_) {
        if (q.kind && e.kind != *q.kind) continue;
        if (q.tag && std::find(e.tags.begin(), e.tags.end(), *q.tag) == e.tags.end()) continue;
        if (q.function_substring && (!e.function || e.function->find(*q.function_substring) == std::string::npos))
            continue;
        if (q.input_signature) {
            const StateExpr* in = entry_inputs(e);
            if (!in || !signature_entails(*q.input_signature, *in)) continue;
        }
        if (q.output_signature) {
            const StateExpr* outs = entry_outputs(e);
            if (!outs || !signature_entails(*outs, *q.output_signature)) continue;
        }
        out.push_back(e);
    }
    return out;
}

std::size_t Knowledgebase::usage_count(const std::string& id, const std::vector<CompiledModel>& models) const {
    const KbEntry* entry = find(id);
    if (!entry) throw MechError(ErrorCode::UnknownEntry, "no entry '" + id + "'");
    std::set<std::string> users;
    for (const auto& cm : models) {
        const ModelDocument& d = cm.source;
        for (const auto& root : d.mechanisms) {
            if (entry->kind == EntryKind::Mechanism && root.id == id) continue;
            bool uses = false;
            std::set<std::string> seen;
            std::function<void(const Mechanism&)> visit = [&](const Mechanism& m) {
                if (uses || !seen.insert(m.id).second) return;
                if (entry->kind == EntryKind::Mechanism && m.id == id && &m != &root) uses = true;
                if (entry->kind == EntryKind::AggregateTemplate)
                    for (const auto& p : m.parts)
                        if (p.aggregate == id) uses = true;
                for (const auto& uid : m.organization) {
                    if (entry->kind == EntryKind::TransitionalUnit && uid == id) uses = true;
                    const TransitionalUnit* u = d.find_unit(uid);
                    const Transitional* t = u ? d.find_transitional(u->transitional) : nullptr;
                    if (!t) continue;
                    if (entry->kind == EntryKind::AggregateTemplate)
                        for (const auto& ed : t->effects)
                            if (const auto* c = std::get_if<CreateAggregate>(&ed.effect); c && c->from_template == id)
                                uses = true;
                    if (t->refinement)
                        if (const Mechanism* r = d.find_mechanism(*t->refinement)) visit(*r);
                }
            };
            visit(root);
            if (uses) users.insert(root.id);
        }
    }
    return users.size();
}

std::optional<ModelDocument> Knowledgebase::refinement_document(const std::string& id) const {
    const KbEntry* e = find(id);
    if (!e || e->kind != EntryKind::Mechanism) return std::nullopt;
    return e->payload;
}

namespace {

bool eval_rule(const RuleExpr& e, const Binding& b) {
    switch (e.kind) {
    case RuleExpr::Kind::Compare: {
        auto it = b.find(e.identifier);
        if (it == b.end()) throw MechError(ErrorCode::UnboundIdentifier, "identifier '" + e.identifier + "' is unbound");
        return it->second == e.symbol;
    }
    case RuleExpr::Kind::And:
        for (const auto& c : e.children)
            if (!eval_rule(c, b)) return false;
        return true;
    case RuleExpr::Kind::Or:
        for (const auto& c : e.children)
            if (eval_rule(c, b)) return true;
        return false;
    }
    return false;
}

}  // namespace

std::optional<std::string> evaluate_rules(const RuleSet& rules, const Binding& binding) {
    for (const auto& r : rules.rules)
        if (!r.condition || eval_rule(*r.condition, binding)) return r.model;
    return std::nullopt;
}

std::vector<ModelDocument> builtin_corpus() {
    std::vector<ModelDocument> out;
    for (const auto& f : builtin_corpus_files()) {
        ParseResult pr = parse_mech(f.text, f.name);
        if (!pr.ok()) throw MechError(ErrorCode::InvalidPayload, "bundled model " + f.name + " does not parse");
        out.push_back(std::move(*pr.document));
    }
    return out;
}

}  // namespace mech
