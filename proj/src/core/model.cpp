#include "mech/core/model.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/diagnostic.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

namespace mech {

bool same_location(const SourceSpan& a, const SourceSpan& b) {
    return std::tie(a.file, a.start_line, a.start_column, a.end_line, a.end_column) ==
           std::tie(b.file, b.start_line, b.start_column, b.end_line, b.end_column);
}

ValueKind kind_of(const QualityValue& v) {
    return static_cast<ValueKind>(v.index());
}

std::string_view to_string(ValueKind k) {
    switch (k) {
    case ValueKind::Symbol: return "enum-symbol";
    case ValueKind::Scalar: return "scalar";
    case ValueKind::Boolean: return "boolean";
    case ValueKind::Count: return "count";
    }
    return "?";
}

std::string_view to_string(Comparator c) {
    switch (c) {
    case Comparator::Eq: return "==";
    case Comparator::Ne: return "!=";
    case Comparator::Lt: return "<";
    case Comparator::Le: return "<=";
    case Comparator::Gt: return ">";
    case Comparator::Ge: return ">=";
    }
    return "?";
}

std::optional<Comparator> parse_comparator(std::string_view text) {
    if (text == "==") return Comparator::Eq;
    if (text == "!=") return Comparator::Ne;
    if (text == "<") return Comparator::Lt;
    if (text == "<=") return Comparator::Le;
    if (text == ">") return Comparator::Gt;
    if (text == ">=") return Comparator::Ge;
    return std::nullopt;
}

Comparator negate(Comparator c) {
    switch (c) {
    case Comparator::Eq: return Comparator::Ne;
    case Comparator::Ne: return Comparator::Eq;
    case Comparator::Lt: return Comparator::Ge;
    case Comparator::Le: return Comparator::Gt;
    case Comparator::Gt: return Comparator::Le;
    case Comparator::Ge: return Comparator::Lt;
    }
    return c;
}

bool comparator_allowed(Comparator c, ValueKind k) {
    if (c == Comparator::Eq || c == Comparator::Ne) return true;
    return k == ValueKind::Scalar || k == ValueKind::Count;
}

std::string_view to_string(PartRole r) {
    return r == PartRole::Functional ? "functional" : "structural";
}

std::optional<PartRole> parse_part_role(std::string_view text) {
    if (text == "functional") return PartRole::Functional;
    if (text == "structural") return PartRole::Structural;
    return std::nullopt;
}

const QualityValue* Aggregate::quality(std::string_view name) const {
    for (const auto& q : qualities)
        if (q.name == name) return &q.value;
    return nullptr;
}

QualityValue* Aggregate::quality(std::string_view name) {
    for (auto& q : qualities)
        if (q.name == name) return &q.value;
    return nullptr;
}

StateExpr StateExpr::make_atom(StateAtom a) {
    StateExpr e;
    e.kind = Kind::Atom;
    e.atom = std::move(a);
    return e;
}

StateExpr StateExpr::conj(std::vector<StateExpr> terms) {
    StateExpr e;
    e.kind = Kind::And;
    e.children = std::move(terms);
    return e;
}

StateExpr StateExpr::disj(std::vector<StateExpr> terms) {
    StateExpr e;
    e.kind = Kind::Or;
    e.children = std::move(terms);
    return e;
}

StateExpr StateExpr::negation(StateExpr inner) {
    StateExpr e;
    e.kind = Kind::Not;
    e.children.push_back(std::move(inner));
    return e;
}

std::string_view to_string(TransitionalKind k) {
    switch (k) {
    case TransitionalKind::QualityChange: return "quality-change";
    case TransitionalKind::CreateAggregate: return "create-aggregate";
    case TransitionalKind::DestroyAggregate: return "destroy-aggregate";
    case TransitionalKind::RqChange: return "rq-change";
    case TransitionalKind::MessageSend: return "message-send";
    }
    return "?";
}

std::optional<TransitionalKind> parse_transitional_kind(std::string_view text) {
    for (auto k : {TransitionalKind::QualityChange, TransitionalKind::CreateAggregate,
                   TransitionalKind::DestroyAggregate, TransitionalKind::RqChange, TransitionalKind::MessageSend})
        if (to_string(k) == text) return k;
    return std::nullopt;
}

bool TransitionalUnit::exempt_from(std::string_view quantity) const {
    auto has = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), quantity) != v.end(); };
    return has(sources) || has(sinks);
}

std::string_view to_string(MechanismType t) {
    switch (t) {
    case MechanismType::SimpleLinear: return "SimpleLinear";
    case MechanismType::Cyclic: return "Cyclic";
    case MechanismType::Concurrent: return "Concurrent";
    case MechanismType::Feedback: return "Feedback";
    case MechanismType::Continuous: return "Continuous";
    case MechanismType::Stochastic: return "Stochastic";
    case MechanismType::Asynchronous: return "Asynchronous";
    }
    return "?";
}

std::string_view to_string(FunctionType t) {
    switch (t) {
    case FunctionType::Designed: return "Designed";
    case FunctionType::Evolved: return "Evolved";
    case FunctionType::Natural: return "Natural";
    case FunctionType::NoneApparent: return "NoneApparent";
    }
    return "?";
}

std::optional<MechanismType> parse_mechanism_type(std::string_view text) {
    for (int i = 0; i <= static_cast<int>(MechanismType::Asynchronous); ++i) {
        auto t = static_cast<MechanismType>(i);
        if (to_string(t) == text) return t;
    }
    return std::nullopt;
}

std::optional<FunctionType> parse_function_type(std::string_view text) {
    for (int i = 0; i <= static_cast<int>(FunctionType::NoneApparent); ++i) {
        auto t = static_cast<FunctionType>(i);
        if (to_string(t) == text) return t;
    }
    return std::nullopt;
}

bool MechanismMetadata::empty() const {
    return !mechanism_type && !model_type && !function_type && !dynamic_elements && !context && !author && !date &&
           !version && !explanations && !variations && !implications && evidence.empty();
}

MechanismMetadata MechanismMetadata::merged_over(const MechanismMetadata& defaults) const {
    MechanismMetadata m = *this;
    auto fill = [](auto& field, const auto& fallback) {
        if (!field) field = fallback;
    };
    fill(m.mechanism_type, defaults.mechanism_type);
    fill(m.model_type, defaults.model_type);
    fill(m.function_type, defaults.function_type);
    fill(m.dynamic_elements, defaults.dynamic_elements);
    fill(m.context, defaults.context);
    fill(m.author, defaults.author);
    fill(m.date, defaults.date);
    fill(m.version, defaults.version);
    fill(m.explanations, defaults.explanations);
    fill(m.variations, defaults.variations);
    fill(m.implications, defaults.implications);
    if (m.evidence.empty()) m.evidence = defaults.evidence;
    return m;
}

bool ModelDocument::empty() const {
    return metadata.empty() && domains.empty() && aggregates.empty() && templates.empty() && relations.empty() &&
           emergents.empty() && places.empty() && transitionals.empty() && units.empty() && mechanisms.empty() &&
           !microworld && conservation.empty();
}

namespace {

template <typename T>
const T* find_by_id(const std::vector<T>& items, std::string_view id) {
    for (const auto& item : items)
        if (item.id == id) return &item;
    return nullptr;
}

}  // namespace

const Aggregate* ModelDocument::find_aggregate(std::string_view id) const { return find_by_id(aggregates, id); }
const Aggregate* ModelDocument::find_template(std::string_view id) const { return find_by_id(templates, id); }
const RelationalQuality* ModelDocument::find_relation(std::string_view id) const { return find_by_id(relations, id); }
const EmergentPredicate* ModelDocument::find_emergent(std::string_view id) const { return find_by_id(emergents, id); }
const Place* ModelDocument::find_place(std::string_view id) const { return find_by_id(places, id); }
const Transitional* ModelDocument::find_transitional(std::string_view id) const { return find_by_id(transitionals, id); }
const TransitionalUnit* ModelDocument::find_unit(std::string_view id) const { return find_by_id(units, id); }
const Mechanism* ModelDocument::find_mechanism(std::string_view id) const { return find_by_id(mechanisms, id); }

const ConservationDecl* ModelDocument::find_conservation(std::string_view name) const {
    for (const auto& c : conservation)
        if (c.name == name) return &c;
    return nullptr;
}

const EnumDomain* ModelDocument::domain_of_symbol(std::string_view symbol) const {
    for (const auto& d : domains)
        if (std::find(d.symbols.begin(), d.symbols.end(), symbol) != d.symbols.end()) return &d;
    return nullptr;
}

std::vector<std::string> ModelDocument::active_mechanisms() const {
    if (microworld) return microworld->mechanisms;
    std::set<std::string> refined;
    for (const auto& t : transitionals)
        if (t.refinement) refined.insert(*t.refinement);
    std::vector<std::string> out;
    for (const auto& m : mechanisms)
        if (!refined.count(m.id)) out.push_back(m.id);
    return out;
}

void ModelDocument::link_relations() {
    for (auto& a : aggregates) a.relational_qualities.clear();
    for (const auto& r : relations)
        for (const auto& p : r.participants)
            for (auto& a : aggregates)
                if (a.id == p && std::find(a.relational_qualities.begin(), a.relational_qualities.end(), r.id) ==
                                     a.relational_qualities.end())
                    a.relational_qualities.push_back(r.id);
    for (auto& a : aggregates) std::sort(a.relational_qualities.begin(), a.relational_qualities.end());
}

bool ModelDocument::operator==(const ModelDocument& o) const {
    return metadata == o.metadata && domains == o.domains && aggregates == o.aggregates && templates == o.templates &&
           relations == o.relations && emergents == o.emergents && places == o.places &&
           transitionals == o.transitionals && units == o.units && mechanisms == o.mechanisms &&
           microworld == o.microworld && conservation == o.conservation;
}

Marking normalized(Marking m) {
    std::erase_if(m, [](const auto& kv) { return kv.second == 0; });
    return m;
}

std::string to_string(const Marking& m) {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& [place, n] : m) {
        if (n == 0) continue;
        if (!first) os << ", ";
        first = false;
        os << place << ':' << n;
    }
    os << '}';
    return os.str();
}

std::int64_t Microworld::tokens(std::string_view place) const {
    auto it = marking.find(std::string(place));
    return it == marking.end() ? 0 : it->second;
}

Microworld initial_world(const ModelDocument& model) {
    Microworld w;
    w.id = model.microworld ? model.microworld->id : std::string("default");
    for (const auto& a : model.aggregates) w.aggregates.emplace(a.id, a);
    for (const auto& r : model.relations) w.relations.emplace(r.id, r);
    for (const auto& e : model.emergents) w.emergents.emplace(e.id, e);
    for (const auto& p : model.places)
        if (p.initial_tokens != 0) w.marking[p.id] = p.initial_tokens;
    w.mechanisms = model.active_mechanisms();
    if (model.microworld) w.axioms = model.microworld->axioms;
    return w;
}

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownAggregate: return "UnknownAggregate";
    case ErrorCode::UnresolvedReference: return "UnresolvedReference";
    case ErrorCode::UnitMismatch: return "UnitMismatch";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::PreconditionNotMet: return "PreconditionNotMet";
    case ErrorCode::PostconditionNotMet: return "PostconditionNotMet";
    case ErrorCode::AxiomViolated: return "AxiomViolated";
    case ErrorCode::ConservationBroken: return "ConservationBroken";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::EffectFailed: return "EffectFailed";
    case ErrorCode::InitError: return "InitError";
    case ErrorCode::Deadlock: return "Deadlock";
    case ErrorCode::TimeInPast: return "TimeInPast";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidPayload: return "InvalidPayload";
    case ErrorCode::UnknownEntry: return "UnknownEntry";
    case ErrorCode::UnboundIdentifier: return "UnboundIdentifier";
    case ErrorCode::Io: return "Io";
    }
    return "?";
}

std::string_view to_string(Severity s) {
    return s == Severity::Error ? "error" : "warning";
}

std::size_t count_errors(const std::vector<Diagnostic>& diags) {
    return static_cast<std::size_t>(
        std::count_if(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; }));
}

std::size_t count_warnings(const std::vector<Diagnostic>& diags) {
    return diags.size() - count_errors(diags);
}

void sort_diagnostics(std::vector<Diagnostic>& diags) {
    std::stable_sort(diags.begin(), diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return std::tie(a.span.file, a.span.start_line, a.span.start_column, a.code, a.message) <
               std::tie(b.span.file, b.span.start_line, b.span.start_column, b.code, b.message);
    });
}

std::string render_text(const std::vector<Diagnostic>& diags) {
    std::ostringstream os;
    for (const auto& d : diags) {
        os << d.span.file << ':' << d.span.start_line << ':' << d.span.start_column << ": " << to_string(d.severity)
           << '[' << d.code << "]: " << d.message << '\n';
        for (const auto& r : d.related)
            os << "  " << r.span.file << ':' << r.span.start_line << ':' << r.span.start_column << ": note: " << r.note
               << '\n';
    }
    return os.str();
}

}  // namespace mech
