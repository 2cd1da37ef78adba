#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mech {

/// Simulation time. Exact rationals keep scheduling free of float ties.
using Time = boost::rational<std::int64_t>;

/// Location of a declaration in a source file, 1-based and inclusive of the
/// start column. Spans never take part in structural equality: two models
/// that differ only in where things were written compare equal.
struct SourceSpan {
    std::string file;
    int start_line = 0;
    int start_column = 0;
    int end_line = 0;
    int end_column = 0;

    bool valid() const { return start_line > 0; }
    friend bool operator==(const SourceSpan&, const SourceSpan&) { return true; }
};

bool same_location(const SourceSpan& a, const SourceSpan& b);

// ---------------------------------------------------------------------------
// Quality values

struct Symbol {
    std::string name;
    bool operator==(const Symbol&) const = default;
};

struct Scalar {
    double value = 0.0;
    std::string unit;
    bool operator==(const Scalar&) const = default;
};

struct Count {
    std::int64_t value = 0;
    bool operator==(const Count&) const = default;
};

/// enum-symbol | scalar-with-unit | boolean | count
using QualityValue = std::variant<Symbol, Scalar, bool, Count>;

enum class ValueKind { Symbol, Scalar, Boolean, Count };

ValueKind kind_of(const QualityValue& v);
std::string_view to_string(ValueKind k);

enum class Comparator { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(Comparator c);
std::optional<Comparator> parse_comparator(std::string_view text);
Comparator negate(Comparator c);

/// Comparators allowed for a value kind: == and != everywhere, ordering only
/// for scalar and count.
bool comparator_allowed(Comparator c, ValueKind k);

// ---------------------------------------------------------------------------
// Aggregates

enum class PartRole { Functional, Structural };

std::string_view to_string(PartRole r);
std::optional<PartRole> parse_part_role(std::string_view text);

struct PartLink {
    std::string child;
    PartRole role = PartRole::Functional;
    bool operator==(const PartLink&) const = default;
};

struct QualityDecl {
    std::string name;
    QualityValue value;
    SourceSpan span;
    bool operator==(const QualityDecl&) const = default;
};

/// A Thick Aggregate.
struct Aggregate {
    std::string id;
    std::string label;
    std::vector<std::string> ontology_refs;
    std::vector<QualityDecl> qualities;
    std::vector<PartLink> parts;
    /// Derived from relation declarations; kept sorted.
    std::vector<std::string> relational_qualities;
    std::optional<std::vector<double>> position;
    SourceSpan span;

    const QualityValue* quality(std::string_view name) const;
    QualityValue* quality(std::string_view name);

    bool operator==(const Aggregate&) const = default;
};

struct RelationalQuality {
    std::string id;
    std::string name;
    std::vector<std::string> participants;
    QualityValue value;
    SourceSpan span;
    bool operator==(const RelationalQuality&) const = default;
};

struct EnumDomain {
    std::string id;
    std::vector<std::string> symbols;
    SourceSpan span;
    bool operator==(const EnumDomain&) const = default;
};

struct Place {
    std::string id;
    std::int64_t initial_tokens = 0;
    SourceSpan span;
    bool operator==(const Place&) const = default;
};

// ---------------------------------------------------------------------------
// State expressions

struct QualityState {
    std::string aggregate;
    std::string quality;
    Comparator op = Comparator::Eq;
    QualityValue value;
    bool operator==(const QualityState&) const = default;
};

struct ConfigurationState {
    std::string relation;
    Comparator op = Comparator::Eq;
    QualityValue value;
    bool operator==(const ConfigurationState&) const = default;
};

struct EmergentState {
    std::string predicate;
    bool operator==(const EmergentState&) const = default;
};

struct TokenState {
    std::string place;
    std::int64_t required = 1;
    bool operator==(const TokenState&) const = default;
};

using StateAtom = std::variant<QualityState, ConfigurationState, EmergentState, TokenState>;

/// Boolean combination of state atoms. An empty conjunction is `true`, an
/// empty disjunction is `false`; Not always has exactly one child.
struct StateExpr {
    enum class Kind { Atom, And, Or, Not };

    Kind kind = Kind::And;
    StateAtom atom;
    std::vector<StateExpr> children;
    SourceSpan span;

    static StateExpr make_atom(StateAtom a);
    static StateExpr conj(std::vector<StateExpr> terms);
    static StateExpr disj(std::vector<StateExpr> terms);
    static StateExpr negation(StateExpr inner);
    static StateExpr always() { return conj({}); }

    bool is_true_literal() const { return kind == Kind::And && children.empty(); }

    bool operator==(const StateExpr&) const = default;
};

/// Named predicate over a set of aggregates, e.g. a traffic jam.
struct EmergentPredicate {
    std::string id;
    std::vector<std::string> over;
    StateExpr when;
    SourceSpan span;
    bool operator==(const EmergentPredicate&) const = default;
};

// ---------------------------------------------------------------------------
// Transitionals

struct SetQuality {
    std::string aggregate;
    std::string quality;
    QualityValue value;
    bool operator==(const SetQuality&) const = default;
};

/// Signed increment of a count or scalar quality.
struct AdjustQuality {
    std::string aggregate;
    std::string quality;
    std::variant<std::int64_t, Scalar> delta;
    bool operator==(const AdjustQuality&) const = default;
};

struct SetRelation {
    std::string relation;
    QualityValue value;
    bool operator==(const SetRelation&) const = default;
};

struct CreateAggregate {
    std::string id;
    std::string from_template;
    bool operator==(const CreateAggregate&) const = default;
};

struct DestroyAggregate {
    std::string id;
    bool operator==(const DestroyAggregate&) const = default;
};

struct SendMessage {
    std::string sender;
    std::string receiver;
    std::string quality;
    QualityValue value;
    Time latency{0};
    bool operator==(const SendMessage&) const = default;
};

using Effect = std::variant<SetQuality, AdjustQuality, SetRelation, CreateAggregate, DestroyAggregate, SendMessage>;

struct EffectDecl {
    Effect effect;
    SourceSpan span;
    bool operator==(const EffectDecl&) const = default;
};

enum class TransitionalKind { QualityChange, CreateAggregate, DestroyAggregate, RqChange, MessageSend };

std::string_view to_string(TransitionalKind k);
std::optional<TransitionalKind> parse_transitional_kind(std::string_view text);

struct Transitional {
    std::string id;
    std::string label;
    TransitionalKind kind = TransitionalKind::QualityChange;
    std::vector<EffectDecl> effects;
    Time delay{0};
    std::optional<std::string> function;
    std::optional<std::string> refinement;
    SourceSpan span;
    bool operator==(const Transitional&) const = default;
};

struct TokenCount {
    std::string place;
    std::int64_t count = 1;
    bool operator==(const TokenCount&) const = default;
};

struct TransitionalUnit {
    std::string id;
    StateExpr inputs;
    std::string transitional;
    StateExpr outputs;
    std::vector<TokenCount> consumes;
    std::vector<TokenCount> produces;
    /// Conserved quantities this unit may create (source) or remove (sink).
    std::vector<std::string> sources;
    std::vector<std::string> sinks;
    SourceSpan span;

    bool exempt_from(std::string_view quantity) const;
    bool operator==(const TransitionalUnit&) const = default;
};

// ---------------------------------------------------------------------------
// Mechanisms

enum class MechanismType { SimpleLinear, Cyclic, Concurrent, Feedback, Continuous, Stochastic, Asynchronous };
enum class FunctionType { Designed, Evolved, Natural, NoneApparent };

std::string_view to_string(MechanismType t);
std::string_view to_string(FunctionType t);
std::optional<MechanismType> parse_mechanism_type(std::string_view text);
std::optional<FunctionType> parse_function_type(std::string_view text);

/// Descriptive record attached to a mechanism. Every field is optional at the
/// type level; the compiler decides which ones are required.
struct MechanismMetadata {
    std::optional<MechanismType> mechanism_type;
    std::optional<std::string> model_type;
    std::optional<FunctionType> function_type;
    std::optional<std::string> dynamic_elements;
    std::optional<std::string> context;
    std::optional<std::string> author;
    std::optional<std::string> date;
    std::optional<std::string> version;
    std::optional<std::string> explanations;
    std::optional<std::string> variations;
    std::optional<std::string> implications;
    std::vector<std::string> evidence;
    SourceSpan span;

    bool empty() const;
    /// Fields set here win; unset fields fall back to `defaults`.
    MechanismMetadata merged_over(const MechanismMetadata& defaults) const;
    bool operator==(const MechanismMetadata&) const = default;
};

struct Phenomenon {
    StateExpr setup;
    StateExpr termination;
    std::optional<std::string> summary;
    bool operator==(const Phenomenon&) const = default;
};

struct MechanismPart {
    std::string aggregate;
    PartRole role = PartRole::Functional;
    bool operator==(const MechanismPart&) const = default;
};

struct Mechanism {
    std::string id;
    MechanismMetadata metadata;
    Phenomenon phenomenon;
    std::vector<MechanismPart> parts;
    std::vector<std::string> places;
    std::vector<std::string> organization;
    /// Quality paths (`aggregate.quality`) reported as mechanism-level state.
    std::vector<std::string> observables;
    std::vector<std::string> conserved;
    SourceSpan span;
    bool operator==(const Mechanism&) const = default;
};

struct WeightMatch {
    std::string pattern;  // exact CURIE or prefix ending in '*'
    std::int64_t weight = 0;
    bool operator==(const WeightMatch&) const = default;
};

/// Counting rule for a conserved quantity. The contribution of an aggregate is
/// multiplier × weight, where the multiplier is the value of the `multiplier`
/// count quality (1 when absent) and the weight comes from the `weight`
/// quality or, failing that, the first matching ontology pattern.
struct ConservationDecl {
    std::string name;
    std::optional<std::string> multiplier;
    std::optional<std::string> weight_quality;
    std::vector<WeightMatch> matches;
    SourceSpan span;
    bool operator==(const ConservationDecl&) const = default;
};

struct MicroworldDecl {
    std::string id;
    std::vector<std::string> mechanisms;
    std::vector<StateExpr> axioms;
    SourceSpan span;
    bool operator==(const MicroworldDecl&) const = default;
};

/// A complete model as written in one .mech file.
struct ModelDocument {
    std::string file;
    MechanismMetadata metadata;
    std::vector<EnumDomain> domains;
    std::vector<Aggregate> aggregates;
    std::vector<Aggregate> templates;
    std::vector<RelationalQuality> relations;
    std::vector<EmergentPredicate> emergents;
    std::vector<Place> places;
    std::vector<Transitional> transitionals;
    std::vector<TransitionalUnit> units;
    std::vector<Mechanism> mechanisms;
    std::optional<MicroworldDecl> microworld;
    std::vector<ConservationDecl> conservation;

    bool empty() const;

    const Aggregate* find_aggregate(std::string_view id) const;
    const Aggregate* find_template(std::string_view id) const;
    const RelationalQuality* find_relation(std::string_view id) const;
    const EmergentPredicate* find_emergent(std::string_view id) const;
    const Place* find_place(std::string_view id) const;
    const Transitional* find_transitional(std::string_view id) const;
    const TransitionalUnit* find_unit(std::string_view id) const;
    const Mechanism* find_mechanism(std::string_view id) const;
    const ConservationDecl* find_conservation(std::string_view name) const;
    const EnumDomain* domain_of_symbol(std::string_view symbol) const;

    /// Mechanisms executed by the microworld. Without an explicit microworld
    /// this is every mechanism not used as a refinement of some transitional.
    std::vector<std::string> active_mechanisms() const;

    /// Recomputes Aggregate::relational_qualities from the relation list.
    void link_relations();

    bool operator==(const ModelDocument& other) const;
};

// ---------------------------------------------------------------------------
// Runtime snapshot

using Marking = std::map<std::string, std::int64_t>;

/// Drops zero entries so equal markings compare equal.
Marking normalized(Marking m);
std::string to_string(const Marking& m);

struct Message {
    std::string id;
    std::string sender;
    std::string receiver;
    std::string quality;
    QualityValue value;
    Time deliver_at{0};
    bool operator==(const Message&) const = default;
};

/// The execution scope: every aggregate instance, relational quality and
/// place, plus axioms, the clock and the message queue.
struct Microworld {
    std::string id;
    std::map<std::string, Aggregate> aggregates;
    std::map<std::string, RelationalQuality> relations;
    std::map<std::string, EmergentPredicate> emergents;
    Marking marking;
    std::vector<std::string> mechanisms;
    std::vector<StateExpr> axioms;
    Time clock{0};
    std::vector<Message> message_queue;
    std::uint64_t next_message = 1;

    std::int64_t tokens(std::string_view place) const;
    bool operator==(const Microworld&) const = default;
};

/// Builds the initial snapshot of a model: declared aggregates, relations,
/// initial tokens, axioms and clock 0.
Microworld initial_world(const ModelDocument& model);

}  // namespace mech
