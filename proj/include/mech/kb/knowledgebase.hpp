#pragma once

#include "mech/compiler/compiler.hpp"
#include "mech/lang/rules.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mech {

enum class EntryKind { AggregateTemplate, TransitionalUnit, Mechanism };

std::string_view to_string(EntryKind k);
std::optional<EntryKind> parse_entry_kind(std::string_view text);

struct Provenance {
    std::string source_file;
    std::string author;
    std::string version;
    bool operator==(const Provenance&) const = default;
};

/// A reusable model element. `payload` is a self-contained document slice
/// holding the element named `id` and everything it depends on.
struct KbEntry {
    std::string id;
    EntryKind kind = EntryKind::Mechanism;
    ModelDocument payload;
    std::optional<std::string> function;
    std::vector<std::string> tags;
    Provenance provenance;
    bool operator==(const KbEntry&) const = default;
};

/// Every set field must match.
struct KbQuery {
    std::optional<EntryKind> kind;
    std::optional<std::string> tag;
    /// Entries whose inputs (setup for mechanisms) follow from this pattern.
    std::optional<StateExpr> input_signature;
    /// Entries whose outputs (termination for mechanisms) imply this pattern.
    std::optional<StateExpr> output_signature;
    std::optional<std::string> function_substring;
};

/// `a` entails `b` as ground facts.
bool signature_entails(const StateExpr& a, const StateExpr& b);

/// Smallest slice of `document` that declares element `id` of `kind`: the
/// element, its units, transitionals and refinements, plus the shared
/// declarations they refer to. Throws UnknownEntry when `id` is not declared.
ModelDocument extract_slice(const ModelDocument& document, const std::string& id, EntryKind kind);

/// Builds an entry for one declared element, taking function text and
/// provenance from the document.
KbEntry make_entry(const ModelDocument& document, const std::string& id, EntryKind kind,
                   std::vector<std::string> tags = {});

/// Kind of the element named `id` in `document`, if any.
std::optional<EntryKind> element_kind(const ModelDocument& document, const std::string& id);

class Knowledgebase : public RefinementSource {
public:
    /// In-memory store.
    Knowledgebase() = default;

    /// Opens (and with `create`, initialises) the store rooted at `dir`.
    /// Throws Io when the directory is missing and InvalidPayload when an
    /// entry file is corrupt.
    static Knowledgebase open(const std::filesystem::path& dir, bool create = true);

    /// Validates and stores an entry. Throws DuplicateId or InvalidPayload.
    std::string register_entry(KbEntry entry);

    const KbEntry* find(const std::string& id) const;
    const std::vector<KbEntry>& entries() const { return entries_; }
    std::vector<KbEntry> query(const KbQuery& pattern) const;

    /// Distinct mechanisms across `models` that use the entry directly or
    /// through refinement. Throws UnknownEntry.
    std::size_t usage_count(const std::string& id, const std::vector<CompiledModel>& models) const;

    std::optional<ModelDocument> refinement_document(const std::string& id) const override;

    const std::optional<std::filesystem::path>& directory() const { return dir_; }

private:
    std::vector<KbEntry> entries_;
    std::optional<std::filesystem::path> dir_;

    void persist(const KbEntry& entry) const;
};

/// Directory named by MECH_KB, else ./kb.
std::filesystem::path default_kb_directory();

std::string sha256_hex(std::string_view data);

using Binding = std::map<std::string, std::string>;

/// First rule whose condition holds; nullopt is the no-match result. Throws
/// UnboundIdentifier when a reached comparison names an unbound identifier.
std::optional<std::string> evaluate_rules(const RuleSet& rules, const Binding& binding);

struct CorpusFile {
    std::string name;
    std::string text;
};

/// The bundled example models as source text.
const std::vector<CorpusFile>& builtin_corpus_files();
std::vector<ModelDocument> builtin_corpus();
/// The bundled NAD preference rules.
const std::string& builtin_nad_rules();

}  // namespace mech
