#pragma once

#include "mech/core/diagnostic.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mech {

/// `identifier == SYMBOL` comparisons joined by && and ||.
struct RuleExpr {
    enum class Kind { Compare, And, Or };
    Kind kind = Kind::Compare;
    std::string identifier;
    std::string symbol;
    std::vector<RuleExpr> children;
    SourceSpan span;
};

/// `condition` is empty for a trailing bare `else`.
struct Rule {
    std::optional<RuleExpr> condition;
    std::string model;
    SourceSpan span;
};

struct RuleSet {
    std::vector<Rule> rules;
};

struct RulesParseResult {
    std::optional<RuleSet> rules;
    std::vector<Diagnostic> diagnostics;
};

/// Accepts one or more `if (...) then {prefer M;}` chains, each optionally
/// continued by `else if` links and closed by a bare `else`. Stops at the
/// first syntax error.
RulesParseResult parse_rules(std::string_view text, const std::string& file_name = "<rules>");

std::set<std::string> rule_identifiers(const RuleSet& rules);

}  // namespace mech
