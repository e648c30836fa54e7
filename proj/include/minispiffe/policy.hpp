// Copyright 2026 the minispiffe authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "minispiffe/clock.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe::policy {

/// Context values are scalars: integers (also used for epoch-second
/// timestamps) and strings. RFC 3339 UTC strings are accepted wherever a
/// timestamp is compared.
using ContextValue = std::variant<std::int64_t, std::string>;
using Context = std::map<std::string, ContextValue>;

enum class CondOp { Eq, Ne, In, Before, After };

std::string_view cond_op_name(CondOp op);

struct Condition {
    std::string key;
    CondOp op;
    // One value for ==/!=/before/after; the member list for `in`.
    std::vector<ContextValue> values;

    [[nodiscard]] std::string to_string() const;
};

/// One permit rule. There are no deny rules: the engine is default-deny
/// and any matching permit allows.
struct PolicyRule {
    std::string rule_id;
    SpiffeIdPattern principal;
    std::string action;    // literal or "*"
    std::string resource;  // literal or trailing-"**" prefix pattern
    std::vector<Condition> conditions;
};

struct PolicySet {
    std::vector<PolicyRule> rules;
    std::string source;
};

/// Grammar:
///   policy := rule* ;
///   rule   := "permit" ident "principal" string "action" string
///             "resource" string ("when" "{" cond ("," cond)* "}")? ";" ;
///   cond   := key op literal ;
///   op     := "==" | "!=" | "in" | "before" | "after" ;
/// Literals are quoted strings, integers, or (for `in`) bracketed lists.
/// `#` starts a line comment. Keys match [a-z0-9_.]+.
/// Errors: SyntaxError (with line and column), DuplicateRuleId, BadPattern.
Result<PolicySet> parse_policy(std::string_view source);

struct AccessRequest {
    SpiffeId spiffe_id;
    std::string action;
    std::string resource;
    Context context;
};

enum class RuleOutcome {
    Matched,
    PrincipalMismatch,
    ActionMismatch,
    ResourceMismatch,
    ConditionFailed,
};

std::string_view rule_outcome_name(RuleOutcome outcome);

struct RuleTrace {
    std::string rule_id;
    RuleOutcome outcome;
    std::string failing_clause;  // empty when matched
};

struct Decision {
    bool allow = false;
    std::optional<std::string> matched_rule_id;
    UnixTime evaluated_at = 0;
    std::vector<RuleTrace> trace;  // every rule, ordered by rule_id

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Total function: no request can fail evaluation. A missing or
/// type-mismatched context value fails the specific condition, nothing
/// more. matched_rule_id is the lexicographically smallest matching rule.
Decision evaluate(const PolicySet& policies, const AccessRequest& request, UnixTime now);

/// Deterministic, human-readable trace rendering: "ALLOW via <rule>" or
/// "DENY (default)" followed by one line per rule.
std::string explain(const Decision& decision);

/// Epoch seconds from "YYYY-MM-DDThh:mm:ssZ" (UTC only).
std::optional<std::int64_t> parse_rfc3339_utc(std::string_view text);

}  // namespace minispiffe::policy
