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

#include <compare>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minispiffe/clock.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe {

/// A typed fact about a workload's environment, serialized "type:value".
/// Types are lowercase [a-z0-9_]+; values are opaque.
struct Selector {
    std::string type;
    std::string value;

    /// Errors: InvalidEntry (bad type charset or missing colon).
    static Result<Selector> parse(std::string_view typed);

    [[nodiscard]] std::string to_string() const { return type + ":" + value; }

    auto operator<=>(const Selector&) const = default;
};

using SelectorSet = std::set<Selector>;

Result<SelectorSet> parse_selector_list(const std::vector<std::string>& items);

/// Server-side binding of a selector set to a SPIFFE ID under a parent
/// agent identity. Node entries are parented to the trust-domain identity
/// itself and gate agent admission.
struct RegistrationEntry {
    std::string entry_id;
    SpiffeId spiffe_id;
    SpiffeId parent_id;
    SelectorSet selectors;
    std::int64_t ttl_seconds = 3600;
    bool is_node_entry = false;

    /// Errors: InvalidEntry (empty selectors, non-positive TTL, or
    /// spiffe_id and parent_id in different trust domains).
    [[nodiscard]] Result<void> validate() const;

    /// One-object-per-line file form:
    /// {"entry_id","spiffe_id","parent_id","selectors",["ttl"],["node"]}.
    [[nodiscard]] nlohmann::json to_json() const;
    static Result<RegistrationEntry> from_json(const nlohmann::json& doc);
};

struct AttestedIdentity {
    SpiffeId spiffe_id;
    std::string matched_entry_id;
    SelectorSet observed_selectors;
    UnixTime attested_at = 0;
};

/// Exactly the entries with entry.parent_id == parent whose selector set is
/// a subset of `observed`, ordered by entry_id.
std::vector<RegistrationEntry> match_entries(std::span<const RegistrationEntry> entries,
                                             const SpiffeId& parent, const SelectorSet& observed);

/// Node admission: considers node entries only (parented to the
/// trust-domain identity). Exactly one match is required; the resulting
/// identity becomes the parent for workload attestation.
/// Errors: NoMatch, AmbiguousMatch.
Result<AttestedIdentity> attest_node(std::span<const RegistrationEntry> entries,
                                     const SpiffeId& server_identity, const SelectorSet& observed,
                                     UnixTime now);

/// Workload attestation: one identity per matching entry under the agent's
/// parent identity. A workload may legitimately hold several identities;
/// an empty result means deny.
std::vector<AttestedIdentity> attest_workload(std::span<const RegistrationEntry> entries,
                                              const SpiffeId& agent_id,
                                              const SelectorSet& observed, UnixTime now);

}  // namespace minispiffe
