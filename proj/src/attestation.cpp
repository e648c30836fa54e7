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

#include "minispiffe/attestation.hpp"

#include <algorithm>

namespace minispiffe {

namespace {

bool is_selector_type_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

bool is_subset(const SelectorSet& required, const SelectorSet& observed) {
    return std::includes(observed.begin(), observed.end(), required.begin(), required.end());
}

}  // namespace

Result<Selector> Selector::parse(std::string_view typed) {
    std::size_t colon = typed.find(':');
    if (colon == std::string_view::npos || colon == 0) {
        return make_error(Err::InvalidEntry, "selector must be type:value");
    }
    std::string_view type = typed.substr(0, colon);
    for (char c : type) {
        if (!is_selector_type_char(c)) {
            return make_error(Err::InvalidEntry,
                              "selector type must match [a-z0-9_]+: " + std::string(typed));
        }
    }
    return Selector{std::string(type), std::string(typed.substr(colon + 1))};
}

Result<SelectorSet> parse_selector_list(const std::vector<std::string>& items) {
    SelectorSet out;
    for (const auto& item : items) {
        auto selector = Selector::parse(item);
        if (!selector.ok()) return selector.take_error();
        out.insert(selector.take());
    }
    return out;
}

Result<void> RegistrationEntry::validate() const {
    if (selectors.empty()) {
        return make_error(Err::InvalidEntry, "entry has no selectors");
    }
    if (ttl_seconds <= 0) {
        return make_error(Err::InvalidEntry, "entry TTL must be positive");
    }
    if (spiffe_id.trust_domain() != parent_id.trust_domain()) {
        return make_error(Err::InvalidEntry, "spiffe_id and parent_id must share a trust domain");
    }
    return {};
}

nlohmann::json RegistrationEntry::to_json() const {
    nlohmann::json selector_list = nlohmann::json::array();
    for (const auto& selector : selectors) {
        selector_list.push_back(selector.to_string());
    }
    return {{"entry_id", entry_id},
            {"spiffe_id", spiffe_id.canonical()},
            {"parent_id", parent_id.canonical()},
            {"selectors", std::move(selector_list)},
            {"ttl", ttl_seconds},
            {"node", is_node_entry}};
}

Result<RegistrationEntry> RegistrationEntry::from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("spiffe_id") || !doc.contains("parent_id") ||
        !doc.contains("selectors") || !doc["selectors"].is_array()) {
        return make_error(Err::InvalidEntry, "entry document is missing fields");
    }
    auto id = SpiffeId::parse(doc["spiffe_id"].get<std::string>());
    if (!id.ok()) return make_error(Err::InvalidEntry, "bad spiffe_id: " + id.error().to_string());
    auto parent = SpiffeId::parse(doc["parent_id"].get<std::string>());
    if (!parent.ok()) {
        return make_error(Err::InvalidEntry, "bad parent_id: " + parent.error().to_string());
    }
    std::vector<std::string> raw_selectors;
    for (const auto& item : doc["selectors"]) {
        if (!item.is_string()) {
            return make_error(Err::InvalidEntry, "selectors must be strings");
        }
        raw_selectors.push_back(item.get<std::string>());
    }
    auto selectors = parse_selector_list(raw_selectors);
    if (!selectors.ok()) return selectors.take_error();

    RegistrationEntry entry{doc.value("entry_id", std::string{}),
                            id.take(),
                            parent.take(),
                            selectors.take(),
                            doc.value("ttl", static_cast<std::int64_t>(3600)),
                            doc.value("node", false)};
    if (auto v = entry.validate(); !v.ok()) return v.take_error();
    return entry;
}

std::vector<RegistrationEntry> match_entries(std::span<const RegistrationEntry> entries,
                                             const SpiffeId& parent, const SelectorSet& observed) {
    std::vector<RegistrationEntry> matched;
    for (const auto& entry : entries) {
        if (entry.parent_id == parent && is_subset(entry.selectors, observed)) {
            matched.push_back(entry);
        }
    }
    std::sort(matched.begin(), matched.end(),
              [](const RegistrationEntry& a, const RegistrationEntry& b) {
                  return a.entry_id < b.entry_id;
              });
    return matched;
}

Result<AttestedIdentity> attest_node(std::span<const RegistrationEntry> entries,
                                     const SpiffeId& server_identity, const SelectorSet& observed,
                                     UnixTime now) {
    std::vector<RegistrationEntry> node_entries;
    for (const auto& entry : entries) {
        if (entry.is_node_entry) node_entries.push_back(entry);
    }
    auto matched = match_entries(node_entries, server_identity, observed);
    if (matched.empty()) {
        return make_error(Err::NoMatch, "no node entry matches the observed selectors");
    }
    if (matched.size() > 1) {
        // Refusing beats picking: an agent must have one unambiguous identity.
        return make_error(Err::AmbiguousMatch, std::to_string(matched.size()) +
                                                   " node entries match the observed selectors");
    }
    return AttestedIdentity{matched.front().spiffe_id, matched.front().entry_id, observed, now};
}

std::vector<AttestedIdentity> attest_workload(std::span<const RegistrationEntry> entries,
                                              const SpiffeId& agent_id,
                                              const SelectorSet& observed, UnixTime now) {
    std::vector<RegistrationEntry> workload_entries;
    for (const auto& entry : entries) {
        if (!entry.is_node_entry) workload_entries.push_back(entry);
    }
    std::vector<AttestedIdentity> out;
    for (const auto& entry : match_entries(workload_entries, agent_id, observed)) {
        out.push_back(AttestedIdentity{entry.spiffe_id, entry.entry_id, observed, now});
    }
    return out;
}

}  // namespace minispiffe
