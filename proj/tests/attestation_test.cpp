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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_util.hpp"

namespace minispiffe {
namespace {

using testing::entry;
using testing::Gen;
using testing::id;
using testing::sels;

// O(n*m) subset scan, written independently of match_entries.
std::vector<std::string> naive_match_ids(const std::vector<RegistrationEntry>& entries,
                                         const SpiffeId& parent, const SelectorSet& observed) {
    std::vector<std::string> out;
    for (const auto& e : entries) {
        if (!(e.parent_id == parent)) continue;
        bool all_found = true;
        for (const auto& required : e.selectors) {
            bool found = false;
            for (const auto& have : observed) {
                if (have.type == required.type && have.value == required.value) found = true;
            }
            if (!found) all_found = false;
        }
        if (all_found) out.push_back(e.entry_id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> ids_of(const std::vector<RegistrationEntry>& matched) {
    std::vector<std::string> out;
    for (const auto& e : matched) out.push_back(e.entry_id);
    return out;
}

RegistrationEntry build_runner_entry() {
    return entry("e-build-runner", "spiffe://org.example/frontend/build-runner",
                 "spiffe://org.example/spire/agent/k8s-node", {"k8s_sa:build"}, 3600);
}

TEST(MatchEntries, BuildRunnerMatches) {
    std::vector<RegistrationEntry> entries{build_runner_entry()};
    auto matched = match_entries(entries, id("spiffe://org.example/spire/agent/k8s-node"),
                                 sels({"k8s_sa:build", "ns:ci"}));
    ASSERT_EQ(matched.size(), 1u);
    EXPECT_EQ(matched[0].spiffe_id.canonical(), "spiffe://org.example/frontend/build-runner");
}

TEST(MatchEntries, SubsetFailureDoesNotMatch) {
    std::vector<RegistrationEntry> entries{build_runner_entry()};
    auto matched = match_entries(entries, id("spiffe://org.example/spire/agent/k8s-node"),
                                 sels({"k8s_sa:deploy"}));
    EXPECT_TRUE(matched.empty());
}

TEST(MatchEntries, ParentIsolation) {
    std::vector<RegistrationEntry> entries{build_runner_entry()};
    auto matched = match_entries(entries, id("spiffe://org.example/spire/agent/other-node"),
                                 sels({"k8s_sa:build", "ns:ci"}));
    EXPECT_TRUE(matched.empty());
}

std::vector<RegistrationEntry> random_entries(Gen& gen, const std::vector<SpiffeId>& parents) {
    static const std::vector<std::string> kTypes = {"k8s_sa", "env", "unix_path", "sim"};
    std::vector<RegistrationEntry> out;
    int n = gen.range(0, 12);
    for (int i = 0; i < n; ++i) {
        SelectorSet selector_set;
        int selector_count = gen.range(1, 4);
        for (int s = 0; s < selector_count; ++s) {
            selector_set.insert(
                Selector{kTypes[gen.range(0, 3)], "v" + std::to_string(gen.range(0, 5))});
        }
        const SpiffeId& parent = parents[gen.range(0, static_cast<int>(parents.size()) - 1)];
        auto spiffe = SpiffeId::make(parent.trust_domain(), {"w", std::to_string(i)});
        out.push_back(RegistrationEntry{"e" + std::to_string(i), spiffe.take(), parent,
                                        std::move(selector_set), 3600, false});
    }
    return out;
}

SelectorSet random_observed(Gen& gen) {
    static const std::vector<std::string> kTypes = {"k8s_sa", "env", "unix_path", "sim"};
    SelectorSet out;
    int n = gen.range(0, 8);
    for (int i = 0; i < n; ++i) {
        out.insert(Selector{kTypes[gen.range(0, 3)], "v" + std::to_string(gen.range(0, 5))});
    }
    return out;
}

TEST(MatchEntries, AgreesWithNaiveSubsetScan) {
    Gen gen(99);
    std::vector<SpiffeId> parents = {id("spiffe://d.example/agent/a"),
                                     id("spiffe://d.example/agent/b")};
    for (int i = 0; i < 3000; ++i) {
        auto entries = random_entries(gen, parents);
        auto observed = random_observed(gen);
        const SpiffeId& parent = parents[gen.range(0, 1)];
        EXPECT_EQ(ids_of(match_entries(entries, parent, observed)),
                  naive_match_ids(entries, parent, observed));
    }
}

TEST(MatchEntries, MonotoneInObservedSelectors) {
    Gen gen(123);
    std::vector<SpiffeId> parents = {id("spiffe://d.example/agent/a")};
    for (int i = 0; i < 1000; ++i) {
        auto entries = random_entries(gen, parents);
        auto observed = random_observed(gen);
        auto base = ids_of(match_entries(entries, parents[0], observed));

        SelectorSet grown = observed;
        grown.insert(Selector{"extra", "x" + std::to_string(i)});
        auto grown_ids = ids_of(match_entries(entries, parents[0], grown));
        EXPECT_TRUE(std::includes(grown_ids.begin(), grown_ids.end(), base.begin(), base.end()));

        if (!observed.empty()) {
            SelectorSet shrunk = observed;
            shrunk.erase(shrunk.begin());
            auto shrunk_ids = ids_of(match_entries(entries, parents[0], shrunk));
            EXPECT_TRUE(
                std::includes(base.begin(), base.end(), shrunk_ids.begin(), shrunk_ids.end()));
        }
    }
}

TEST(MatchEntries, OrderIndependent) {
    Gen gen(5);
    std::vector<SpiffeId> parents = {id("spiffe://d.example/agent/a")};
    for (int i = 0; i < 200; ++i) {
        auto entries = random_entries(gen, parents);
        auto observed = random_observed(gen);
        auto expected = ids_of(match_entries(entries, parents[0], observed));
        std::shuffle(entries.begin(), entries.end(), gen.rng());
        EXPECT_EQ(ids_of(match_entries(entries, parents[0], observed)), expected);
    }
}

TEST(AttestNode, ExactMatchIssuesAgentIdentity) {
    std::vector<RegistrationEntry> entries{
        entry("n1", "spiffe://org.example/spire/agent/k8s-node", "spiffe://org.example",
              {"node_uuid:n-1"}, 3600, true)};
    auto attested = attest_node(entries, id("spiffe://org.example"), sels({"node_uuid:n-1"}), 10);
    ASSERT_TRUE(attested.ok());
    EXPECT_EQ(attested.value().spiffe_id.canonical(), "spiffe://org.example/spire/agent/k8s-node");
    EXPECT_EQ(attested.value().matched_entry_id, "n1");
    EXPECT_EQ(attested.value().attested_at, 10);
}

TEST(AttestNode, EmptyObservedIsNoMatch) {
    std::vector<RegistrationEntry> entries{
        entry("n1", "spiffe://org.example/spire/agent/k8s-node", "spiffe://org.example",
              {"node_uuid:n-1"}, 3600, true)};
    auto attested = attest_node(entries, id("spiffe://org.example"), {}, 10);
    ASSERT_FALSE(attested.ok());
    EXPECT_EQ(attested.code(), Err::NoMatch);
}

TEST(AttestNode, OverlappingEntriesAreAmbiguous) {
    std::vector<RegistrationEntry> entries{
        entry("n1", "spiffe://org.example/agent/one", "spiffe://org.example", {"node_uuid:n-1"},
              3600, true),
        entry("n2", "spiffe://org.example/agent/two", "spiffe://org.example", {"env:ZONE=a"},
              3600, true)};
    auto observed = sels({"node_uuid:n-1", "env:ZONE=a"});
    // Oracle: count subset matches directly.
    int matching = 0;
    for (const auto& e : entries) {
        if (std::includes(observed.begin(), observed.end(), e.selectors.begin(),
                          e.selectors.end())) {
            ++matching;
        }
    }
    ASSERT_EQ(matching, 2);
    auto attested = attest_node(entries, id("spiffe://org.example"), observed, 10);
    ASSERT_FALSE(attested.ok());
    EXPECT_EQ(attested.code(), Err::AmbiguousMatch);
}

TEST(AttestNode, IgnoresWorkloadEntries) {
    std::vector<RegistrationEntry> entries{
        entry("w1", "spiffe://org.example/w", "spiffe://org.example", {"node_uuid:n-1"}, 3600,
              false)};
    auto attested = attest_node(entries, id("spiffe://org.example"), sels({"node_uuid:n-1"}), 10);
    ASSERT_FALSE(attested.ok());
    EXPECT_EQ(attested.code(), Err::NoMatch);
}

TEST(AttestWorkload, BuildRunnerUnderK8sNodeAgent) {
    std::vector<RegistrationEntry> entries{build_runner_entry()};
    auto identities = attest_workload(entries, id("spiffe://org.example/spire/agent/k8s-node"),
                                      sels({"k8s_sa:build"}), 11);
    ASSERT_EQ(identities.size(), 1u);
    EXPECT_EQ(identities[0].spiffe_id.canonical(), "spiffe://org.example/frontend/build-runner");
}

TEST(AttestWorkload, MultipleIdentitiesInEntryIdOrder) {
    std::vector<RegistrationEntry> entries{
        entry("e2", "spiffe://org.example/second", "spiffe://org.example/agent", {"env:A=1"}),
        entry("e1", "spiffe://org.example/first", "spiffe://org.example/agent", {"k8s_sa:x"})};
    auto identities = attest_workload(entries, id("spiffe://org.example/agent"),
                                      sels({"env:A=1", "k8s_sa:x", "extra:y"}), 0);
    ASSERT_EQ(identities.size(), 2u);
    EXPECT_EQ(identities[0].matched_entry_id, "e1");
    EXPECT_EQ(identities[1].matched_entry_id, "e2");
}

TEST(AttestWorkload, UnknownSelectorsDeny) {
    std::vector<RegistrationEntry> entries{build_runner_entry()};
    auto identities = attest_workload(entries, id("spiffe://org.example/spire/agent/k8s-node"),
                                      sels({"mystery:zzz"}), 0);
    EXPECT_TRUE(identities.empty());
}

TEST(Selectors, ParseAndFormat) {
    auto selector = Selector::parse("k8s_sa:build");
    ASSERT_TRUE(selector.ok());
    EXPECT_EQ(selector.value().type, "k8s_sa");
    EXPECT_EQ(selector.value().value, "build");
    EXPECT_EQ(selector.value().to_string(), "k8s_sa:build");

    // Values may themselves contain colons and '=' pairs.
    auto env = Selector::parse("env:JOB=build:extra");
    ASSERT_TRUE(env.ok());
    EXPECT_EQ(env.value().value, "JOB=build:extra");

    EXPECT_EQ(Selector::parse("novalue").code(), Err::InvalidEntry);
    EXPECT_EQ(Selector::parse(":v").code(), Err::InvalidEntry);
    EXPECT_EQ(Selector::parse("BadType:v").code(), Err::InvalidEntry);
}

TEST(RegistrationEntries, ValidationRules) {
    auto no_selectors = entry("e", "spiffe://a/x", "spiffe://a/agent", {"k:v"});
    no_selectors.selectors.clear();
    EXPECT_EQ(no_selectors.validate().code(), Err::InvalidEntry);

    auto bad_ttl = entry("e", "spiffe://a/x", "spiffe://a/agent", {"k:v"}, 0);
    EXPECT_EQ(bad_ttl.validate().code(), Err::InvalidEntry);

    auto cross_domain = entry("e", "spiffe://a/x", "spiffe://b/agent", {"k:v"});
    EXPECT_EQ(cross_domain.validate().code(), Err::InvalidEntry);
}

TEST(RegistrationEntries, JsonRoundTrip) {
    auto original = entry("e-1", "spiffe://org.example/frontend/build-runner",
                          "spiffe://org.example/spire/agent/k8s-node", {"k8s_sa:build", "ns:ci"},
                          3600, false);
    auto parsed = RegistrationEntry::from_json(original.to_json());
    ASSERT_TRUE(parsed.ok());
    EXPECT_EQ(parsed.value().entry_id, original.entry_id);
    EXPECT_EQ(parsed.value().spiffe_id, original.spiffe_id);
    EXPECT_EQ(parsed.value().parent_id, original.parent_id);
    EXPECT_EQ(parsed.value().selectors, original.selectors);
    EXPECT_EQ(parsed.value().ttl_seconds, original.ttl_seconds);
    EXPECT_EQ(parsed.value().is_node_entry, original.is_node_entry);
}

}  // namespace
}  // namespace minispiffe
