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

#include "minispiffe/control_plane.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "harness.hpp"
#include "minispiffe/crypto/jwt.hpp"

namespace minispiffe {
namespace {

using nlohmann::json;
using testing::entry;
using testing::Harness;
using testing::id;
using testing::join_credential;
using testing::kEpoch;

RegistrationEntry appendix_entry() {
    return entry("", "spiffe://org.example/frontend/build-runner",
                 "spiffe://org.example/spire/agent/k8s-node", {"k8s_sa:build"}, 3600);
}

RegistrationEntry node_entry(const std::string& domain = "org.example") {
    return entry("", "spiffe://" + domain + "/spire/agent/k8s-node", "spiffe://" + domain,
                 {"node_uuid:n-1"}, 3600, true);
}

TEST(RegisterEntry, AcceptedAndRetrievable) {
    Harness harness;
    auto& plane = harness.make_plane("org.example");
    auto entry_id = plane.register_entry(appendix_entry());
    ASSERT_TRUE(entry_id.ok());
    EXPECT_FALSE(entry_id.value().empty());

    auto stored = plane.entries();
    ASSERT_EQ(stored.size(), 1u);
    EXPECT_EQ(stored[0].spiffe_id.canonical(), "spiffe://org.example/frontend/build-runner");
    EXPECT_EQ(stored[0].ttl_seconds, 3600);
}

TEST(RegisterEntry, DuplicateRejected) {
    Harness harness;
    auto& plane = harness.make_plane("org.example");
    ASSERT_TRUE(plane.register_entry(appendix_entry()).ok());
    auto duplicate = plane.register_entry(appendix_entry());
    ASSERT_FALSE(duplicate.ok());
    EXPECT_EQ(duplicate.code(), Err::DuplicateEntry);
}

TEST(RegisterEntry, ForeignDomainRejected) {
    Harness harness;
    auto& plane = harness.make_plane("org.example");
    auto foreign = plane.register_entry(
        entry("", "spiffe://ci/org/deploy", "spiffe://ci/agent", {"k8s_sa:x"}));
    ASSERT_FALSE(foreign.ok());
    EXPECT_EQ(foreign.code(), Err::ForeignDomain);
}

TEST(RegisterEntry, NodeEntriesMustBeParentedToServerIdentity) {
    Harness harness;
    auto& plane = harness.make_plane("org.example");
    auto bad = plane.register_entry(entry("", "spiffe://org.example/agent/x",
                                          "spiffe://org.example/other-parent", {"node_uuid:1"},
                                          3600, true));
    ASSERT_FALSE(bad.ok());
    EXPECT_EQ(bad.code(), Err::InvalidEntry);
}

TEST(RegisterEntry, PersistedAcrossRestart) {
    std::string path = ::testing::TempDir() + "minispiffe_entries_test.jsonl";
    std::filesystem::remove(path);

    Harness harness;
    ControlPlaneConfig config;
    config.domain = testing::td("org.example");
    config.entries_path = path;
    {
        auto& plane = harness.make_plane(config);
        ASSERT_TRUE(plane.register_entry(appendix_entry()).ok());
        ASSERT_TRUE(plane.register_entry(node_entry()).ok());
    }
    auto reloaded = ControlPlane::create(config, harness.clock);
    ASSERT_TRUE(reloaded.ok());
    EXPECT_EQ(reloaded.value()->entries().size(), 2u);
    auto duplicate = reloaded.value()->register_entry(appendix_entry());
    EXPECT_EQ(duplicate.code(), Err::DuplicateEntry);
    std::filesystem::remove(path);
}

TEST(NodeAttest, IssuesAgentSvidWithBundleAndEntries) {
    Harness harness;
    auto& plane =
        harness.make_plane("org.example", {join_credential("tok-1", {"node_uuid:n-1"})});
    ASSERT_TRUE(plane.register_entry(node_entry()).ok());
    ASSERT_TRUE(plane.register_entry(appendix_entry()).ok());

    auto outcome = plane.node_attest("tok-1", kEpoch);
    ASSERT_TRUE(outcome.ok());
    EXPECT_EQ(outcome.value().agent_svid.id.canonical(),
              "spiffe://org.example/spire/agent/k8s-node");
    EXPECT_EQ(outcome.value().agent_svid.not_after - kEpoch, 3600);  // entry TTL

    auto info = crypto::inspect_certificate(outcome.value().agent_svid.leaf_der).take();
    ASSERT_EQ(info.uri_sans.size(), 1u);
    EXPECT_EQ(info.uri_sans[0], "spiffe://org.example/spire/agent/k8s-node");

    EXPECT_EQ(outcome.value().bundle, plane.bundle());
    ASSERT_EQ(outcome.value().agent_entries.size(), 1u);
    EXPECT_EQ(outcome.value().agent_entries[0].spiffe_id.canonical(),
              "spiffe://org.example/frontend/build-runner");
}

TEST(NodeAttest, UnknownCredentialIsNoMatch) {
    Harness harness;
    auto& plane =
        harness.make_plane("org.example", {join_credential("tok-1", {"node_uuid:n-1"})});
    ASSERT_TRUE(plane.register_entry(node_entry()).ok());
    EXPECT_EQ(plane.node_attest("wrong", kEpoch).code(), Err::NoMatch);
}

TEST(NodeAttest, SelectorsWithoutEntryIsNoMatch) {
    Harness harness;
    auto& plane =
        harness.make_plane("org.example", {join_credential("tok-1", {"node_uuid:other"})});
    ASSERT_TRUE(plane.register_entry(node_entry()).ok());
    EXPECT_EQ(plane.node_attest("tok-1", kEpoch).code(), Err::NoMatch);
}

TEST(NodeAttest, OverlapIsAmbiguous) {
    Harness harness;
    auto& plane = harness.make_plane(
        "org.example", {join_credential("tok-1", {"node_uuid:n-1", "env:ZONE=a"})});
    ASSERT_TRUE(plane.register_entry(node_entry()).ok());
    ASSERT_TRUE(plane.register_entry(entry("", "spiffe://org.example/agent/two",
                                           "spiffe://org.example", {"env:ZONE=a"}, 3600, true))
                    .ok());
    EXPECT_EQ(plane.node_attest("tok-1", kEpoch).code(), Err::AmbiguousMatch);
}

TEST(NodeAttest, WireLevelErrorsAndFidelity) {
    Harness harness;
    auto& plane =
        harness.make_plane("org.example", {join_credential("tok-1", {"node_uuid:n-1"})});
    ASSERT_TRUE(plane.register_entry(node_entry()).ok());

    wire::ConnContext anonymous;
    auto denied = plane.handle({{"op", "node_attest"}, {"join_token", "bad"}}, anonymous);
    EXPECT_FALSE(denied["ok"].get<bool>());
    EXPECT_EQ(denied["error"]["code"], "NoMatch");

    auto granted = plane.handle({{"op", "node_attest"}, {"join_token", "tok-1"}}, anonymous);
    ASSERT_TRUE(granted["ok"].get<bool>());
    EXPECT_EQ(granted["result"]["svid"]["spiffe_id"], "spiffe://org.example/spire/agent/k8s-node");
    // Response bundle equals the served bundle document.
    EXPECT_EQ(granted["result"]["bundle"].dump(), plane.serve_bundle());
}

// ---------------------------------------------------------------------------
// Signing

struct SignFixture {
    Harness harness;
    ControlPlane* plane = nullptr;
    SpiffeId agent_id = testing::id("spiffe://org.example/spire/agent/k8s-node");

    SignFixture() {
        plane = &harness.make_plane("org.example",
                                    {join_credential("tok-1", {"node_uuid:n-1"})});
        EXPECT_TRUE(plane->register_entry(node_entry()).ok());
        EXPECT_TRUE(plane->register_entry(appendix_entry()).ok());
        EXPECT_TRUE(plane
                        ->register_entry(entry("", "spiffe://org.example/other-team/job",
                                               "spiffe://org.example/spire/agent/other-node",
                                               {"k8s_sa:other"}))
                        .ok());
    }
};

TEST(SignRequests, AuthorizedIdIsMinted) {
    SignFixture fixture;
    SignRequestItem item{id("spiffe://org.example/frontend/build-runner"),
                         SignRequestItem::Kind::X509,
                         {},
                         std::nullopt};
    auto outcomes = fixture.plane->sign(fixture.agent_id, {{item}}, kEpoch);
    ASSERT_EQ(outcomes.size(), 1u);
    ASSERT_TRUE(outcomes[0].ok());
    const auto& svid = std::get<crypto::X509Svid>(outcomes[0].value());
    EXPECT_EQ(svid.id.canonical(), "spiffe://org.example/frontend/build-runner");
    EXPECT_EQ(svid.not_after - kEpoch, 3600);
    EXPECT_TRUE(
        crypto::verify_x509_svid(svid.leaf_der, svid.chain_der, fixture.plane->bundle(), kEpoch)
            .ok());
}

TEST(SignRequests, ParentIsolationRefused) {
    SignFixture fixture;
    SignRequestItem item{id("spiffe://org.example/other-team/job"),
                         SignRequestItem::Kind::X509,
                         {},
                         std::nullopt};
    auto outcomes = fixture.plane->sign(fixture.agent_id, {{item}}, kEpoch);
    ASSERT_EQ(outcomes.size(), 1u);
    ASSERT_FALSE(outcomes[0].ok());
    EXPECT_EQ(outcomes[0].code(), Err::NotAuthorizedForId);
}

TEST(SignRequests, MixedBatchMatchesSingleRequestOracle) {
    SignFixture fixture;
    std::vector<SignRequestItem> batch = {
        {id("spiffe://org.example/frontend/build-runner"), SignRequestItem::Kind::X509, {},
         std::nullopt},
        {id("spiffe://org.example/other-team/job"), SignRequestItem::Kind::X509, {},
         std::nullopt}};
    auto batched = fixture.plane->sign(fixture.agent_id, batch, kEpoch);

    // Oracle: apply the single-request path per item and compare shape.
    auto single_good = fixture.plane->sign(fixture.agent_id, {{batch[0]}}, kEpoch);
    auto single_bad = fixture.plane->sign(fixture.agent_id, {{batch[1]}}, kEpoch);

    ASSERT_EQ(batched.size(), 2u);
    EXPECT_EQ(batched[0].ok(), single_good[0].ok());
    EXPECT_TRUE(batched[0].ok());
    EXPECT_EQ(batched[1].ok(), single_bad[0].ok());
    ASSERT_FALSE(batched[1].ok());
    EXPECT_EQ(batched[1].code(), single_bad[0].code());
}

TEST(SignRequests, JwtKindMintsVerifiableToken) {
    SignFixture fixture;
    SignRequestItem item{id("spiffe://org.example/frontend/build-runner"),
                         SignRequestItem::Kind::Jwt,
                         {"sts.amazonaws.com"},
                         std::nullopt};
    auto outcomes = fixture.plane->sign(fixture.agent_id, {{item}}, kEpoch);
    ASSERT_EQ(outcomes.size(), 1u);
    ASSERT_TRUE(outcomes[0].ok());
    const auto& svid = std::get<crypto::JwtSvid>(outcomes[0].value());
    EXPECT_EQ(svid.expires_at - svid.issued_at, 300);  // default JWT TTL
    EXPECT_TRUE(crypto::verify_jwt_svid(svid.token, fixture.plane->bundle(), "sts.amazonaws.com",
                                        kEpoch)
                    .ok());
}

TEST(SignRequests, WireRequiresAuthenticatedSameDomainAgent) {
    SignFixture fixture;
    json request = {{"op", "sign"},
                    {"requests", json::array({{{"spiffe_id",
                                                "spiffe://org.example/frontend/build-runner"},
                                               {"kind", "x509"}}})}};
    wire::ConnContext anonymous;
    auto denied = fixture.plane->handle(request, anonymous);
    EXPECT_FALSE(denied["ok"].get<bool>());
    EXPECT_EQ(denied["error"]["code"], "UnknownAgent");

    wire::ConnContext foreign;
    foreign.peer_id = id("spiffe://elsewhere/agent");
    auto refused = fixture.plane->handle(request, foreign);
    EXPECT_FALSE(refused["ok"].get<bool>());
    EXPECT_EQ(refused["error"]["code"], "UnknownAgent");

    wire::ConnContext agent;
    agent.peer_id = fixture.agent_id;
    auto granted = fixture.plane->handle(request, agent);
    ASSERT_TRUE(granted["ok"].get<bool>());
    ASSERT_TRUE(granted["result"]["results"][0]["ok"].get<bool>());
}

// End-to-end adversarial check on the wire surface: no call sequence hands
// an agent an SVID parented to a different agent.
TEST(SignRequests, ParentIsolationOverTheWire) {
    SignFixture fixture;
    wire::ConnContext agent;
    agent.peer_id = fixture.agent_id;
    json request = {{"op", "sign"},
                    {"requests",
                     json::array({{{"spiffe_id", "spiffe://org.example/other-team/job"},
                                   {"kind", "x509"}},
                                  {{"spiffe_id", "spiffe://org.example"}, {"kind", "x509"}},
                                  {{"spiffe_id", "spiffe://org.example/spire/agent/k8s-node"},
                                   {"kind", "x509"}}})}};
    auto response = fixture.plane->handle(request, agent);
    ASSERT_TRUE(response["ok"].get<bool>());
    for (const auto& item : response["result"]["results"]) {
        EXPECT_FALSE(item["ok"].get<bool>());
        EXPECT_EQ(item["error"]["code"], "NotAuthorizedForId");
    }
}

// ---------------------------------------------------------------------------
// Bundles and rotation

TEST(ServeBundle, DeterministicAndSequenced) {
    Harness harness;
    auto& plane = harness.make_plane("org.example");
    auto first = plane.serve_bundle();
    auto second = plane.serve_bundle();
    EXPECT_EQ(first, second);

    auto parsed = crypto::deserialize_bundle(first).take();
    EXPECT_EQ(parsed, plane.bundle());

    std::int64_t sequence_before = parsed.sequence;
    ASSERT_TRUE(plane.rotate_jwt_key(kEpoch).ok());
    auto rotated = crypto::deserialize_bundle(plane.serve_bundle()).take();
    EXPECT_GT(rotated.sequence, sequence_before);
}

TEST(JwtRotation, OverlapWindowThenUnknownKid) {
    Harness harness;
    auto& plane = harness.make_plane("org.example");

    // Mint a token at T via an entry, rotate at T+10, tick after overlap.
    ASSERT_TRUE(plane.register_entry(node_entry()).ok());
    ASSERT_TRUE(plane.register_entry(appendix_entry()).ok());
    SignRequestItem item{id("spiffe://org.example/frontend/build-runner"),
                         SignRequestItem::Kind::Jwt,
                         {"aud"},
                         std::nullopt};
    auto outcomes =
        plane.sign(id("spiffe://org.example/spire/agent/k8s-node"), {{item}}, kEpoch);
    ASSERT_TRUE(outcomes[0].ok());
    std::string token = std::get<crypto::JwtSvid>(outcomes[0].value()).token;

    ASSERT_TRUE(plane.rotate_jwt_key(kEpoch + 10).ok());
    EXPECT_TRUE(crypto::verify_jwt_svid(token, plane.bundle(), "aud", kEpoch + 60).ok());

    // Overlap default: 2 x max JWT TTL = 7200s from rotation.
    plane.tick(kEpoch + 10 + 7200);
    auto after = crypto::verify_jwt_svid(token, plane.bundle(), "aud", kEpoch + 60);
    ASSERT_FALSE(after.ok());
    EXPECT_EQ(after.code(), Err::UnknownKid);
}

// ---------------------------------------------------------------------------
// Federation

struct FederationFixture {
    Harness harness;
    ControlPlane* a = nullptr;
    ControlPlane* b = nullptr;

    FederationFixture() {
        // Build both planes first (their bundles bootstrap each other).
        auto plane_a = ControlPlane::create(
            ControlPlaneConfig{testing::td("a.example"), {}, {}, {}, "", 86400, 0.5},
            harness.clock);
        auto plane_b = ControlPlane::create(
            ControlPlaneConfig{testing::td("b.example"), {}, {}, {}, "", 86400, 0.5},
            harness.clock);
        // Recreate with peering configured, reusing the fresh bundles as
        // bootstrap material.
        ControlPlaneConfig config_a{testing::td("a.example"),
                                    {},
                                    {},
                                    {FederationPeerConfig{testing::td("b.example"),
                                                          testing::federation_address("b.example"),
                                                          plane_b.value()->bundle(), 300}},
                                    "",
                                    86400,
                                    0.5};
        ControlPlaneConfig config_b{testing::td("b.example"),
                                    {},
                                    {},
                                    {FederationPeerConfig{testing::td("a.example"),
                                                          testing::federation_address("a.example"),
                                                          plane_a.value()->bundle(), 300}},
                                    "",
                                    86400,
                                    0.5};
        // The original planes are discarded; new ones own the domains.
        a = &harness.make_plane(std::move(config_a));
        b = &harness.make_plane(std::move(config_b));
    }
};

TEST(Federation, BootstrapMismatchRejectedAtCreate) {
    Harness harness;
    auto& other = harness.make_plane("other.example");
    ControlPlaneConfig config;
    config.domain = testing::td("a.example");
    config.peers = {FederationPeerConfig{testing::td("b.example"), "x", other.bundle(), 300}};
    auto plane = ControlPlane::create(std::move(config), harness.clock);
    ASSERT_FALSE(plane.ok());
    EXPECT_EQ(plane.code(), Err::DomainMismatch);
}

TEST(Federation, RefreshStoresPeerBundle) {
    FederationFixture fixture;
    // The bootstrap in the fixture belongs to discarded planes, so the first
    // refresh must fail TLS verification against the stale bootstrap.
    auto stale = fixture.a->refresh_federated_bundle(testing::td("b.example"), kEpoch + 5);
    ASSERT_FALSE(stale.ok());
    EXPECT_EQ(stale.code(), Err::TlsAuthFailure);
}

struct LiveFederationFixture {
    Harness harness;
    ControlPlane* a = nullptr;
    ControlPlane* b = nullptr;

    LiveFederationFixture() {
        a = &harness.make_plane("a.example");
        b = &harness.make_plane("b.example");
        a->add_federation_peer(FederationPeerConfig{
            testing::td("b.example"), testing::federation_address("b.example"), b->bundle(), 300});
        b->add_federation_peer(FederationPeerConfig{
            testing::td("a.example"), testing::federation_address("a.example"), a->bundle(), 300});
    }
};

TEST(Federation, MutualExchangeEnablesCrossDomainVerification) {
    LiveFederationFixture fixture;
    auto& a = *fixture.a;
    auto& b = *fixture.b;

    auto refreshed = a.refresh_federated_bundle(testing::td("b.example"), kEpoch + 5);
    ASSERT_TRUE(refreshed.ok()) << refreshed.error().to_string();
    EXPECT_EQ(refreshed.value().trust_domain.name(), "b.example");
    EXPECT_EQ(a.federated_fetched_at(testing::td("b.example")), kEpoch + 5);

    ASSERT_TRUE(b.refresh_federated_bundle(testing::td("a.example"), kEpoch + 6).ok());

    auto b_svid = b.server_svid();
    auto a_held = a.federated_bundles();
    auto verified = crypto::verify_x509_svid_any(b_svid.leaf_der, b_svid.chain_der, a_held,
                                                 kEpoch + 10);
    ASSERT_TRUE(verified.ok());
    EXPECT_EQ(verified.value().canonical(), "spiffe://b.example");
}

TEST(Federation, SequenceRegressionRefused) {
    LiveFederationFixture fixture;
    auto& a = *fixture.a;
    auto& b = *fixture.b;

    // Advance B's sequence and sync A to it.
    ASSERT_TRUE(b.rotate_jwt_key(kEpoch).ok());
    ASSERT_TRUE(b.rotate_jwt_key(kEpoch + 1).ok());
    auto held = a.refresh_federated_bundle(testing::td("b.example"), kEpoch + 2);
    ASSERT_TRUE(held.ok());
    std::int64_t held_sequence = held.value().sequence;
    ASSERT_GT(held_sequence, 1);

    // Replay endpoint: presents B's real identity but serves a stale bundle.
    crypto::TrustBundle stale = b.bundle();
    stale.sequence = 1;
    class ReplayEndpoint final : public wire::Endpoint {
      public:
        explicit ReplayEndpoint(crypto::TrustBundle bundle) : bundle_(std::move(bundle)) {}
        json handle(const json&, const wire::ConnContext&) override {
            return wire::ok_response({{"bundle", crypto::bundle_to_json(bundle_)}});
        }

      private:
        crypto::TrustBundle bundle_;
    };
    ReplayEndpoint replay(stale);
    auto b_svid = b.server_svid();
    wire::ServerPort replay_port;
    replay_port.endpoint = &replay;
    replay_port.identity = &b_svid;
    replay_port.require_client_cert = false;
    fixture.harness.network.bind(testing::federation_address("b.example"), replay_port);

    auto regressed = a.refresh_federated_bundle(testing::td("b.example"), kEpoch + 3);
    ASSERT_FALSE(regressed.ok());
    EXPECT_EQ(regressed.code(), Err::SequenceRegression);

    // Held bundle unchanged.
    bool found = false;
    for (const auto& bundle : a.federated_bundles()) {
        if (bundle.trust_domain.name() == "b.example") {
            EXPECT_EQ(bundle.sequence, held_sequence);
            found = true;
        }
    }
    EXPECT_TRUE(found);
}

TEST(Federation, DomainMismatchRefused) {
    LiveFederationFixture fixture;
    auto& a = *fixture.a;
    auto& c = fixture.harness.make_plane("c.example");

    // Rebind B's federation address to C's endpoint while presenting a
    // certificate A cannot chain: TLS fails first.
    fixture.harness.network.bind(testing::federation_address("b.example"), c.federation_port());
    auto hijacked = a.refresh_federated_bundle(testing::td("b.example"), kEpoch + 3);
    ASSERT_FALSE(hijacked.ok());
    EXPECT_EQ(hijacked.code(), Err::TlsAuthFailure);

    // A served bundle naming the wrong domain behind B's real identity.
    auto& b = *fixture.b;
    class WrongDomainEndpoint final : public wire::Endpoint {
      public:
        explicit WrongDomainEndpoint(crypto::TrustBundle bundle) : bundle_(std::move(bundle)) {}
        json handle(const json&, const wire::ConnContext&) override {
            return wire::ok_response({{"bundle", crypto::bundle_to_json(bundle_)}});
        }

      private:
        crypto::TrustBundle bundle_;
    };
    WrongDomainEndpoint wrong(c.bundle());
    auto b_svid = b.server_svid();
    wire::ServerPort wrong_port;
    wrong_port.endpoint = &wrong;
    wrong_port.identity = &b_svid;
    fixture.harness.network.bind(testing::federation_address("b.example"), wrong_port);
    auto mismatched = a.refresh_federated_bundle(testing::td("b.example"), kEpoch + 4);
    ASSERT_FALSE(mismatched.ok());
    EXPECT_EQ(mismatched.code(), Err::DomainMismatch);
}

TEST(Federation, UnreachablePeer) {
    LiveFederationFixture fixture;
    fixture.harness.network.unbind(testing::federation_address("b.example"));
    auto unreachable =
        fixture.a->refresh_federated_bundle(testing::td("b.example"), kEpoch + 3);
    ASSERT_FALSE(unreachable.ok());
    EXPECT_EQ(unreachable.code(), Err::PeerUnreachable);
}

TEST(Federation, EndpointRequiresClientCertificate) {
    LiveFederationFixture fixture;
    wire::DialOptions options;
    options.now = kEpoch;
    options.verify_server = false;
    auto connection =
        fixture.harness.network.dialer()(testing::federation_address("b.example"), options);
    ASSERT_FALSE(connection.ok());
    EXPECT_EQ(connection.code(), Err::TlsAuthFailure);
}

}  // namespace
}  // namespace minispiffe
