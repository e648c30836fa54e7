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

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "minispiffe/attestation.hpp"
#include "minispiffe/clock.hpp"
#include "minispiffe/crypto/authority.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/wire.hpp"

namespace minispiffe {

/// Pre-shared node credential standing in for platform attestation: the
/// token resolves to the selectors a real node attestor would observe.
struct JoinCredential {
    std::string token;
    SelectorSet selectors;
};

struct FederationPeerConfig {
    TrustDomain domain;
    std::string endpoint;            // address of the peer's federation port
    crypto::TrustBundle bootstrap;   // first-contact trust, delivered out of band
    std::int64_t refresh_interval_seconds = 300;
};

struct ControlPlaneConfig {
    TrustDomain domain;
    crypto::AuthorityConfig authority;
    std::vector<JoinCredential> join_credentials;
    std::vector<FederationPeerConfig> peers;
    std::string entries_path;  // optional JSONL persistence, loaded at startup
    std::int64_t server_svid_ttl_seconds = 86400;
    double rotation_threshold = 0.5;
};

struct SignRequestItem {
    enum class Kind { X509, Jwt };
    SpiffeId spiffe_id;
    Kind kind = Kind::X509;
    std::vector<std::string> audiences;  // JWT only
    std::optional<std::int64_t> jwt_ttl_seconds;
};

using SignedSvid = std::variant<crypto::X509Svid, crypto::JwtSvid>;
using SignOutcome = Result<SignedSvid>;

struct NodeAttestOutcome {
    crypto::X509Svid agent_svid;
    crypto::TrustBundle bundle;
    // Workload entries parented to the freshly attested agent; the agent
    // matches workloads against this snapshot and refreshes it whenever it
    // re-attests.
    std::vector<RegistrationEntry> agent_entries;
};

/// Trust-domain server: owns the authority and the entry store, admits
/// agents via node attestation, signs SVIDs for entry-authorized requests,
/// publishes its bundle, and maintains federated peer bundles.
///
/// Reads take a shared lock over an immutable snapshot; mutations
/// (registration, rotation, federation refresh) take the exclusive lock.
class ControlPlane final : public wire::Endpoint {
  public:
    static Result<std::unique_ptr<ControlPlane>> create(ControlPlaneConfig config,
                                                        const Clock& clock);

    [[nodiscard]] const TrustDomain& domain() const { return config_.domain; }
    [[nodiscard]] const SpiffeId& server_identity() const { return server_id_; }
    [[nodiscard]] crypto::X509Svid server_svid() const;

    /// Errors: ForeignDomain, DuplicateEntry, InvalidEntry.
    Result<std::string> register_entry(RegistrationEntry entry);
    [[nodiscard]] std::vector<RegistrationEntry> entries() const;

    /// Errors: NoMatch (unknown credential or selectors), AmbiguousMatch.
    Result<NodeAttestOutcome> node_attest(const std::string& join_token, UnixTime now);

    /// Per-item outcomes; an unauthorized item fails alone without failing
    /// the batch. Item errors: NotAuthorizedForId, EmptyAudience,
    /// TtlOutOfRange.
    std::vector<SignOutcome> sign(const SpiffeId& agent,
                                  std::span<const SignRequestItem> requests, UnixTime now);

    /// Serialized own bundle; byte-identical across reads with no state
    /// change.
    [[nodiscard]] std::string serve_bundle() const;
    [[nodiscard]] crypto::TrustBundle bundle() const;
    [[nodiscard]] std::vector<crypto::TrustBundle> federated_bundles() const;
    [[nodiscard]] std::optional<UnixTime> federated_fetched_at(const TrustDomain& peer) const;

    /// Configures (or reconfigures) a federation peering at runtime; the
    /// bootstrap bundle is trusted immediately, exactly as at startup.
    /// Errors: DomainMismatch.
    Result<void> add_federation_peer(FederationPeerConfig peer);

    /// Fetches the peer's bundle over an mTLS channel authenticated against
    /// the currently held peer bundle (bootstrap on first contact) and
    /// stores it unless its sequence regressed.
    /// Errors: PeerUnreachable, TlsAuthFailure, DomainMismatch,
    /// SequenceRegression, MalformedBundle.
    Result<crypto::TrustBundle> refresh_federated_bundle(const TrustDomain& peer, UnixTime now);

    Result<void> rotate_jwt_key(UnixTime now);

    /// Maintenance: drops JWT keys past their overlap window and re-mints
    /// the server SVID past the rotation threshold.
    void tick(UnixTime now);

    void set_dialer(wire::Dialer dialer) { dialer_ = std::move(dialer); }

    /// Own bundle plus all held peer bundles; transports verify inbound
    /// client certificates against this set.
    [[nodiscard]] std::vector<crypto::TrustBundle> verification_bundles() const;

    /// Main API endpoint: node_attest, sign, bundle, register_entry,
    /// list_entries. sign requires an mTLS-authenticated same-domain peer.
    nlohmann::json handle(const nlohmann::json& request, const wire::ConnContext& ctx) override;

    /// Federation endpoint: op "bundle" only, client certificate required.
    [[nodiscard]] wire::Endpoint& federation_endpoint() { return federation_endpoint_; }

    [[nodiscard]] wire::ServerPort api_port();
    [[nodiscard]] wire::ServerPort federation_port();

    [[nodiscard]] const std::vector<FederationPeerConfig>& peers() const { return config_.peers; }

  private:
    class FederationEndpoint final : public wire::Endpoint {
      public:
        explicit FederationEndpoint(ControlPlane& owner) : owner_(owner) {}
        nlohmann::json handle(const nlohmann::json& request,
                              const wire::ConnContext& ctx) override;

      private:
        ControlPlane& owner_;
    };

    struct FederatedState {
        crypto::TrustBundle bundle;
        UnixTime fetched_at = 0;
        bool bootstrap_only = true;
    };

    ControlPlane(ControlPlaneConfig config, crypto::Authority authority,
                 crypto::X509Svid server_svid, const Clock& clock);

    Result<std::string> register_entry_locked(RegistrationEntry entry, bool persist);
    SignOutcome sign_one_locked(const SpiffeId& agent, const SignRequestItem& item, UnixTime now);
    [[nodiscard]] std::string duplicate_key(const RegistrationEntry& entry) const;

    ControlPlaneConfig config_;
    crypto::Authority authority_;
    SpiffeId server_id_;
    crypto::X509Svid server_svid_;
    UnixTime server_svid_minted_at_;
    const Clock& clock_;
    FederationEndpoint federation_endpoint_;
    wire::Dialer dialer_;

    mutable std::shared_mutex mu_;
    std::vector<RegistrationEntry> entries_;
    std::set<std::string> entry_keys_;
    std::set<std::string> entry_ids_;
    std::uint64_t next_entry_number_ = 1;
    std::map<TrustDomain, FederatedState> federated_;
};

}  // namespace minispiffe
