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
#include <string>
#include <vector>

#include "minispiffe/attestation.hpp"
#include "minispiffe/clock.hpp"
#include "minispiffe/control_plane.hpp"
#include "minispiffe/crypto/jwt.hpp"
#include "minispiffe/crypto/x509.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/wire.hpp"

namespace minispiffe {

/// Platform facts about one workload, held agent-side and read by the
/// selector plugins. The workload itself never supplies any of this.
struct WorkloadMetadata {
    std::map<std::string, std::string> environment;
    std::optional<std::string> launch_path;
    std::map<std::string, std::string> sim;

    static Result<WorkloadMetadata> from_json(const nlohmann::json& doc);
};

/// Resolves selectors for a workload from agent-held platform metadata.
class SelectorPlugin {
  public:
    virtual ~SelectorPlugin() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual SelectorSet resolve(const WorkloadMetadata& metadata) const = 0;
};

/// "env:KEY=VALUE" per environment pair.
class EnvSelectorPlugin final : public SelectorPlugin {
  public:
    [[nodiscard]] std::string name() const override { return "env"; }
    [[nodiscard]] SelectorSet resolve(const WorkloadMetadata& metadata) const override;
};

/// "unix_path:<launch path>".
class UnixPathSelectorPlugin final : public SelectorPlugin {
  public:
    [[nodiscard]] std::string name() const override { return "unix_path"; }
    [[nodiscard]] SelectorSet resolve(const WorkloadMetadata& metadata) const override;
};

/// "sim:<key>=<value>" from simulator-provided metadata.
class SimMetadataSelectorPlugin final : public SelectorPlugin {
  public:
    [[nodiscard]] std::string name() const override { return "sim"; }
    [[nodiscard]] SelectorSet resolve(const WorkloadMetadata& metadata) const override;
};

struct AgentConfig {
    TrustDomain domain;
    std::string server_address;
    std::string join_token;
    // First-contact trust for the server's TLS identity; replaced by the
    // bundle returned from node attestation.
    std::vector<crypto::TrustBundle> bootstrap_trust;
    double rotation_threshold = 0.5;
    std::int64_t jwt_ttl_seconds = 300;
    std::map<std::string, WorkloadMetadata> workloads;  // handle -> facts
};

struct WorkloadX509Response {
    std::vector<crypto::X509Svid> svids;
    crypto::TrustBundle bundle;
    std::vector<crypto::TrustBundle> federated;
};

/// Node-local agent: node-attests to the control plane, serves the
/// Workload API, caches SVIDs, and re-mints them past the rotation
/// threshold. Cached SVIDs are never served within 30 s of expiry.
class Agent final : public wire::Endpoint {
  public:
    Agent(AgentConfig config, const Clock& clock, wire::Dialer dialer);

    /// Node-attests (again); a repeat bootstrap replaces the agent SVID and
    /// clears the SVID cache.
    /// Errors: NodeAttestFailed, ServerUnreachable.
    Result<void> bootstrap();

    [[nodiscard]] bool bootstrapped() const;
    [[nodiscard]] crypto::X509Svid agent_svid() const;
    [[nodiscard]] std::vector<RegistrationEntry> synced_entries() const;

    /// All identities the workload qualifies for, plus the bundles needed
    /// to verify peers. Errors: AgentNotBootstrapped, NoIdentity,
    /// ServerUnreachable (no usable cache during an outage).
    Result<WorkloadX509Response> fetch_x509_svid(const std::string& handle);

    /// One JWT per held identity with exactly the requested audiences.
    /// Tokens are cached per audience set, never across sets.
    /// Errors: AgentNotBootstrapped, NoIdentity, EmptyAudience,
    /// ServerUnreachable.
    Result<std::vector<crypto::JwtSvid>> fetch_jwt_svid(const std::string& handle,
                                                        const std::vector<std::string>& audiences);

    /// Re-mints every cached SVID past the threshold fraction of its
    /// lifetime and re-attests the agent itself at the same threshold.
    /// Returns the re-minted identities. On ServerUnreachable the cache is
    /// retained untouched for the next attempt.
    Result<std::vector<SpiffeId>> rotation_tick();

    void register_workload(const std::string& handle, WorkloadMetadata metadata);

    /// Workload API: {"op":"fetch_x509"} and {"op":"fetch_jwt","aud":[...]},
    /// the caller's handle bound at connection establishment. Anything the
    /// request body claims about selectors is ignored.
    nlohmann::json handle(const nlohmann::json& request, const wire::ConnContext& ctx) override;

    /// Plaintext local port (callers are unauthenticated by design).
    [[nodiscard]] wire::ServerPort workload_port();

  private:
    struct CachedSvid {
        crypto::X509Svid svid;
        UnixTime minted_at = 0;
    };
    struct CachedJwt {
        crypto::JwtSvid svid;
        UnixTime minted_at = 0;
    };

    Result<std::unique_ptr<wire::ClientConnection>> dial_locked(bool with_client_cert) const;
    Result<void> bootstrap_locked();
    [[nodiscard]] SelectorSet resolve_selectors(const WorkloadMetadata& metadata) const;
    [[nodiscard]] bool past_threshold(UnixTime minted_at, UnixTime not_after, UnixTime now) const;
    [[nodiscard]] static bool servable(const crypto::X509Svid& svid, UnixTime now);
    Result<crypto::X509Svid> mint_x509_locked(const SpiffeId& id, UnixTime now);
    Result<crypto::JwtSvid> mint_jwt_locked(const SpiffeId& id,
                                            const std::vector<std::string>& audiences,
                                            UnixTime now);
    Result<void> refresh_bundles_locked(UnixTime now);

    AgentConfig config_;
    const Clock& clock_;
    wire::Dialer dialer_;
    std::vector<std::unique_ptr<SelectorPlugin>> plugins_;

    mutable std::mutex mu_;
    std::optional<crypto::X509Svid> agent_svid_;
    UnixTime agent_svid_minted_at_ = 0;
    std::optional<crypto::TrustBundle> bundle_;
    std::vector<crypto::TrustBundle> federated_;
    std::vector<RegistrationEntry> entries_;
    std::map<std::pair<std::string, std::string>, CachedSvid> x509_cache_;
    std::map<std::string, CachedJwt> jwt_cache_;  // "handle|id|aud,aud"
};

}  // namespace minispiffe
