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
#include <mutex>
#include <string>
#include <vector>

#include "minispiffe/clock.hpp"
#include "minispiffe/crypto/bundle.hpp"
#include "minispiffe/crypto/jwt.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"
#include "minispiffe/wire.hpp"

namespace minispiffe {

struct StsPermission {
    std::string action;
    std::string resource;  // literal or trailing-"**" prefix pattern

    bool operator==(const StsPermission&) const = default;
};

/// One role's trust policy: which issuer is federated, which audience the
/// presented token must carry, which subject may assume the role, and the
/// permissions attached to the issued credentials.
struct StsTrustPolicy {
    std::string role_name;
    std::string federated_issuer;  // trust-domain identity, "spiffe://<domain>"
    std::string required_audience;
    SpiffeIdPattern subject_condition;
    bool subject_exact = true;  // StringEquals vs StringLike semantics
    std::vector<StsPermission> permissions;
    std::int64_t max_session_seconds = 900;

    [[nodiscard]] Result<void> validate() const;
};

/// Loads roles from the broker's JSON role file. Each role mirrors the IAM
/// trust-policy fields: Principal.Federated, Action
/// "sts:AssumeRoleWithWebIdentity", Condition.StringEquals/StringLike over
/// "sub", plus Audience.
Result<std::vector<StsTrustPolicy>> sts_roles_from_json(const nlohmann::json& doc);

struct ScopedCredentials {
    std::string credential_id;
    std::string secret;
    // Opaque to clients, integrity-protected by the broker key; carries
    // role, subject, expiry and the granted permissions.
    std::string session_token;
    UnixTime expires_at = 0;
    std::vector<StsPermission> granted;

    [[nodiscard]] nlohmann::json to_json() const;
    static Result<ScopedCredentials> from_json(const nlohmann::json& doc);
};

/// Mock cloud token service: exchanges a verified JWT-SVID for short-lived
/// scoped credentials. Stateless per request apart from the broker key.
class StsBroker final : public wire::Endpoint {
  public:
    explicit StsBroker(const Clock& clock);

    Result<void> add_role(StsTrustPolicy policy);
    void trust_issuer(crypto::TrustBundle bundle);

    /// Errors: NoMatch (unknown role), IssuerNotTrusted, TokenInvalid
    /// (verification failure, cause preserved), SubjectMismatch.
    Result<ScopedCredentials> assume_role_with_web_identity(const std::string& role_name,
                                                            const std::string& token,
                                                            UnixTime now);

    /// True iff the session token's integrity verifies, the session has not
    /// expired, and (action, resource) is granted (prefix match allowed).
    [[nodiscard]] bool validate_session(const ScopedCredentials& credentials,
                                        const std::string& action, const std::string& resource,
                                        UnixTime now) const;

    /// Ops: {"op":"assume_role","role",..,"token":..} and
    /// {"op":"validate_session","credentials":..,"action":..,"resource":..}.
    nlohmann::json handle(const nlohmann::json& request, const wire::ConnContext& ctx) override;

    /// Plaintext local port; the broker stands in for an external HTTPS
    /// service and its transport security is out of scope here.
    [[nodiscard]] wire::ServerPort port();

  private:
    [[nodiscard]] std::vector<std::uint8_t> mac_of(std::string_view payload) const;

    const Clock& clock_;
    std::vector<std::uint8_t> broker_key_;
    mutable std::mutex mu_;
    std::uint64_t next_credential_number_ = 1;
    std::map<std::string, StsTrustPolicy> roles_;
    std::map<TrustDomain, crypto::TrustBundle> issuer_bundles_;
};

}  // namespace minispiffe
