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

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "minispiffe/clock.hpp"
#include "minispiffe/crypto/bundle.hpp"
#include "minispiffe/crypto/jwt.hpp"
#include "minispiffe/crypto/keys.hpp"
#include "minispiffe/crypto/x509.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe::crypto {

struct AuthorityConfig {
    KeyAlgorithm algorithm = KeyAlgorithm::Ed25519;
    std::int64_t default_x509_ttl_seconds = 3600;
    std::int64_t max_x509_ttl_seconds = 86400;
    std::int64_t default_jwt_ttl_seconds = 300;
    std::int64_t max_jwt_ttl_seconds = 3600;
    std::int64_t root_lifetime_seconds = 10LL * 365 * 86400;
    std::int64_t bundle_refresh_hint_seconds = 300;
    // 0 means 2 x max_jwt_ttl_seconds.
    std::int64_t jwt_key_overlap_seconds = 0;

    [[nodiscard]] std::int64_t jwt_key_overlap() const {
        return jwt_key_overlap_seconds > 0 ? jwt_key_overlap_seconds : 2 * max_jwt_ttl_seconds;
    }
};

/// Per-trust-domain certificate authority. Key material is immutable after
/// creation except for JWT key rotation, which retires the previous key
/// after an overlap window. Minting is pure given (authority, now); every
/// bundle-visible change increments the bundle sequence.
class Authority {
  public:
    static Result<Authority> create(TrustDomain domain, AuthorityConfig config, UnixTime now);

    // Movable despite the atomic serial counter; moves happen only during
    // construction, never while minting runs.
    Authority(Authority&& other) noexcept
        : domain_(std::move(other.domain_)),
          config_(other.config_),
          ca_key_(std::move(other.ca_key_)),
          root_der_(std::move(other.root_der_)),
          jwt_keys_(std::move(other.jwt_keys_)),
          bundle_(std::move(other.bundle_)),
          next_serial_(other.next_serial_.load(std::memory_order_relaxed)) {}
    Authority(const Authority&) = delete;
    Authority& operator=(const Authority&) = delete;
    Authority& operator=(Authority&&) = delete;

    [[nodiscard]] const TrustDomain& domain() const noexcept { return domain_; }
    [[nodiscard]] const AuthorityConfig& config() const noexcept { return config_; }
    [[nodiscard]] const TrustBundle& bundle() const noexcept { return bundle_; }
    [[nodiscard]] const std::vector<std::uint8_t>& root_certificate() const noexcept {
        return root_der_;
    }
    [[nodiscard]] const std::string& active_jwt_kid() const noexcept {
        return jwt_keys_.front().kid;
    }

    /// Errors: ForeignTrustDomain, TtlOutOfRange.
    Result<X509Svid> mint_x509_svid(const SpiffeId& id, std::int64_t ttl_seconds,
                                    UnixTime now) const;

    /// The subject may live in a foreign trust domain (federated token
    /// flows mint such subjects); only audiences and TTL are validated.
    /// Errors: EmptyAudience, TtlOutOfRange.
    Result<JwtSvid> mint_jwt_svid(const SpiffeId& id, const std::vector<std::string>& audiences,
                                  std::int64_t ttl_seconds, UnixTime now) const;

    /// Adds a fresh signing key; the previous one stays in the bundle until
    /// its overlap window ends. Bumps the bundle sequence.
    Result<void> rotate_jwt_key(UnixTime now);

    /// Drops retired keys whose overlap window has passed. Returns true if
    /// the bundle changed (sequence was bumped).
    bool prune_retired_jwt_keys(UnixTime now);

  private:
    struct SigningKey {
        PrivateKey key;
        std::string kid;
        std::optional<UnixTime> retire_at;
    };

    Authority(TrustDomain domain, AuthorityConfig config, PrivateKey ca_key,
              std::vector<std::uint8_t> root_der, SigningKey first_jwt_key);

    void rebuild_bundle();

    TrustDomain domain_;
    AuthorityConfig config_;
    PrivateKey ca_key_;
    std::vector<std::uint8_t> root_der_;
    std::vector<SigningKey> jwt_keys_;  // front() is the active signer
    TrustBundle bundle_;
    mutable std::atomic<std::uint64_t> next_serial_{2};  // 1 is the root
};

/// kid derivation: first 16 hex characters of SHA-256 over the SPKI DER.
std::string derive_kid(const PrivateKey& key);

}  // namespace minispiffe::crypto
