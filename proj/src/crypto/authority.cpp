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

#include "minispiffe/crypto/authority.hpp"

#include <algorithm>

#include "minispiffe/crypto/openssl_util.hpp"

namespace minispiffe::crypto {

std::string derive_kid(const PrivateKey& key) {
    auto digest = sha256(key.public_spki_der());
    return hex_encode(digest).substr(0, 16);
}

Authority::Authority(TrustDomain domain, AuthorityConfig config, PrivateKey ca_key,
                     std::vector<std::uint8_t> root_der, SigningKey first_jwt_key)
    : domain_(std::move(domain)),
      config_(config),
      ca_key_(std::move(ca_key)),
      root_der_(std::move(root_der)),
      bundle_{domain_, {}, {}, 0, config.bundle_refresh_hint_seconds} {
    jwt_keys_.push_back(std::move(first_jwt_key));
    rebuild_bundle();  // sequence becomes 1
}

Result<Authority> Authority::create(TrustDomain domain, AuthorityConfig config, UnixTime now) {
    auto ca_key = PrivateKey::generate(config.algorithm);
    if (!ca_key.ok()) return ca_key.take_error();
    auto root = make_root_certificate(domain, ca_key.value(), now, config.root_lifetime_seconds,
                                      /*serial=*/1);
    if (!root.ok()) return root.take_error();

    auto jwt_key = PrivateKey::generate(config.algorithm);
    if (!jwt_key.ok()) return jwt_key.take_error();
    std::string kid = derive_kid(jwt_key.value());

    return Authority(std::move(domain), config, ca_key.take(), root.take(),
                     SigningKey{jwt_key.take(), std::move(kid), std::nullopt});
}

void Authority::rebuild_bundle() {
    bundle_.x509_roots = {root_der_};
    bundle_.jwt_keys.clear();
    for (const auto& signing_key : jwt_keys_) {
        bundle_.jwt_keys.push_back(JwtBundleKey{signing_key.kid, signing_key.key.algorithm(),
                                                signing_key.key.public_spki_der()});
    }
    bundle_.sequence += 1;
}

Result<X509Svid> Authority::mint_x509_svid(const SpiffeId& id, std::int64_t ttl_seconds,
                                           UnixTime now) const {
    if (id.trust_domain() != domain_) {
        return make_error(Err::ForeignTrustDomain,
                          "authority for " + domain_.name() + " cannot mint " + id.canonical());
    }
    if (ttl_seconds <= 0 || ttl_seconds > config_.max_x509_ttl_seconds) {
        return make_error(Err::TtlOutOfRange, "X.509 TTL must be in (0, " +
                                                  std::to_string(config_.max_x509_ttl_seconds) +
                                                  "]");
    }
    auto subject_key = PrivateKey::generate(config_.algorithm);
    if (!subject_key.ok()) return subject_key.take_error();

    UnixTime not_before = now - kClockSkewSeconds;
    UnixTime not_after = now + ttl_seconds;
    auto leaf = make_leaf_certificate(id, subject_key.value().handle(), ca_key_, root_der_,
                                      not_before, not_after,
                                      next_serial_.fetch_add(1, std::memory_order_relaxed));
    if (!leaf.ok()) return leaf.take_error();
    return X509Svid{id, leaf.take(), {}, subject_key.take(), not_before, not_after};
}

Result<JwtSvid> Authority::mint_jwt_svid(const SpiffeId& id,
                                         const std::vector<std::string>& audiences,
                                         std::int64_t ttl_seconds, UnixTime now) const {
    if (audiences.empty()) {
        return make_error(Err::EmptyAudience, "JWT-SVID requires at least one audience");
    }
    if (ttl_seconds <= 0 || ttl_seconds > config_.max_jwt_ttl_seconds) {
        return make_error(Err::TtlOutOfRange, "JWT TTL must be in (0, " +
                                                  std::to_string(config_.max_jwt_ttl_seconds) +
                                                  "]");
    }
    const SigningKey& active = jwt_keys_.front();
    return mint_jwt(active.key, active.kid, domain_, id, audiences, now, now + ttl_seconds);
}

Result<void> Authority::rotate_jwt_key(UnixTime now) {
    auto fresh = PrivateKey::generate(config_.algorithm);
    if (!fresh.ok()) return fresh.take_error();
    std::string kid = derive_kid(fresh.value());
    for (const auto& existing : jwt_keys_) {
        if (existing.kid == kid) {
            return make_error(Err::Internal, "kid collision on rotation");
        }
    }
    jwt_keys_.front().retire_at = now + config_.jwt_key_overlap();
    jwt_keys_.insert(jwt_keys_.begin(), SigningKey{fresh.take(), std::move(kid), std::nullopt});
    std::erase_if(jwt_keys_,
                  [now](const SigningKey& k) { return k.retire_at && *k.retire_at <= now; });
    rebuild_bundle();
    return {};
}

bool Authority::prune_retired_jwt_keys(UnixTime now) {
    auto removed = std::erase_if(
        jwt_keys_, [now](const SigningKey& k) { return k.retire_at && *k.retire_at <= now; });
    if (removed == 0) return false;
    rebuild_bundle();
    return true;
}

}  // namespace minispiffe::crypto
