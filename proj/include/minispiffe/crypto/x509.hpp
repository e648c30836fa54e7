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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "minispiffe/clock.hpp"
#include "minispiffe/crypto/bundle.hpp"
#include "minispiffe/crypto/keys.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe::crypto {

/// An X.509 identity document: leaf certificate bound to one SPIFFE ID via
/// a URI SAN, plus the subject private key. The chain holds intermediates
/// only; roots are distributed through trust bundles, never in the chain.
struct X509Svid {
    SpiffeId id;
    std::vector<std::uint8_t> leaf_der;
    std::vector<std::vector<std::uint8_t>> chain_der;
    PrivateKey key;
    UnixTime not_before = 0;
    UnixTime not_after = 0;
};

nlohmann::json x509_svid_to_json(const X509Svid& svid);
Result<X509Svid> x509_svid_from_json(const nlohmann::json& doc);

/// Self-signed CA certificate for a trust domain. URI SAN is the
/// trust-domain identity, basic constraints CA:TRUE.
Result<std::vector<std::uint8_t>> make_root_certificate(const TrustDomain& domain,
                                                        const PrivateKey& key, UnixTime now,
                                                        std::int64_t lifetime_seconds,
                                                        std::uint64_t serial);

/// End-entity certificate for `id`, signed by the issuer key. CA:FALSE,
/// exactly one URI SAN, EKU serverAuth+clientAuth so the SVID works on
/// either side of a TLS handshake.
Result<std::vector<std::uint8_t>> make_leaf_certificate(
    const SpiffeId& id, EVP_PKEY* subject_public_key, const PrivateKey& issuer_key,
    std::span<const std::uint8_t> issuer_cert_der, UnixTime not_before, UnixTime not_after,
    std::uint64_t serial);

/// Facts extracted from a certificate, for verification and tests.
struct CertInfo {
    std::vector<std::string> uri_sans;
    bool is_ca = false;
    UnixTime not_before = 0;
    UnixTime not_after = 0;
    std::uint64_t serial = 0;
};

Result<CertInfo> inspect_certificate(std::span<const std::uint8_t> der);

/// Verifies an SVID chain against one trust bundle and returns the leaf's
/// SPIFFE ID. Checks, in order: exactly one URI SAN that parses as a
/// SPIFFE ID, CA flag false on the leaf, leaf validity window at `now`
/// (with the global 30 s skew allowance on both bounds), and a signature
/// chain from the leaf through the supplied intermediates to one of the
/// bundle roots.
/// Errors: NoUriSan, MultipleUriSan, LeafIsCa, Expired, NotYetValid,
/// UnknownRoot.
Result<SpiffeId> verify_x509_svid(std::span<const std::uint8_t> leaf_der,
                                  std::span<const std::vector<std::uint8_t>> intermediates,
                                  const TrustBundle& bundle, UnixTime now);

/// Verifies against a bundle set: the bundle whose trust domain equals the
/// leaf's SPIFFE ID domain is selected; absence of such a bundle is
/// UnknownRoot.
Result<SpiffeId> verify_x509_svid_any(std::span<const std::uint8_t> leaf_der,
                                      std::span<const std::vector<std::uint8_t>> intermediates,
                                      std::span<const TrustBundle> bundles, UnixTime now);

}  // namespace minispiffe::crypto
