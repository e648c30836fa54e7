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

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minispiffe/clock.hpp"
#include "minispiffe/crypto/bundle.hpp"
#include "minispiffe/crypto/keys.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe::crypto {

/// A minted or verified JWT identity document. The payload carries exactly
/// five claims: sub, iss, aud, iat, exp. A single audience serializes as a
/// JSON string, several as an array.
struct JwtSvid {
    SpiffeId id;          // sub
    std::string issuer;   // iss, the issuing trust domain's identity string
    std::vector<std::string> audiences;
    UnixTime issued_at = 0;
    UnixTime expires_at = 0;
    std::string kid;
    std::string token;    // compact serialization
};

/// Signs a JWT-SVID. The subject may belong to a different trust domain
/// than the issuer; only X.509 issuance is domain-bound.
Result<JwtSvid> mint_jwt(const PrivateKey& key, const std::string& kid,
                         const TrustDomain& issuer_domain, const SpiffeId& subject,
                         const std::vector<std::string>& audiences, UnixTime issued_at,
                         UnixTime expires_at);

nlohmann::json jwt_svid_to_json(const JwtSvid& svid);
Result<JwtSvid> jwt_svid_from_json(const nlohmann::json& doc);

/// Full verification against a trust bundle, in order: compact structure,
/// kid lookup, signature (over the exact received bytes), validity window
/// with the 30 s skew allowance (accepts while now < exp + 30 and
/// now >= iat - 30), expected audience membership, issuer trust domain
/// equal to the bundle's.
/// Errors: MalformedToken, UnknownKid, BadSignature, Expired, NotYetValid,
/// AudienceMismatch, IssuerMismatch.
Result<JwtSvid> verify_jwt_svid(std::string_view token, const TrustBundle& bundle,
                                std::string_view expected_audience, UnixTime now);

}  // namespace minispiffe::crypto
