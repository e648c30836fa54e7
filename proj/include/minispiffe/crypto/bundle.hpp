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
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minispiffe/crypto/keys.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe::crypto {

struct JwtBundleKey {
    std::string kid;
    KeyAlgorithm alg;
    std::vector<std::uint8_t> spki_der;

    bool operator==(const JwtBundleKey&) const = default;
};

/// Public verification material for one trust domain: X.509 roots for
/// chain verification and JWT keys indexed by kid. Republication replaces
/// the whole value; sequence strictly increases across republications.
struct TrustBundle {
    TrustDomain trust_domain;
    std::vector<std::vector<std::uint8_t>> x509_roots;  // DER
    std::vector<JwtBundleKey> jwt_keys;
    std::int64_t sequence = 1;
    std::int64_t refresh_hint_seconds = 300;

    bool operator==(const TrustBundle&) const = default;

    [[nodiscard]] const JwtBundleKey* find_jwt_key(std::string_view kid) const;
};

nlohmann::json bundle_to_json(const TrustBundle& bundle);
Result<TrustBundle> bundle_from_json(const nlohmann::json& doc);

/// Canonical UTF-8 JSON document (sorted keys, no extra whitespace). Equal
/// bundles serialize to identical bytes.
/// Errors: EmptyRoots.
Result<std::string> serialize_bundle(const TrustBundle& bundle);

/// Errors: MalformedBundle, EmptyRoots.
Result<TrustBundle> deserialize_bundle(std::string_view bytes);

}  // namespace minispiffe::crypto
