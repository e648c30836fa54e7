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

#include "minispiffe/crypto/bundle.hpp"

#include <set>

#include "minispiffe/crypto/openssl_util.hpp"

namespace minispiffe::crypto {

const JwtBundleKey* TrustBundle::find_jwt_key(std::string_view kid) const {
    for (const auto& key : jwt_keys) {
        if (key.kid == kid) return &key;
    }
    return nullptr;
}

nlohmann::json bundle_to_json(const TrustBundle& bundle) {
    nlohmann::json roots = nlohmann::json::array();
    for (const auto& der : bundle.x509_roots) {
        roots.push_back(base64_encode(der));
    }
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& key : bundle.jwt_keys) {
        keys.push_back({{"kid", key.kid},
                        {"alg", std::string(jose_alg_name(key.alg))},
                        {"key", base64_encode(key.spki_der)}});
    }
    return {{"trust_domain", bundle.trust_domain.name()},
            {"sequence", bundle.sequence},
            {"refresh_hint", bundle.refresh_hint_seconds},
            {"x509_roots", std::move(roots)},
            {"jwt_keys", std::move(keys)}};
}

Result<TrustBundle> bundle_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        return make_error(Err::MalformedBundle, "bundle document is not a JSON object");
    }
    if (!doc.contains("trust_domain") || !doc["trust_domain"].is_string() ||
        !doc.contains("sequence") || !doc["sequence"].is_number_integer() ||
        !doc.contains("refresh_hint") || !doc["refresh_hint"].is_number_integer() ||
        !doc.contains("x509_roots") || !doc["x509_roots"].is_array() ||
        !doc.contains("jwt_keys") || !doc["jwt_keys"].is_array()) {
        return make_error(Err::MalformedBundle, "bundle document is missing required fields");
    }
    auto domain = TrustDomain::parse(doc["trust_domain"].get<std::string>());
    if (!domain.ok()) {
        return make_error(Err::MalformedBundle,
                          "bad trust domain: " + domain.error().to_string());
    }
    TrustBundle bundle{domain.take(), {}, {}, doc["sequence"].get<std::int64_t>(),
                       doc["refresh_hint"].get<std::int64_t>()};

    for (const auto& entry : doc["x509_roots"]) {
        if (!entry.is_string()) {
            return make_error(Err::MalformedBundle, "x509_roots entries must be base64 strings");
        }
        auto der = base64_decode(entry.get<std::string>());
        if (!der.ok() || der.value().empty()) {
            return make_error(Err::MalformedBundle, "x509_roots entry is not valid base64");
        }
        bundle.x509_roots.push_back(der.take());
    }
    if (bundle.x509_roots.empty()) {
        return make_error(Err::EmptyRoots, "bundle contains no X.509 roots");
    }

    std::set<std::string> kids;
    for (const auto& entry : doc["jwt_keys"]) {
        if (!entry.is_object() || !entry.contains("kid") || !entry["kid"].is_string() ||
            !entry.contains("alg") || !entry["alg"].is_string() || !entry.contains("key") ||
            !entry["key"].is_string()) {
            return make_error(Err::MalformedBundle, "jwt_keys entry is malformed");
        }
        auto alg = key_algorithm_from_jose(entry["alg"].get<std::string>());
        if (!alg) {
            return make_error(Err::MalformedBundle,
                              "unknown JWT algorithm: " + entry["alg"].get<std::string>());
        }
        auto spki = base64_decode(entry["key"].get<std::string>());
        if (!spki.ok() || spki.value().empty()) {
            return make_error(Err::MalformedBundle, "jwt_keys key is not valid base64");
        }
        std::string kid = entry["kid"].get<std::string>();
        if (!kids.insert(kid).second) {
            return make_error(Err::MalformedBundle, "duplicate kid in bundle: " + kid);
        }
        bundle.jwt_keys.push_back(JwtBundleKey{std::move(kid), *alg, spki.take()});
    }
    return bundle;
}

Result<std::string> serialize_bundle(const TrustBundle& bundle) {
    if (bundle.x509_roots.empty()) {
        return make_error(Err::EmptyRoots, "refusing to serialize a bundle with no roots");
    }
    // nlohmann::json keeps objects sorted by key, so dump() is canonical.
    return bundle_to_json(bundle).dump();
}

Result<TrustBundle> deserialize_bundle(std::string_view bytes) {
    nlohmann::json doc = nlohmann::json::parse(bytes, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) {
        return make_error(Err::MalformedBundle, "bundle is not valid JSON");
    }
    return bundle_from_json(doc);
}

}  // namespace minispiffe::crypto
