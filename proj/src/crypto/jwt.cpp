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

#include "minispiffe/crypto/jwt.hpp"

#include <algorithm>

#include <json.hpp>

#include "minispiffe/crypto/openssl_util.hpp"

namespace minispiffe::crypto {

namespace {

using nlohmann::json;

Result<json> parse_json_bytes(std::span<const std::uint8_t> bytes, const char* what) {
    json doc = json::parse(bytes.begin(), bytes.end(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object()) {
        return make_error(Err::MalformedToken, std::string(what) + " is not a JSON object");
    }
    return doc;
}

}  // namespace

Result<JwtSvid> mint_jwt(const PrivateKey& key, const std::string& kid,
                         const TrustDomain& issuer_domain, const SpiffeId& subject,
                         const std::vector<std::string>& audiences, UnixTime issued_at,
                         UnixTime expires_at) {
    if (audiences.empty()) {
        return make_error(Err::EmptyAudience, "JWT-SVID requires at least one audience");
    }
    json header = {{"alg", std::string(jose_alg_name(key.algorithm()))},
                   {"kid", kid},
                   {"typ", "JWT"}};
    json payload = {{"sub", subject.canonical()},
                    {"iss", issuer_domain.id_string()},
                    {"iat", issued_at},
                    {"exp", expires_at}};
    if (audiences.size() == 1) {
        payload["aud"] = audiences.front();
    } else {
        payload["aud"] = audiences;
    }

    std::string signing_input =
        base64url_encode(header.dump()) + "." + base64url_encode(payload.dump());
    auto signature = key.sign(as_bytes(signing_input));
    if (!signature.ok()) return signature.take_error();

    JwtSvid svid{subject, issuer_domain.id_string(), audiences, issued_at, expires_at, kid,
                 signing_input + "." + base64url_encode(signature.value())};
    return svid;
}

json jwt_svid_to_json(const JwtSvid& svid) {
    return {{"token", svid.token},
            {"spiffe_id", svid.id.canonical()},
            {"issuer", svid.issuer},
            {"audiences", svid.audiences},
            {"iat", svid.issued_at},
            {"exp", svid.expires_at},
            {"kid", svid.kid}};
}

Result<JwtSvid> jwt_svid_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("token") || !doc.contains("spiffe_id")) {
        return make_error(Err::MalformedFrame, "JWT SVID document is missing fields");
    }
    auto id = SpiffeId::parse(doc["spiffe_id"].get<std::string>());
    if (!id.ok()) return id.take_error();
    JwtSvid svid{id.take(),
                 doc.value("issuer", std::string{}),
                 doc.value("audiences", std::vector<std::string>{}),
                 doc.value("iat", static_cast<UnixTime>(0)),
                 doc.value("exp", static_cast<UnixTime>(0)),
                 doc.value("kid", std::string{}),
                 doc["token"].get<std::string>()};
    return svid;
}

Result<JwtSvid> verify_jwt_svid(std::string_view token, const TrustBundle& bundle,
                                std::string_view expected_audience, UnixTime now) {
    std::size_t dot1 = token.find('.');
    std::size_t dot2 = dot1 == std::string_view::npos ? std::string_view::npos
                                                      : token.find('.', dot1 + 1);
    if (dot1 == std::string_view::npos || dot2 == std::string_view::npos ||
        token.find('.', dot2 + 1) != std::string_view::npos) {
        return make_error(Err::MalformedToken, "token is not three dot-separated parts");
    }
    std::string_view header_b64 = token.substr(0, dot1);
    std::string_view payload_b64 = token.substr(dot1 + 1, dot2 - dot1 - 1);
    std::string_view signature_b64 = token.substr(dot2 + 1);

    auto header_bytes = base64url_decode(header_b64);
    if (!header_bytes.ok()) return header_bytes.take_error();
    auto header = parse_json_bytes(header_bytes.value(), "header");
    if (!header.ok()) return header.take_error();

    const json& h = header.value();
    if (!h.contains("alg") || !h["alg"].is_string() || !h.contains("kid") ||
        !h["kid"].is_string()) {
        return make_error(Err::MalformedToken, "header lacks alg or kid");
    }
    if (h.contains("typ") && h["typ"] != "JWT") {
        return make_error(Err::MalformedToken, "unexpected typ header");
    }
    std::string kid = h["kid"].get<std::string>();
    const JwtBundleKey* key = bundle.find_jwt_key(kid);
    if (!key) {
        return make_error(Err::UnknownKid, "no bundle key with kid " + kid);
    }
    auto alg = key_algorithm_from_jose(h["alg"].get<std::string>());
    if (!alg || *alg != key->alg) {
        return make_error(Err::BadSignature, "token alg does not match bundle key");
    }

    auto signature = base64url_decode(signature_b64);
    if (!signature.ok()) return signature.take_error();
    std::string_view signing_input = token.substr(0, dot2);
    if (!verify_signature(key->alg, key->spki_der, as_bytes(signing_input), signature.value())) {
        return make_error(Err::BadSignature, "signature verification failed");
    }

    auto payload_bytes = base64url_decode(payload_b64);
    if (!payload_bytes.ok()) return payload_bytes.take_error();
    auto payload = parse_json_bytes(payload_bytes.value(), "payload");
    if (!payload.ok()) return payload.take_error();

    const json& p = payload.value();
    if (!p.contains("sub") || !p["sub"].is_string() || !p.contains("iss") ||
        !p["iss"].is_string() || !p.contains("aud") || !p.contains("iat") ||
        !p["iat"].is_number_integer() || !p.contains("exp") || !p["exp"].is_number_integer()) {
        return make_error(Err::MalformedToken, "payload lacks a required claim");
    }
    std::vector<std::string> audiences;
    if (p["aud"].is_string()) {
        audiences.push_back(p["aud"].get<std::string>());
    } else if (p["aud"].is_array()) {
        for (const auto& aud : p["aud"]) {
            if (!aud.is_string()) {
                return make_error(Err::MalformedToken, "aud entries must be strings");
            }
            audiences.push_back(aud.get<std::string>());
        }
    } else {
        return make_error(Err::MalformedToken, "aud must be a string or array");
    }
    auto subject = SpiffeId::parse(p["sub"].get<std::string>());
    if (!subject.ok()) {
        return make_error(Err::MalformedToken, "sub is not a SPIFFE ID");
    }
    UnixTime iat = p["iat"].get<UnixTime>();
    UnixTime exp = p["exp"].get<UnixTime>();

    if (now >= exp + kClockSkewSeconds) {
        return make_error(Err::Expired, "token expired");
    }
    if (now < iat - kClockSkewSeconds) {
        return make_error(Err::NotYetValid, "token not yet valid");
    }
    if (std::find(audiences.begin(), audiences.end(), expected_audience) == audiences.end()) {
        return make_error(Err::AudienceMismatch,
                          "expected audience " + std::string(expected_audience));
    }
    std::string issuer = p["iss"].get<std::string>();
    auto issuer_id = SpiffeId::parse(issuer);
    if (!issuer_id.ok() || issuer_id.value().trust_domain() != bundle.trust_domain) {
        return make_error(Err::IssuerMismatch,
                          "issuer is not trust domain " + bundle.trust_domain.name());
    }

    return JwtSvid{subject.take(), std::move(issuer), std::move(audiences),
                   iat,            exp,               std::move(kid),
                   std::string(token)};
}

}  // namespace minispiffe::crypto
