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

#include "minispiffe/sts.hpp"

#include <openssl/crypto.h>

#include "minispiffe/crypto/openssl_util.hpp"

namespace minispiffe {

using nlohmann::json;

namespace {

constexpr std::string_view kAssumeRoleAction = "sts:AssumeRoleWithWebIdentity";

bool permission_covers(const StsPermission& granted, const std::string& action,
                       const std::string& resource) {
    if (granted.action != action) return false;
    if (granted.resource.size() >= 2 && granted.resource.ends_with("**")) {
        return resource.starts_with(granted.resource.substr(0, granted.resource.size() - 2));
    }
    return granted.resource == resource;
}

}  // namespace

Result<void> StsTrustPolicy::validate() const {
    if (role_name.empty()) {
        return make_error(Err::InvalidEntry, "role_name is required");
    }
    if (required_audience.empty()) {
        return make_error(Err::InvalidEntry, "required_audience must be non-empty");
    }
    if (permissions.empty()) {
        return make_error(Err::InvalidEntry, "permissions must be non-empty");
    }
    auto issuer = SpiffeId::parse(federated_issuer);
    if (!issuer.ok() || !issuer.value().segments().empty()) {
        return make_error(Err::InvalidEntry,
                          "federated_issuer must be a trust-domain identity string");
    }
    if (max_session_seconds <= 0) {
        return make_error(Err::InvalidEntry, "max_session_seconds must be positive");
    }
    return {};
}

Result<std::vector<StsTrustPolicy>> sts_roles_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("roles") || !doc["roles"].is_array()) {
        return make_error(Err::InvalidEntry, "role file must contain a roles array");
    }
    std::vector<StsTrustPolicy> roles;
    for (const auto& role_doc : doc["roles"]) {
        StsTrustPolicy policy;
        policy.role_name = role_doc.value("role_name", std::string{});
        policy.max_session_seconds = role_doc.value("max_session_seconds", std::int64_t{900});

        const json& trust = role_doc.value("trust_policy", json::object());
        if (trust.value("Action", std::string{}) != kAssumeRoleAction) {
            return make_error(Err::InvalidEntry, "trust_policy.Action must be " +
                                                     std::string(kAssumeRoleAction));
        }
        policy.federated_issuer =
            trust.value("Principal", json::object()).value("Federated", std::string{});
        policy.required_audience = trust.value("Audience", std::string{});

        const json& condition = trust.value("Condition", json::object());
        std::string subject;
        if (condition.contains("StringEquals")) {
            subject = condition["StringEquals"].value("sub", std::string{});
            policy.subject_exact = true;
        } else if (condition.contains("StringLike")) {
            subject = condition["StringLike"].value("sub", std::string{});
            policy.subject_exact = false;
        } else {
            return make_error(Err::InvalidEntry,
                              "trust_policy.Condition needs StringEquals or StringLike over sub");
        }
        auto pattern = SpiffeIdPattern::parse(subject);
        if (!pattern.ok()) {
            return make_error(Err::InvalidEntry, "bad subject condition: " + subject);
        }
        if (policy.subject_exact && !pattern.value().is_literal()) {
            return make_error(Err::InvalidEntry,
                              "StringEquals subjects must not contain wildcards: " + subject);
        }
        policy.subject_condition = pattern.take();

        for (const auto& permission : role_doc.value("permissions", json::array())) {
            policy.permissions.push_back(StsPermission{
                permission.value("action", std::string{}),
                permission.value("resource", std::string{})});
        }
        if (auto v = policy.validate(); !v.ok()) return v.take_error();
        roles.push_back(std::move(policy));
    }
    return roles;
}

json ScopedCredentials::to_json() const {
    json granted_doc = json::array();
    for (const auto& permission : granted) {
        granted_doc.push_back({{"action", permission.action}, {"resource", permission.resource}});
    }
    return {{"credential_id", credential_id},
            {"secret", secret},
            {"session_token", session_token},
            {"expires_at", expires_at},
            {"granted", std::move(granted_doc)}};
}

Result<ScopedCredentials> ScopedCredentials::from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("session_token")) {
        return make_error(Err::MalformedFrame, "credentials document is missing fields");
    }
    ScopedCredentials credentials;
    credentials.credential_id = doc.value("credential_id", std::string{});
    credentials.secret = doc.value("secret", std::string{});
    credentials.session_token = doc["session_token"].get<std::string>();
    credentials.expires_at = doc.value("expires_at", static_cast<UnixTime>(0));
    for (const auto& permission : doc.value("granted", json::array())) {
        credentials.granted.push_back(StsPermission{permission.value("action", std::string{}),
                                                    permission.value("resource", std::string{})});
    }
    return credentials;
}

StsBroker::StsBroker(const Clock& clock)
    : clock_(clock), broker_key_(crypto::random_bytes(32)) {}

Result<void> StsBroker::add_role(StsTrustPolicy policy) {
    if (auto v = policy.validate(); !v.ok()) return v;
    std::lock_guard lock(mu_);
    roles_[policy.role_name] = std::move(policy);
    return {};
}

void StsBroker::trust_issuer(crypto::TrustBundle bundle) {
    std::lock_guard lock(mu_);
    TrustDomain domain = bundle.trust_domain;
    issuer_bundles_.insert_or_assign(std::move(domain), std::move(bundle));
}

std::vector<std::uint8_t> StsBroker::mac_of(std::string_view payload) const {
    return crypto::hmac_sha256(broker_key_, crypto::as_bytes(payload));
}

Result<ScopedCredentials> StsBroker::assume_role_with_web_identity(const std::string& role_name,
                                                                   const std::string& token,
                                                                   UnixTime now) {
    StsTrustPolicy policy;
    std::optional<crypto::TrustBundle> issuer_bundle;
    std::uint64_t credential_number;
    {
        std::lock_guard lock(mu_);
        auto role = roles_.find(role_name);
        if (role == roles_.end()) {
            return make_error(Err::NoMatch, "no role named " + role_name);
        }
        policy = role->second;

        auto issuer_id = SpiffeId::parse(policy.federated_issuer);
        auto bundle = issuer_bundles_.find(issuer_id.value().trust_domain());
        if (bundle == issuer_bundles_.end()) {
            return make_error(Err::IssuerNotTrusted,
                              "no issuer bundle held for " + policy.federated_issuer);
        }
        issuer_bundle = bundle->second;
        credential_number = next_credential_number_++;
    }

    auto verified = crypto::verify_jwt_svid(token, *issuer_bundle, policy.required_audience, now);
    if (!verified.ok()) {
        return wrap_error(Err::TokenInvalid, "web identity token rejected", verified.error());
    }
    if (verified.value().issuer != policy.federated_issuer) {
        return make_error(Err::IssuerNotTrusted, "token issuer " + verified.value().issuer +
                                                     " is not federated for this role");
    }
    if (!policy.subject_condition.matches(verified.value().id)) {
        return make_error(Err::SubjectMismatch,
                          "subject " + verified.value().id.canonical() +
                              " does not satisfy the role's subject condition");
    }

    ScopedCredentials credentials;
    credentials.expires_at = now + policy.max_session_seconds;
    credentials.granted = policy.permissions;

    std::string numbered = std::to_string(credential_number);
    credentials.credential_id =
        "msc-" + crypto::hex_encode(mac_of("credential-id|" + numbered)).substr(0, 16);
    credentials.secret = crypto::hex_encode(mac_of("secret|" + numbered)).substr(0, 32);

    json grants = json::array();
    for (const auto& permission : policy.permissions) {
        grants.push_back({{"action", permission.action}, {"resource", permission.resource}});
    }
    json session = {{"v", 1},
                    {"role", policy.role_name},
                    {"sub", verified.value().id.canonical()},
                    {"exp", credentials.expires_at},
                    {"nonce", numbered},
                    {"grants", std::move(grants)}};
    std::string payload = crypto::base64url_encode(session.dump());
    credentials.session_token = payload + "." + crypto::base64url_encode(mac_of(payload));
    return credentials;
}

bool StsBroker::validate_session(const ScopedCredentials& credentials, const std::string& action,
                                 const std::string& resource, UnixTime now) const {
    const std::string& token = credentials.session_token;
    auto dot = token.find('.');
    if (dot == std::string::npos || token.find('.', dot + 1) != std::string::npos) return false;
    std::string payload = token.substr(0, dot);

    auto presented_mac = crypto::base64url_decode(token.substr(dot + 1));
    if (!presented_mac.ok()) return false;
    auto expected_mac = mac_of(payload);
    if (presented_mac.value().size() != expected_mac.size() ||
        CRYPTO_memcmp(presented_mac.value().data(), expected_mac.data(), expected_mac.size()) !=
            0) {
        return false;
    }

    auto payload_bytes = crypto::base64url_decode(payload);
    if (!payload_bytes.ok()) return false;
    json session = json::parse(payload_bytes.value().begin(), payload_bytes.value().end(),
                               nullptr, /*allow_exceptions=*/false);
    if (session.is_discarded() || !session.is_object()) return false;
    if (session.value("v", 0) != 1) return false;
    if (now >= session.value("exp", static_cast<UnixTime>(0))) return false;

    for (const auto& grant : session.value("grants", json::array())) {
        StsPermission permission{grant.value("action", std::string{}),
                                 grant.value("resource", std::string{})};
        if (permission_covers(permission, action, resource)) return true;
    }
    return false;
}

json StsBroker::handle(const json& request, const wire::ConnContext&) {
    if (!request.is_object() || !request.contains("op") || !request["op"].is_string()) {
        return wire::error_response(make_error(Err::MalformedFrame, "request lacks an op"));
    }
    const std::string op = request["op"].get<std::string>();
    const UnixTime now = clock_.now();

    if (op == "assume_role") {
        if (!request.contains("role") || !request.contains("token")) {
            return wire::error_response(
                make_error(Err::MalformedFrame, "assume_role needs role and token"));
        }
        auto credentials = assume_role_with_web_identity(request["role"].get<std::string>(),
                                                         request["token"].get<std::string>(), now);
        if (!credentials.ok()) return wire::error_response(credentials.error());
        return wire::ok_response({{"credentials", credentials.value().to_json()}});
    }

    if (op == "validate_session") {
        if (!request.contains("credentials")) {
            return wire::error_response(
                make_error(Err::MalformedFrame, "validate_session needs credentials"));
        }
        auto credentials = ScopedCredentials::from_json(request["credentials"]);
        if (!credentials.ok()) return wire::error_response(credentials.error());
        bool valid = validate_session(credentials.value(), request.value("action", std::string{}),
                                      request.value("resource", std::string{}), now);
        return wire::ok_response({{"valid", valid}});
    }

    return wire::error_response(make_error(Err::MalformedFrame, "unknown op " + op));
}

wire::ServerPort StsBroker::port() {
    wire::ServerPort out;
    out.endpoint = this;
    out.identity = nullptr;
    out.require_client_cert = false;
    return out;
}

}  // namespace minispiffe
