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

#include "minispiffe/agent.hpp"

#include <algorithm>

namespace minispiffe {

using nlohmann::json;

Result<WorkloadMetadata> WorkloadMetadata::from_json(const json& doc) {
    if (!doc.is_object()) {
        return make_error(Err::MalformedFrame, "workload metadata must be an object");
    }
    WorkloadMetadata metadata;
    if (doc.contains("env")) {
        for (const auto& [key, value] : doc["env"].items()) {
            if (!value.is_string()) {
                return make_error(Err::MalformedFrame, "env values must be strings");
            }
            metadata.environment[key] = value.get<std::string>();
        }
    }
    if (doc.contains("path") && doc["path"].is_string()) {
        metadata.launch_path = doc["path"].get<std::string>();
    }
    if (doc.contains("sim")) {
        for (const auto& [key, value] : doc["sim"].items()) {
            if (!value.is_string()) {
                return make_error(Err::MalformedFrame, "sim values must be strings");
            }
            metadata.sim[key] = value.get<std::string>();
        }
    }
    return metadata;
}

SelectorSet EnvSelectorPlugin::resolve(const WorkloadMetadata& metadata) const {
    SelectorSet out;
    for (const auto& [key, value] : metadata.environment) {
        out.insert(Selector{"env", key + "=" + value});
    }
    return out;
}

SelectorSet UnixPathSelectorPlugin::resolve(const WorkloadMetadata& metadata) const {
    SelectorSet out;
    if (metadata.launch_path) out.insert(Selector{"unix_path", *metadata.launch_path});
    return out;
}

SelectorSet SimMetadataSelectorPlugin::resolve(const WorkloadMetadata& metadata) const {
    SelectorSet out;
    for (const auto& [key, value] : metadata.sim) {
        out.insert(Selector{"sim", key + "=" + value});
    }
    return out;
}

Agent::Agent(AgentConfig config, const Clock& clock, wire::Dialer dialer)
    : config_(std::move(config)), clock_(clock), dialer_(std::move(dialer)) {
    plugins_.push_back(std::make_unique<EnvSelectorPlugin>());
    plugins_.push_back(std::make_unique<UnixPathSelectorPlugin>());
    plugins_.push_back(std::make_unique<SimMetadataSelectorPlugin>());
}

SelectorSet Agent::resolve_selectors(const WorkloadMetadata& metadata) const {
    SelectorSet out;
    for (const auto& plugin : plugins_) {
        auto resolved = plugin->resolve(metadata);
        out.insert(resolved.begin(), resolved.end());
    }
    return out;
}

Result<std::unique_ptr<wire::ClientConnection>> Agent::dial_locked(bool with_client_cert) const {
    wire::DialOptions options;
    options.now = clock_.now();
    if (with_client_cert) {
        if (!agent_svid_) {
            return make_error(Err::AgentNotBootstrapped, "agent holds no SVID yet");
        }
        options.client_identity = &*agent_svid_;
    }
    if (bundle_) {
        options.server_trust.push_back(*bundle_);
    } else {
        options.server_trust = config_.bootstrap_trust;
    }
    auto connection = dialer_(config_.server_address, options);
    if (!connection.ok()) {
        const Error& cause = connection.error();
        if (cause.code == Err::TlsAuthFailure) return connection.take_error();
        return wrap_error(Err::ServerUnreachable, "dial " + config_.server_address, cause);
    }
    return connection;
}

Result<void> Agent::bootstrap_locked() {
    auto connection = dial_locked(/*with_client_cert=*/false);
    if (!connection.ok()) return connection.take_error();

    auto response =
        connection.value()->roundtrip({{"op", "node_attest"}, {"join_token", config_.join_token}});
    if (!response.ok()) {
        return wrap_error(Err::ServerUnreachable, "node_attest exchange failed", response.error());
    }
    auto result = wire::result_of(response.value());
    if (!result.ok()) {
        return wrap_error(Err::NodeAttestFailed, "node attestation refused", result.error());
    }
    auto svid = crypto::x509_svid_from_json(result.value().value("svid", json::object()));
    if (!svid.ok()) return svid.take_error();
    auto bundle = crypto::bundle_from_json(result.value().value("bundle", json::object()));
    if (!bundle.ok()) return bundle.take_error();

    std::vector<RegistrationEntry> entries;
    for (const auto& doc : result.value().value("entries", json::array())) {
        auto entry = RegistrationEntry::from_json(doc);
        if (!entry.ok()) return entry.take_error();
        entries.push_back(entry.take());
    }

    agent_svid_ = svid.take();
    agent_svid_minted_at_ = clock_.now();
    bundle_ = bundle.take();
    entries_ = std::move(entries);
    return {};
}

Result<void> Agent::bootstrap() {
    std::lock_guard lock(mu_);
    auto outcome = bootstrap_locked();
    if (!outcome.ok()) return outcome;
    // A fresh bootstrap invalidates everything minted under the old SVID.
    x509_cache_.clear();
    jwt_cache_.clear();
    return {};
}

bool Agent::bootstrapped() const {
    std::lock_guard lock(mu_);
    return agent_svid_.has_value();
}

crypto::X509Svid Agent::agent_svid() const {
    std::lock_guard lock(mu_);
    return *agent_svid_;
}

std::vector<RegistrationEntry> Agent::synced_entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

void Agent::register_workload(const std::string& handle, WorkloadMetadata metadata) {
    std::lock_guard lock(mu_);
    config_.workloads[handle] = std::move(metadata);
}

bool Agent::past_threshold(UnixTime minted_at, UnixTime not_after, UnixTime now) const {
    std::int64_t lifetime = not_after - minted_at;
    return now - minted_at >= static_cast<UnixTime>(lifetime * config_.rotation_threshold);
}

bool Agent::servable(const crypto::X509Svid& svid, UnixTime now) {
    return now < svid.not_after - kClockSkewSeconds;
}

Result<crypto::X509Svid> Agent::mint_x509_locked(const SpiffeId& id, UnixTime now) {
    auto connection = dial_locked(/*with_client_cert=*/true);
    if (!connection.ok()) return connection.take_error();
    json request = {{"op", "sign"},
                    {"requests", json::array({{{"spiffe_id", id.canonical()}, {"kind", "x509"}}})}};
    auto response = connection.value()->roundtrip(request);
    if (!response.ok()) {
        return wrap_error(Err::ServerUnreachable, "sign exchange failed", response.error());
    }
    auto result = wire::result_of(response.value());
    if (!result.ok()) return result.take_error();
    const json& item = result.value()["results"][0];
    if (!item.value("ok", false)) {
        return wire::error_from_json(item.value("error", json::object()));
    }
    auto svid = crypto::x509_svid_from_json(item["svid"]);
    if (!svid.ok()) return svid.take_error();
    (void)now;
    return svid;
}

Result<crypto::JwtSvid> Agent::mint_jwt_locked(const SpiffeId& id,
                                               const std::vector<std::string>& audiences,
                                               UnixTime now) {
    auto connection = dial_locked(/*with_client_cert=*/true);
    if (!connection.ok()) return connection.take_error();
    json request = {{"op", "sign"},
                    {"requests", json::array({{{"spiffe_id", id.canonical()},
                                               {"kind", "jwt"},
                                               {"audiences", audiences},
                                               {"ttl", config_.jwt_ttl_seconds}}})}};
    auto response = connection.value()->roundtrip(request);
    if (!response.ok()) {
        return wrap_error(Err::ServerUnreachable, "sign exchange failed", response.error());
    }
    auto result = wire::result_of(response.value());
    if (!result.ok()) return result.take_error();
    const json& item = result.value()["results"][0];
    if (!item.value("ok", false)) {
        return wire::error_from_json(item.value("error", json::object()));
    }
    auto svid = crypto::jwt_svid_from_json(item["svid"]);
    if (!svid.ok()) return svid.take_error();
    (void)now;
    return svid;
}

Result<void> Agent::refresh_bundles_locked(UnixTime now) {
    auto connection = dial_locked(/*with_client_cert=*/false);
    if (!connection.ok()) return connection.take_error();
    auto response =
        connection.value()->roundtrip({{"op", "bundle"}, {"include_federated", true}});
    if (!response.ok()) {
        return wrap_error(Err::ServerUnreachable, "bundle exchange failed", response.error());
    }
    auto result = wire::result_of(response.value());
    if (!result.ok()) return result.take_error();
    auto bundle = crypto::bundle_from_json(result.value().value("bundle", json::object()));
    if (!bundle.ok()) return bundle.take_error();
    std::vector<crypto::TrustBundle> federated;
    for (const auto& doc : result.value().value("federated", json::array())) {
        auto parsed = crypto::bundle_from_json(doc);
        if (!parsed.ok()) return parsed.take_error();
        federated.push_back(parsed.take());
    }
    bundle_ = bundle.take();
    federated_ = std::move(federated);
    (void)now;
    return {};
}

Result<WorkloadX509Response> Agent::fetch_x509_svid(const std::string& handle) {
    std::lock_guard lock(mu_);
    if (!agent_svid_) {
        return make_error(Err::AgentNotBootstrapped, "agent has not node-attested");
    }
    const UnixTime now = clock_.now();

    auto workload = config_.workloads.find(handle);
    if (workload == config_.workloads.end()) {
        return make_error(Err::NoIdentity, "unknown workload handle");
    }
    SelectorSet observed = resolve_selectors(workload->second);
    auto identities = attest_workload(entries_, agent_svid_->id, observed, now);
    if (identities.empty()) {
        return make_error(Err::NoIdentity, "no registration entry matches this workload");
    }

    WorkloadX509Response out{{}, *bundle_, federated_};
    for (const auto& identity : identities) {
        auto key = std::make_pair(handle, identity.spiffe_id.canonical());
        auto cached = x509_cache_.find(key);
        bool fresh = cached != x509_cache_.end() &&
                     !past_threshold(cached->second.minted_at, cached->second.svid.not_after, now) &&
                     servable(cached->second.svid, now);
        if (!fresh) {
            auto minted = mint_x509_locked(identity.spiffe_id, now);
            if (minted.ok()) {
                x509_cache_.insert_or_assign(key, CachedSvid{minted.take(), now});
            } else if (minted.code() == Err::ServerUnreachable && cached != x509_cache_.end() &&
                       servable(cached->second.svid, now)) {
                // Outage: the still-valid cached SVID keeps the workload alive.
            } else if (minted.code() == Err::ServerUnreachable &&
                       cached != x509_cache_.end()) {
                return make_error(Err::NoIdentity,
                                  "cached SVID exhausted while the server is unreachable");
            } else {
                return minted.take_error();
            }
        }
        out.svids.push_back(x509_cache_.at(key).svid);
    }
    return out;
}

Result<std::vector<crypto::JwtSvid>> Agent::fetch_jwt_svid(
    const std::string& handle, const std::vector<std::string>& audiences) {
    std::lock_guard lock(mu_);
    if (!agent_svid_) {
        return make_error(Err::AgentNotBootstrapped, "agent has not node-attested");
    }
    if (audiences.empty()) {
        return make_error(Err::EmptyAudience, "fetch_jwt requires at least one audience");
    }
    const UnixTime now = clock_.now();

    auto workload = config_.workloads.find(handle);
    if (workload == config_.workloads.end()) {
        return make_error(Err::NoIdentity, "unknown workload handle");
    }
    SelectorSet observed = resolve_selectors(workload->second);
    auto identities = attest_workload(entries_, agent_svid_->id, observed, now);
    if (identities.empty()) {
        return make_error(Err::NoIdentity, "no registration entry matches this workload");
    }

    std::string audience_key;
    std::vector<std::string> sorted_audiences = audiences;
    std::sort(sorted_audiences.begin(), sorted_audiences.end());
    for (const auto& audience : sorted_audiences) audience_key += audience + ",";

    std::vector<crypto::JwtSvid> out;
    for (const auto& identity : identities) {
        std::string key = handle + "|" + identity.spiffe_id.canonical() + "|" + audience_key;
        auto cached = jwt_cache_.find(key);
        bool fresh = cached != jwt_cache_.end() &&
                     !past_threshold(cached->second.minted_at, cached->second.svid.expires_at,
                                     now) &&
                     now < cached->second.svid.expires_at - kClockSkewSeconds;
        if (!fresh) {
            auto minted = mint_jwt_locked(identity.spiffe_id, audiences, now);
            if (!minted.ok()) return minted.take_error();
            jwt_cache_.insert_or_assign(key, CachedJwt{minted.take(), now});
        }
        out.push_back(jwt_cache_.at(key).svid);
    }
    return out;
}

Result<std::vector<SpiffeId>> Agent::rotation_tick() {
    std::lock_guard lock(mu_);
    if (!agent_svid_) {
        return make_error(Err::AgentNotBootstrapped, "agent has not node-attested");
    }
    const UnixTime now = clock_.now();
    std::vector<SpiffeId> rotated;

    // The agent's own SVID rotates at the same threshold, via re-attestation
    // (which also refreshes the entry snapshot).
    if (past_threshold(agent_svid_minted_at_, agent_svid_->not_after, now)) {
        auto outcome = bootstrap_locked();
        if (!outcome.ok()) return outcome.take_error();
        rotated.push_back(agent_svid_->id);
    }

    if (auto refreshed = refresh_bundles_locked(now); !refreshed.ok()) {
        return refreshed.take_error();
    }

    for (auto& [key, cached] : x509_cache_) {
        if (!past_threshold(cached.minted_at, cached.svid.not_after, now)) continue;
        auto minted = mint_x509_locked(cached.svid.id, now);
        if (!minted.ok()) return minted.take_error();
        // The old SVID stays valid until its own expiry; only the cache
        // moves forward.
        cached = CachedSvid{minted.take(), now};
        rotated.push_back(cached.svid.id);
    }
    for (auto& [key, cached] : jwt_cache_) {
        if (!past_threshold(cached.minted_at, cached.svid.expires_at, now)) continue;
        auto minted = mint_jwt_locked(cached.svid.id, cached.svid.audiences, now);
        if (!minted.ok()) return minted.take_error();
        cached = CachedJwt{minted.take(), now};
        rotated.push_back(cached.svid.id);
    }
    return rotated;
}

json Agent::handle(const json& request, const wire::ConnContext& ctx) {
    if (!ctx.workload_handle) {
        return wire::error_response(
            make_error(Err::NoIdentity, "connection carries no workload handle"));
    }
    if (!request.is_object() || !request.contains("op") || !request["op"].is_string()) {
        return wire::error_response(make_error(Err::MalformedFrame, "request lacks an op"));
    }
    const std::string op = request["op"].get<std::string>();

    if (op == "fetch_x509") {
        auto response = fetch_x509_svid(*ctx.workload_handle);
        if (!response.ok()) return wire::error_response(response.error());
        json svids = json::array();
        for (const auto& svid : response.value().svids) {
            svids.push_back(crypto::x509_svid_to_json(svid));
        }
        json federated = json::array();
        for (const auto& bundle : response.value().federated) {
            federated.push_back(crypto::bundle_to_json(bundle));
        }
        return wire::ok_response({{"svids", std::move(svids)},
                                  {"bundle", crypto::bundle_to_json(response.value().bundle)},
                                  {"federated", std::move(federated)}});
    }

    if (op == "fetch_jwt") {
        std::vector<std::string> audiences;
        if (request.contains("aud") && request["aud"].is_array()) {
            for (const auto& audience : request["aud"]) {
                if (audience.is_string()) audiences.push_back(audience.get<std::string>());
            }
        }
        auto response = fetch_jwt_svid(*ctx.workload_handle, audiences);
        if (!response.ok()) return wire::error_response(response.error());
        json svids = json::array();
        for (const auto& svid : response.value()) {
            svids.push_back(crypto::jwt_svid_to_json(svid));
        }
        return wire::ok_response({{"svids", std::move(svids)}});
    }

    return wire::error_response(make_error(Err::MalformedFrame, "unknown op " + op));
}

wire::ServerPort Agent::workload_port() {
    wire::ServerPort port;
    port.endpoint = this;
    port.identity = nullptr;  // local plaintext endpoint
    port.require_client_cert = false;
    return port;
}

}  // namespace minispiffe
