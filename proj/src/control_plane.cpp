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

#include "minispiffe/control_plane.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace minispiffe {

using nlohmann::json;

ControlPlane::ControlPlane(ControlPlaneConfig config, crypto::Authority authority,
                           crypto::X509Svid server_svid, const Clock& clock)
    : config_(std::move(config)),
      authority_(std::move(authority)),
      server_id_(server_svid.id),
      server_svid_(std::move(server_svid)),
      server_svid_minted_at_(server_svid_.not_before + kClockSkewSeconds),
      clock_(clock),
      federation_endpoint_(*this) {
    for (const auto& peer : config_.peers) {
        federated_.insert_or_assign(peer.domain, FederatedState{peer.bootstrap, 0, true});
    }
}

Result<std::unique_ptr<ControlPlane>> ControlPlane::create(ControlPlaneConfig config,
                                                           const Clock& clock) {
    for (const auto& peer : config.peers) {
        if (peer.bootstrap.trust_domain != peer.domain) {
            return make_error(Err::DomainMismatch, "bootstrap bundle for " + peer.domain.name() +
                                                       " names domain " +
                                                       peer.bootstrap.trust_domain.name());
        }
        if (peer.domain == config.domain) {
            return make_error(Err::DomainMismatch,
                              "a server does not federate with its own domain");
        }
    }

    UnixTime now = clock.now();
    auto authority = crypto::Authority::create(config.domain, config.authority, now);
    if (!authority.ok()) return authority.take_error();

    auto server_id = SpiffeId::make(config.domain, {});
    if (!server_id.ok()) return server_id.take_error();
    auto server_svid = authority.value().mint_x509_svid(server_id.value(),
                                                        config.server_svid_ttl_seconds, now);
    if (!server_svid.ok()) return server_svid.take_error();

    std::string entries_path = config.entries_path;
    std::unique_ptr<ControlPlane> plane(
        new ControlPlane(std::move(config), authority.take(), server_svid.take(), clock));

    if (!entries_path.empty()) {
        std::ifstream in(entries_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
            if (doc.is_discarded()) {
                return make_error(Err::InvalidEntry, "bad entry line in " + entries_path);
            }
            auto entry = RegistrationEntry::from_json(doc);
            if (!entry.ok()) return entry.take_error();
            std::unique_lock lock(plane->mu_);
            auto registered = plane->register_entry_locked(entry.take(), /*persist=*/false);
            if (!registered.ok()) return registered.take_error();
        }
    }
    return plane;
}

crypto::X509Svid ControlPlane::server_svid() const {
    std::shared_lock lock(mu_);
    return server_svid_;
}

std::string ControlPlane::duplicate_key(const RegistrationEntry& entry) const {
    std::string key = entry.spiffe_id.canonical() + "|" + entry.parent_id.canonical();
    for (const auto& selector : entry.selectors) key += "|" + selector.to_string();
    return key;
}

Result<std::string> ControlPlane::register_entry_locked(RegistrationEntry entry, bool persist) {
    if (auto v = entry.validate(); !v.ok()) return v.take_error();
    if (entry.spiffe_id.trust_domain() != config_.domain) {
        return make_error(Err::ForeignDomain, entry.spiffe_id.canonical() + " is outside " +
                                                  config_.domain.name());
    }
    if (entry.is_node_entry && entry.parent_id != server_id_) {
        return make_error(Err::InvalidEntry,
                          "node entries must be parented to " + server_id_.canonical());
    }
    std::string key = duplicate_key(entry);
    if (entry_keys_.contains(key)) {
        return make_error(Err::DuplicateEntry, "identical binding already registered");
    }
    if (entry.entry_id.empty()) {
        char generated[16];
        std::snprintf(generated, sizeof(generated), "entry-%06llu",
                      static_cast<unsigned long long>(next_entry_number_++));
        entry.entry_id = generated;
    }
    if (!entry_ids_.insert(entry.entry_id).second) {
        return make_error(Err::DuplicateEntry, "entry id " + entry.entry_id + " already in use");
    }
    entry_keys_.insert(std::move(key));
    entries_.push_back(entry);

    if (persist && !config_.entries_path.empty()) {
        std::ofstream out(config_.entries_path, std::ios::app);
        out << entry.to_json().dump() << "\n";
    }
    return entry.entry_id;
}

Result<std::string> ControlPlane::register_entry(RegistrationEntry entry) {
    std::unique_lock lock(mu_);
    return register_entry_locked(std::move(entry), /*persist=*/true);
}

std::vector<RegistrationEntry> ControlPlane::entries() const {
    std::shared_lock lock(mu_);
    return entries_;
}

Result<NodeAttestOutcome> ControlPlane::node_attest(const std::string& join_token, UnixTime now) {
    const JoinCredential* credential = nullptr;
    for (const auto& candidate : config_.join_credentials) {
        if (candidate.token == join_token) credential = &candidate;
    }
    if (!credential) {
        return make_error(Err::NoMatch, "unknown join credential");
    }

    std::shared_lock lock(mu_);
    auto attested = attest_node(entries_, server_id_, credential->selectors, now);
    if (!attested.ok()) return attested.take_error();

    const RegistrationEntry* node_entry = nullptr;
    for (const auto& entry : entries_) {
        if (entry.entry_id == attested.value().matched_entry_id) node_entry = &entry;
    }
    auto svid = authority_.mint_x509_svid(attested.value().spiffe_id, node_entry->ttl_seconds, now);
    if (!svid.ok()) return svid.take_error();

    NodeAttestOutcome outcome{svid.take(), authority_.bundle(), {}};
    for (const auto& entry : entries_) {
        if (!entry.is_node_entry && entry.parent_id == attested.value().spiffe_id) {
            outcome.agent_entries.push_back(entry);
        }
    }
    std::sort(outcome.agent_entries.begin(), outcome.agent_entries.end(),
              [](const RegistrationEntry& a, const RegistrationEntry& b) {
                  return a.entry_id < b.entry_id;
              });
    return outcome;
}

SignOutcome ControlPlane::sign_one_locked(const SpiffeId& agent, const SignRequestItem& item,
                                          UnixTime now) {
    const RegistrationEntry* authorized = nullptr;
    for (const auto& entry : entries_) {
        if (!entry.is_node_entry && entry.spiffe_id == item.spiffe_id &&
            entry.parent_id == agent) {
            authorized = &entry;
        }
    }
    if (!authorized) {
        return Error{Err::NotAuthorizedForId,
                     item.spiffe_id.canonical() + " has no entry parented to " + agent.canonical(),
                     std::nullopt};
    }
    if (item.kind == SignRequestItem::Kind::X509) {
        auto svid = authority_.mint_x509_svid(item.spiffe_id, authorized->ttl_seconds, now);
        if (!svid.ok()) return svid.take_error();
        return SignedSvid{svid.take()};
    }
    std::int64_t ttl = item.jwt_ttl_seconds.value_or(config_.authority.default_jwt_ttl_seconds);
    auto svid = authority_.mint_jwt_svid(item.spiffe_id, item.audiences, ttl, now);
    if (!svid.ok()) return svid.take_error();
    return SignedSvid{svid.take()};
}

std::vector<SignOutcome> ControlPlane::sign(const SpiffeId& agent,
                                            std::span<const SignRequestItem> requests,
                                            UnixTime now) {
    std::shared_lock lock(mu_);
    std::vector<SignOutcome> outcomes;
    outcomes.reserve(requests.size());
    for (const auto& item : requests) {
        outcomes.push_back(sign_one_locked(agent, item, now));
    }
    return outcomes;
}

std::string ControlPlane::serve_bundle() const {
    std::shared_lock lock(mu_);
    return crypto::serialize_bundle(authority_.bundle()).take();
}

crypto::TrustBundle ControlPlane::bundle() const {
    std::shared_lock lock(mu_);
    return authority_.bundle();
}

std::vector<crypto::TrustBundle> ControlPlane::federated_bundles() const {
    std::shared_lock lock(mu_);
    std::vector<crypto::TrustBundle> out;
    for (const auto& [domain, state] : federated_) out.push_back(state.bundle);
    return out;
}

std::optional<UnixTime> ControlPlane::federated_fetched_at(const TrustDomain& peer) const {
    std::shared_lock lock(mu_);
    auto it = federated_.find(peer);
    if (it == federated_.end() || it->second.bootstrap_only) return std::nullopt;
    return it->second.fetched_at;
}

std::vector<crypto::TrustBundle> ControlPlane::verification_bundles() const {
    std::shared_lock lock(mu_);
    std::vector<crypto::TrustBundle> out{authority_.bundle()};
    for (const auto& [domain, state] : federated_) out.push_back(state.bundle);
    return out;
}

Result<void> ControlPlane::add_federation_peer(FederationPeerConfig peer) {
    if (peer.bootstrap.trust_domain != peer.domain) {
        return make_error(Err::DomainMismatch, "bootstrap bundle for " + peer.domain.name() +
                                                   " names domain " +
                                                   peer.bootstrap.trust_domain.name());
    }
    if (peer.domain == config_.domain) {
        return make_error(Err::DomainMismatch, "a server does not federate with its own domain");
    }
    std::unique_lock lock(mu_);
    std::erase_if(config_.peers, [&](const FederationPeerConfig& existing) {
        return existing.domain == peer.domain;
    });
    federated_.insert_or_assign(peer.domain, FederatedState{peer.bootstrap, 0, true});
    config_.peers.push_back(std::move(peer));
    return {};
}

Result<crypto::TrustBundle> ControlPlane::refresh_federated_bundle(const TrustDomain& peer,
                                                                   UnixTime now) {
    const FederationPeerConfig* peer_config = nullptr;
    for (const auto& candidate : config_.peers) {
        if (candidate.domain == peer) peer_config = &candidate;
    }
    if (!peer_config) {
        return make_error(Err::Internal, "no federation peer configured for " + peer.name());
    }
    if (!dialer_) {
        return make_error(Err::PeerUnreachable, "no dialer configured");
    }

    crypto::X509Svid client_svid = server_svid();
    crypto::TrustBundle held = [&] {
        std::shared_lock lock(mu_);
        return federated_.at(peer).bundle;
    }();

    wire::DialOptions options;
    options.client_identity = &client_svid;
    options.server_trust = {held};
    options.now = now;
    auto connection = dialer_(peer_config->endpoint, options);
    if (!connection.ok()) {
        const Error& cause = connection.error();
        if (cause.code == Err::TlsAuthFailure) return connection.take_error();
        return wrap_error(Err::PeerUnreachable, "dial " + peer_config->endpoint, cause);
    }

    auto response = connection.value()->roundtrip({{"op", "bundle"}});
    if (!response.ok()) {
        return wrap_error(Err::PeerUnreachable, "bundle exchange failed", response.error());
    }
    auto result = wire::result_of(response.value());
    if (!result.ok()) {
        const Error& cause = result.error();
        if (cause.code == Err::TlsAuthFailure) return result.take_error();
        return wrap_error(Err::PeerUnreachable, "bundle exchange refused", cause);
    }
    if (!result.value().contains("bundle")) {
        return make_error(Err::MalformedBundle, "peer response lacks a bundle");
    }
    auto fetched = crypto::bundle_from_json(result.value()["bundle"]);
    if (!fetched.ok()) return fetched.take_error();

    if (fetched.value().trust_domain != peer) {
        return make_error(Err::DomainMismatch, "peer served a bundle for " +
                                                   fetched.value().trust_domain.name());
    }

    std::unique_lock lock(mu_);
    FederatedState& state = federated_.at(peer);
    if (fetched.value().sequence < state.bundle.sequence) {
        // Fail closed on rollback; the held bundle stays untouched.
        return make_error(Err::SequenceRegression,
                          "peer served sequence " + std::to_string(fetched.value().sequence) +
                              " below held " + std::to_string(state.bundle.sequence));
    }
    state.bundle = fetched.value();
    state.fetched_at = now;
    state.bootstrap_only = false;
    return fetched.take();
}

Result<void> ControlPlane::rotate_jwt_key(UnixTime now) {
    std::unique_lock lock(mu_);
    return authority_.rotate_jwt_key(now);
}

void ControlPlane::tick(UnixTime now) {
    std::unique_lock lock(mu_);
    authority_.prune_retired_jwt_keys(now);

    std::int64_t lifetime = config_.server_svid_ttl_seconds;
    auto threshold =
        server_svid_minted_at_ + static_cast<UnixTime>(lifetime * config_.rotation_threshold);
    if (now >= threshold) {
        auto fresh = authority_.mint_x509_svid(server_id_, lifetime, now);
        if (fresh.ok()) {
            server_svid_ = fresh.take();
            server_svid_minted_at_ = now;
        }
    }
}

// ---------------------------------------------------------------------------
// Wire adapters

namespace {

json svid_result_json(const SignedSvid& svid) {
    if (std::holds_alternative<crypto::X509Svid>(svid)) {
        return {{"ok", true},
                {"kind", "x509"},
                {"svid", crypto::x509_svid_to_json(std::get<crypto::X509Svid>(svid))}};
    }
    return {{"ok", true},
            {"kind", "jwt"},
            {"svid", crypto::jwt_svid_to_json(std::get<crypto::JwtSvid>(svid))}};
}

Result<SignRequestItem> sign_item_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("spiffe_id") || !doc.contains("kind")) {
        return make_error(Err::MalformedFrame, "sign request item is missing fields");
    }
    auto id = SpiffeId::parse(doc["spiffe_id"].get<std::string>());
    if (!id.ok()) return id.take_error();
    SignRequestItem item{id.take(), SignRequestItem::Kind::X509, {}, std::nullopt};
    std::string kind = doc["kind"].get<std::string>();
    if (kind == "jwt") {
        item.kind = SignRequestItem::Kind::Jwt;
        if (doc.contains("audiences")) {
            item.audiences = doc["audiences"].get<std::vector<std::string>>();
        }
        if (doc.contains("ttl")) item.jwt_ttl_seconds = doc["ttl"].get<std::int64_t>();
    } else if (kind != "x509") {
        return make_error(Err::MalformedFrame, "sign request kind must be x509 or jwt");
    }
    return item;
}

}  // namespace

json ControlPlane::handle(const json& request, const wire::ConnContext& ctx) {
    if (!request.is_object() || !request.contains("op") || !request["op"].is_string()) {
        return wire::error_response(make_error(Err::MalformedFrame, "request lacks an op"));
    }
    const std::string op = request["op"].get<std::string>();
    const UnixTime now = clock_.now();

    if (op == "node_attest") {
        if (!request.contains("join_token") || !request["join_token"].is_string()) {
            return wire::error_response(
                make_error(Err::MalformedFrame, "node_attest needs join_token"));
        }
        auto outcome = node_attest(request["join_token"].get<std::string>(), now);
        if (!outcome.ok()) return wire::error_response(outcome.error());
        json entries_doc = json::array();
        for (const auto& entry : outcome.value().agent_entries) {
            entries_doc.push_back(entry.to_json());
        }
        return wire::ok_response(
            {{"svid", crypto::x509_svid_to_json(outcome.value().agent_svid)},
             {"bundle", crypto::bundle_to_json(outcome.value().bundle)},
             {"entries", std::move(entries_doc)}});
    }

    if (op == "sign") {
        if (!ctx.peer_id) {
            return wire::error_response(
                make_error(Err::UnknownAgent, "sign requires an mTLS-authenticated agent"));
        }
        if (ctx.peer_id->trust_domain() != config_.domain) {
            return wire::error_response(make_error(
                Err::UnknownAgent, "agent " + ctx.peer_id->canonical() + " is foreign"));
        }
        if (!request.contains("requests") || !request["requests"].is_array()) {
            return wire::error_response(
                make_error(Err::MalformedFrame, "sign needs a requests array"));
        }
        std::vector<SignRequestItem> items;
        for (const auto& doc : request["requests"]) {
            auto item = sign_item_from_json(doc);
            if (!item.ok()) return wire::error_response(item.error());
            items.push_back(item.take());
        }
        auto outcomes = sign(*ctx.peer_id, items, now);
        json results = json::array();
        for (const auto& outcome : outcomes) {
            if (outcome.ok()) {
                results.push_back(svid_result_json(outcome.value()));
            } else {
                results.push_back(
                    {{"ok", false},
                     {"error", wire::error_response(outcome.error())["error"]}});
            }
        }
        return wire::ok_response({{"results", std::move(results)}});
    }

    if (op == "bundle") {
        json result = {{"bundle", crypto::bundle_to_json(bundle())}};
        if (request.value("include_federated", false)) {
            json federated = json::array();
            for (const auto& peer_bundle : federated_bundles()) {
                federated.push_back(crypto::bundle_to_json(peer_bundle));
            }
            result["federated"] = std::move(federated);
        }
        return wire::ok_response(std::move(result));
    }

    if (op == "register_entry") {
        if (!request.contains("entry")) {
            return wire::error_response(
                make_error(Err::MalformedFrame, "register_entry needs an entry"));
        }
        auto entry = RegistrationEntry::from_json(request["entry"]);
        if (!entry.ok()) return wire::error_response(entry.error());
        auto registered = register_entry(entry.take());
        if (!registered.ok()) return wire::error_response(registered.error());
        return wire::ok_response({{"entry_id", registered.take()}});
    }

    if (op == "list_entries") {
        json entries_doc = json::array();
        for (const auto& entry : entries()) entries_doc.push_back(entry.to_json());
        return wire::ok_response({{"entries", std::move(entries_doc)}});
    }

    return wire::error_response(make_error(Err::MalformedFrame, "unknown op " + op));
}

json ControlPlane::FederationEndpoint::handle(const json& request, const wire::ConnContext& ctx) {
    if (!ctx.peer_id) {
        return wire::error_response(make_error(
            Err::TlsAuthFailure, "federation endpoint requires a client certificate"));
    }
    if (!request.is_object() || request.value("op", "") != "bundle") {
        return wire::error_response(
            make_error(Err::MalformedFrame, "federation endpoint serves op bundle only"));
    }
    return wire::ok_response({{"bundle", crypto::bundle_to_json(owner_.bundle())}});
}

wire::ServerPort ControlPlane::api_port() {
    wire::ServerPort port;
    port.endpoint = this;
    port.identity = &server_svid_;
    port.client_trust = [this] { return verification_bundles(); };
    port.require_client_cert = false;
    return port;
}

wire::ServerPort ControlPlane::federation_port() {
    wire::ServerPort port;
    port.endpoint = &federation_endpoint_;
    port.identity = &server_svid_;
    port.client_trust = [this] { return verification_bundles(); };
    port.require_client_cert = true;
    return port;
}

}  // namespace minispiffe
