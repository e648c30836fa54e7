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

#include "minispiffe/wire.hpp"

namespace minispiffe::wire {

using nlohmann::json;

std::vector<std::uint8_t> encode_frame(std::string_view payload) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + payload.size());
    std::uint32_t length = static_cast<std::uint32_t>(payload.size());
    out.push_back(static_cast<std::uint8_t>(length >> 24));
    out.push_back(static_cast<std::uint8_t>(length >> 16));
    out.push_back(static_cast<std::uint8_t>(length >> 8));
    out.push_back(static_cast<std::uint8_t>(length));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Result<std::optional<std::string>> try_decode_frame(std::span<const std::uint8_t> buffer,
                                                    std::size_t& consumed) {
    if (buffer.size() < 4) return std::optional<std::string>{};
    std::uint32_t length = (static_cast<std::uint32_t>(buffer[0]) << 24) |
                           (static_cast<std::uint32_t>(buffer[1]) << 16) |
                           (static_cast<std::uint32_t>(buffer[2]) << 8) |
                           static_cast<std::uint32_t>(buffer[3]);
    if (length == 0) {
        return make_error(Err::MalformedFrame, "zero-length frame");
    }
    if (length > kMaxFrameBytes) {
        return make_error(Err::MalformedFrame,
                          "declared frame length " + std::to_string(length) + " exceeds limit");
    }
    if (buffer.size() < 4 + static_cast<std::size_t>(length)) {
        return std::optional<std::string>{};
    }
    consumed += 4 + length;
    return std::optional<std::string>{
        std::string(reinterpret_cast<const char*>(buffer.data()) + 4, length)};
}

json ok_response(json result) {
    return {{"ok", true}, {"result", std::move(result)}};
}

json error_response(const Error& error) {
    json doc = {{"code", std::string(err_name(error.code))}, {"message", error.message}};
    if (error.cause) doc["cause"] = std::string(err_name(*error.cause));
    return {{"ok", false}, {"error", std::move(doc)}};
}

Error error_from_json(const json& doc) {
    Error error{Err::Internal, "malformed error document", std::nullopt};
    if (!doc.is_object()) return error;
    if (doc.contains("code") && doc["code"].is_string()) {
        if (auto code = err_from_name(doc["code"].get<std::string>())) error.code = *code;
    }
    if (doc.contains("message") && doc["message"].is_string()) {
        error.message = doc["message"].get<std::string>();
    }
    if (doc.contains("cause") && doc["cause"].is_string()) {
        error.cause = err_from_name(doc["cause"].get<std::string>());
    }
    return error;
}

Result<json> result_of(const json& response) {
    if (!response.is_object() || !response.contains("ok") || !response["ok"].is_boolean()) {
        return make_error(Err::MalformedFrame, "response is not a valid envelope");
    }
    if (!response["ok"].get<bool>()) {
        if (!response.contains("error")) {
            return make_error(Err::Internal, "error response without error body");
        }
        return error_from_json(response["error"]);
    }
    return response.value("result", json::object());
}

Result<std::unique_ptr<InProcessConnection>> InProcessConnection::open(const ServerPort& port,
                                                                       const DialOptions& options) {
    ConnContext ctx;
    ctx.workload_handle = options.workload_handle;

    // Client certificate, verified against the port's bundle set. Mirrors a
    // TLS server with verification enabled: a presented-but-unverifiable
    // certificate aborts the handshake.
    if (port.require_client_cert && !options.client_identity) {
        return make_error(Err::TlsAuthFailure, "endpoint requires a client certificate");
    }
    if (options.client_identity && port.client_trust) {
        auto trust = port.client_trust();
        auto peer = crypto::verify_x509_svid_any(options.client_identity->leaf_der,
                                                 options.client_identity->chain_der, trust,
                                                 options.now);
        if (!peer.ok()) {
            return wrap_error(Err::TlsAuthFailure, "client certificate rejected", peer.error());
        }
        ctx.peer_id = peer.take();
    } else if (port.require_client_cert) {
        return make_error(Err::TlsAuthFailure, "endpoint has no client trust configured");
    }

    // Server certificate, verified by the client.
    if (options.verify_server) {
        if (!port.identity) {
            return make_error(Err::TlsAuthFailure, "endpoint presents no identity");
        }
        auto server = crypto::verify_x509_svid_any(port.identity->leaf_der,
                                                   port.identity->chain_der, options.server_trust,
                                                   options.now);
        if (!server.ok()) {
            return wrap_error(Err::TlsAuthFailure, "server certificate rejected", server.error());
        }
    }
    return std::unique_ptr<InProcessConnection>(new InProcessConnection(port, std::move(ctx)));
}

Result<json> InProcessConnection::roundtrip(const json& request) {
    // Round through the real wire encoding in both directions so in-process
    // use exercises exactly the bytes a socket would carry.
    auto request_frame = encode_frame(request.dump());
    std::size_t consumed = 0;
    auto request_payload = try_decode_frame(request_frame, consumed);
    if (!request_payload.ok()) return request_payload.take_error();
    json decoded_request =
        json::parse(*request_payload.value(), nullptr, /*allow_exceptions=*/false);
    if (decoded_request.is_discarded()) {
        return make_error(Err::MalformedFrame, "request is not valid JSON");
    }

    json response = port_.endpoint->handle(decoded_request, ctx_);

    auto response_frame = encode_frame(response.dump());
    consumed = 0;
    auto response_payload = try_decode_frame(response_frame, consumed);
    if (!response_payload.ok()) return response_payload.take_error();
    json decoded_response =
        json::parse(*response_payload.value(), nullptr, /*allow_exceptions=*/false);
    if (decoded_response.is_discarded()) {
        return make_error(Err::MalformedFrame, "response is not valid JSON");
    }
    return decoded_response;
}

void InProcessNetwork::bind(std::string address, ServerPort port) {
    ports_.insert_or_assign(std::move(address), port);
}

void InProcessNetwork::unbind(const std::string& address) {
    ports_.erase(address);
}

Dialer InProcessNetwork::dialer() const {
    return [this](const std::string& address,
                  const DialOptions& options) -> Result<std::unique_ptr<ClientConnection>> {
        auto it = ports_.find(address);
        if (it == ports_.end()) {
            return make_error(Err::PeerUnreachable, "nothing listens on " + address);
        }
        auto connection = InProcessConnection::open(it->second, options);
        if (!connection.ok()) return connection.take_error();
        return std::unique_ptr<ClientConnection>(connection.take().release());
    };
}

}  // namespace minispiffe::wire
