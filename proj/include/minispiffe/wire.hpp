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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "minispiffe/clock.hpp"
#include "minispiffe/crypto/bundle.hpp"
#include "minispiffe/crypto/x509.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe::wire {

/// Every message on every endpoint is a 4-byte big-endian length followed
/// by that many bytes of UTF-8 JSON.
inline constexpr std::size_t kMaxFrameBytes = 16 * 1024 * 1024;

std::vector<std::uint8_t> encode_frame(std::string_view payload);

/// Incremental decode. Returns the payload once a whole frame is buffered
/// (consumed is advanced past it), nullopt when more bytes are needed.
/// Errors: MalformedFrame (oversized or zero-length declared frames).
Result<std::optional<std::string>> try_decode_frame(std::span<const std::uint8_t> buffer,
                                                    std::size_t& consumed);

// Request envelope: {"op": ..., <op-specific fields>}.
// Response envelope: {"ok": bool, "result": ...} or {"ok": false, "error":
// {"code", "message"[, "cause"]}}.
nlohmann::json ok_response(nlohmann::json result);
nlohmann::json error_response(const Error& error);
Error error_from_json(const nlohmann::json& doc);

/// Unwraps a response envelope into its result or the carried error.
Result<nlohmann::json> result_of(const nlohmann::json& response);

/// Facts a transport binds to a connection at establishment time.
struct ConnContext {
    std::optional<SpiffeId> peer_id;              // mTLS-authenticated client
    std::optional<std::string> workload_handle;   // workload API channels only
};

/// A request/response service reachable over the framed JSON protocol.
class Endpoint {
  public:
    virtual ~Endpoint() = default;
    virtual nlohmann::json handle(const nlohmann::json& request, const ConnContext& ctx) = 0;
};

class ClientConnection {
  public:
    virtual ~ClientConnection() = default;
    virtual Result<nlohmann::json> roundtrip(const nlohmann::json& request) = 0;
};

/// Server-side description of a listening endpoint, shared by the
/// in-process and socket transports.
struct ServerPort {
    Endpoint* endpoint = nullptr;
    // Identity presented to clients; null for plaintext local ports.
    const crypto::X509Svid* identity = nullptr;
    // Bundle set for authenticating client certificates; unset means client
    // certificates are not requested.
    std::function<std::vector<crypto::TrustBundle>()> client_trust;
    bool require_client_cert = false;
};

struct DialOptions {
    const crypto::X509Svid* client_identity = nullptr;  // presented when set
    std::vector<crypto::TrustBundle> server_trust;      // roots to verify the server
    bool verify_server = true;                          // false for plaintext local ports
    std::optional<std::string> workload_handle;
    UnixTime now = 0;  // verification instant
};

/// Connects to an address. Implementations: the simulator's in-process
/// registry and the TLS/TCP socket dialer.
using Dialer = std::function<Result<std::unique_ptr<ClientConnection>>(const std::string& address,
                                                                       const DialOptions& options)>;

/// In-process connection that still frames, serializes and re-parses every
/// message, and authenticates both sides with the same certificate checks
/// the TLS transport uses. Wire-format behavior is therefore identical to
/// the socket path.
class InProcessConnection final : public ClientConnection {
  public:
    /// Errors: TlsAuthFailure (either side fails certificate verification).
    static Result<std::unique_ptr<InProcessConnection>> open(const ServerPort& port,
                                                             const DialOptions& options);

    Result<nlohmann::json> roundtrip(const nlohmann::json& request) override;

  private:
    InProcessConnection(const ServerPort& port, ConnContext ctx) : port_(port), ctx_(std::move(ctx)) {}

    ServerPort port_;
    ConnContext ctx_;
};

/// Address registry for in-process deployments: binds named addresses to
/// server ports and hands out a Dialer that resolves against them.
class InProcessNetwork {
  public:
    void bind(std::string address, ServerPort port);
    void unbind(const std::string& address);

    /// Dialing an unbound address fails with PeerUnreachable.
    [[nodiscard]] Dialer dialer() const;

  private:
    std::map<std::string, ServerPort> ports_;
};

}  // namespace minispiffe::wire
