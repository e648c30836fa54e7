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

#include <vector>

#include "minispiffe/clock.hpp"
#include "minispiffe/crypto/bundle.hpp"
#include "minispiffe/crypto/x509.hpp"
#include "minispiffe/result.hpp"
#include "minispiffe/spiffe_id.hpp"

namespace minispiffe {

struct HandshakeParty {
    const crypto::X509Svid* svid = nullptr;
    // Verifier bundle set: own domain plus federated domains.
    std::vector<crypto::TrustBundle> trust;
};

struct HandshakeOutcome {
    SpiffeId initiator_observed_peer;
    SpiffeId responder_observed_peer;
};

/// Runs a real mutual-TLS handshake between the two parties over in-memory
/// BIOs. Both sides verify the peer chain with verify_x509_svid_any against
/// their own bundle set at `now`, so handshake outcomes agree exactly with
/// direct SVID verification. Returns each side's authenticated peer ID.
/// Errors: HandshakeFailed with the verification cause preserved
/// (UnknownRoot, Expired, NotYetValid, NoUriSan, ...).
Result<HandshakeOutcome> mutual_handshake(const HandshakeParty& initiator,
                                          const HandshakeParty& responder, UnixTime now);

}  // namespace minispiffe
