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

#include "minispiffe/handshake.hpp"

#include <optional>

#include <openssl/bio.h>
#include <openssl/err.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>

#include "minispiffe/crypto/openssl_util.hpp"

namespace minispiffe {

namespace {

using crypto::EvpPkeyPtr;
using crypto::SslCtxPtr;
using crypto::SslPtr;
using crypto::X509Ptr;

// Per-side verification state handed to the whole-chain verify callback.
struct SideState {
    const std::vector<crypto::TrustBundle>* trust = nullptr;
    UnixTime now = 0;
    std::optional<SpiffeId> observed_peer;
    std::optional<Error> failure;
};

std::vector<std::uint8_t> x509_to_der(X509* cert) {
    int len = i2d_X509(cert, nullptr);
    std::vector<std::uint8_t> der(len > 0 ? static_cast<std::size_t>(len) : 0);
    if (len > 0) {
        std::uint8_t* out = der.data();
        i2d_X509(cert, &out);
    }
    return der;
}

// Replaces OpenSSL's chain building entirely: the presented chain is
// verified by the same routine used for direct SVID verification, so TLS
// acceptance and verify_x509_svid agree by construction.
int verify_peer_chain(X509_STORE_CTX* store_ctx, void* arg) {
    auto* state = static_cast<SideState*>(arg);

    X509* leaf = X509_STORE_CTX_get0_cert(store_ctx);
    if (!leaf) {
        state->failure = make_error(Err::HandshakeFailed, "peer presented no certificate");
        X509_STORE_CTX_set_error(store_ctx, X509_V_ERR_APPLICATION_VERIFICATION);
        return 0;
    }
    std::vector<std::uint8_t> leaf_der = x509_to_der(leaf);

    std::vector<std::vector<std::uint8_t>> intermediates;
    STACK_OF(X509)* presented = X509_STORE_CTX_get0_untrusted(store_ctx);
    for (int i = 0; i < sk_X509_num(presented); ++i) {
        X509* cert = sk_X509_value(presented, i);
        if (X509_cmp(cert, leaf) == 0) continue;
        intermediates.push_back(x509_to_der(cert));
    }

    auto verified =
        crypto::verify_x509_svid_any(leaf_der, intermediates, *state->trust, state->now);
    if (!verified.ok()) {
        state->failure = verified.take_error();
        X509_STORE_CTX_set_error(store_ctx, X509_V_ERR_APPLICATION_VERIFICATION);
        return 0;
    }
    state->observed_peer = verified.take();
    return 1;
}

Result<SslCtxPtr> make_side_context(const HandshakeParty& party, SideState& state,
                                    bool is_server) {
    SslCtxPtr ctx(SSL_CTX_new(is_server ? TLS_server_method() : TLS_client_method()));
    if (!ctx) return make_error(Err::Internal, "SSL_CTX_new failed: " + crypto::openssl_errors());
    SSL_CTX_set_min_proto_version(ctx.get(), TLS1_2_VERSION);

    const std::uint8_t* p = party.svid->leaf_der.data();
    X509Ptr cert(d2i_X509(nullptr, &p, static_cast<long>(party.svid->leaf_der.size())));
    if (!cert || SSL_CTX_use_certificate(ctx.get(), cert.get()) != 1) {
        return make_error(Err::Internal, "certificate load failed: " + crypto::openssl_errors());
    }
    for (const auto& der : party.svid->chain_der) {
        const std::uint8_t* q = der.data();
        X509* extra = d2i_X509(nullptr, &q, static_cast<long>(der.size()));
        if (!extra || SSL_CTX_add_extra_chain_cert(ctx.get(), extra) != 1) {
            X509_free(extra);
            return make_error(Err::Internal, "chain load failed: " + crypto::openssl_errors());
        }
    }
    if (SSL_CTX_use_PrivateKey(ctx.get(), party.svid->key.handle()) != 1 ||
        SSL_CTX_check_private_key(ctx.get()) != 1) {
        return make_error(Err::Internal, "private key load failed: " + crypto::openssl_errors());
    }

    SSL_CTX_set_cert_verify_callback(ctx.get(), verify_peer_chain, &state);
    int mode = SSL_VERIFY_PEER;
    if (is_server) mode |= SSL_VERIFY_FAIL_IF_NO_PEER_CERT;
    SSL_CTX_set_verify(ctx.get(), mode, nullptr);
    return ctx;
}

}  // namespace

Result<HandshakeOutcome> mutual_handshake(const HandshakeParty& initiator,
                                          const HandshakeParty& responder, UnixTime now) {
    if (!initiator.svid || !responder.svid) {
        return make_error(Err::HandshakeFailed, "both parties need an SVID");
    }

    SideState initiator_state{&initiator.trust, now, std::nullopt, std::nullopt};
    SideState responder_state{&responder.trust, now, std::nullopt, std::nullopt};

    auto initiator_ctx = make_side_context(initiator, initiator_state, /*is_server=*/false);
    if (!initiator_ctx.ok()) return initiator_ctx.take_error();
    auto responder_ctx = make_side_context(responder, responder_state, /*is_server=*/true);
    if (!responder_ctx.ok()) return responder_ctx.take_error();

    SslPtr client(SSL_new(initiator_ctx.value().get()));
    SslPtr server(SSL_new(responder_ctx.value().get()));
    if (!client || !server) {
        return make_error(Err::Internal, "SSL_new failed: " + crypto::openssl_errors());
    }

    BIO* client_bio = nullptr;
    BIO* server_bio = nullptr;
    if (BIO_new_bio_pair(&client_bio, 0, &server_bio, 0) != 1) {
        return make_error(Err::Internal, "BIO pair failed: " + crypto::openssl_errors());
    }
    SSL_set_bio(client.get(), client_bio, client_bio);
    SSL_set_bio(server.get(), server_bio, server_bio);
    SSL_set_connect_state(client.get());
    SSL_set_accept_state(server.get());

    bool client_done = false;
    bool server_done = false;
    bool failed = false;
    for (int round = 0; round < 64 && !(client_done && server_done) && !failed; ++round) {
        for (SSL* side : {client.get(), server.get()}) {
            bool& done = side == client.get() ? client_done : server_done;
            if (done) continue;
            int rc = SSL_do_handshake(side);
            if (rc == 1) {
                done = true;
                continue;
            }
            int err = SSL_get_error(side, rc);
            if (err != SSL_ERROR_WANT_READ && err != SSL_ERROR_WANT_WRITE) {
                failed = true;
                break;
            }
        }
    }
    ERR_clear_error();

    if (!(client_done && server_done)) {
        // Prefer the recorded verification cause over a generic TLS alert.
        if (responder_state.failure) {
            return wrap_error(Err::HandshakeFailed, "responder rejected initiator",
                              *responder_state.failure);
        }
        if (initiator_state.failure) {
            return wrap_error(Err::HandshakeFailed, "initiator rejected responder",
                              *initiator_state.failure);
        }
        return make_error(Err::HandshakeFailed, "TLS handshake did not complete");
    }
    if (!initiator_state.observed_peer || !responder_state.observed_peer) {
        return make_error(Err::HandshakeFailed, "handshake completed without peer verification");
    }
    return HandshakeOutcome{std::move(*initiator_state.observed_peer),
                            std::move(*responder_state.observed_peer)};
}

}  // namespace minispiffe
