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

#include "minispiffe/crypto/keys.hpp"

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/ecdsa.h>
#include <openssl/x509.h>

#include "minispiffe/crypto/openssl_util.hpp"

namespace minispiffe::crypto {

namespace {

using EvpPkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, OsslFree<EVP_PKEY_CTX, EVP_PKEY_CTX_free>>;
using EcdsaSigPtr = std::unique_ptr<ECDSA_SIG, OsslFree<ECDSA_SIG, ECDSA_SIG_free>>;

constexpr std::size_t kEcdsaComponentBytes = 32;

int evp_id_for(KeyAlgorithm alg) {
    return alg == KeyAlgorithm::Ed25519 ? EVP_PKEY_ED25519 : EVP_PKEY_EC;
}

// DER ECDSA-Sig-Value -> fixed-size r||s.
Result<std::vector<std::uint8_t>> ecdsa_der_to_raw(std::span<const std::uint8_t> der) {
    const std::uint8_t* p = der.data();
    EcdsaSigPtr sig(d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(der.size())));
    if (!sig) {
        return make_error(Err::Internal, "ECDSA signature decode failed: " + openssl_errors());
    }
    const BIGNUM* r = nullptr;
    const BIGNUM* s = nullptr;
    ECDSA_SIG_get0(sig.get(), &r, &s);
    std::vector<std::uint8_t> raw(2 * kEcdsaComponentBytes);
    if (BN_bn2binpad(r, raw.data(), kEcdsaComponentBytes) < 0 ||
        BN_bn2binpad(s, raw.data() + kEcdsaComponentBytes, kEcdsaComponentBytes) < 0) {
        return make_error(Err::Internal, "ECDSA component exceeds 32 bytes");
    }
    return raw;
}

// r||s -> DER ECDSA-Sig-Value. Returns empty on malformed input.
std::vector<std::uint8_t> ecdsa_raw_to_der(std::span<const std::uint8_t> raw) {
    if (raw.size() != 2 * kEcdsaComponentBytes) return {};
    EcdsaSigPtr sig(ECDSA_SIG_new());
    BIGNUM* r = BN_bin2bn(raw.data(), kEcdsaComponentBytes, nullptr);
    BIGNUM* s = BN_bin2bn(raw.data() + kEcdsaComponentBytes, kEcdsaComponentBytes, nullptr);
    if (!sig || !r || !s || ECDSA_SIG_set0(sig.get(), r, s) != 1) {
        BN_free(r);
        BN_free(s);
        return {};
    }
    int len = i2d_ECDSA_SIG(sig.get(), nullptr);
    if (len <= 0) return {};
    std::vector<std::uint8_t> der(static_cast<std::size_t>(len));
    std::uint8_t* out = der.data();
    i2d_ECDSA_SIG(sig.get(), &out);
    return der;
}

}  // namespace

std::string_view jose_alg_name(KeyAlgorithm alg) {
    return alg == KeyAlgorithm::Ed25519 ? "EdDSA" : "ES256";
}

std::optional<KeyAlgorithm> key_algorithm_from_jose(std::string_view name) {
    if (name == "EdDSA") return KeyAlgorithm::Ed25519;
    if (name == "ES256") return KeyAlgorithm::EcdsaP256;
    return std::nullopt;
}

std::optional<KeyAlgorithm> key_algorithm_from_name(std::string_view name) {
    if (name == "Ed25519" || name == "ed25519") return KeyAlgorithm::Ed25519;
    if (name == "EcdsaP256" || name == "ecdsa-p256" || name == "p256") {
        return KeyAlgorithm::EcdsaP256;
    }
    return std::nullopt;
}

std::string_view key_algorithm_name(KeyAlgorithm alg) {
    return alg == KeyAlgorithm::Ed25519 ? "Ed25519" : "EcdsaP256";
}

Result<PrivateKey> PrivateKey::generate(KeyAlgorithm alg) {
    EvpPkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(evp_id_for(alg), nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) != 1) {
        return make_error(Err::Internal, "keygen init failed: " + openssl_errors());
    }
    if (alg == KeyAlgorithm::EcdsaP256 &&
        EVP_PKEY_CTX_set_ec_paramgen_curve_nid(ctx.get(), NID_X9_62_prime256v1) != 1) {
        return make_error(Err::Internal, "P-256 param setup failed: " + openssl_errors());
    }
    EVP_PKEY* raw = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &raw) != 1) {
        return make_error(Err::Internal, "keygen failed: " + openssl_errors());
    }
    return PrivateKey(alg, std::shared_ptr<EVP_PKEY>(raw, EVP_PKEY_free));
}

Result<PrivateKey> PrivateKey::from_pkcs8_der(KeyAlgorithm alg,
                                              std::span<const std::uint8_t> der) {
    const std::uint8_t* p = der.data();
    EvpPkeyPtr pkey(d2i_AutoPrivateKey(nullptr, &p, static_cast<long>(der.size())));
    if (!pkey) {
        return make_error(Err::MalformedToken, "private key decode failed: " + openssl_errors());
    }
    if (EVP_PKEY_base_id(pkey.get()) != evp_id_for(alg)) {
        return make_error(Err::UnsupportedAlgorithm, "key type does not match declared algorithm");
    }
    return PrivateKey(alg, std::shared_ptr<EVP_PKEY>(pkey.release(), EVP_PKEY_free));
}

std::vector<std::uint8_t> PrivateKey::public_spki_der() const {
    int len = i2d_PUBKEY(pkey_.get(), nullptr);
    std::vector<std::uint8_t> der(len > 0 ? static_cast<std::size_t>(len) : 0);
    if (len > 0) {
        std::uint8_t* out = der.data();
        i2d_PUBKEY(pkey_.get(), &out);
    }
    return der;
}

std::vector<std::uint8_t> PrivateKey::pkcs8_der() const {
    using P8Ptr = std::unique_ptr<PKCS8_PRIV_KEY_INFO,
                                  OsslFree<PKCS8_PRIV_KEY_INFO, PKCS8_PRIV_KEY_INFO_free>>;
    P8Ptr p8(EVP_PKEY2PKCS8(pkey_.get()));
    if (!p8) return {};
    int len = i2d_PKCS8_PRIV_KEY_INFO(p8.get(), nullptr);
    std::vector<std::uint8_t> der(len > 0 ? static_cast<std::size_t>(len) : 0);
    if (len > 0) {
        std::uint8_t* out = der.data();
        i2d_PKCS8_PRIV_KEY_INFO(p8.get(), &out);
    }
    return der;
}

Result<std::vector<std::uint8_t>> PrivateKey::sign(std::span<const std::uint8_t> payload) const {
    EvpMdCtxPtr ctx(EVP_MD_CTX_new());
    const EVP_MD* md = alg_ == KeyAlgorithm::Ed25519 ? nullptr : EVP_sha256();
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, md, nullptr, pkey_.get()) != 1) {
        return make_error(Err::Internal, "sign init failed: " + openssl_errors());
    }
    std::size_t len = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &len, payload.data(), payload.size()) != 1) {
        return make_error(Err::Internal, "sign sizing failed: " + openssl_errors());
    }
    std::vector<std::uint8_t> sig(len);
    if (EVP_DigestSign(ctx.get(), sig.data(), &len, payload.data(), payload.size()) != 1) {
        return make_error(Err::Internal, "sign failed: " + openssl_errors());
    }
    sig.resize(len);
    if (alg_ == KeyAlgorithm::EcdsaP256) {
        return ecdsa_der_to_raw(sig);
    }
    return sig;
}

bool verify_signature(KeyAlgorithm alg, std::span<const std::uint8_t> spki_der,
                      std::span<const std::uint8_t> payload,
                      std::span<const std::uint8_t> signature) {
    const std::uint8_t* p = spki_der.data();
    EvpPkeyPtr pkey(d2i_PUBKEY(nullptr, &p, static_cast<long>(spki_der.size())));
    if (!pkey || EVP_PKEY_base_id(pkey.get()) != evp_id_for(alg)) {
        return false;
    }
    std::vector<std::uint8_t> sig_buf;
    std::span<const std::uint8_t> sig = signature;
    if (alg == KeyAlgorithm::EcdsaP256) {
        sig_buf = ecdsa_raw_to_der(signature);
        if (sig_buf.empty()) return false;
        sig = sig_buf;
    }
    EvpMdCtxPtr ctx(EVP_MD_CTX_new());
    const EVP_MD* md = alg == KeyAlgorithm::Ed25519 ? nullptr : EVP_sha256();
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, md, nullptr, pkey.get()) != 1) {
        return false;
    }
    return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), payload.data(), payload.size()) == 1;
}

}  // namespace minispiffe::crypto
