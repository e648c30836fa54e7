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

#include "minispiffe/crypto/x509.hpp"

#include <ctime>

#include <openssl/asn1.h>
#include <openssl/x509v3.h>

#include "minispiffe/crypto/openssl_util.hpp"

namespace minispiffe::crypto {

namespace {

using X509NamePtr = std::unique_ptr<X509_NAME, OsslFree<X509_NAME, X509_NAME_free>>;
using GeneralNamesPtr =
    std::unique_ptr<GENERAL_NAMES, OsslFree<GENERAL_NAMES, GENERAL_NAMES_free>>;
using BasicConstraintsPtr =
    std::unique_ptr<BASIC_CONSTRAINTS, OsslFree<BASIC_CONSTRAINTS, BASIC_CONSTRAINTS_free>>;
using StackOfX509 = STACK_OF(X509);

void free_x509_stack(StackOfX509* stack) {
    sk_X509_pop_free(stack, X509_free);
}
using X509StackPtr = std::unique_ptr<StackOfX509, OsslFree<StackOfX509, free_x509_stack>>;

Result<X509Ptr> parse_der(std::span<const std::uint8_t> der) {
    const std::uint8_t* p = der.data();
    X509Ptr cert(d2i_X509(nullptr, &p, static_cast<long>(der.size())));
    if (!cert) {
        return make_error(Err::Internal, "certificate decode failed: " + openssl_errors());
    }
    return cert;
}

std::vector<std::uint8_t> cert_to_der(X509* cert) {
    int len = i2d_X509(cert, nullptr);
    std::vector<std::uint8_t> der(len > 0 ? static_cast<std::size_t>(len) : 0);
    if (len > 0) {
        std::uint8_t* out = der.data();
        i2d_X509(cert, &out);
    }
    return der;
}

Result<UnixTime> asn1_time_to_unix(const ASN1_TIME* time) {
    std::tm tm{};
    if (ASN1_TIME_to_tm(time, &tm) != 1) {
        return make_error(Err::Internal, "unparseable ASN.1 time");
    }
    return static_cast<UnixTime>(timegm(&tm));
}

bool set_name(X509_NAME* name, const std::string& common_name) {
    return X509_NAME_add_entry_by_txt(name, "O", MBSTRING_ASC,
                                      reinterpret_cast<const unsigned char*>("minispiffe"), -1,
                                      -1, 0) == 1 &&
           X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                                      reinterpret_cast<const unsigned char*>(common_name.c_str()),
                                      -1, -1, 0) == 1;
}

bool add_extension(X509* cert, X509* issuer, int nid, const std::string& value) {
    X509V3_CTX ctx;
    X509V3_set_ctx_nodb(&ctx);
    X509V3_set_ctx(&ctx, issuer ? issuer : cert, cert, nullptr, nullptr, 0);
    X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value.c_str());
    if (!ext) return false;
    bool ok = X509_add_ext(cert, ext, -1) == 1;
    X509_EXTENSION_free(ext);
    return ok;
}

const EVP_MD* digest_for(const PrivateKey& key) {
    // Ed25519 signs without a separate digest step.
    return key.algorithm() == KeyAlgorithm::Ed25519 ? nullptr : EVP_sha256();
}

Result<std::vector<std::uint8_t>> build_certificate(const std::string& subject_cn,
                                                    const std::string& uri_san, bool is_ca,
                                                    EVP_PKEY* subject_public_key,
                                                    const PrivateKey& issuer_key, X509* issuer_cert,
                                                    UnixTime not_before, UnixTime not_after,
                                                    std::uint64_t serial) {
    X509Ptr cert(X509_new());
    if (!cert) return make_error(Err::Internal, "X509_new failed");

    X509_set_version(cert.get(), X509_VERSION_3);
    ASN1_INTEGER_set_uint64(X509_get_serialNumber(cert.get()), serial);
    if (!ASN1_TIME_set(X509_getm_notBefore(cert.get()), static_cast<time_t>(not_before)) ||
        !ASN1_TIME_set(X509_getm_notAfter(cert.get()), static_cast<time_t>(not_after))) {
        return make_error(Err::Internal, "validity encoding failed");
    }
    if (!set_name(X509_get_subject_name(cert.get()), subject_cn)) {
        return make_error(Err::Internal, "subject name encoding failed");
    }
    if (issuer_cert) {
        if (X509_set_issuer_name(cert.get(), X509_get_subject_name(issuer_cert)) != 1) {
            return make_error(Err::Internal, "issuer name encoding failed");
        }
    } else {
        if (X509_set_issuer_name(cert.get(), X509_get_subject_name(cert.get())) != 1) {
            return make_error(Err::Internal, "issuer name encoding failed");
        }
    }
    if (X509_set_pubkey(cert.get(), subject_public_key) != 1) {
        return make_error(Err::Internal, "public key encoding failed");
    }

    bool ok = add_extension(cert.get(), issuer_cert, NID_basic_constraints,
                            is_ca ? "critical,CA:TRUE" : "critical,CA:FALSE") &&
              add_extension(cert.get(), issuer_cert, NID_key_usage,
                            is_ca ? "critical,keyCertSign,cRLSign" : "critical,digitalSignature") &&
              add_extension(cert.get(), issuer_cert, NID_subject_alt_name, "URI:" + uri_san) &&
              add_extension(cert.get(), issuer_cert, NID_subject_key_identifier, "hash");
    if (ok && !is_ca) {
        ok = add_extension(cert.get(), issuer_cert, NID_ext_key_usage, "serverAuth,clientAuth") &&
             add_extension(cert.get(), issuer_cert, NID_authority_key_identifier, "keyid:always");
    }
    if (!ok) {
        return make_error(Err::Internal, "extension encoding failed: " + openssl_errors());
    }

    if (X509_sign(cert.get(), issuer_key.handle(), digest_for(issuer_key)) == 0) {
        return make_error(Err::Internal, "certificate signing failed: " + openssl_errors());
    }
    return cert_to_der(cert.get());
}

// Collects URI SAN strings; empty vector when the extension is absent.
std::vector<std::string> uri_sans_of(X509* cert) {
    std::vector<std::string> out;
    GeneralNamesPtr names(static_cast<GENERAL_NAMES*>(
        X509_get_ext_d2i(cert, NID_subject_alt_name, nullptr, nullptr)));
    if (!names) return out;
    for (int i = 0; i < sk_GENERAL_NAME_num(names.get()); ++i) {
        const GENERAL_NAME* name = sk_GENERAL_NAME_value(names.get(), i);
        if (name->type != GEN_URI) continue;
        const unsigned char* data = ASN1_STRING_get0_data(name->d.uniformResourceIdentifier);
        int len = ASN1_STRING_length(name->d.uniformResourceIdentifier);
        out.emplace_back(reinterpret_cast<const char*>(data), static_cast<std::size_t>(len));
    }
    return out;
}

bool ca_flag_of(X509* cert) {
    BasicConstraintsPtr bc(static_cast<BASIC_CONSTRAINTS*>(
        X509_get_ext_d2i(cert, NID_basic_constraints, nullptr, nullptr)));
    return bc && bc->ca;
}

struct LeafFacts {
    SpiffeId id;
    UnixTime not_before;
    UnixTime not_after;
};

// SAN, CA-flag and validity checks shared by single- and multi-bundle
// verification. Chain verification happens separately.
Result<LeafFacts> check_leaf(X509* leaf, UnixTime now) {
    auto sans = uri_sans_of(leaf);
    if (sans.empty()) {
        return make_error(Err::NoUriSan, "leaf has no URI SAN");
    }
    if (sans.size() > 1) {
        return make_error(Err::MultipleUriSan, "leaf has more than one URI SAN");
    }
    auto id = SpiffeId::parse(sans.front());
    if (!id.ok()) {
        return make_error(Err::NoUriSan, "URI SAN is not a SPIFFE ID: " + id.error().to_string());
    }
    if (ca_flag_of(leaf)) {
        return make_error(Err::LeafIsCa, "leaf certificate carries the CA flag");
    }
    auto nb = asn1_time_to_unix(X509_get0_notBefore(leaf));
    if (!nb.ok()) return nb.take_error();
    auto na = asn1_time_to_unix(X509_get0_notAfter(leaf));
    if (!na.ok()) return na.take_error();
    if (now < nb.value() - kClockSkewSeconds) {
        return make_error(Err::NotYetValid, "certificate not yet valid");
    }
    if (now > na.value() + kClockSkewSeconds) {
        return make_error(Err::Expired, "certificate expired");
    }
    return LeafFacts{id.take(), nb.value(), na.value()};
}

Result<void> check_chain(X509* leaf, std::span<const std::vector<std::uint8_t>> intermediates,
                         const TrustBundle& bundle) {
    X509StorePtr store(X509_STORE_new());
    if (!store) return make_error(Err::Internal, "X509_STORE_new failed");
    for (const auto& root_der : bundle.x509_roots) {
        auto root = parse_der(root_der);
        if (!root.ok()) return root.take_error();
        X509_STORE_add_cert(store.get(), root.value().get());
    }
    X509StackPtr untrusted(sk_X509_new_null());
    for (const auto& der : intermediates) {
        auto cert = parse_der(der);
        if (!cert.ok()) return cert.take_error();
        sk_X509_push(untrusted.get(), cert.take().release());
    }
    X509StoreCtxPtr ctx(X509_STORE_CTX_new());
    if (!ctx || X509_STORE_CTX_init(ctx.get(), store.get(), leaf, untrusted.get()) != 1) {
        return make_error(Err::Internal, "X509_STORE_CTX init failed");
    }
    // Validity is checked by the caller with the skew allowance applied.
    X509_VERIFY_PARAM_set_flags(X509_STORE_CTX_get0_param(ctx.get()), X509_V_FLAG_NO_CHECK_TIME);
    if (X509_verify_cert(ctx.get()) != 1) {
        int err = X509_STORE_CTX_get_error(ctx.get());
        return make_error(Err::UnknownRoot,
                          std::string("chain does not reach a bundle root: ") +
                              X509_verify_cert_error_string(err));
    }
    return {};
}

}  // namespace

nlohmann::json x509_svid_to_json(const X509Svid& svid) {
    nlohmann::json chain = nlohmann::json::array();
    for (const auto& der : svid.chain_der) {
        chain.push_back(base64_encode(der));
    }
    return {{"spiffe_id", svid.id.canonical()},
            {"leaf", base64_encode(svid.leaf_der)},
            {"chain", std::move(chain)},
            {"key", base64_encode(svid.key.pkcs8_der())},
            {"key_alg", std::string(key_algorithm_name(svid.key.algorithm()))},
            {"not_before", svid.not_before},
            {"not_after", svid.not_after}};
}

Result<X509Svid> x509_svid_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("spiffe_id") || !doc.contains("leaf") ||
        !doc.contains("key") || !doc.contains("key_alg")) {
        return make_error(Err::MalformedFrame, "X.509 SVID document is missing fields");
    }
    auto id = SpiffeId::parse(doc["spiffe_id"].get<std::string>());
    if (!id.ok()) return id.take_error();
    auto leaf = base64_decode(doc["leaf"].get<std::string>());
    if (!leaf.ok()) return make_error(Err::MalformedFrame, "leaf is not valid base64");
    auto alg = key_algorithm_from_name(doc["key_alg"].get<std::string>());
    if (!alg) return make_error(Err::MalformedFrame, "unknown key algorithm");
    auto key_der = base64_decode(doc["key"].get<std::string>());
    if (!key_der.ok()) return make_error(Err::MalformedFrame, "key is not valid base64");
    auto key = PrivateKey::from_pkcs8_der(*alg, key_der.value());
    if (!key.ok()) return key.take_error();

    std::vector<std::vector<std::uint8_t>> chain;
    if (doc.contains("chain")) {
        for (const auto& item : doc["chain"]) {
            auto der = base64_decode(item.get<std::string>());
            if (!der.ok()) return make_error(Err::MalformedFrame, "chain is not valid base64");
            chain.push_back(der.take());
        }
    }
    return X509Svid{id.take(),
                    leaf.take(),
                    std::move(chain),
                    key.take(),
                    doc.value("not_before", static_cast<UnixTime>(0)),
                    doc.value("not_after", static_cast<UnixTime>(0))};
}

Result<std::vector<std::uint8_t>> make_root_certificate(const TrustDomain& domain,
                                                        const PrivateKey& key, UnixTime now,
                                                        std::int64_t lifetime_seconds,
                                                        std::uint64_t serial) {
    return build_certificate(domain.name(), domain.id_string(), /*is_ca=*/true, key.handle(), key,
                             /*issuer_cert=*/nullptr, now - kClockSkewSeconds,
                             now + lifetime_seconds, serial);
}

Result<std::vector<std::uint8_t>> make_leaf_certificate(
    const SpiffeId& id, EVP_PKEY* subject_public_key, const PrivateKey& issuer_key,
    std::span<const std::uint8_t> issuer_cert_der, UnixTime not_before, UnixTime not_after,
    std::uint64_t serial) {
    auto issuer = parse_der(issuer_cert_der);
    if (!issuer.ok()) return issuer.take_error();
    return build_certificate(id.trust_domain().name(), id.canonical(), /*is_ca=*/false,
                             subject_public_key, issuer_key, issuer.value().get(), not_before,
                             not_after, serial);
}

Result<CertInfo> inspect_certificate(std::span<const std::uint8_t> der) {
    auto cert = parse_der(der);
    if (!cert.ok()) return cert.take_error();
    CertInfo info;
    info.uri_sans = uri_sans_of(cert.value().get());
    info.is_ca = ca_flag_of(cert.value().get());
    auto nb = asn1_time_to_unix(X509_get0_notBefore(cert.value().get()));
    if (!nb.ok()) return nb.take_error();
    auto na = asn1_time_to_unix(X509_get0_notAfter(cert.value().get()));
    if (!na.ok()) return na.take_error();
    info.not_before = nb.value();
    info.not_after = na.value();
    ASN1_INTEGER_get_uint64(&info.serial, X509_get_serialNumber(cert.value().get()));
    return info;
}

Result<SpiffeId> verify_x509_svid(std::span<const std::uint8_t> leaf_der,
                                  std::span<const std::vector<std::uint8_t>> intermediates,
                                  const TrustBundle& bundle, UnixTime now) {
    auto leaf = parse_der(leaf_der);
    if (!leaf.ok()) return leaf.take_error();
    auto facts = check_leaf(leaf.value().get(), now);
    if (!facts.ok()) return facts.take_error();
    if (auto chain = check_chain(leaf.value().get(), intermediates, bundle); !chain.ok()) {
        return chain.take_error();
    }
    return facts.take().id;
}

Result<SpiffeId> verify_x509_svid_any(std::span<const std::uint8_t> leaf_der,
                                      std::span<const std::vector<std::uint8_t>> intermediates,
                                      std::span<const TrustBundle> bundles, UnixTime now) {
    auto leaf = parse_der(leaf_der);
    if (!leaf.ok()) return leaf.take_error();
    auto facts = check_leaf(leaf.value().get(), now);
    if (!facts.ok()) return facts.take_error();
    for (const auto& bundle : bundles) {
        if (bundle.trust_domain != facts.value().id.trust_domain()) continue;
        if (auto chain = check_chain(leaf.value().get(), intermediates, bundle); !chain.ok()) {
            return chain.take_error();
        }
        return facts.take().id;
    }
    return make_error(Err::UnknownRoot, "no bundle held for trust domain " +
                                            facts.value().id.trust_domain().name());
}

}  // namespace minispiffe::crypto
