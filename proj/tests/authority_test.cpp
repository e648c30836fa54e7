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

#include "minispiffe/crypto/authority.hpp"

#include <gtest/gtest.h>
#include <openssl/x509.h>
#include <openssl/x509v3.h>

#include <set>
#include <string>

#include "minispiffe/crypto/openssl_util.hpp"
#include "test_util.hpp"

namespace minispiffe::crypto {
namespace {

using testing::id;
using testing::kEpoch;
using testing::td;

// Builds a self-signed certificate with an arbitrary SAN value so the
// verifier's SAN handling can be probed. Empty `san` omits the extension.
std::vector<std::uint8_t> self_signed_with_san(const std::string& san) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519).take();
    X509Ptr cert(X509_new());
    X509_set_version(cert.get(), X509_VERSION_3);
    ASN1_INTEGER_set_uint64(X509_get_serialNumber(cert.get()), 77);
    ASN1_TIME_set(X509_getm_notBefore(cert.get()), static_cast<time_t>(kEpoch - 60));
    ASN1_TIME_set(X509_getm_notAfter(cert.get()), static_cast<time_t>(kEpoch + 3600));
    X509_NAME_add_entry_by_txt(X509_get_subject_name(cert.get()), "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>("probe"), -1, -1, 0);
    X509_set_issuer_name(cert.get(), X509_get_subject_name(cert.get()));
    X509_set_pubkey(cert.get(), key.handle());
    if (!san.empty()) {
        X509V3_CTX ctx;
        X509V3_set_ctx_nodb(&ctx);
        X509V3_set_ctx(&ctx, cert.get(), cert.get(), nullptr, nullptr, 0);
        X509_EXTENSION* ext =
            X509V3_EXT_conf_nid(nullptr, &ctx, NID_subject_alt_name, san.c_str());
        X509_add_ext(cert.get(), ext, -1);
        X509_EXTENSION_free(ext);
    }
    X509_sign(cert.get(), key.handle(), nullptr);
    int len = i2d_X509(cert.get(), nullptr);
    std::vector<std::uint8_t> der(static_cast<std::size_t>(len));
    std::uint8_t* p = der.data();
    i2d_X509(cert.get(), &p);
    return der;
}

TEST(CreateAuthority, BundleShape) {
    auto authority = testing::authority("org.example");
    EXPECT_EQ(authority.bundle().trust_domain.name(), "org.example");
    EXPECT_EQ(authority.bundle().x509_roots.size(), 1u);
    EXPECT_EQ(authority.bundle().jwt_keys.size(), 1u);
    EXPECT_EQ(authority.bundle().sequence, 1);
}

TEST(CreateAuthority, RootIsSelfSignedCa) {
    auto authority = testing::authority("org.example");
    auto info = inspect_certificate(authority.root_certificate()).take();
    EXPECT_TRUE(info.is_ca);
    ASSERT_EQ(info.uri_sans.size(), 1u);
    EXPECT_EQ(info.uri_sans[0], "spiffe://org.example");
    // 10-year validity.
    EXPECT_EQ(info.not_after - info.not_before, 10LL * 365 * 86400 + kClockSkewSeconds);

    // The root verifies its own signature.
    const auto& der = authority.root_certificate();
    const std::uint8_t* p = der.data();
    X509Ptr cert(d2i_X509(nullptr, &p, static_cast<long>(der.size())));
    ASSERT_TRUE(cert);
    EvpPkeyPtr pubkey(X509_get_pubkey(cert.get()));
    EXPECT_EQ(X509_verify(cert.get(), pubkey.get()), 1);
}

TEST(CreateAuthority, DistinctKeyMaterial) {
    // Oracle: byte-compare 100 generated keys, zero collisions.
    std::set<std::vector<std::uint8_t>> seen;
    for (int i = 0; i < 100; ++i) {
        auto key = PrivateKey::generate(KeyAlgorithm::Ed25519).take();
        seen.insert(key.public_spki_der());
    }
    EXPECT_EQ(seen.size(), 100u);
}

TEST(CreateAuthority, EcdsaVariantWorksEndToEnd) {
    AuthorityConfig config;
    config.algorithm = KeyAlgorithm::EcdsaP256;
    auto authority = testing::authority("ecdsa.example", kEpoch, config);
    auto svid = authority.mint_x509_svid(id("spiffe://ecdsa.example/w"), 600, kEpoch).take();
    auto verified = verify_x509_svid(svid.leaf_der, svid.chain_der, authority.bundle(), kEpoch);
    ASSERT_TRUE(verified.ok());
    EXPECT_EQ(verified.value().canonical(), "spiffe://ecdsa.example/w");
}

TEST(MintX509Svid, ValidityWindowMatchesEntryTtl) {
    auto authority = testing::authority("org.example");
    auto svid =
        authority.mint_x509_svid(id("spiffe://org.example/frontend/build-runner"), 3600, kEpoch)
            .take();
    EXPECT_EQ(svid.not_after - kEpoch, 3600);
    EXPECT_EQ(svid.not_before, kEpoch - kClockSkewSeconds);

    auto info = inspect_certificate(svid.leaf_der).take();
    EXPECT_EQ(info.not_after, svid.not_after);
    EXPECT_EQ(info.not_before, svid.not_before);
    EXPECT_FALSE(info.is_ca);
    ASSERT_EQ(info.uri_sans.size(), 1u);
    EXPECT_EQ(info.uri_sans[0], "spiffe://org.example/frontend/build-runner");
}

TEST(MintX509Svid, VerifiesAgainstOwnBundleAtMintTime) {
    auto authority = testing::authority("org.example");
    auto svid = authority.mint_x509_svid(id("spiffe://org.example/w"), 3600, kEpoch).take();
    auto verified = verify_x509_svid(svid.leaf_der, svid.chain_der, authority.bundle(), kEpoch);
    ASSERT_TRUE(verified.ok());
    EXPECT_EQ(verified.value(), svid.id);
}

TEST(MintX509Svid, ForeignTrustDomainRefused) {
    auto authority = testing::authority("org.example");
    auto svid = authority.mint_x509_svid(id("spiffe://ci/org/deploy"), 3600, kEpoch);
    ASSERT_FALSE(svid.ok());
    EXPECT_EQ(svid.code(), Err::ForeignTrustDomain);
}

TEST(MintX509Svid, TtlBounds) {
    auto authority = testing::authority("org.example");
    EXPECT_EQ(authority.mint_x509_svid(id("spiffe://org.example/w"), 0, kEpoch).code(),
              Err::TtlOutOfRange);
    EXPECT_EQ(authority.mint_x509_svid(id("spiffe://org.example/w"), -5, kEpoch).code(),
              Err::TtlOutOfRange);
    EXPECT_EQ(authority.mint_x509_svid(id("spiffe://org.example/w"), 86401, kEpoch).code(),
              Err::TtlOutOfRange);
    EXPECT_TRUE(authority.mint_x509_svid(id("spiffe://org.example/w"), 86400, kEpoch).ok());
}

TEST(VerifyX509Svid, ExpiryBoundaryWithSkew) {
    auto authority = testing::authority("org.example");
    auto svid = authority.mint_x509_svid(id("spiffe://org.example/w"), 3600, kEpoch).take();
    const UnixTime expiry = svid.not_after;

    EXPECT_TRUE(verify_x509_svid(svid.leaf_der, svid.chain_der, authority.bundle(), expiry).ok());
    EXPECT_TRUE(
        verify_x509_svid(svid.leaf_der, svid.chain_der, authority.bundle(), expiry + 30).ok());
    auto expired =
        verify_x509_svid(svid.leaf_der, svid.chain_der, authority.bundle(), expiry + 31);
    ASSERT_FALSE(expired.ok());
    EXPECT_EQ(expired.code(), Err::Expired);
}

TEST(VerifyX509Svid, NotYetValidBoundaryWithSkew) {
    auto authority = testing::authority("org.example");
    auto svid = authority.mint_x509_svid(id("spiffe://org.example/w"), 3600, kEpoch).take();
    // not_before is kEpoch - 30; the additional allowance reaches back 30 more.
    EXPECT_TRUE(
        verify_x509_svid(svid.leaf_der, svid.chain_der, authority.bundle(), kEpoch - 60).ok());
    auto early = verify_x509_svid(svid.leaf_der, svid.chain_der, authority.bundle(), kEpoch - 61);
    ASSERT_FALSE(early.ok());
    EXPECT_EQ(early.code(), Err::NotYetValid);
}

TEST(VerifyX509Svid, CrossDomainMatrixIsUnknownRoot) {
    // Oracle: two independent authorities, all four (minted, verified) pairs.
    auto authority_a = testing::authority("a.example");
    auto authority_b = testing::authority("b.example");
    auto svid_a = authority_a.mint_x509_svid(id("spiffe://a.example/w"), 3600, kEpoch).take();
    auto svid_b = authority_b.mint_x509_svid(id("spiffe://b.example/w"), 3600, kEpoch).take();

    EXPECT_TRUE(verify_x509_svid(svid_a.leaf_der, svid_a.chain_der, authority_a.bundle(), kEpoch).ok());
    EXPECT_TRUE(verify_x509_svid(svid_b.leaf_der, svid_b.chain_der, authority_b.bundle(), kEpoch).ok());
    EXPECT_EQ(
        verify_x509_svid(svid_a.leaf_der, svid_a.chain_der, authority_b.bundle(), kEpoch).code(),
        Err::UnknownRoot);
    EXPECT_EQ(
        verify_x509_svid(svid_b.leaf_der, svid_b.chain_der, authority_a.bundle(), kEpoch).code(),
        Err::UnknownRoot);
}

TEST(VerifyX509Svid, SanErrors) {
    auto authority = testing::authority("org.example");
    auto none = self_signed_with_san("");
    EXPECT_EQ(verify_x509_svid(none, {}, authority.bundle(), kEpoch).code(), Err::NoUriSan);

    auto non_spiffe = self_signed_with_san("URI:https://example.org/x");
    EXPECT_EQ(verify_x509_svid(non_spiffe, {}, authority.bundle(), kEpoch).code(), Err::NoUriSan);

    auto twin = self_signed_with_san("URI:spiffe://a.example/x,URI:spiffe://a.example/y");
    EXPECT_EQ(verify_x509_svid(twin, {}, authority.bundle(), kEpoch).code(), Err::MultipleUriSan);

    // DNS SANs do not count toward the URI SAN requirement.
    auto dns_only = self_signed_with_san("DNS:example.org");
    EXPECT_EQ(verify_x509_svid(dns_only, {}, authority.bundle(), kEpoch).code(), Err::NoUriSan);
}

TEST(VerifyX509Svid, LeafIsCaRejected) {
    auto authority = testing::authority("org.example");
    // The authority's own root has a URI SAN and the CA flag set.
    EXPECT_EQ(
        verify_x509_svid(authority.root_certificate(), {}, authority.bundle(), kEpoch).code(),
        Err::LeafIsCa);
}

TEST(VerifyX509SvidAny, PicksBundleByLeafDomain) {
    auto authority_a = testing::authority("a.example");
    auto authority_b = testing::authority("b.example");
    auto svid_a = authority_a.mint_x509_svid(id("spiffe://a.example/w"), 3600, kEpoch).take();

    std::vector<TrustBundle> bundles = {authority_b.bundle(), authority_a.bundle()};
    auto verified = verify_x509_svid_any(svid_a.leaf_der, svid_a.chain_der, bundles, kEpoch);
    ASSERT_TRUE(verified.ok());

    std::vector<TrustBundle> wrong = {authority_b.bundle()};
    EXPECT_EQ(verify_x509_svid_any(svid_a.leaf_der, svid_a.chain_der, wrong, kEpoch).code(),
              Err::UnknownRoot);
}

TEST(Bundles, SerializeDeserializeRoundTrip) {
    auto authority = testing::authority("org.example");
    auto bytes = serialize_bundle(authority.bundle()).take();
    auto parsed = deserialize_bundle(bytes).take();
    EXPECT_EQ(parsed, authority.bundle());

    // Deterministic bytes for unchanged state.
    EXPECT_EQ(serialize_bundle(authority.bundle()).take(), bytes);
}

TEST(Bundles, SequencePreservedExactly) {
    auto authority = testing::authority("org.example");
    TrustBundle bundle = authority.bundle();
    bundle.sequence = 41;
    auto parsed = deserialize_bundle(serialize_bundle(bundle).take()).take();
    EXPECT_EQ(parsed.sequence, 41);
}

TEST(Bundles, EmptyRootsRejectedBothWays) {
    auto authority = testing::authority("org.example");
    TrustBundle bundle = authority.bundle();
    bundle.x509_roots.clear();
    EXPECT_EQ(serialize_bundle(bundle).code(), Err::EmptyRoots);

    nlohmann::json doc = bundle_to_json(authority.bundle());
    doc["x509_roots"] = nlohmann::json::array();
    EXPECT_EQ(deserialize_bundle(doc.dump()).code(), Err::EmptyRoots);
}

TEST(Bundles, MalformedDocumentsRejected) {
    EXPECT_EQ(deserialize_bundle("not json").code(), Err::MalformedBundle);
    EXPECT_EQ(deserialize_bundle("[1,2]").code(), Err::MalformedBundle);
    EXPECT_EQ(deserialize_bundle("{}").code(), Err::MalformedBundle);

    auto authority = testing::authority("org.example");
    nlohmann::json doc = bundle_to_json(authority.bundle());
    doc["x509_roots"] = {"!!! not base64 !!!"};
    EXPECT_EQ(deserialize_bundle(doc.dump()).code(), Err::MalformedBundle);

    doc = bundle_to_json(authority.bundle());
    doc["jwt_keys"].push_back(doc["jwt_keys"][0]);  // duplicate kid
    EXPECT_EQ(deserialize_bundle(doc.dump()).code(), Err::MalformedBundle);

    doc = bundle_to_json(authority.bundle());
    doc["trust_domain"] = "Not A Domain!";
    EXPECT_EQ(deserialize_bundle(doc.dump()).code(), Err::MalformedBundle);
}

TEST(JwtKeyRotation, OldKeyRetainedThroughOverlapWindow) {
    auto authority = testing::authority("org.example");
    std::string original_kid = authority.active_jwt_kid();
    ASSERT_TRUE(authority.rotate_jwt_key(kEpoch).ok());

    EXPECT_NE(authority.active_jwt_kid(), original_kid);
    EXPECT_NE(authority.bundle().find_jwt_key(original_kid), nullptr);
    EXPECT_EQ(authority.bundle().jwt_keys.size(), 2u);

    // Overlap default is 2 x max JWT TTL (7200s). Not yet expired:
    EXPECT_FALSE(authority.prune_retired_jwt_keys(kEpoch + 7199));
    EXPECT_NE(authority.bundle().find_jwt_key(original_kid), nullptr);
    // At the boundary the key is dropped.
    EXPECT_TRUE(authority.prune_retired_jwt_keys(kEpoch + 7200));
    EXPECT_EQ(authority.bundle().find_jwt_key(original_kid), nullptr);
}

TEST(JwtKeyRotation, SequenceStrictlyIncreases) {
    auto authority = testing::authority("org.example");
    std::int64_t last = authority.bundle().sequence;
    for (int i = 0; i < 3; ++i) {
        ASSERT_TRUE(authority.rotate_jwt_key(kEpoch + i).ok());
        EXPECT_GT(authority.bundle().sequence, last);
        last = authority.bundle().sequence;
    }
    ASSERT_TRUE(authority.prune_retired_jwt_keys(kEpoch + 1000000));
    EXPECT_GT(authority.bundle().sequence, last);
}

TEST(Kids, DerivedFromPublicKeyHash) {
    auto key = PrivateKey::generate(KeyAlgorithm::Ed25519).take();
    std::string kid = derive_kid(key);
    EXPECT_EQ(kid.size(), 16u);
    auto digest = sha256(key.public_spki_der());
    EXPECT_EQ(kid, hex_encode(digest).substr(0, 16));
}

}  // namespace
}  // namespace minispiffe::crypto
