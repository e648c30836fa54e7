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

#include "minispiffe/crypto/openssl_util.hpp"

#include <array>

#include <openssl/err.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

namespace minispiffe::crypto {

namespace {

constexpr char kStdAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
constexpr char kUrlAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

std::string encode_with(std::span<const std::uint8_t> data, const char* alphabet, bool pad) {
    std::string out;
    out.reserve(((data.size() + 2) / 3) * 4);
    std::size_t i = 0;
    while (i + 3 <= data.size()) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
        i += 3;
    }
    std::size_t rem = data.size() - i;
    if (rem == 1) {
        std::uint32_t v = data[i] << 16;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        if (pad) out += "==";
    } else if (rem == 2) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        if (pad) out += '=';
    }
    return out;
}

std::array<std::int8_t, 256> build_reverse(const char* alphabet) {
    std::array<std::int8_t, 256> rev{};
    rev.fill(-1);
    for (int i = 0; i < 64; ++i) {
        rev[static_cast<unsigned char>(alphabet[i])] = static_cast<std::int8_t>(i);
    }
    return rev;
}

Result<std::vector<std::uint8_t>> decode_with(std::string_view text,
                                              const std::array<std::int8_t, 256>& rev) {
    std::vector<std::uint8_t> out;
    out.reserve((text.size() / 4) * 3 + 3);
    std::uint32_t buffer = 0;
    int bits = 0;
    for (char c : text) {
        std::int8_t v = rev[static_cast<unsigned char>(c)];
        if (v < 0) {
            return make_error(Err::MalformedToken, "invalid base64 character");
        }
        buffer = (buffer << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buffer >> bits) & 0xff));
        }
    }
    // 6 leftover bits with no byte means a truncated group; 1 trailing
    // character can never encode a whole byte.
    if (bits >= 6) {
        return make_error(Err::MalformedToken, "truncated base64 input");
    }
    // Canonical form requires the unused low bits of the final character to
    // be zero; otherwise two distinct encodings decode to the same bytes.
    if (bits > 0 && (buffer & ((1u << bits) - 1)) != 0) {
        return make_error(Err::MalformedToken, "non-canonical base64 trailing bits");
    }
    return out;
}

}  // namespace

std::string openssl_errors() {
    std::string out;
    unsigned long code;  // NOLINT(google-runtime-int): OpenSSL API type
    while ((code = ERR_get_error()) != 0) {
        char buf[256];
        ERR_error_string_n(code, buf, sizeof(buf));
        if (!out.empty()) out += "; ";
        out += buf;
    }
    return out.empty() ? "unknown OpenSSL error" : out;
}

std::string hex_encode(std::span<const std::uint8_t> data) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out += kHex[b >> 4];
        out += kHex[b & 0xf];
    }
    return out;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
    return encode_with(data, kStdAlphabet, /*pad=*/true);
}

Result<std::vector<std::uint8_t>> base64_decode(std::string_view text) {
    while (!text.empty() && text.back() == '=') text.remove_suffix(1);
    static const auto rev = build_reverse(kStdAlphabet);
    return decode_with(text, rev);
}

std::string base64url_encode(std::span<const std::uint8_t> data) {
    return encode_with(data, kUrlAlphabet, /*pad=*/false);
}

std::string base64url_encode(std::string_view text) {
    return base64url_encode(as_bytes(text));
}

Result<std::vector<std::uint8_t>> base64url_decode(std::string_view text) {
    static const auto rev = build_reverse(kUrlAlphabet);
    return decode_with(text, rev);
}

std::vector<std::uint8_t> sha256(std::span<const std::uint8_t> data) {
    std::vector<std::uint8_t> digest(SHA256_DIGEST_LENGTH);
    SHA256(data.data(), data.size(), digest.data());
    return digest;
}

std::vector<std::uint8_t> hmac_sha256(std::span<const std::uint8_t> key,
                                      std::span<const std::uint8_t> data) {
    std::vector<std::uint8_t> mac(EVP_MAX_MD_SIZE);
    unsigned int len = 0;
    HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
         mac.data(), &len);
    mac.resize(len);
    return mac;
}

std::vector<std::uint8_t> random_bytes(std::size_t n) {
    std::vector<std::uint8_t> out(n);
    RAND_bytes(out.data(), static_cast<int>(n));
    return out;
}

}  // namespace minispiffe::crypto
