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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "minispiffe/result.hpp"

namespace minispiffe::crypto {

enum class KeyAlgorithm {
    Ed25519,
    EcdsaP256,
};

/// JOSE algorithm identifier: "EdDSA" or "ES256".
std::string_view jose_alg_name(KeyAlgorithm alg);
std::optional<KeyAlgorithm> key_algorithm_from_jose(std::string_view name);
std::optional<KeyAlgorithm> key_algorithm_from_name(std::string_view name);
std::string_view key_algorithm_name(KeyAlgorithm alg);

/// Private key with shared ownership of the underlying EVP_PKEY, which is
/// immutable after generation. Signatures are produced in JOSE form:
/// Ed25519 raw 64 bytes, ES256 as r||s (two 32-byte big-endian integers).
class PrivateKey {
  public:
    static Result<PrivateKey> generate(KeyAlgorithm alg);
    static Result<PrivateKey> from_pkcs8_der(KeyAlgorithm alg, std::span<const std::uint8_t> der);

    [[nodiscard]] KeyAlgorithm algorithm() const noexcept { return alg_; }
    [[nodiscard]] EVP_PKEY* handle() const noexcept { return pkey_.get(); }

    [[nodiscard]] std::vector<std::uint8_t> public_spki_der() const;
    [[nodiscard]] std::vector<std::uint8_t> pkcs8_der() const;

    [[nodiscard]] Result<std::vector<std::uint8_t>> sign(std::span<const std::uint8_t> payload) const;

  private:
    PrivateKey(KeyAlgorithm alg, std::shared_ptr<EVP_PKEY> pkey)
        : alg_(alg), pkey_(std::move(pkey)) {}

    KeyAlgorithm alg_;
    std::shared_ptr<EVP_PKEY> pkey_;
};

/// Verifies a JOSE-form signature against a SubjectPublicKeyInfo key.
/// Returns false for any parse or verification failure.
bool verify_signature(KeyAlgorithm alg, std::span<const std::uint8_t> spki_der,
                      std::span<const std::uint8_t> payload,
                      std::span<const std::uint8_t> signature);

}  // namespace minispiffe::crypto
