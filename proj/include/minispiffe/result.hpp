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

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace minispiffe {

/// Stable error categories shared by the control plane, agent, broker and
/// simulator. The enumerator names are the wire error codes, verbatim.
enum class Err {
    // SPIFFE ID grammar
    WrongScheme,
    EmptyTrustDomain,
    BadTrustDomainChar,
    BadSegment,
    TooLong,
    BadPattern,
    // keys, SVIDs, bundles
    UnsupportedAlgorithm,
    ForeignTrustDomain,
    TtlOutOfRange,
    EmptyAudience,
    Expired,
    NotYetValid,
    UnknownRoot,
    NoUriSan,
    MultipleUriSan,
    LeafIsCa,
    BadSignature,
    AudienceMismatch,
    IssuerMismatch,
    UnknownKid,
    MalformedToken,
    MalformedBundle,
    EmptyRoots,
    // attestation
    NoMatch,
    AmbiguousMatch,
    // control plane
    ForeignDomain,
    DuplicateEntry,
    InvalidEntry,
    NotAuthorizedForId,
    UnknownAgent,
    PeerUnreachable,
    SequenceRegression,
    DomainMismatch,
    TlsAuthFailure,
    // agent
    NodeAttestFailed,
    ServerUnreachable,
    NoIdentity,
    AgentNotBootstrapped,
    // policy DSL
    SyntaxError,
    DuplicateRuleId,
    // STS broker
    TokenInvalid,
    IssuerNotTrusted,
    SubjectMismatch,
    // simulator
    ScenarioInvalid,
    HandshakeFailed,
    // transport
    MalformedFrame,
    IoError,
    Internal,
};

std::string_view err_name(Err code);
std::optional<Err> err_from_name(std::string_view name);

struct Error {
    Err code;
    std::string message;
    // Underlying category when one error wraps another (e.g. the broker's
    // TokenInvalid preserves the verification failure that produced it).
    std::optional<Err> cause;

    [[nodiscard]] std::string to_string() const;
};

inline Error make_error(Err code, std::string message) {
    return Error{code, std::move(message), std::nullopt};
}

inline Error wrap_error(Err code, std::string message, const Error& inner) {
    return Error{code, std::move(message) + ": " + inner.to_string(),
                 inner.cause ? inner.cause : std::optional<Err>(inner.code)};
}

/// Value-or-error. Deliberately minimal: the project predates std::expected
/// and only needs ok/value/error plus move-out.
template <typename T>
class [[nodiscard]] Result {
  public:
    Result(T value) : state_(std::in_place_index<0>, std::move(value)) {}
    Result(Error error) : state_(std::in_place_index<1>, std::move(error)) {}

    [[nodiscard]] bool ok() const noexcept { return state_.index() == 0; }
    explicit operator bool() const noexcept { return ok(); }

    [[nodiscard]] T& value() & { return std::get<0>(state_); }
    [[nodiscard]] const T& value() const& { return std::get<0>(state_); }
    [[nodiscard]] T&& take() { return std::get<0>(std::move(state_)); }

    [[nodiscard]] const Error& error() const& { return std::get<1>(state_); }
    [[nodiscard]] Error take_error() { return std::get<1>(std::move(state_)); }
    [[nodiscard]] Err code() const { return error().code; }

  private:
    std::variant<T, Error> state_;
};

template <>
class [[nodiscard]] Result<void> {
  public:
    Result() = default;
    Result(Error error) : error_(std::move(error)) {}

    [[nodiscard]] bool ok() const noexcept { return !error_.has_value(); }
    explicit operator bool() const noexcept { return ok(); }

    [[nodiscard]] const Error& error() const& { return *error_; }
    [[nodiscard]] Error take_error() { return std::move(*error_); }
    [[nodiscard]] Err code() const { return error().code; }

  private:
    std::optional<Error> error_;
};

}  // namespace minispiffe
