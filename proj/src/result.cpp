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

#include "minispiffe/result.hpp"

#include <array>
#include <utility>

namespace minispiffe {

namespace {

constexpr std::array<std::pair<Err, std::string_view>, 48> kErrNames = {{
    {Err::WrongScheme, "WrongScheme"},
    {Err::EmptyTrustDomain, "EmptyTrustDomain"},
    {Err::BadTrustDomainChar, "BadTrustDomainChar"},
    {Err::BadSegment, "BadSegment"},
    {Err::TooLong, "TooLong"},
    {Err::BadPattern, "BadPattern"},
    {Err::UnsupportedAlgorithm, "UnsupportedAlgorithm"},
    {Err::ForeignTrustDomain, "ForeignTrustDomain"},
    {Err::TtlOutOfRange, "TtlOutOfRange"},
    {Err::EmptyAudience, "EmptyAudience"},
    {Err::Expired, "Expired"},
    {Err::NotYetValid, "NotYetValid"},
    {Err::UnknownRoot, "UnknownRoot"},
    {Err::NoUriSan, "NoUriSan"},
    {Err::MultipleUriSan, "MultipleUriSan"},
    {Err::LeafIsCa, "LeafIsCa"},
    {Err::BadSignature, "BadSignature"},
    {Err::AudienceMismatch, "AudienceMismatch"},
    {Err::IssuerMismatch, "IssuerMismatch"},
    {Err::UnknownKid, "UnknownKid"},
    {Err::MalformedToken, "MalformedToken"},
    {Err::MalformedBundle, "MalformedBundle"},
    {Err::EmptyRoots, "EmptyRoots"},
    {Err::NoMatch, "NoMatch"},
    {Err::AmbiguousMatch, "AmbiguousMatch"},
    {Err::ForeignDomain, "ForeignDomain"},
    {Err::DuplicateEntry, "DuplicateEntry"},
    {Err::InvalidEntry, "InvalidEntry"},
    {Err::NotAuthorizedForId, "NotAuthorizedForId"},
    {Err::UnknownAgent, "UnknownAgent"},
    {Err::PeerUnreachable, "PeerUnreachable"},
    {Err::SequenceRegression, "SequenceRegression"},
    {Err::DomainMismatch, "DomainMismatch"},
    {Err::TlsAuthFailure, "TlsAuthFailure"},
    {Err::NodeAttestFailed, "NodeAttestFailed"},
    {Err::ServerUnreachable, "ServerUnreachable"},
    {Err::NoIdentity, "NoIdentity"},
    {Err::AgentNotBootstrapped, "AgentNotBootstrapped"},
    {Err::SyntaxError, "SyntaxError"},
    {Err::DuplicateRuleId, "DuplicateRuleId"},
    {Err::TokenInvalid, "TokenInvalid"},
    {Err::IssuerNotTrusted, "IssuerNotTrusted"},
    {Err::SubjectMismatch, "SubjectMismatch"},
    {Err::ScenarioInvalid, "ScenarioInvalid"},
    {Err::HandshakeFailed, "HandshakeFailed"},
    {Err::MalformedFrame, "MalformedFrame"},
    {Err::IoError, "IoError"},
    {Err::Internal, "Internal"},
}};

}  // namespace

std::string_view err_name(Err code) {
    for (const auto& [err, name] : kErrNames) {
        if (err == code) return name;
    }
    return "Internal";
}

std::optional<Err> err_from_name(std::string_view name) {
    for (const auto& [err, n] : kErrNames) {
        if (n == name) return err;
    }
    return std::nullopt;
}

std::string Error::to_string() const {
    std::string out{err_name(code)};
    if (!message.empty()) {
        out += ": ";
        out += message;
    }
    return out;
}

}  // namespace minispiffe
