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

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "minispiffe/result.hpp"

namespace minispiffe {

/// Maximum length of the canonical string form of a SPIFFE ID.
inline constexpr std::size_t kMaxSpiffeIdLength = 2048;

/// Maximum length of a trust-domain name.
inline constexpr std::size_t kMaxTrustDomainLength = 255;

/// A trust-domain name: lowercase DNS-like label sequence, characters
/// restricted to [a-z0-9.-], no leading/trailing dot, no empty label.
/// Comparison is case-insensitive by construction (input is lowercased).
class TrustDomain {
  public:
    /// Unset placeholder (empty name) for config structs; every consuming
    /// path validates before use. Build real domains with parse().
    TrustDomain() = default;

    /// Accepts mixed case and normalizes to lowercase.
    /// Errors: EmptyTrustDomain, TooLong, BadTrustDomainChar.
    static Result<TrustDomain> parse(std::string_view name);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }

    /// The SPIFFE ID naming the trust domain itself: "spiffe://<name>".
    [[nodiscard]] std::string id_string() const { return "spiffe://" + name_; }

    auto operator<=>(const TrustDomain&) const = default;

  private:
    explicit TrustDomain(std::string name) : name_(std::move(name)) {}
    std::string name_;
};

/// A validated SPIFFE ID: trust domain plus an ordered (possibly empty)
/// list of path segments. Immutable after construction.
class SpiffeId {
  public:
    /// Parses the canonical URI form "spiffe://<trust-domain>[/<path>]".
    /// Scheme and trust domain are case-insensitive and normalized to
    /// lowercase; path segments are case-sensitive. Percent-encoding is
    /// rejected (no character of either alphabet is '%').
    /// Errors: WrongScheme, EmptyTrustDomain, BadTrustDomainChar,
    /// BadSegment, TooLong.
    static Result<SpiffeId> parse(std::string_view input);

    /// Builds an ID from already-separated parts, applying the same
    /// validation as parse().
    static Result<SpiffeId> make(TrustDomain domain, std::vector<std::string> segments);

    [[nodiscard]] const TrustDomain& trust_domain() const noexcept { return domain_; }
    [[nodiscard]] const std::vector<std::string>& segments() const noexcept { return segments_; }

    /// Canonical string form; parse(canonical()) round-trips to an equal id.
    [[nodiscard]] std::string canonical() const;

    /// "/seg1/seg2" or "" for the trust-domain identity.
    [[nodiscard]] std::string path() const;

    auto operator<=>(const SpiffeId&) const = default;

  private:
    SpiffeId(TrustDomain domain, std::vector<std::string> segments)
        : domain_(std::move(domain)), segments_(std::move(segments)) {}

    TrustDomain domain_;
    std::vector<std::string> segments_;
};

/// Wildcard pattern over SPIFFE IDs, used by policy principals and STS
/// subject conditions. The trust domain is a literal or `*`; each segment
/// pattern is a literal or `*` (exactly one segment); a final `**` matches
/// any (possibly empty) suffix.
class SpiffeIdPattern {
  public:
    /// A default-constructed pattern matches nothing (fail closed); build
    /// real patterns with parse() or exact().
    SpiffeIdPattern() = default;

    /// Parses "spiffe://<td-or-*>[/<seg-or-*>...[/**]]".
    /// Errors: BadPattern (also covers `**` in a non-final position).
    static Result<SpiffeIdPattern> parse(std::string_view pattern);

    /// Convenience: a pattern with no wildcards matching exactly `id`.
    static SpiffeIdPattern exact(const SpiffeId& id);

    [[nodiscard]] bool matches(const SpiffeId& id) const;

    /// True when the pattern contains no wildcard of any kind.
    [[nodiscard]] bool is_literal() const;

    [[nodiscard]] const std::string& text() const noexcept { return text_; }

    bool operator==(const SpiffeIdPattern&) const = default;

  private:
    std::optional<TrustDomain> domain_;  // nullopt => any trust domain
    std::vector<std::string> segment_patterns_;  // literals and "*"
    bool trailing_any_ = false;                  // final "**"
    std::string text_;
};

}  // namespace minispiffe
