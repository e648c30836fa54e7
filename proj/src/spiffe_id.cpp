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

#include "minispiffe/spiffe_id.hpp"

#include <algorithm>
#include <cctype>

namespace minispiffe {

namespace {

constexpr std::string_view kScheme = "spiffe://";

bool is_trust_domain_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' || c == '-';
}

bool is_segment_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
}

std::string to_lower(std::string_view in) {
    std::string out(in);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Case-insensitive scheme check; normalization lowercases it anyway.
bool has_spiffe_scheme(std::string_view input) {
    if (input.size() < kScheme.size()) return false;
    for (std::size_t i = 0; i < kScheme.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(input[i])) != kScheme[i]) return false;
    }
    return true;
}

Result<void> validate_segment(std::string_view segment) {
    if (segment.empty()) {
        return make_error(Err::BadSegment, "empty path segment");
    }
    if (segment == "." || segment == "..") {
        return make_error(Err::BadSegment, "path segment must not be '.' or '..'");
    }
    for (char c : segment) {
        if (!is_segment_char(c)) {
            return make_error(Err::BadSegment,
                              std::string("invalid character '") + c + "' in path segment");
        }
    }
    return {};
}

// Splits "a/b/c" into segments, validating each. `input` must not be empty.
Result<std::vector<std::string>> split_path(std::string_view input) {
    std::vector<std::string> segments;
    std::size_t start = 0;
    while (true) {
        std::size_t slash = input.find('/', start);
        std::string_view segment = (slash == std::string_view::npos)
                                       ? input.substr(start)
                                       : input.substr(start, slash - start);
        if (auto v = validate_segment(segment); !v.ok()) return v.take_error();
        segments.emplace_back(segment);
        if (slash == std::string_view::npos) break;
        start = slash + 1;
    }
    return segments;
}

}  // namespace

Result<TrustDomain> TrustDomain::parse(std::string_view name) {
    if (name.empty()) {
        return make_error(Err::EmptyTrustDomain, "trust domain is empty");
    }
    if (name.size() > kMaxTrustDomainLength) {
        return make_error(Err::TooLong, "trust domain exceeds 255 characters");
    }
    std::string lowered = to_lower(name);
    for (char c : lowered) {
        if (!is_trust_domain_char(c)) {
            return make_error(Err::BadTrustDomainChar,
                              std::string("invalid character '") + c + "' in trust domain");
        }
    }
    if (lowered.front() == '.' || lowered.back() == '.' ||
        lowered.find("..") != std::string::npos) {
        return make_error(Err::BadTrustDomainChar, "trust domain has an empty dot-separated label");
    }
    return TrustDomain(std::move(lowered));
}

Result<SpiffeId> SpiffeId::parse(std::string_view input) {
    if (input.size() > kMaxSpiffeIdLength) {
        return make_error(Err::TooLong, "SPIFFE ID exceeds 2048 characters");
    }
    if (!has_spiffe_scheme(input)) {
        return make_error(Err::WrongScheme, "SPIFFE ID must start with spiffe://");
    }
    std::string_view rest = input.substr(kScheme.size());

    std::size_t slash = rest.find('/');
    std::string_view domain_part = (slash == std::string_view::npos) ? rest : rest.substr(0, slash);

    auto domain = TrustDomain::parse(domain_part);
    if (!domain.ok()) return domain.take_error();

    std::vector<std::string> segments;
    if (slash != std::string_view::npos) {
        auto split = split_path(rest.substr(slash + 1));
        if (!split.ok()) return split.take_error();
        segments = split.take();
    }
    return SpiffeId(domain.take(), std::move(segments));
}

Result<SpiffeId> SpiffeId::make(TrustDomain domain, std::vector<std::string> segments) {
    if (domain.name().empty()) {
        return make_error(Err::EmptyTrustDomain, "trust domain is unset");
    }
    std::size_t length = kScheme.size() + domain.name().size();
    for (const auto& segment : segments) {
        if (auto v = validate_segment(segment); !v.ok()) return v.take_error();
        length += 1 + segment.size();
    }
    if (length > kMaxSpiffeIdLength) {
        return make_error(Err::TooLong, "SPIFFE ID exceeds 2048 characters");
    }
    return SpiffeId(std::move(domain), std::move(segments));
}

std::string SpiffeId::canonical() const {
    std::string out = "spiffe://" + domain_.name();
    for (const auto& segment : segments_) {
        out += '/';
        out += segment;
    }
    return out;
}

std::string SpiffeId::path() const {
    std::string out;
    for (const auto& segment : segments_) {
        out += '/';
        out += segment;
    }
    return out;
}

Result<SpiffeIdPattern> SpiffeIdPattern::parse(std::string_view pattern) {
    SpiffeIdPattern out;
    out.text_ = std::string(pattern);

    if (!has_spiffe_scheme(pattern)) {
        return make_error(Err::BadPattern, "pattern must start with spiffe://");
    }
    std::string_view rest = pattern.substr(kScheme.size());
    std::size_t slash = rest.find('/');
    std::string_view domain_part = (slash == std::string_view::npos) ? rest : rest.substr(0, slash);

    if (domain_part == "*") {
        out.domain_ = std::nullopt;
    } else {
        auto domain = TrustDomain::parse(domain_part);
        if (!domain.ok()) {
            return make_error(Err::BadPattern, "bad trust domain: " + domain.error().to_string());
        }
        out.domain_ = domain.take();
    }

    if (slash != std::string_view::npos) {
        std::string_view path = rest.substr(slash + 1);
        std::size_t start = 0;
        bool done = false;
        while (!done) {
            std::size_t next = path.find('/', start);
            std::string_view element = (next == std::string_view::npos)
                                           ? path.substr(start)
                                           : path.substr(start, next - start);
            done = next == std::string_view::npos;
            if (element == "**") {
                if (!done) {
                    return make_error(Err::BadPattern, "** may appear only as the final element");
                }
                out.trailing_any_ = true;
            } else if (element == "*") {
                out.segment_patterns_.emplace_back("*");
            } else {
                if (auto v = validate_segment(element); !v.ok()) {
                    return make_error(Err::BadPattern,
                                      "bad segment pattern: " + v.error().to_string());
                }
                out.segment_patterns_.emplace_back(element);
            }
            start = next + 1;
        }
    }
    return out;
}

SpiffeIdPattern SpiffeIdPattern::exact(const SpiffeId& id) {
    SpiffeIdPattern out;
    out.domain_ = id.trust_domain();
    out.segment_patterns_ = id.segments();
    out.text_ = id.canonical();
    return out;
}

bool SpiffeIdPattern::matches(const SpiffeId& id) const {
    if (text_.empty()) return false;  // default-constructed pattern
    if (domain_ && *domain_ != id.trust_domain()) return false;

    const auto& segments = id.segments();
    if (trailing_any_) {
        if (segments.size() < segment_patterns_.size()) return false;
    } else {
        if (segments.size() != segment_patterns_.size()) return false;
    }
    for (std::size_t i = 0; i < segment_patterns_.size(); ++i) {
        if (segment_patterns_[i] == "*") continue;
        if (segment_patterns_[i] != segments[i]) return false;
    }
    return true;
}

bool SpiffeIdPattern::is_literal() const {
    if (!domain_ || trailing_any_) return false;
    return std::none_of(segment_patterns_.begin(), segment_patterns_.end(),
                        [](const std::string& s) { return s == "*"; });
}

}  // namespace minispiffe
