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

#include "minispiffe/policy.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <set>

namespace minispiffe::policy {

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class TokenKind { Ident, String, Integer, Punct, End };

struct Token {
    TokenKind kind;
    std::string text;  // ident name, string contents, integer digits or punct
    int line;
    int col;
};

class Lexer {
  public:
    explicit Lexer(std::string_view source) : source_(source) {}

    Result<std::vector<Token>> run() {
        std::vector<Token> tokens;
        while (true) {
            skip_trivia();
            if (at_end()) break;
            int line = line_, col = col_;
            char c = peek();
            if (c == '"') {
                auto text = lex_string();
                if (!text.ok()) return text.take_error();
                tokens.push_back({TokenKind::String, text.take(), line, col});
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '-' && pos_ + 1 < source_.size() &&
                        std::isdigit(static_cast<unsigned char>(source_[pos_ + 1])))) {
                std::string digits;
                digits += take();
                while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) {
                    digits += take();
                }
                tokens.push_back({TokenKind::Integer, digits, line, col});
            } else if (is_ident_char(c)) {
                std::string name;
                while (!at_end() && is_ident_char(peek())) name += take();
                tokens.push_back({TokenKind::Ident, name, line, col});
            } else if (c == '=' || c == '!') {
                std::string op;
                op += take();
                if (at_end() || peek() != '=') {
                    return syntax_error(line, col, "expected '==' or '!='");
                }
                op += take();
                tokens.push_back({TokenKind::Punct, op, line, col});
            } else if (c == ';' || c == '{' || c == '}' || c == '[' || c == ']' || c == ',') {
                tokens.push_back({TokenKind::Punct, std::string(1, take()), line, col});
            } else {
                return syntax_error(line, col, std::string("unexpected character '") + c + "'");
            }
        }
        tokens.push_back({TokenKind::End, "", line_, col_});
        return tokens;
    }

  private:
    static bool is_ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    }

    bool at_end() const { return pos_ >= source_.size(); }
    char peek() const { return source_[pos_]; }

    char take() {
        char c = source_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_trivia() {
        while (!at_end()) {
            char c = peek();
            if (std::isspace(static_cast<unsigned char>(c))) {
                take();
            } else if (c == '#') {
                while (!at_end() && peek() != '\n') take();
            } else {
                break;
            }
        }
    }

    Result<std::string> lex_string() {
        int line = line_, col = col_;
        take();  // opening quote
        std::string out;
        while (!at_end() && peek() != '"' && peek() != '\n') out += take();
        if (at_end() || peek() != '"') {
            return syntax_error(line, col, "unterminated string literal");
        }
        take();  // closing quote
        return out;
    }

    static Error syntax_error(int line, int col, const std::string& message) {
        return make_error(Err::SyntaxError, "line " + std::to_string(line) + ", col " +
                                                std::to_string(col) + ": " + message);
    }

    std::string_view source_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
  public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    Result<std::vector<PolicyRule>> run() {
        std::vector<PolicyRule> rules;
        std::set<std::string> seen;
        while (!check(TokenKind::End)) {
            auto rule = parse_rule();
            if (!rule.ok()) return rule.take_error();
            if (!seen.insert(rule.value().rule_id).second) {
                return make_error(Err::DuplicateRuleId,
                                  "duplicate rule id " + rule.value().rule_id);
            }
            rules.push_back(rule.take());
        }
        return rules;
    }

  private:
    const Token& current() const { return tokens_[index_]; }
    bool check(TokenKind kind) const { return current().kind == kind; }

    Error expected(const std::string& what) const {
        const Token& token = current();
        std::string found = token.kind == TokenKind::End ? "end of input" : "'" + token.text + "'";
        return make_error(Err::SyntaxError, "line " + std::to_string(token.line) + ", col " +
                                                std::to_string(token.col) + ": expected " + what +
                                                ", found " + found);
    }

    Result<Token> eat_keyword(const std::string& word) {
        if (!check(TokenKind::Ident) || current().text != word) {
            return expected("'" + word + "'");
        }
        return tokens_[index_++];
    }

    Result<Token> eat(TokenKind kind, const std::string& what) {
        if (!check(kind)) return expected(what);
        return tokens_[index_++];
    }

    Result<Token> eat_punct(const std::string& text) {
        if (!check(TokenKind::Punct) || current().text != text) {
            return expected("'" + text + "'");
        }
        return tokens_[index_++];
    }

    Result<PolicyRule> parse_rule() {
        if (auto t = eat_keyword("permit"); !t.ok()) return t.take_error();
        auto rule_id = eat(TokenKind::Ident, "rule identifier");
        if (!rule_id.ok()) return rule_id.take_error();

        if (auto t = eat_keyword("principal"); !t.ok()) return t.take_error();
        auto principal = eat(TokenKind::String, "principal pattern string");
        if (!principal.ok()) return principal.take_error();
        auto pattern = SpiffeIdPattern::parse(principal.value().text);
        if (!pattern.ok()) {
            return make_error(Err::BadPattern, "rule " + rule_id.value().text + ": " +
                                                   pattern.error().to_string());
        }

        if (auto t = eat_keyword("action"); !t.ok()) return t.take_error();
        auto action = eat(TokenKind::String, "action string");
        if (!action.ok()) return action.take_error();

        if (auto t = eat_keyword("resource"); !t.ok()) return t.take_error();
        auto resource = eat(TokenKind::String, "resource string");
        if (!resource.ok()) return resource.take_error();

        PolicyRule rule{rule_id.take().text, pattern.take(), action.take().text,
                        resource.take().text, {}};

        if (check(TokenKind::Ident) && current().text == "when") {
            ++index_;
            if (auto t = eat_punct("{"); !t.ok()) return t.take_error();
            while (true) {
                auto condition = parse_condition();
                if (!condition.ok()) return condition.take_error();
                rule.conditions.push_back(condition.take());
                if (check(TokenKind::Punct) && current().text == ",") {
                    ++index_;
                    continue;
                }
                break;
            }
            if (auto t = eat_punct("}"); !t.ok()) return t.take_error();
        }
        if (auto t = eat_punct(";"); !t.ok()) return t.take_error();
        return rule;
    }

    static bool valid_key(const std::string& key) {
        if (key.empty()) return false;
        return std::all_of(key.begin(), key.end(), [](char c) {
            return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
        });
    }

    Result<Condition> parse_condition() {
        auto key = eat(TokenKind::Ident, "context key");
        if (!key.ok()) return key.take_error();
        if (!valid_key(key.value().text)) {
            return make_error(Err::SyntaxError,
                              "line " + std::to_string(key.value().line) + ", col " +
                                  std::to_string(key.value().col) +
                                  ": context key must match [a-z0-9_.]+");
        }

        CondOp op;
        if (check(TokenKind::Punct) && current().text == "==") {
            op = CondOp::Eq;
        } else if (check(TokenKind::Punct) && current().text == "!=") {
            op = CondOp::Ne;
        } else if (check(TokenKind::Ident) && current().text == "in") {
            op = CondOp::In;
        } else if (check(TokenKind::Ident) && current().text == "before") {
            op = CondOp::Before;
        } else if (check(TokenKind::Ident) && current().text == "after") {
            op = CondOp::After;
        } else {
            return expected("an operator (==, !=, in, before, after)");
        }
        ++index_;

        Condition condition{key.take().text, op, {}};
        if (op == CondOp::In) {
            if (auto t = eat_punct("["); !t.ok()) return t.take_error();
            while (true) {
                auto value = parse_scalar();
                if (!value.ok()) return value.take_error();
                condition.values.push_back(value.take());
                if (check(TokenKind::Punct) && current().text == ",") {
                    ++index_;
                    continue;
                }
                break;
            }
            if (auto t = eat_punct("]"); !t.ok()) return t.take_error();
        } else {
            auto value = parse_scalar();
            if (!value.ok()) return value.take_error();
            if (op == CondOp::Before || op == CondOp::After) {
                // Time literals normalize to epoch seconds at parse time.
                auto ts = to_timestamp(value.value());
                if (!ts) {
                    return make_error(Err::SyntaxError,
                                      "line " + std::to_string(current().line) +
                                          ": before/after needs an integer or RFC 3339 literal");
                }
                condition.values.push_back(*ts);
            } else {
                condition.values.push_back(value.take());
            }
        }
        return condition;
    }

    Result<ContextValue> parse_scalar() {
        if (check(TokenKind::String)) {
            return ContextValue{tokens_[index_++].text};
        }
        if (check(TokenKind::Integer)) {
            return ContextValue{static_cast<std::int64_t>(std::stoll(tokens_[index_++].text))};
        }
        return expected("a string or integer literal");
    }

    static std::optional<std::int64_t> to_timestamp(const ContextValue& value) {
        if (std::holds_alternative<std::int64_t>(value)) return std::get<std::int64_t>(value);
        return parse_rfc3339_utc(std::get<std::string>(value));
    }

    std::vector<Token> tokens_;
    std::size_t index_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation

std::string quote(const std::string& text) { return "\"" + text + "\""; }

std::string value_to_string(const ContextValue& value) {
    if (std::holds_alternative<std::int64_t>(value)) {
        return std::to_string(std::get<std::int64_t>(value));
    }
    return quote(std::get<std::string>(value));
}

bool resource_matches(const std::string& pattern, const std::string& resource) {
    if (pattern == "*") return true;
    if (pattern.size() >= 2 && pattern.ends_with("**")) {
        return resource.starts_with(pattern.substr(0, pattern.size() - 2));
    }
    return pattern == resource;
}

std::optional<std::int64_t> context_timestamp(const ContextValue& value) {
    if (std::holds_alternative<std::int64_t>(value)) return std::get<std::int64_t>(value);
    return parse_rfc3339_utc(std::get<std::string>(value));
}

bool condition_holds(const Condition& condition, const Context& context) {
    auto it = context.find(condition.key);
    if (it == context.end()) return false;  // missing key fails closed
    const ContextValue& have = it->second;
    switch (condition.op) {
        case CondOp::Eq:
            return have == condition.values.front();
        case CondOp::Ne:
            // A type mismatch is a malformed comparison, not an inequality.
            return have.index() == condition.values.front().index() &&
                   have != condition.values.front();
        case CondOp::In:
            return std::find(condition.values.begin(), condition.values.end(), have) !=
                   condition.values.end();
        case CondOp::Before:
        case CondOp::After: {
            auto ts = context_timestamp(have);
            if (!ts) return false;
            std::int64_t bound = std::get<std::int64_t>(condition.values.front());
            return condition.op == CondOp::Before ? *ts < bound : *ts > bound;
        }
    }
    return false;
}

}  // namespace

std::string_view cond_op_name(CondOp op) {
    switch (op) {
        case CondOp::Eq: return "==";
        case CondOp::Ne: return "!=";
        case CondOp::In: return "in";
        case CondOp::Before: return "before";
        case CondOp::After: return "after";
    }
    return "?";
}

std::string Condition::to_string() const {
    std::string out = key;
    out += ' ';
    out += cond_op_name(op);
    out += ' ';
    if (op == CondOp::In) {
        out += '[';
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out += ", ";
            out += value_to_string(values[i]);
        }
        out += ']';
    } else {
        out += value_to_string(values.front());
    }
    return out;
}

std::string_view rule_outcome_name(RuleOutcome outcome) {
    switch (outcome) {
        case RuleOutcome::Matched: return "matched";
        case RuleOutcome::PrincipalMismatch: return "principal_mismatch";
        case RuleOutcome::ActionMismatch: return "action_mismatch";
        case RuleOutcome::ResourceMismatch: return "resource_mismatch";
        case RuleOutcome::ConditionFailed: return "condition_failed";
    }
    return "?";
}

std::optional<std::int64_t> parse_rfc3339_utc(std::string_view text) {
    std::tm tm{};
    std::string owned(text);
    const char* end = strptime(owned.c_str(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    if (!end || *end != '\0') return std::nullopt;
    return static_cast<std::int64_t>(timegm(&tm));
}

Result<PolicySet> parse_policy(std::string_view source) {
    auto tokens = Lexer(source).run();
    if (!tokens.ok()) return tokens.take_error();
    auto rules = Parser(tokens.take()).run();
    if (!rules.ok()) return rules.take_error();
    return PolicySet{rules.take(), std::string(source)};
}

Decision evaluate(const PolicySet& policies, const AccessRequest& request, UnixTime now) {
    Decision decision;
    decision.evaluated_at = now;

    for (const auto& rule : policies.rules) {
        RuleTrace trace{rule.rule_id, RuleOutcome::Matched, ""};
        if (!rule.principal.matches(request.spiffe_id)) {
            trace.outcome = RuleOutcome::PrincipalMismatch;
            trace.failing_clause = "principal " + quote(rule.principal.text());
        } else if (rule.action != "*" && rule.action != request.action) {
            trace.outcome = RuleOutcome::ActionMismatch;
            trace.failing_clause = "action " + quote(rule.action);
        } else if (!resource_matches(rule.resource, request.resource)) {
            trace.outcome = RuleOutcome::ResourceMismatch;
            trace.failing_clause = "resource " + quote(rule.resource);
        } else {
            for (const auto& condition : rule.conditions) {
                if (!condition_holds(condition, request.context)) {
                    trace.outcome = RuleOutcome::ConditionFailed;
                    trace.failing_clause = condition.to_string();
                    break;
                }
            }
        }
        if (trace.outcome == RuleOutcome::Matched) {
            if (!decision.matched_rule_id || rule.rule_id < *decision.matched_rule_id) {
                decision.matched_rule_id = rule.rule_id;
            }
        }
        decision.trace.push_back(std::move(trace));
    }
    std::sort(decision.trace.begin(), decision.trace.end(),
              [](const RuleTrace& a, const RuleTrace& b) { return a.rule_id < b.rule_id; });
    decision.allow = decision.matched_rule_id.has_value();
    return decision;
}

std::string explain(const Decision& decision) {
    std::string out = decision.allow ? "ALLOW via " + *decision.matched_rule_id
                                     : std::string("DENY (default)");
    for (const auto& trace : decision.trace) {
        out += '\n';
        out += "  " + trace.rule_id + ": " + std::string(rule_outcome_name(trace.outcome));
        if (!trace.failing_clause.empty()) {
            out += " (" + trace.failing_clause + ")";
        }
    }
    return out;
}

nlohmann::json Decision::to_json() const {
    nlohmann::json trace_doc = nlohmann::json::array();
    for (const auto& t : trace) {
        trace_doc.push_back({{"rule_id", t.rule_id},
                             {"outcome", std::string(rule_outcome_name(t.outcome))},
                             {"failing_clause", t.failing_clause}});
    }
    return {{"allow", allow},
            {"matched_rule_id", matched_rule_id ? nlohmann::json(*matched_rule_id)
                                                : nlohmann::json(nullptr)},
            {"evaluated_at", evaluated_at},
            {"trace", std::move(trace_doc)}};
}

}  // namespace minispiffe::policy
