#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adplan/error.hpp"
#include "adplan/types.hpp"

namespace adplan {

// Boolean predicate over categorical attributes.
//
//   expr   := term ('OR' term)*
//   term   := factor ('AND' factor)*
//   factor := 'NOT' factor | '(' expr ')' | 'TRUE'
//           | attr '=' value | attr 'IN' '{' value (',' value)* '}'
//
// Identifiers and values are [A-Za-z0-9_]+; keywords are upper case.
struct TargetingExpr {
  enum class Kind { always, equals, in, not_, and_, or_ };

  Kind kind = Kind::always;
  std::string attribute;
  std::vector<std::string> values;  // one value for equals
  std::vector<TargetingExpr> children;

  bool operator==(const TargetingExpr&) const = default;

  static TargetingExpr always_true() { return {}; }
  static TargetingExpr equals(std::string attr, std::string value) {
    return {Kind::equals, std::move(attr), {std::move(value)}, {}};
  }
  static TargetingExpr in(std::string attr, std::vector<std::string> values) {
    return {Kind::in, std::move(attr), std::move(values), {}};
  }
  static TargetingExpr negate(TargetingExpr child) { return {Kind::not_, {}, {}, {std::move(child)}}; }
  static TargetingExpr all_of(std::vector<TargetingExpr> children) {
    return {Kind::and_, {}, {}, std::move(children)};
  }
  static TargetingExpr any_of(std::vector<TargetingExpr> children) {
    return {Kind::or_, {}, {}, std::move(children)};
  }
};

namespace detail {

class TargetingParser {
 public:
  explicit TargetingParser(std::string_view text) : text_(text) {}

  TargetingExpr parse() {
    TargetingExpr e = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail({"AND", "OR", "end of input"});
    return e;
  }

 private:
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) ++pos_;
  }

  std::string_view peek_word() {
    skip_space();
    std::size_t end = pos_;
    while (end < text_.size() && ident_char(text_[end])) ++end;
    return text_.substr(pos_, end - pos_);
  }

  bool accept_keyword(std::string_view kw) {
    if (peek_word() == kw) {
      pos_ += kw.size();
      return true;
    }
    return false;
  }

  bool accept_char(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect_char(char c, std::vector<std::string> expected) {
    if (!accept_char(c)) fail(std::move(expected));
  }

  static bool is_keyword(std::string_view w) {
    return w == "AND" || w == "OR" || w == "NOT" || w == "IN" || w == "TRUE";
  }

  std::string identifier(std::vector<std::string> expected) {
    std::string_view w = peek_word();
    if (w.empty() || is_keyword(w)) fail(std::move(expected));
    pos_ += w.size();
    return std::string(w);
  }

  [[noreturn]] void fail(std::vector<std::string> expected) {
    skip_space();
    std::string found = pos_ < text_.size() ? "'" + std::string(1, text_[pos_]) + "'" : "end of input";
    std::string msg = "syntax error at offset " + std::to_string(pos_) + ": expected one of {";
    for (std::size_t i = 0; i < expected.size(); ++i) msg += (i ? ", " : "") + expected[i];
    msg += "}, found " + found;
    throw syntax_error(pos_, std::move(expected), msg);
  }

  TargetingExpr parse_expr() {
    std::vector<TargetingExpr> terms;
    terms.push_back(parse_term());
    while (accept_keyword("OR")) terms.push_back(parse_term());
    if (terms.size() == 1) return std::move(terms.front());
    return TargetingExpr::any_of(std::move(terms));
  }

  TargetingExpr parse_term() {
    std::vector<TargetingExpr> factors;
    factors.push_back(parse_factor());
    while (accept_keyword("AND")) factors.push_back(parse_factor());
    if (factors.size() == 1) return std::move(factors.front());
    return TargetingExpr::all_of(std::move(factors));
  }

  TargetingExpr parse_factor() {
    if (accept_keyword("NOT")) return TargetingExpr::negate(parse_factor());
    if (accept_keyword("TRUE")) return TargetingExpr::always_true();
    if (accept_char('(')) {
      TargetingExpr inner = parse_expr();
      expect_char(')', {"')'", "AND", "OR"});
      return inner;
    }
    std::string attr = identifier({"NOT", "TRUE", "'('", "identifier"});
    if (accept_char('=')) return TargetingExpr::equals(std::move(attr), identifier({"value"}));
    if (!accept_keyword("IN")) fail({"'='", "IN"});
    expect_char('{', {"'{'"});
    std::vector<std::string> values;
    values.push_back(identifier({"value"}));
    while (accept_char(',')) values.push_back(identifier({"value"}));
    expect_char('}', {"','", "'}'"});
    return TargetingExpr::in(std::move(attr), std::move(values));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline TargetingExpr parse_targeting(std::string_view text) {
  return detail::TargetingParser(text).parse();
}

// Inverse of parse_targeting for trees the parser can produce.
inline std::string to_string(const TargetingExpr& e) {
  using K = TargetingExpr::Kind;
  auto nested = [](const TargetingExpr& c) {
    bool group = c.kind == K::and_ || c.kind == K::or_;
    return group ? "(" + to_string(c) + ")" : to_string(c);
  };
  switch (e.kind) {
    case K::always:
      return "TRUE";
    case K::equals:
      return e.attribute + " = " + e.values.front();
    case K::in: {
      std::string out = e.attribute + " IN {";
      for (std::size_t i = 0; i < e.values.size(); ++i) out += (i ? ", " : "") + e.values[i];
      return out + "}";
    }
    case K::not_:
      return "NOT " + nested(e.children.front());
    case K::and_:
    case K::or_: {
      std::string out;
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out += e.kind == K::and_ ? " AND " : " OR ";
        out += nested(e.children[i]);
      }
      return out;
    }
  }
  return {};
}

// Classical two-valued evaluation: a predicate on an absent attribute is false.
inline bool eligible(const AttributeMap& attrs, const TargetingExpr& e) {
  using K = TargetingExpr::Kind;
  switch (e.kind) {
    case K::always:
      return true;
    case K::equals: {
      auto it = attrs.find(e.attribute);
      return it != attrs.end() && it->second == e.values.front();
    }
    case K::in: {
      auto it = attrs.find(e.attribute);
      return it != attrs.end() && std::find(e.values.begin(), e.values.end(), it->second) != e.values.end();
    }
    case K::not_:
      return !eligible(attrs, e.children.front());
    case K::and_:
      return std::all_of(e.children.begin(), e.children.end(),
                         [&](const TargetingExpr& c) { return eligible(attrs, c); });
    case K::or_:
      return std::any_of(e.children.begin(), e.children.end(),
                         [&](const TargetingExpr& c) { return eligible(attrs, c); });
  }
  return false;
}

// Structural checks: AND/OR non-empty, NOT unary, attribute names non-empty.
inline bool well_formed(const TargetingExpr& e) {
  using K = TargetingExpr::Kind;
  switch (e.kind) {
    case K::always:
      return true;
    case K::equals:
      return !e.attribute.empty() && e.values.size() == 1;
    case K::in:
      return !e.attribute.empty() && !e.values.empty();
    case K::not_:
      return e.children.size() == 1 && well_formed(e.children.front());
    case K::and_:
    case K::or_:
      return !e.children.empty() && std::all_of(e.children.begin(), e.children.end(), well_formed);
  }
  return false;
}

// Every (node, contract) pair whose attributes satisfy the contract's
// targeting, sorted by (node id, contract id).
template <typename NodeRange, typename ContractRange>
std::vector<EdgeRef> build_edges(const NodeRange& nodes, const ContractRange& contracts) {
  std::vector<EdgeRef> edges;
  for (const auto& node : nodes)
    for (const auto& contract : contracts)
      if (eligible(node.attributes, contract.targeting)) edges.push_back({node.id, contract.id});
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace adplan
