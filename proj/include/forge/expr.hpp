#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace forge::expr {

using Value = nlohmann::json;

// Small declarative expression language shared by the judge, the solution
// derivations and the in-page runtime.
//
//   expr    := or
//   or      := and ("or" and)*
//   and     := not ("and" not)*
//   not     := "not" not | cmp
//   cmp     := add (("=="|"!="|"<"|"<="|">"|">="|"in") add)?
//   add     := mul (("+"|"-") mul)*
//   mul     := unary (("*"|"/") unary)*
//   unary   := "-" unary | primary
//   primary := number | string | ~"base64" | true | false | null
//            | ident | $ident | ident "(" args ")" | "(" expr ")" | "[" args "]"
//
// Bare identifiers resolve against derived values, then submission state.
// $identifiers resolve against task constants.
struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind { Literal, Ident, Const, Call, List, Unary, Binary };
  Kind kind = Kind::Literal;
  Value literal;
  std::string name;  // identifier, constant, function or operator
  std::vector<NodePtr> args;
};

struct Env {
  const Value* state = nullptr;
  const Value* constants = nullptr;
  const Value* derived = nullptr;
};

class Expr {
public:
  Expr() = default;
  // Throws ParseError with the offending offset.
  static Expr parse(std::string_view source);

  Value eval(const Env& env) const;
  bool test(const Env& env) const;

  // Canonical source. With encode_strings, string literals are emitted as ~"base64".
  std::string to_source(bool encode_strings = false) const;

  // Every bare identifier referenced.
  std::set<std::string> identifiers() const;
  // Copy with bare identifiers renamed per the map.
  Expr rename(const std::map<std::string, std::string>& names) const;

  const NodePtr& root() const noexcept { return root_; }
  bool empty() const noexcept { return root_ == nullptr; }

private:
  explicit Expr(NodePtr root) : root_(std::move(root)) {}
  NodePtr root_;
};

bool truthy(const Value& v);
// Equality with numeric coercion: "80" == 80, "11440.00" == 11440.
bool loose_equal(const Value& a, const Value& b);
// Text form used when a value is shown on a page or compared as a string.
std::string display(const Value& v);

// Names of the built-in functions, for diagnostics and the runtime parity test.
const std::vector<std::string>& builtin_functions();

} // namespace forge::expr
