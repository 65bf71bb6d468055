#include "forge/expr.hpp"

#include "forge/codec.hpp"
#include "forge/errors.hpp"
#include "forge/util.hpp"

#include <charconv>
#include <cmath>
#include <optional>

namespace forge::expr {

namespace {

struct FunctionSig {
  const char* name;
  int min_args;
  int max_args;  // -1 = variadic
};

constexpr FunctionSig kFunctions[] = {
    {"weekday", 1, 1},  {"date_between", 3, 3}, {"day", 1, 1},    {"month", 1, 1},
    {"year", 1, 1},     {"is_date", 1, 1},      {"number", 1, 1}, {"fixed", 2, 2},
    {"round", 2, 2},    {"lower", 1, 1},        {"upper", 1, 1},  {"trim", 1, 1},
    {"lookup", 2, 2},   {"range_lookup", 2, 2}, {"concat", 1, -1}, {"if", 3, 3},
    {"min", 2, -1},     {"max", 2, -1},
};

const FunctionSig* find_function(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (name == f.name) return &f;
  }
  return nullptr;
}

constexpr const char* kWeekdays[] = {"Monday", "Tuesday", "Wednesday", "Thursday",
                                     "Friday", "Saturday", "Sunday"};

// ---- lexer ---------------------------------------------------------------

struct Token {
  enum class Type { End, Number, String, Ident, Const, Op, LParen, RParen, LBracket, RBracket, Comma };
  Type type = Type::End;
  std::string text;
  Value value;
  std::size_t offset = 0;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      Token t;
      t.offset = pos_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else if (c == '"') {
        t.type = Token::Type::String;
        t.value = lex_string();
      } else if (c == '~') {
        ++pos_;
        if (pos_ >= src_.size() || src_[pos_] != '"') fail("expected string after ~");
        t.type = Token::Type::String;
        const std::string enc = lex_string();
        try {
          t.value = decode_secret(enc);
        } catch (const DecodeError&) {
          fail("bad encoded literal");
        }
      } else if (c == '$' || std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const bool is_const = c == '$';
        if (is_const) ++pos_;
        const std::size_t b = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          ++pos_;
        }
        if (pos_ == b) fail("empty identifier");
        t.type = is_const ? Token::Type::Const : Token::Type::Ident;
        t.text = std::string(src_.substr(b, pos_ - b));
      } else if (c == '(') {
        t.type = Token::Type::LParen;
        ++pos_;
      } else if (c == ')') {
        t.type = Token::Type::RParen;
        ++pos_;
      } else if (c == '[') {
        t.type = Token::Type::LBracket;
        ++pos_;
      } else if (c == ']') {
        t.type = Token::Type::RBracket;
        ++pos_;
      } else if (c == ',') {
        t.type = Token::Type::Comma;
        ++pos_;
      } else {
        lex_op(t);
      }
      out.push_back(std::move(t));
    }
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression: " + what + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  void lex_number(Token& t) {
    const std::size_t b = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    double d = 0;
    auto [p, ec] = std::from_chars(src_.data() + b, src_.data() + pos_, d);
    if (ec != std::errc()) fail("bad number");
    t.type = Token::Type::Number;
    t.value = d;
  }

  std::string lex_string() {
    const std::size_t b = pos_;
    ++pos_;
    while (pos_ < src_.size() && src_[pos_] != '"') {
      if (src_[pos_] == '\\') ++pos_;
      ++pos_;
    }
    if (pos_ >= src_.size()) fail("unterminated string");
    ++pos_;
    try {
      return nlohmann::json::parse(src_.substr(b, pos_ - b)).get<std::string>();
    } catch (const nlohmann::json::exception&) {
      fail("bad string escape");
    }
  }

  void lex_op(Token& t) {
    static constexpr const char* kOps[] = {"==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/"};
    for (const char* op : kOps) {
      const std::string_view o(op);
      if (src_.substr(pos_, o.size()) == o) {
        t.type = Token::Type::Op;
        t.text = std::string(o);
        pos_ += o.size();
        return;
      }
    }
    fail(std::string("unexpected character '") + src_[pos_] + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

// ---- parser --------------------------------------------------------------

NodePtr make_node(Node::Kind kind, std::string name = {}, std::vector<NodePtr> args = {},
                  Value literal = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->name = std::move(name);
  n->args = std::move(args);
  n->literal = std::move(literal);
  return n;
}

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  NodePtr run() {
    NodePtr n = parse_or();
    if (peek().type != Token::Type::End) fail("trailing input");
    return n;
  }

private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("expression: " + what + " at offset " + std::to_string(peek().offset));
  }

  const Token& peek() const { return toks_[i_]; }
  Token next() { return toks_[i_++]; }
  bool is_word(std::string_view w) const {
    return peek().type == Token::Type::Ident && peek().text == w;
  }
  bool is_op(std::string_view o) const { return peek().type == Token::Type::Op && peek().text == o; }

  NodePtr parse_or() {
    NodePtr l = parse_and();
    while (is_word("or")) {
      next();
      l = make_node(Node::Kind::Binary, "or", {l, parse_and()});
    }
    return l;
  }

  NodePtr parse_and() {
    NodePtr l = parse_not();
    while (is_word("and")) {
      next();
      l = make_node(Node::Kind::Binary, "and", {l, parse_not()});
    }
    return l;
  }

  NodePtr parse_not() {
    if (is_word("not")) {
      next();
      return make_node(Node::Kind::Unary, "not", {parse_not()});
    }
    return parse_cmp();
  }

  NodePtr parse_cmp() {
    NodePtr l = parse_add();
    static constexpr const char* kCmp[] = {"==", "!=", "<=", ">=", "<", ">"};
    for (const char* op : kCmp) {
      if (is_op(op)) {
        next();
        return make_node(Node::Kind::Binary, op, {l, parse_add()});
      }
    }
    if (is_word("in")) {
      next();
      return make_node(Node::Kind::Binary, "in", {l, parse_add()});
    }
    return l;
  }

  NodePtr parse_add() {
    NodePtr l = parse_mul();
    while (is_op("+") || is_op("-")) {
      const std::string op = next().text;
      l = make_node(Node::Kind::Binary, op, {l, parse_mul()});
    }
    return l;
  }

  NodePtr parse_mul() {
    NodePtr l = parse_unary();
    while (is_op("*") || is_op("/")) {
      const std::string op = next().text;
      l = make_node(Node::Kind::Binary, op, {l, parse_unary()});
    }
    return l;
  }

  NodePtr parse_unary() {
    if (is_op("-")) {
      next();
      return make_node(Node::Kind::Unary, "-", {parse_unary()});
    }
    return parse_primary();
  }

  std::vector<NodePtr> parse_args(Token::Type close) {
    std::vector<NodePtr> args;
    if (peek().type == close) {
      next();
      return args;
    }
    while (true) {
      args.push_back(parse_or());
      if (peek().type == Token::Type::Comma) {
        next();
        continue;
      }
      if (peek().type != close) fail("expected ',' or closing bracket");
      next();
      return args;
    }
  }

  NodePtr parse_primary() {
    const Token t = next();
    switch (t.type) {
    case Token::Type::Number:
    case Token::Type::String:
      return make_node(Node::Kind::Literal, {}, {}, t.value);
    case Token::Type::Const:
      return make_node(Node::Kind::Const, t.text);
    case Token::Type::LParen: {
      NodePtr n = parse_or();
      if (next().type != Token::Type::RParen) fail("expected ')'");
      return n;
    }
    case Token::Type::LBracket:
      return make_node(Node::Kind::List, {}, parse_args(Token::Type::RBracket));
    case Token::Type::Ident: {
      if (t.text == "true") return make_node(Node::Kind::Literal, {}, {}, true);
      if (t.text == "false") return make_node(Node::Kind::Literal, {}, {}, false);
      if (t.text == "null") return make_node(Node::Kind::Literal);
      if (t.text == "and" || t.text == "or" || t.text == "not" || t.text == "in") {
        --i_;
        fail("unexpected keyword '" + t.text + "'");
      }
      if (peek().type == Token::Type::LParen) {
        next();
        const FunctionSig* sig = find_function(t.text);
        if (!sig) {
          --i_;
          fail("unknown function '" + t.text + "'");
        }
        auto args = parse_args(Token::Type::RParen);
        const int n = static_cast<int>(args.size());
        if (n < sig->min_args || (sig->max_args >= 0 && n > sig->max_args)) {
          fail("wrong argument count for " + t.text);
        }
        return make_node(Node::Kind::Call, t.text, std::move(args));
      }
      return make_node(Node::Kind::Ident, t.text);
    }
    default:
      --i_;
      fail("unexpected token");
    }
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

// ---- evaluation ----------------------------------------------------------

std::optional<double> to_number(const Value& v) {
  if (v.is_number()) {
    const double d = v.get<double>();
    return std::isfinite(d) ? std::optional<double>(d) : std::nullopt;
  }
  if (v.is_boolean()) return std::nullopt;
  if (v.is_string()) {
    const std::string s = util::trim(v.get<std::string>());
    if (s.empty()) return std::nullopt;
    double d = 0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, d);
    if (ec != std::errc() || p != e || !std::isfinite(d)) return std::nullopt;
    return d;
  }
  return std::nullopt;
}

struct Date {
  int y = 0, m = 0, d = 0;
};

std::optional<Date> to_date(const Value& v) {
  if (!v.is_string()) return std::nullopt;
  Date out;
  if (!util::parse_iso_date(v.get<std::string>(), out.y, out.m, out.d)) return std::nullopt;
  return out;
}

// -1, 0, 1 or nullopt when incomparable.
std::optional<int> compare(const Value& a, const Value& b) {
  if (a.is_string() && b.is_string()) {
    const auto& x = a.get_ref<const std::string&>();
    const auto& y = b.get_ref<const std::string&>();
    auto nx = to_number(a);
    auto ny = to_number(b);
    if (nx && ny) return *nx < *ny ? -1 : (*nx > *ny ? 1 : 0);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  auto nx = to_number(a);
  auto ny = to_number(b);
  if (nx && ny) return *nx < *ny ? -1 : (*nx > *ny ? 1 : 0);
  return std::nullopt;
}

Value number_value(double d) {
  if (!std::isfinite(d)) return nullptr;
  return d;
}

Value eval_node(const Node& n, const Env& env);

Value call(const Node& n, const Env& env) {
  std::vector<Value> a;
  a.reserve(n.args.size());
  const std::string& f = n.name;
  if (f == "if") {
    return truthy(eval_node(*n.args[0], env)) ? eval_node(*n.args[1], env)
                                              : eval_node(*n.args[2], env);
  }
  for (const auto& arg : n.args) a.push_back(eval_node(*arg, env));

  if (f == "weekday") {
    auto d = to_date(a[0]);
    if (!d) return nullptr;
    return kWeekdays[util::weekday_index(d->y, d->m, d->d)];
  }
  if (f == "date_between") {
    auto d = to_date(a[0]);
    if (!d || !to_date(a[1]) || !to_date(a[2])) return false;
    const auto& s = a[0].get_ref<const std::string&>();
    return s >= a[1].get<std::string>() && s <= a[2].get<std::string>();
  }
  if (f == "day" || f == "month" || f == "year") {
    auto d = to_date(a[0]);
    if (!d) return nullptr;
    return static_cast<double>(f == "day" ? d->d : (f == "month" ? d->m : d->y));
  }
  if (f == "is_date") return to_date(a[0]).has_value();
  if (f == "number") {
    auto x = to_number(a[0]);
    return x ? Value(*x) : Value(nullptr);
  }
  if (f == "fixed" || f == "round") {
    auto x = to_number(a[0]);
    auto p = to_number(a[1]);
    if (!x || !p || *p < 0 || *p > 10) return nullptr;
    const int digits = static_cast<int>(*p);
    const double scale = std::pow(10.0, digits);
    // Half away from zero, matching the runtime's Math.round on magnitudes.
    const double mag = std::floor(std::fabs(*x) * scale + 0.5 + 1e-9) / scale;
    const double r = *x < 0 && mag != 0 ? -mag : mag;
    if (f == "round") return r;
    return util::fixed(r, digits);
  }
  if (f == "lower" || f == "upper" || f == "trim") {
    if (!a[0].is_string()) return nullptr;
    const auto& s = a[0].get_ref<const std::string&>();
    if (f == "trim") return util::trim(s);
    if (f == "lower") return util::to_lower(s);
    std::string u = s;
    for (char& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return u;
  }
  if (f == "lookup") {
    if (!a[0].is_object()) return nullptr;
    const std::string key = display(a[1]);
    auto it = a[0].find(key);
    return it == a[0].end() ? Value(nullptr) : *it;
  }
  if (f == "range_lookup") {
    if (!a[0].is_array() || a[1].is_null()) return nullptr;
    for (const auto& item : a[0]) {
      if (!item.is_object() || !item.contains("from") || !item.contains("to")) continue;
      auto lo = compare(a[1], item["from"]);
      auto hi = compare(a[1], item["to"]);
      if (lo && hi && *lo >= 0 && *hi <= 0) {
        return item.contains("value") ? item["value"] : Value(nullptr);
      }
    }
    return nullptr;
  }
  if (f == "concat") {
    std::string s;
    for (const auto& v : a) s += display(v);
    return s;
  }
  if (f == "min" || f == "max") {
    std::optional<double> best;
    for (const auto& v : a) {
      auto x = to_number(v);
      if (!x) return nullptr;
      if (!best || (f == "min" ? *x < *best : *x > *best)) best = x;
    }
    return *best;
  }
  return nullptr;
}

Value eval_node(const Node& n, const Env& env) {
  switch (n.kind) {
  case Node::Kind::Literal:
    return n.literal;
  case Node::Kind::Ident: {
    if (env.derived && env.derived->is_object()) {
      auto it = env.derived->find(n.name);
      if (it != env.derived->end()) return *it;
    }
    if (env.state && env.state->is_object()) {
      auto it = env.state->find(n.name);
      if (it != env.state->end()) return *it;
    }
    return nullptr;
  }
  case Node::Kind::Const: {
    if (env.constants && env.constants->is_object()) {
      auto it = env.constants->find(n.name);
      if (it != env.constants->end()) return *it;
    }
    return nullptr;
  }
  case Node::Kind::List: {
    Value out = Value::array();
    for (const auto& a : n.args) out.push_back(eval_node(*a, env));
    return out;
  }
  case Node::Kind::Call:
    return call(n, env);
  case Node::Kind::Unary: {
    if (n.name == "not") return !truthy(eval_node(*n.args[0], env));
    auto x = to_number(eval_node(*n.args[0], env));
    return x ? number_value(-*x) : Value(nullptr);
  }
  case Node::Kind::Binary:
    break;
  }

  const std::string& op = n.name;
  if (op == "and") {
    return truthy(eval_node(*n.args[0], env)) && truthy(eval_node(*n.args[1], env));
  }
  if (op == "or") {
    return truthy(eval_node(*n.args[0], env)) || truthy(eval_node(*n.args[1], env));
  }
  const Value l = eval_node(*n.args[0], env);
  const Value r = eval_node(*n.args[1], env);
  if (op == "==") return loose_equal(l, r);
  if (op == "!=") return !loose_equal(l, r);
  if (op == "in") {
    if (r.is_array()) {
      for (const auto& x : r) {
        if (loose_equal(l, x)) return true;
      }
      return false;
    }
    if (r.is_object()) return r.contains(display(l));
    return false;
  }
  if (op == "<" || op == "<=" || op == ">" || op == ">=") {
    auto c = compare(l, r);
    if (!c) return false;
    if (op == "<") return *c < 0;
    if (op == "<=") return *c <= 0;
    if (op == ">") return *c > 0;
    return *c >= 0;
  }
  auto x = to_number(l);
  auto y = to_number(r);
  if (!x || !y) return nullptr;
  if (op == "+") return number_value(*x + *y);
  if (op == "-") return number_value(*x - *y);
  if (op == "*") return number_value(*x * *y);
  if (*y == 0) return nullptr;
  return number_value(*x / *y);
}

// ---- printing ------------------------------------------------------------

int precedence(const Node& n) {
  if (n.kind == Node::Kind::Binary) {
    if (n.name == "or") return 1;
    if (n.name == "and") return 2;
    if (n.name == "+" || n.name == "-") return 5;
    if (n.name == "*" || n.name == "/") return 6;
    return 4;
  }
  if (n.kind == Node::Kind::Unary) return n.name == "not" ? 3 : 7;
  return 8;
}

std::string print(const Node& n, bool enc);

std::string print_child(const Node& child, int min_prec, bool enc) {
  std::string s = print(child, enc);
  return precedence(child) < min_prec ? "(" + s + ")" : s;
}

std::string print(const Node& n, bool enc) {
  switch (n.kind) {
  case Node::Kind::Literal:
    if (n.literal.is_string()) {
      if (enc) return "~\"" + encode_secret(n.literal.get<std::string>()) + "\"";
      return n.literal.dump();
    }
    if (n.literal.is_number()) return display(n.literal);
    return n.literal.dump();
  case Node::Kind::Ident:
    return n.name;
  case Node::Kind::Const:
    return "$" + n.name;
  case Node::Kind::List:
  case Node::Kind::Call: {
    std::string s = n.kind == Node::Kind::Call ? n.name + "(" : "[";
    for (std::size_t i = 0; i < n.args.size(); ++i) {
      if (i) s += ", ";
      s += print(*n.args[i], enc);
    }
    return s + (n.kind == Node::Kind::Call ? ")" : "]");
  }
  case Node::Kind::Unary:
    if (n.name == "not") return "not " + print_child(*n.args[0], 3, enc);
    return "-" + print_child(*n.args[0], 7, enc);
  case Node::Kind::Binary: {
    const int p = precedence(n);
    // Left-associative: the right operand needs parentheses at equal precedence.
    const int left_min = p == 4 ? 5 : p;
    const int right_min = p + 1;
    return print_child(*n.args[0], left_min, enc) + " " + n.name + " " +
           print_child(*n.args[1], right_min, enc);
  }
  }
  return {};
}

void collect_idents(const Node& n, std::set<std::string>& out) {
  if (n.kind == Node::Kind::Ident) out.insert(n.name);
  for (const auto& a : n.args) collect_idents(*a, out);
}

NodePtr rename_node(const NodePtr& n, const std::map<std::string, std::string>& names) {
  auto copy = std::make_shared<Node>(*n);
  if (copy->kind == Node::Kind::Ident) {
    auto it = names.find(copy->name);
    if (it != names.end()) copy->name = it->second;
  }
  for (auto& a : copy->args) a = rename_node(a, names);
  return copy;
}

// Number.prototype.toString formatting, so pages and the runtime print the same text.
std::string number_text(double d) {
  if (std::isnan(d)) return "NaN";
  if (std::isinf(d)) return d < 0 ? "-Infinity" : "Infinity";
  if (d == 0) return "0";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, std::fabs(d), std::chars_format::scientific);
  const std::string sci(buf, p);
  const auto epos = sci.find('e');
  std::string digits;
  for (char c : sci.substr(0, epos)) {
    if (c != '.') digits += c;
  }
  while (digits.size() > 1 && digits.back() == '0') digits.pop_back();
  const int k = static_cast<int>(digits.size());
  const int n = std::stoi(sci.substr(epos + 1)) + 1;
  std::string out = d < 0 ? "-" : "";
  if (k <= n && n <= 21) {
    out += digits + std::string(static_cast<std::size_t>(n - k), '0');
  } else if (0 < n && n <= 21) {
    out += digits.substr(0, static_cast<std::size_t>(n)) + "." + digits.substr(static_cast<std::size_t>(n));
  } else if (-6 < n && n <= 0) {
    out += "0." + std::string(static_cast<std::size_t>(-n), '0') + digits;
  } else {
    out += digits.substr(0, 1);
    if (k > 1) out += "." + digits.substr(1);
    out += n - 1 >= 0 ? "e+" : "e-";
    out += std::to_string(std::abs(n - 1));
  }
  return out;
}

} // namespace

Expr Expr::parse(std::string_view source) {
  Lexer lex(source);
  Parser p(lex.run());
  return Expr(p.run());
}

Value Expr::eval(const Env& env) const {
  if (!root_) return nullptr;
  return eval_node(*root_, env);
}

bool Expr::test(const Env& env) const { return truthy(eval(env)); }

std::string Expr::to_source(bool encode_strings) const {
  return root_ ? print(*root_, encode_strings) : std::string();
}

std::set<std::string> Expr::identifiers() const {
  std::set<std::string> out;
  if (root_) collect_idents(*root_, out);
  return out;
}

Expr Expr::rename(const std::map<std::string, std::string>& names) const {
  if (!root_) return *this;
  return Expr(rename_node(root_, names));
}

bool truthy(const Value& v) {
  if (v.is_null()) return false;
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>() != 0.0;
  if (v.is_string()) return !v.get_ref<const std::string&>().empty();
  return !v.empty();
}

bool loose_equal(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return a.is_null() && b.is_null();
  if (a.is_boolean() || b.is_boolean()) {
    return a.is_boolean() && b.is_boolean() && a.get<bool>() == b.get<bool>();
  }
  if (a.is_number() || b.is_number()) {
    auto x = to_number(a);
    auto y = to_number(b);
    return x && y && *x == *y;
  }
  if (a.is_string() && b.is_string()) return a.get<std::string>() == b.get<std::string>();
  return a == b;
}

std::string display(const Value& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) {
    return number_text(v.get<double>());
  }
  return v.dump();
}

const std::vector<std::string>& builtin_functions() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : kFunctions) out.emplace_back(f.name);
    return out;
  }();
  return names;
}

} // namespace forge::expr
