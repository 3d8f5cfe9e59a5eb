#pragma once

// Scalar expression trees over the coordinates x1, x2, x3 with a
// recursive-descent parser, a minimal-parenthesis printer whose output
// re-parses to the same tree, and third-order jet evaluation.

#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include "conj3/errors.hpp"
#include "conj3/jet.hpp"

namespace conj3 {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Const, Var, Neg, Bin, Call };
  Kind kind = Kind::Const;
  double value = 0.0;     // Const payload
  int axis = 0;           // Var payload: 0, 1, 2
  char op = 0;            // Bin payload: + - * / ^
  std::string fn;         // Call payload
  ExprPtr a, b;
};

inline ExprPtr make_const(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Const;
  e->value = v;
  return e;
}
inline ExprPtr make_var(int axis) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Var;
  e->axis = axis;
  return e;
}
inline ExprPtr make_neg(ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Neg;
  e->a = std::move(a);
  return e;
}
inline ExprPtr make_bin(char op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Bin;
  e->op = op;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}
inline ExprPtr make_call(std::string fn, ExprPtr a, ExprPtr b = nullptr) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Call;
  e->fn = std::move(fn);
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

// --- Printing ---------------------------------------------------------------

namespace detail {

inline int prec(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Const:
      return e.value < 0.0 ? 2 : 4;
    case Expr::Kind::Var:
    case Expr::Kind::Call:
      return 4;
    case Expr::Kind::Neg:
      return 2;
    case Expr::Kind::Bin:
      if (e.op == '+' || e.op == '-') return 1;
      if (e.op == '*' || e.op == '/') return 2;
      return 3;  // '^'
  }
  return 4;
}

inline std::string num_to_string(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline void print_rec(const Expr& e, int required, std::string& out) {
  bool parens = prec(e) < required;
  if (parens) out.push_back('(');
  switch (e.kind) {
    case Expr::Kind::Const:
      out += num_to_string(e.value);
      break;
    case Expr::Kind::Var:
      out.push_back('x');
      out.push_back(static_cast<char>('1' + e.axis));
      break;
    case Expr::Kind::Neg:
      out.push_back('-');
      print_rec(*e.a, 3, out);
      break;
    case Expr::Kind::Bin: {
      int p = prec(e);
      if (e.op == '^') {
        // Grammar restricts the base to an atom and the exponent to a
        // numeric constant.
        print_rec(*e.a, 4, out);
        out.push_back('^');
        print_rec(*e.b, 4, out);
      } else {
        print_rec(*e.a, p, out);
        out.push_back(e.op);
        print_rec(*e.b, p + 1, out);
      }
      break;
    }
    case Expr::Kind::Call:
      out += e.fn;
      out.push_back('(');
      print_rec(*e.a, 0, out);
      if (e.b) {
        out.push_back(',');
        print_rec(*e.b, 0, out);
      }
      out.push_back(')');
      break;
  }
  if (parens) out.push_back(')');
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::string out;
  detail::print_rec(e, 0, out);
  return out;
}
inline std::string to_string(const ExprPtr& e) { return to_string(*e); }

// --- Parsing ----------------------------------------------------------------

namespace detail {

struct Token {
  enum class Type { Number, Ident, Punct, End };
  Type type = Type::End;
  double number = 0.0;
  std::string text;
  char punct = 0;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }
  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    tok_ = Token{};
    tok_.offset = pos_;
    if (pos_ >= src_.size()) {
      tok_.type = Token::Type::End;
      return;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin)
        throw ParseError(pos_, "malformed number");
      tok_.type = Token::Type::Number;
      tok_.number = v;
      pos_ += static_cast<std::size_t>(end - begin);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_'))
        ++pos_;
      tok_.type = Token::Type::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::string("+-*/^(),").find(c) != std::string::npos) {
      tok_.type = Token::Type::Punct;
      tok_.punct = c;
      ++pos_;
      return;
    }
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  ExprPtr parse() {
    ExprPtr e = parse_expr();
    const Token& t = lex_.peek();
    if (t.type != Token::Type::End)
      throw ParseError(t.offset, "trailing input");
    return e;
  }

 private:
  bool is_punct(char c) const {
    return lex_.peek().type == Token::Type::Punct && lex_.peek().punct == c;
  }
  void expect(char c, const char* what) {
    if (!is_punct(c))
      throw ParseError(lex_.peek().offset,
                       std::string("expected '") + c + "' " + what);
    lex_.take();
  }
  // An atom may not directly follow another atom; require an operator.
  void reject_juxtaposition() {
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Number || t.type == Token::Type::Ident ||
        (t.type == Token::Type::Punct && t.punct == '('))
      throw ParseError(t.offset, "implicit multiplication is not supported");
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (is_punct('+') || is_punct('-')) {
      char op = lex_.take().punct;
      e = make_bin(op, e, parse_term());
    }
    reject_juxtaposition();
    return e;
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    reject_juxtaposition();
    while (is_punct('*') || is_punct('/')) {
      char op = lex_.take().punct;
      e = make_bin(op, e, parse_factor());
      reject_juxtaposition();
    }
    return e;
  }

  ExprPtr parse_factor() {
    if (is_punct('-')) {
      lex_.take();
      ExprPtr inner = parse_factor();
      // Fold unary minus on a literal so "-2" is the constant -2.
      if (inner->kind == Expr::Kind::Const) return make_const(-inner->value);
      return make_neg(inner);
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_atom();
    if (is_punct('^')) {
      lex_.take();
      ExprPtr expo = parse_exponent();
      return make_bin('^', base, expo);
    }
    return base;
  }

  // Exponents must fold to numeric constants at parse time.
  ExprPtr parse_exponent() {
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Punct && t.punct == '-') {
      lex_.take();
      ExprPtr inner = parse_exponent();
      return make_const(-inner->value);
    }
    if (t.type == Token::Type::Punct && t.punct == '(') {
      lex_.take();
      ExprPtr inner = parse_exponent();
      expect(')', "to close exponent");
      return inner;
    }
    if (t.type == Token::Type::Number) return make_const(lex_.take().number);
    if (t.type == Token::Type::Ident && (t.text == "pi" || t.text == "e")) {
      ExprPtr c = make_const(t.text == "pi" ? 3.14159265358979323846
                                            : 2.71828182845904523536);
      lex_.take();
      return c;
    }
    throw ParseError(t.offset, "exponent must be a numeric constant");
  }

  ExprPtr parse_atom() {
    const Token& t = lex_.peek();
    if (t.type == Token::Type::Number) return make_const(lex_.take().number);
    if (t.type == Token::Type::Ident) {
      Token id = lex_.take();
      if (is_punct('(')) return parse_call(id);
      if (id.text == "x1") return make_var(0);
      if (id.text == "x2") return make_var(1);
      if (id.text == "x3") return make_var(2);
      if (id.text == "pi") return make_const(3.14159265358979323846);
      if (id.text == "e") return make_const(2.71828182845904523536);
      throw ParseError(id.offset, "unknown identifier '" + id.text + "'");
    }
    if (t.type == Token::Type::Punct && t.punct == '(') {
      lex_.take();
      ExprPtr e = parse_expr();
      expect(')', "to close group");
      return e;
    }
    throw ParseError(t.offset, "expected a value");
  }

  ExprPtr parse_call(const Token& id) {
    std::string fn = id.text;
    if (fn == "arccos") fn = "acos";
    bool binary = fn == "atan2";
    bool known = binary || fn == "sin" || fn == "cos" || fn == "exp" ||
                 fn == "log" || fn == "sqrt" || fn == "atan" || fn == "acos";
    if (!known)
      throw ParseError(id.offset, "unknown function '" + id.text + "'");
    expect('(', "to open arguments");
    ExprPtr a = parse_expr();
    ExprPtr b;
    if (binary) {
      if (!is_punct(','))
        throw ParseError(lex_.peek().offset,
                         "'" + fn + "' takes two arguments");
      lex_.take();
      b = parse_expr();
    } else if (is_punct(',')) {
      throw ParseError(lex_.peek().offset, "'" + fn + "' takes one argument");
    }
    expect(')', "to close arguments");
    return make_call(fn, a, b);
  }

  Lexer lex_;
};

}  // namespace detail

inline ExprPtr parse_expr(const std::string& src) {
  detail::Parser p(src);
  return p.parse();
}

// --- Evaluation -------------------------------------------------------------

// Jet evaluation with arbitrary jets substituted for the coordinates; each
// node's result is checked finite so overflow surfaces with the offending
// subexpression in the message.
inline Jet3 eval_jet(const Expr& e, const std::array<Jet3, 3>& xs) {
  Jet3 r;
  switch (e.kind) {
    case Expr::Kind::Const:
      r = jet_const(e.value);
      break;
    case Expr::Kind::Var:
      r = xs[static_cast<std::size_t>(e.axis)];
      break;
    case Expr::Kind::Neg:
      r = -eval_jet(*e.a, xs);
      break;
    case Expr::Kind::Bin: {
      Jet3 a = eval_jet(*e.a, xs);
      if (e.op == '^') {
        r = jet_pow(a, e.b->value);
        break;
      }
      Jet3 b = eval_jet(*e.b, xs);
      switch (e.op) {
        case '+':
          r = a + b;
          break;
        case '-':
          r = a - b;
          break;
        case '*':
          r = a * b;
          break;
        default:
          if (b.v == 0.0)
            throw DivisionByZero("division by zero in denominator '" +
                                 to_string(*e.b) + "'");
          r = a / b;
          break;
      }
      break;
    }
    case Expr::Kind::Call: {
      Jet3 a = eval_jet(*e.a, xs);
      if (e.fn == "sin")
        r = jet_sin(a);
      else if (e.fn == "cos")
        r = jet_cos(a);
      else if (e.fn == "exp")
        r = jet_exp(a);
      else if (e.fn == "log")
        r = jet_log(a);
      else if (e.fn == "sqrt")
        r = jet_sqrt(a);
      else if (e.fn == "atan")
        r = jet_atan(a);
      else if (e.fn == "acos")
        r = jet_acos(a);
      else
        r = jet_atan2(a, eval_jet(*e.b, xs));
      break;
    }
  }
  if (!finite(r))
    throw DomainError("non-finite value in subexpression '" + to_string(e) +
                      "'");
  return r;
}

inline Jet3 eval_jet(const Expr& e, const V3& p) {
  return eval_jet(e, {jet_var(0, p), jet_var(1, p), jet_var(2, p)});
}
inline Jet3 eval_jet(const ExprPtr& e, const V3& p) {
  return eval_jet(*e, p);
}

// Value-only evaluation; used where whole jets would be wasted work.
inline double eval_value(const Expr& e, const V3& p) {
  switch (e.kind) {
    case Expr::Kind::Const:
      return e.value;
    case Expr::Kind::Var:
      return p[e.axis];
    case Expr::Kind::Neg:
      return -eval_value(*e.a, p);
    case Expr::Kind::Bin: {
      double a = eval_value(*e.a, p);
      if (e.op == '^') return std::pow(a, e.b->value);
      double b = eval_value(*e.b, p);
      switch (e.op) {
        case '+':
          return a + b;
        case '-':
          return a - b;
        case '*':
          return a * b;
        default:
          if (b == 0.0)
            throw DivisionByZero("division by zero in denominator '" +
                                 to_string(*e.b) + "'");
          return a / b;
      }
    }
    case Expr::Kind::Call: {
      double a = eval_value(*e.a, p);
      if (e.fn == "sin") return std::sin(a);
      if (e.fn == "cos") return std::cos(a);
      if (e.fn == "exp") return std::exp(a);
      if (e.fn == "log") {
        if (!(a > 0.0)) throw DomainError("log: argument must be positive");
        return std::log(a);
      }
      if (e.fn == "sqrt") {
        if (!(a > 0.0)) throw DomainError("sqrt: argument must be positive");
        return std::sqrt(a);
      }
      if (e.fn == "atan") return std::atan(a);
      if (e.fn == "acos") {
        if (!(std::fabs(a) < 1.0))
          throw DomainError("acos: argument must lie in (-1, 1)");
        return std::acos(a);
      }
      double b = eval_value(*e.b, p);
      if (a == 0.0 && b == 0.0)
        throw DomainError("atan2: both arguments vanish");
      return std::atan2(a, b);
    }
  }
  return 0.0;
}

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Const:
      return a.value == b.value;
    case Expr::Kind::Var:
      return a.axis == b.axis;
    case Expr::Kind::Neg:
      return structurally_equal(*a.a, *b.a);
    case Expr::Kind::Bin:
      return a.op == b.op && structurally_equal(*a.a, *b.a) &&
             structurally_equal(*a.b, *b.b);
    case Expr::Kind::Call:
      return a.fn == b.fn && structurally_equal(*a.a, *b.a) &&
             (a.b == nullptr) == (b.b == nullptr) &&
             (a.b == nullptr || structurally_equal(*a.b, *b.b));
  }
  return false;
}

}  // namespace conj3
