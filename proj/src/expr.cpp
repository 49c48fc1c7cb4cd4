#include "bsnlr/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

namespace bsnlr::model {

namespace {

enum class Tok { Number, Ident, Symbol, End };

struct Token {
  Tok kind = Tok::End;
  std::size_t pos = 0;
  double number = 0.0;
  std::string text;  // identifier name or the symbol character
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    Token t;
    t.pos = i;
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          j = k;
          while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        }
      }
      const auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, t.number);
      if (ec != std::errc() || ptr != s.data() + j)
        throw ParseError(ParseError::Kind::Syntax, i, "malformed number at position " + std::to_string(i));
      t.kind = Tok::Number;
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(s.substr(i, j - i));
      i = j;
    } else if (std::string_view("+-*/^(),").find(c) != std::string_view::npos) {
      t.kind = Tok::Symbol;
      t.text = std::string(1, c);
      ++i;
    } else {
      throw ParseError(ParseError::Kind::Syntax, i,
                       std::string("unexpected character '") + c + "' at position " + std::to_string(i));
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.pos = s.size();
  out.push_back(end);
  return out;
}

std::optional<Op> function_op(const std::string& name) {
  if (name == "exp") return Op::Exp;
  if (name == "log") return Op::Log;
  if (name == "sqrt") return Op::Sqrt;
  if (name == "sinh") return Op::Sinh;
  if (name == "cosh") return Op::Cosh;
  if (name == "tanh") return Op::Tanh;
  return std::nullopt;
}

// Binding powers: (left, right). Right-associative ^ has right < left.
struct Binding {
  int left;
  int right;
  Op op;
};

std::optional<Binding> infix(const Token& t) {
  if (t.kind != Tok::Symbol) return std::nullopt;
  switch (t.text[0]) {
    case '+': return Binding{10, 11, Op::Add};
    case '-': return Binding{10, 11, Op::Sub};
    case '*': return Binding{20, 21, Op::Mul};
    case '/': return Binding{20, 21, Op::Div};
    case '^': return Binding{41, 40, Op::Pow};
    default: return std::nullopt;
  }
}

constexpr int kPrefixMinus = 30;  // binds looser than ^, tighter than * /

}  // namespace

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& params,
         const std::vector<std::string>& covariates)
      : tokens_(tokenize(text)), params_(params), covariates_(covariates) {}

  Expr run() {
    if (tokens_.front().kind == Tok::End)
      throw ParseError(ParseError::Kind::Syntax, 0, "empty model expression");
    parse(0);
    if (peek().kind != Tok::End)
      throw ParseError(ParseError::Kind::Syntax, peek().pos,
                       "unexpected '" + peek().text + "' at position " + std::to_string(peek().pos));
    return std::move(expr_);
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_++]; }
  bool at_symbol(char c) const { return peek().kind == Tok::Symbol && peek().text[0] == c; }

  void expect(char c) {
    if (!at_symbol(c)) {
      const auto& t = peek();
      const std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
      throw ParseError(ParseError::Kind::Syntax, t.pos,
                       std::string("expected '") + c + "' but found " + found + " at position " +
                           std::to_string(t.pos));
    }
    ++pos_;
  }

  int push(Node n) {
    n.depends = (n.op == Op::Param) || (n.lhs >= 0 && expr_.nodes_[n.lhs].depends) ||
                (n.rhs >= 0 && expr_.nodes_[n.rhs].depends);
    expr_.nodes_.push_back(n);
    return static_cast<int>(expr_.nodes_.size()) - 1;
  }

  int parse(int min_bp) {
    int lhs = parse_prefix();
    for (;;) {
      const auto b = infix(peek());
      if (!b || b->left < min_bp) break;
      ++pos_;
      const int rhs = parse(b->right);
      Node n;
      n.op = b->op;
      n.lhs = lhs;
      n.rhs = rhs;
      lhs = push(n);
    }
    return lhs;
  }

  int parse_prefix() {
    const Token& t = next();
    switch (t.kind) {
      case Tok::Number: {
        Node n;
        n.op = Op::Number;
        n.value = t.number;
        return push(n);
      }
      case Tok::Ident:
        return parse_identifier(t);
      case Tok::Symbol:
        if (t.text[0] == '(') {
          const int inner = parse(0);
          expect(')');
          return inner;
        }
        if (t.text[0] == '-') {
          Node n;
          n.op = Op::Neg;
          n.lhs = parse(kPrefixMinus);
          return push(n);
        }
        if (t.text[0] == '+') return parse(kPrefixMinus);
        [[fallthrough]];
      case Tok::End:
        break;
    }
    const std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(ParseError::Kind::Syntax, t.pos,
                     "expected an operand but found " + found + " at position " + std::to_string(t.pos));
  }

  int parse_identifier(const Token& t) {
    if (at_symbol('(')) {
      const auto fn = function_op(t.text);
      if (!fn)
        throw ParseError(ParseError::Kind::UnknownIdentifier, t.pos,
                         "unknown function '" + t.text + "' at position " + std::to_string(t.pos));
      ++pos_;
      std::vector<int> args;
      if (!at_symbol(')')) {
        args.push_back(parse(0));
        while (at_symbol(',')) {
          ++pos_;
          args.push_back(parse(0));
        }
      }
      expect(')');
      if (args.size() != 1)
        throw ParseError(ParseError::Kind::Arity, t.pos,
                         "function '" + t.text + "' takes 1 argument, got " + std::to_string(args.size()));
      Node n;
      n.op = *fn;
      n.lhs = args.front();
      return push(n);
    }
    Node n;
    if (auto it = std::find(params_.begin(), params_.end(), t.text); it != params_.end()) {
      n.op = Op::Param;
      n.index = static_cast<int>(it - params_.begin());
    } else if (auto jt = std::find(covariates_.begin(), covariates_.end(), t.text); jt != covariates_.end()) {
      n.op = Op::Covariate;
      n.index = static_cast<int>(jt - covariates_.begin());
    } else if (function_op(t.text)) {
      throw ParseError(ParseError::Kind::Arity, t.pos, "function '" + t.text + "' used without arguments");
    } else {
      throw ParseError(ParseError::Kind::UnknownIdentifier, t.pos,
                       "unknown identifier '" + t.text + "' at position " + std::to_string(t.pos));
    }
    return push(n);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& params_;
  const std::vector<std::string>& covariates_;
  Expr expr_;
};

Expr Expr::parse(std::string_view text, const std::vector<std::string>& params,
                 const std::vector<std::string>& covariates) {
  return Parser(text, params, covariates).run();
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Sinh: return "sinh";
    case Op::Cosh: return "cosh";
    case Op::Tanh: return "tanh";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Pow: return "^";
    case Op::Neg: return "-";
    default: return "";
  }
}

namespace {

void print(const std::vector<Node>& nodes, int i, const std::vector<std::string>& params,
           const std::vector<std::string>& covariates, std::string& out) {
  const Node& n = nodes[i];
  switch (n.op) {
    case Op::Number: {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, n.value);
      out.append(buf, res.ptr);
      return;
    }
    case Op::Param: out += params[n.index]; return;
    case Op::Covariate: out += covariates[n.index]; return;
    case Op::Neg:
      out += "(-";
      print(nodes, n.lhs, params, covariates, out);
      out += ')';
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Pow:
      out += '(';
      print(nodes, n.lhs, params, covariates, out);
      out += ' ';
      out += op_name(n.op);
      out += ' ';
      print(nodes, n.rhs, params, covariates, out);
      out += ')';
      return;
    default:
      out += op_name(n.op);
      out += '(';
      print(nodes, n.lhs, params, covariates, out);
      out += ')';
      return;
  }
}

// 0 = free of parameters, 1 = affine, 2 = anything else.
int degree(const std::vector<Node>& nodes, int i) {
  const Node& n = nodes[i];
  if (!n.depends) return 0;
  switch (n.op) {
    case Op::Param: return 1;
    case Op::Neg: return degree(nodes, n.lhs);
    case Op::Add:
    case Op::Sub: return std::max(degree(nodes, n.lhs), degree(nodes, n.rhs));
    case Op::Mul: {
      const int a = degree(nodes, n.lhs);
      const int b = degree(nodes, n.rhs);
      return (a == 0 || b == 0) ? std::max(a, b) : 2;
    }
    case Op::Div: return degree(nodes, n.rhs) == 0 ? degree(nodes, n.lhs) : 2;
    default: return 2;
  }
}

}  // namespace

std::string Expr::to_string(const std::vector<std::string>& params,
                            const std::vector<std::string>& covariates) const {
  std::string out;
  if (!nodes_.empty()) print(nodes_, root(), params, covariates, out);
  return out;
}

bool Expr::affine_in_params() const { return !nodes_.empty() && degree(nodes_, root()) <= 1; }

}  // namespace bsnlr::model
