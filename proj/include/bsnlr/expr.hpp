#pragma once

// Expression trees for mean functions: tokenizer, precedence-climbing
// parser and a fully parenthesised printer.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsnlr::model {

enum class Op {
  Number,
  Param,
  Covariate,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Exp,
  Log,
  Sqrt,
  Sinh,
  Cosh,
  Tanh,
};

// One arena slot. Children always precede their parent, so evaluating the
// arena front to back visits every operand before it is used.
struct Node {
  Op op = Op::Number;
  double value = 0.0;  // Number
  int index = -1;      // Param / Covariate slot
  int lhs = -1;        // unary operand or left operand
  int rhs = -1;
  bool depends = false;  // true if the subtree contains a parameter
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownIdentifier, Arity };

  ParseError(Kind kind, std::size_t position, const std::string& what)
      : std::runtime_error(what), kind_(kind), position_(position) {}

  Kind kind() const { return kind_; }
  /// 0-based character offset into the model text.
  std::size_t position() const { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

class Expr {
 public:
  /// Parses `text` resolving identifiers against the two name lists.
  static Expr parse(std::string_view text, const std::vector<std::string>& params,
                    const std::vector<std::string>& covariates);

  const std::vector<Node>& nodes() const { return nodes_; }
  int root() const { return static_cast<int>(nodes_.size()) - 1; }

  /// Fully parenthesised text that re-parses to the same tree.
  std::string to_string(const std::vector<std::string>& params,
                        const std::vector<std::string>& covariates) const;

  /// True when the expression is affine in the parameters (no products of
  /// parameter-dependent terms, no parameter inside a function or power,
  /// no parameter in a denominator).
  bool affine_in_params() const;

 private:
  friend class Parser;
  std::vector<Node> nodes_;
};

const char* op_name(Op op);

}  // namespace bsnlr::model
