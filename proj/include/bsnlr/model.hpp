#pragma once

// Mean functions mu_i = f(x_i; beta) and their first/second derivatives
// with respect to beta, computed by second-order forward-mode AD.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bsnlr/expr.hpp"

namespace bsnlr::model {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class MeanModel {
 public:
  /// Throws ParseError on bad syntax, unknown identifiers or arity; throws
  /// std::invalid_argument on empty/duplicate names or an empty parameter list.
  MeanModel(std::string_view text, std::vector<std::string> params, std::vector<std::string> covariates);

  std::size_t p() const { return params_.size(); }
  std::size_t m() const { return covariates_.size(); }
  const std::vector<std::string>& params() const { return params_; }
  const std::vector<std::string>& covariates() const { return covariates_; }
  const std::string& text() const { return text_; }
  const Expr& expr() const { return expr_; }

  std::string to_string() const { return expr_.to_string(params_, covariates_); }
  bool affine() const { return expr_.affine_in_params(); }

 private:
  std::string text_;
  std::vector<std::string> params_;
  std::vector<std::string> covariates_;
  Expr expr_;
};

/// MeanModel parse entry point.
MeanModel parse_model(std::string_view text, const std::vector<std::string>& params,
                      const std::vector<std::string>& covariates);

struct Dataset {
  VectorXd y;                      // log-lifetimes
  MatrixXd x;                      // n x m covariates
  std::vector<std::string> names;  // column names of x

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }

  /// Throws std::invalid_argument on shape mismatch or non-finite entries.
  void validate() const;
};

/// mu (n), D (n x p) and G (n x p^2). Row i of G is vec(M_i), the p x p
/// Hessian of mu_i stacked column by column: G(i, r + s p) = d2 mu_i / d b_r d b_s.
struct DerivativeBundle {
  VectorXd mu;
  MatrixXd d;
  MatrixXd g;

  std::size_t n() const { return static_cast<std::size_t>(mu.size()); }
  std::size_t p() const { return static_cast<std::size_t>(d.cols()); }
  /// M_i rebuilt from row i of G.
  MatrixXd hessian(std::size_t i) const;
};

/// vec() of a square matrix, column-major.
VectorXd vec(const MatrixXd& a);

class EvalError : public std::runtime_error {
 public:
  EvalError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Values, Jacobian and stacked Hessians. Throws EvalError naming the row on
/// a domain violation or a non-finite result, std::invalid_argument on
/// shape mismatch.
DerivativeBundle eval_bundle(const MeanModel& model, const MatrixXd& x, const VectorXd& beta);

/// Values only.
VectorXd eval_mu(const MeanModel& model, const MatrixXd& x, const VectorXd& beta);

enum class Builtin {
  Linear,                // b0 + b1 x1 + ... + bk xk
  Gallant,               // l1 z1 + ... + lk zk + eta exp(gamma x)
  DarbyEllis,            // lambda - eta log(x1 + gamma x2)
  Stone,                 // lambda + eta log(x1 / (gamma + x2))
  AsymptoticRegression,  // lambda - eta gamma^x
  WeibullType,           // lambda - eta exp(-gamma x)
  MichaelisMenten,       // eta x / (gamma + x)
  Exponential,           // exp(beta x)
};

/// All catalogue entries, in declaration order.
const std::vector<Builtin>& all_builtins();
std::string builtin_name(Builtin b);
/// Throws std::invalid_argument for an unknown name.
Builtin builtin_from_name(std::string_view name);

/// Catalogue model. `dims` is the number of linear terms for Linear (slopes)
/// and Gallant (lambda's); ignored elsewhere. Parameters follow
/// (lambda..., eta, gamma) for the partially nonlinear entries.
MeanModel builtin(Builtin which, int dims = 2);

/// True for the entries of the form mu = Z lambda + eta g(gamma).
bool is_partially_nonlinear(Builtin which);

struct RankReport {
  double condition = 0.0;  // condition number of D'D (infinity when singular)
  bool deficient = false;  // condition > kRankThreshold
  std::size_t rank = 0;    // numerical rank of D
};

inline constexpr double kRankThreshold = 1e10;

RankReport check_rank(const MatrixXd& d);

}  // namespace bsnlr::model
