#include "bsnlr/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace bsnlr::model {

MeanModel::MeanModel(std::string_view text, std::vector<std::string> params, std::vector<std::string> covariates)
    : text_(text), params_(std::move(params)), covariates_(std::move(covariates)) {
  if (params_.empty()) throw std::invalid_argument("model needs at least one parameter");
  std::set<std::string> seen;
  for (const auto& name : params_) {
    if (name.empty()) throw std::invalid_argument("empty parameter name");
    if (!seen.insert(name).second) throw std::invalid_argument("duplicate name '" + name + "'");
  }
  for (const auto& name : covariates_) {
    if (name.empty()) throw std::invalid_argument("empty covariate name");
    if (!seen.insert(name).second) throw std::invalid_argument("duplicate name '" + name + "'");
  }
  expr_ = Expr::parse(text_, params_, covariates_);
}

MeanModel parse_model(std::string_view text, const std::vector<std::string>& params,
                      const std::vector<std::string>& covariates) {
  return MeanModel(text, params, covariates);
}

void Dataset::validate() const {
  if (x.rows() != y.size()) throw std::invalid_argument("dataset: y and x have different row counts");
  if (static_cast<std::size_t>(x.cols()) != names.size())
    throw std::invalid_argument("dataset: column names do not match x");
  if (!y.allFinite()) throw std::invalid_argument("dataset: non-finite response value");
  if (!x.allFinite()) throw std::invalid_argument("dataset: non-finite covariate value");
}

MatrixXd DerivativeBundle::hessian(std::size_t i) const {
  const auto pp = static_cast<Eigen::Index>(p());
  MatrixXd m(pp, pp);
  Eigen::Map<VectorXd>(m.data(), pp * pp) = g.row(static_cast<Eigen::Index>(i)).transpose();
  return m;
}

VectorXd vec(const MatrixXd& a) { return Eigen::Map<const VectorXd>(a.data(), a.size()); }

namespace {

// Value, gradient and Hessian with respect to beta.
struct Jet {
  double v = 0.0;
  VectorXd g;
  MatrixXd h;
};

bool is_integer(double k) { return std::nearbyint(k) == k && std::abs(k) < 1e9; }

class Evaluator {
 public:
  Evaluator(const MeanModel& model, bool derivatives)
      : nodes_(model.expr().nodes()), p_(static_cast<Eigen::Index>(model.p())), derivs_(derivatives) {
    jets_.resize(nodes_.size());
    if (derivs_) {
      for (auto& j : jets_) {
        j.g = VectorXd::Zero(p_);
        j.h = MatrixXd::Zero(p_, p_);
      }
      for (auto* t : {&tmp_a_, &tmp_b_}) {
        t->g = VectorXd::Zero(p_);
        t->h = MatrixXd::Zero(p_, p_);
      }
    }
  }

  const Jet& run(std::size_t row, const Eigen::Ref<const VectorXd>& xrow, const VectorXd& beta) {
    row_ = row;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const Node& n = nodes_[k];
      Jet& out = jets_[k];
      switch (n.op) {
        case Op::Number: out.v = n.value; break;
        case Op::Covariate: out.v = xrow(n.index); break;
        case Op::Param:
          out.v = beta(n.index);
          if (derivs_) {
            out.g.setZero();
            out.g(n.index) = 1.0;
          }
          break;
        default:
          if (derivs_ && n.depends) apply(n, out);
          else out.v = value(n);
      }
    }
    const Jet& root = jets_.back();
    if (!std::isfinite(root.v)) fail("non-finite mean value");
    if (derivs_ && (!root.g.allFinite() || !root.h.allFinite())) fail("non-finite derivative");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw EvalError(row_, what); }

  double value(const Node& n) const {
    const double a = jets_[n.lhs].v;
    const double b = n.rhs >= 0 ? jets_[n.rhs].v : 0.0;
    switch (n.op) {
      case Op::Neg: return -a;
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::Div:
        if (b == 0.0) fail("division by zero");
        return a / b;
      case Op::Pow:
        // Same rule as the derivative path: only a constant integer exponent
        // may take a non-positive base.
        if ((nodes_[n.rhs].depends || !is_integer(b)) && a <= 0.0) fail("non-integer power of a non-positive base");
        return std::pow(a, b);
      case Op::Exp: return std::exp(a);
      case Op::Log:
        if (a <= 0.0) fail("log of a non-positive value");
        return std::log(a);
      case Op::Sqrt:
        if (a < 0.0) fail("sqrt of a negative value");
        return std::sqrt(a);
      case Op::Sinh: return std::sinh(a);
      case Op::Cosh: return std::cosh(a);
      case Op::Tanh: return std::tanh(a);
      default: return 0.0;
    }
  }

  // out = f(u), with f' = f1 and f'' = f2 at u.
  static void chain(Jet& out, const Jet& u, double f, double f1, double f2) {
    out.v = f;
    out.h.noalias() = f1 * u.h;
    out.h.noalias() += f2 * u.g * u.g.transpose();
    out.g.noalias() = f1 * u.g;
  }

  static void product(Jet& out, const Jet& a, const Jet& b) {
    out.h.noalias() = a.v * b.h + b.v * a.h;
    out.h.noalias() += a.g * b.g.transpose();
    out.h.noalias() += b.g * a.g.transpose();
    out.g.noalias() = a.v * b.g + b.v * a.g;
    out.v = a.v * b.v;
  }

  void apply(const Node& n, Jet& out) {
    const Jet& a = jets_[n.lhs];
    switch (n.op) {
      case Op::Neg:
        out.v = -a.v;
        out.g = -a.g;
        out.h = -a.h;
        return;
      case Op::Add:
      case Op::Sub: {
        const Jet& b = jets_[n.rhs];
        const double sign = n.op == Op::Add ? 1.0 : -1.0;
        out.v = a.v + sign * b.v;
        out.g = a.g + sign * b.g;
        out.h = a.h + sign * b.h;
        return;
      }
      case Op::Mul:
        product(out, a, jets_[n.rhs]);
        return;
      case Op::Div: {
        const Jet& b = jets_[n.rhs];
        if (b.v == 0.0) fail("division by zero");
        // a = q b, differentiated twice and solved for q's derivatives.
        const double q = a.v / b.v;
        out.v = q;
        out.g = (a.g - q * b.g) / b.v;
        out.h = a.h - q * b.h;
        out.h.noalias() -= out.g * b.g.transpose();
        out.h.noalias() -= b.g * out.g.transpose();
        out.h /= b.v;
        return;
      }
      case Op::Pow: {
        const Jet& b = jets_[n.rhs];
        const bool const_exponent = !nodes_[n.rhs].depends;
        if (const_exponent && is_integer(b.v)) {
          const double k = b.v;
          const double f1 = k == 0.0 ? 0.0 : k * std::pow(a.v, k - 1.0);
          const double f2 = (k == 0.0 || k == 1.0) ? 0.0 : k * (k - 1.0) * std::pow(a.v, k - 2.0);
          chain(out, a, std::pow(a.v, k), f1, f2);
          return;
        }
        if (a.v <= 0.0) fail("non-integer power of a non-positive base");
        if (const_exponent) {
          const double k = b.v;
          const double f = std::pow(a.v, k);
          chain(out, a, f, k * f / a.v, k * (k - 1.0) * f / (a.v * a.v));
          return;
        }
        // a^b = exp(b log a)
        chain(tmp_a_, a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
        product(tmp_b_, b, tmp_a_);
        const double e = std::exp(tmp_b_.v);
        chain(out, tmp_b_, e, e, e);
        return;
      }
      case Op::Exp: {
        const double e = std::exp(a.v);
        chain(out, a, e, e, e);
        return;
      }
      case Op::Log:
        if (a.v <= 0.0) fail("log of a non-positive value");
        chain(out, a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
        return;
      case Op::Sqrt: {
        if (a.v <= 0.0) fail(a.v < 0.0 ? "sqrt of a negative value" : "sqrt at zero is not differentiable");
        const double r = std::sqrt(a.v);
        chain(out, a, r, 0.5 / r, -0.25 / (r * a.v));
        return;
      }
      case Op::Sinh: {
        const double s = std::sinh(a.v);
        chain(out, a, s, std::cosh(a.v), s);
        return;
      }
      case Op::Cosh: {
        const double c = std::cosh(a.v);
        chain(out, a, c, std::sinh(a.v), c);
        return;
      }
      case Op::Tanh: {
        const double t = std::tanh(a.v);
        const double sech2 = 1.0 - t * t;
        chain(out, a, t, sech2, -2.0 * t * sech2);
        return;
      }
      default:
        return;
    }
  }

  const std::vector<Node>& nodes_;
  Eigen::Index p_;
  bool derivs_;
  std::vector<Jet> jets_;
  Jet tmp_a_, tmp_b_;
  std::size_t row_ = 0;
};

void check_shapes(const MeanModel& model, const MatrixXd& x, const VectorXd& beta) {
  if (static_cast<std::size_t>(beta.size()) != model.p())
    throw std::invalid_argument("beta has " + std::to_string(beta.size()) + " entries, model has " +
                                std::to_string(model.p()) + " parameters");
  if (static_cast<std::size_t>(x.cols()) != model.m())
    throw std::invalid_argument("x has " + std::to_string(x.cols()) + " columns, model has " +
                                std::to_string(model.m()) + " covariates");
  if (!beta.allFinite()) throw std::invalid_argument("beta must be finite");
}

}  // namespace

DerivativeBundle eval_bundle(const MeanModel& model, const MatrixXd& x, const VectorXd& beta) {
  check_shapes(model, x, beta);
  const Eigen::Index n = x.rows();
  const auto p = static_cast<Eigen::Index>(model.p());
  DerivativeBundle out{VectorXd(n), MatrixXd(n, p), MatrixXd(n, p * p)};
  Evaluator ev(model, true);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Jet& j = ev.run(static_cast<std::size_t>(i), x.row(i).transpose(), beta);
    out.mu(i) = j.v;
    out.d.row(i) = j.g.transpose();
    out.g.row(i) = Eigen::Map<const VectorXd>(j.h.data(), p * p).transpose();
  }
  return out;
}

VectorXd eval_mu(const MeanModel& model, const MatrixXd& x, const VectorXd& beta) {
  check_shapes(model, x, beta);
  const Eigen::Index n = x.rows();
  VectorXd mu(n);
  Evaluator ev(model, false);
  for (Eigen::Index i = 0; i < n; ++i) mu(i) = ev.run(static_cast<std::size_t>(i), x.row(i).transpose(), beta).v;
  return mu;
}

const std::vector<Builtin>& all_builtins() {
  static const std::vector<Builtin> all{Builtin::Linear,      Builtin::Gallant,         Builtin::DarbyEllis,
                                        Builtin::Stone,       Builtin::AsymptoticRegression,
                                        Builtin::WeibullType, Builtin::MichaelisMenten, Builtin::Exponential};
  return all;
}

std::string builtin_name(Builtin b) {
  switch (b) {
    case Builtin::Linear: return "linear";
    case Builtin::Gallant: return "gallant";
    case Builtin::DarbyEllis: return "darby_ellis";
    case Builtin::Stone: return "stone";
    case Builtin::AsymptoticRegression: return "asymptotic_regression";
    case Builtin::WeibullType: return "weibull_type";
    case Builtin::MichaelisMenten: return "michaelis_menten";
    case Builtin::Exponential: return "exponential";
  }
  return "";
}

Builtin builtin_from_name(std::string_view name) {
  for (auto b : all_builtins())
    if (builtin_name(b) == name) return b;
  throw std::invalid_argument("unknown builtin model '" + std::string(name) + "'");
}

MeanModel builtin(Builtin which, int dims) {
  switch (which) {
    case Builtin::Linear: {
      if (dims < 1) throw std::invalid_argument("linear model needs at least one covariate");
      std::vector<std::string> params{"b0"}, covs;
      std::string text = "b0";
      for (int k = 1; k <= dims; ++k) {
        params.push_back("b" + std::to_string(k));
        covs.push_back("x" + std::to_string(k));
        text += " + b" + std::to_string(k) + "*x" + std::to_string(k);
      }
      return MeanModel(text, params, covs);
    }
    case Builtin::Gallant: {
      if (dims < 0) throw std::invalid_argument("negative number of linear terms");
      std::vector<std::string> params, covs;
      std::string text;
      for (int k = 1; k <= dims; ++k) {
        params.push_back("l" + std::to_string(k));
        covs.push_back("z" + std::to_string(k));
        text += "l" + std::to_string(k) + "*z" + std::to_string(k) + " + ";
      }
      params.insert(params.end(), {"eta", "gamma"});
      covs.push_back("x");
      text += "eta*exp(gamma*x)";
      return MeanModel(text, params, covs);
    }
    case Builtin::DarbyEllis:
      return MeanModel("lambda - eta*log(x1 + gamma*x2)", {"lambda", "eta", "gamma"}, {"x1", "x2"});
    case Builtin::Stone:
      return MeanModel("lambda + eta*log(x1/(gamma + x2))", {"lambda", "eta", "gamma"}, {"x1", "x2"});
    case Builtin::AsymptoticRegression:
      return MeanModel("lambda - eta*gamma^x", {"lambda", "eta", "gamma"}, {"x"});
    case Builtin::WeibullType:
      return MeanModel("lambda - eta*exp(-gamma*x)", {"lambda", "eta", "gamma"}, {"x"});
    case Builtin::MichaelisMenten:
      return MeanModel("eta*x/(gamma + x)", {"eta", "gamma"}, {"x"});
    case Builtin::Exponential:
      return MeanModel("exp(beta*x)", {"beta"}, {"x"});
  }
  throw std::invalid_argument("unknown builtin model");
}

bool is_partially_nonlinear(Builtin which) {
  switch (which) {
    case Builtin::Gallant:
    case Builtin::DarbyEllis:
    case Builtin::Stone:
    case Builtin::AsymptoticRegression:
    case Builtin::WeibullType:
    case Builtin::MichaelisMenten:
      return true;
    default:
      return false;
  }
}

RankReport check_rank(const MatrixXd& d) {
  RankReport r;
  if (d.cols() == 0) return r;
  Eigen::JacobiSVD<MatrixXd> svd(d);
  const VectorXd& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  const double cut = smax * static_cast<double>(std::max(d.rows(), d.cols())) * 2.220446049250313e-16;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cut) ++r.rank;
  r.condition = smin > 0.0 ? (smax / smin) * (smax / smin) : std::numeric_limits<double>::infinity();
  r.deficient = !(r.condition <= kRankThreshold);
  return r;
}

}  // namespace bsnlr::model
