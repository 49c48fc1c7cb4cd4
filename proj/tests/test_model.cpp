#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bsnlr/model.hpp"
#include "oracle/oracle.hpp"

using namespace bsnlr::model;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ParseError::Kind parse_kind(const std::string& text, const std::vector<std::string>& params,
                            const std::vector<std::string>& covs) {
  try {
    MeanModel m(text, params, covs);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("expected a parse error for " << text);
  return ParseError::Kind::Syntax;
}

}  // namespace

TEST_CASE("parse: reference models") {
  const MeanModel fatigue("b1 + b2*exp(b3/w)", {"b1", "b2", "b3"}, {"w"});
  CHECK(fatigue.p() == 3);
  CHECK(fatigue.m() == 1);
  CHECK_FALSE(fatigue.affine());

  const MeanModel mm("eta*x/(gamma + x)", {"eta", "gamma"}, {"x"});
  MatrixXd x(1, 1);
  x << 0.5;
  VectorXd b(2);
  b << 3.0, 0.5;
  CHECK(eval_mu(mm, x, b)(0) == 1.5);  // x = gamma gives eta/2

  CHECK(MeanModel("b1 + b2*log(w)", {"b1", "b2"}, {"w"}).affine());
  CHECK(MeanModel("b1 + b2*w/3 - (b1 - 2*b2)", {"b1", "b2"}, {"w"}).affine());
  CHECK_FALSE(MeanModel("b1*b2", {"b1", "b2"}, {}).affine());
  CHECK_FALSE(MeanModel("1/b1", {"b1"}, {}).affine());
}

TEST_CASE("parse: errors") {
  try {
    MeanModel("b1 + q*x", {"b1"}, {"x"});
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::UnknownIdentifier);
    CHECK(std::string(e.what()).find("'q'") != std::string::npos);
    CHECK(e.position() == 5);
  }
  CHECK(parse_kind("b1 + ", {"b1"}, {}) == ParseError::Kind::Syntax);
  CHECK(parse_kind("(b1 + 2", {"b1"}, {}) == ParseError::Kind::Syntax);
  CHECK(parse_kind("b1 2", {"b1"}, {}) == ParseError::Kind::Syntax);
  CHECK(parse_kind("b1 + $", {"b1"}, {}) == ParseError::Kind::Syntax);
  CHECK(parse_kind("exp(b1, 2)", {"b1"}, {}) == ParseError::Kind::Arity);
  CHECK(parse_kind("exp()", {"b1"}, {}) == ParseError::Kind::Arity);
  CHECK(parse_kind("b1 + exp", {"b1"}, {}) == ParseError::Kind::Arity);
  CHECK(parse_kind("foo(b1)", {"b1"}, {}) == ParseError::Kind::UnknownIdentifier);
  CHECK_THROWS_AS(MeanModel("1", {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(MeanModel("b1", {"b1", "b1"}, {}), std::invalid_argument);
  CHECK_THROWS_AS(MeanModel("b1", {"b1"}, {"b1"}), std::invalid_argument);
}

TEST_CASE("parse: precedence and associativity") {
  const MeanModel m("-a^2 + 2^3^2 - 8/4/2 + a*3 - -1", {"a"}, {});
  VectorXd b(1);
  b << 3.0;
  const MatrixXd x(1, 0);
  // -(a^2) + 2^(3^2) - (8/4)/2 + a*3 + 1
  CHECK(eval_mu(m, x, b)(0) == -9.0 + 512.0 - 1.0 + 9.0 + 1.0);
  CHECK(eval_mu(MeanModel("1.5e1 + .5 + 2E-1", {"a"}, {}), x, b)(0) == 15.0 + 0.5 + 0.2);
}

TEST_CASE("print / re-parse round trip evaluates bitwise identically") {
  std::mt19937_64 rng(5);
  std::vector<MeanModel> models;
  for (auto which : all_builtins()) models.push_back(builtin(which));
  models.emplace_back("b1 + b2*exp(b3/w)", std::vector<std::string>{"b1", "b2", "b3"}, std::vector<std::string>{"w"});
  models.emplace_back("-a^-2 + sqrt(a*x)/tanh(b) - cosh(sinh(x - b))^0.5 * 1e-3", std::vector<std::string>{"a", "b"},
                      std::vector<std::string>{"x"});
  std::uniform_real_distribution<double> u(0.2, 1.5);
  for (const auto& m : models) {
    const MeanModel again(m.to_string(), m.params(), m.covariates());
    CAPTURE(m.text());
    CHECK(again.to_string() == m.to_string());
    MatrixXd x(10, static_cast<Eigen::Index>(m.m()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    VectorXd b(static_cast<Eigen::Index>(m.p()));
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = u(rng);
    const auto p = eval_bundle(m, x, b);
    const auto q = eval_bundle(again, x, b);
    CHECK((p.mu.array() == q.mu.array()).all());
    CHECK((p.d.array() == q.d.array()).all());
    CHECK((p.g.array() == q.g.array()).all());
  }
}

TEST_CASE("AD: documented single point") {
  const MeanModel m("b1*exp(b2)", {"b1", "b2"}, {});
  VectorXd b(2);
  b << 2.0, 0.0;
  const auto bundle = eval_bundle(m, MatrixXd(1, 0), b);
  CHECK(bundle.mu(0) == 2.0);
  CHECK(bundle.d(0, 0) == 1.0);
  CHECK(bundle.d(0, 1) == 2.0);
  CHECK(bundle.hessian(0)(0, 1) == 1.0);
  CHECK(bundle.hessian(0)(1, 1) == 2.0);
  CHECK(bundle.hessian(0)(0, 0) == 0.0);

  const auto fd = oracle::fd_jacobian([&](const VectorXd& v) { return eval_mu(m, MatrixXd(1, 0), v); }, b);
  CHECK((fd - bundle.d).cwiseAbs().maxCoeff() < 1e-6);
  const auto fdh = oracle::fd_jacobian(
      [&](const VectorXd& v) { return VectorXd(eval_bundle(m, MatrixXd(1, 0), v).d.row(0).transpose()); }, b);
  CHECK((fdh - bundle.hessian(0)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("AD: every builtin against finite differences") {
  std::mt19937_64 rng(17);
  for (auto which : all_builtins()) {
    CAPTURE(builtin_name(which));
    for (int rep = 0; rep < 20; ++rep) {
      const auto inst = oracle::random_instance(which, rng, 6);
      const auto b = eval_bundle(inst.model, inst.x, inst.beta);
      const auto d_fd =
          oracle::fd_jacobian([&](const VectorXd& v) { return eval_mu(inst.model, inst.x, v); }, inst.beta);
      const auto p = static_cast<Eigen::Index>(inst.model.p());
      for (Eigen::Index i = 0; i < b.d.rows(); ++i) {
        for (Eigen::Index r = 0; r < p; ++r)
          CHECK(std::fabs(b.d(i, r) - d_fd(i, r)) <= 1e-6 * std::max(1.0, std::fabs(b.d(i, r))));
        // Row i of D is differentiated again for the Hessian.
        const auto h_fd = oracle::fd_jacobian(
            [&](const VectorXd& v) { return VectorXd(eval_bundle(inst.model, inst.x, v).d.row(i).transpose()); },
            inst.beta);
        const MatrixXd h = b.hessian(static_cast<std::size_t>(i));
        CHECK((h - h_fd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, h.cwiseAbs().maxCoeff()));
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("AD: linear model has exactly zero G") {
  const MeanModel m("b1 + b2*z", {"b1", "b2"}, {"z"});
  MatrixXd x(4, 1);
  x << 0.1, -2.0, 3.5, 7.0;
  VectorXd b(2);
  b << 0.3, -1.7;
  const auto bundle = eval_bundle(m, x, b);
  CHECK((bundle.g.array() == 0.0).all());
  CHECK((bundle.d.col(0).array() == 1.0).all());
  CHECK((bundle.d.col(1).array() == x.col(0).array()).all());
  // affine arithmetic does not introduce curvature either
  const auto b2 = eval_bundle(builtin(Builtin::Linear, 3), MatrixXd::Random(5, 3), VectorXd::Random(4));
  CHECK((b2.g.array() == 0.0).all());
}

TEST_CASE("vec ordering: hessian(i) re-vectorised equals row i of G") {
  const auto m = builtin(Builtin::Gallant);
  MatrixXd x = MatrixXd::Random(5, 3);
  VectorXd b(4);
  b << 4, 5, 3, 1.5;
  const auto bundle = eval_bundle(m, x, b);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK((vec(bundle.hessian(i)) - bundle.g.row(static_cast<Eigen::Index>(i)).transpose()).cwiseAbs().maxCoeff() ==
          0.0);
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  VectorXd v(4);
  v << 1, 3, 2, 4;
  CHECK(vec(a) == v);
  // G(i, r + s p) = d2 mu / d b_r d b_s: (eta, gamma) entry of the Gallant model is x exp(gamma x)
  CHECK(bundle.g(0, 2 + 4 * 3) == doctest::Approx(x(0, 2) * std::exp(1.5 * x(0, 2))).epsilon(1e-15));
}

TEST_CASE("builtins") {
  const auto g = builtin(Builtin::Gallant);
  CHECK(g.params() == std::vector<std::string>{"l1", "l2", "eta", "gamma"});
  CHECK(g.text() == "l1*z1 + l2*z2 + eta*exp(gamma*x)");
  CHECK(builtin(Builtin::MichaelisMenten).p() == 2);
  CHECK(builtin(Builtin::Gallant, 3).p() == 5);

  const auto w = builtin(Builtin::WeibullType);
  MatrixXd x(3, 1);
  x << 0.1, 2.0, 30.0;
  VectorXd b(3);
  b << 5.0, 2.0, 0.0;
  CHECK((eval_mu(w, x, b).array() == 3.0).all());

  for (auto which : all_builtins()) CHECK(builtin_from_name(builtin_name(which)) == which);
  CHECK_THROWS_AS(builtin_from_name("nope"), std::invalid_argument);
  CHECK(is_partially_nonlinear(Builtin::Gallant));
  CHECK(is_partially_nonlinear(Builtin::MichaelisMenten));
  CHECK_FALSE(is_partially_nonlinear(Builtin::Linear));
  CHECK_FALSE(is_partially_nonlinear(Builtin::Exponential));
}

TEST_CASE("evaluation errors name the row") {
  const MeanModel m("log(b1 + x)", {"b1"}, {"x"});
  MatrixXd x(3, 1);
  x << 1.0, 2.0, -5.0;
  VectorXd b(1);
  b << 1.0;
  try {
    eval_bundle(m, x, b);
    FAIL("no error");
  } catch (const EvalError& e) {
    CHECK(e.row() == 2);
  }
  CHECK_THROWS_AS(eval_mu(MeanModel("b1/x", {"b1"}, {"x"}), MatrixXd::Zero(2, 1), b), EvalError);
  CHECK_THROWS_AS(eval_mu(MeanModel("x^b1", {"b1"}, {"x"}), -MatrixXd::Ones(1, 1), b), EvalError);
  // integer exponents are exact and accept negative bases
  VectorXd two(1);
  two << 2.0;
  CHECK(eval_mu(MeanModel("x^3 + 0*b1", {"b1"}, {"x"}), -2 * MatrixXd::Ones(1, 1), two)(0) == -8.0);
  CHECK_THROWS_AS(eval_mu(m, MatrixXd::Ones(2, 2), b), std::invalid_argument);
}

TEST_CASE("check_rank") {
  MatrixXd dup(5, 2);
  dup.col(0) << 1, 2, 3, 4, 5;
  dup.col(1) = dup.col(0);
  CHECK(check_rank(dup).deficient);
  CHECK(check_rank(dup).rank == 1);

  const auto id = check_rank(MatrixXd::Identity(4, 4));
  CHECK(id.condition == doctest::Approx(1.0));
  CHECK_FALSE(id.deficient);

  const auto mm = builtin(Builtin::MichaelisMenten);
  VectorXd b(2);
  b << 3.0, 0.5;
  const auto bundle = eval_bundle(mm, MatrixXd::Constant(8, 1, 0.7), b);
  CHECK(check_rank(bundle.d).deficient);
}
