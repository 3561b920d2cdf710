#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "ocoref/autodiff.h"
#include "support.h"

namespace ocoref {
namespace {

Matrix random_values(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

TEST_SUITE("autodiff") {

TEST_CASE("softmax of equal values is uniform") {
  Tape tape;
  Var s = softmax_rows(tape.constant(Matrix(1, 4, 3.0)));
  for (std::size_t j = 0; j < 4; ++j) CHECK(s.value()(0, j) == doctest::Approx(0.25));
}

TEST_CASE("sigmoid of zero") {
  Tape tape;
  CHECK(sigmoid(tape.constant(Matrix(1, 1))).scalar() == 0.5);
  CHECK(log_sigmoid(tape.constant(Matrix(1, 1))).scalar() ==
        doctest::Approx(-std::log(2.0)));
  CHECK(std::isfinite(log_sigmoid(tape.constant(Matrix(1, 1, -800.0))).scalar()));
}

TEST_CASE("matmul by identity") {
  std::mt19937_64 rng(1);
  const Matrix a = random_values(3, 4, rng);
  Tape tape;
  CHECK(matmul(tape.constant(a), tape.constant(Matrix::identity(4))).value() == a);
}

TEST_CASE("gradient of sum is ones") {
  ParameterSet ps;
  std::mt19937_64 rng(2);
  Parameter& p = ps.add("x", random_values(2, 3, rng));
  Tape tape;
  tape.backward(sum(tape.parameter(p)));
  CHECK(p.grad == Matrix(2, 3, 1.0));
}

TEST_CASE("gradient of x times x is 2x") {
  ParameterSet ps;
  std::mt19937_64 rng(3);
  Parameter& p = ps.add("x", random_values(3, 2, rng));
  Tape tape;
  Var x = tape.parameter(p);
  tape.backward(sum(multiply(x, x)));
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    CHECK(p.grad[i] == doctest::Approx(2 * p.value[i]).epsilon(1e-12));
  }
}

TEST_CASE("backward twice doubles gradients") {
  ParameterSet ps;
  std::mt19937_64 rng(4);
  Parameter& p = ps.add("x", random_values(2, 2, rng));
  Tape tape;
  Var x = tape.parameter(p);
  Var loss = sum(tanh(matmul(x, x)));
  tape.backward(loss);
  const Matrix once = p.grad;
  tape.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(p.grad[i] == doctest::Approx(2 * once[i]).epsilon(1e-12));
  }
  ps.zero_grad();
  CHECK(p.grad == Matrix(2, 2));
}

TEST_CASE("shape mismatches throw") {
  Tape tape;
  Var a = tape.constant(Matrix(2, 3));
  Var b = tape.constant(Matrix(2, 2));
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(multiply(a, b), DimensionError);
  CHECK_THROWS_AS(reshape(a, 4, 2), DimensionError);
  try {
    add(a, b);
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    CHECK(what.find(Matrix(2, 3).shape()) != std::string::npos);
    CHECK(what.find(Matrix(2, 2).shape()) != std::string::npos);
  }
}

TEST_CASE("ops do not modify inputs") {
  std::mt19937_64 rng(5);
  const Matrix a = random_values(3, 3, rng);
  const Matrix b = random_values(3, 3, rng);
  Tape tape;
  Var va = tape.constant(a);
  Var vb = tape.constant(b);
  softmax_rows(va);
  matmul(va, vb);
  multiply(va, vb);
  transpose(vb);
  const std::vector<Var> parts{va, vb};
  concat_columns(parts);
  CHECK(va.value() == a);
  CHECK(vb.value() == b);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix m = random_values(4, 7, rng);
    for (double& v : m.values()) v *= 50.0;
    Tape tape;
    Var s = softmax_rows(tape.constant(m));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (double v : s.value().row(r)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("logsumexp is stable for large inputs") {
  Tape tape;
  Var l = logsumexp_rows(tape.constant(Matrix(1, 2, {1000.0, 1000.0})));
  CHECK(l.scalar() == doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("grad check of a linear loss") {
  ParameterSet ps;
  std::mt19937_64 rng(7);
  Parameter& w = ps.add("w", random_values(3, 2, rng));
  const Matrix x = random_values(4, 3, rng);
  std::vector<Parameter*> params{&w};
  const auto report = grad_check(
      [&](Tape& t) { return sum(matmul(t.constant(x), t.parameter(w))); },
      params, 1e-5, 1e-4);
  CHECK(report.max_error() < 1e-9);
  CHECK(w.grad == Matrix(3, 2));
}

TEST_CASE("constant loss has zero gradient") {
  ParameterSet ps;
  Parameter& w = ps.add("w", Matrix(2, 2, 1.0));
  std::vector<Parameter*> params{&w};
  const auto report = grad_check(
      [&](Tape& t) {
        t.parameter(w);
        return sum(t.constant(Matrix(1, 1, 3.0)));
      },
      params, 1e-5, 1e-4);
  CHECK(report.max_error() == 0.0);
  CHECK(report.passed());
}

TEST_CASE("grad check of composed ops") {
  ParameterSet ps;
  std::mt19937_64 rng(8);
  Parameter& a = ps.add("a", random_values(3, 4, rng));
  Parameter& b = ps.add("b", random_values(4, 3, rng));
  Parameter& bias = ps.add("bias", random_values(1, 3, rng));
  std::vector<Parameter*> params{&a, &b, &bias};
  const auto report = grad_check(
      [&](Tape& t) {
        Var h = add_row_bias(matmul(t.parameter(a), t.parameter(b)), t.parameter(bias));
        Var s = softmax_rows(tanh(h));
        Var g = gather_rows(s, {2, 0, 2});
        return add(mean(log_sigmoid(g)), sum(logsumexp_rows(transpose(h))));
      },
      params, 1e-5, 1e-6);
  CHECK(report.passed());
}

TEST_CASE("non-finite loss in grad check") {
  ParameterSet ps;
  Parameter& w = ps.add("w", Matrix(1, 1, -1.0));
  std::vector<Parameter*> params{&w};
  CHECK_THROWS_AS(
      grad_check([&](Tape& t) { return log(t.parameter(w)); }, params, 1e-5, 1e-4),
      NumericError);
}

TEST_CASE("checkpoint round trip") {
  ParameterSet ps;
  std::mt19937_64 rng(9);
  ps.add("a", random_values(2, 3, rng));
  ps.add("b", random_values(1, 1, rng));
  const std::string text = serialize_checkpoint(ps, R"({"k":1})");
  const Checkpoint c = parse_checkpoint(text);
  ParameterSet other;
  other.add("a", Matrix(2, 3));
  other.add("b", Matrix(1, 1));
  restore_parameters(other, c);
  CHECK(other.at("a").value == ps.at("a").value);
  CHECK(other.at("b").value == ps.at("b").value);
  CHECK(serialize_checkpoint(other, R"({"k":1})") == text);

  ParameterSet wrong;
  wrong.add("a", Matrix(3, 2));
  wrong.add("b", Matrix(1, 1));
  CHECK_THROWS_AS(restore_parameters(wrong, c), CheckpointError);
  CHECK_THROWS_AS(parse_checkpoint("{\"format\":\"other\"}"), CheckpointError);
}

}  // TEST_SUITE

}  // namespace
}  // namespace ocoref
