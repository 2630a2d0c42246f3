#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "drex/gradcheck.hpp"
#include "drex/tape.hpp"

using namespace drex;

namespace {

Mat random_mat(Rng& rng, int rows, int cols, double away_from_zero = 0.0) {
  Mat m(rows, cols);
  for (int i = 0; i < m.size(); ++i) {
    double v = rng.uniform(-1.0, 1.0);
    if (away_from_zero > 0.0) {
      v = (v < 0.0 ? -1.0 : 1.0) * (away_from_zero + std::abs(v));
    }
    m(i) = v;
  }
  return m;
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Gradchecks `build` at `params`. Leaves are handed to the builder in
// params order.
GradcheckReport check_op(const NamedTensors& params, const Builder& build) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& name : params.names()) leaves.push_back(tape.leaf(&params.at(name)));
  Var root = build(tape, leaves);
  tape.backward(root);
  NamedTensors analytic = params.zeros_like();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    analytic.at(params.names()[i]) = tape.gradient(leaves[i]);
  }
  auto fn = [&build](const NamedTensors& p) {
    Tape t;
    std::vector<Var> ls;
    for (const auto& name : p.names()) ls.push_back(t.leaf(&p.at(name)));
    return t.value(build(t, ls))(0, 0);
  };
  return finite_diff_gradcheck(fn, params, analytic);
}

void expect_pass(const GradcheckReport& r) {
  INFO("worst: " << r.worst_tensor << "(" << r.worst_row << "," << r.worst_col
                 << ") rel=" << r.max_rel_error);
  CHECK(r.passed(1e-4));
}

}  // namespace

TEST_CASE("forward values: activations and softmax") {
  Tape t;
  Var x = t.leaf(Mat::Zero(1, 1));
  CHECK(t.value(elementwise(Activation::kSigmoid, x))(0, 0) == doctest::Approx(0.5));

  Var ln3 = t.leaf(Mat::Constant(1, 1, std::log(3.0)));
  CHECK(t.value(elementwise(Activation::kTanh, ln3))(0, 0) == doctest::Approx(0.8));

  Var neg = t.constant(Mat::Constant(1, 1, -800.0));
  CHECK(t.value(elementwise(Activation::kSigmoid, neg))(0, 0) == 0.0);
  Var pos = t.constant(Mat::Constant(1, 1, 800.0));
  CHECK(t.value(elementwise(Activation::kSigmoid, pos))(0, 0) == 1.0);

  Vec s(3);
  s << 5.0, 5.0, 5.0;
  Var sm = softmax(t.leaf(Mat(s)));
  for (int i = 0; i < 3; ++i) CHECK(t.value(sm)(i, 0) == doctest::Approx(1.0 / 3.0));

  // shift invariance
  Vec raw(4);
  raw << 0.3, -1.2, 2.0, 0.0;
  Vec shifted = raw.array() + 1000.0;
  Tape t2;
  Mat a = t2.value(softmax(t2.leaf(Mat(raw))));
  Mat b = t2.value(softmax(t2.leaf(Mat(shifted))));
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.sum() == doctest::Approx(1.0));
  CHECK(a.minCoeff() > 0.0);
}

TEST_CASE("gradcheck: matmul") {
  Rng rng(1);
  NamedTensors p;
  p.add("A", random_mat(rng, 3, 4));
  p.add("B", random_mat(rng, 4, 2));
  expect_pass(check_op(p, [](Tape&, const std::vector<Var>& v) {
    return squared_norm(matmul(v[0], v[1]));
  }));
}

TEST_CASE("gradcheck: matmul_tA") {
  Rng rng(2);
  NamedTensors p;
  p.add("A", random_mat(rng, 5, 3));
  p.add("B", random_mat(rng, 5, 2));
  expect_pass(check_op(p, [](Tape&, const std::vector<Var>& v) {
    return squared_norm(matmul_tA(v[0], v[1]));
  }));
}

TEST_CASE("gradcheck: add, sub, hadamard chain") {
  Rng rng(3);
  NamedTensors p;
  p.add("A", random_mat(rng, 4, 3));
  p.add("B", random_mat(rng, 4, 3));
  expect_pass(check_op(p, [](Tape&, const std::vector<Var>& v) {
    return squared_norm(hadamard(add(v[0], v[1]), sub(v[0], v[1])));
  }));
}

TEST_CASE("gradcheck: add_rowwise with asymmetric weighting") {
  Rng rng(4);
  NamedTensors p;
  p.add("M", random_mat(rng, 5, 3));
  p.add("b", random_mat(rng, 3, 1));
  Mat w = random_mat(rng, 5, 3);
  expect_pass(check_op(p, [w](Tape& t, const std::vector<Var>& v) {
    return squared_norm(hadamard(add_rowwise(v[0], v[1]), t.constant(w)));
  }));
}

TEST_CASE("gradcheck: activations") {
  Rng rng(5);
  for (Activation act : {Activation::kSigmoid, Activation::kTanh, Activation::kRelu}) {
    NamedTensors p;
    // relu is non-differentiable at 0; keep probes away from the kink
    p.add("X", random_mat(rng, 4, 4, 0.05));
    Mat w = random_mat(rng, 4, 4);
    expect_pass(check_op(p, [act, w](Tape& t, const std::vector<Var>& v) {
      return squared_norm(hadamard(elementwise(act, v[0]), t.constant(w)));
    }));
  }
}

TEST_CASE("gradcheck: softmax") {
  Rng rng(6);
  NamedTensors p;
  p.add("s", random_mat(rng, 6, 1));
  Mat w = random_mat(rng, 6, 1);
  expect_pass(check_op(p, [w](Tape& t, const std::vector<Var>& v) {
    return squared_norm(hadamard(softmax(v[0]), t.constant(w)));
  }));
}

TEST_CASE("gradcheck: concat, scale, one_minus") {
  Rng rng(7);
  NamedTensors p;
  p.add("a", random_mat(rng, 3, 1));
  p.add("b", random_mat(rng, 5, 1));
  Mat w = random_mat(rng, 8, 1);
  expect_pass(check_op(p, [w](Tape& t, const std::vector<Var>& v) {
    Var c = concat_v(v[0], v[1]);
    return squared_norm(hadamard(one_minus(scale(c, 0.7)), t.constant(w)));
  }));
}

TEST_CASE("gradcheck: project") {
  Rng rng(8);
  NamedTensors p;
  p.add("P", random_mat(rng, 6, 4));
  p.add("b", random_mat(rng, 4, 1));
  p.add("x", random_mat(rng, 6, 1));
  Mat w = random_mat(rng, 4, 1);
  expect_pass(check_op(p, [w](Tape& t, const std::vector<Var>& v) {
    return squared_norm(hadamard(project(v[0], v[1], v[2]), t.constant(w)));
  }));
}

TEST_CASE("gradcheck: stack_rows with a repeated operand") {
  Rng rng(9);
  NamedTensors p;
  p.add("r1", random_mat(rng, 3, 1));
  p.add("r2", random_mat(rng, 3, 1));
  Mat w = random_mat(rng, 3, 3);
  expect_pass(check_op(p, [w](Tape& t, const std::vector<Var>& v) {
    Var stacked = stack_rows(t, {v[0], v[1], v[0]});  // r1 appears twice
    return squared_norm(hadamard(stacked, t.constant(w)));
  }));
}

TEST_CASE("gradcheck: sum_scalars with a repeated operand") {
  Rng rng(10);
  NamedTensors p;
  p.add("a", random_mat(rng, 2, 2));
  p.add("b", random_mat(rng, 2, 2));
  expect_pass(check_op(p, [](Tape& t, const std::vector<Var>& v) {
    Var sa = squared_norm(v[0]);
    Var sb = squared_norm(v[1]);
    return sum_scalars(t, {sa, sb, sa});
  }));
}

TEST_CASE("gradcheck: gated recurrent composite") {
  Rng rng(11);
  const int d = 4;
  NamedTensors p;
  p.add("W", random_mat(rng, d, d));
  p.add("U", random_mat(rng, d, d));
  p.add("b", random_mat(rng, d, 1));
  p.add("u", random_mat(rng, d, 1));
  p.add("x", random_mat(rng, d, 1));
  Mat w = random_mat(rng, d, 1);
  expect_pass(check_op(p, [w](Tape& t, const std::vector<Var>& v) {
    Var z = elementwise(Activation::kSigmoid, add(add(matmul(v[0], v[3]), matmul(v[1], v[4])), v[2]));
    Var cand = elementwise(Activation::kTanh, matmul(v[0], hadamard(z, v[3])));
    Var out = add(hadamard(one_minus(z), v[3]), hadamard(z, cand));
    return squared_norm(hadamard(out, t.constant(w)));
  }));
}

TEST_CASE("constants and unreachable leaves get zero gradients") {
  Rng rng(12);
  Tape t;
  Var a = t.leaf(random_mat(rng, 3, 3));
  Var c = t.constant(random_mat(rng, 3, 3));
  Var unused = t.leaf(random_mat(rng, 2, 2));
  Var root = squared_norm(matmul(a, c));
  t.backward(root);

  CHECK(t.gradient(c).isZero(0.0));
  CHECK(t.gradient(unused).isZero(0.0));
  CHECK_FALSE(t.gradient(a).isZero(0.0));
}

TEST_CASE("backward twice produces identical gradients") {
  Rng rng(13);
  Tape t;
  Var a = t.leaf(random_mat(rng, 3, 2));
  Var b = t.leaf(random_mat(rng, 2, 3));
  Var root = squared_norm(matmul(a, b));
  t.backward(root);
  const Mat g1 = t.gradient(a);
  t.backward(root);
  const Mat g2 = t.gradient(a);
  CHECK((g1 - g2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two roots on one tape are swept independently") {
  Rng rng(14);
  Tape t;
  Mat av = random_mat(rng, 3, 1);
  Var a = t.leaf(&av);
  Var r1 = squared_norm(a);
  Var r2 = squared_norm(scale(a, 2.0));

  t.backward(r1);
  const Mat g1 = t.gradient(a);
  t.backward(r2);
  const Mat g2 = t.gradient(a);
  CHECK((g2 - 4.0 * g1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("root with no trainable ancestors leaves all gradients zero") {
  Tape t;
  Var a = t.constant(Mat::Ones(2, 2));
  Var b = t.constant(Mat::Ones(2, 2));
  Var root = squared_norm(matmul(a, b));
  t.backward(root);
  CHECK(t.gradient(a).isZero(0.0));
  CHECK(t.gradient(root).isZero(0.0));
}

TEST_CASE("shape and ownership violations throw") {
  Tape t, t2;
  Var a = t.leaf(Mat::Ones(2, 3));
  Var b = t.leaf(Mat::Ones(2, 3));
  Var other = t2.leaf(Mat::Ones(2, 3));

  CHECK_THROWS_AS(matmul(a, b), DimensionError);
  CHECK_THROWS_AS(add(a, t.leaf(Mat::Ones(3, 2))), DimensionError);
  CHECK_THROWS_AS(add(a, other), ContractError);
  CHECK_THROWS_AS(t.backward(a), ContractError);  // non-scalar root
  CHECK_THROWS_AS(softmax(t.leaf(Mat::Ones(2, 2))), DimensionError);
  CHECK_THROWS_AS(concat_v(t.leaf(Mat::Ones(2, 2)), b), DimensionError);
}

TEST_CASE("accumulate_gradient scales into external storage") {
  Tape t;
  Mat av = Mat::Ones(2, 2);
  Var a = t.leaf(&av);
  Var root = squared_norm(a);
  t.backward(root);

  Mat acc = Mat::Zero(2, 2);
  t.accumulate_gradient(a, acc, 0.5);
  CHECK((acc - av).cwiseAbs().maxCoeff() < 1e-12);  // d||a||^2/da = 2a, scaled by 0.5

  Mat wrong = Mat::Zero(3, 3);
  CHECK_THROWS_AS(t.accumulate_gradient(a, wrong, 1.0), DimensionError);
}
