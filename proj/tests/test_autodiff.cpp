#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "genplan/autodiff/ops.hpp"
#include "genplan/autodiff/params.hpp"
#include "gradcheck.hpp"

using namespace genplan;
using namespace genplan::ad;

namespace {

constexpr double kTol = 1e-4;
constexpr int kShapes = 20;

Tensor<double> random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(r, c);
  for (auto& x : t.data) x = d(rng);
  return t;
}

std::size_t dim(std::mt19937_64& rng, std::size_t lo = 1, std::size_t hi = 6) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Index random_segments(std::size_t rows, std::size_t segments, std::mt19937_64& rng) {
  std::vector<std::uint32_t> s(rows);
  for (auto& x : s) x = static_cast<std::uint32_t>(rng() % segments);
  return make_index(std::move(s));
}

using Fn = gradcheck::InputFn;

void expect_grad_ok(const Fn& f, std::vector<Tensor<double>> inputs, const char* what) {
  const double err = gradcheck::check_inputs(f, std::move(inputs));
  EXPECT_LE(err, kTol) << what;
}

}  // namespace

TEST(GradCheck, Elementwise) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < kShapes; ++trial) {
    const std::size_t m = dim(rng), n = dim(rng);
    auto a = random_tensor(m, n, rng), b = random_tensor(m, n, rng);
    expect_grad_ok([](auto&, const auto& x) { return add(x[0], x[1]); }, {a, b}, "add");
    expect_grad_ok([](auto&, const auto& x) { return sub(x[0], x[1]); }, {a, b}, "sub");
    expect_grad_ok([](auto&, const auto& x) { return mul(x[0], x[1]); }, {a, b}, "mul");
    expect_grad_ok([](auto&, const auto& x) { return minimum(x[0], x[1]); }, {a, b}, "minimum");
    expect_grad_ok([](auto&, const auto& x) { return relu(x[0]); }, {a}, "relu");
    expect_grad_ok([](auto&, const auto& x) { return exp(x[0]); }, {a}, "exp");
    expect_grad_ok([](auto&, const auto& x) { return square(x[0]); }, {a}, "square");
    expect_grad_ok([](auto&, const auto& x) { return scale(x[0], 2.5); }, {a}, "scale");
    expect_grad_ok([](auto&, const auto& x) { return clip(x[0], -0.4, 0.4); }, {a}, "clip");
    expect_grad_ok([](auto&, const auto& x) { return log(x[0]); }, {random_tensor(m, n, rng, 0.5, 2.0)}, "log");
  }
}

TEST(GradCheck, MatmulAndBias) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < kShapes; ++trial) {
    const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
    expect_grad_ok([](auto&, const auto& x) { return matmul(x[0], x[1]); },
                   {random_tensor(m, k, rng), random_tensor(k, n, rng)}, "matmul");
    expect_grad_ok([](auto&, const auto& x) { return add_bias(x[0], x[1]); },
                   {random_tensor(m, n, rng), random_tensor(1, n, rng)}, "add_bias");
  }
}

TEST(GradCheck, ShapeOps) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < kShapes; ++trial) {
    const std::size_t m = dim(rng), n1 = dim(rng), n2 = dim(rng);
    expect_grad_ok([](auto&, const auto& x) { return concat_cols<double>({x[0], x[1]}); },
                   {random_tensor(m, n1, rng), random_tensor(m, n2, rng)}, "concat_cols");
    expect_grad_ok([](auto&, const auto& x) { return concat_rows<double>({x[0], x[1]}); },
                   {random_tensor(n1, m, rng), random_tensor(n2, m, rng)}, "concat_rows");
    const std::size_t rows = dim(rng, 2, 8);
    const std::size_t b = rng() % rows, e = b + 1 + rng() % (rows - b);
    expect_grad_ok([b, e](auto&, const auto& x) { return row_slice(x[0], b, e); },
                   {random_tensor(rows, n1, rng)}, "row_slice");
    auto idx = random_segments(dim(rng, 1, 10), rows, rng);
    expect_grad_ok([idx](auto&, const auto& x) { return gather_rows(x[0], idx); },
                   {random_tensor(rows, n1, rng)}, "gather_rows");
  }
}

TEST(GradCheck, Reductions) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < kShapes; ++trial) {
    const std::size_t m = dim(rng), n = dim(rng);
    auto a = random_tensor(m, n, rng);
    expect_grad_ok([](auto&, const auto& x) { return sum(x[0]); }, {a}, "sum");
    expect_grad_ok([](auto&, const auto& x) { return mean(x[0]); }, {a}, "mean");
    for (int axis : {0, 1}) {
      expect_grad_ok([axis](auto&, const auto& x) { return sum(x[0], axis); }, {a}, "sum axis");
      expect_grad_ok([axis](auto&, const auto& x) { return mean(x[0], axis); }, {a}, "mean axis");
      expect_grad_ok([axis](auto&, const auto& x) { return max(x[0], axis); }, {a}, "max axis");
    }
    expect_grad_ok([](auto&, const auto& x) { return row_dot(x[0], x[1]); }, {a, random_tensor(m, n, rng)},
                   "row_dot");
    expect_grad_ok([](auto&, const auto& x) { return scale_rows(x[0], x[1]); }, {a, random_tensor(m, 1, rng)},
                   "scale_rows");
  }
}

TEST(GradCheck, SegmentOps) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < kShapes; ++trial) {
    const std::size_t rows = dim(rng, 1, 12), n = dim(rng), segs = dim(rng, 1, 5);
    auto seg = random_segments(rows, segs, rng);
    auto a = random_tensor(rows, n, rng);
    auto col = random_tensor(rows, 1, rng, -3, 3);
    expect_grad_ok([seg, segs](auto&, const auto& x) { return segment_sum(x[0], seg, segs); }, {a}, "segment_sum");
    expect_grad_ok([seg, segs](auto&, const auto& x) { return segment_mean(x[0], seg, segs); }, {a},
                   "segment_mean");
    expect_grad_ok([seg, segs](auto&, const auto& x) { return segment_max(x[0], seg, segs); }, {a}, "segment_max");
    expect_grad_ok([seg, segs](auto&, const auto& x) { return segment_softmax(x[0], seg, segs); }, {col},
                   "segment_softmax");
    expect_grad_ok([seg, segs](auto&, const auto& x) { return segment_logsoftmax(x[0], seg, segs); }, {col},
                   "segment_logsoftmax");
  }
}

TEST(Ops, LogSoftmaxOfEqualLogits) {
  Tape<double> t;
  for (std::size_t k : {1u, 2u, 5u}) {
    auto x = t.constant(k, 1, std::vector<double>(k, 0.3));
    auto y = segment_logsoftmax(x, make_index(std::vector<std::uint32_t>(k, 0)), 1);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(y.item(i), -std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(Ops, SingletonMaxPoolIsIdentity) {
  Tape<double> t;
  auto x = t.constant(3, 2, {1, -2, 3, 4, -5, 6});
  auto y = segment_max(x, make_index({0, 1, 2}), 3);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y.item(i), x.item(i));
}

TEST(Ops, EmptySegmentsAreZero) {
  Tape<double> t;
  auto x = t.constant(2, 2, {-1, -2, -3, -4});
  auto idx = make_index({0, 0});
  auto mx = segment_max(x, idx, 2);
  auto sm = segment_sum(x, idx, 2);
  EXPECT_EQ(mx.item(0), -1);
  EXPECT_EQ(mx.item(1), -2);
  for (std::size_t i = 2; i < 4; ++i) {
    EXPECT_EQ(mx.item(i), 0);
    EXPECT_EQ(sm.item(i), 0);
  }
}

TEST(Ops, SegmentSumMatchesLoop) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = dim(rng, 1, 30), n = dim(rng), segs = dim(rng, 1, 7);
    auto seg = random_segments(rows, segs, rng);
    auto a = random_tensor(rows, n, rng);
    Tape<double> t(false);
    auto y = segment_sum(t.constant(a), seg, segs);
    std::vector<double> expect(segs * n, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) expect[(*seg)[r] * n + j] += a(r, j);
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(y.item(i), expect[i], 1e-12);
  }
}

TEST(Ops, SingleSegmentMatchesGlobal) {
  std::mt19937_64 rng(7);
  auto a = random_tensor(6, 3, rng);
  auto col = random_tensor(6, 1, rng);
  Tape<double> t(false);
  auto x = t.constant(a);
  auto one = make_index(std::vector<std::uint32_t>(6, 0));
  auto s1 = segment_sum(x, one, 1), s2 = sum(x, 0);
  auto m1 = segment_max(x, one, 1), m2 = max(x, 0);
  auto a1 = segment_mean(x, one, 1), a2 = mean(x, 0);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(s1.item(j), s2.item(j), 1e-12);
    EXPECT_EQ(m1.item(j), m2.item(j));
    EXPECT_NEAR(a1.item(j), a2.item(j), 1e-12);
  }
  auto c = t.constant(col);
  auto ls = segment_logsoftmax(c, one, 1);
  double z = 0;
  for (double v : col.data) z += std::exp(v);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(ls.item(i), col.data[i] - std::log(z), 1e-12);
}

TEST(Backward, SquareAndRelu) {
  std::vector<double> x{3.0}, g{0.0};
  {
    Tape<double> t;
    auto v = t.external(1, 1, x.data(), g.data());
    t.backward(square(v));
  }
  EXPECT_DOUBLE_EQ(g[0], 6.0);
  std::vector<double> y{-2.0}, gy{0.0};
  {
    Tape<double> t;
    auto v = t.external(1, 1, y.data(), gy.data());
    t.backward(sum(relu(v)));
  }
  EXPECT_EQ(gy[0], 0.0);
}

TEST(Backward, NonScalarLoss) {
  Tape<double> t;
  std::vector<double> x{1, 2}, g{0, 0};
  auto v = t.external(2, 1, x.data(), g.data());
  EXPECT_THROW(t.backward(v), NonScalarLoss);
}

TEST(Backward, ShapeAndIndexErrors) {
  Tape<double> t;
  auto a = t.constant(2, 3, std::vector<double>(6, 1.0));
  auto b = t.constant(2, 3, std::vector<double>(6, 1.0));
  EXPECT_THROW(matmul(a, b), ShapeMismatch);
  EXPECT_THROW(add(a, t.constant(3, 2, std::vector<double>(6, 1.0))), ShapeMismatch);
  EXPECT_THROW(gather_rows(a, make_index({5})), IndexError);
  EXPECT_THROW(segment_sum(a, make_index({0}), 1), ShapeMismatch);
}

TEST(Backward, DeterministicForward) {
  std::mt19937_64 rng(8);
  auto a = random_tensor(17, 9, rng), b = random_tensor(9, 13, rng);
  auto run = [&] {
    Tape<float> t(false);
    std::vector<float> fa(a.data.begin(), a.data.end()), fb(b.data.begin(), b.data.end());
    return segment_max(relu(matmul(t.constant(17, 9, fa), t.constant(9, 13, fb))),
                       make_index({0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1}), 3)
        .tensor()
        .data;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  ParamStore<double> s;
  auto& x = s.add_zero("x", 1, 1);
  x.grad[0] = 1.0;  // d/dx of f(x) = x
  s.adam_step({0.1, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(x.value[0], -0.1, 1e-6);
  EXPECT_EQ(x.grad[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamStore<double> s;
  std::mt19937_64 rng(1);
  auto& w = s.add_weight("w", 4, 3, rng);
  auto before = w.value;
  s.adam_step({0.1, 0.9, 0.999, 1e-8});
  EXPECT_EQ(w.value, before);
}

TEST(Adam, ConvergesOnConvexQuadratic) {
  ParamStore<double> s;
  std::mt19937_64 rng(3);
  auto& x = s.add_weight("x", 1, 5, rng);
  const std::vector<double> curvature{1.0, 2.0, 0.5, 3.0, 1.5};
  auto gradient = [&] {
    for (std::size_t i = 0; i < 5; ++i) x.grad[i] = curvature[i] * x.value[i];
  };
  for (int step = 0; step < 200; ++step) {
    gradient();
    s.adam_step({0.05, 0.9, 0.999, 1e-8});
  }
  gradient();
  EXPECT_LT(s.grad_norm(), 1e-3);
}

TEST(ParamStore, GradientClipping) {
  ParamStore<double> s;
  auto& a = s.add_zero("a", 1, 2);
  auto& b = s.add_zero("b", 2, 1);
  a.grad = {3.0, 0.0};
  b.grad = {0.0, 4.0};
  EXPECT_NEAR(s.clip_grad_norm(0.5), 5.0, 1e-12);
  EXPECT_NEAR(s.grad_norm(), 0.5, 1e-12);
  EXPECT_NEAR(a.grad[0] / b.grad[1], 0.75, 1e-12);
  s.clip_grad_norm(10.0);
  EXPECT_NEAR(s.grad_norm(), 0.5, 1e-12);
}

TEST(ParamStore, InitBounds) {
  ParamStore<float> s;
  std::mt19937_64 rng(2);
  auto& w = s.add_weight("w", 16, 8, rng);
  auto& b = s.add_zero("b", 1, 8);
  for (float x : w.value) EXPECT_LE(std::abs(x), 0.25f);
  for (float x : b.value) EXPECT_EQ(x, 0.0f);
  EXPECT_THROW(s.add_zero("w", 1, 1), ShapeMismatch);
}

TEST(Checkpoint, RoundTrip) {
  ParamStore<float> s;
  std::mt19937_64 rng(4);
  s.add_weight("block0.We", 5, 3, rng);
  s.add_zero("block0.be", 1, 3);
  s.add_weight("value.W2", 3, 1, rng);
  Metadata meta{{"arch", "gn-gn"}, {"hidden", "3"}};
  auto ck = deserialize(serialize(s, meta));
  EXPECT_EQ(ck.meta, meta);
  EXPECT_TRUE(ck.params.same_values(s));
}

TEST(Checkpoint, CorruptHeader) {
  ParamStore<float> s;
  s.add_zero("x", 2, 2);
  std::string buf = serialize(s, {});
  std::string bad = buf;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), LayoutMismatch);
  EXPECT_THROW(deserialize(buf.substr(0, buf.size() - 3)), LayoutMismatch);
  EXPECT_THROW(deserialize(""), LayoutMismatch);
  std::string wrong_version = buf;
  wrong_version[8] = 7;
  EXPECT_THROW(deserialize(wrong_version), LayoutMismatch);
}
