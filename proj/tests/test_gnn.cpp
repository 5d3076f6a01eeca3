#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "genplan/gnn.hpp"
#include "gradcheck.hpp"

using namespace genplan;
using namespace genplan::gnn;
using ad::Tape;
using ad::Var;

namespace {

// Complete directed graphs of the given sizes, laid out back to back.
GraphIndex complete_graphs(const std::vector<std::size_t>& sizes) {
  GraphIndex g;
  std::vector<std::uint32_t> src, dst, node_graph;
  std::size_t base = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      node_graph.push_back(static_cast<std::uint32_t>(k));
      for (std::size_t j = 0; j < sizes[k]; ++j)
        if (i != j) {
          src.push_back(static_cast<std::uint32_t>(base + i));
          dst.push_back(static_cast<std::uint32_t>(base + j));
        }
    }
    base += sizes[k];
  }
  g.num_graphs = sizes.size();
  g.num_nodes = base;
  g.num_edges = src.size();
  g.src = ad::make_index(std::move(src));
  g.dst = ad::make_index(std::move(dst));
  g.node_graph = ad::make_index(std::move(node_graph));
  return g;
}

struct Features {
  std::vector<float> u, v, e;
};

Features random_binary(const GraphIndex& g, BlockDims d, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.4);
  Features f;
  f.u.resize(g.num_graphs * d.d_u);
  f.v.resize(g.num_nodes * d.d_v);
  f.e.resize(g.num_edges * d.d_e);
  for (auto* vec : {&f.u, &f.v, &f.e})
    for (auto& x : *vec) x = coin(rng) ? 1.0f : 0.0f;
  return f;
}

template <class T>
GraphState<T> inputs(Tape<T>& t, const GraphIndex& g, BlockDims d, const Features& f) {
  auto c = [&](const std::vector<float>& x, std::size_t r, std::size_t cols) {
    return t.constant(r, cols, std::vector<T>(x.begin(), x.end()));
  };
  return {c(f.u, g.num_graphs, d.d_u), c(f.v, g.num_nodes, d.d_v), c(f.e, g.num_edges, d.d_e)};
}

// Features of a single n-node graph with nodes reordered: new node k is old
// node perm[k].
Features permute(const Features& f, std::size_t n, BlockDims d, const std::vector<std::size_t>& perm) {
  Features out = f;
  for (std::size_t k = 0; k < n; ++k)
    std::copy_n(f.v.begin() + static_cast<long>(perm[k] * d.d_v), d.d_v, out.v.begin() + static_cast<long>(k * d.d_v));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l) {
      if (k == l) continue;
      const std::size_t old = perm[k] * (n - 1) + (perm[l] < perm[k] ? perm[l] : perm[l] - 1);
      const std::size_t now = k * (n - 1) + (l < k ? l : l - 1);
      std::copy_n(f.e.begin() + static_cast<long>(old * d.d_e), d.d_e, out.e.begin() + static_cast<long>(now * d.d_e));
    }
  return out;
}

template <class T>
GraphState<T> run_block(Tape<T>& t, ad::ParamStore<T>& s, BlockKind kind, const GraphState<T>& in,
                        const GraphIndex& g) {
  return kind == BlockKind::GN ? gn_block_forward(t, s, "b", in, g) : gnat_block_forward(t, s, "b", in, g);
}

bool all_finite(Var<float> x) {
  for (std::size_t i = 0; i < x.rows() * x.cols(); ++i)
    if (!std::isfinite(x.item(i))) return false;
  return true;
}

const BlockDims kDims{3, 9, 3};

}  // namespace

class BlockTest : public ::testing::TestWithParam<BlockKind> {};

TEST_P(BlockTest, SingleNodeGraph) {
  std::mt19937_64 rng(1);
  ad::ParamStore<float> s;
  add_block_params(s, GetParam(), "b", kDims, 8, rng);
  GraphIndex g = complete_graphs({1});
  Features f = random_binary(g, kDims, rng);
  Tape<float> t(false);
  auto out = run_block(t, s, GetParam(), inputs(t, g, kDims, f), g);
  EXPECT_EQ(out.e.rows(), 0u);
  EXPECT_EQ(out.v.rows(), 1u);
  EXPECT_EQ(out.u.rows(), 1u);
  EXPECT_TRUE(all_finite(out.v));
  EXPECT_TRUE(all_finite(out.u));
}

TEST_P(BlockTest, ZeroInputsGiveZeroOutputs) {
  std::mt19937_64 rng(2);
  ad::ParamStore<float> s;
  add_block_params(s, GetParam(), "b", kDims, 8, rng);
  GraphIndex g = complete_graphs({3, 2});
  Features f{std::vector<float>(2 * 3, 0.0f), std::vector<float>(5 * 9, 0.0f), std::vector<float>(8 * 3, 0.0f)};
  Tape<float> t(false);
  auto out = run_block(t, s, GetParam(), inputs(t, g, kDims, f), g);
  for (auto x : {out.u, out.v, out.e})
    for (std::size_t i = 0; i < x.rows() * x.cols(); ++i) EXPECT_EQ(x.item(i), 0.0f);
}

TEST_P(BlockTest, PermutationEquivariance) {
  std::mt19937_64 rng(3);
  ad::ParamStore<float> s;
  add_block_params(s, GetParam(), "b", kDims, 16, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    GraphIndex g = complete_graphs({n});
    Features f = random_binary(g, kDims, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Features fp = permute(f, n, kDims, perm);
    Tape<float> t(false);
    auto a = run_block(t, s, GetParam(), inputs(t, g, kDims, f), g);
    auto b = run_block(t, s, GetParam(), inputs(t, g, kDims, fp), g);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(a.u.item(j), b.u.item(j), 1e-5);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(b.v.item(k * 16 + j), a.v.item(perm[k] * 16 + j), 1e-5);
  }
}

TEST_P(BlockTest, FiniteOnRandomGraphs) {
  std::mt19937_64 rng(4);
  ad::ParamStore<float> s;
  add_block_params(s, GetParam(), "b", kDims, 16, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    GraphIndex g = complete_graphs({1 + rng() % 6});
    Features f = random_binary(g, kDims, rng);
    Tape<float> t(false);
    auto out = run_block(t, s, GetParam(), inputs(t, g, kDims, f), g);
    ASSERT_TRUE(all_finite(out.u) && all_finite(out.v) && all_finite(out.e));
  }
}

TEST_P(BlockTest, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 4; ++trial) {
    ad::ParamStore<double> s;
    add_block_params(s, GetParam(), "b", kDims, 5, rng);
    gradcheck::randomize(s, rng());
    GraphIndex g = complete_graphs({2 + rng() % 3, 1 + rng() % 3});
    Features f = random_binary(g, kDims, rng);
    double err = gradcheck::check_params(s, [&](Tape<double>& t) {
      auto out = run_block(t, s, GetParam(), inputs(t, g, kDims, f), g);
      return ad::add(ad::add(gradcheck::project(out.u, 1), gradcheck::project(out.v, 2)),
                     gradcheck::project(out.e, 3));
    });
    EXPECT_LE(err, 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, BlockTest, ::testing::Values(BlockKind::GN, BlockKind::GNAT));

TEST(Gnat, UniformAttentionOnIdenticalEdges) {
  std::mt19937_64 rng(6);
  ad::ParamStore<float> s;
  add_block_params(s, BlockKind::GNAT, "b", kDims, 8, rng);
  const std::size_t n = 4;
  GraphIndex g = complete_graphs({n});
  Features f{{1, 0, 1}, std::vector<float>(n * 9, 0.0f), std::vector<float>(n * (n - 1) * 3, 0.0f)};
  for (std::size_t i = 0; i < n * 9; ++i) f.v[i] = (i % 9) % 2 == 0 ? 1.0f : 0.0f;
  for (std::size_t i = 0; i < f.e.size(); i += 3) f.e[i] = 1.0f;
  Tape<float> t(false);
  AttentionTrace<float> trace;
  gnat_block_forward(t, s, "b", inputs(t, g, kDims, f), g, &trace);
  for (std::size_t r = 0; r < g.num_edges; ++r) EXPECT_NEAR(trace.alpha.item(r), 1.0f / (n - 1), 1e-6);
}

TEST(Gnat, AttentionSumsToOnePerNode) {
  std::mt19937_64 rng(7);
  ad::ParamStore<float> s;
  add_block_params(s, BlockKind::GNAT, "b", kDims, 8, rng);
  for (int trial = 0; trial < 50; ++trial) {
    GraphIndex g = complete_graphs({1 + rng() % 5, 1 + rng() % 5});
    Features f = random_binary(g, kDims, rng);
    Tape<float> t(false);
    AttentionTrace<float> trace;
    gnat_block_forward(t, s, "b", inputs(t, g, kDims, f), g, &trace);
    std::vector<double> total(g.num_nodes, 0.0);
    std::vector<int> incoming(g.num_nodes, 0);
    for (std::size_t r = 0; r < g.num_edges; ++r) {
      total[(*g.dst)[r]] += trace.alpha.item(r);
      ++incoming[(*g.dst)[r]];
    }
    for (std::size_t i = 0; i < g.num_nodes; ++i)
      EXPECT_NEAR(total[i], incoming[i] ? 1.0 : 0.0, 1e-6);
  }
}

TEST(Stack, OutputShapesAtDefaultWidth) {
  std::mt19937_64 rng(8);
  for (auto stack : {EncoderStack::gn_gn(256), EncoderStack::gnat_gn(256)}) {
    ad::ParamStore<float> s;
    add_stack_params(s, stack, kDims, rng);
    const std::size_t n = 5;
    GraphIndex g = complete_graphs({n});
    Features f = random_binary(g, kDims, rng);
    Tape<float> t(false);
    auto out = stack_forward(t, s, stack, inputs(t, g, kDims, f), g);
    EXPECT_EQ(out.u.rows(), 1u);
    EXPECT_EQ(out.u.cols(), 256u);
    EXPECT_EQ(out.v.rows(), n);
    EXPECT_EQ(out.v.cols(), 256u);
    EXPECT_EQ(out.e.rows(), n * (n - 1));
    EXPECT_EQ(out.e.cols(), 256u);
  }
}

TEST(Stack, SingleBlockMatchesBlockForward) {
  std::mt19937_64 rng(9);
  EncoderStack stack{{BlockKind::GN}, 8};
  ad::ParamStore<float> s;
  add_stack_params(s, stack, kDims, rng);
  GraphIndex g = complete_graphs({4});
  Features f = random_binary(g, kDims, rng);
  Tape<float> t(false);
  auto a = stack_forward(t, s, stack, inputs(t, g, kDims, f), g);
  auto b = gn_block_forward(t, s, EncoderStack::prefix(0), inputs(t, g, kDims, f), g);
  EXPECT_EQ(a.v.tensor().data, b.v.tensor().data);
  EXPECT_EQ(a.u.tensor().data, b.u.tensor().data);
}

TEST(Stack, EquivarianceThroughTwoBlocks) {
  std::mt19937_64 rng(10);
  for (auto stack : {EncoderStack::gn_gn(16), EncoderStack::gnat_gn(16)}) {
    ad::ParamStore<float> s;
    add_stack_params(s, stack, kDims, rng);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng() % 5;
      GraphIndex g = complete_graphs({n});
      Features f = random_binary(g, kDims, rng);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Tape<float> t(false);
      auto a = stack_forward(t, s, stack, inputs(t, g, kDims, f), g);
      auto b = stack_forward(t, s, stack, inputs(t, g, kDims, permute(f, n, kDims, perm)), g);
      for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(a.u.item(j), b.u.item(j), 1e-5);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(b.v.item(k * 16 + j), a.v.item(perm[k] * 16 + j), 1e-5);
    }
  }
}

TEST(Stack, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (auto stack : {EncoderStack::gn_gn(4), EncoderStack::gnat_gn(4)}) {
    ad::ParamStore<double> s;
    add_stack_params(s, stack, kDims, rng);
    gradcheck::randomize(s, rng());
    GraphIndex g = complete_graphs({3, 2});
    Features f = random_binary(g, kDims, rng);
    double err = gradcheck::check_params(s, [&](Tape<double>& t) {
      auto out = stack_forward(t, s, stack, inputs(t, g, kDims, f), g);
      return ad::add(gradcheck::project(out.u, 1), gradcheck::project(out.v, 2));
    });
    EXPECT_LE(err, 1e-4);
  }
}

TEST(Stack, ShapeMismatchOnWrongInputDims) {
  std::mt19937_64 rng(12);
  ad::ParamStore<float> s;
  add_stack_params(s, EncoderStack::gn_gn(8), kDims, rng);
  GraphIndex g = complete_graphs({3});
  Features f = random_binary(g, {3, 7, 3}, rng);
  Tape<float> t(false);
  EXPECT_THROW(stack_forward(t, s, EncoderStack::gn_gn(8), inputs(t, g, {3, 7, 3}, f), g), std::exception);
}
