#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "genplan/autodiff/ops.hpp"
#include "genplan/autodiff/params.hpp"

namespace genplan::gnn {

using ad::Index;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

// Connectivity of a batch of graphs laid out back to back. Edge r runs from
// node src[r] to node dst[r]; node_graph maps nodes to their graph.
struct GraphIndex {
  std::size_t num_graphs = 0, num_nodes = 0, num_edges = 0;
  Index src, dst, node_graph;
};

template <class T>
struct GraphState {
  Var<T> u;  // [G x d_u]
  Var<T> v;  // [N x d_v]
  Var<T> e;  // [E x d_e]
};

enum class BlockKind { GN, GNAT };

struct BlockDims {
  std::size_t d_u, d_v, d_e;
};

// Parameters for one block; shapes follow the concatenation order of each
// update's input.
template <class T>
void add_block_params(ParamStore<T>& store, BlockKind kind, const std::string& prefix, BlockDims in,
                      std::size_t d, std::mt19937_64& rng) {
  store.add_weight(prefix + ".We", in.d_e + in.d_v, d, rng);
  store.add_zero(prefix + ".be", 1, d);
  if (kind == BlockKind::GN) {
    store.add_weight(prefix + ".Wv1", in.d_v + d, d, rng);
    store.add_zero(prefix + ".bv1", 1, d);
    store.add_weight(prefix + ".Wv2", d + in.d_u, d, rng);
    store.add_zero(prefix + ".bv2", 1, d);
  } else {
    store.add_weight(prefix + ".Wv1", in.d_v, d, rng);
    store.add_zero(prefix + ".bv1", 1, d);
    store.add_weight(prefix + ".Wk", in.d_v, d, rng);
    store.add_zero(prefix + ".bk", 1, d);
    store.add_weight(prefix + ".Wq", d, d, rng);
    store.add_zero(prefix + ".bq", 1, d);
    store.add_weight(prefix + ".Wv", in.d_v + d + in.d_u, d, rng);
    store.add_zero(prefix + ".bv", 1, d);
  }
  store.add_weight(prefix + ".Wu", d, d, rng);
  store.add_zero(prefix + ".bu", 1, d);
}

namespace detail {

template <class T, class Store>
Var<T> p(Tape<T>& t, Store& s, const std::string& name) {
  return ad::param(t, s.get(name));
}

template <class T, class Store>
Var<T> rows(Tape<T>& t, Store& s, const std::string& name, std::size_t begin, std::size_t end) {
  return ad::param_rows(t, s.get(name), begin, end);
}

template <class Store>
void require_rows(Store& s, const std::string& name, std::size_t expected) {
  if (s.get(name).rows != expected)
    throw ShapeMismatch(name + " expects " + std::to_string(s.get(name).rows) + " input features, got " +
                        std::to_string(expected));
}

// relu(W [e_ij, v_origin] + b) computed as e W[:d_e] + gather(v W[d_e:], src).
template <class T, class Store>
Var<T> edge_update(Tape<T>& t, Store& s, const std::string& prefix, const GraphState<T>& g,
                   const GraphIndex& idx) {
  const std::size_t de = g.e.cols(), dv = g.v.cols();
  require_rows(s, prefix + ".We", de + dv);
  Var<T> from_edge = ad::matmul(g.e, rows(t, s, prefix + ".We", 0, de));
  Var<T> from_node = ad::gather_rows(ad::matmul(g.v, rows(t, s, prefix + ".We", de, de + dv)), idx.src);
  return ad::relu(ad::add_bias(ad::add(from_edge, from_node), p(t, s, prefix + ".be")));
}

template <class T, class Store>
Var<T> global_update(Tape<T>& t, Store& s, const std::string& prefix, Var<T> v_new, const GraphIndex& idx) {
  Var<T> pooled = ad::segment_mean(v_new, idx.node_graph, idx.num_graphs);
  return ad::relu(ad::add_bias(ad::matmul(pooled, p(t, s, prefix + ".Wu")), p(t, s, prefix + ".bu")));
}

}  // namespace detail

// Edges take their origin node; each node max-pools its incoming edge
// messages, then combines them with the graph's global vector.
template <class T, class Store>
GraphState<T> gn_block_forward(Tape<T>& t, Store& s, const std::string& prefix, const GraphState<T>& g,
                               const GraphIndex& idx) {
  using detail::p;
  using detail::rows;
  const std::size_t dv = g.v.cols(), du = g.u.cols();
  Var<T> e_new = detail::edge_update(t, s, prefix, g, idx);
  const std::size_t d = e_new.cols();
  detail::require_rows(s, prefix + ".Wv1", dv + d);
  detail::require_rows(s, prefix + ".Wv2", d + du);
  Var<T> from_node = ad::gather_rows(ad::matmul(g.v, rows(t, s, prefix + ".Wv1", 0, dv)), idx.dst);
  Var<T> from_edge = ad::matmul(e_new, rows(t, s, prefix + ".Wv1", dv, dv + d));
  Var<T> h = ad::relu(ad::add_bias(ad::add(from_node, from_edge), p(t, s, prefix + ".bv1")));
  Var<T> m = ad::segment_max(h, idx.dst, idx.num_nodes);
  Var<T> from_msg = ad::matmul(m, rows(t, s, prefix + ".Wv2", 0, d));
  Var<T> from_global =
      ad::gather_rows(ad::matmul(g.u, rows(t, s, prefix + ".Wv2", d, d + du)), idx.node_graph);
  Var<T> v_new = ad::relu(ad::add_bias(ad::add(from_msg, from_global), p(t, s, prefix + ".bv2")));
  Var<T> u_new = detail::global_update(t, s, prefix, v_new, idx);
  return {u_new, v_new, e_new};
}

// Attention weights of the last gnat_block_forward call, kept for inspection.
template <class T>
struct AttentionTrace {
  Var<T> alpha;  // [E x 1]
};

// Each node attends over its incoming edges with keys from the node and
// queries from the updated edges; the weighted edge sum feeds the node update.
template <class T, class Store>
GraphState<T> gnat_block_forward(Tape<T>& t, Store& s, const std::string& prefix, const GraphState<T>& g,
                                 const GraphIndex& idx, AttentionTrace<T>* trace = nullptr) {
  using detail::p;
  using detail::rows;
  const std::size_t dv = g.v.cols(), du = g.u.cols();
  Var<T> e_new = detail::edge_update(t, s, prefix, g, idx);
  const std::size_t d = e_new.cols();
  detail::require_rows(s, prefix + ".Wv", dv + d + du);
  Var<T> h = ad::relu(ad::add_bias(ad::matmul(g.v, p(t, s, prefix + ".Wv1")), p(t, s, prefix + ".bv1")));
  (void)h;
  Var<T> k = ad::relu(ad::add_bias(ad::matmul(g.v, p(t, s, prefix + ".Wk")), p(t, s, prefix + ".bk")));
  Var<T> q = ad::relu(ad::add_bias(ad::matmul(e_new, p(t, s, prefix + ".Wq")), p(t, s, prefix + ".bq")));
  Var<T> score = ad::row_dot(ad::gather_rows(k, idx.dst), q);
  Var<T> alpha = ad::segment_softmax(score, idx.dst, idx.num_nodes);
  if (trace) trace->alpha = alpha;
  Var<T> m = ad::segment_sum(ad::scale_rows(e_new, alpha), idx.dst, idx.num_nodes);
  Var<T> from_node = ad::matmul(g.v, rows(t, s, prefix + ".Wv", 0, dv));
  Var<T> from_msg = ad::matmul(m, rows(t, s, prefix + ".Wv", dv, dv + d));
  Var<T> from_global =
      ad::gather_rows(ad::matmul(g.u, rows(t, s, prefix + ".Wv", dv + d, dv + d + du)), idx.node_graph);
  Var<T> v_new = ad::relu(
      ad::add_bias(ad::add(ad::add(from_node, from_msg), from_global), p(t, s, prefix + ".bv")));
  Var<T> u_new = detail::global_update(t, s, prefix, v_new, idx);
  return {u_new, v_new, e_new};
}

struct EncoderStack {
  std::vector<BlockKind> blocks;
  std::size_t hidden = 256;

  static EncoderStack gn_gn(std::size_t d) { return {{BlockKind::GN, BlockKind::GN}, d}; }
  static EncoderStack gnat_gn(std::size_t d) { return {{BlockKind::GNAT, BlockKind::GN}, d}; }

  static std::string prefix(std::size_t i) { return "block" + std::to_string(i); }
};

template <class T>
void add_stack_params(ParamStore<T>& store, const EncoderStack& stack, BlockDims in, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < stack.blocks.size(); ++i) {
    add_block_params(store, stack.blocks[i], EncoderStack::prefix(i), in, stack.hidden, rng);
    in = {stack.hidden, stack.hidden, stack.hidden};
  }
}

template <class T, class Store>
GraphState<T> stack_forward(Tape<T>& t, Store& s, const EncoderStack& stack, GraphState<T> g,
                            const GraphIndex& idx) {
  for (std::size_t i = 0; i < stack.blocks.size(); ++i) {
    const std::string prefix = EncoderStack::prefix(i);
    if (stack.blocks[i] == BlockKind::GN) g = gn_block_forward(t, s, prefix, g, idx);
    else g = gnat_block_forward(t, s, prefix, g, idx);
  }
  return g;
}

}  // namespace genplan::gnn
