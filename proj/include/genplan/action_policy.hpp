#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "genplan/autodiff/ops.hpp"
#include "genplan/autodiff/params.hpp"
#include "genplan/encoder.hpp"
#include "genplan/errors.hpp"
#include "genplan/gnn.hpp"
#include "genplan/pddl/task.hpp"

namespace genplan {

using pddl::ActionId;
using pddl::State;
using pddl::Task;

enum class EffectKind : std::uint8_t { Global = 0, Node = 1, Edge = 2 };

struct EffectDescriptor {
  EffectKind kind = EffectKind::Global;
  int sign = 1;
  std::size_t slot = 0;  // position within the predicate's arity class
  std::size_t i = 0, j = 0;
  std::size_t action = 0;

  bool operator==(const EffectDescriptor&) const = default;
};

// One descriptor per add atom (+1) and per delete atom (-1). Binary atoms
// with a repeated argument have no edge and are skipped.
inline std::vector<EffectDescriptor> describe_effects(const Task& task, ActionId a, const FeatureLayout& layout,
                                                      std::size_t action_index = 0) {
  std::vector<EffectDescriptor> out;
  const auto& act = task.actions[a];
  auto emit = [&](pddl::AtomId id, int sign) {
    const pddl::GroundAtom g = task.atoms.decode(id);
    EffectDescriptor d;
    d.kind = static_cast<EffectKind>(g.arity);
    d.sign = sign;
    d.slot = static_cast<std::size_t>(layout.slot[g.predicate]);
    d.action = action_index;
    if (g.arity >= 1) d.i = g.args[0];
    if (g.arity == 2) {
      d.j = g.args[1];
      if (d.i == d.j) return;
    }
    out.push_back(d);
  };
  for (pddl::AtomId id : act.del) emit(id, -1);
  for (pddl::AtomId id : act.add) emit(id, +1);
  return out;
}

// A state to score: its task, up to K previous states (oldest first), the
// current state and the candidate actions.
struct Observation {
  const Task* task = nullptr;
  std::vector<const State*> history;
  const State* state = nullptr;
  const std::vector<ActionId>* actions = nullptr;
};

// Features and index arrays for a batch of observations.
struct GraphBatch {
  gnn::GraphIndex graph;
  std::size_t d_u = 0, d_v = 0, d_e = 0;
  std::vector<float> u, v, e;
  std::vector<std::size_t> node_offset, edge_offset, action_offset;
  std::size_t num_actions = 0;
  ad::Index action_state;
  // Per effect kind: component row, sign-vector position, sign, action row.
  struct EffectRows {
    ad::Index component, position, action;
    std::vector<float> sign;
    std::size_t size() const { return sign.size(); }
  };
  EffectRows effects[3];

  std::size_t num_states() const { return graph.num_graphs; }
};

inline GraphBatch build_batch(const std::vector<Observation>& obs, const FeatureLayout& layout) {
  GraphBatch b;
  b.d_u = layout.d_u();
  b.d_v = layout.d_v();
  b.d_e = layout.d_e();
  std::vector<std::uint32_t> src, dst, node_graph, action_state;
  std::vector<std::uint32_t> comp[3], pos[3], act[3];
  std::vector<State> hist;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Observation& o = obs[k];
    if (!o.actions || o.actions->empty()) throw NoApplicableActions("observation has no candidate actions");
    hist.clear();
    for (const State* h : o.history) hist.push_back(*h);
    StateGoalGraph g = encode(*o.task, hist, *o.state, layout);
    const std::size_t n = g.n;
    const std::size_t nodes_before = b.graph.num_nodes;
    const std::size_t edges_before = b.graph.num_edges;
    b.node_offset.push_back(nodes_before);
    b.edge_offset.push_back(edges_before);
    b.action_offset.push_back(b.num_actions);
    b.u.insert(b.u.end(), g.u.begin(), g.u.end());
    b.v.insert(b.v.end(), g.v.begin(), g.v.end());
    for (std::size_t i = 0; i < n; ++i) {
      node_graph.push_back(static_cast<std::uint32_t>(k));
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        src.push_back(static_cast<std::uint32_t>(nodes_before + i));
        dst.push_back(static_cast<std::uint32_t>(nodes_before + j));
        const float* f = g.e.data() + (i * n + j) * g.d_e;
        b.e.insert(b.e.end(), f, f + g.d_e);
      }
    }
    b.graph.num_nodes += n;
    b.graph.num_edges += g.num_edges();
    for (std::size_t a = 0; a < o.actions->size(); ++a) {
      const std::size_t row = b.num_actions + a;
      action_state.push_back(static_cast<std::uint32_t>(k));
      for (const auto& d : describe_effects(*o.task, (*o.actions)[a], layout, row)) {
        const int kind = static_cast<int>(d.kind);
        std::size_t component = k;
        if (d.kind == EffectKind::Node) component = nodes_before + d.i;
        if (d.kind == EffectKind::Edge) component = edges_before + edge_index(n, d.i, d.j);
        comp[kind].push_back(static_cast<std::uint32_t>(component));
        pos[kind].push_back(static_cast<std::uint32_t>(layout.index(kind, layout.current_block(), d.slot)));
        act[kind].push_back(static_cast<std::uint32_t>(row));
        b.effects[kind].sign.push_back(static_cast<float>(d.sign));
      }
    }
    b.num_actions += o.actions->size();
  }
  b.graph.num_graphs = obs.size();
  b.graph.src = ad::make_index(std::move(src));
  b.graph.dst = ad::make_index(std::move(dst));
  b.graph.node_graph = ad::make_index(std::move(node_graph));
  b.action_state = ad::make_index(std::move(action_state));
  for (int k = 0; k < 3; ++k) {
    b.effects[k].component = ad::make_index(std::move(comp[k]));
    b.effects[k].position = ad::make_index(std::move(pos[k]));
    b.effects[k].action = ad::make_index(std::move(act[k]));
  }
  return b;
}

enum class Arch { GnGn, GnatGn };

inline std::string arch_name(Arch a) { return a == Arch::GnGn ? "gn-gn" : "gnat-gn"; }
inline Arch parse_arch(const std::string& s) {
  if (s == "gn-gn") return Arch::GnGn;
  if (s == "gnat-gn") return Arch::GnatGn;
  throw LayoutMismatch("unknown architecture '" + s + "'");
}
inline Arch default_arch(const std::string& domain) {
  return (domain == "blocksworld" || domain == "blocks" || domain == "gripper" || domain == "gripper-strips")
             ? Arch::GnGn
             : Arch::GnatGn;
}

template <class T>
struct NetworkOutputs {
  ad::Var<T> logp;   // [A x 1], log-softmax within each state
  ad::Var<T> value;  // [S x 1]
  ad::Var<T> actions;  // [A x d] summed effect embeddings
  gnn::GraphState<T> embeddings;
};

// Graph encoder stack plus effect MLPs and the policy and value heads.
template <class T>
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(Arch arch, std::size_t hidden, FeatureLayout layout, std::uint64_t seed)
      : arch_(arch), layout_(std::move(layout)) {
    stack_ = arch == Arch::GnGn ? gnn::EncoderStack::gn_gn(hidden) : gnn::EncoderStack::gnat_gn(hidden);
    std::mt19937_64 rng(seed);
    gnn::add_stack_params(params_, stack_, {layout_.d_u(), layout_.d_v(), layout_.d_e()}, rng);
    const std::size_t d = hidden;
    const std::size_t sign_dims[3] = {layout_.d_u(), layout_.d_v(), layout_.d_e()};
    for (int k = 0; k < 3; ++k) {
      const std::string pre = effect_prefix(k);
      params_.add_weight(pre + ".W1", d + sign_dims[k], d, rng);
      params_.add_zero(pre + ".b1", 1, d);
      params_.add_weight(pre + ".W2", d, d, rng);
      params_.add_zero(pre + ".b2", 1, d);
    }
    for (const std::string head : {"policy", "value"}) {
      params_.add_weight(head + ".W1", d, d, rng);
      params_.add_zero(head + ".b1", 1, d);
      params_.add_weight(head + ".W2", d, 1, rng);
      params_.add_zero(head + ".b2", 1, 1);
    }
  }

  // Rebuilds a network around existing parameters (e.g. from a checkpoint).
  PolicyNetwork(Arch arch, std::size_t hidden, FeatureLayout layout, ad::ParamStore<T> params)
      : PolicyNetwork(arch, hidden, std::move(layout), std::uint64_t{0}) {
    if (params.size() != params_.size()) throw LayoutMismatch("parameter count does not match the architecture");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& want = params_[i];
      const auto& got = params[i];
      if (want.name != got.name || want.rows != got.rows || want.cols != got.cols)
        throw LayoutMismatch("parameter '" + got.name + "' does not match '" + want.name + "' [" +
                             std::to_string(want.rows) + "x" + std::to_string(want.cols) + "]");
    }
    params_ = std::move(params);
  }

  static std::string effect_prefix(int kind) {
    static const char* names[3] = {"effect.global", "effect.node", "effect.edge"};
    return names[kind];
  }

  Arch arch() const { return arch_; }
  std::size_t hidden() const { return stack_.hidden; }
  const FeatureLayout& layout() const { return layout_; }
  const gnn::EncoderStack& stack() const { return stack_; }
  ad::ParamStore<T>& params() { return params_; }
  const ad::ParamStore<T>& params() const { return params_; }

  // Gradients flow into the parameters only when the tape records.
  NetworkOutputs<T> forward(ad::Tape<T>& t, const GraphBatch& b) {
    return forward_impl(t, b, params_);
  }
  NetworkOutputs<T> forward(ad::Tape<T>& t, const GraphBatch& b) const {
    return forward_impl(t, b, params_);
  }

 private:
  template <class Store>
  NetworkOutputs<T> forward_impl(ad::Tape<T>& t, const GraphBatch& b, Store& s) const {
    if (b.d_u != layout_.d_u() || b.d_v != layout_.d_v() || b.d_e != layout_.d_e())
      throw LayoutMismatch("batch features do not match the network layout");
    auto cvt = [&](const std::vector<float>& x, std::size_t rows, std::size_t cols) {
      return t.constant(rows, cols, std::vector<T>(x.begin(), x.end()));
    };
    const auto& gi = b.graph;
    gnn::GraphState<T> g{cvt(b.u, gi.num_graphs, b.d_u), cvt(b.v, gi.num_nodes, b.d_v),
                         cvt(b.e, gi.num_edges, b.d_e)};
    gnn::GraphState<T> fin = gnn::stack_forward(t, s, stack_, g, gi);
    const std::size_t d = stack_.hidden;

    std::vector<ad::Var<T>> rows;
    std::vector<std::uint32_t> action_rows;
    const ad::Var<T> comps[3] = {fin.u, fin.v, fin.e};
    for (int k = 0; k < 3; ++k) {
      const auto& eff = b.effects[k];
      if (eff.size() == 0) continue;
      const std::string pre = effect_prefix(k);
      auto& W1 = s.get(pre + ".W1");
      ad::Var<T> x = ad::matmul(ad::gather_rows(comps[k], eff.component), ad::param_rows(t, W1, 0, d));
      ad::Var<T> sign = t.constant(eff.size(), 1, std::vector<T>(eff.sign.begin(), eff.sign.end()));
      ad::Var<T> from_sign = ad::scale_rows(ad::gather_rows(ad::param_rows(t, W1, d, W1.rows), eff.position), sign);
      ad::Var<T> h = ad::relu(ad::add_bias(ad::add(x, from_sign), ad::param(t, s.get(pre + ".b1"))));
      h = ad::relu(ad::add_bias(ad::matmul(h, ad::param(t, s.get(pre + ".W2"))), ad::param(t, s.get(pre + ".b2"))));
      rows.push_back(h);
      action_rows.insert(action_rows.end(), eff.action->begin(), eff.action->end());
    }
    ad::Var<T> emb = rows.empty()
                         ? t.constant(b.num_actions, d, std::vector<T>(b.num_actions * d, T(0)))
                         : ad::segment_sum(rows.size() == 1 ? rows[0] : ad::concat_rows(rows),
                                           ad::make_index(std::move(action_rows)), b.num_actions);
    ad::Var<T> logits = head(t, s, "policy", emb);
    NetworkOutputs<T> out;
    out.logp = ad::segment_logsoftmax(logits, b.action_state, b.num_states());
    out.value = head(t, s, "value", fin.u);
    out.actions = emb;
    out.embeddings = fin;
    return out;
  }

  template <class Store>
  static ad::Var<T> head(ad::Tape<T>& t, Store& s, const std::string& name, ad::Var<T> x) {
    ad::Var<T> h = ad::relu(
        ad::add_bias(ad::matmul(x, ad::param(t, s.get(name + ".W1"))), ad::param(t, s.get(name + ".b1"))));
    return ad::add_bias(ad::matmul(h, ad::param(t, s.get(name + ".W2"))), ad::param(t, s.get(name + ".b2")));
  }

  Arch arch_ = Arch::GnGn;
  FeatureLayout layout_;
  gnn::EncoderStack stack_;
  ad::ParamStore<T> params_;
};

struct PolicyValueOutput {
  std::vector<double> probs, log_probs;
  double value = 0;

  std::size_t size() const { return probs.size(); }
};

template <class T>
std::vector<PolicyValueOutput> split_outputs(const NetworkOutputs<T>& out, const GraphBatch& b) {
  std::vector<PolicyValueOutput> res(b.num_states());
  const T* lp = out.logp.data();
  const T* v = out.value.data();
  for (std::size_t k = 0; k < b.num_states(); ++k) {
    const std::size_t begin = b.action_offset[k];
    const std::size_t end = k + 1 < b.num_states() ? b.action_offset[k + 1] : b.num_actions;
    auto& r = res[k];
    r.value = static_cast<double>(v[k]);
    for (std::size_t a = begin; a < end; ++a) {
      r.log_probs.push_back(static_cast<double>(lp[a]));
      r.probs.push_back(std::exp(static_cast<double>(lp[a])));
    }
  }
  return res;
}

// Scores every observation in one batched forward pass without recording.
template <class T>
std::vector<PolicyValueOutput> evaluate(const PolicyNetwork<T>& net, const std::vector<Observation>& obs) {
  if (obs.empty()) return {};
  GraphBatch b = build_batch(obs, net.layout());
  ad::Tape<T> tape(false);
  auto out = net.forward(tape, b);
  return split_outputs(out, b);
}

inline double entropy(const PolicyValueOutput& o) {
  double h = 0;
  for (std::size_t i = 0; i < o.size(); ++i)
    if (o.probs[i] > 0) h -= o.probs[i] * o.log_probs[i];
  return h;
}

inline std::size_t sample_action(const PolicyValueOutput& o, std::mt19937_64& rng) {
  if (o.size() == 0) throw NoApplicableActions("cannot sample from an empty distribution");
  double total = 0;
  for (double p : o.probs) total += p;
  double r = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t i = 0; i < o.size(); ++i) {
    r -= o.probs[i];
    if (r < 0) return i;
  }
  for (std::size_t i = o.size(); i-- > 0;)
    if (o.probs[i] > 0) return i;
  return o.size() - 1;
}

inline std::size_t greedy_action(const PolicyValueOutput& o) {
  if (o.size() == 0) throw NoApplicableActions("cannot choose from an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < o.size(); ++i)
    if (o.probs[i] > o.probs[best]) best = i;
  return best;
}

}  // namespace genplan
