#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "genplan/autodiff/tape.hpp"
#include "genplan/errors.hpp"

namespace genplan::ad {

template <class T>
struct Parameter {
  std::string name;
  std::size_t rows = 0, cols = 0;
  std::vector<T> value, grad, m, v;

  std::size_t size() const { return rows * cols; }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters in insertion order, with Adam moments.
template <class T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& o) { *this = o; }
  ParamStore& operator=(const ParamStore& o) {
    if (this == &o) return *this;
    params_.clear();
    by_name_.clear();
    for (const auto& p : o.params_) {
      params_.push_back(std::make_unique<Parameter<T>>(*p));
      by_name_[p->name] = params_.size() - 1;
    }
    step_ = o.step_;
    return *this;
  }

  // Weights are uniform in +-1/sqrt(fan_in) where fan_in is the row count.
  Parameter<T>& add_weight(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    Parameter<T>& p = add_zero(name, rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(rows, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : p.value) x = static_cast<T>(dist(rng));
    return p;
  }

  Parameter<T>& add_zero(const std::string& name, std::size_t rows, std::size_t cols) {
    if (by_name_.count(name)) throw ShapeMismatch("duplicate parameter '" + name + "'");
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->rows = rows;
    p->cols = cols;
    p->value.assign(rows * cols, T(0));
    p->grad.assign(rows * cols, T(0));
    p->m.assign(rows * cols, T(0));
    p->v.assign(rows * cols, T(0));
    params_.push_back(std::move(p));
    by_name_[name] = params_.size() - 1;
    return *params_.back();
  }

  Parameter<T>& get(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw IndexError("no parameter '" + name + "'");
    return *params_[it->second];
  }
  const Parameter<T>& get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw IndexError("no parameter '" + name + "'");
    return *params_[it->second];
  }
  bool contains(const std::string& name) const { return by_name_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  std::uint64_t step_count() const { return step_; }

  void zero_grad() {
    for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  double grad_norm() const {
    double s = 0;
    for (const auto& p : params_)
      for (T g : p->grad) s += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(s);
  }

  bool grads_finite() const {
    for (const auto& p : params_)
      for (T g : p->grad)
        if (!std::isfinite(static_cast<double>(g))) return false;
    return true;
  }

  // Rescales all gradients so their global norm is at most max_norm.
  double clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0) {
      const T f = static_cast<T>(max_norm / norm);
      for (auto& p : params_)
        for (T& g : p->grad) g *= f;
    }
    return norm;
  }

  void scale_grads(T f) {
    for (auto& p : params_)
      for (T& g : p->grad) g *= f;
  }

  // Bias-corrected Adam update; clears gradients afterwards.
  void adam_step(const AdamConfig& c) {
    ++step_;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_));
    for (auto& p : params_) {
      for (std::size_t i = 0; i < p->size(); ++i) {
        const double g = static_cast<double>(p->grad[i]);
        const double m = c.beta1 * static_cast<double>(p->m[i]) + (1.0 - c.beta1) * g;
        const double v = c.beta2 * static_cast<double>(p->v[i]) + (1.0 - c.beta2) * g * g;
        p->m[i] = static_cast<T>(m);
        p->v[i] = static_cast<T>(v);
        const double update = c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
        p->value[i] = static_cast<T>(static_cast<double>(p->value[i]) - update);
      }
    }
    zero_grad();
  }

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) {
      auto& q = out.add_zero(p->name, p->rows, p->cols);
      for (std::size_t i = 0; i < p->size(); ++i) q.value[i] = static_cast<U>(p->value[i]);
    }
    return out;
  }

  bool same_values(const ParamStore& o) const {
    if (o.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (params_[i]->name != o[i].name || params_[i]->value != o[i].value) return false;
    return true;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t> by_name_;
  std::uint64_t step_ = 0;
};

// Leaf bound to a parameter; gradients accumulate into p.grad.
template <class T>
Var<T> param(Tape<T>& tape, Parameter<T>& p) {
  return tape.external(p.rows, p.cols, p.value.data(), tape.recording() ? p.grad.data() : nullptr);
}

template <class T>
Var<T> param(Tape<T>& tape, const Parameter<T>& p) {
  return tape.external(p.rows, p.cols, p.value.data(), nullptr);
}

// Rows [begin, end) of a parameter without copying.
template <class T>
Var<T> param_rows(Tape<T>& tape, Parameter<T>& p, std::size_t begin, std::size_t end) {
  if (begin > end || end > p.rows) throw IndexError("param_rows: bad range for " + p.name);
  return tape.external(end - begin, p.cols, p.value.data() + begin * p.cols,
                       tape.recording() ? p.grad.data() + begin * p.cols : nullptr);
}

template <class T>
Var<T> param_rows(Tape<T>& tape, const Parameter<T>& p, std::size_t begin, std::size_t end) {
  if (begin > end || end > p.rows) throw IndexError("param_rows: bad range for " + p.name);
  return tape.external(end - begin, p.cols, p.value.data() + begin * p.cols, nullptr);
}

// Checkpoint container:
//   magic "GPLNCKPT", u32 version,
//   u32 metadata count, then (string key, string value) pairs,
//   u32 tensor count, then per tensor (string name, u64 rows, u64 cols, u64 offset),
//   then all values as little-endian float32, tensors back to back.
// Strings are u32 length + bytes. All integers are little-endian.
using Metadata = std::map<std::string, std::string>;

inline constexpr char kCheckpointMagic[8] = {'G', 'P', 'L', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}
  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t x = 0;
    for (int i = 0; i < bytes; ++i)
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return x;
  }
  std::string str() {
    std::size_t n = uint(4);
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  float f32() {
    auto bits = static_cast<std::uint32_t>(uint(4));
    return std::bit_cast<float>(bits);
  }
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw LayoutMismatch("checkpoint is truncated");
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <class T>
std::string serialize(const ParamStore<T>& store, const Metadata& meta) {
  std::string out(kCheckpointMagic, kCheckpointMagic + 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    detail::put_str(out, k);
    detail::put_str(out, v);
  }
  detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    detail::put_str(out, store[i].name);
    detail::put_u64(out, store[i].rows);
    detail::put_u64(out, store[i].cols);
    detail::put_u64(out, offset);
    offset += store[i].size();
  }
  for (std::size_t i = 0; i < store.size(); ++i)
    for (T x : store[i].value) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  return out;
}

struct Checkpoint {
  Metadata meta;
  ParamStore<float> params;
};

inline Checkpoint deserialize(const std::string& buf) {
  if (buf.size() < 12 || std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
    throw LayoutMismatch("not a checkpoint file (bad magic)");
  detail::Reader r(buf);
  r.uint(4);
  r.uint(4);
  if (auto version = r.uint(4); version != kCheckpointVersion)
    throw LayoutMismatch("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto nmeta = r.uint(4);
  for (std::uint64_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }
  struct Entry {
    std::string name;
    std::uint64_t rows, cols, offset;
  };
  std::vector<Entry> entries;
  const auto count = r.uint(4);
  std::uint64_t expected = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.str();
    e.rows = r.uint(8);
    e.cols = r.uint(8);
    e.offset = r.uint(8);
    if (e.offset != expected) throw LayoutMismatch("checkpoint manifest offsets are inconsistent");
    expected += e.rows * e.cols;
    entries.push_back(std::move(e));
  }
  r.need(expected * 4);
  for (const auto& e : entries) {
    auto& p = ck.params.add_zero(e.name, e.rows, e.cols);
    for (auto& x : p.value) x = r.f32();
  }
  if (r.pos() != buf.size()) throw LayoutMismatch("trailing bytes after checkpoint payload");
  return ck;
}

template <class T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store, const Metadata& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write checkpoint '" + path + "'");
  const std::string buf = serialize(store, meta);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw Error("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read checkpoint '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(buf);
}

}  // namespace genplan::ad
