#pragma once

// Named parameter storage with gradient accumulators, Adam state, and a
// text checkpoint format that roundtrips values bit-exactly.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace topparse::neural {

template <class Real>
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
template <class Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

class NeuralError : public std::runtime_error {
 public:
  enum class Kind { DimensionMismatch, EmptySequence, GoldMasked, UnknownParameter, Checkpoint };
  NeuralError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const { return index != static_cast<std::size_t>(-1); }
  friend bool operator==(ParamId, ParamId) = default;
};

template <class Real>
struct Parameter {
  std::string name;
  Mat<Real> value;
  Mat<Real> grad;
  Mat<Real> m;
  Mat<Real> v;
  // Per-column freeze flags (embedding tables); empty means all trainable.
  std::vector<char> frozen_cols;

  std::size_t rows() const { return std::size_t(value.rows()); }
  std::size_t cols() const { return std::size_t(value.cols()); }
  std::size_t size() const { return std::size_t(value.size()); }
};

struct AdamConfig {
  double lr = 0.0004;
  double weight_decay = 0.00004;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class Real>
class ParamStore {
 public:
  using Scalar = Real;

  ParamId add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    Parameter<Real> p;
    p.name = name;
    p.value = Mat<Real>::Zero(rows, cols);
    p.grad = Mat<Real>::Zero(rows, cols);
    p.m = Mat<Real>::Zero(rows, cols);
    p.v = Mat<Real>::Zero(rows, cols);
    by_name_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return ParamId{params_.size() - 1};
  }

  // Uniform in +-sqrt(6 / (rows + cols)).
  template <class Rng>
  ParamId add_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
    ParamId id = add(name, rows, cols);
    double bound = std::sqrt(6.0 / double(rows + cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto& v = params_[id.index].value;
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, j) = Real(dist(rng));
    return id;
  }

  ParamId add_constant(const std::string& name, std::size_t rows, std::size_t cols, Real value) {
    ParamId id = add(name, rows, cols);
    params_[id.index].value.setConstant(value);
    return id;
  }

  Parameter<Real>& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter<Real>& operator[](ParamId id) const { return params_.at(id.index); }

  ParamId id(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end())
      throw NeuralError(NeuralError::Kind::UnknownParameter, "unknown parameter " + name);
    return ParamId{it->second};
  }

  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  std::vector<Parameter<Real>>& params() { return params_; }
  const std::vector<Parameter<Real>>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::int64_t timestep() const { return timestep_; }
  void set_timestep(std::int64_t t) { timestep_ = t; }

  // Same names, shapes and values in another scalar type; gradients and
  // optimizer state are reset.
  template <class Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& p : params_) {
      ParamId id = out.add(p.name, p.rows(), p.cols());
      out[id].value = p.value.template cast<Other>();
      out[id].frozen_cols = p.frozen_cols;
    }
    return out;
  }

 private:
  std::vector<Parameter<Real>> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::int64_t timestep_ = 0;
};

// Adam with decoupled weight decay. Frozen embedding columns are left
// untouched, including their moments.
template <class Real>
void adam_step(ParamStore<Real>& store, const AdamConfig& cfg) {
  store.set_timestep(store.timestep() + 1);
  const double t = double(store.timestep());
  const Real b1 = Real(cfg.beta1), b2 = Real(cfg.beta2);
  const Real c1 = Real(1.0 - std::pow(cfg.beta1, t));
  const Real c2 = Real(1.0 - std::pow(cfg.beta2, t));
  const Real lr = Real(cfg.lr), wd = Real(cfg.weight_decay), eps = Real(cfg.eps);
  for (auto& p : store.params()) {
    auto update_col = [&](Eigen::Index j) {
      auto g = p.grad.col(j);
      auto m = p.m.col(j);
      auto v = p.v.col(j);
      auto w = p.value.col(j);
      m = b1 * m + (Real(1) - b1) * g;
      v = b2 * v + (Real(1) - b2) * g.cwiseProduct(g);
      w.array() -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + eps) + wd * w.array());
    };
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
      if (!p.frozen_cols.empty() && p.frozen_cols[std::size_t(j)]) continue;
      update_col(j);
    }
  }
}

template <class Real>
std::string format_scalar(Real x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", double(x));
  return buf;
}

template <class Real>
Real parse_scalar(const std::string& s) {
  char* end = nullptr;
  double d = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw NeuralError(NeuralError::Kind::Checkpoint, "bad scalar '" + s + "'");
  return Real(d);
}

// Text listing: "params <n>", then per parameter "<name> <rows> <cols>"
// followed by one line of column-major hex floats.
template <class Real>
void write_params(std::ostream& out, const ParamStore<Real>& store) {
  out << "params " << store.size() << "\n";
  for (const auto& p : store.params()) {
    out << p.name << " " << p.rows() << " " << p.cols() << "\n";
    const Real* data = p.value.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i) out << ' ';
      out << format_scalar(data[i]);
    }
    out << "\n";
  }
}

// Reads values into an already-constructed store with matching names and
// shapes.
template <class Real>
void read_params(std::istream& in, ParamStore<Real>& store) {
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "params")
    throw NeuralError(NeuralError::Kind::Checkpoint, "expected 'params <n>'");
  if (n != store.size())
    throw NeuralError(NeuralError::Kind::Checkpoint,
                      "checkpoint has " + std::to_string(n) + " parameters, model expects " +
                          std::to_string(store.size()));
  for (std::size_t k = 0; k < n; ++k) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols))
      throw NeuralError(NeuralError::Kind::Checkpoint, "truncated parameter header");
    if (!store.contains(name))
      throw NeuralError(NeuralError::Kind::Checkpoint, "unexpected parameter " + name);
    auto& p = store[store.id(name)];
    if (p.rows() != rows || p.cols() != cols)
      throw NeuralError(NeuralError::Kind::Checkpoint, "shape mismatch for " + name);
    Real* data = p.value.data();
    std::string tok;
    for (std::size_t i = 0; i < rows * cols; ++i) {
      if (!(in >> tok)) throw NeuralError(NeuralError::Kind::Checkpoint, "truncated values for " + name);
      data[i] = parse_scalar<Real>(tok);
    }
  }
}

}  // namespace topparse::neural
