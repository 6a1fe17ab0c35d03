#pragma once

// Tape-based reverse-mode differentiation over dense vectors. Nodes are
// appended in evaluation order; backward() walks the tape in reverse and
// accumulates parameter gradients directly into the ParamStore.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "topparse/neural/params.hpp"

namespace topparse::neural {

struct Expr {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

// exp(logits) normalized over the entries where mask is set; masked
// entries get probability exactly 0.
template <class Real>
Vec<Real> masked_softmax(const Vec<Real>& logits, const std::vector<char>& mask) {
  Real best = -std::numeric_limits<Real>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[std::size_t(i)] && logits(i) > best) best = logits(i);
  Vec<Real> p = Vec<Real>::Zero(logits.size());
  Real z = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[std::size_t(i)]) {
      p(i) = std::exp(logits(i) - best);
      z += p(i);
    }
  return p / z;
}

// Log-probabilities over the masked support; -inf elsewhere.
template <class Real>
Vec<Real> masked_log_softmax(const Vec<Real>& logits, const std::vector<char>& mask) {
  Real best = -std::numeric_limits<Real>::infinity();
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[std::size_t(i)] && logits(i) > best) best = logits(i);
  Real z = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (mask[std::size_t(i)]) z += std::exp(logits(i) - best);
  Real log_z = best + std::log(z);
  Vec<Real> out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    out(i) = mask[std::size_t(i)] ? logits(i) - log_z : -std::numeric_limits<Real>::infinity();
  return out;
}

template <class Real>
struct NllResult {
  Real loss;
  Vec<Real> grad;  // d loss / d logits
};

// -log p(gold) under the masked softmax, with its gradient.
template <class Real>
NllResult<Real> softmax_nll(const Vec<Real>& logits, std::size_t gold, const std::vector<char>& mask) {
  if (std::size_t(logits.size()) != mask.size())
    throw NeuralError(NeuralError::Kind::DimensionMismatch, "mask size differs from logits");
  if (gold >= mask.size() || !mask[gold])
    throw NeuralError(NeuralError::Kind::GoldMasked, "gold action is masked out");
  Vec<Real> logp = masked_log_softmax(logits, mask);
  NllResult<Real> r;
  r.loss = -logp(Eigen::Index(gold));
  r.grad = masked_softmax(logits, mask);
  r.grad(Eigen::Index(gold)) -= Real(1);
  return r;
}

template <class Real>
class Graph {
 public:
  using V = Vec<Real>;

  explicit Graph(ParamStore<Real>& store, bool training = false, std::mt19937_64* rng = nullptr)
      : store_(&store), training_(training), rng_(rng) {}

  // Forward-only graph over a shared store; backward() is rejected.
  explicit Graph(const ParamStore<Real>& store)
      : store_(const_cast<ParamStore<Real>*>(&store)), training_(false), rng_(nullptr), read_only_(true) {}

  // Backward closures capture `this`.
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return training_; }
  ParamStore<Real>& store() { return *store_; }
  std::size_t size() const { return nodes_.size(); }

  const V& value(Expr e) const { return nodes_[e.id].value; }
  Real scalar(Expr e) const { return nodes_[e.id].value(0); }
  std::size_t dim(Expr e) const { return std::size_t(nodes_[e.id].value.size()); }
  const V& grad(Expr e) const { return nodes_[e.id].grad; }

  Expr constant(V v) { return push(std::move(v), {}); }
  Expr zeros(std::size_t n) { return constant(V::Zero(Eigen::Index(n))); }

  // A column-vector parameter used directly as a value.
  Expr param(ParamId p) {
    const auto& par = (*store_)[p];
    if (par.cols() != 1)
      throw NeuralError(NeuralError::Kind::DimensionMismatch, par.name + " is not a vector");
    return push(par.value.col(0), [this, p](std::size_t self) {
      (*store_)[p].grad.col(0) += nodes_[self].grad;
    });
  }

  // Column `col` of a (dim x vocab) embedding table.
  Expr lookup(ParamId table, std::size_t col) {
    const auto& par = (*store_)[table];
    if (col >= par.cols())
      throw NeuralError(NeuralError::Kind::DimensionMismatch,
                        par.name + ": index " + std::to_string(col) + " out of range");
    return push(par.value.col(Eigen::Index(col)), [this, table, col](std::size_t self) {
      (*store_)[table].grad.col(Eigen::Index(col)) += nodes_[self].grad;
    });
  }

  // bias + sum_k W_k x_k
  Expr affine(ParamId bias, const std::vector<std::pair<ParamId, Expr>>& terms) {
    const auto& b = (*store_)[bias];
    V out = b.value.col(0);
    for (const auto& [w, x] : terms) {
      const auto& W = (*store_)[w];
      if (W.cols() != dim(x) || W.rows() != std::size_t(out.size()))
        throw NeuralError(NeuralError::Kind::DimensionMismatch,
                          W.name + " is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                              ", input has " + std::to_string(dim(x)) + ", output " +
                              std::to_string(out.size()));
      out.noalias() += W.value * value(x);
    }
    return push(std::move(out), [this, bias, terms](std::size_t self) {
      const V& g = nodes_[self].grad;
      (*store_)[bias].grad.col(0) += g;
      for (const auto& [w, x] : terms) {
        auto& W = (*store_)[w];
        W.grad.noalias() += g * value(x).transpose();
        nodes_[x.id].grad.noalias() += W.value.transpose() * g;
      }
    });
  }

  Expr linear(ParamId w, Expr x) {
    const auto& W = (*store_)[w];
    if (W.cols() != dim(x))
      throw NeuralError(NeuralError::Kind::DimensionMismatch, W.name + ": input width mismatch");
    return push(W.value * value(x), [this, w, x](std::size_t self) {
      const V& g = nodes_[self].grad;
      auto& W = (*store_)[w];
      W.grad.noalias() += g * value(x).transpose();
      nodes_[x.id].grad.noalias() += W.value.transpose() * g;
    });
  }

  Expr add(Expr a, Expr b) {
    check_same(a, b);
    return push(value(a) + value(b), [this, a, b](std::size_t self) {
      nodes_[a.id].grad += nodes_[self].grad;
      nodes_[b.id].grad += nodes_[self].grad;
    });
  }

  Expr cmul(Expr a, Expr b) {
    check_same(a, b);
    return push(value(a).cwiseProduct(value(b)), [this, a, b](std::size_t self) {
      const V& g = nodes_[self].grad;
      nodes_[a.id].grad += g.cwiseProduct(value(b));
      nodes_[b.id].grad += g.cwiseProduct(value(a));
    });
  }

  Expr tanh(Expr a) {
    V y = value(a).array().tanh();
    return push(std::move(y), [this, a](std::size_t self) {
      const V& y = nodes_[self].value;
      nodes_[a.id].grad.array() += nodes_[self].grad.array() * (Real(1) - y.array().square());
    });
  }

  Expr sigmoid(Expr a) {
    V y = (Real(1) + (-value(a).array()).exp()).inverse();
    return push(std::move(y), [this, a](std::size_t self) {
      const V& y = nodes_[self].value;
      nodes_[a.id].grad.array() += nodes_[self].grad.array() * y.array() * (Real(1) - y.array());
    });
  }

  Expr relu(Expr a) {
    V y = value(a).cwiseMax(Real(0));
    return push(std::move(y), [this, a](std::size_t self) {
      const V& x = nodes_[a.id].value;
      nodes_[a.id].grad.array() += (x.array() > Real(0)).select(nodes_[self].grad.array(), Real(0));
    });
  }

  Expr concat(const std::vector<Expr>& parts) {
    std::size_t n = 0;
    for (Expr e : parts) n += dim(e);
    V out(static_cast<Eigen::Index>(n));
    std::size_t at = 0;
    for (Expr e : parts) {
      out.segment(Eigen::Index(at), Eigen::Index(dim(e))) = value(e);
      at += dim(e);
    }
    return push(std::move(out), [this, parts](std::size_t self) {
      std::size_t at = 0;
      for (Expr e : parts) {
        nodes_[e.id].grad += nodes_[self].grad.segment(Eigen::Index(at), Eigen::Index(dim(e)));
        at += dim(e);
      }
    });
  }

  Expr slice(Expr a, std::size_t start, std::size_t len) {
    if (start + len > dim(a))
      throw NeuralError(NeuralError::Kind::DimensionMismatch, "slice out of range");
    return push(value(a).segment(Eigen::Index(start), Eigen::Index(len)),
                [this, a, start, len](std::size_t self) {
                  nodes_[a.id].grad.segment(Eigen::Index(start), Eigen::Index(len)) +=
                      nodes_[self].grad;
                });
  }

  // Inverted dropout; identity outside training or when rate is 0.
  Expr dropout(Expr a, double rate) {
    if (!training_ || rate <= 0.0 || rng_ == nullptr) return a;
    std::bernoulli_distribution keep(1.0 - rate);
    Real scale = Real(1.0 / (1.0 - rate));
    V mask(Eigen::Index(dim(a)));
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = keep(*rng_) ? scale : Real(0);
    Expr m = constant(std::move(mask));
    return cmul(a, m);
  }

  // w . a for a constant weight vector; produces a scalar.
  Expr dot(Expr a, const V& w) {
    if (std::size_t(w.size()) != dim(a))
      throw NeuralError(NeuralError::Kind::DimensionMismatch, "dot: width mismatch");
    V out(1);
    out(0) = value(a).dot(w);
    return push(std::move(out), [this, a, w](std::size_t self) {
      nodes_[a.id].grad += nodes_[self].grad(0) * w;
    });
  }

  Expr sum(const std::vector<Expr>& xs) {
    if (xs.empty()) return zeros(1);
    V out = value(xs[0]);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      check_same(xs[0], xs[i]);
      out += value(xs[i]);
    }
    return push(std::move(out), [this, xs](std::size_t self) {
      for (Expr e : xs) nodes_[e.id].grad += nodes_[self].grad;
    });
  }

  // Masked softmax negative log-likelihood of `gold`; scalar.
  Expr masked_nll(Expr logits, std::size_t gold, const std::vector<char>& mask) {
    auto r = softmax_nll<Real>(value(logits), gold, mask);
    V out(1);
    out(0) = r.loss;
    return push(std::move(out), [this, logits, g = std::move(r.grad)](std::size_t self) {
      nodes_[logits.id].grad += nodes_[self].grad(0) * g;
    });
  }

  // Reverse sweep from a scalar node.
  void backward(Expr loss) {
    if (read_only_) throw std::logic_error("backward on a read-only graph");
    for (std::size_t i = 0; i <= loss.id; ++i) nodes_[i].grad = V::Zero(nodes_[i].value.size());
    nodes_[loss.id].grad(0) = Real(1);
    for (std::size_t i = loss.id + 1; i-- > 0;)
      if (nodes_[i].back) nodes_[i].back(i);
  }

 private:
  struct NodeData {
    V value;
    V grad;
    std::function<void(std::size_t)> back;
  };

  Expr push(V value, std::function<void(std::size_t)> back) {
    nodes_.push_back({std::move(value), V(), std::move(back)});
    return Expr{nodes_.size() - 1};
  }

  void check_same(Expr a, Expr b) const {
    if (dim(a) != dim(b))
      throw NeuralError(NeuralError::Kind::DimensionMismatch,
                        "width " + std::to_string(dim(a)) + " vs " + std::to_string(dim(b)));
  }

  ParamStore<Real>* store_;
  bool training_;
  std::mt19937_64* rng_;
  bool read_only_ = false;
  std::vector<NodeData> nodes_;
};

}  // namespace topparse::neural
