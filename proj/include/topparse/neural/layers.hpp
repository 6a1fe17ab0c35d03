#pragma once

// Multi-layer LSTM, bidirectional summary encoder, and a feed-forward
// helper, all expressed on top of Graph.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "topparse/neural/graph.hpp"

namespace topparse::neural {

struct LstmLayerParams {
  ParamId wx;  // 4H x in
  ParamId wh;  // 4H x H
  ParamId b;   // 4H, gate order: input, forget, output, candidate
};

struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<LstmLayerParams> layers;
};

template <class Real, class Rng>
LstmParams add_lstm(ParamStore<Real>& store, const std::string& name, std::size_t layers,
                    std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    std::string prefix = name + ".l" + std::to_string(l);
    std::size_t in = l == 0 ? input_dim : hidden_dim;
    LstmLayerParams lp;
    lp.wx = store.add_glorot(prefix + ".wx", 4 * hidden_dim, in, rng);
    lp.wh = store.add_glorot(prefix + ".wh", 4 * hidden_dim, hidden_dim, rng);
    lp.b = store.add(prefix + ".b", 4 * hidden_dim, 1);
    store[lp.b].value.block(Eigen::Index(hidden_dim), 0, Eigen::Index(hidden_dim), 1).setConstant(Real(1));
    p.layers.push_back(lp);
  }
  return p;
}

struct LstmState {
  std::vector<Expr> h;
  std::vector<Expr> c;

  Expr top() const { return h.back(); }
};

template <class Real>
LstmState lstm_initial(Graph<Real>& g, const LstmParams& p) {
  LstmState s;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    s.h.push_back(g.zeros(p.hidden_dim));
    s.c.push_back(g.zeros(p.hidden_dim));
  }
  return s;
}

// One time step through every layer. Dropout is applied to the inputs of
// layers above the first.
template <class Real>
LstmState lstm_step(Graph<Real>& g, const LstmParams& p, const LstmState& prev, Expr x,
                    double dropout = 0.0) {
  if (g.dim(x) != p.input_dim)
    throw NeuralError(NeuralError::Kind::DimensionMismatch,
                      "lstm input width " + std::to_string(g.dim(x)) + ", expected " +
                          std::to_string(p.input_dim));
  const std::size_t H = p.hidden_dim;
  LstmState next;
  Expr input = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (l > 0) input = g.dropout(input, dropout);
    const auto& lp = p.layers[l];
    Expr z = g.affine(lp.b, {{lp.wx, input}, {lp.wh, prev.h[l]}});
    Expr i = g.sigmoid(g.slice(z, 0, H));
    Expr f = g.sigmoid(g.slice(z, H, H));
    Expr o = g.sigmoid(g.slice(z, 2 * H, H));
    Expr u = g.tanh(g.slice(z, 3 * H, H));
    Expr c = g.add(g.cmul(f, prev.c[l]), g.cmul(i, u));
    Expr h = g.cmul(o, g.tanh(c));
    next.h.push_back(h);
    next.c.push_back(c);
    input = h;
  }
  return next;
}

// Top-layer hidden state for every input position.
template <class Real>
std::vector<Expr> lstm_sequence(Graph<Real>& g, const LstmParams& p, const std::vector<Expr>& inputs,
                                double dropout = 0.0) {
  std::vector<Expr> out;
  LstmState s = lstm_initial(g, p);
  for (Expr x : inputs) {
    s = lstm_step(g, p, s, x, dropout);
    out.push_back(s.top());
  }
  return out;
}

struct BiLstmParams {
  LstmParams forward;
  LstmParams backward;
  ParamId proj_w;  // out x 2H
  ParamId proj_b;
};

template <class Real, class Rng>
BiLstmParams add_bilstm(ParamStore<Real>& store, const std::string& name, std::size_t layers,
                        std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                        Rng& rng) {
  BiLstmParams p;
  p.forward = add_lstm(store, name + ".fwd", layers, input_dim, hidden_dim, rng);
  p.backward = add_lstm(store, name + ".bwd", layers, input_dim, hidden_dim, rng);
  p.proj_w = store.add_glorot(name + ".proj_w", output_dim, 2 * hidden_dim, rng);
  p.proj_b = store.add(name + ".proj_b", output_dim, 1);
  return p;
}

// [final forward hidden ; final backward hidden], before projection.
template <class Real>
Expr bilstm_final_states(Graph<Real>& g, const BiLstmParams& p, const std::vector<Expr>& inputs,
                         double dropout = 0.0) {
  if (inputs.empty()) throw NeuralError(NeuralError::Kind::EmptySequence, "bilstm over empty sequence");
  std::vector<Expr> reversed(inputs.rbegin(), inputs.rend());
  Expr fwd = lstm_sequence(g, p.forward, inputs, dropout).back();
  Expr bwd = lstm_sequence(g, p.backward, reversed, dropout).back();
  return g.concat({fwd, bwd});
}

// Summary vector: the final states of both directions, linearly projected.
template <class Real>
Expr bilstm_encode(Graph<Real>& g, const BiLstmParams& p, const std::vector<Expr>& inputs,
                   double dropout = 0.0) {
  return g.affine(p.proj_b, {{p.proj_w, bilstm_final_states(g, p, inputs, dropout)}});
}

struct DenseParams {
  ParamId w;
  ParamId b;
};

template <class Real, class Rng>
DenseParams add_dense(ParamStore<Real>& store, const std::string& name, std::size_t out,
                      std::size_t in, Rng& rng) {
  return {store.add_glorot(name + ".w", out, in, rng), store.add(name + ".b", out, 1)};
}

template <class Real>
Expr dense(Graph<Real>& g, const DenseParams& p, Expr x) {
  return g.affine(p.b, {{p.w, x}});
}

}  // namespace topparse::neural
