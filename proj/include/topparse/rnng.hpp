#pragma once

// Discriminative RNNG: stack / buffer / action-history encoders over the
// transition system, bidirectional-LSTM composition of reduced subtrees,
// teacher-forced training, greedy and beam decoding.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "topparse/dataset.hpp"
#include "topparse/neural/graph.hpp"
#include "topparse/neural/layers.hpp"
#include "topparse/neural/params.hpp"
#include "topparse/preprocess.hpp"
#include "topparse/transitions.hpp"
#include "topparse/treebank.hpp"
#include "topparse/vocab.hpp"

namespace topparse::rnng {

using neural::Expr;
using neural::Graph;
using neural::LstmState;
using neural::ParamId;
using neural::ParamStore;

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { AllEncodersDisabled, InvalidValue, UnknownKey };
  ConfigError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class Encoder { Stack, Buffer, Actions };

struct RnngConfig {
  std::size_t word_dim = 100;
  std::size_t label_dim = 32;
  std::size_t action_dim = 32;
  std::size_t lstm_units = 164;
  std::size_t lstm_layers = 2;
  double dropout = 0.34;
  double lr = 0.0004;
  double weight_decay = 0.00004;
  std::size_t epochs = 1;
  bool use_stack = true;
  bool use_buffer = true;
  bool use_actions = true;
  std::size_t beam_size = 1;
  std::uint64_t seed = 1;
  std::size_t max_open = kDefaultMaxOpen;
  bool freeze_pretrained = true;

  std::size_t encoder_count() const { return std::size_t(use_stack) + use_buffer + use_actions; }

  void check() const {
    if (encoder_count() == 0)
      throw ConfigError(ConfigError::Kind::AllEncodersDisabled, "at least one encoder must stay enabled");
    if (!word_dim || !label_dim || !action_dim || !lstm_units || !lstm_layers)
      throw ConfigError(ConfigError::Kind::InvalidValue, "dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError(ConfigError::Kind::InvalidValue, "dropout must be in [0, 1)");
    if (!beam_size) throw ConfigError(ConfigError::Kind::InvalidValue, "beam_size must be >= 1");
    if (!max_open) throw ConfigError(ConfigError::Kind::InvalidValue, "max_open must be >= 1");
  }

  friend bool operator==(const RnngConfig&, const RnngConfig&) = default;
};

inline RnngConfig ablate(RnngConfig cfg, Encoder which) {
  switch (which) {
    case Encoder::Stack: cfg.use_stack = false; break;
    case Encoder::Buffer: cfg.use_buffer = false; break;
    case Encoder::Actions: cfg.use_actions = false; break;
  }
  if (cfg.encoder_count() == 0)
    throw ConfigError(ConfigError::Kind::AllEncodersDisabled, "at least one encoder must stay enabled");
  return cfg;
}

inline Encoder parse_encoder(const std::string& s) {
  if (s == "stack") return Encoder::Stack;
  if (s == "buffer") return Encoder::Buffer;
  if (s == "actions") return Encoder::Actions;
  throw ConfigError(ConfigError::Kind::InvalidValue, "unknown encoder '" + s + "'");
}

// Ordered key=value view used by checkpoints and run configs.
inline std::vector<std::pair<std::string, std::string>> config_items(const RnngConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto d = [](double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
  };
  return {
      {"word_dim", std::to_string(c.word_dim)},
      {"label_dim", std::to_string(c.label_dim)},
      {"action_dim", std::to_string(c.action_dim)},
      {"lstm_units", std::to_string(c.lstm_units)},
      {"lstm_layers", std::to_string(c.lstm_layers)},
      {"dropout", d(c.dropout)},
      {"lr", d(c.lr)},
      {"weight_decay", d(c.weight_decay)},
      {"epochs", std::to_string(c.epochs)},
      {"use_stack", b(c.use_stack)},
      {"use_buffer", b(c.use_buffer)},
      {"use_actions", b(c.use_actions)},
      {"beam_size", std::to_string(c.beam_size)},
      {"seed", std::to_string(c.seed)},
      {"max_open", std::to_string(c.max_open)},
      {"freeze_pretrained", b(c.freeze_pretrained)},
  };
}

// Returns false when `key` is not a model setting.
inline bool set_config_value(RnngConfig& c, const std::string& key, const std::string& value) {
  auto u = [&](std::size_t& field) {
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(value, &pos);
      if (pos != value.size() || value[0] == '-') throw std::invalid_argument(value);
      field = std::size_t(v);
    } catch (const std::exception&) {
      throw ConfigError(ConfigError::Kind::InvalidValue, key + ": expected an unsigned integer, got '" + value + "'");
    }
  };
  auto f = [&](double& field) {
    try {
      std::size_t pos = 0;
      field = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError(ConfigError::Kind::InvalidValue, key + ": expected a number, got '" + value + "'");
    }
  };
  auto b = [&](bool& field) {
    if (value == "true" || value == "1") field = true;
    else if (value == "false" || value == "0") field = false;
    else throw ConfigError(ConfigError::Kind::InvalidValue, key + ": expected true/false, got '" + value + "'");
  };
  if (key == "word_dim") u(c.word_dim);
  else if (key == "label_dim") u(c.label_dim);
  else if (key == "action_dim") u(c.action_dim);
  else if (key == "lstm_units") u(c.lstm_units);
  else if (key == "lstm_layers") u(c.lstm_layers);
  else if (key == "dropout") f(c.dropout);
  else if (key == "lr") f(c.lr);
  else if (key == "weight_decay") f(c.weight_decay);
  else if (key == "epochs") u(c.epochs);
  else if (key == "use_stack") b(c.use_stack);
  else if (key == "use_buffer") b(c.use_buffer);
  else if (key == "use_actions") b(c.use_actions);
  else if (key == "beam_size") u(c.beam_size);
  else if (key == "seed") {
    std::size_t s = 0;
    u(s);
    c.seed = s;
  } else if (key == "max_open") u(c.max_open);
  else if (key == "freeze_pretrained") b(c.freeze_pretrained);
  else return false;
  return true;
}

// Independent random streams derived from one seed.
inline std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream)};
  return std::mt19937_64(seq);
}

enum : std::uint64_t { kInitStream = 1, kDropoutStream = 2, kShuffleStream = 3 };

// All learned parameters plus the vocabularies that index them.
//
// Action inventory order: SHIFT, REDUCE, then NT(label) in label order
// (intents first, then slots, each sorted as given).
template <class Real>
class Model {
 public:
  struct Handles {
    ParamId word_emb, label_emb, action_emb;
    neural::DenseParams token_proj, label_proj;
    ParamId stack_guard, buffer_guard, action_guard;
    neural::LstmParams stack_lstm, buffer_lstm, action_lstm;
    neural::BiLstmParams compose;
    neural::DenseParams summary, scorer;
  };

  Model(RnngConfig cfg, Vocab tokens, std::vector<Label> labels,
        const EmbeddingTable* pretrained = nullptr)
      : config_(std::move(cfg)), labels_(std::move(labels)) {
    config_.check();
    for (const auto& r : reserved_symbols()) tokens.add(r);
    normalizer_ = TokenNormalizer(std::move(tokens));
    actions_.push_back(Action::shift());
    actions_.push_back(Action::reduce());
    for (const auto& l : labels_) {
      label_index_.emplace(l.str(), label_index_.size());
      actions_.push_back(Action::nt(l));
    }
    build();
    if (pretrained) load_pretrained(*pretrained);
  }

  Model(const RnngConfig& cfg, const Vocabularies& v, const EmbeddingTable* pretrained = nullptr)
      : Model(cfg, v.tokens, labels_from(v), pretrained) {}

  static std::vector<Label> labels_from(const Vocabularies& v) {
    std::vector<Label> out;
    for (const auto& n : v.intents.words()) out.push_back(Label::intent(n));
    for (const auto& n : v.slots.words()) out.push_back(Label::slot(n));
    return out;
  }

  const RnngConfig& config() const { return config_; }
  const Vocab& tokens() const { return normalizer_.vocab(); }
  const TokenNormalizer& normalizer() const { return normalizer_; }
  const std::vector<Label>& labels() const { return labels_; }
  const std::vector<Action>& actions() const { return actions_; }
  ParamStore<Real>& params() { return params_; }
  const ParamStore<Real>& params() const { return params_; }
  const Handles& h() const { return h_; }

  std::size_t label_index(const Label& l) const {
    auto it = label_index_.find(l.str());
    if (it == label_index_.end())
      throw TransitionError(TransitionError::Kind::BadAction, "unknown label " + l.str());
    return it->second;
  }

  std::size_t action_index(const Action& a) const {
    switch (a.kind) {
      case Action::Kind::Shift: return 0;
      case Action::Kind::Reduce: return 1;
      case Action::Kind::NT: return 2 + label_index(a.label);
    }
    return 0;
  }

  std::vector<char> mask(const ActionMask& m) const {
    std::vector<char> out(actions_.size(), 0);
    for (std::size_t i = 0; i < actions_.size(); ++i) out[i] = m.allows(actions_[i]);
    return out;
  }

  std::size_t token_id(const std::string& normalized) const { return tokens().at(normalized); }

  // Same architecture and values in another scalar type.
  template <class Other>
  Model<Other> cast() const {
    Model<Other> out(config_, tokens(), labels_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.params().params()[i].value = params_.params()[i].value.template cast<Other>();
      out.params().params()[i].frozen_cols = params_.params()[i].frozen_cols;
    }
    return out;
  }

 private:
  void build() {
    auto rng = derive_rng(config_.seed, kInitStream);
    const auto& c = config_;
    auto& p = params_;
    const std::size_t H = c.lstm_units;
    h_.word_emb = p.add_glorot("word_emb", c.word_dim, tokens().size(), rng);
    h_.token_proj = neural::add_dense(p, "token_proj", c.word_dim, c.word_dim, rng);
    h_.label_emb = p.add_glorot("label_emb", c.label_dim, std::max<std::size_t>(1, labels_.size()), rng);
    h_.label_proj = neural::add_dense(p, "label_proj", c.word_dim, c.label_dim, rng);
    if (c.use_stack) {
      h_.stack_guard = p.add_glorot("stack_guard", c.word_dim, 1, rng);
      h_.stack_lstm = neural::add_lstm(p, "stack_lstm", c.lstm_layers, c.word_dim, H, rng);
      h_.compose = neural::add_bilstm(p, "compose", c.lstm_layers, c.word_dim, H, c.word_dim, rng);
    }
    if (c.use_buffer) {
      h_.buffer_guard = p.add_glorot("buffer_guard", c.word_dim, 1, rng);
      h_.buffer_lstm = neural::add_lstm(p, "buffer_lstm", c.lstm_layers, c.word_dim, H, rng);
    }
    if (c.use_actions) {
      h_.action_emb = p.add_glorot("action_emb", c.action_dim, actions_.size(), rng);
      h_.action_guard = p.add_glorot("action_guard", c.action_dim, 1, rng);
      h_.action_lstm = neural::add_lstm(p, "action_lstm", c.lstm_layers, c.action_dim, H, rng);
    }
    h_.summary = neural::add_dense(p, "summary", H, c.encoder_count() * H, rng);
    h_.scorer = neural::add_dense(p, "scorer", actions_.size(), H, rng);
  }

  void load_pretrained(const EmbeddingTable& table) {
    if (table.dim != config_.word_dim)
      throw EmbeddingError(EmbeddingError::Kind::DimensionMismatch,
                           "pretrained dimension " + std::to_string(table.dim) +
                               " differs from word_dim " + std::to_string(config_.word_dim));
    auto& emb = params_[h_.word_emb];
    emb.frozen_cols.assign(emb.cols(), 0);
    for (std::size_t i = 0; i < tokens().size(); ++i) {
      const auto& w = tokens().word(i);
      if (!table.is_pretrained(w)) continue;
      const auto& v = table.vectors.at(w);
      for (std::size_t k = 0; k < v.size(); ++k) emb.value(Eigen::Index(k), Eigen::Index(i)) = Real(v[k]);
      if (config_.freeze_pretrained) emb.frozen_cols[i] = 1;
    }
  }

  RnngConfig config_;
  TokenNormalizer normalizer_;
  std::vector<Label> labels_;
  std::unordered_map<std::string, std::size_t> label_index_;
  std::vector<Action> actions_;
  ParamStore<Real> params_;
  Handles h_;
};

// Persistent LSTM stack cell: popping returns to `parent` with its exact state.
struct StackCell {
  LstmState state;
  Expr input;
  std::shared_ptr<const StackCell> parent;
};
using StackPtr = std::shared_ptr<const StackCell>;

struct Hypothesis {
  ParserState parser;
  StackPtr stack;    // null when the stack encoder is disabled
  StackPtr history;  // null when the action encoder is disabled
  double log_prob = 0.0;
};

// Per-utterance computation: token inputs and the right-to-left buffer
// encoding are built once; hypotheses share them.
template <class Real>
class Session {
 public:
  Session(const Model<Real>& model, Graph<Real>& g, const std::vector<std::string>& tokens)
      : model_(model), g_(g), tokens_(tokens) {
    if (tokens.empty()) throw TransitionError(TransitionError::Kind::EmptyUtterance, "empty utterance");
    const auto& h = model.h();
    const auto& normalized = model.normalizer().apply(tokens);
    for (const auto& w : normalized) {
      Expr e = g.lookup(h.word_emb, model.token_id(w));
      token_inputs_.push_back(g.relu(neural::dense(g, h.token_proj, e)));
    }
    if (model.config().use_buffer) {
      buffer_tops_.resize(tokens.size() + 1);
      LstmState s = lstm_push(h.buffer_lstm, neural::lstm_initial(g, h.buffer_lstm), g.param(h.buffer_guard));
      buffer_tops_[tokens.size()] = s.top();
      for (std::size_t i = tokens.size(); i-- > 0;) {
        s = lstm_push(h.buffer_lstm, s, token_inputs_[i]);
        buffer_tops_[i] = s.top();
      }
    }
  }

  const Model<Real>& model() const { return model_; }
  Graph<Real>& graph() { return g_; }
  const std::vector<Expr>& token_inputs() const { return token_inputs_; }

  Hypothesis initial() {
    const auto& h = model_.h();
    Hypothesis hyp{ParserState::initial(tokens_), nullptr, nullptr, 0.0};
    if (model_.config().use_stack)
      hyp.stack = push_cell(h.stack_lstm, nullptr, g_.param(h.stack_guard));
    if (model_.config().use_actions)
      hyp.history = push_cell(h.action_lstm, nullptr, g_.param(h.action_guard));
    return hyp;
  }

  // Concatenated top states of the enabled encoders.
  Expr features(const Hypothesis& hyp) {
    std::vector<Expr> parts;
    if (model_.config().use_stack) parts.push_back(hyp.stack->state.top());
    if (model_.config().use_buffer) parts.push_back(buffer_tops_[hyp.parser.consumed()]);
    if (model_.config().use_actions) parts.push_back(hyp.history->state.top());
    return parts.size() == 1 ? parts[0] : g_.concat(parts);
  }

  // Parser-state summary after the rectified feed-forward layer.
  Expr encode_state(const Hypothesis& hyp) {
    return g_.relu(neural::dense(g_, model_.h().summary, features(hyp)));
  }

  Expr logits(const Hypothesis& hyp) {
    Expr s = g_.dropout(encode_state(hyp), model_.config().dropout);
    return neural::dense(g_, model_.h().scorer, s);
  }

  Expr label_input(std::size_t label) {
    auto it = label_inputs_.find(label);
    if (it != label_inputs_.end()) return it->second;
    const auto& h = model_.h();
    Expr e = g_.relu(neural::dense(g_, h.label_proj, g_.lookup(h.label_emb, label)));
    label_inputs_.emplace(label, e);
    return e;
  }

  // Bidirectional encoding of [label ; children...].
  Expr compose(std::size_t label, const std::vector<Expr>& children) {
    if (children.empty())
      throw neural::NeuralError(neural::NeuralError::Kind::EmptySequence, "compose without children");
    std::vector<Expr> seq{label_input(label)};
    seq.insert(seq.end(), children.begin(), children.end());
    return neural::bilstm_encode(g_, model_.h().compose, seq, model_.config().dropout);
  }

  Hypothesis advance(const Hypothesis& hyp, const Action& a, double step_log_prob = 0.0) {
    const auto& cfg = model_.config();
    Hypothesis next{hyp.parser.apply(a, cfg.max_open), hyp.stack, hyp.history,
                    hyp.log_prob + step_log_prob};
    const auto& h = model_.h();
    if (cfg.use_stack) {
      switch (a.kind) {
        case Action::Kind::Shift:
          next.stack = push_cell(h.stack_lstm, hyp.stack, token_inputs_[hyp.parser.consumed()]);
          break;
        case Action::Kind::NT:
          next.stack = push_cell(h.stack_lstm, hyp.stack, label_input(model_.label_index(a.label)));
          break;
        case Action::Kind::Reduce: {
          const auto& open = hyp.parser.top();
          std::vector<Expr> kids(open.children.size());
          StackPtr cell = hyp.stack;
          for (std::size_t i = kids.size(); i-- > 0;) {
            kids[i] = cell->input;
            cell = cell->parent;
          }
          cell = cell->parent;  // the open non-terminal itself
          Expr composed = compose(model_.label_index(open.label), kids);
          next.stack = push_cell(h.stack_lstm, cell, composed);
          break;
        }
      }
    }
    if (cfg.use_actions)
      next.history = push_cell(h.action_lstm, hyp.history, g_.lookup(h.action_emb, model_.action_index(a)));
    return next;
  }

 private:
  LstmState lstm_push(const neural::LstmParams& p, const LstmState& prev, Expr x) {
    return neural::lstm_step(g_, p, prev, x, model_.config().dropout);
  }

  StackPtr push_cell(const neural::LstmParams& p, const StackPtr& parent, Expr x) {
    LstmState prev = parent ? parent->state : neural::lstm_initial(g_, p);
    return std::make_shared<const StackCell>(StackCell{lstm_push(p, prev, x), x, parent});
  }

  const Model<Real>& model_;
  Graph<Real>& g_;
  std::vector<std::string> tokens_;
  std::vector<Expr> token_inputs_;
  std::vector<Expr> buffer_tops_;
  std::unordered_map<std::size_t, Expr> label_inputs_;
};

// Sum of masked negative log-likelihoods along a teacher-forced sequence.
template <class Real>
Expr oracle_loss(Session<Real>& s, const std::vector<Action>& actions) {
  auto& g = s.graph();
  const auto& model = s.model();
  Hypothesis hyp = s.initial();
  std::vector<Expr> losses;
  for (const auto& a : actions) {
    auto mask = model.mask(hyp.parser.valid_actions(model.config().max_open));
    losses.push_back(g.masked_nll(s.logits(hyp), model.action_index(a), mask));
    hyp = s.advance(hyp, a);
  }
  return g.sum(losses);
}

// Loss of one example's gold derivation on a fresh graph.
template <class Real>
Expr example_loss(Graph<Real>& g, const Model<Real>& model, const Example& ex) {
  Session<Real> s(model, g, ex.tokens);
  return oracle_loss(s, oracle(ex.tree));
}

struct ParseResult {
  Tree tree;
  double log_prob = 0.0;
  std::vector<Action> actions;
};

namespace detail {

template <class Real>
std::vector<double> step_log_probs(Session<Real>& s, const Hypothesis& hyp, std::vector<char>& mask) {
  const auto& model = s.model();
  mask = model.mask(hyp.parser.valid_actions(model.config().max_open));
  auto lp = neural::masked_log_softmax<Real>(s.graph().value(s.logits(hyp)), mask);
  return std::vector<double>(lp.data(), lp.data() + lp.size());
}

}  // namespace detail

// Argmax over valid actions until terminal; ties go to the lowest
// inventory index.
template <class Real>
ParseResult parse_greedy(const Model<Real>& model, const std::vector<std::string>& tokens) {
  Graph<Real> g(model.params());
  Session<Real> s(model, g, tokens);
  Hypothesis hyp = s.initial();
  std::vector<char> mask;
  while (!hyp.parser.is_terminal()) {
    auto lp = detail::step_log_probs(s, hyp, mask);
    std::size_t best = mask.size();
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i] && (best == mask.size() || lp[i] > lp[best])) best = i;
    hyp = s.advance(hyp, model.actions()[best], lp[best]);
  }
  return {hyp.parser.tree(), hyp.log_prob, hyp.parser.history()};
}

// Beam search over action prefixes, scored by cumulative log-probability.
// Up to k live hypotheses are kept per step; completed ones are set aside
// (best k retained). Search stops when nothing is live or the best live
// score cannot beat the k-th completed score.
template <class Real>
std::vector<ParseResult> parse_beam(const Model<Real>& model, const std::vector<std::string>& tokens,
                                    std::size_t k) {
  if (k == 0) throw std::invalid_argument("beam size must be >= 1");
  Graph<Real> g(model.params());
  Session<Real> s(model, g, tokens);
  std::vector<Hypothesis> live{s.initial()};
  std::vector<Hypothesis> done;

  struct Candidate {
    double score;
    std::size_t parent;
    std::size_t action;
    double step;
  };

  auto kth_done = [&]() {
    return done.size() < k ? -std::numeric_limits<double>::infinity() : done[k - 1].log_prob;
  };

  while (!live.empty()) {
    std::vector<Candidate> cands;
    std::vector<char> mask;
    for (std::size_t p = 0; p < live.size(); ++p) {
      auto lp = detail::step_log_probs(s, live[p], mask);
      for (std::size_t a = 0; a < mask.size(); ++a)
        if (mask[a]) cands.push_back({live[p].log_prob + lp[a], p, a, lp[a]});
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
    std::vector<Hypothesis> next;
    for (const auto& c : cands) {
      if (next.size() >= k) break;
      if (done.size() >= k && c.score <= kth_done()) break;
      Hypothesis h = s.advance(live[c.parent], model.actions()[c.action], c.step);
      if (h.parser.is_terminal()) {
        auto at = std::upper_bound(done.begin(), done.end(), h.log_prob,
                                   [](double v, const Hypothesis& d) { return v > d.log_prob; });
        done.insert(at, std::move(h));
        if (done.size() > k) done.pop_back();
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
    if (!live.empty() && done.size() >= k && live.front().log_prob <= kth_done()) break;
  }

  std::vector<ParseResult> out;
  for (auto& h : done) out.push_back({h.parser.tree(), h.log_prob, h.parser.history()});
  return out;
}

// Log-probability of a given derivation under the model (evaluation mode).
template <class Real>
double score_actions(const Model<Real>& model, const std::vector<std::string>& tokens,
                     const std::vector<Action>& actions) {
  Graph<Real> g(model.params());
  Session<Real> s(model, g, tokens);
  Hypothesis hyp = s.initial();
  std::vector<char> mask;
  for (const auto& a : actions) {
    auto lp = detail::step_log_probs(s, hyp, mask);
    std::size_t i = model.action_index(a);
    if (!mask[i]) throw TransitionError(TransitionError::Kind::InvalidAction, "invalid action " + a.str());
    hyp = s.advance(hyp, a, lp[i]);
  }
  return hyp.log_prob;
}

struct EpochStats {
  std::size_t epoch = 0;
  double total_loss = 0.0;
  double mean_loss = 0.0;
  std::size_t examples = 0;
};

struct TrainOptions {
  // More than one worker switches to lock-free shared updates (not deterministic).
  std::size_t workers = 1;
};

namespace detail {

template <class Real>
void relaxed_copy(const ParamStore<Real>& from, ParamStore<Real>& to) {
  for (std::size_t k = 0; k < from.size(); ++k) {
    auto& src = const_cast<neural::Mat<Real>&>(from.params()[k].value);
    auto& dst = to.params()[k].value;
    for (Eigen::Index i = 0; i < src.size(); ++i)
      dst.data()[i] = std::atomic_ref<Real>(src.data()[i]).load(std::memory_order_relaxed);
  }
}

// Adam update of `shared` from `local` gradients with relaxed atomics;
// concurrent updates may overwrite each other.
template <class Real>
void hogwild_adam(ParamStore<Real>& shared, const ParamStore<Real>& local,
                  std::atomic<std::int64_t>& timestep, const neural::AdamConfig& cfg) {
  const double t = double(timestep.fetch_add(1) + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < shared.size(); ++k) {
    auto& p = shared.params()[k];
    const auto& g = local.params()[k].grad;
    for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
      if (!p.frozen_cols.empty() && p.frozen_cols[std::size_t(j)]) continue;
      for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
        std::atomic_ref<Real> w(p.value(i, j)), m(p.m(i, j)), v(p.v(i, j));
        double gi = double(g(i, j));
        double mi = cfg.beta1 * double(m.load(std::memory_order_relaxed)) + (1 - cfg.beta1) * gi;
        double vi = cfg.beta2 * double(v.load(std::memory_order_relaxed)) + (1 - cfg.beta2) * gi * gi;
        m.store(Real(mi), std::memory_order_relaxed);
        v.store(Real(vi), std::memory_order_relaxed);
        double wi = double(w.load(std::memory_order_relaxed));
        wi -= cfg.lr * ((mi / c1) / (std::sqrt(vi / c2) + cfg.eps) + cfg.weight_decay * wi);
        w.store(Real(wi), std::memory_order_relaxed);
      }
    }
  }
}

}  // namespace detail

// Teacher-forced training, one Adam update per example, examples shuffled
// each epoch from the configured seed.
template <class Real>
std::vector<EpochStats> train(Model<Real>& model, const std::vector<Example>& examples,
                              const TrainOptions& opt = {},
                              const std::function<void(const EpochStats&)>& on_epoch = {}) {
  const auto& cfg = model.config();
  neural::AdamConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  auto shuffle_rng = derive_rng(cfg.seed, kShuffleStream);
  auto dropout_rng = derive_rng(cfg.seed, kDropoutStream);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochStats> trace;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochStats st;
    st.epoch = epoch;
    st.examples = examples.size();
    if (opt.workers <= 1) {
      for (std::size_t idx : order) {
        model.params().zero_grad();
        Graph<Real> g(model.params(), true, &dropout_rng);
        Expr loss = example_loss(g, model, examples[idx]);
        st.total_loss += double(g.scalar(loss));
        g.backward(loss);
        neural::adam_step(model.params(), adam);
      }
    } else {
      std::atomic<std::int64_t> timestep{model.params().timestep()};
      std::atomic<std::size_t> next{0};
      std::vector<double> losses(opt.workers, 0.0);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < opt.workers; ++w) {
        pool.emplace_back([&, w] {
          Model<Real> local = model.template cast<Real>();
          auto rng = derive_rng(cfg.seed + w + 1, kDropoutStream + epoch);
          for (std::size_t n; (n = next.fetch_add(1)) < order.size();) {
            detail::relaxed_copy(model.params(), local.params());
            local.params().zero_grad();
            Graph<Real> g(local.params(), true, &rng);
            Expr loss = example_loss(g, local, examples[order[n]]);
            losses[w] += double(g.scalar(loss));
            g.backward(loss);
            detail::hogwild_adam(model.params(), local.params(), timestep, adam);
          }
        });
      }
      for (auto& t : pool) t.join();
      model.params().set_timestep(timestep.load());
      for (double l : losses) st.total_loss += l;
    }
    st.mean_loss = examples.empty() ? 0.0 : st.total_loss / double(examples.size());
    trace.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  return trace;
}

inline constexpr const char* kCheckpointMagic = "topparse-model";
inline constexpr int kCheckpointVersion = 1;

// Single-file checkpoint: config, normalizer scheme, vocabularies, labels,
// then the parameter listing.
template <class Real>
void save_checkpoint(std::ostream& out, const Model<Real>& model) {
  out << kCheckpointMagic << " " << kCheckpointVersion << "\n";
  auto items = config_items(model.config());
  out << "config " << items.size() << "\n";
  for (const auto& [k, v] : items) out << k << "=" << v << "\n";
  out << "normalizer " << TokenNormalizer::kScheme << " " << kNumberSymbol << "\n";
  out << "tokens " << model.tokens().size() << "\n";
  for (const auto& w : model.tokens().words()) out << w << "\n";
  out << "labels " << model.labels().size() << "\n";
  for (const auto& l : model.labels()) out << l.str() << "\n";
  const auto& emb = model.params()[model.h().word_emb];
  std::size_t frozen = std::size_t(std::count(emb.frozen_cols.begin(), emb.frozen_cols.end(), 1));
  out << "frozen " << frozen;
  for (std::size_t i = 0; i < emb.frozen_cols.size(); ++i)
    if (emb.frozen_cols[i]) out << " " << i;
  out << "\n";
  neural::write_params(out, model.params());
}

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class Real>
Model<Real> load_checkpoint(std::istream& in) {
  std::string line, tag;
  int version = 0;
  auto header = [&](const char* expected) {
    std::size_t n = 0;
    if (!std::getline(in, line)) throw CheckpointError(std::string("missing section ") + expected);
    std::istringstream is(line);
    if (!(is >> tag >> n) || tag != expected)
      throw CheckpointError(std::string("expected section ") + expected + ", got '" + line + "'");
    return n;
  };
  if (!std::getline(in, line)) throw CheckpointError("empty checkpoint");
  {
    std::istringstream is(line);
    if (!(is >> tag >> version) || tag != kCheckpointMagic)
      throw CheckpointError("not a model checkpoint");
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
  }
  RnngConfig cfg;
  std::size_t n = header("config");
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(in, line);
    auto eq = line.find('=');
    if (eq == std::string::npos || !set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1)))
      throw CheckpointError("bad config line '" + line + "'");
  }
  if (!std::getline(in, line)) throw CheckpointError("missing normalizer");
  {
    std::istringstream is(line);
    std::string scheme, num;
    is >> tag >> scheme >> num;
    if (tag != "normalizer" || scheme != TokenNormalizer::kScheme || num != kNumberSymbol)
      throw CheckpointError("unsupported normalizer '" + line + "'");
  }
  Vocab tokens;
  n = header("tokens");
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(in, line);
    tokens.add(line);
  }
  std::vector<Label> labels;
  n = header("labels");
  for (std::size_t i = 0; i < n; ++i) {
    std::getline(in, line);
    labels.push_back(parse_label(line));
  }
  Model<Real> model(cfg, std::move(tokens), std::move(labels));
  if (!std::getline(in, line)) throw CheckpointError("missing frozen list");
  {
    std::istringstream is(line);
    std::size_t count = 0;
    is >> tag >> count;
    if (tag != "frozen") throw CheckpointError("expected frozen list");
    auto& emb = model.params()[model.h().word_emb];
    if (count) emb.frozen_cols.assign(emb.cols(), 0);
    for (std::size_t i = 0, c; i < count && is >> c; ++i) emb.frozen_cols.at(c) = 1;
  }
  neural::read_params(in, model.params());
  return model;
}

}  // namespace topparse::rnng
