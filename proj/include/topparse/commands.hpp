#pragma once

// Batch commands behind the `topparse` executable. Each takes resolved
// options plus output streams and returns a process exit code, so tests can
// drive them without spawning processes.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "topparse/dataset.hpp"
#include "topparse/metrics.hpp"
#include "topparse/neural/gradcheck.hpp"
#include "topparse/preprocess.hpp"
#include "topparse/rnng.hpp"
#include "topparse/synthetic.hpp"
#include "topparse/transitions.hpp"
#include "topparse/treebank.hpp"

namespace topparse::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3 };

using Json = nlohmann::json;
using Settings = std::map<std::string, std::string>;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// key=value lines; blank lines and '#' comments ignored.
inline Settings read_config_file(const std::string& path) {
  Settings s;
  std::size_t lineno = 0;
  for (const auto& raw : read_lines(path)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string x) {
      auto a = x.find_first_not_of(" \t"), b = x.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : x.substr(a, b - a + 1);
    };
    s[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return s;
}

// Flag values win over file values, which win over defaults.
inline Settings merge_settings(const Settings& file, const Settings& flags) {
  Settings out = file;
  for (const auto& [k, v] : flags) out[k] = v;
  return out;
}

// Applies model keys to `cfg`; returns keys that are not model settings.
inline Settings apply_model_settings(rnng::RnngConfig& cfg, const Settings& s) {
  Settings rest;
  for (const auto& [k, v] : s)
    if (!rnng::set_config_value(cfg, k, v)) rest[k] = v;
  return rest;
}

inline Json config_json(const rnng::RnngConfig& cfg) {
  Json j = Json::object();
  for (const auto& [k, v] : rnng::config_items(cfg)) j[k] = v;
  return j;
}

// Fixed-format text artifacts get their provenance next to them.
inline void write_sidecar(const std::string& artifact, const Json& provenance) {
  auto out = open_output(artifact + ".config.json");
  out << provenance.dump(2) << "\n";
}

// A tree line is either a bare bracketed tree or a TSV row whose last
// column is the tree (the token column, when present, is the expected yield).
struct TreeLine {
  std::string tree_text;
  std::optional<std::vector<std::string>> tokens;
};

inline TreeLine split_tree_line(const std::string& line) {
  auto cols = detail::split_tabs(line);
  TreeLine t;
  t.tree_text = cols.back();
  if (cols.size() >= 2) t.tokens = detail::split_spaces(cols[cols.size() - 2]);
  return t;
}

inline bool blank(const std::string& s) { return s.find_first_not_of(" \t") == std::string::npos; }

struct ValidateOptions {
  std::string trees;
};

inline int cmd_validate(const ValidateOptions& opt, std::ostream& out, std::ostream& err) {
  auto lines = read_lines(opt.trees);
  std::size_t checked = 0, bad = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    ++checked;
    std::string where = opt.trees + ":" + std::to_string(i + 1) + ":";
    auto tl = split_tree_line(lines[i]);
    Tree tree;
    try {
      tree = parse_bracketed(tl.tree_text);
    } catch (const FormatError& e) {
      ++bad;
      out << where << FormatError::describe(e.kind()) << ": " << e.what() << "\n";
      continue;
    }
    if (tl.tokens) tree.tokens = *tl.tokens;
    auto violations = validate(tree);
    if (!violations.empty()) ++bad;
    for (const auto& v : violations) out << where << constraint_name(v.constraint) << " at " << v.path_string() << "\n";
  }
  if (checked == 0) err << "warning: " << opt.trees << " contains no trees\n";
  err << checked << " trees checked, " << bad << " invalid\n";
  return bad ? kFailure : kOk;
}

struct StatsOptions {
  std::string corpus;
  bool strict = false;
  std::string depth_csv;
  std::string length_csv;
};

inline int cmd_stats(const StatsOptions& opt, std::ostream& out, std::ostream& err) {
  auto loaded = load_tsv(opt.corpus, opt.strict);
  for (const auto& r : loaded.rejected) err << opt.corpus << ":" << r.line << ": skipped: " << r.message << "\n";
  auto stats = compute_stats(loaded.corpus);
  Json prov{{"command", "stats"}, {"corpus", opt.corpus}, {"strict", opt.strict}};
  if (!opt.depth_csv.empty()) {
    open_output(opt.depth_csv) << histogram_csv(stats.depth_histogram, "depth");
    write_sidecar(opt.depth_csv, prov);
  }
  if (!opt.length_csv.empty()) {
    open_output(opt.length_csv) << histogram_csv(stats.length_histogram, "length");
    write_sidecar(opt.length_csv, prov);
  }
  Json j = stats_to_json(stats);
  j["rejected"] = loaded.rejected.size();
  j["config"] = prov;
  out << j.dump(2) << "\n";
  return kOk;
}

struct OracleOptions {
  std::string trees;
  std::string output;  // empty: write to `out`
  bool verify = false;
};

inline int cmd_oracle(const OracleOptions& opt, std::ostream& out, std::ostream& err) {
  auto lines = read_lines(opt.trees);
  std::ofstream file;
  if (!opt.output.empty()) file = open_output(opt.output);
  std::ostream& sink = opt.output.empty() ? out : file;
  std::size_t failures = 0, diffs = 0, n = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    std::string where = opt.trees + ":" + std::to_string(i + 1) + ": ";
    try {
      Tree t = parse_bracketed(split_tree_line(lines[i]).tree_text);
      auto actions = oracle(t);
      sink << serialize_actions(actions) << "\n";
      ++n;
      if (opt.verify && !(execute(actions, t.tokens) == t)) {
        ++diffs;
        err << where << "re-execution differs\n";
      }
    } catch (const std::exception& e) {
      ++failures;
      sink << "\n";
      err << where << e.what() << "\n";
    }
  }
  if (!opt.output.empty())
    write_sidecar(opt.output, {{"command", "oracle"}, {"trees", opt.trees}, {"verify", opt.verify}});
  if (opt.verify) err << n << " sequences verified, " << diffs << " differences\n";
  return failures || diffs ? kFailure : kOk;
}

struct TrainOptions {
  std::string train;
  std::string valid;  // optional
  std::string model;  // checkpoint path
  std::string embeddings;  // optional pretrained vectors
  rnng::RnngConfig config;
  std::size_t min_count = 1;
  std::size_t workers = 1;
  bool strict = false;
};

inline double greedy_exact_match(const rnng::Model<float>& model, const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) hits += rnng::parse_greedy(model, ex.tokens).tree.root == ex.tree.root;
  return 100.0 * double(hits) / double(examples.size());
}

// Writes the checkpoint and returns a JSON summary; per-epoch lines go to `log`.
inline int cmd_train(const TrainOptions& opt, std::ostream& log, std::ostream& err) {
  opt.config.check();
  auto train = load_tsv(opt.train, opt.strict, Split::Train);
  for (const auto& r : train.rejected) err << opt.train << ":" << r.line << ": skipped: " << r.message << "\n";
  std::vector<Example> valid;
  if (!opt.valid.empty()) valid = load_tsv(opt.valid, opt.strict, Split::Valid).corpus.examples;
  auto vocabs = build_vocabs(train.corpus, opt.min_count);
  std::optional<EmbeddingTable> table;
  if (!opt.embeddings.empty())
    table = load_embeddings(opt.embeddings, vocabs.tokens, opt.config.seed, opt.config.freeze_pretrained);
  rnng::Model<float> model(opt.config, vocabs, table ? &*table : nullptr);

  rnng::TrainOptions topt;
  topt.workers = opt.workers;
  rnng::train(model, train.corpus.examples, topt, [&](const rnng::EpochStats& st) {
    Json line{{"epoch", st.epoch}, {"mean_loss", st.mean_loss}, {"examples", st.examples}};
    if (!valid.empty()) line["valid_exact_match"] = greedy_exact_match(model, valid);
    log << line.dump() << "\n";
  });

  auto out = open_output(opt.model);
  rnng::save_checkpoint(out, model);
  Json summary{{"command", "train"},
               {"train", opt.train},
               {"valid", opt.valid},
               {"model", opt.model},
               {"embeddings", opt.embeddings},
               {"min_count", opt.min_count},
               {"workers", opt.workers},
               {"parameters", model.params().parameter_count()},
               {"config", config_json(opt.config)}};
  log << summary.dump() << "\n";
  return kOk;
}

inline rnng::Model<float> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return rnng::load_checkpoint<float>(in);
}

struct ParseOptions {
  std::string model;
  std::string input;   // one utterance per line (or TSV: tokens column)
  std::string output;  // empty: write to `out`
  std::size_t beam = 1;
};

// Per input line: k lines "score<TAB>tree", then a blank line.
inline int cmd_parse(const ParseOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.beam == 0) throw UsageError("--beam must be >= 1");
  auto model = load_model(opt.model);
  auto lines = read_lines(opt.input);
  std::ofstream file;
  if (!opt.output.empty()) file = open_output(opt.output);
  std::ostream& sink = opt.output.empty() ? out : file;
  sink << std::setprecision(17);
  int status = kOk;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    auto cols = detail::split_tabs(lines[i]);
    auto tokens = detail::split_spaces(cols.size() >= 2 ? cols[1] : cols[0]);
    try {
      if (opt.beam == 1) {
        auto r = rnng::parse_greedy(model, tokens);
        sink << r.log_prob << "\t" << serialize(r.tree) << "\n";
      } else {
        for (const auto& r : rnng::parse_beam(model, tokens, opt.beam))
          sink << r.log_prob << "\t" << serialize(r.tree) << "\n";
      }
    } catch (const std::exception& e) {
      err << opt.input << ":" << i + 1 << ": " << e.what() << "\n";
      status = kFailure;
    }
    sink << "\n";
  }
  if (!opt.output.empty()) {
    Json prov{{"command", "parse"}, {"model", opt.model}, {"input", opt.input}, {"beam", opt.beam},
              {"config", config_json(model.config())}};
    write_sidecar(opt.output, prov);
  }
  return status;
}

// Predictions are either one tree per line, or blocks of "score<TAB>tree"
// lines separated by blank lines (the parse output). Returns one
// hypothesis list per example, raw strings preserved.
inline std::vector<std::vector<std::string>> read_predictions(const std::string& path) {
  auto lines = read_lines(path);
  bool blocks = false;
  for (const auto& l : lines)
    if (l.find('\t') != std::string::npos) blocks = true;
  std::vector<std::vector<std::string>> out;
  if (!blocks) {
    for (const auto& l : lines)
      if (!blank(l)) out.push_back({l});
    return out;
  }
  std::vector<std::string> current;
  bool open = false;
  for (const auto& l : lines) {
    if (blank(l)) {
      if (open) out.push_back(current);
      current.clear();
      open = false;
      continue;
    }
    auto tab = l.find('\t');
    current.push_back(tab == std::string::npos ? l : l.substr(tab + 1));
    open = true;
  }
  if (open) out.push_back(current);
  return out;
}

struct EvalOptions {
  std::string gold;
  std::string predictions;
  std::vector<std::size_t> topk;
  std::string name = "model";
};

inline std::string format_table(const std::string& name, const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "Model | Exact match | F1 | Precision | Recall | TL-F1 | TL-Precision | TL-Recall | Tree Validity\n";
  os << name << " | " << r.exact_match << " | " << r.bracket.f1 << " | " << r.bracket.precision << " | "
     << r.bracket.recall << " | " << r.tree_labeled.f1 << " | " << r.tree_labeled.precision << " | "
     << r.tree_labeled.recall << " | " << r.tree_validity << "\n";
  for (const auto& [k, acc] : r.top_k) os << "Top-" << k << ": " << acc << "\n";
  return os.str();
}

inline Json report_json(const MetricsReport& r) {
  auto prf = [](const PRF& p) {
    return Json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
                {"matched", p.matched}, {"gold", p.gold}, {"predicted", p.predicted}};
  };
  Json j{{"exact_match", r.exact_match},
         {"bracket", prf(r.bracket)},
         {"tree_labeled", prf(r.tree_labeled)},
         {"tree_validity", r.tree_validity},
         {"n_examples", r.n_examples},
         {"n_invalid_predictions", r.n_invalid_predictions}};
  Json tk = Json::object();
  for (const auto& [k, acc] : r.top_k) tk[std::to_string(k)] = acc;
  j["top_k"] = tk;
  return j;
}

// JSON report on `out` followed by the human-readable table.
inline int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  std::vector<Tree> gold;
  std::size_t lineno = 0;
  for (const auto& l : read_lines(opt.gold)) {
    ++lineno;
    if (blank(l)) continue;
    try {
      gold.push_back(parse_bracketed(split_tree_line(l).tree_text));
    } catch (const FormatError& e) {
      err << opt.gold << ":" << lineno << ": " << e.what() << "\n";
      return kFailure;
    }
  }
  auto hyps = read_predictions(opt.predictions);
  if (hyps.size() != gold.size()) {
    err << LengthMismatch(gold.size(), hyps.size()).what() << "\n";
    return kFailure;
  }
  std::vector<std::string> first;
  std::vector<std::vector<Prediction>> beams;
  for (const auto& h : hyps) {
    first.push_back(h.empty() ? std::string() : h.front());
    std::vector<Prediction> b;
    for (const auto& s : h) b.push_back(try_parse(s));
    beams.push_back(std::move(b));
  }
  MetricsReport r = evaluate(gold, first);
  for (std::size_t k : opt.topk) r.top_k[k] = top_k_accuracy(gold, beams, k);
  Json j = report_json(r);
  j["config"] = {{"command", "eval"}, {"gold", opt.gold}, {"predictions", opt.predictions}, {"topk", opt.topk}};
  out << j.dump(2) << "\n" << format_table(opt.name, r);
  return kOk;
}

// Tiny double-precision RNNG used by the gradient check: 3 tokens, one
// intent and one slot label, dims <= 8, no dropout.
inline rnng::RnngConfig tiny_config(std::uint64_t seed) {
  rnng::RnngConfig c;
  c.word_dim = 4;
  c.label_dim = 3;
  c.action_dim = 3;
  c.lstm_units = 3;
  c.lstm_layers = 2;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

inline Example tiny_example() {
  Example ex;
  ex.tree = parse_bracketed("[IN:GET_X [SL:Y a b ] c ]");
  ex.tokens = ex.tree.tokens;
  ex.raw_utterance = "a b c";
  return ex;
}

inline rnng::Model<double> tiny_model(std::uint64_t seed) {
  Vocab v;
  for (const char* w : {"a", "b", "c"}) v.add(w);
  return rnng::Model<double>(tiny_config(seed), v, {Label::intent("GET_X"), Label::slot("Y")});
}

// Perturbs every parameter away from zero so relu units are active and
// no value sits on a kink.
inline void jitter(neural::ParamStore<double>& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  for (auto& p : store.params())
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += d(rng);
}

struct GradCheckOptions {
  std::uint64_t seed = 1;
  bool corrupt = false;
  double tolerance = 1e-4;
};

inline neural::GradCheckReport run_rnng_gradcheck(const GradCheckOptions& opt) {
  auto model = tiny_model(opt.seed);
  jitter(model.params(), opt.seed);
  Example ex = tiny_example();
  neural::GradCheckOptions g;
  g.tolerance = opt.tolerance;
  g.corrupt = opt.corrupt;
  return neural::grad_check(model.params(),
                            [&](neural::Graph<double>& graph) { return rnng::example_loss(graph, model, ex); }, g);
}

inline int cmd_gradcheck(const GradCheckOptions& opt, std::ostream& out, std::ostream&) {
  auto report = run_rnng_gradcheck(opt);
  Json entries = Json::array();
  for (const auto& e : report.entries)
    entries.push_back({{"param", e.param}, {"max_rel_error", e.max_rel_error}, {"checked", e.checked},
                       {"worst_index", e.worst_index}, {"analytic", e.analytic}, {"numeric", e.numeric}});
  Json j{{"passed", report.passed},
         {"tolerance", report.tolerance},
         {"max_rel_error", report.max_rel_error},
         {"worst_param", report.worst_param},
         {"entries", entries},
         {"config", {{"command", "gradcheck"}, {"seed", opt.seed}, {"corrupt", opt.corrupt},
                     {"model", config_json(tiny_config(opt.seed))}}}};
  out << j.dump(2) << "\n";
  return report.passed ? kOk : kFailure;
}

struct SynthOptions {
  synthetic::CorpusShape shape;
  std::string output;  // empty: write to `out`
};

inline int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream&) {
  auto corpus = synthetic::generate_corpus(opt.shape);
  std::ofstream file;
  if (!opt.output.empty()) file = open_output(opt.output);
  std::ostream& sink = opt.output.empty() ? out : file;
  for (const auto& ex : corpus.examples) sink << to_tsv_line(ex) << "\n";
  if (!opt.output.empty())
    write_sidecar(opt.output, {{"command", "synth"},
                               {"utterances", opt.shape.utterances},
                               {"intents", opt.shape.intents},
                               {"slots", opt.shape.slots},
                               {"max_depth", opt.shape.max_depth},
                               {"seed", opt.shape.seed}});
  return kOk;
}

}  // namespace topparse::cli
