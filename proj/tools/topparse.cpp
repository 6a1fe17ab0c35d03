// topparse: validate, inspect, train, decode and score TOP-style trees.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "topparse/commands.hpp"

using namespace topparse;

namespace {

std::string flag_name(const std::string& key) {
  std::string out = key;
  for (auto& c : out)
    if (c == '_') c = '-';
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic parsing for task-oriented dialog with a discriminative RNNG"};
  app.require_subcommand(1);

  std::string config_file;
  std::uint64_t seed = 1;
  bool seed_given = false;
  bool strict = false;
  app.add_option("--config", config_file, "key=value settings file (flags override it)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_flag("--strict", strict, "abort on the first malformed input line");

  auto* validate = app.add_subcommand("validate", "check trees against the grammar constraints");
  cli::ValidateOptions vopt;
  validate->add_option("trees", vopt.trees, "one tree per line, or TSV with the tree last")->required();

  auto* stats = app.add_subcommand("stats", "corpus statistics as JSON plus histogram CSVs");
  cli::StatsOptions sopt;
  stats->add_option("corpus", sopt.corpus, "raw<TAB>tokens<TAB>tree file")->required();
  stats->add_option("--depth-csv", sopt.depth_csv, "write the depth histogram here");
  stats->add_option("--length-csv", sopt.length_csv, "write the length histogram here");

  auto* oracle = app.add_subcommand("oracle", "gold action sequence for every tree");
  cli::OracleOptions oopt;
  oracle->add_option("trees", oopt.trees)->required();
  oracle->add_option("-o,--output", oopt.output);
  oracle->add_flag("--verify", oopt.verify, "re-execute every sequence and report differences");

  auto* train = app.add_subcommand("train", "train an RNNG parser");
  cli::TrainOptions topt;
  train->add_option("train", topt.train, "training TSV")->required();
  train->add_option("--valid", topt.valid, "validation TSV");
  train->add_option("-m,--model", topt.model, "checkpoint to write")->required();
  train->add_option("--embeddings", topt.embeddings, "pretrained vectors, 'word v1 ... vd' per line");
  train->add_option("--min-count", topt.min_count, "minimum token frequency for the vocabulary");
  train->add_option("--workers", topt.workers, "shared-update worker threads (>1 is not deterministic)");
  cli::Settings model_flags;
  for (const auto& [key, value] : rnng::config_items(rnng::RnngConfig{})) {
    if (key == "seed") continue;
    train->add_option_function<std::string>(
        "--" + flag_name(key), [&model_flags, key](const std::string& v) { model_flags[key] = v; },
        "default " + value);
  }

  auto* parse = app.add_subcommand("parse", "decode utterances with a trained model");
  cli::ParseOptions popt;
  parse->add_option("-m,--model", popt.model)->required();
  parse->add_option("input", popt.input, "one utterance per line")->required();
  parse->add_option("-o,--output", popt.output);
  parse->add_option("--beam", popt.beam, "beam size; 1 is greedy");

  auto* eval = app.add_subcommand("eval", "score predictions against gold trees");
  cli::EvalOptions eopt;
  eval->add_option("gold", eopt.gold)->required();
  eval->add_option("predictions", eopt.predictions)->required();
  eval->add_option("--topk", eopt.topk, "top-k accuracies to report")->delimiter(',');
  eval->add_option("--name", eopt.name, "row label in the table");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of a tiny RNNG training step");
  cli::GradCheckOptions gopt;
  gradcheck->add_flag("--corrupt", gopt.corrupt, "perturb analytic gradients (should fail)");
  gradcheck->add_option("--tolerance", gopt.tolerance);

  auto* synth = app.add_subcommand("synth", "generate a synthetic TOP-style corpus");
  cli::SynthOptions yopt;
  synth->add_option("-o,--output", yopt.output);
  synth->add_option("--utterances", yopt.shape.utterances);
  synth->add_option("--intents", yopt.shape.intents);
  synth->add_option("--slots", yopt.shape.slots);
  synth->add_option("--max-depth", yopt.shape.max_depth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }
  seed_given = seed_opt->count() > 0;

  try {
    cli::Settings file;
    if (!config_file.empty()) file = cli::read_config_file(config_file);
    if (seed_given) model_flags["seed"] = std::to_string(seed);
    auto settings = cli::merge_settings(file, model_flags);
    rnng::RnngConfig cfg;
    auto rest = cli::apply_model_settings(cfg, settings);
    for (const auto& [k, v] : rest) std::cerr << "warning: ignoring unknown setting '" << k << "'\n";
    std::uint64_t resolved_seed = cfg.seed;

    if (*validate) return cli::cmd_validate(vopt, std::cout, std::cerr);
    if (*stats) {
      sopt.strict = strict;
      return cli::cmd_stats(sopt, std::cout, std::cerr);
    }
    if (*oracle) return cli::cmd_oracle(oopt, std::cout, std::cerr);
    if (*train) {
      topt.config = cfg;
      topt.strict = strict;
      return cli::cmd_train(topt, std::cout, std::cerr);
    }
    if (*parse) return cli::cmd_parse(popt, std::cout, std::cerr);
    if (*eval) return cli::cmd_eval(eopt, std::cout, std::cerr);
    if (*gradcheck) {
      gopt.seed = resolved_seed;
      return cli::cmd_gradcheck(gopt, std::cout, std::cerr);
    }
    if (*synth) {
      yopt.shape.seed = resolved_seed;
      return cli::cmd_synth(yopt, std::cout, std::cerr);
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const rnng::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const cli::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kIo;
  } catch (const IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == IngestError::Kind::Io ? cli::kIo : cli::kFailure;
  } catch (const EmbeddingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == EmbeddingError::Kind::Io ? cli::kIo : cli::kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kFailure;
  }
  return cli::kUsage;
}
