#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"
#include "topparse/commands.hpp"

using namespace topparse;
using namespace topparse::cli;
namespace fs = std::filesystem;

namespace {

std::string temp(const std::string& name) { return ::testing::TempDir() + "cli_" + name; }

std::string write(const std::string& name, const std::string& content) {
  std::string path = temp(name);
  std::ofstream(path) << content;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args) {
  int status = std::system((std::string(TOPPARSE_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::string kDirectionsTsv =
    "Driving directions to the Eagles game\tDriving directions to the Eagles game\t" + ref::kDirections + "\n";

std::string tiny_train_file() {
  return write("train.tsv",
               "play a song\tplay a song\t[IN:PLAY play [SL:ITEM a song ] ]\n"
               "stop\tstop\t[IN:STOP stop ]\n"
               "play music\tplay music\t[IN:PLAY play [SL:ITEM music ] ]\n");
}

TrainOptions tiny_train_options(const std::string& model, std::size_t epochs) {
  TrainOptions o;
  o.train = tiny_train_file();
  o.model = model;
  o.config.word_dim = 6;
  o.config.label_dim = 3;
  o.config.action_dim = 3;
  o.config.lstm_units = 5;
  o.config.epochs = epochs;
  return o;
}

}  // namespace

TEST(Validate, ValidInvalidAndEmpty) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate({write("ok.txt", ref::kDirections + "\n")}, out, err), kOk);
  EXPECT_EQ(out.str(), "");

  std::ostringstream out2, err2;
  auto bad = write("bad.txt", "[IN:X a ]\n[SL:Y hello ]\n");
  EXPECT_EQ(cmd_validate({bad}, out2, err2), kFailure);
  EXPECT_EQ(out2.str(), bad + ":2:RootNotIntent at /\n");

  std::ostringstream out3, err3;
  EXPECT_EQ(cmd_validate({write("empty.txt", "")}, out3, err3), kOk);
  EXPECT_NE(err3.str().find("warning"), std::string::npos);
  EXPECT_THROW(cmd_validate({temp("missing.txt")}, out3, err3), IoError);
}

TEST(Validate, TsvTokenColumnIsChecked) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate({write("tsv.txt", kDirectionsTsv)}, out, err), kOk);
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_validate({write("tsv2.txt", "a b\ta c\t[IN:X a b ]\n")}, out2, err2), kFailure);
}

TEST(Stats, JsonAndCsvArtifacts) {
  std::ostringstream out, err;
  StatsOptions o;
  o.corpus = write("stats.tsv", kDirectionsTsv + "stop\tstop\t[IN:STOP stop ]\n");
  o.depth_csv = temp("depth.csv");
  EXPECT_EQ(cmd_stats(o, out, err), kOk);
  auto j = Json::parse(out.str());
  EXPECT_EQ(j["count"], 2);
  EXPECT_EQ(slurp(o.depth_csv), "depth,count\n1,1\n4,1\n");
  EXPECT_TRUE(fs::exists(o.depth_csv + ".config.json"));
}

TEST(Oracle, DirectionsAndVerify) {
  std::ostringstream out, err;
  OracleOptions o{write("oracle.txt", ref::kDirections + "\n"), "", true};
  EXPECT_EQ(cmd_oracle(o, out, err), kOk);
  EXPECT_EQ(out.str(),
            "NT(IN:GET_DIRECTIONS) SHIFT SHIFT SHIFT NT(SL:DESTINATION) NT(IN:GET_EVENT) SHIFT "
            "NT(SL:NAME_EVENT) SHIFT REDUCE NT(SL:CAT_EVENT) SHIFT REDUCE REDUCE REDUCE REDUCE\n");
  EXPECT_NE(err.str().find("0 differences"), std::string::npos);
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_oracle({write("oracle_bad.txt", "[SL:Y a ]\n"), "", false}, out2, err2), kFailure);
}

TEST(Train, ZeroEpochsWritesLoadableCheckpoint) {
  std::ostringstream log, err;
  auto o = tiny_train_options(temp("zero.model"), 0);
  EXPECT_EQ(cmd_train(o, log, err), kOk);
  auto m = load_model(o.model);
  EXPECT_EQ(m.config().word_dim, 6u);
  EXPECT_EQ(m.labels().size(), 3u);
  auto summary = Json::parse(log.str());
  EXPECT_EQ(summary["command"], "train");
  o.train = temp("no-such.tsv");
  EXPECT_THROW(cmd_train(o, log, err), IngestError);
}

TEST(Train, EpochLinesReportValidation) {
  std::ostringstream log, err;
  auto o = tiny_train_options(temp("two.model"), 2);
  o.valid = o.train;
  EXPECT_EQ(cmd_train(o, log, err), kOk);
  std::istringstream lines(log.str());
  std::string line;
  std::vector<Json> js;
  while (std::getline(lines, line)) js.push_back(Json::parse(line));
  ASSERT_EQ(js.size(), 3u);
  EXPECT_EQ(js[0]["epoch"], 1);
  EXPECT_TRUE(js[1].contains("valid_exact_match"));
}

TEST(Parse, GreedyAndBeamBlocks) {
  std::ostringstream log, err;
  auto o = tiny_train_options(temp("parse.model"), 1);
  ASSERT_EQ(cmd_train(o, log, err), kOk);
  auto input = write("utts.txt", "play a song\nstop\n");
  std::ostringstream one, five, e;
  EXPECT_EQ(cmd_parse({o.model, input, "", 1}, one, e), kOk);
  EXPECT_EQ(cmd_parse({o.model, input, "", 5}, five, e), kOk);
  auto p1 = read_predictions(write("p1.txt", one.str()));
  auto p5 = read_predictions(write("p5.txt", five.str()));
  ASSERT_EQ(p1.size(), 2u);
  ASSERT_EQ(p5.size(), 2u);
  EXPECT_EQ(p1[0].size(), 1u);
  EXPECT_GE(p5[0].size(), 2u);
  EXPECT_LE(p5[0].size(), 5u);
  for (const auto& block : p5)
    for (const auto& t : block) EXPECT_TRUE(is_valid(parse_bracketed(t)));
  EXPECT_THROW(cmd_parse({o.model, input, "", 0}, one, e), UsageError);
}

TEST(Eval, IdentityAndStub) {
  auto gold = write("gold.txt", ref::kDirections + "\n[IN:X a ]\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_eval({gold, gold, {1}, "oracle"}, out, err), kOk);
  auto text = out.str();
  EXPECT_NE(text.find("oracle | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00"),
            std::string::npos);

  std::ostringstream out2, err2;
  auto stub = write("stub.txt", "0\t[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the "
                                "[SL:NAME_EVENT Eagles ] game ] ] ]\n\n0\t[IN:X a\n0\t[IN:X a ]\n\n");
  EXPECT_EQ(cmd_eval({gold, stub, {1, 2}, "stub"}, out2, err2), kOk);
  auto j = Json::parse(out2.str().substr(0, out2.str().find("Model |")));
  EXPECT_DOUBLE_EQ(j["exact_match"].get<double>(), 0.0);
  EXPECT_EQ(j["bracket"]["matched"], 4);
  EXPECT_EQ(j["bracket"]["gold"], 6);
  EXPECT_EQ(j["bracket"]["predicted"], 4);
  EXPECT_EQ(j["n_invalid_predictions"], 1);
  EXPECT_DOUBLE_EQ(j["top_k"]["2"].get<double>(), 50.0);

  std::ostringstream out3, err3;
  EXPECT_EQ(cmd_eval({gold, write("short.txt", "[IN:X a ]\n"), {}, "m"}, out3, err3), kFailure);
}

TEST(GradCheck, PassesAndCorruptFails) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_gradcheck({3, false, 1e-4}, out, err), kOk);
  EXPECT_TRUE(Json::parse(out.str())["passed"].get<bool>());
  std::ostringstream out2;
  EXPECT_EQ(cmd_gradcheck({3, true, 1e-4}, out2, err), kFailure);
  EXPECT_FALSE(Json::parse(out2.str())["worst_param"].get<std::string>().empty());
}

TEST(Settings, FlagBeatsFileBeatsDefault) {
  auto file = read_config_file(write("cfg.txt", "# comment\nword_dim = 12\nlstm_units=7\nmystery=1\n"));
  auto merged = merge_settings(file, {{"word_dim", "9"}});
  rnng::RnngConfig cfg;
  auto rest = apply_model_settings(cfg, merged);
  EXPECT_EQ(cfg.word_dim, 9u);
  EXPECT_EQ(cfg.lstm_units, 7u);
  EXPECT_EQ(cfg.label_dim, rnng::RnngConfig{}.label_dim);
  EXPECT_EQ(rest.size(), 1u);
  EXPECT_THROW(read_config_file(write("cfg_bad.txt", "no equals sign\n")), UsageError);
}

TEST(Binary, ExitCodesAndPrecedence) {
  EXPECT_EQ(run("--help"), kOk);
  EXPECT_EQ(run("validate"), kUsage);
  EXPECT_EQ(run("validate " + temp("absent.txt")), kIo);
  EXPECT_EQ(run("validate " + write("bin_bad.txt", "[SL:Y a ]\n")), kFailure);
  EXPECT_EQ(run("train --lstm-units 0 " + tiny_train_file() + " -m " + temp("bin0.model")), kUsage);

  auto cfg = write("bin.cfg", "word_dim=12\nlstm_units=7\nlabel_dim=3\naction_dim=3\nepochs=0\n");
  auto model = temp("bin.model");
  ASSERT_EQ(run("--config " + cfg + " --seed 9 train " + tiny_train_file() + " -m " + model + " --word-dim 5"),
            kOk);
  auto m = load_model(model);
  EXPECT_EQ(m.config().word_dim, 5u);
  EXPECT_EQ(m.config().lstm_units, 7u);
  EXPECT_EQ(m.config().seed, 9u);
  EXPECT_EQ(m.config().dropout, rnng::RnngConfig{}.dropout);
}

TEST(Binary, EndToEndPipeline) {
  auto dir = temp("e2e_");
  ASSERT_EQ(run("synth --utterances 30 -o " + dir + "train.tsv"), kOk);
  EXPECT_TRUE(fs::exists(dir + "train.tsv.config.json"));
  ASSERT_EQ(run("validate " + dir + "train.tsv"), kOk);
  ASSERT_EQ(run("oracle --verify " + dir + "train.tsv -o " + dir + "actions.txt"), kOk);
  ASSERT_EQ(run("train " + dir + "train.tsv -m " + dir + "m --epochs 1 --word-dim 8 --lstm-units 8 "
                "--label-dim 4 --action-dim 4"),
            kOk);
  ASSERT_EQ(run("parse -m " + dir + "m " + dir + "train.tsv --beam 3 -o " + dir + "pred.txt"), kOk);
  ASSERT_EQ(run("eval --topk 1,3 " + dir + "train.tsv " + dir + "pred.txt"), kOk);
  auto preds = read_predictions(dir + "pred.txt");
  EXPECT_EQ(preds.size(), 30u);
  for (const auto& block : preds)
    for (const auto& t : block) EXPECT_TRUE(is_valid(parse_bracketed(t)));
}
