// Copyright 2026 The emocat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "emocat/corpus.hpp"

namespace emocat {
namespace {

namespace fs = std::filesystem;

struct CmdResult {
  int exit_code;
  std::string output;
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(EMOCAT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  std::string out;
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe)) out += buf;
  int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "emocat-cli-tests";
  fs::create_directories(dir);
  return dir;
}

std::string tiny_config_file() {
  fs::path path = scratch_dir() / "tiny.ini";
  std::ofstream os(path);
  os << "[corpus]\n"
        "neutral_a = 14\nemotional_a = 18\nneutral_b = 16\nemotional_b = 12\n"
        "t_min = 10\nt_max = 16\nfeature_dim = 16\n"
        "[model]\n"
        "bottleneck_dim = 4\nencoder_channels = 6\nphoneme_embedding_dim = 4\n"
        "phoneme_channels = 4\ndecoder_channels = 6\ndecoder_kernel = 3\n"
        "decoder_lstm_hidden = 6\nclassifier_hidden = 6\n"
        "[train]\n"
        "main_steps = 12\nfine_tune_steps = 3\nbatch_size = 2\nholdout_neutral = 3\n"
        "[probe]\n"
        "steps = 25\nbatch_size = 2\neval_per_class = 1\n";
  return path.string();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool dirs_byte_identical(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> rel_a, rel_b;
  for (auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  for (auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) return false;
  for (const auto& rel : rel_a)
    if (read_file(a / rel) != read_file(b / rel)) return false;
  return true;
}

TEST(Cli, HelpExitsZeroAndListsFlags) {
  CmdResult r = run_cli("--help");
  EXPECT_EQ(r.exit_code, 0);
  for (const char* sub :
       {"synth-data", "train", "fine-tune", "convert", "probe", "eval", "gradcheck", "ablate"})
    EXPECT_NE(r.output.find(sub), std::string::npos) << sub << "\n" << r.output;
  CmdResult t = run_cli("train --help");
  EXPECT_EQ(t.exit_code, 0);
  for (const char* flag : {"--config", "--seed", "--in", "--out", "--steps", "--transform",
                           "--lambda", "--classifier"})
    EXPECT_NE(t.output.find(flag), std::string::npos) << flag << "\n" << t.output;
  EXPECT_NE(t.output.find("inv-sq"), std::string::npos);  // default documented
}

TEST(Cli, UnknownSubcommandExitsTwo) {
  EXPECT_EQ(run_cli("frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli("train --no-such-flag x").exit_code, 2);
  EXPECT_EQ(run_cli("").exit_code, 2);
}

TEST(Cli, SynthDataIsByteIdenticalAcrossRuns) {
  fs::path a = scratch_dir() / "corpus-a";
  fs::path b = scratch_dir() / "corpus-b";
  fs::remove_all(a);
  fs::remove_all(b);
  std::string cfg = tiny_config_file();
  ASSERT_EQ(run_cli("synth-data --seed 7 --config " + cfg + " --out " + a.string()).exit_code, 0);
  ASSERT_EQ(run_cli("synth-data --seed 7 --config " + cfg + " --out " + b.string()).exit_code, 0);
  EXPECT_TRUE(dirs_byte_identical(a, b));
  fs::remove_all(b);
  // a different seed changes the corpus
  ASSERT_EQ(run_cli("synth-data --seed 8 --config " + cfg + " --out " + b.string()).exit_code, 0);
  EXPECT_FALSE(dirs_byte_identical(a, b));
}

TEST(Cli, TrainConvertProbeEvalPipeline) {
  fs::path dir = scratch_dir();
  fs::path corpus = dir / "corpus-pipe";
  fs::path run = dir / "run-pipe";
  fs::remove_all(corpus);
  fs::remove_all(run);
  std::string cfg = tiny_config_file();

  ASSERT_EQ(run_cli("synth-data --seed 7 --config " + cfg + " --out " + corpus.string())
                .exit_code,
            0);
  CmdResult tr = run_cli("train --in " + corpus.string() + " --out " + run.string() +
                         " --config " + cfg + " --steps 12");
  ASSERT_EQ(tr.exit_code, 0) << tr.output;
  EXPECT_TRUE(fs::exists(run / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(run / "metrics.csv"));
  EXPECT_TRUE(fs::exists(run / "effective-config.ini"));
  {
    std::ifstream metrics(run / "metrics.csv");
    std::string header;
    std::getline(metrics, header);
    EXPECT_EQ(header, "step,l1,kl,adv_ce,total");
  }

  // convert a held-out feature file
  auto records = load_corpus(corpus.string());
  std::string in_emf = (corpus / "features" / (records[0].id + ".emf")).string();
  fs::path out_emf = dir / "converted.emf";
  CmdResult conv = run_cli("convert --ckpt " + (run / "checkpoint.bin").string() + " --in " +
                           in_emf + " --target disappointed:low --out " + out_emf.string());
  ASSERT_EQ(conv.exit_code, 0) << conv.output;
  Tensor converted = read_features(out_emf.string());
  EXPECT_EQ(converted.shape, records[0].features.shape);

  CmdResult bad_target = run_cli("convert --ckpt " + (run / "checkpoint.bin").string() +
                                 " --in " + in_emf + " --target angry:low --out " +
                                 out_emf.string());
  EXPECT_EQ(bad_target.exit_code, 1);

  CmdResult probe = run_cli("probe --ckpt " + (run / "checkpoint.bin").string() + " --in " +
                            corpus.string() + " --out " + (dir / "probe-pipe").string() +
                            " --classifier ff --steps 20");
  ASSERT_EQ(probe.exit_code, 0) << probe.output;
  EXPECT_TRUE(fs::exists(dir / "probe-pipe" / "probe-report.json"));

  CmdResult ev = run_cli("eval --ckpt " + (run / "checkpoint.bin").string() + " --in " +
                         corpus.string() + " --out " + (dir / "eval-pipe").string());
  ASSERT_EQ(ev.exit_code, 0) << ev.output;
  EXPECT_TRUE(fs::exists(dir / "eval-pipe" / "conversion-report.json"));

  CmdResult ft = run_cli("fine-tune --ckpt " + (run / "checkpoint.bin").string() + " --in " +
                         corpus.string() + " --out " + (dir / "ft-pipe").string() +
                         " --steps 3");
  ASSERT_EQ(ft.exit_code, 0) << ft.output;
  EXPECT_TRUE(fs::exists(dir / "ft-pipe" / "checkpoint.bin"));
}

TEST(Cli, TrainRunsAreByteIdentical) {
  fs::path dir = scratch_dir();
  fs::path corpus = dir / "corpus-repro";
  std::string cfg = tiny_config_file();
  if (!fs::exists(corpus))
    ASSERT_EQ(
        run_cli("synth-data --seed 7 --config " + cfg + " --out " + corpus.string()).exit_code,
        0);
  fs::path r1 = dir / "run-repro-1";
  fs::path r2 = dir / "run-repro-2";
  fs::remove_all(r1);
  fs::remove_all(r2);
  ASSERT_EQ(run_cli("train --in " + corpus.string() + " --out " + r1.string() + " --config " +
                    cfg + " --steps 6")
                .exit_code,
            0);
  ASSERT_EQ(run_cli("train --in " + corpus.string() + " --out " + r2.string() + " --config " +
                    cfg + " --steps 6")
                .exit_code,
            0);
  EXPECT_TRUE(dirs_byte_identical(r1, r2));
}

TEST(Cli, GradcheckSubcommandPasses) {
  CmdResult r = run_cli("gradcheck");
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("all gradient checks passed"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyRejected) {
  fs::path bad = scratch_dir() / "bad.ini";
  std::ofstream(bad) << "[corpus]\nbogus_key = 1\n";
  CmdResult r = run_cli("synth-data --config " + bad.string() + " --out " +
                        (scratch_dir() / "never").string());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("bogus_key"), std::string::npos);
}

}  // namespace
}  // namespace emocat
