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

// Command-line entry point: corpus generation, the two training stages,
// conversion, leakage probing, objective evaluation, gradient checking, and
// the three-system ablation harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "emocat/checkpoint.hpp"
#include "emocat/config.hpp"
#include "emocat/corpus.hpp"
#include "emocat/eval.hpp"
#include "emocat/gradcheck_suite.hpp"
#include "emocat/log.hpp"
#include "emocat/probe.hpp"
#include "emocat/train.hpp"

namespace fs = std::filesystem;
using namespace emocat;

namespace {

struct FlagSet {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> ckpt;
  std::optional<std::string> in;
  std::optional<std::string> target;
  std::optional<std::size_t> steps;
  std::optional<std::string> transform;
  std::optional<double> lambda;
  std::optional<std::string> classifier;
};

void add_common_flags(CLI::App* cmd, FlagSet& flags, bool with_seed = true) {
  cmd->add_option("--config", flags.config_path, "config file (key = value sections)");
  if (with_seed)
    cmd->add_option("--seed", flags.seed, "seed for corpus generation and training (default 7)");
}

/// Applies the corpus section echoed into a corpus directory, so downstream
/// stages agree with the data they load.
void apply_corpus_dir_config(RunConfig& cfg, const std::string& corpus_dir) {
  fs::path echo = fs::path(corpus_dir) / "effective-config.ini";
  if (!fs::exists(echo)) return;
  RunConfig generated;
  generated.load_file(echo.string());
  for (const ConfigEntry& e : config_defaults()) {
    std::string key = e.key;
    if (key.rfind("corpus.", 0) == 0) cfg.set(key, generated.get(key));
  }
}

void apply_flags(RunConfig& cfg, const FlagSet& flags, const std::string& subcommand) {
  if (flags.config_path) cfg.load_file(*flags.config_path);
  if (flags.seed) {
    cfg.set("corpus.seed", std::to_string(*flags.seed));
    cfg.set("train.seed", std::to_string(*flags.seed));
  }
  if (flags.transform) cfg.set("transform.kind", *flags.transform);
  if (flags.lambda) cfg.set("transform.lambda", std::to_string(*flags.lambda));
  if (flags.classifier) {
    if (subcommand == "probe")
      cfg.set("probe.kind", *flags.classifier);
    else
      cfg.set("model.classifier_kind", *flags.classifier);
  }
  if (flags.steps) {
    if (subcommand == "probe")
      cfg.set("probe.steps", std::to_string(*flags.steps));
    else if (subcommand == "fine-tune")
      cfg.set("train.fine_tune_steps", std::to_string(*flags.steps));
    else
      cfg.set("train.main_steps", std::to_string(*flags.steps));
  }
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "effective-config.ini");
  os << cfg.to_ini_text();
}

void write_metrics_csv(const std::string& out_dir, const std::vector<StepMetrics>& metrics) {
  std::ofstream os(fs::path(out_dir) / "metrics.csv");
  os << kMetricsCsvHeader << "\n";
  for (const StepMetrics& m : metrics) write_metrics_row(os, m);
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream os(path);
  os << j.dump(2) << "\n";
}

StepCallback progress_logger(const std::string& stage) {
  return [stage](const StepMetrics& m) {
    if (m.step % 500 == 0)
      log_info(stage + " step " + std::to_string(m.step) + ": l1=" + std::to_string(m.l1) +
               " kl=" + std::to_string(m.kl) + " adv_ce=" + std::to_string(m.adv_ce));
    else if (m.step % 50 == 0)
      log_debug(stage + " step " + std::to_string(m.step) + ": total=" + std::to_string(m.total));
  };
}

int run_synth_data(const FlagSet& flags) {
  RunConfig cfg;
  apply_flags(cfg, flags, "synth-data");
  if (!flags.out) throw std::runtime_error("synth-data: --out DIR is required");
  CorpusSpec spec = cfg.corpus_spec();
  log_info("generating corpus (seed " + std::to_string(spec.seed) + ")");
  auto corpus = generate_corpus(spec);
  save_corpus(corpus, *flags.out);
  echo_config(cfg, *flags.out);
  log_info("wrote " + std::to_string(corpus.size()) + " utterances to " + *flags.out);
  return 0;
}

int run_train(const FlagSet& flags) {
  RunConfig cfg;
  if (!flags.in) throw std::runtime_error("train: --in CORPUS_DIR is required");
  if (!flags.out) throw std::runtime_error("train: --out DIR is required");
  apply_corpus_dir_config(cfg, *flags.in);
  apply_flags(cfg, flags, "train");
  auto corpus = load_corpus(*flags.in);
  log_info("loaded " + std::to_string(corpus.size()) + " utterances");
  TrainOutcome outcome = train(cfg.emocat_config(), cfg.train_plan(), corpus,
                               progress_logger("train"));
  echo_config(cfg, *flags.out);
  write_metrics_csv(*flags.out, outcome.metrics);
  save_checkpoint((fs::path(*flags.out) / "checkpoint.bin").string(), outcome.state, cfg);
  if (outcome.diverged) {
    log_error("training diverged at step " + std::to_string(outcome.diverged_at_step) +
              "; last-good checkpoint saved");
    return 1;
  }
  log_info("checkpoint written to " + (fs::path(*flags.out) / "checkpoint.bin").string());
  return 0;
}

int run_fine_tune(const FlagSet& flags) {
  if (!flags.ckpt) throw std::runtime_error("fine-tune: --ckpt PATH is required");
  if (!flags.in) throw std::runtime_error("fine-tune: --in CORPUS_DIR is required");
  if (!flags.out) throw std::runtime_error("fine-tune: --out DIR is required");
  LoadedCheckpoint loaded = load_checkpoint(*flags.ckpt);
  RunConfig cfg = loaded.config;
  apply_flags(cfg, flags, "fine-tune");
  auto corpus = load_corpus(*flags.in);
  TrainOutcome outcome = fine_tune(std::move(loaded.state), cfg.train_plan(), corpus,
                                   progress_logger("fine-tune"));
  echo_config(cfg, *flags.out);
  write_metrics_csv(*flags.out, outcome.metrics);
  save_checkpoint((fs::path(*flags.out) / "checkpoint.bin").string(), outcome.state, cfg);
  if (outcome.diverged) {
    log_error("fine-tuning diverged at step " + std::to_string(outcome.diverged_at_step));
    return 1;
  }
  return 0;
}

int run_convert(const FlagSet& flags) {
  if (!flags.ckpt) throw std::runtime_error("convert: --ckpt PATH is required");
  if (!flags.in) throw std::runtime_error("convert: --in FEATURES.emf is required");
  if (!flags.out) throw std::runtime_error("convert: --out FEATURES.emf is required");
  if (!flags.target)
    throw std::runtime_error("convert: --target CLASS:INTENSITY is required");
  LoadedCheckpoint loaded = load_checkpoint(*flags.ckpt);
  auto [cls, inten] = parse_label_key(*flags.target);
  UtteranceRecord rec = find_record_for_feature_file(*flags.in);
  Tensor out = convert(loaded.state, rec, cls, inten);
  write_features(*flags.out, out);
  log_info("converted " + rec.id + " -> " + *flags.target + " (" + out.shape_str() + ")");
  return 0;
}

int run_probe(const FlagSet& flags) {
  if (!flags.ckpt) throw std::runtime_error("probe: --ckpt PATH is required");
  if (!flags.in) throw std::runtime_error("probe: --in CORPUS_DIR is required");
  if (!flags.out) throw std::runtime_error("probe: --out DIR is required");
  LoadedCheckpoint loaded = load_checkpoint(*flags.ckpt);
  RunConfig cfg = loaded.config;
  apply_flags(cfg, flags, "probe");
  auto corpus = load_corpus(*flags.in);
  ProbePlan plan = cfg.probe_plan();
  log_info("probing with " + std::string(to_string(plan.kind)) + " classifier, " +
           std::to_string(plan.steps) + " steps");
  ProbeReport report = probe_leakage(*loaded.state.model, corpus, plan.kind, plan);
  echo_config(cfg, *flags.out);
  write_json((fs::path(*flags.out) / "probe-report.json").string(), report.to_json());
  log_info("probe accuracy " + std::to_string(report.accuracy) + " (majority baseline " +
           std::to_string(report.majority_class_baseline) + ", majority prediction rate " +
           std::to_string(report.majority_prediction_rate) + ")");
  return 0;
}

int run_eval(const FlagSet& flags) {
  if (!flags.ckpt) throw std::runtime_error("eval: --ckpt PATH is required");
  if (!flags.in) throw std::runtime_error("eval: --in CORPUS_DIR is required");
  if (!flags.out) throw std::runtime_error("eval: --out DIR is required");
  LoadedCheckpoint loaded = load_checkpoint(*flags.ckpt);
  RunConfig cfg = loaded.config;
  apply_flags(cfg, flags, "eval");
  auto corpus = load_corpus(*flags.in);
  auto [train_idx, holdout_idx] = split_holdout(corpus, cfg.train_plan().holdout_neutral);
  (void)train_idx;
  ConversionReport report =
      eval_conversion(loaded.state, corpus, holdout_idx, cfg.corpus_spec());
  echo_config(cfg, *flags.out);
  write_json((fs::path(*flags.out) / "conversion-report.json").string(), report.to_json());
  log_info("medium/high conversion accuracy " + std::to_string(report.medium_high_accuracy));
  return 0;
}

int run_gradcheck() {
  auto cases = run_gradcheck_suite(10);
  bool ok = true;
  for (const auto& c : cases) {
    bool pass = c.max_rel_err <= 1e-4;
    ok = ok && pass;
    std::printf("%-26s max_rel_err=%.3e  %s\n", c.name.c_str(), c.max_rel_err,
                pass ? "ok" : "FAIL");
  }
  std::printf("%s\n", ok ? "all gradient checks passed" : "gradient checks FAILED");
  return ok ? 0 : 1;
}

int run_ablate(const FlagSet& flags) {
  RunConfig cfg;
  if (!flags.in) throw std::runtime_error("ablate: --in CORPUS_DIR is required");
  if (!flags.out) throw std::runtime_error("ablate: --out DIR is required");
  apply_corpus_dir_config(cfg, *flags.in);
  apply_flags(cfg, flags, "ablate");
  auto corpus = load_corpus(*flags.in);
  log_info("running 3-system ablation (this trains " +
           std::to_string(cfg.train_plan().main_steps) + " steps twice)");
  auto results = run_ablation(cfg.emocat_config(), cfg.train_plan(), corpus, cfg.corpus_spec(),
                              cfg.probe_plan());
  echo_config(cfg, *flags.out);
  for (const auto& r : results) {
    fs::path dir = fs::path(*flags.out) / r.name;
    fs::create_directories(dir);
    write_metrics_csv(dir.string(), r.metrics);
    save_checkpoint((dir / "checkpoint.bin").string(), r.state, cfg);
    write_json((dir / "probe-report.json").string(), r.probe.to_json());
    write_json((dir / "conversion-report.json").string(), r.conversion.to_json());
  }
  std::string table = ablation_table(results);
  std::ofstream md(fs::path(*flags.out) / "ablation.md");
  md << table;
  write_json((fs::path(*flags.out) / "ablation.json").string(), ablation_json(results));
  std::printf("%s", table.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emocat: desk-scale emotional conversion with gradient-inverter adversarial "
               "training"};
  app.require_subcommand(1);

  FlagSet synth_flags, train_flags, ft_flags, convert_flags, probe_flags, eval_flags,
      ablate_flags;

  CLI::App* synth = app.add_subcommand("synth-data", "generate the synthetic corpus");
  add_common_flags(synth, synth_flags);
  synth->add_option("--out", synth_flags.out, "output corpus directory")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "main training stage");
  add_common_flags(train_cmd, train_flags);
  train_cmd->add_option("--in", train_flags.in, "corpus directory")->required();
  train_cmd->add_option("--out", train_flags.out, "output run directory")->required();
  train_cmd->add_option("--steps", train_flags.steps, "main training steps (default 5000)");
  train_cmd->add_option("--transform", train_flags.transform,
                        "gradient transform: identity|reversal|inv-sq|inv-exp (default inv-sq)");
  train_cmd->add_option("--lambda", train_flags.lambda, "transform weight (default 1.0)");
  train_cmd->add_option("--classifier", train_flags.classifier,
                        "adversarial classifier: ff|gru (default ff)");

  CLI::App* ft = app.add_subcommand("fine-tune", "continue training on the emotional subset");
  add_common_flags(ft, ft_flags);
  ft->add_option("--ckpt", ft_flags.ckpt, "input checkpoint")->required();
  ft->add_option("--in", ft_flags.in, "corpus directory")->required();
  ft->add_option("--out", ft_flags.out, "output run directory")->required();
  ft->add_option("--steps", ft_flags.steps, "fine-tune steps (default 100)");

  CLI::App* conv = app.add_subcommand("convert", "convert one utterance to a target emotion");
  add_common_flags(conv, convert_flags, /*with_seed=*/false);
  conv->add_option("--ckpt", convert_flags.ckpt, "checkpoint")->required();
  conv->add_option("--in", convert_flags.in, "input feature file (.emf)")->required();
  conv->add_option("--target", convert_flags.target,
                   "target class, e.g. excited:high or neutral")->required();
  conv->add_option("--out", convert_flags.out, "output feature file")->required();

  CLI::App* probe = app.add_subcommand("probe", "train a leakage probe on a frozen checkpoint");
  add_common_flags(probe, probe_flags);
  probe->add_option("--ckpt", probe_flags.ckpt, "checkpoint")->required();
  probe->add_option("--in", probe_flags.in, "corpus directory")->required();
  probe->add_option("--out", probe_flags.out, "output directory")->required();
  probe->add_option("--steps", probe_flags.steps, "probe training steps (default 2000)");
  probe->add_option("--classifier", probe_flags.classifier, "probe kind: ff|gru (default gru)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "objective conversion evaluation");
  add_common_flags(eval_cmd, eval_flags);
  eval_cmd->add_option("--ckpt", eval_flags.ckpt, "checkpoint")->required();
  eval_cmd->add_option("--in", eval_flags.in, "corpus directory")->required();
  eval_cmd->add_option("--out", eval_flags.out, "output directory")->required();

  app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");

  CLI::App* ablate = app.add_subcommand("ablate", "run the three-system ablation");
  add_common_flags(ablate, ablate_flags);
  ablate->add_option("--in", ablate_flags.in, "corpus directory")->required();
  ablate->add_option("--out", ablate_flags.out, "output directory")->required();
  ablate->add_option("--steps", ablate_flags.steps, "main steps per system");
  ablate->add_option("--transform", ablate_flags.transform,
                     "inverter kind for systems 2-3: inv-sq|inv-exp");
  ablate->add_option("--lambda", ablate_flags.lambda, "transform weight");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // unknown subcommand/flag or bad usage
  }

  try {
    if (synth->parsed()) return run_synth_data(synth_flags);
    if (train_cmd->parsed()) return run_train(train_flags);
    if (ft->parsed()) return run_fine_tune(ft_flags);
    if (conv->parsed()) return run_convert(convert_flags);
    if (probe->parsed()) return run_probe(probe_flags);
    if (eval_cmd->parsed()) return run_eval(eval_flags);
    if (app.get_subcommand("gradcheck")->parsed()) return run_gradcheck();
    if (ablate->parsed()) return run_ablate(ablate_flags);
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
  return 2;
}
