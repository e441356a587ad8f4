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

// Run configuration: a flat registry of section.key entries with defaults.
// Precedence: defaults < config file < command-line flags. Unknown keys are
// rejected, and the effective configuration is echoed verbatim into every
// output directory.

#ifndef EMOCAT_CONFIG_HPP_
#define EMOCAT_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "emocat/corpus.hpp"
#include "emocat/net.hpp"
#include "emocat/probe.hpp"
#include "emocat/train.hpp"

namespace emocat {

struct ConfigEntry {
  const char* key;
  const char* value;
};

inline const std::vector<ConfigEntry>& config_defaults() {
  static const std::vector<ConfigEntry> defaults = {
      {"corpus.seed", "7"},
      {"corpus.neutral_a", "400"},
      {"corpus.emotional_a", "200"},
      {"corpus.neutral_b", "570"},
      {"corpus.emotional_b", "30"},
      {"corpus.t_min", "40"},
      {"corpus.t_max", "120"},
      {"corpus.feature_dim", "80"},
      {"corpus.phoneme_vocab", "24"},
      {"corpus.signature_gain", "0.1"},
      {"corpus.noise_level", "0.02"},
      {"corpus.base_floor", "0.05"},
      {"corpus.embedding_jitter", "0.1"},
      {"model.bottleneck_rate", "4"},
      {"model.bottleneck_dim", "16"},
      {"model.emotion_embedding_dim", "64"},
      {"model.encoder_channels", "32"},
      {"model.encoder_kernel", "3"},
      {"model.phoneme_embedding_dim", "16"},
      {"model.phoneme_channels", "16"},
      {"model.decoder_channels", "32"},
      {"model.decoder_kernel", "5"},
      {"model.decoder_lstm_hidden", "32"},
      {"model.classifier_kind", "ff"},
      {"model.classifier_hidden", "32"},
      {"model.coarse_labels", "false"},
      {"model.weighted_adv_ce", "auto"},
      {"model.kl_beta", "0.001"},
      {"transform.kind", "inv-sq"},
      {"transform.lambda", "1.0"},
      {"transform.norm_floor", "1e-8"},
      {"transform.out_norm_cap", "1000.0"},
      {"transform.lambda_warmup_steps", "0"},
      {"train.main_steps", "5000"},
      {"train.fine_tune_steps", "100"},
      {"train.batch_size", "4"},
      {"train.learning_rate", "0.001"},
      {"train.optimizer", "adam"},
      {"train.holdout_neutral", "20"},
      {"train.fine_tune_language", "B"},
      {"train.seed", "7"},
      {"probe.steps", "2000"},
      {"probe.batch_size", "8"},
      {"probe.learning_rate", "0.003"},
      {"probe.hidden", "32"},
      {"probe.eval_per_class", "8"},
      {"probe.kind", "gru"},
  };
  return defaults;
}

class RunConfig {
 public:
  RunConfig() {
    for (const ConfigEntry& e : config_defaults()) values_[e.key] = e.value;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key))
      throw std::invalid_argument("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      throw std::invalid_argument("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t get_u64(const std::string& key) const {
    return parse_u64(key, get(key));
  }
  std::size_t get_size(const std::string& key) const {
    return static_cast<std::size_t>(get_u64(key));
  }
  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a number");
    }
  }
  bool get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a boolean");
  }

  /// Parses "[section]\nkey = value" text. Fully qualified "section.key"
  /// entries are accepted outside sections as well.
  void load_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                      ": malformed section header '" + s + "'");
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": expected 'key = value', got '" + s + "'");
      std::string key = trim(s.substr(0, eq));
      std::string value = trim(s.substr(eq + 1));
      if (key.find('.') == std::string::npos) {
        if (section.empty())
          throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": key '" + key +
                                      "' outside any [section]");
        key = section + "." + key;
      }
      try {
        set(key, value);
      } catch (const std::exception& e) {
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path);
  }

  /// Effective configuration as INI text, keys in registry order.
  std::string to_ini_text() const {
    std::ostringstream os;
    std::string section;
    for (const ConfigEntry& e : config_defaults()) {
      std::string key = e.key;
      std::string sec = key.substr(0, key.find('.'));
      std::string name = key.substr(key.find('.') + 1);
      if (sec != section) {
        if (!section.empty()) os << "\n";
        os << "[" << sec << "]\n";
        section = sec;
      }
      os << name << " = " << values_.at(key) << "\n";
    }
    return os.str();
  }

  // ---- typed views ------------------------------------------------------------

  CorpusSpec corpus_spec() const {
    CorpusSpec s;
    s.seed = get_u64("corpus.seed");
    s.neutral_a = get_size("corpus.neutral_a");
    s.emotional_a = get_size("corpus.emotional_a");
    s.neutral_b = get_size("corpus.neutral_b");
    s.emotional_b = get_size("corpus.emotional_b");
    s.t_min = get_size("corpus.t_min");
    s.t_max = get_size("corpus.t_max");
    s.feature_dim = get_size("corpus.feature_dim");
    s.phoneme_vocab = get_size("corpus.phoneme_vocab");
    s.signature_gain = get_double("corpus.signature_gain");
    s.noise_level = get_double("corpus.noise_level");
    s.base_floor = get_double("corpus.base_floor");
    s.embedding_jitter = get_double("corpus.embedding_jitter");
    s.validate();
    return s;
  }

  GradTransformSpec transform_spec() const {
    GradTransformSpec t;
    t.kind = transform_kind_from_string(get("transform.kind"));
    t.lambda = get_double("transform.lambda");
    t.norm_floor = get_double("transform.norm_floor");
    t.out_norm_cap = get_double("transform.out_norm_cap");
    t.validate();
    return t;
  }

  EmoCatConfig emocat_config() const {
    EmoCatConfig c;
    c.feature_dim = get_size("corpus.feature_dim");
    c.emotion_embedding_dim = get_size("model.emotion_embedding_dim");
    c.bottleneck_rate = get_size("model.bottleneck_rate");
    c.bottleneck_dim = get_size("model.bottleneck_dim");
    c.encoder_channels = get_size("model.encoder_channels");
    c.encoder_kernel = get_size("model.encoder_kernel");
    c.phoneme_vocab = 2 * get_size("corpus.phoneme_vocab");
    c.phoneme_embedding_dim = get_size("model.phoneme_embedding_dim");
    c.phoneme_channels = get_size("model.phoneme_channels");
    c.decoder_channels = get_size("model.decoder_channels");
    c.decoder_kernel = get_size("model.decoder_kernel");
    c.decoder_lstm_hidden = get_size("model.decoder_lstm_hidden");
    c.classifier_kind = classifier_kind_from_string(get("model.classifier_kind"));
    c.classifier_hidden = get_size("model.classifier_hidden");
    c.coarse_labels = get_bool("model.coarse_labels");
    c.kl_beta = get_double("model.kl_beta");
    c.lambda_warmup_steps = get_size("transform.lambda_warmup_steps");
    c.grad_transform = transform_spec();
    const std::string& weighted = get("model.weighted_adv_ce");
    if (weighted == "auto")
      c.weighted_adv_ce = c.grad_transform.kind == TransformKind::kReversal;
    else
      c.weighted_adv_ce = get_bool("model.weighted_adv_ce");
    c.validate();
    return c;
  }

  TrainPlan train_plan() const {
    TrainPlan p;
    p.main_steps = get_size("train.main_steps");
    p.fine_tune_steps = get_size("train.fine_tune_steps");
    p.batch_size = get_size("train.batch_size");
    p.learning_rate = get_double("train.learning_rate");
    p.optimizer = get("train.optimizer");
    p.holdout_neutral = get_size("train.holdout_neutral");
    p.fine_tune_language = language_from_string(get("train.fine_tune_language"));
    p.seed = get_u64("train.seed");
    p.validate();
    return p;
  }

  ProbePlan probe_plan() const {
    ProbePlan p;
    p.steps = get_size("probe.steps");
    p.batch_size = get_size("probe.batch_size");
    p.learning_rate = get_double("probe.learning_rate");
    p.hidden = get_size("probe.hidden");
    p.eval_per_class = get_size("probe.eval_per_class");
    p.seed = get_u64("train.seed");
    p.kind = classifier_kind_from_string(get("probe.kind"));
    return p;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  static std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      unsigned long long v = std::stoull(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw std::invalid_argument("config key '" + key + "': '" + s +
                                  "' is not an unsigned integer");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace emocat

#endif  // EMOCAT_CONFIG_HPP_
