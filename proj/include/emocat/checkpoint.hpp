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

// Checkpoint file: versioned header, the effective configuration as embedded
// text, named (name, shape, float64 little-endian) parameter blocks, and the
// emotion centroids last.

#ifndef EMOCAT_CHECKPOINT_HPP_
#define EMOCAT_CHECKPOINT_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "emocat/config.hpp"
#include "emocat/net.hpp"

namespace emocat {

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void write_doubles(std::ostream& os, const std::vector<double>& d) {
  os.write(reinterpret_cast<const char*>(d.data()),
           static_cast<std::streamsize>(d.size() * sizeof(double)));
}

inline std::uint32_t read_u32(std::istream& is, const std::string& path, const char* what) {
  std::uint32_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (is.gcount() != sizeof(v))
    throw std::runtime_error("checkpoint '" + path + "': truncated while reading " + what);
  return v;
}
inline std::uint64_t read_u64(std::istream& is, const std::string& path, const char* what) {
  std::uint64_t v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (is.gcount() != sizeof(v))
    throw std::runtime_error("checkpoint '" + path + "': truncated while reading " + what);
  return v;
}
inline std::string read_string(std::istream& is, const std::string& path, const char* what) {
  std::uint64_t n = read_u64(is, path, what);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(is.gcount()) != n)
    throw std::runtime_error("checkpoint '" + path + "': truncated while reading " + what);
  return s;
}
inline void read_doubles(std::istream& is, std::vector<double>& d, const std::string& path,
                         const char* what) {
  is.read(reinterpret_cast<char*>(d.data()),
          static_cast<std::streamsize>(d.size() * sizeof(double)));
  if (static_cast<std::size_t>(is.gcount()) != d.size() * sizeof(double))
    throw std::runtime_error("checkpoint '" + path + "': truncated while reading " + what);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelState& state,
                            const RunConfig& config) {
  if (!state.model) throw std::invalid_argument("save_checkpoint: empty model state");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open '" + path + "'");
  os.write("EMC1", 4);
  detail::write_u32(os, 1);  // version
  detail::write_u64(os, state.step);
  detail::write_string(os, config.to_ini_text());
  const auto& params = state.model->params();
  detail::write_u64(os, params.size());
  for (const Param* p : params) {
    detail::write_string(os, p->name);
    detail::write_u32(os, static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t d : p->value.shape) detail::write_u64(os, d);
    detail::write_doubles(os, p->value.data);
  }
  detail::write_u64(os, state.centroids.size());
  for (const auto& [key, vec] : state.centroids) {
    detail::write_string(os, key);
    detail::write_u64(os, vec.numel());
    detail::write_doubles(os, vec.data);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

struct LoadedCheckpoint {
  RunConfig config;
  ModelState state;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != "EMC1")
    throw std::runtime_error("checkpoint '" + path + "': bad magic (expected EMC1)");
  std::uint32_t version = detail::read_u32(is, path, "version");
  if (version != 1)
    throw std::runtime_error("checkpoint '" + path + "': unsupported version " +
                             std::to_string(version));
  LoadedCheckpoint out;
  out.state.step = detail::read_u64(is, path, "step");
  std::string config_text = detail::read_string(is, path, "config");
  out.config.load_text(config_text, path + "#config");

  EmoCatConfig cfg = out.config.emocat_config();
  out.state.model = std::make_unique<EmoCat>(cfg, out.config.get_u64("train.seed"));

  std::map<std::string, Param*> by_name;
  for (Param* p : out.state.model->params()) by_name[p->name] = p;
  const std::uint64_t n_params = detail::read_u64(is, path, "param count");
  if (n_params != by_name.size())
    throw std::runtime_error("checkpoint '" + path + "': has " + std::to_string(n_params) +
                             " params, config implies " + std::to_string(by_name.size()));
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = detail::read_string(is, path, "param name");
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("checkpoint '" + path + "': unknown parameter '" + name + "'");
    std::uint32_t ndim = detail::read_u32(is, path, "param rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = detail::read_u64(is, path, "param dim");
    if (shape != it->second->value.shape)
      throw std::runtime_error("checkpoint '" + path + "': parameter '" + name + "' has shape " +
                               Tensor::shape_str(shape) + ", expected " +
                               it->second->value.shape_str());
    detail::read_doubles(is, it->second->value.data, path, name.c_str());
  }
  const std::uint64_t n_centroids = detail::read_u64(is, path, "centroid count");
  for (std::uint64_t i = 0; i < n_centroids; ++i) {
    std::string key = detail::read_string(is, path, "centroid key");
    std::uint64_t dim = detail::read_u64(is, path, "centroid dim");
    Tensor vec({static_cast<std::size_t>(dim)});
    detail::read_doubles(is, vec.data, path, "centroid data");
    out.state.centroids.emplace(std::move(key), std::move(vec));
  }
  return out;
}

}  // namespace emocat

#endif  // EMOCAT_CHECKPOINT_HPP_
