/* Copyright 2026 The nssf Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "nssf/autodiff.hpp"
#include "nssf/errors.hpp"

namespace nssf {

// Checkpoint file: parameter paths mapped to shape + little-endian float64
// payloads, preceded by a JSON manifest of architecture hyperparameters.
//
//   "NSSFCKP1" | u32 manifest_len | manifest | u32 nparams
//   per param: u16 name_len | name | u32 rows | u32 cols | f64 data...

namespace ckpt_detail {

template <typename T>
void put(std::ofstream& f, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw IoError("checkpoint: truncated file");
  return v;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, const ad::Params& params,
                            const nlohmann::json& manifest) {
  using namespace ckpt_detail;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write("NSSFCKP1", 8);
  const std::string m = manifest.dump();
  put<std::uint32_t>(f, static_cast<std::uint32_t>(m.size()));
  f.write(m.data(), static_cast<std::streamsize>(m.size()));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {  // std::map: sorted, deterministic
    put<std::uint16_t>(f, static_cast<std::uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(t.rows));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(t.cols));
    f.write(reinterpret_cast<const char*>(t.v.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!f) throw IoError("short write to " + path);
}

inline std::pair<ad::Params, nlohmann::json> load_checkpoint(
    const std::string& path) {
  using namespace ckpt_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "NSSFCKP1", 8) != 0)
    throw UnsupportedFormat(path + " is not a checkpoint");
  const auto mlen = get<std::uint32_t>(f);
  std::string mstr(mlen, '\0');
  f.read(mstr.data(), mlen);
  if (!f) throw IoError("checkpoint: truncated manifest");
  nlohmann::json manifest = nlohmann::json::parse(mstr);
  const auto count = get<std::uint32_t>(f);
  ad::Params params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto nlen = get<std::uint16_t>(f);
    std::string name(nlen, '\0');
    f.read(name.data(), nlen);
    const auto rows = get<std::uint32_t>(f);
    const auto cols = get<std::uint32_t>(f);
    ad::Tensor t(rows, cols);
    f.read(reinterpret_cast<char*>(t.v.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!f) throw IoError("checkpoint: truncated payload for " + name);
    params.emplace(std::move(name), std::move(t));
  }
  return {std::move(params), std::move(manifest)};
}

}  // namespace nssf
