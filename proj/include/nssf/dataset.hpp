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

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nssf/scene.hpp"
#include "nssf/threading.hpp"
#include "nssf/wav.hpp"

namespace nssf {

// On-disk layout per example directory ex_<idx>:
//   input.wav          3-channel mixture X
//   image_q<q>.wav     3-channel reverberant image D_q
//   dry_q<q>.wav       mono dry source s_q
//   meta.json          geometry, timeline, seeds
// plus manifest.json at the dataset root.

struct DatasetSpec {
  std::string scenario = "2spk2pos";
  int count = 0;
  std::uint64_t seed = 0;
  double noise_snr_db = 30.0;
  std::string out_dir;  // dataset root, e.g. data/2spk2pos
};

namespace dataset_detail {

using nlohmann::json;

inline json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
inline Vec3 vec3_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline json timeline_json(const ActivityTimeline& tl) {
  json segs = json::array();
  for (const auto& s : tl.segments)
    segs.push_back({{"start_s", s.start_s},
                    {"end_s", s.end_s},
                    {"active", active_name(s.active)}});
  return segs;
}

inline ActivityTimeline timeline_from(const json& j) {
  ActivityTimeline tl;
  for (const auto& s : j)
    tl.segments.push_back({s.at("start_s").get<double>(),
                           s.at("end_s").get<double>(),
                           active_from_name(s.at("active").get<std::string>())});
  return tl;
}

inline json meta_json(const SceneExample& ex, int index,
                      std::uint64_t dataset_seed) {
  json meta;
  meta["scenario"] = ex.scenario;
  meta["index"] = index;
  meta["seed"] = dataset_seed;
  meta["noise_snr_db"] = ex.noise_snr_db;
  meta["sample_rate"] = kDefaultSampleRate;
  meta["duration_s"] = kSequenceSeconds;
  meta["source_gain"] = 1.0;
  meta["room"] = {{"length", ex.geometry.room.length},
                  {"width", ex.geometry.room.width},
                  {"height", ex.geometry.room.height},
                  {"t60", ex.geometry.room.t60}};
  json mics = json::array();
  for (const auto& p : ex.geometry.array.mic_positions)
    mics.push_back(vec3_json(p));
  meta["array"] = {{"center", vec3_json(ex.geometry.array.center)},
                   {"axis", vec3_json(ex.geometry.array.axis)},
                   {"spacing", ex.geometry.array.spacing},
                   {"mic_positions", mics}};
  json sources = json::array();
  for (std::size_t q = 0; q < ex.geometry.sources.size(); ++q)
    sources.push_back({{"speaker_id", ex.speaker_ids[q]},
                       {"position", vec3_json(ex.geometry.sources[q].position)},
                       {"doa_deg", ex.geometry.sources[q].doa_deg}});
  meta["sources"] = sources;
  meta["timeline"] = timeline_json(ex.timeline);
  meta["desired"] = ex.desired;
  return meta;
}

inline std::string example_dirname(int index) {
  std::ostringstream os;
  os << "ex_" << std::setw(4) << std::setfill('0') << index;
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
}

inline json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  return json::parse(f);
}

}  // namespace dataset_detail

inline void write_example(const std::string& dir, const SceneExample& ex,
                          int index, std::uint64_t dataset_seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_wav(dir + "/input.wav", ex.input);
  for (std::size_t q = 0; q < ex.images.size(); ++q)
    write_wav(dir + "/image_q" + std::to_string(q + 1) + ".wav", ex.images[q]);
  for (std::size_t q = 0; q < ex.dry.size(); ++q)
    write_wav(dir + "/dry_q" + std::to_string(q + 1) + ".wav", ex.dry[q]);
  dataset_detail::write_text(
      dir + "/meta.json",
      dataset_detail::meta_json(ex, index, dataset_seed).dump(2) + "\n");
}

// Renders `spec.count` scenes into spec.out_dir. Each example derives its
// own rng stream from (seed, index), so generation parallelizes without
// changing any output byte.
inline std::string generate_dataset(const DatasetSpec& spec,
                                    const UtterancePool& pool,
                                    int max_workers = 0) {
  namespace fs = std::filesystem;
  using dataset_detail::json;
  const Scenario scenario = parse_scenario(spec.scenario);
  fs::create_directories(spec.out_dir);

  const Rng root(spec.seed);
  std::vector<json> metas(spec.count);
  parallel_for(
      spec.count,
      [&](int i) {
        Rng rng = root.derive(1, i);
        SceneSpec scene = build_scene(scenario, pool, rng, i);
        Rng noise_rng = root.derive(2, i);
        SceneExample ex = render_sequence(scene, spec.noise_snr_db, noise_rng);
        const std::string dir =
            spec.out_dir + "/" + dataset_detail::example_dirname(i);
        write_example(dir, ex, i, spec.seed);
        json m;
        m["dir"] = dataset_detail::example_dirname(i);
        json doas = json::array(), speakers = json::array();
        for (std::size_t q = 0; q < ex.geometry.sources.size(); ++q) {
          doas.push_back(ex.geometry.sources[q].doa_deg);
          speakers.push_back(ex.speaker_ids[q]);
        }
        m["doas"] = doas;
        m["speakers"] = speakers;
        m["segments"] = dataset_detail::timeline_json(ex.timeline);
        metas[i] = std::move(m);
      },
      max_workers);

  json manifest;
  manifest["scenario"] = spec.scenario;
  manifest["count"] = spec.count;
  manifest["seed"] = spec.seed;
  manifest["noise_snr_db"] = spec.noise_snr_db;
  manifest["sample_rate"] = kDefaultSampleRate;
  json examples = json::array();
  for (auto& m : metas) examples.push_back(std::move(m));
  manifest["examples"] = examples;
  const std::string manifest_path = spec.out_dir + "/manifest.json";
  dataset_detail::write_text(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

// Reloads one example directory. Waveforms come back float32-rounded, which
// is the precision contract of the on-disk format.
inline SceneExample load_example(const std::string& dir) {
  namespace fs = std::filesystem;
  using dataset_detail::json;
  if (!fs::exists(dir + "/meta.json"))
    throw DatasetError("missing meta.json in " + dir);
  const json meta = dataset_detail::read_json(dir + "/meta.json");

  SceneExample ex;
  ex.scenario = meta.at("scenario").get<std::string>();
  ex.noise_snr_db = meta.at("noise_snr_db").get<double>();
  ex.timeline = dataset_detail::timeline_from(meta.at("timeline"));
  ex.desired = meta.at("desired").get<std::vector<int>>();
  ex.geometry.room.length = meta.at("room").at("length").get<double>();
  ex.geometry.room.width = meta.at("room").at("width").get<double>();
  ex.geometry.room.height = meta.at("room").at("height").get<double>();
  ex.geometry.room.t60 = meta.at("room").at("t60").get<double>();
  const json& arr = meta.at("array");
  ex.geometry.array.center = dataset_detail::vec3_from(arr.at("center"));
  ex.geometry.array.axis = dataset_detail::vec3_from(arr.at("axis"));
  ex.geometry.array.spacing = arr.at("spacing").get<double>();
  for (const auto& p : arr.at("mic_positions"))
    ex.geometry.array.mic_positions.push_back(dataset_detail::vec3_from(p));
  for (const auto& s : meta.at("sources")) {
    SourcePlacement sp;
    sp.position = dataset_detail::vec3_from(s.at("position"));
    sp.doa_deg = s.at("doa_deg").get<double>();
    ex.geometry.sources.push_back(sp);
    ex.speaker_ids.push_back(s.at("speaker_id").get<std::string>());
  }

  ex.input = read_wav(dir + "/input.wav");
  const int num_sources = static_cast<int>(ex.geometry.sources.size());
  for (int q = 1; q <= num_sources; ++q) {
    const std::string img = dir + "/image_q" + std::to_string(q) + ".wav";
    const std::string dry = dir + "/dry_q" + std::to_string(q) + ".wav";
    if (!fs::exists(img) || !fs::exists(dry))
      throw DatasetError("missing source files in " + dir);
    ex.images.push_back(read_wav(img));
    MultichannelAudio d = read_wav(dry);
    AudioSignal a;
    a.sample_rate = d.sample_rate;
    a.samples = std::move(d.channels.at(0));
    ex.dry.push_back(std::move(a));
  }
  return ex;
}

// Example directories listed in a dataset manifest, in index order.
inline std::vector<std::string> dataset_example_dirs(const std::string& root) {
  using dataset_detail::json;
  const json manifest = dataset_detail::read_json(root + "/manifest.json");
  std::vector<std::string> dirs;
  for (const auto& e : manifest.at("examples"))
    dirs.push_back(root + "/" + e.at("dir").get<std::string>());
  return dirs;
}

}  // namespace nssf
