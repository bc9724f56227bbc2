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

#include <limits>
#include <string>
#include <vector>

#include "nssf/audio.hpp"
#include "nssf/corpus.hpp"
#include "nssf/errors.hpp"
#include "nssf/fft.hpp"
#include "nssf/geometry.hpp"
#include "nssf/rir.hpp"
#include "nssf/rng.hpp"
#include "nssf/timeline.hpp"

namespace nssf {

// Two-speaker scene construction. Six dataset variants: the spatially
// unconstrained family (2spk2pos, plus the 2spk1pos / 1spk2pos controls)
// and the constrained "-1fix" family with the target fixed at 90 degrees.

constexpr double kSequenceSeconds = 7.0;
constexpr double kMinDoaSeparationDeg = 15.0;
constexpr double kTargetDoaDeg = 90.0;

enum class ScenarioKind { k2spk2pos, k2spk1pos, k1spk2pos };

struct Scenario {
  ScenarioKind kind = ScenarioKind::k2spk2pos;
  bool constrained = false;  // "-1fix": one source fixed at 90 degrees
};

inline std::string scenario_name(const Scenario& s) {
  std::string base;
  switch (s.kind) {
    case ScenarioKind::k2spk2pos: base = "2spk2pos"; break;
    case ScenarioKind::k2spk1pos: base = "2spk1pos"; break;
    case ScenarioKind::k1spk2pos: base = "1spk2pos"; break;
  }
  return s.constrained ? base + "-1fix" : base;
}

inline Scenario parse_scenario(const std::string& name) {
  Scenario s;
  std::string base = name;
  if (base.size() > 5 && base.substr(base.size() - 5) == "-1fix") {
    s.constrained = true;
    base = base.substr(0, base.size() - 5);
  }
  if (base == "2spk2pos") s.kind = ScenarioKind::k2spk2pos;
  else if (base == "2spk1pos") s.kind = ScenarioKind::k2spk1pos;
  else if (base == "1spk2pos") s.kind = ScenarioKind::k1spk2pos;
  else throw Error("unknown scenario: " + name);
  return s;
}

struct SceneGeometry {
  RoomSpec room;
  ArrayGeometry array;
  std::vector<SourcePlacement> sources;
};

// Geometry, activity, and speech material for one sequence; rendering this
// through the room produces the SceneExample.
struct SceneSpec {
  SceneGeometry geometry;
  ActivityTimeline timeline;
  std::vector<AudioSignal> dry;  // s_q, full length, zero outside activity
  std::vector<std::string> speaker_ids;
  std::vector<int> desired;  // 1-based source indices
  std::string scenario;
};

// One rendered 7 s sequence with all ground truth attached.
struct SceneExample {
  MultichannelAudio input;                // X
  std::vector<MultichannelAudio> images;  // D_q per source
  std::vector<AudioSignal> dry;           // s_q per source
  ActivityTimeline timeline;
  SceneGeometry geometry;
  std::vector<std::string> speaker_ids;
  std::vector<int> desired;
  double noise_snr_db = 30.0;
  std::string scenario;
};

namespace scene_detail {

// Applies short raised-cosine edge fades to a segment chunk.
inline void edge_fade(std::vector<double>& x, std::size_t begin,
                      std::size_t end, int fade) {
  const std::size_t len = end - begin;
  const std::size_t f = std::min<std::size_t>(fade, len / 2);
  for (std::size_t i = 0; i < f; ++i) {
    const double g = 0.5 - 0.5 * std::cos(M_PI * (i + 1) / (f + 1));
    x[begin + i] *= g;
    x[end - 1 - i] *= g;
  }
}

// Builds the full-length dry signal of one source: consecutive speech
// material placed into that source's active segments.
inline AudioSignal fill_segments(const std::vector<double>& material,
                                 const ActivityTimeline& timeline, int source,
                                 int sample_rate, std::size_t total_len) {
  AudioSignal out;
  out.sample_rate = sample_rate;
  out.samples.assign(total_len, 0.0);
  std::size_t need = 0;
  for (const auto& seg : timeline.segments)
    if (static_cast<int>(seg.active) == source)
      need += static_cast<std::size_t>(
          std::lround((seg.end_s - seg.start_s) * sample_rate));
  if (need == 0) return out;
  const std::vector<double> mat =
      loop_to_length(material, need, sample_rate);
  std::size_t cursor = 0;
  for (const auto& seg : timeline.segments) {
    if (static_cast<int>(seg.active) != source) continue;
    const std::size_t begin = static_cast<std::size_t>(
        std::lround(seg.start_s * sample_rate));
    std::size_t end =
        static_cast<std::size_t>(std::lround(seg.end_s * sample_rate));
    end = std::min(end, total_len);
    for (std::size_t i = begin; i < end; ++i)
      out.samples[i] = mat[cursor++];
    edge_fade(out.samples, begin, end, sample_rate / 200);  // 5 ms
  }
  return out;
}

// Concatenated material for a speaker, starting round-robin at `start`.
inline std::vector<double> speaker_material(const UtterancePool& pool,
                                            const std::string& speaker,
                                            std::size_t need, int start = 0) {
  const std::vector<int> idx = pool.indices_of(speaker);
  require(!idx.empty(), "no utterances for speaker " + speaker);
  std::vector<double> mat;
  int k = start % static_cast<int>(idx.size());
  while (mat.size() < need) {
    const auto& s = pool.utterances[idx[k]].signal.samples;
    mat.insert(mat.end(), s.begin(), s.end());
    k = (k + 1) % static_cast<int>(idx.size());
    if (mat.size() >= need) break;
  }
  return mat;
}

inline ActivityTimeline unconstrained_timeline(Rng& rng) {
  const double t1 = rng.uniform(1.0, 3.0);
  const double t2 = rng.uniform(5.0, 6.0);
  ActivityTimeline tl;
  tl.segments = {{0.0, t1, Active::kSource1},
                 {t1, t2, Active::kSource2},
                 {t2, kSequenceSeconds, Active::kSource1}};
  return tl;
}

// Target (source 1) active for a 3-5 s stretch; the interferer (source 2)
// covers the complement.
inline ActivityTimeline constrained_timeline(Rng& rng) {
  const double len = rng.uniform(3.0, 5.0);
  const double start = rng.uniform(0.0, kSequenceSeconds - len);
  ActivityTimeline tl;
  if (start > 1e-9)
    tl.segments.push_back({0.0, start, Active::kSource2});
  tl.segments.push_back({start, start + len, Active::kSource1});
  if (start + len < kSequenceSeconds - 1e-9)
    tl.segments.push_back({start + len, kSequenceSeconds, Active::kSource2});
  return tl;
}

inline double random_doa_apart(Rng& rng, double other_doa) {
  for (int tries = 0; tries < 1000; ++tries) {
    const double doa = rng.uniform(0.0, 180.0);
    if (std::abs(doa - other_doa) >= kMinDoaSeparationDeg) return doa;
  }
  throw Error("failed to draw a separated DOA");
}

// Picks two distinct speaker ids, rotating with `hint` so identities vary
// across a dataset.
inline std::pair<std::string, std::string> pick_speakers(
    const UtterancePool& pool, int hint) {
  const std::vector<std::string> ids = pool.speaker_ids();
  if (ids.size() < 2) throw NoUtterances("need at least 2 speakers");
  const int n = static_cast<int>(ids.size());
  const int a = hint % n;
  const int b = (hint + 1 + (hint / n) % (n - 1)) % n;
  return {ids[a], ids[b == a ? (a + 1) % n : b]};
}

}  // namespace scene_detail

// Shared scaffolding for all six variants. `hint` rotates speaker and
// utterance choices across a dataset.
inline SceneSpec build_scene(const Scenario& scenario,
                             const UtterancePool& pool, Rng& rng,
                             int hint = 0) {
  using namespace scene_detail;
  SceneSpec spec;
  spec.scenario = scenario_name(scenario);
  spec.geometry.room = sample_room(rng);
  spec.geometry.array = sample_array(spec.geometry.room, rng);

  // DOAs.
  const double doa1 =
      scenario.constrained ? kTargetDoaDeg : rng.uniform(0.0, 180.0);
  const double doa2 = scenario.kind == ScenarioKind::k2spk1pos
                          ? doa1
                          : random_doa_apart(rng, doa1);

  SourcePlacement p1 =
      place_at_doa(spec.geometry.room, spec.geometry.array, doa1, rng);
  SourcePlacement p2 =
      scenario.kind == ScenarioKind::k2spk1pos
          ? p1
          : place_at_doa(spec.geometry.room, spec.geometry.array, doa2, rng);
  spec.geometry.sources = {p1, p2};

  // Speakers.
  std::string spk1, spk2;
  if (scenario.kind == ScenarioKind::k1spk2pos) {
    const std::vector<std::string> ids = pool.speaker_ids();
    spk1 = spk2 = ids[hint % ids.size()];
  } else {
    std::tie(spk1, spk2) = pick_speakers(pool, hint);
  }
  spec.speaker_ids = {spk1, spk2};

  // Activity and material.
  spec.timeline = scenario.constrained ? constrained_timeline(rng)
                                       : unconstrained_timeline(rng);
  spec.timeline.validate();
  const auto total_len = static_cast<std::size_t>(
      std::lround(kSequenceSeconds * kDefaultSampleRate));
  // For same-speaker scenes the two sources must still carry different
  // speech, so source 2 starts one utterance later.
  spec.dry.push_back(fill_segments(
      speaker_material(pool, spk1, total_len, hint), spec.timeline, 1,
      kDefaultSampleRate, total_len));
  spec.dry.push_back(fill_segments(
      speaker_material(pool, spk2, total_len,
                       hint + (spk1 == spk2 ? 1 : 0)),
      spec.timeline, 2, kDefaultSampleRate, total_len));

  spec.desired = scenario.constrained ? std::vector<int>{1}
                                      : std::vector<int>{1, 2};
  return spec;
}

inline SceneSpec build_unconstrained_scene(const UtterancePool& pool, Rng& rng,
                                           int hint = 0) {
  return build_scene({ScenarioKind::k2spk2pos, false}, pool, rng, hint);
}

inline SceneSpec build_constrained_scene(const UtterancePool& pool, Rng& rng,
                                         int hint = 0) {
  return build_scene({ScenarioKind::k2spk2pos, true}, pool, rng, hint);
}

// Control variants: two speakers sharing one position (2spk1pos) or one
// speaker placed at two positions (1spk2pos); timeline rules follow the
// matching unconstrained/constrained scenario.
inline SceneSpec build_control_scene(ScenarioKind kind, bool constrained,
                                     const UtterancePool& pool, Rng& rng,
                                     int hint = 0) {
  require(kind != ScenarioKind::k2spk2pos,
          "build_control_scene: use build_(un)constrained_scene");
  return build_scene({kind, constrained}, pool, rng, hint);
}

// Propagates every dry source through the room and mixes per Eq-style
// bookkeeping: X_m = sum_q D_qm + n_m, with the sensor noise scaled so the
// per-mic SNR against sum_q D_qm equals noise_snr_db exactly.
// noise_snr_db = +inf disables the noise term.
inline SceneExample render_sequence(const SceneSpec& spec,
                                    double noise_snr_db, Rng& rng) {
  const int fs = kDefaultSampleRate;
  const auto total_len =
      static_cast<std::size_t>(std::lround(kSequenceSeconds * fs));
  const int mics = spec.geometry.array.num_mics();
  const int num_sources = static_cast<int>(spec.geometry.sources.size());

  SceneExample ex;
  ex.timeline = spec.timeline;
  ex.geometry = spec.geometry;
  ex.speaker_ids = spec.speaker_ids;
  ex.desired = spec.desired;
  ex.noise_snr_db = noise_snr_db;
  ex.scenario = spec.scenario;
  ex.dry = spec.dry;

  for (int q = 0; q < num_sources; ++q) {
    MultichannelAudio img;
    img.sample_rate = fs;
    for (int m = 0; m < mics; ++m) {
      AudioSignal rir = simulate_rir(spec.geometry.room,
                                     spec.geometry.sources[q].position,
                                     spec.geometry.array.mic_positions[m], fs);
      std::vector<double> conv = fft_convolve(spec.dry[q].samples, rir.samples);
      conv.resize(total_len, 0.0);
      img.channels.push_back(std::move(conv));
    }
    ex.images.push_back(std::move(img));
  }

  ex.input.sample_rate = fs;
  for (int m = 0; m < mics; ++m) {
    std::vector<double> sum(total_len, 0.0);
    for (int q = 0; q < num_sources; ++q)
      for (std::size_t i = 0; i < total_len; ++i)
        sum[i] += ex.images[q].channels[m][i];
    if (std::isfinite(noise_snr_db)) {
      const double sig_e = energy(sum);
      std::vector<double> noise(total_len);
      for (auto& v : noise) v = rng.normal();
      const double noise_e = energy(noise);
      if (sig_e > 0.0 && noise_e > 0.0) {
        const double want = sig_e * std::pow(10.0, -noise_snr_db / 10.0);
        const double g = std::sqrt(want / noise_e);
        for (std::size_t i = 0; i < total_len; ++i) sum[i] += g * noise[i];
      }
    }
    ex.input.channels.push_back(std::move(sum));
  }
  return ex;
}

}  // namespace nssf
