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

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "nssf/audio.hpp"
#include "nssf/errors.hpp"
#include "nssf/rng.hpp"
#include "nssf/wav.hpp"

namespace nssf {

struct Utterance {
  std::string speaker_id;
  AudioSignal signal;
};

// Immutable after construction; safe to share across threads.
struct UtterancePool {
  std::vector<Utterance> utterances;

  std::vector<std::string> speaker_ids() const {
    std::set<std::string> ids;
    for (const auto& u : utterances) ids.insert(u.speaker_id);
    return {ids.begin(), ids.end()};
  }

  std::vector<int> indices_of(const std::string& speaker) const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < utterances.size(); ++i)
      if (utterances[i].speaker_id == speaker) idx.push_back(int(i));
    return idx;
  }
};

// Loads all .wav files under `path` (one subdirectory per speaker; the
// immediate parent directory name is the speaker id). Deterministic
// lexicographic ordering. Files shorter than 1 s are skipped. Wrong sample
// rate or format throws UnsupportedFormat; there is no silent resampling.
inline UtterancePool load_wav_dir(const std::string& path,
                                  int expected_rate = kDefaultSampleRate) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) throw NoUtterances(path + " is not a directory");

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  UtterancePool pool;
  for (const auto& p : files) {
    MultichannelAudio audio = read_wav(p.string());
    if (audio.sample_rate != expected_rate)
      throw UnsupportedFormat(p.string() + ": sample rate " +
                              std::to_string(audio.sample_rate) +
                              ", expected " + std::to_string(expected_rate));
    if (audio.num_channels() != 1)
      throw UnsupportedFormat(p.string() + ": expected mono");
    if (audio.size() < static_cast<std::size_t>(expected_rate)) continue;
    Utterance u;
    u.speaker_id = p.parent_path().filename().string();
    u.signal.sample_rate = audio.sample_rate;
    u.signal.samples = std::move(audio.channels[0]);
    pool.utterances.push_back(std::move(u));
  }
  if (pool.utterances.empty())
    throw NoUtterances("no usable wav files under " + path);
  return pool;
}

// Deterministic speech-like generator: white-noise excitation through three
// speaker-dependent second-order resonators (300-3500 Hz), amplitude
// modulated at a syllabic rate of 3-5 Hz with 10-20% silence gaps.
// RMS-normalized to 0.1. Stands in for a licensed corpus in tests.
inline AudioSignal synth_speech(std::uint64_t speaker_seed, double duration_s,
                                std::uint64_t rng_seed,
                                int sample_rate = kDefaultSampleRate) {
  require(duration_s >= 1.0 && duration_s <= 10.0,
          "synth_speech: duration must be in [1, 10] s");
  const int n = static_cast<int>(std::lround(duration_s * sample_rate));

  // Formants depend only on the speaker.
  Rng voice = Rng(speaker_seed).derive(11);
  struct Resonator {
    double b1, b2;  // y[k] = x[k] + b1*y[k-1] + b2*y[k-2]
    double y1 = 0.0, y2 = 0.0;
  };
  std::vector<Resonator> bank;
  for (int i = 0; i < 3; ++i) {
    const double freq = voice.uniform(300.0, 3500.0);
    const double bw = voice.uniform(80.0, 250.0);
    const double r = std::exp(-M_PI * bw / sample_rate);
    Resonator res;
    res.b1 = 2.0 * r * std::cos(2.0 * M_PI * freq / sample_rate);
    res.b2 = -r * r;
    bank.push_back(res);
  }

  // Excitation and prosody depend on both seeds so different speakers stay
  // decorrelated even under a shared rng_seed.
  Rng rng = Rng(derive_seed(rng_seed, speaker_seed)).derive(13);
  const double syllable_hz = rng.uniform(3.0, 5.0);
  const double gap_prob = rng.uniform(0.10, 0.20);
  const int syl_len = std::max(1, int(std::lround(sample_rate / syllable_hz)));
  const int num_syl = (n + syl_len - 1) / syl_len;

  std::vector<double> envelope(n, 0.0);
  bool any_voiced = false;
  for (int s = 0; s < num_syl; ++s) {
    const bool gap = rng.uniform01() < gap_prob && !(s == 0);
    if (gap) continue;
    any_voiced = true;
    const int start = s * syl_len;
    const int len = std::min(syl_len, n - start);
    const int ramp = std::max(1, len / 4);
    for (int i = 0; i < len; ++i) {
      double e = 1.0;
      if (i < ramp) e = 0.5 - 0.5 * std::cos(M_PI * i / ramp);
      else if (i >= len - ramp)
        e = 0.5 - 0.5 * std::cos(M_PI * (len - 1 - i) / ramp);
      envelope[start + i] = e;
    }
  }
  (void)any_voiced;  // s == 0 is always voiced

  AudioSignal out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    double acc = 0.0;
    for (auto& res : bank) {
      const double y = x + res.b1 * res.y1 + res.b2 * res.y2;
      res.y2 = res.y1;
      res.y1 = y;
      acc += y;
    }
    out.samples[i] = acc * envelope[i];
  }
  const double r = rms(out.samples);
  const double gain = r > 0.0 ? 0.1 / r : 0.0;
  for (double& v : out.samples) v *= gain;
  return out;
}

// Fills `target_len` samples from `src`, looping with a raised-cosine
// crossfade when the source is too short. The corpus gives no guidance on
// concatenation, so the crossfade length is a fixed 50 ms.
inline std::vector<double> loop_to_length(const std::vector<double>& src,
                                          std::size_t target_len,
                                          int sample_rate = kDefaultSampleRate,
                                          double crossfade_s = 0.050) {
  require(!src.empty(), "loop_to_length: empty source");
  if (src.size() >= target_len)
    return {src.begin(), src.begin() + target_len};

  const std::size_t fade =
      std::min<std::size_t>(static_cast<std::size_t>(crossfade_s * sample_rate),
                            src.size() / 2);
  std::vector<double> out(src);
  while (out.size() < target_len) {
    const std::size_t join = out.size() - fade;
    out.resize(join + src.size());
    for (std::size_t i = 0; i < fade; ++i) {
      const double a = 0.5 - 0.5 * std::cos(M_PI * (i + 1) / (fade + 1));
      out[join + i] = out[join + i] * (1.0 - a) + src[i] * a;
    }
    std::copy(src.begin() + fade, src.end(), out.begin() + join + fade);
  }
  out.resize(target_len);
  return out;
}

// Synthetic stand-in pool: `num_speakers` voices with `utts_per_speaker`
// utterances each.
inline UtterancePool make_synth_pool(int num_speakers, int utts_per_speaker,
                                     double duration_s, std::uint64_t seed) {
  UtterancePool pool;
  for (int s = 0; s < num_speakers; ++s) {
    for (int u = 0; u < utts_per_speaker; ++u) {
      Utterance utt;
      utt.speaker_id = "synth" + std::to_string(s);
      utt.signal = synth_speech(derive_seed(seed, 1000 + s), duration_s,
                                derive_seed(seed, 77, s, u));
      pool.utterances.push_back(std::move(utt));
    }
  }
  return pool;
}

}  // namespace nssf
