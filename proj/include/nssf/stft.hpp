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

#include <complex>
#include <vector>

#include "nssf/audio.hpp"
#include "nssf/errors.hpp"
#include "nssf/fft.hpp"
#include "nssf/timeline.hpp"

namespace nssf {

// STFT framing: no edge padding, T = floor((len - frame_len)/shift) + 1.
// Periodic Hann analysis window; synthesis is weighted overlap-add with
// per-sample squared-window normalization.

struct StftConfig {
  int frame_len = 512;
  int shift = 256;

  int bins() const { return frame_len / 2 + 1; }
  int num_frames(std::size_t len) const {
    if (len < static_cast<std::size_t>(frame_len)) return 0;
    return static_cast<int>((len - frame_len) / shift) + 1;
  }
  // Time span covered by T frames.
  std::size_t span(int num_frames) const {
    if (num_frames <= 0) return 0;
    return static_cast<std::size_t>(frame_len) +
           static_cast<std::size_t>(num_frames - 1) * shift;
  }
};

inline std::vector<double> hann_periodic(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

// Complex STFT tensor: M channels x F bins x T frames. Per channel the data
// is a row-major F x T matrix.
struct SpectrogramStack {
  std::vector<std::vector<std::complex<double>>> channels;  // each F*T
  int bins = 0;
  int frames = 0;
  StftConfig config;
  int sample_rate = kDefaultSampleRate;

  int num_channels() const { return static_cast<int>(channels.size()); }
  std::complex<double>& at(int m, int f, int t) {
    return channels[m][static_cast<std::size_t>(f) * frames + t];
  }
  const std::complex<double>& at(int m, int f, int t) const {
    return channels[m][static_cast<std::size_t>(f) * frames + t];
  }
};

inline SpectrogramStack analyze(const MultichannelAudio& x,
                                const StftConfig& cfg) {
  if (x.size() < static_cast<std::size_t>(cfg.frame_len))
    throw SignalTooShort("analyze: signal shorter than one frame");
  const int num_frames = cfg.num_frames(x.size());
  const int bins = cfg.bins();
  const std::vector<double> win = hann_periodic(cfg.frame_len);

  SpectrogramStack s;
  s.bins = bins;
  s.frames = num_frames;
  s.config = cfg;
  s.sample_rate = x.sample_rate;
  s.channels.assign(x.num_channels(),
                    std::vector<std::complex<double>>(
                        static_cast<std::size_t>(bins) * num_frames));

  std::vector<double> frame(cfg.frame_len);
  std::vector<std::complex<double>> spec(bins);
  for (int m = 0; m < x.num_channels(); ++m) {
    const std::vector<double>& ch = x.channels[m];
    for (int t = 0; t < num_frames; ++t) {
      const std::size_t off = static_cast<std::size_t>(t) * cfg.shift;
      for (int i = 0; i < cfg.frame_len; ++i) frame[i] = ch[off + i] * win[i];
      rfft(frame.data(), cfg.frame_len, spec.data());
      for (int f = 0; f < bins; ++f) s.at(m, f, t) = spec[f];
    }
  }
  return s;
}

inline SpectrogramStack analyze(const AudioSignal& x, const StftConfig& cfg) {
  MultichannelAudio m;
  m.sample_rate = x.sample_rate;
  m.channels.push_back(x.samples);
  return analyze(m, cfg);
}

// Per-sample sum of squared windows over the frame grid; the WOLA
// denominator.
inline std::vector<double> wola_denominator(const StftConfig& cfg,
                                            int num_frames) {
  const std::vector<double> win = hann_periodic(cfg.frame_len);
  std::vector<double> denom(cfg.span(num_frames), 0.0);
  for (int t = 0; t < num_frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * cfg.shift;
    for (int i = 0; i < cfg.frame_len; ++i) denom[off + i] += win[i] * win[i];
  }
  return denom;
}

inline MultichannelAudio synthesize(const SpectrogramStack& s) {
  const StftConfig& cfg = s.config;
  const std::vector<double> win = hann_periodic(cfg.frame_len);
  const std::vector<double> denom = wola_denominator(cfg, s.frames);
  const std::size_t out_len = cfg.span(s.frames);

  MultichannelAudio out;
  out.sample_rate = s.sample_rate;
  out.channels.assign(s.num_channels(), std::vector<double>(out_len, 0.0));

  std::vector<std::complex<double>> spec(s.bins);
  std::vector<double> frame(cfg.frame_len);
  for (int m = 0; m < s.num_channels(); ++m) {
    std::vector<double>& ch = out.channels[m];
    for (int t = 0; t < s.frames; ++t) {
      for (int f = 0; f < s.bins; ++f) spec[f] = s.at(m, f, t);
      irfft(spec.data(), cfg.frame_len, frame.data());
      const std::size_t off = static_cast<std::size_t>(t) * cfg.shift;
      for (int i = 0; i < cfg.frame_len; ++i) ch[off + i] += frame[i] * win[i];
    }
    for (std::size_t i = 0; i < out_len; ++i)
      ch[i] = denom[i] > 1e-12 ? ch[i] / denom[i] : 0.0;
  }
  return out;
}

inline AudioSignal synthesize_mono(const SpectrogramStack& s) {
  MultichannelAudio m = synthesize(s);
  AudioSignal a;
  a.sample_rate = m.sample_rate;
  a.samples = std::move(m.channels.at(0));
  return a;
}

// ---------------------------------------------------------------------------
// Frame labels

struct FrameLabels {
  std::vector<Active> labels;  // one per STFT frame

  int size() const { return static_cast<int>(labels.size()); }
  bool has_silence() const {
    for (Active a : labels)
      if (a == Active::kSilence) return true;
    return false;
  }
};

// Plain per-frame energy of a signal on the cfg frame grid (no window).
inline std::vector<double> frame_energies(const std::vector<double>& x,
                                          const StftConfig& cfg) {
  const int num_frames = cfg.num_frames(x.size());
  std::vector<double> e(std::max(num_frames, 0), 0.0);
  for (int t = 0; t < num_frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * cfg.shift;
    double acc = 0.0;
    for (int i = 0; i < cfg.frame_len; ++i) acc += x[off + i] * x[off + i];
    e[t] = acc;
  }
  return e;
}

// Labels each frame by the source active at its center time, then relabels
// frames whose reference energy falls below `silence_floor_db` of the
// per-frame median as silence (intra-utterance pauses).
inline FrameLabels frame_labels(const ActivityTimeline& timeline,
                                const StftConfig& cfg,
                                const std::vector<double>& ref_energy,
                                int sample_rate = kDefaultSampleRate,
                                double silence_floor_db = -40.0) {
  const int num_frames = static_cast<int>(ref_energy.size());
  FrameLabels out;
  out.labels.resize(num_frames);
  for (int t = 0; t < num_frames; ++t) {
    const double center =
        (static_cast<double>(t) * cfg.shift + 0.5 * cfg.frame_len) /
        sample_rate;
    out.labels[t] = timeline.at(center);
  }
  std::vector<double> sorted = ref_energy;
  std::sort(sorted.begin(), sorted.end());
  const double median = num_frames == 0 ? 0.0
                        : (num_frames % 2 == 1
                               ? sorted[num_frames / 2]
                               : 0.5 * (sorted[num_frames / 2 - 1] +
                                        sorted[num_frames / 2]));
  const double floor = median * std::pow(10.0, silence_floor_db / 10.0);
  for (int t = 0; t < num_frames; ++t)
    if (ref_energy[t] < floor) out.labels[t] = Active::kSilence;
  return out;
}

}  // namespace nssf
