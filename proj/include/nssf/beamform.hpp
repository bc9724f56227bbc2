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

#include "nssf/scene.hpp"
#include "nssf/stft.hpp"

namespace nssf {

// Delay-and-sum beamforming and training-target construction. Steering is
// far-field from ground-truth DOAs: pure phase alignment with 1/M gain.

struct SteeringVector {
  // weights[m * bins + f]
  std::vector<std::complex<double>> weights;
  int mics = 0;
  int bins = 0;
  double doa_deg = 0.0;
  StftConfig config;

  const std::complex<double>& at(int m, int f) const {
    return weights[static_cast<std::size_t>(m) * bins + f];
  }
};

enum class TargetKind { kDry, kDsb };

inline std::string target_name(TargetKind k) {
  return k == TargetKind::kDry ? "dry" : "dsb";
}
inline TargetKind target_from_name(const std::string& s) {
  if (s == "dry") return TargetKind::kDry;
  if (s == "dsb") return TargetKind::kDsb;
  throw Error("unknown target kind: " + s);
}

// Far-field DSB weights for a ULA: w_mf = (1/M) exp(-j 2 pi f_Hz tau_m) with
// tau_m = d_m cos(doa) / c, d_m the signed mic offset along the axis. The
// sign compensates the propagation delay of the rendered wave so that a
// plane wave from `doa_deg` sums coherently. `align_to_mic` >= 0 measures
// offsets relative to that mic instead of the array center, which pins the
// beamformer output to that channel's arrival time.
inline SteeringVector dsb_weights(double doa_deg, const ArrayGeometry& geometry,
                                  const StftConfig& cfg,
                                  int sample_rate = kDefaultSampleRate,
                                  int align_to_mic = -1) {
  const int mics = geometry.num_mics();
  const int bins = cfg.bins();
  SteeringVector sv;
  sv.mics = mics;
  sv.bins = bins;
  sv.doa_deg = doa_deg;
  sv.config = cfg;
  sv.weights.resize(static_cast<std::size_t>(mics) * bins);
  const double cos_theta = std::cos(doa_deg * M_PI / 180.0);
  const double ref_offset =
      align_to_mic >= 0 ? geometry.offset(align_to_mic) : 0.0;
  for (int m = 0; m < mics; ++m) {
    const double tau =
        (geometry.offset(m) - ref_offset) * cos_theta / kSpeedOfSound;
    for (int f = 0; f < bins; ++f) {
      const double f_hz =
          static_cast<double>(f) * sample_rate / cfg.frame_len;
      const double phase = -2.0 * M_PI * f_hz * tau;
      sv.weights[static_cast<std::size_t>(m) * bins + f] =
          std::polar(1.0 / mics, phase);
    }
  }
  return sv;
}

// Y(f, t) = sum_m w_mf S_m(f, t).
inline std::vector<std::complex<double>> apply_dsb(const SpectrogramStack& s,
                                                   const SteeringVector& w) {
  if (s.num_channels() != w.mics || s.bins != w.bins)
    throw ShapeError("apply_dsb: stack/steering mismatch");
  std::vector<std::complex<double>> out(
      static_cast<std::size_t>(s.bins) * s.frames, {0.0, 0.0});
  for (int m = 0; m < s.num_channels(); ++m) {
    for (int f = 0; f < s.bins; ++f) {
      const std::complex<double> wm = w.at(m, f);
      const std::size_t row = static_cast<std::size_t>(f) * s.frames;
      const auto& ch = s.channels[m];
      for (int t = 0; t < s.frames; ++t) out[row + t] += wm * ch[row + t];
    }
  }
  return out;
}

// Fractional delay by Hann-windowed sinc interpolation (positive delay
// shifts the signal later). Compact support keeps silent stretches silent,
// unlike an FFT phase ramp.
inline std::vector<double> delay_fractional(const std::vector<double>& x,
                                            double delay_samples,
                                            int taps = 32) {
  std::vector<double> y(x.size(), 0.0);
  const int half = taps / 2;
  const int n = static_cast<int>(x.size());
  // Kernel K(u) = sinc(u) hann(u) placed at every input sample.
  for (int j = 0; j < n; ++j) {
    if (x[j] == 0.0) continue;
    const double pos = j + delay_samples;
    const int first = static_cast<int>(std::ceil(pos)) - half;
    for (int k = std::max(first, 0); k < std::min(first + taps, n); ++k) {
      const double u = k - pos;
      if (std::abs(u) > half) continue;
      const double w = 0.5 * (1.0 + std::cos(M_PI * u / half));
      const double s = u == 0.0 ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
      y[k] += x[j] * s * w;
    }
  }
  return y;
}

// Builds the training target for one scene.
//  dry: sum of desired dry sources, each time-aligned to the reference
//       channel's direct-path delay.
//  dsb: each desired source's reverberant image beamformed toward its own
//       ground-truth DOA (weights aligned to the reference mic), summed in
//       the STFT domain, then synthesized.
// Output is padded to the full sequence length.
inline AudioSignal make_target(const SceneExample& ex, TargetKind kind,
                               const StftConfig& cfg, int ref_channel = 0) {
  if (ex.desired.empty()) throw DatasetError("make_target: empty desired set");
  const int fs = ex.input.sample_rate;
  const std::size_t total_len = ex.input.size();
  AudioSignal target;
  target.sample_rate = fs;
  target.samples.assign(total_len, 0.0);

  if (kind == TargetKind::kDry) {
    for (int q : ex.desired) {
      if (q < 1 || q > static_cast<int>(ex.dry.size()))
        throw DatasetError("make_target: desired source missing");
      const Vec3 ref = ex.geometry.array.mic_positions.at(ref_channel);
      const double dist = norm(ex.geometry.sources[q - 1].position - ref);
      const double delay = dist / kSpeedOfSound * fs;
      const std::vector<double> aligned =
          delay_fractional(ex.dry[q - 1].samples, delay);
      for (std::size_t i = 0; i < total_len && i < aligned.size(); ++i)
        target.samples[i] += aligned[i];
    }
    return target;
  }

  // DSB target.
  std::vector<std::complex<double>> acc;
  int frames = 0;
  for (int q : ex.desired) {
    if (q < 1 || q > static_cast<int>(ex.images.size()))
      throw DatasetError("make_target: desired image missing");
    const SpectrogramStack stack = analyze(ex.images[q - 1], cfg);
    const SteeringVector w =
        dsb_weights(ex.geometry.sources[q - 1].doa_deg, ex.geometry.array, cfg,
                    fs, ref_channel);
    std::vector<std::complex<double>> y = apply_dsb(stack, w);
    if (acc.empty()) {
      acc = std::move(y);
      frames = stack.frames;
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += y[i];
    }
  }
  SpectrogramStack out;
  out.bins = cfg.bins();
  out.frames = frames;
  out.config = cfg;
  out.sample_rate = fs;
  out.channels.push_back(std::move(acc));
  const AudioSignal synth = synthesize_mono(out);
  for (std::size_t i = 0; i < total_len && i < synth.samples.size(); ++i)
    target.samples[i] = synth.samples[i];
  return target;
}

}  // namespace nssf
