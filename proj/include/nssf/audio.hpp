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

#include <cmath>
#include <cstddef>
#include <vector>

#include "nssf/errors.hpp"

namespace nssf {

constexpr int kDefaultSampleRate = 16000;
constexpr double kSpeedOfSound = 343.0;  // m/s

// Mono time-domain signal, nominal amplitude range [-1, 1].
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// M-channel time-domain signal; all channels share one length and rate.
struct MultichannelAudio {
  std::vector<std::vector<double>> channels;
  int sample_rate = kDefaultSampleRate;

  int num_channels() const { return static_cast<int>(channels.size()); }
  std::size_t size() const {
    return channels.empty() ? 0 : channels[0].size();
  }
};

inline double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double e = 0.0;
  for (double v : x) e += v * v;
  return std::sqrt(e / x.size());
}

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double peak_abs(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

inline void check_finite(const std::vector<double>& x, const char* what) {
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " has non-finite samples");
}

}  // namespace nssf
