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
#include <vector>

#include "nssf/audio.hpp"
#include "nssf/errors.hpp"
#include "nssf/geometry.hpp"

namespace nssf {

// Image-source-method room impulse responses. Uniform wall reflection
// coefficient derived from t60 via Sabine's formula; direct path with 1/r
// attenuation; fractional delays by 16-tap Hann-windowed sinc
// interpolation; response truncated at t60.

// Sabine absorption for a shoebox room: alpha = 0.161 V / (t60 A).
inline double sabine_absorption(const RoomSpec& room) {
  const double volume = room.length * room.width * room.height;
  const double area = 2.0 * (room.length * room.width +
                             room.length * room.height +
                             room.width * room.height);
  return 0.161 * volume / (room.t60 * area);
}

inline double reflection_coefficient(const RoomSpec& room) {
  if (room.t60 <= 0.0) return 0.0;
  const double alpha = sabine_absorption(room);
  if (alpha >= 1.0) return 0.0;
  return std::sqrt(1.0 - alpha);
}

namespace rir_detail {

constexpr int kSincTaps = 16;

// Adds gain * sinc(k - delay) windowed over kSincTaps taps around the delay.
inline void add_fractional_impulse(std::vector<double>& h, double delay,
                                   double gain) {
  const int half = kSincTaps / 2;
  const int first = static_cast<int>(std::ceil(delay)) - half;
  for (int k = first; k < first + kSincTaps; ++k) {
    if (k < 0 || k >= static_cast<int>(h.size())) continue;
    const double u = k - delay;  // |u| <= half + 1
    const double w = 0.5 * (1.0 + std::cos(M_PI * u / half));
    const double s = u == 0.0 ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
    if (std::abs(u) <= half) h[k] += gain * s * w;
  }
}

}  // namespace rir_detail

inline AudioSignal simulate_rir(const RoomSpec& room, const Vec3& source,
                                const Vec3& mic,
                                int sample_rate = kDefaultSampleRate) {
  if (!room.contains(source)) throw GeometryError("source outside room");
  if (!room.contains(mic)) throw GeometryError("mic outside room");

  const double c = kSpeedOfSound;
  AudioSignal out;
  out.sample_rate = sample_rate;

  if (room.t60 <= 0.0) {
    // Anechoic: direct path only.
    const double dist = norm(source - mic);
    const double delay = dist / c * sample_rate;
    out.samples.assign(static_cast<std::size_t>(std::ceil(delay)) +
                           rir_detail::kSincTaps,
                       0.0);
    rir_detail::add_fractional_impulse(out.samples, delay, 1.0 / dist);
    return out;
  }

  const int len = static_cast<int>(std::ceil(room.t60 * sample_rate));
  out.samples.assign(len, 0.0);
  const double beta = reflection_coefficient(room);
  const double max_dist = room.t60 * c;
  const double max_dist2 = max_dist * max_dist;
  const double dims[3] = {room.length, room.width, room.height};

  int n[3];
  for (int i = 0; i < 3; ++i)
    n[i] = static_cast<int>(std::ceil(max_dist / (2.0 * dims[i]))) + 1;

  for (int mx = -n[0]; mx <= n[0]; ++mx) {
    for (int qx = 0; qx <= 1; ++qx) {
      const double ix = (1 - 2 * qx) * source[0] + 2.0 * mx * dims[0] - mic[0];
      const int rx = std::abs(mx - qx) + std::abs(mx);
      for (int my = -n[1]; my <= n[1]; ++my) {
        for (int qy = 0; qy <= 1; ++qy) {
          const double iy =
              (1 - 2 * qy) * source[1] + 2.0 * my * dims[1] - mic[1];
          const double dxy2 = ix * ix + iy * iy;
          if (dxy2 > max_dist2) continue;
          const int rxy = rx + std::abs(my - qy) + std::abs(my);
          for (int mz = -n[2]; mz <= n[2]; ++mz) {
            for (int qz = 0; qz <= 1; ++qz) {
              const double iz =
                  (1 - 2 * qz) * source[2] + 2.0 * mz * dims[2] - mic[2];
              const double d2 = dxy2 + iz * iz;
              if (d2 > max_dist2) continue;
              const int refl = rxy + std::abs(mz - qz) + std::abs(mz);
              const double dist = std::sqrt(d2);
              const double gain =
                  std::pow(beta, refl) / std::max(dist, 1e-3);
              rir_detail::add_fractional_impulse(
                  out.samples, dist / c * sample_rate, gain);
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace nssf
