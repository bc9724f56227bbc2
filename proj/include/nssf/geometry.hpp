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

#include <array>
#include <cmath>
#include <vector>

#include "nssf/errors.hpp"
#include "nssf/rng.hpp"

namespace nssf {

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Shoebox room; t60 == 0 means anechoic (test override, never sampled).
struct RoomSpec {
  double length = 6.0;  // x extent, m
  double width = 6.0;   // y extent, m
  double height = 2.5;  // z extent, m
  double t60 = 0.3;     // s

  bool contains(const Vec3& p, double margin = 0.0) const {
    return p[0] > margin && p[0] < length - margin && p[1] > margin &&
           p[1] < width - margin && p[2] > margin && p[2] < height - margin;
  }
};

// Uniform linear array; mics laid out along `axis` around `center`.
struct ArrayGeometry {
  std::vector<Vec3> mic_positions;
  Vec3 center{0, 0, 0};
  Vec3 axis{1, 0, 0};  // unit vector
  double spacing = 0.04;

  int num_mics() const { return static_cast<int>(mic_positions.size()); }

  // Signed offset of mic m along the axis from the array center.
  double offset(int m) const {
    return dot(mic_positions[m] - center, axis);
  }
};

inline ArrayGeometry make_ula(const Vec3& center, const Vec3& axis, int mics,
                              double spacing) {
  ArrayGeometry g;
  g.center = center;
  const double n = norm(axis);
  require(n > 0, "make_ula: zero axis");
  g.axis = (1.0 / n) * axis;
  g.spacing = spacing;
  for (int m = 0; m < mics; ++m) {
    const double off = (m - 0.5 * (mics - 1)) * spacing;
    g.mic_positions.push_back(center + off * g.axis);
  }
  return g;
}

struct SourcePlacement {
  Vec3 position{0, 0, 0};
  double doa_deg = 0.0;
};

// Angle between the array axis and the direction to the source, in degrees.
// 0 and 180 are the endfire directions, 90 is broadside.
inline double doa_of(const Vec3& position, const ArrayGeometry& array) {
  const Vec3 d = position - array.center;
  const double n = norm(d);
  require(n > 0, "doa_of: source at array center");
  double c = dot(d, array.axis) / n;
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

// Room dimensions and reverberation time drawn uniformly from the
// simulation-setup ranges.
inline RoomSpec sample_room(Rng& rng) {
  RoomSpec r;
  r.length = rng.uniform(4.0, 8.0);
  r.width = rng.uniform(4.0, 8.0);
  r.height = rng.uniform(1.0, 4.0);
  r.t60 = rng.uniform(0.2, 0.5);
  return r;
}

// Array center uniform in the central 50% footprint, height in
// [0.5, height-0.5], axis along the room length.
inline ArrayGeometry sample_array(const RoomSpec& room, Rng& rng, int mics = 3,
                                  double spacing = 0.04) {
  Vec3 center;
  center[0] = rng.uniform(0.25 * room.length, 0.75 * room.length);
  center[1] = rng.uniform(0.25 * room.width, 0.75 * room.width);
  const double zlo = 0.5, zhi = room.height - 0.5;
  center[2] = zhi > zlo ? rng.uniform(zlo, zhi) : 0.5 * room.height;
  return make_ula(center, {1, 0, 0}, mics, spacing);
}

// Largest source distance from the array center along direction `dir`
// keeping `margin` clearance to the x/y walls (sources stay in the array
// plane, where z clearance holds by construction).
inline double max_range(const RoomSpec& room, const Vec3& center,
                        const Vec3& dir, double margin = 0.2) {
  double r = 1e9;
  const double hi[2] = {room.length, room.width};
  for (int i = 0; i < 2; ++i) {
    if (dir[i] > 1e-12) r = std::min(r, (hi[i] - margin - center[i]) / dir[i]);
    if (dir[i] < -1e-12) r = std::min(r, (center[i] - margin) / -dir[i]);
  }
  return r;
}

// Places a source at an exact DOA in the array plane, at a random range and
// side. DOA is preserved exactly; range is uniform in [0.4, max_range].
inline SourcePlacement place_at_doa(const RoomSpec& room,
                                    const ArrayGeometry& array, double doa_deg,
                                    Rng& rng) {
  const double theta = doa_deg * M_PI / 180.0;
  // Perpendicular to the axis within the horizontal plane.
  const Vec3 perp{-array.axis[1], array.axis[0], 0.0};
  const double side = rng.uniform01() < 0.5 ? 1.0 : -1.0;
  const Vec3 dir = std::cos(theta) * array.axis + (side * std::sin(theta)) * perp;
  const double rmax = max_range(room, array.center, dir);
  require(rmax > 0.4, "place_at_doa: room too small for placement");
  const double r = rng.uniform(0.4, rmax);
  SourcePlacement p;
  p.position = array.center + r * dir;
  p.doa_deg = doa_deg;
  return p;
}

}  // namespace nssf
