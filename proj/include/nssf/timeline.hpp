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
#include <string>
#include <vector>

#include "nssf/errors.hpp"

namespace nssf {

// Who is active in a stretch of the sequence. Sources are 1-based to match
// the usual speaker numbering; kSilence marks gaps.
enum class Active : int { kSilence = 0, kSource1 = 1, kSource2 = 2 };

inline std::string active_name(Active a) {
  switch (a) {
    case Active::kSource1: return "source1";
    case Active::kSource2: return "source2";
    default: return "silence";
  }
}

inline Active active_from_name(const std::string& s) {
  if (s == "source1") return Active::kSource1;
  if (s == "source2") return Active::kSource2;
  if (s == "silence") return Active::kSilence;
  throw Error("unknown activity label: " + s);
}

struct ActivitySegment {
  double start_s = 0.0;
  double end_s = 0.0;
  Active active = Active::kSilence;
};

// Partition of [0, duration] into non-overlapping segments with exactly one
// active source (or silence) each.
struct ActivityTimeline {
  std::vector<ActivitySegment> segments;

  double duration_s() const {
    return segments.empty() ? 0.0 : segments.back().end_s;
  }

  // Active source at time t; segments are half-open [start, end), the last
  // one closed.
  Active at(double t) const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      const bool last = i + 1 == segments.size();
      if (t >= s.start_s && (t < s.end_s || (last && t <= s.end_s)))
        return s.active;
    }
    return Active::kSilence;
  }

  void validate() const {
    require(!segments.empty(), "timeline: empty");
    double t = 0.0;
    for (const auto& s : segments) {
      require(std::abs(s.start_s - t) < 1e-9, "timeline: gap or overlap");
      require(s.end_s > s.start_s, "timeline: non-positive segment");
      t = s.end_s;
    }
  }
};

}  // namespace nssf
