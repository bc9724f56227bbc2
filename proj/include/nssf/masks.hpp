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

#include "nssf/autodiff.hpp"
#include "nssf/stft.hpp"

namespace nssf {

// Complex time-frequency mask, F x T row-major like SpectrogramStack.
struct ComplexMask {
  std::vector<std::complex<double>> values;
  int bins = 0;
  int frames = 0;

  std::complex<double>& at(int f, int t) {
    return values[static_cast<std::size_t>(f) * frames + t];
  }
  const std::complex<double>& at(int f, int t) const {
    return values[static_cast<std::size_t>(f) * frames + t];
  }
};

// cIRM-style decompression of a bounded network output o in (-1, 1):
// compressed value c = K o, decompressed m = (1/C) ln((K + c)/(K - c)).
// The guard clamps |o| just below 1 to dodge the log singularity.
constexpr double kMaskK = 10.0;
constexpr double kMaskC = 0.1;
constexpr double kMaskClamp = 1.0 - 1e-7;

inline double decompress_component(double o, double k = kMaskK,
                                   double c = kMaskC) {
  o = std::clamp(o, -kMaskClamp, kMaskClamp);
  return (1.0 / c) * std::log((k + k * o) / (k - k * o));
}

// Inverse of decompress_component: o = c/K with c = K(1-e^{-Cm})/(1+e^{-Cm}).
inline double compress_component(double m, double k = kMaskK,
                                 double c = kMaskC) {
  const double e = std::exp(-c * m);
  return (1.0 - e) / (1.0 + e);
}

// Decompresses a raw tanh output pair grid (values in (-1,1)^2) to a mask.
inline ComplexMask decompress_mask(const std::vector<double>& raw_re,
                                   const std::vector<double>& raw_im, int bins,
                                   int frames, double k = kMaskK,
                                   double c = kMaskC) {
  ComplexMask m;
  m.bins = bins;
  m.frames = frames;
  m.values.resize(static_cast<std::size_t>(bins) * frames);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    m.values[i] = {decompress_component(raw_re[i], k, c),
                   decompress_component(raw_im[i], k, c)};
  return m;
}

// Eq-(3)-style single-channel masking: S_hat(f,t) = M(f,t) X_ref(f,t).
inline std::vector<std::complex<double>> apply_mask(const SpectrogramStack& x,
                                                    const ComplexMask& mask,
                                                    int ref_channel = 0) {
  if (mask.bins != x.bins || mask.frames != x.frames ||
      ref_channel >= x.num_channels())
    throw ShapeError("apply_mask: shape mismatch");
  std::vector<std::complex<double>> out(mask.values.size());
  const auto& ref = x.channels[ref_channel];
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.values[i] * ref[i];
  return out;
}

// Eq-(2)-style filter-and-sum: S_hat(f,t) = sum_m M_m(f,t) X_m(f,t).
inline std::vector<std::complex<double>> apply_masks(
    const SpectrogramStack& x, const std::vector<ComplexMask>& masks) {
  if (static_cast<int>(masks.size()) != x.num_channels())
    throw ShapeError("apply_masks: mask count != channels");
  std::vector<std::complex<double>> out(
      static_cast<std::size_t>(x.bins) * x.frames, {0.0, 0.0});
  for (int m = 0; m < x.num_channels(); ++m) {
    if (masks[m].bins != x.bins || masks[m].frames != x.frames)
      throw ShapeError("apply_masks: mask shape mismatch");
    const auto& ch = x.channels[m];
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += masks[m].values[i] * ch[i];
  }
  return out;
}

namespace ad {

// Tape version of the cIRM decompression (per real component).
inline Var cirm_decompress(Var o, double k = kMaskK, double c = kMaskC) {
  Tape* tp = o.tape;
  const Arr& x = tp->value(o);
  Arr out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out[i] = decompress_component(x[i], k, c);
  Var r = tp->make_node(tp->rows(o), tp->cols(o), std::move(out), {o}, {});
  const int oid = o.id, rid = r.id;
  if (tp->node(rid).requires_grad)
    tp->node(rid).backward = [tp, oid, rid, c]() {
      const Arr& g = tp->node(rid).grad;
      const Arr& x = tp->node(oid).value;
      Arr& go = tp->grad_buffer(oid);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double xc = std::clamp(x[i], -kMaskClamp, kMaskClamp);
        const double d = x[i] == xc ? (2.0 / c) / (1.0 - xc * xc) : 0.0;
        go[i] += g[i] * d;
      }
    };
  return r;
}

}  // namespace ad

}  // namespace nssf
