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

#include <string>
#include <vector>

#include "nssf/layers.hpp"
#include "nssf/masks.hpp"
#include "nssf/stft.hpp"

namespace nssf {

// FT-JNF: two BLSTM layers and a fully connected output with tanh. The
// first BLSTM runs with frequency as the sequence axis (wide-band, frames
// independent), the second with time as the sequence axis (narrow-band,
// bins independent). The tanh output pair is decompressed to the complex
// mask applied to one reference channel.
//
// Feature taps, per STFT frame tau:
//   h0: stacked re/im input, size 2*F*M
//   h1: after BLSTM 1, size 2*F*U1
//   h2: after BLSTM 2, size 2*F*U2

struct JnfConfig {
  int mics = 3;
  int frame_len = 512;
  int u1 = 256;
  int u2 = 128;

  StftConfig stft() const { return {frame_len, frame_len / 2}; }
  int bins() const { return frame_len / 2 + 1; }

  static JnfConfig paper() { return {3, 512, 256, 128}; }
  static JnfConfig tiny() { return {3, 128, 16, 16}; }
};

inline ad::Params jnf_init_params(const JnfConfig& cfg, Rng& rng) {
  using namespace ad;
  Params p;
  auto put = [&p](const std::string& prefix, const LstmWeights& w) {
    p[prefix + ".w_ih"] = w.w_ih;
    p[prefix + ".w_hh"] = w.w_hh;
    p[prefix + ".b"] = w.b;
  };
  Rng r1 = rng.derive(1), r2 = rng.derive(2), r3 = rng.derive(3),
      r4 = rng.derive(4), r5 = rng.derive(5);
  put("blstm1.fwd", lstm_init(2 * cfg.mics, cfg.u1, r1));
  put("blstm1.bwd", lstm_init(2 * cfg.mics, cfg.u1, r2));
  put("blstm2.fwd", lstm_init(2 * cfg.u1, cfg.u2, r3));
  put("blstm2.bwd", lstm_init(2 * cfg.u1, cfg.u2, r4));
  const double k = 1.0 / std::sqrt(static_cast<double>(2 * cfg.u2));
  p["fc.w"] = ad::init_uniform(2 * cfg.u2, 2, k, r5);
  p["fc.b"] = ad::Tensor(1, 2);
  return p;
}

namespace jnf_detail {

// Stacked re/im input in frequency-major order: row (f, t) holds
// [re X_1 .. re X_M, im X_1 .. im X_M].
inline ad::Arr input_features_fmajor(const SpectrogramStack& x) {
  const int mics = x.num_channels(), bins = x.bins, frames = x.frames;
  ad::Arr h0(static_cast<Eigen::Index>(bins) * frames * 2 * mics);
  Eigen::Index idx = 0;
  for (int f = 0; f < bins; ++f) {
    for (int t = 0; t < frames; ++t) {
      for (int m = 0; m < mics; ++m) h0[idx++] = x.at(m, f, t).real();
      for (int m = 0; m < mics; ++m) h0[idx++] = x.at(m, f, t).imag();
    }
  }
  return h0;
}

// Permutation mapping frequency-major rows (f*T + t) to time-major rows.
inline std::vector<Eigen::Index> fmajor_to_tmajor(int bins, int frames) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(bins) * frames);
  for (int t = 0; t < frames; ++t)
    for (int f = 0; f < bins; ++f)
      perm[static_cast<std::size_t>(t) * bins + f] =
          static_cast<Eigen::Index>(f) * frames + t;
  return perm;
}

inline ad::LstmVars lstm_vars_from(const std::map<std::string, ad::Var>& leaves,
                                   const std::string& prefix) {
  ad::LstmVars v;
  v.w_ih = leaves.at(prefix + ".w_ih");
  v.w_hh = leaves.at(prefix + ".w_hh");
  v.b = leaves.at(prefix + ".b");
  v.units = v.w_hh.tape->rows(v.w_hh);
  return v;
}

}  // namespace jnf_detail

// Differentiable forward pass. The mask comes back time-major as
// [T*F x 1] re/im columns (frame-contiguous rows, ready for the iSTFT op).
struct JnfGraph {
  ad::Var mask_re, mask_im;
  int bins = 0;
  int frames = 0;
};

inline JnfGraph jnf_forward_leaves(ad::Tape& tape, const SpectrogramStack& x,
                                   const std::map<std::string, ad::Var>& leaves,
                                   const JnfConfig& cfg) {
  using namespace ad;
  using namespace jnf_detail;
  if (x.num_channels() != cfg.mics || x.bins != cfg.bins())
    throw ShapeError("jnf_forward: input does not match config");
  const int bins = x.bins, frames = x.frames;

  Var h0 = tape.constant(input_features_fmajor(x),
                         static_cast<Eigen::Index>(bins) * frames,
                         2 * cfg.mics);

  LstmVars l1f = lstm_vars_from(leaves, "blstm1.fwd");
  LstmVars l1b = lstm_vars_from(leaves, "blstm1.bwd");
  LstmVars l2f = lstm_vars_from(leaves, "blstm2.fwd");
  LstmVars l2b = lstm_vars_from(leaves, "blstm2.bwd");
  Var fc_w = leaves.at("fc.w");
  Var fc_b = leaves.at("fc.b");

  // BLSTM 1: frequency is the sequence axis, frames are the batch.
  Var h1_fm = bilstm_fused(h0, bins, frames, l1f, l1b);

  // BLSTM 2: time is the sequence axis, bins are the batch.
  Var h1_tm = gather_rows(h1_fm, fmajor_to_tmajor(bins, frames));
  Var h2_tm = bilstm_fused(h1_tm, frames, bins, l2f, l2b);

  Var raw = tanh_(add_rowvec(matmul(h2_tm, fc_w), fc_b));
  JnfGraph g;
  g.mask_re = cirm_decompress(slice_cols(raw, 0, 1));
  g.mask_im = cirm_decompress(slice_cols(raw, 1, 2));
  g.bins = bins;
  g.frames = frames;
  return g;
}

inline JnfGraph jnf_forward(ad::Tape& tape, const SpectrogramStack& x,
                            const ad::Params& params, const JnfConfig& cfg,
                            bool params_require_grad = true) {
  const auto leaves = ad::make_leaves(tape, params, params_require_grad);
  return jnf_forward_leaves(tape, x, leaves, cfg);
}

// --------------------------------------------------------------------------
// Plain inference path (no tape, low memory; used for probing and feature
// export). Kept numerically identical to the tape path, which the tests
// assert.

enum class JnfStage { kH0, kH1, kH2 };

struct JnfFeatureSet {
  // One row per frame.
  ad::Tensor h0;  // [T x 2FM]
  ad::Tensor h1;  // [T x 2FU1]
  ad::Tensor h2;  // [T x 2FU2]
};

struct JnfInference {
  ComplexMask mask;
  JnfFeatureSet features;
};

namespace jnf_detail {

using ad::ConstMatMap;
using ad::Mat;

// Sequential bidirectional LSTM on a stacked [steps*batch x in] block.
inline Mat plain_bilstm(const Mat& stacked, Eigen::Index steps,
                        Eigen::Index batch, const ad::Tensor& wi_f,
                        const ad::Tensor& wh_f, const ad::Tensor& b_f,
                        const ad::Tensor& wi_b, const ad::Tensor& wh_b,
                        const ad::Tensor& b_b) {
  const Eigen::Index units = wh_f.rows;
  Mat out(steps * batch, 2 * units);
  const Mat xp_f = stacked * wi_f.mat();
  const Mat xp_b = stacked * wi_b.mat();
  auto scan = [&](const Mat& xp, const ad::Tensor& wh, const ad::Tensor& b,
                  bool reverse, Eigen::Index out_col) {
    Mat h = Mat::Zero(batch, units), c = Mat::Zero(batch, units);
    Mat gates(batch, 4 * units);
    for (Eigen::Index s = 0; s < steps; ++s) {
      const Eigen::Index t = reverse ? steps - 1 - s : s;
      gates.noalias() = xp.middleRows(t * batch, batch);
      gates.noalias() += h * wh.mat();
      gates.rowwise() += Eigen::RowVectorXd::Map(b.v.data(), 4 * units);
      const auto i_g =
          (1.0 + (-gates.leftCols(units).array()).exp()).inverse();
      const auto f_g =
          (1.0 + (-gates.middleCols(units, units).array()).exp()).inverse();
      const auto g_g = gates.middleCols(2 * units, units).array().tanh();
      const auto o_g =
          (1.0 + (-gates.rightCols(units).array()).exp()).inverse();
      c.array() = f_g * c.array() + i_g * g_g;
      h.array() = o_g * c.array().tanh();
      out.block(t * batch, out_col, batch, units) = h;
    }
  };
  scan(xp_f, wh_f, b_f, false, 0);
  scan(xp_b, wh_b, b_b, true, units);
  return out;
}

}  // namespace jnf_detail

inline JnfInference jnf_infer(const SpectrogramStack& x,
                              const ad::Params& params, const JnfConfig& cfg,
                              bool want_features = false) {
  using namespace ad;
  using namespace jnf_detail;
  if (x.num_channels() != cfg.mics || x.bins != cfg.bins())
    throw ShapeError("jnf_infer: input does not match config");
  const Eigen::Index bins = x.bins, frames = x.frames;
  const Eigen::Index mics = cfg.mics;

  const Arr h0_arr = input_features_fmajor(x);
  ConstMatMap h0(h0_arr.data(), bins * frames, 2 * mics);

  JnfInference out;
  if (want_features) {
    // h0 per frame: concat over f of the 2M input block.
    out.features.h0 = Tensor(frames, bins * 2 * mics);
    for (Eigen::Index t = 0; t < frames; ++t)
      for (Eigen::Index f = 0; f < bins; ++f)
        out.features.h0.mat().row(t).segment(f * 2 * mics, 2 * mics) =
            h0.row(f * frames + t);
  }

  const Mat h1_fm = plain_bilstm(
      Mat(h0), bins, frames, params.at("blstm1.fwd.w_ih"),
      params.at("blstm1.fwd.w_hh"), params.at("blstm1.fwd.b"),
      params.at("blstm1.bwd.w_ih"), params.at("blstm1.bwd.w_hh"),
      params.at("blstm1.bwd.b"));

  if (want_features) {
    out.features.h1 = Tensor(frames, bins * 2 * cfg.u1);
    for (Eigen::Index t = 0; t < frames; ++t)
      for (Eigen::Index f = 0; f < bins; ++f)
        out.features.h1.mat().row(t).segment(f * 2 * cfg.u1, 2 * cfg.u1) =
            h1_fm.row(f * frames + t);
  }

  // Regroup to time-major for the narrow-band layer.
  Mat h1_tm(frames * bins, 2 * cfg.u1);
  for (Eigen::Index t = 0; t < frames; ++t)
    for (Eigen::Index f = 0; f < bins; ++f)
      h1_tm.row(t * bins + f) = h1_fm.row(f * frames + t);

  const Mat h2_tm = plain_bilstm(
      h1_tm, frames, bins, params.at("blstm2.fwd.w_ih"),
      params.at("blstm2.fwd.w_hh"), params.at("blstm2.fwd.b"),
      params.at("blstm2.bwd.w_ih"), params.at("blstm2.bwd.w_hh"),
      params.at("blstm2.bwd.b"));

  if (want_features) {
    out.features.h2 = Tensor(frames, bins * 2 * cfg.u2);
    for (Eigen::Index t = 0; t < frames; ++t)
      out.features.h2.mat().row(t) =
          Eigen::RowVectorXd::Map(h2_tm.data() + t * bins * 2 * cfg.u2,
                                  bins * 2 * cfg.u2);
  }

  Mat raw = h2_tm * params.at("fc.w").mat();
  raw.rowwise() += Eigen::RowVectorXd::Map(params.at("fc.b").v.data(), 2);
  raw = raw.array().tanh();

  out.mask.bins = static_cast<int>(bins);
  out.mask.frames = static_cast<int>(frames);
  out.mask.values.resize(static_cast<std::size_t>(bins) * frames);
  for (Eigen::Index t = 0; t < frames; ++t)
    for (Eigen::Index f = 0; f < bins; ++f)
      out.mask.values[static_cast<std::size_t>(f) * frames + t] = {
          decompress_component(raw(t * bins + f, 0)),
          decompress_component(raw(t * bins + f, 1))};
  return out;
}

}  // namespace nssf
