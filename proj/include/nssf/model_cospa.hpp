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
#include <utility>
#include <vector>

#include "nssf/layers.hpp"
#include "nssf/masks.hpp"
#include "nssf/stft.hpp"

namespace nssf {

// COSPA: per-channel encoders, concatenation, compandor (complex FC ->
// complex GRU -> complex FC), per-channel decoders producing one complex
// mask per channel, combined by filter-and-sum.
//
// Encoders/decoders are complex affine maps shared across channels but
// trained per frequency group: bins are grouped in strides of 8 (F_r
// groups), each group mapping 8 bins to E features. This keeps the central
// fully connected layer at M*E*F_r inputs.
//
// Feature taps, per frame tau: h_in in C^{U_in} after the first complex FC
// and activation, h_out in C^{U_out} after the GRU.

struct CospaConfig {
  int mics = 3;
  int frame_len = 1024;
  int e_feat = 32;
  int group = 8;
  int u_in = 128;
  int u_out = 128;

  StftConfig stft() const { return {frame_len, frame_len / 2}; }
  int bins() const { return frame_len / 2 + 1; }
  int groups() const { return (bins() + group - 1) / group; }
  int compandor_width() const { return mics * e_feat * groups(); }

  static CospaConfig paper() { return {3, 1024, 32, 8, 128, 128}; }
  static CospaConfig tiny() { return {3, 256, 8, 8, 16, 16}; }
};

inline ad::Params cospa_init_params(const CospaConfig& cfg, Rng& rng) {
  using namespace ad;
  Params p;
  const double ke = 1.0 / std::sqrt(static_cast<double>(cfg.group));
  for (int g = 0; g < cfg.groups(); ++g) {
    Rng r = rng.derive(100 + g);
    const std::string enc = "enc.g" + std::to_string(g);
    p[enc + ".w_re"] = init_uniform(cfg.group, cfg.e_feat, ke, r);
    p[enc + ".w_im"] = init_uniform(cfg.group, cfg.e_feat, ke, r);
    p[enc + ".b_re"] = Tensor(1, cfg.e_feat);
    p[enc + ".b_im"] = Tensor(1, cfg.e_feat);
    const double kd = 1.0 / std::sqrt(static_cast<double>(cfg.e_feat));
    const std::string dec = "dec.g" + std::to_string(g);
    p[dec + ".w_re"] = init_uniform(cfg.e_feat, cfg.group, kd, r);
    p[dec + ".w_im"] = init_uniform(cfg.e_feat, cfg.group, kd, r);
    p[dec + ".b_re"] = Tensor(1, cfg.group);
    p[dec + ".b_im"] = Tensor(1, cfg.group);
  }
  const int width = cfg.compandor_width();
  Rng rf = rng.derive(7);
  const double ki = 1.0 / std::sqrt(static_cast<double>(width));
  p["fc_in.w_re"] = init_uniform(width, cfg.u_in, ki, rf);
  p["fc_in.w_im"] = init_uniform(width, cfg.u_in, ki, rf);
  p["fc_in.b_re"] = Tensor(1, cfg.u_in);
  p["fc_in.b_im"] = Tensor(1, cfg.u_in);
  const double ko = 1.0 / std::sqrt(static_cast<double>(cfg.u_out));
  p["fc_out.w_re"] = init_uniform(cfg.u_out, width, ko, rf);
  p["fc_out.w_im"] = init_uniform(cfg.u_out, width, ko, rf);
  p["fc_out.b_re"] = Tensor(1, width);
  p["fc_out.b_im"] = Tensor(1, width);

  Rng rg = rng.derive(8);
  const ComplexGruWeights gw = gru_complex_init(cfg.u_in, cfg.u_out, rg);
  p["gru.wz_re"] = gw.wz_re;
  p["gru.wz_im"] = gw.wz_im;
  p["gru.wr_re"] = gw.wr_re;
  p["gru.wr_im"] = gw.wr_im;
  p["gru.wh_re"] = gw.wh_re;
  p["gru.wh_im"] = gw.wh_im;
  p["gru.bz_re"] = gw.bz_re;
  p["gru.bz_im"] = gw.bz_im;
  p["gru.br_re"] = gw.br_re;
  p["gru.br_im"] = gw.br_im;
  p["gru.bh_re"] = gw.bh_re;
  p["gru.bh_im"] = gw.bh_im;
  return p;
}

namespace cospa_detail {

// Per-channel time-major spectrogram planes [T x F].
inline void channel_planes(const SpectrogramStack& x, int m, ad::Arr& re,
                           ad::Arr& im) {
  const Eigen::Index bins = x.bins, frames = x.frames;
  re.resize(frames * bins);
  im.resize(frames * bins);
  for (Eigen::Index f = 0; f < bins; ++f)
    for (Eigen::Index t = 0; t < frames; ++t) {
      const auto& v = x.at(m, static_cast<int>(f), static_cast<int>(t));
      re[t * bins + f] = v.real();
      im[t * bins + f] = v.imag();
    }
}

inline ad::CVar cvar_from(const std::map<std::string, ad::Var>& leaves,
                          const std::string& base) {
  return {leaves.at(base + "_re"), leaves.at(base + "_im")};
}

}  // namespace cospa_detail

struct CospaGraph {
  std::vector<ad::CVar> masks;  // per channel, [T x F]
  int bins = 0;
  int frames = 0;
};

// Differentiable forward pass. `bypass_gru` replaces the GRU with identity
// (requires u_in == u_out); it exists to expose the GRU as the only
// time-coupling in tests.
inline CospaGraph cospa_forward_leaves(
    ad::Tape& tape, const SpectrogramStack& x,
    const std::map<std::string, ad::Var>& leaves, const CospaConfig& cfg,
    bool bypass_gru = false) {
  using namespace ad;
  using namespace cospa_detail;
  if (x.num_channels() != cfg.mics || x.bins != cfg.bins())
    throw ShapeError("cospa_forward: input does not match config");
  const Eigen::Index bins = x.bins, frames = x.frames;
  const int n_groups = cfg.groups();

  // Channel planes as constants.
  std::vector<CVar> xs(cfg.mics);
  for (int m = 0; m < cfg.mics; ++m) {
    Arr re, im;
    channel_planes(x, m, re, im);
    xs[m] = {tape.constant(std::move(re), frames, bins),
             tape.constant(std::move(im), frames, bins)};
  }
  Var zero_pad;  // shared zero block for the last partial group

  // Encoders: per (channel, group) complex affine + split tanh.
  std::vector<Var> enc_re, enc_im;
  for (int m = 0; m < cfg.mics; ++m) {
    for (int g = 0; g < n_groups; ++g) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(g) * cfg.group;
      const Eigen::Index c1 = std::min<Eigen::Index>(c0 + cfg.group, bins);
      CVar block{slice_cols(xs[m].re, c0, c1), slice_cols(xs[m].im, c0, c1)};
      if (c1 - c0 < cfg.group) {
        if (!zero_pad.valid())
          zero_pad = tape.constant(
              Arr::Zero(frames * (cfg.group - (c1 - c0))), frames,
              cfg.group - (c1 - c0));
        block = {concat_cols(block.re, zero_pad),
                 concat_cols(block.im, zero_pad)};
      }
      CVar w = cvar_from(leaves, "enc.g" + std::to_string(g) + ".w");
      CVar b = cvar_from(leaves, "enc.g" + std::to_string(g) + ".b");
      CVar e = split_tanh(complex_affine(block, w, b));
      enc_re.push_back(e.re);
      enc_im.push_back(e.im);
    }
  }
  // Concatenate all channels: [T x M*F_r*E], channel-major blocks.
  Var cat_re = enc_re[0], cat_im = enc_im[0];
  for (std::size_t i = 1; i < enc_re.size(); ++i) {
    cat_re = concat_cols(cat_re, enc_re[i]);
    cat_im = concat_cols(cat_im, enc_im[i]);
  }

  // Compandor: complex FC -> split tanh -> h_in.
  CVar fc_in_w = cvar_from(leaves, "fc_in.w");
  CVar fc_in_b = cvar_from(leaves, "fc_in.b");
  CVar h_in = split_tanh(complex_affine({cat_re, cat_im}, fc_in_w, fc_in_b));

  // Complex GRU over time (the only recurrent stage).
  CVar h_out;
  if (bypass_gru) {
    require(cfg.u_in == cfg.u_out, "bypass_gru requires u_in == u_out");
    h_out = h_in;
  } else {
    ComplexGruVars gv;
    gv.wz = cvar_from(leaves, "gru.wz");
    gv.wr = cvar_from(leaves, "gru.wr");
    gv.wh = cvar_from(leaves, "gru.wh");
    gv.bz = cvar_from(leaves, "gru.bz");
    gv.br = cvar_from(leaves, "gru.br");
    gv.bh = cvar_from(leaves, "gru.bh");
    gv.units = cfg.u_out;
    CVar h{tape.constant(Arr::Zero(cfg.u_out), 1, cfg.u_out),
           tape.constant(Arr::Zero(cfg.u_out), 1, cfg.u_out)};
    std::vector<Var> outs_re(frames), outs_im(frames);
    for (Eigen::Index t = 0; t < frames; ++t) {
      CVar xt{slice_rows(h_in.re, t, t + 1), slice_rows(h_in.im, t, t + 1)};
      h = gru_cell_complex(xt, h, gv);
      outs_re[t] = h.re;
      outs_im[t] = h.im;
    }
    h_out = {stack_rows(outs_re), stack_rows(outs_im)};
  }

  CVar fc_out_w = cvar_from(leaves, "fc_out.w");
  CVar fc_out_b = cvar_from(leaves, "fc_out.b");
  CVar mid = split_tanh(complex_affine(h_out, fc_out_w, fc_out_b));

  // Decoders: per (channel, group) complex affine back to bins.
  CospaGraph out;
  out.bins = static_cast<int>(bins);
  out.frames = static_cast<int>(frames);
  const int block_w = cfg.e_feat;
  for (int m = 0; m < cfg.mics; ++m) {
    Var mask_re, mask_im;
    for (int g = 0; g < n_groups; ++g) {
      const Eigen::Index off =
          (static_cast<Eigen::Index>(m) * n_groups + g) * block_w;
      CVar seg{slice_cols(mid.re, off, off + block_w),
               slice_cols(mid.im, off, off + block_w)};
      CVar w = cvar_from(leaves, "dec.g" + std::to_string(g) + ".w");
      CVar b = cvar_from(leaves, "dec.g" + std::to_string(g) + ".b");
      CVar d = complex_affine(seg, w, b);
      const Eigen::Index c0 = static_cast<Eigen::Index>(g) * cfg.group;
      const Eigen::Index width = std::min<Eigen::Index>(cfg.group, bins - c0);
      if (width < cfg.group)
        d = {slice_cols(d.re, 0, width), slice_cols(d.im, 0, width)};
      mask_re = g == 0 ? d.re : concat_cols(mask_re, d.re);
      mask_im = g == 0 ? d.im : concat_cols(mask_im, d.im);
    }
    out.masks.push_back({mask_re, mask_im});
  }
  return out;
}

inline CospaGraph cospa_forward(ad::Tape& tape, const SpectrogramStack& x,
                                const ad::Params& params,
                                const CospaConfig& cfg,
                                bool params_require_grad = true,
                                bool bypass_gru = false) {
  const auto leaves = ad::make_leaves(tape, params, params_require_grad);
  return cospa_forward_leaves(tape, x, leaves, cfg, bypass_gru);
}

// Per-frame compandor features from the graph are not retained; the plain
// inference below recomputes them cheaply for probing.

enum class CospaStage { kHIn, kHOut };

struct CospaFeatureSet {
  ad::Tensor h_in;   // [T x 2U_in]: re block then im block
  ad::Tensor h_out;  // [T x 2U_out]
};

struct CospaInference {
  std::vector<ComplexMask> masks;
  CospaFeatureSet features;
};

namespace cospa_detail {

using ad::Mat;

struct CMat {
  Mat re, im;
};

inline CMat cmatmul(const CMat& a, const Mat& wre, const Mat& wim) {
  CMat r;
  r.re.noalias() = a.re * wre;
  r.re.noalias() -= a.im * wim;
  r.im.noalias() = a.re * wim;
  r.im.noalias() += a.im * wre;
  return r;
}

inline void add_bias(CMat& a, const ad::Tensor& bre, const ad::Tensor& bim) {
  a.re.rowwise() += Eigen::RowVectorXd::Map(bre.v.data(), bre.cols);
  a.im.rowwise() += Eigen::RowVectorXd::Map(bim.v.data(), bim.cols);
}

inline void split_tanh_inplace(CMat& a) {
  a.re = a.re.array().tanh();
  a.im = a.im.array().tanh();
}

}  // namespace cospa_detail

inline CospaInference cospa_infer(const SpectrogramStack& x,
                                  const ad::Params& p, const CospaConfig& cfg,
                                  bool want_features = false) {
  using namespace ad;
  using namespace cospa_detail;
  if (x.num_channels() != cfg.mics || x.bins != cfg.bins())
    throw ShapeError("cospa_infer: input does not match config");
  const Eigen::Index bins = x.bins, frames = x.frames;
  const int n_groups = cfg.groups();

  // Encode each channel.
  Mat cat_re(frames, cfg.compandor_width()), cat_im(frames, cfg.compandor_width());
  for (int m = 0; m < cfg.mics; ++m) {
    Arr re, im;
    channel_planes(x, m, re, im);
    ConstMatMap xre(re.data(), frames, bins), xim(im.data(), frames, bins);
    for (int g = 0; g < n_groups; ++g) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(g) * cfg.group;
      const Eigen::Index w = std::min<Eigen::Index>(cfg.group, bins - c0);
      CMat block{Mat::Zero(frames, cfg.group), Mat::Zero(frames, cfg.group)};
      block.re.leftCols(w) = xre.middleCols(c0, w);
      block.im.leftCols(w) = xim.middleCols(c0, w);
      const std::string enc = "enc.g" + std::to_string(g);
      CMat e = cmatmul(block, Mat(p.at(enc + ".w_re").mat()),
                       Mat(p.at(enc + ".w_im").mat()));
      add_bias(e, p.at(enc + ".b_re"), p.at(enc + ".b_im"));
      split_tanh_inplace(e);
      const Eigen::Index off =
          (static_cast<Eigen::Index>(m) * n_groups + g) * cfg.e_feat;
      cat_re.middleCols(off, cfg.e_feat) = e.re;
      cat_im.middleCols(off, cfg.e_feat) = e.im;
    }
  }

  CMat h_in = cmatmul({cat_re, cat_im}, Mat(p.at("fc_in.w_re").mat()),
                      Mat(p.at("fc_in.w_im").mat()));
  add_bias(h_in, p.at("fc_in.b_re"), p.at("fc_in.b_im"));
  split_tanh_inplace(h_in);

  // Complex GRU scan (split gates, as in the tape path).
  const Mat wz_re = p.at("gru.wz_re").mat(), wz_im = p.at("gru.wz_im").mat();
  const Mat wr_re = p.at("gru.wr_re").mat(), wr_im = p.at("gru.wr_im").mat();
  const Mat wh_re = p.at("gru.wh_re").mat(), wh_im = p.at("gru.wh_im").mat();
  Mat hout_re(frames, cfg.u_out), hout_im(frames, cfg.u_out);
  Mat h_re = Mat::Zero(1, cfg.u_out), h_im = Mat::Zero(1, cfg.u_out);
  auto sigm = [](const Mat& m) {
    return Mat(((1.0 + (-m.array()).exp()).inverse()).matrix());
  };
  for (Eigen::Index t = 0; t < frames; ++t) {
    Mat xin_re(1, cfg.u_in + cfg.u_out), xin_im(1, cfg.u_in + cfg.u_out);
    xin_re << h_in.re.row(t), h_re;
    xin_im << h_in.im.row(t), h_im;
    CMat zp = cmatmul({xin_re, xin_im}, wz_re, wz_im);
    add_bias(zp, p.at("gru.bz_re"), p.at("gru.bz_im"));
    const Mat z_re = sigm(zp.re), z_im = sigm(zp.im);
    CMat rp = cmatmul({xin_re, xin_im}, wr_re, wr_im);
    add_bias(rp, p.at("gru.br_re"), p.at("gru.br_im"));
    const Mat r_re = sigm(rp.re), r_im = sigm(rp.im);
    Mat cin_re(1, cfg.u_in + cfg.u_out), cin_im(1, cfg.u_in + cfg.u_out);
    cin_re << h_in.re.row(t), Mat(r_re.array() * h_re.array());
    cin_im << h_in.im.row(t), Mat(r_im.array() * h_im.array());
    CMat cp = cmatmul({cin_re, cin_im}, wh_re, wh_im);
    add_bias(cp, p.at("gru.bh_re"), p.at("gru.bh_im"));
    split_tanh_inplace(cp);
    h_re = ((1.0 - z_re.array()) * h_re.array() + z_re.array() * cp.re.array())
               .matrix();
    h_im = ((1.0 - z_im.array()) * h_im.array() + z_im.array() * cp.im.array())
               .matrix();
    hout_re.row(t) = h_re;
    hout_im.row(t) = h_im;
  }

  CospaInference out;
  if (want_features) {
    out.features.h_in = Tensor(frames, 2 * cfg.u_in);
    out.features.h_in.mat().leftCols(cfg.u_in) = h_in.re;
    out.features.h_in.mat().rightCols(cfg.u_in) = h_in.im;
    out.features.h_out = Tensor(frames, 2 * cfg.u_out);
    out.features.h_out.mat().leftCols(cfg.u_out) = hout_re;
    out.features.h_out.mat().rightCols(cfg.u_out) = hout_im;
  }

  CMat mid = cmatmul({hout_re, hout_im}, Mat(p.at("fc_out.w_re").mat()),
                     Mat(p.at("fc_out.w_im").mat()));
  add_bias(mid, p.at("fc_out.b_re"), p.at("fc_out.b_im"));
  split_tanh_inplace(mid);

  for (int m = 0; m < cfg.mics; ++m) {
    ComplexMask mask;
    mask.bins = static_cast<int>(bins);
    mask.frames = static_cast<int>(frames);
    mask.values.resize(static_cast<std::size_t>(bins) * frames);
    for (int g = 0; g < n_groups; ++g) {
      const Eigen::Index off =
          (static_cast<Eigen::Index>(m) * n_groups + g) * cfg.e_feat;
      const std::string dec = "dec.g" + std::to_string(g);
      CMat d = cmatmul({Mat(mid.re.middleCols(off, cfg.e_feat)),
                        Mat(mid.im.middleCols(off, cfg.e_feat))},
                       Mat(p.at(dec + ".w_re").mat()),
                       Mat(p.at(dec + ".w_im").mat()));
      add_bias(d, p.at(dec + ".b_re"), p.at(dec + ".b_im"));
      const Eigen::Index c0 = static_cast<Eigen::Index>(g) * cfg.group;
      const Eigen::Index w = std::min<Eigen::Index>(cfg.group, bins - c0);
      for (Eigen::Index t = 0; t < frames; ++t)
        for (Eigen::Index j = 0; j < w; ++j)
          mask.values[static_cast<std::size_t>(c0 + j) * frames + t] = {
              d.re(t, j), d.im(t, j)};
    }
    out.masks.push_back(std::move(mask));
  }
  return out;
}

}  // namespace nssf
