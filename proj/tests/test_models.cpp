#include <gtest/gtest.h>

#include "nssf/beamform.hpp"
#include "nssf/model_cospa.hpp"
#include "nssf/model_jnf.hpp"

namespace {

using namespace nssf;
using ad::Params;
using ad::Tape;

SpectrogramStack random_stack(const StftConfig& cfg, int mics, int samples,
                              std::uint64_t seed) {
  Rng r(seed);
  MultichannelAudio x;
  x.channels.assign(mics, {});
  for (auto& ch : x.channels) {
    ch.resize(samples);
    for (auto& v : ch) v = 0.3 * r.normal();
  }
  return analyze(x, cfg);
}

// --------------------------------------------------------------------------
// Mask decompression

TEST(MaskDecompression, ZeroMapsToZero) {
  EXPECT_EQ(decompress_component(0.0), 0.0);
}

TEST(MaskDecompression, ClosedFormHalf) {
  // o = 0.5, K = 10, C = 0.1: m = 10 ln 3.
  EXPECT_NEAR(decompress_component(0.5), 10.0 * std::log(3.0), 1e-9);
}

TEST(MaskDecompression, CompressDecompressRoundTrip) {
  for (double o = -0.99; o <= 0.99; o += 0.01)
    EXPECT_NEAR(compress_component(decompress_component(o)), o, 1e-9);
}

TEST(MaskDecompression, ClampGuardsLogSingularity) {
  EXPECT_TRUE(std::isfinite(decompress_component(1.0)));
  EXPECT_TRUE(std::isfinite(decompress_component(-1.0)));
}

// --------------------------------------------------------------------------
// Single-channel masking (Eq.-(3) style)

TEST(ApplyMask, UnitZeroAndPhaseRotation) {
  const StftConfig cfg{128, 64};
  const SpectrogramStack x = random_stack(cfg, 3, 4000, 1);
  ComplexMask unit;
  unit.bins = x.bins;
  unit.frames = x.frames;
  unit.values.assign(static_cast<std::size_t>(x.bins) * x.frames, {1.0, 0.0});
  const auto u = apply_mask(x, unit, 0);
  for (int f = 0; f < x.bins; ++f)
    for (int t = 0; t < x.frames; ++t)
      EXPECT_EQ(u[std::size_t(f) * x.frames + t], x.at(0, f, t));

  ComplexMask imag = unit;
  for (auto& v : imag.values) v = {0.0, 1.0};
  const auto rot = apply_mask(x, imag, 1);
  for (int f = 0; f < x.bins; ++f)
    for (int t = 0; t < x.frames; ++t) {
      const auto& got = rot[std::size_t(f) * x.frames + t];
      EXPECT_NEAR(std::abs(got), std::abs(x.at(1, f, t)), 1e-12);
      EXPECT_NEAR((got / x.at(1, f, t)).imag(), 1.0, 1e-12);
    }

  ComplexMask zero = unit;
  for (auto& v : zero.values) v = {0.0, 0.0};
  for (const auto& v : apply_mask(x, zero, 0))
    EXPECT_EQ(v, std::complex<double>(0.0, 0.0));

  ComplexMask bad = unit;
  bad.bins -= 1;
  bad.values.resize(std::size_t(bad.bins) * bad.frames);
  EXPECT_THROW(apply_mask(x, bad, 0), ShapeError);
}

// --------------------------------------------------------------------------
// FT-JNF

TEST(Jnf, MaskShapeAndDeterminism) {
  const JnfConfig cfg = JnfConfig::tiny();
  Rng rng(2);
  const Params p = jnf_init_params(cfg, rng);
  const SpectrogramStack x = random_stack(cfg.stft(), 3, 4000, 3);
  const JnfInference a = jnf_infer(x, p, cfg);
  const JnfInference b = jnf_infer(x, p, cfg);
  EXPECT_EQ(a.mask.bins, cfg.bins());
  EXPECT_EQ(a.mask.frames, x.frames);
  for (std::size_t i = 0; i < a.mask.values.size(); ++i)
    EXPECT_EQ(a.mask.values[i], b.mask.values[i]);
}

TEST(Jnf, FeatureSizesMatchArchitecture) {
  // Paper preset on a one-frame signal: 2FM / 2FU1 / 2FU2.
  const JnfConfig cfg = JnfConfig::paper();
  Rng rng(4);
  const Params p = jnf_init_params(cfg, rng);
  const SpectrogramStack x = random_stack(cfg.stft(), 3, 512, 5);
  ASSERT_EQ(x.frames, 1);
  const JnfInference inf = jnf_infer(x, p, cfg, true);
  EXPECT_EQ(inf.features.h0.cols, 2 * 257 * 3);
  EXPECT_EQ(inf.features.h1.cols, 131584);  // 2 * 257 * 256
  EXPECT_EQ(inf.features.h2.cols, 2 * 257 * 128);
  EXPECT_EQ(inf.features.h1.rows, 1);
}

TEST(Jnf, TrainForwardMatchesInference) {
  const JnfConfig cfg = JnfConfig::tiny();
  Rng rng(6);
  const Params p = jnf_init_params(cfg, rng);
  const SpectrogramStack x = random_stack(cfg.stft(), 3, 2000, 7);
  Tape tape;
  const JnfGraph g = jnf_forward(tape, x, p, cfg, false);
  const JnfInference inf = jnf_infer(x, p, cfg);
  for (int t = 0; t < x.frames; ++t)
    for (int f = 0; f < x.bins; ++f) {
      const Eigen::Index row = static_cast<Eigen::Index>(t) * x.bins + f;
      EXPECT_NEAR(tape.value(g.mask_re)[row], inf.mask.at(f, t).real(), 1e-12);
      EXPECT_NEAR(tape.value(g.mask_im)[row], inf.mask.at(f, t).imag(), 1e-12);
    }
}

TEST(Jnf, ChannelPermutationChangesMask) {
  const JnfConfig cfg = JnfConfig::tiny();
  Rng rng(8);
  const Params p = jnf_init_params(cfg, rng);
  SpectrogramStack x = random_stack(cfg.stft(), 3, 2000, 9);
  const JnfInference a = jnf_infer(x, p, cfg);
  std::swap(x.channels[0], x.channels[2]);
  const JnfInference b = jnf_infer(x, p, cfg);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.mask.values.size(); ++i)
    diff = std::max(diff, std::abs(a.mask.values[i] - b.mask.values[i]));
  EXPECT_GT(diff, 1e-6);  // not permutation-invariant by construction
}

TEST(Jnf, WideBandLayerTreatsFramesIndependently) {
  // Editing frame tau of the input changes h1 only at tau.
  const JnfConfig cfg = JnfConfig::tiny();
  Rng rng(10);
  const Params p = jnf_init_params(cfg, rng);
  SpectrogramStack x = random_stack(cfg.stft(), 3, 2000, 11);
  const JnfInference a = jnf_infer(x, p, cfg, true);
  const int tau = 7;
  for (int m = 0; m < 3; ++m)
    for (int f = 0; f < x.bins; ++f) x.at(m, f, tau) += std::complex<double>(0.5, -0.25);
  const JnfInference b = jnf_infer(x, p, cfg, true);
  for (Eigen::Index t = 0; t < a.features.h1.rows; ++t) {
    const double row_diff =
        (a.features.h1.mat().row(t) - b.features.h1.mat().row(t))
            .cwiseAbs()
            .maxCoeff();
    if (t == tau) EXPECT_GT(row_diff, 1e-9);
    else EXPECT_EQ(row_diff, 0.0);
  }
}

// --------------------------------------------------------------------------
// COSPA

TEST(Cospa, MaskCountShapesAndFeatureDims) {
  const CospaConfig tiny = CospaConfig::tiny();
  Rng rng(12);
  const Params p = cospa_init_params(tiny, rng);
  const SpectrogramStack x = random_stack(tiny.stft(), 3, 4000, 13);
  const CospaInference inf = cospa_infer(x, p, tiny, true);
  ASSERT_EQ(inf.masks.size(), 3u);
  for (const auto& m : inf.masks) {
    EXPECT_EQ(m.bins, tiny.bins());
    EXPECT_EQ(m.frames, x.frames);
  }
  EXPECT_EQ(inf.features.h_in.cols, 2 * tiny.u_in);
  EXPECT_EQ(inf.features.h_out.cols, 2 * tiny.u_out);
  EXPECT_EQ(inf.features.h_in.rows, x.frames);

  // Paper preset dimensionality: U_in = U_out = 128.
  EXPECT_EQ(2 * CospaConfig::paper().u_in, 256);
  EXPECT_EQ(CospaConfig::paper().bins(), 513);
}

TEST(Cospa, TrainForwardMatchesInference) {
  const CospaConfig cfg = CospaConfig::tiny();
  Rng rng(14);
  const Params p = cospa_init_params(cfg, rng);
  const SpectrogramStack x = random_stack(cfg.stft(), 3, 3000, 15);
  Tape tape;
  const CospaGraph g = cospa_forward(tape, x, p, cfg, false);
  const CospaInference inf = cospa_infer(x, p, cfg);
  for (int m = 0; m < 3; ++m)
    for (int t = 0; t < x.frames; ++t)
      for (int f = 0; f < x.bins; ++f) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * x.bins + f;
        EXPECT_NEAR(tape.value(g.masks[m].re)[row],
                    inf.masks[m].at(f, t).real(), 1e-12);
        EXPECT_NEAR(tape.value(g.masks[m].im)[row],
                    inf.masks[m].at(f, t).imag(), 1e-12);
      }
}

TEST(Cospa, ChannelsCoupleThroughConcatenation) {
  const CospaConfig cfg = CospaConfig::tiny();
  Rng rng(16);
  const Params p = cospa_init_params(cfg, rng);
  SpectrogramStack x = random_stack(cfg.stft(), 3, 3000, 17);
  const CospaInference a = cospa_infer(x, p, cfg);
  for (auto& v : x.channels[2]) v = {0.0, 0.0};  // zero one channel
  const CospaInference b = cospa_infer(x, p, cfg);
  for (int m = 0; m < 3; ++m) {
    double diff = 0.0;
    for (std::size_t i = 0; i < a.masks[m].values.size(); ++i)
      diff = std::max(diff,
                      std::abs(a.masks[m].values[i] - b.masks[m].values[i]));
    EXPECT_GT(diff, 1e-9) << "mask " << m << " ignores channel 3";
  }
}

TEST(Cospa, GruIsTheOnlyTimeCoupling) {
  // With the GRU bypassed, editing frame tau changes the masks only at tau.
  const CospaConfig cfg = CospaConfig::tiny();
  Rng rng(18);
  const Params p = cospa_init_params(cfg, rng);
  SpectrogramStack x = random_stack(cfg.stft(), 3, 3000, 19);
  Tape ta, tb;
  const CospaGraph ga = cospa_forward(ta, x, p, cfg, false, true);
  const int tau = 5;
  for (int m = 0; m < 3; ++m)
    for (int f = 0; f < x.bins; ++f) x.at(m, f, tau) += std::complex<double>(0.4, 0.1);
  const CospaGraph gb = cospa_forward(tb, x, p, cfg, false, true);
  for (int m = 0; m < 3; ++m) {
    for (int t = 0; t < x.frames; ++t) {
      double diff = 0.0;
      for (int f = 0; f < x.bins; ++f) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * x.bins + f;
        diff = std::max(diff, std::abs(ta.value(ga.masks[m].re)[row] -
                                       tb.value(gb.masks[m].re)[row]));
        diff = std::max(diff, std::abs(ta.value(ga.masks[m].im)[row] -
                                       tb.value(gb.masks[m].im)[row]));
      }
      if (t == tau) EXPECT_GT(diff, 1e-9);
      else EXPECT_EQ(diff, 0.0);
    }
  }
}

// --------------------------------------------------------------------------
// Filter-and-sum (Eq.-(2) style)

TEST(ApplyMasks, AllOnesEqualsChannelSum) {
  const StftConfig cfg{128, 64};
  const SpectrogramStack x = random_stack(cfg, 3, 4000, 20);
  std::vector<ComplexMask> ones(3);
  for (auto& m : ones) {
    m.bins = x.bins;
    m.frames = x.frames;
    m.values.assign(std::size_t(x.bins) * x.frames, {1.0, 0.0});
  }
  const auto y = apply_masks(x, ones);
  for (int f = 0; f < x.bins; ++f)
    for (int t = 0; t < x.frames; ++t) {
      const std::complex<double> want =
          x.at(0, f, t) + x.at(1, f, t) + x.at(2, f, t);
      EXPECT_NEAR(std::abs(y[std::size_t(f) * x.frames + t] - want), 0.0,
                  1e-12);
    }
}

TEST(ApplyMasks, OneHotMaskSelectsChannel) {
  const StftConfig cfg{128, 64};
  const SpectrogramStack x = random_stack(cfg, 3, 4000, 21);
  std::vector<ComplexMask> masks(3);
  for (int m = 0; m < 3; ++m) {
    masks[m].bins = x.bins;
    masks[m].frames = x.frames;
    masks[m].values.assign(std::size_t(x.bins) * x.frames,
                           m == 0 ? std::complex<double>{1.0, 0.0}
                                  : std::complex<double>{0.0, 0.0});
  }
  const auto y = apply_masks(x, masks);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], x.channels[0][i]);
}

TEST(ApplyMasks, DsbWeightsAsMasksEqualsApplyDsb) {
  // Constant per-channel masks realize any DSB exactly.
  const StftConfig cfg{512, 256};
  const ArrayGeometry g = make_ula({3, 3, 1.5}, {1, 0, 0}, 3, 0.04);
  const SpectrogramStack x = random_stack(cfg, 3, 16000, 22);
  const SteeringVector w = dsb_weights(37.0, g, cfg);
  std::vector<ComplexMask> masks(3);
  for (int m = 0; m < 3; ++m) {
    masks[m].bins = x.bins;
    masks[m].frames = x.frames;
    masks[m].values.resize(std::size_t(x.bins) * x.frames);
    for (int f = 0; f < x.bins; ++f)
      for (int t = 0; t < x.frames; ++t)
        masks[m].values[std::size_t(f) * x.frames + t] = w.at(m, f);
  }
  const auto via_masks = apply_masks(x, masks);
  const auto via_dsb = apply_dsb(x, w);
  for (std::size_t i = 0; i < via_masks.size(); ++i)
    EXPECT_NEAR(std::abs(via_masks[i] - via_dsb[i]), 0.0, 1e-12);
}

TEST(ApplyMasks, LinearInTheInput) {
  const StftConfig cfg{128, 64};
  const SpectrogramStack x = random_stack(cfg, 3, 3000, 23);
  const SpectrogramStack y = random_stack(cfg, 3, 3000, 24);
  Rng r(25);
  std::vector<ComplexMask> masks(3);
  for (auto& m : masks) {
    m.bins = x.bins;
    m.frames = x.frames;
    m.values.resize(std::size_t(x.bins) * x.frames);
    for (auto& v : m.values) v = {r.normal(), r.normal()};
  }
  SpectrogramStack z = x;
  for (int m = 0; m < 3; ++m)
    for (std::size_t i = 0; i < z.channels[m].size(); ++i)
      z.channels[m][i] = 2.0 * x.channels[m][i] - 0.5 * y.channels[m][i];
  const auto fx = apply_masks(x, masks), fy = apply_masks(y, masks),
             fz = apply_masks(z, masks);
  for (std::size_t i = 0; i < fz.size(); ++i)
    EXPECT_NEAR(std::abs(fz[i] - (2.0 * fx[i] - 0.5 * fy[i])), 0.0, 1e-10);
}

}  // namespace
