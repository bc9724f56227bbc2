#include <gtest/gtest.h>

#include "nssf/rng.hpp"
#include "nssf/stft.hpp"

namespace {

using namespace nssf;

AudioSignal random_signal(int n, std::uint64_t seed) {
  AudioSignal s;
  Rng r(seed);
  s.samples.resize(n);
  for (auto& v : s.samples) v = r.normal();
  return s;
}

TEST(Stft, FrameCountFormula) {
  // 7 s at 16 kHz, frame 512, shift 256.
  StftConfig cfg{512, 256};
  EXPECT_EQ(cfg.num_frames(112000), 436);
  EXPECT_EQ(cfg.bins(), 257);
  StftConfig tiny{128, 64};
  EXPECT_EQ(tiny.bins(), 65);
}

TEST(Stft, SinusoidConcentratesInItsBin) {
  // Bin-centered sinusoid with periodic Hann: >99% of the energy stays in
  // the bin and its two window sidelobes; check the target bin dominates.
  StftConfig cfg{512, 256};
  const int bin = 40;
  const double freq = static_cast<double>(bin) * 16000 / cfg.frame_len;
  AudioSignal s;
  s.samples.resize(16000);
  for (int i = 0; i < 16000; ++i)
    s.samples[i] = std::sin(2 * M_PI * freq * i / 16000.0);
  const SpectrogramStack st = analyze(s, cfg);
  double in_bin = 0.0, total = 0.0;
  for (int t = 0; t < st.frames; ++t) {
    for (int f = 0; f < st.bins; ++f) {
      const double e = std::norm(st.at(0, f, t));
      total += e;
      if (std::abs(f - bin) <= 1) in_bin += e;  // Hann spreads one bin wide
    }
  }
  EXPECT_GT(in_bin / total, 0.99);
}

TEST(Stft, ZeroSignalGivesZeroStack) {
  StftConfig cfg{128, 64};
  AudioSignal s;
  s.samples.assign(4000, 0.0);
  const SpectrogramStack st = analyze(s, cfg);
  for (int f = 0; f < st.bins; ++f)
    for (int t = 0; t < st.frames; ++t)
      EXPECT_EQ(st.at(0, f, t), std::complex<double>(0.0, 0.0));
}

TEST(Stft, TooShortThrows) {
  StftConfig cfg{512, 256};
  AudioSignal s;
  s.samples.assign(100, 0.0);
  EXPECT_THROW(analyze(s, cfg), SignalTooShort);
}

TEST(Stft, RoundTripBothPaperConfigs) {
  for (const StftConfig cfg : {StftConfig{512, 256}, StftConfig{1024, 512}}) {
    const AudioSignal x = random_signal(112000, 17);
    const SpectrogramStack st = analyze(x, cfg);
    const MultichannelAudio y = synthesize(st);
    // Interior: skip one frame at each edge.
    const std::size_t lo = cfg.frame_len;
    const std::size_t hi = y.channels[0].size() - cfg.frame_len;
    double err = 0, ref = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = y.channels[0][i] - x.samples[i];
      err += d * d;
      ref += x.samples[i] * x.samples[i];
    }
    EXPECT_LT(std::sqrt(err / ref), 1e-6) << "frame " << cfg.frame_len;
  }
}

TEST(Stft, AnalyzeIsLinear) {
  StftConfig cfg{128, 64};
  const AudioSignal x = random_signal(2000, 1), y = random_signal(2000, 2);
  AudioSignal z;
  z.samples.resize(2000);
  for (int i = 0; i < 2000; ++i)
    z.samples[i] = 2.5 * x.samples[i] - 1.25 * y.samples[i];
  const SpectrogramStack sx = analyze(x, cfg), sy = analyze(y, cfg),
                         sz = analyze(z, cfg);
  for (int f = 0; f < sz.bins; ++f)
    for (int t = 0; t < sz.frames; ++t) {
      const std::complex<double> want =
          2.5 * sx.at(0, f, t) - 1.25 * sy.at(0, f, t);
      EXPECT_NEAR(std::abs(sz.at(0, f, t) - want), 0.0, 1e-9);
    }
}

TEST(Stft, ParsevalWithinWindowingConstant) {
  // For interior frames, sum_f |X(f,t)|^2 (two-sided) equals the windowed
  // frame energy; compare against a direct computation.
  StftConfig cfg{512, 256};
  const AudioSignal x = random_signal(8192, 23);
  const SpectrogramStack st = analyze(x, cfg);
  const std::vector<double> win = hann_periodic(cfg.frame_len);
  for (int t = 1; t + 1 < st.frames; ++t) {
    double frame_e = 0.0;
    for (int i = 0; i < cfg.frame_len; ++i) {
      const double v = x.samples[t * cfg.shift + i] * win[i];
      frame_e += v * v;
    }
    double spec_e = 0.0;
    for (int f = 0; f < st.bins; ++f) {
      const double e = std::norm(st.at(0, f, t));
      const bool edge = f == 0 || f == st.bins - 1;
      spec_e += edge ? e : 2.0 * e;
    }
    spec_e /= cfg.frame_len;
    EXPECT_NEAR(spec_e / frame_e, 1.0, 1e-6);
  }
}

TEST(FrameLabels, CenterTimeRule) {
  StftConfig cfg{128, 64};
  ActivityTimeline tl;
  tl.segments = {{0.0, 0.5, Active::kSource1}, {0.5, 1.0, Active::kSource2}};
  // High flat energy so no silence relabeling.
  const int frames = cfg.num_frames(16000);
  std::vector<double> energy(frames, 1.0);
  const FrameLabels labels = frame_labels(tl, cfg, energy);
  ASSERT_EQ(labels.size(), frames);
  for (int t = 0; t < frames; ++t) {
    const double center = (t * cfg.shift + 0.5 * cfg.frame_len) / 16000.0;
    EXPECT_EQ(labels.labels[t],
              center < 0.5 ? Active::kSource1 : Active::kSource2);
  }
}

TEST(FrameLabels, LowEnergyBecomesSilence) {
  StftConfig cfg{128, 64};
  ActivityTimeline tl;
  tl.segments = {{0.0, 1.0, Active::kSource2}};
  std::vector<double> energy(100, 1.0);
  energy[50] = 1e-6;  // -60 dB vs median -> silence
  energy[51] = 1e-3;  // -30 dB vs median -> keeps its label
  const FrameLabels labels = frame_labels(tl, cfg, energy);
  EXPECT_EQ(labels.labels[50], Active::kSilence);
  EXPECT_EQ(labels.labels[51], Active::kSource2);
  EXPECT_EQ(labels.labels[0], Active::kSource2);
}

TEST(FrameLabels, TotalAndDeterministic) {
  StftConfig cfg{512, 256};
  ActivityTimeline tl;
  tl.segments = {{0.0, 2.0, Active::kSource1},
                 {2.0, 5.0, Active::kSource2},
                 {5.0, 7.0, Active::kSource1}};
  Rng r(5);
  std::vector<double> energy(436);
  for (auto& e : energy) e = std::abs(r.normal()) + 0.1;
  const FrameLabels a = frame_labels(tl, cfg, energy);
  const FrameLabels b = frame_labels(tl, cfg, energy);
  ASSERT_EQ(a.size(), 436);
  EXPECT_EQ(a.labels, b.labels);
}

}  // namespace
