#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "nssf/dataset.hpp"
#include "nssf/scene.hpp"

namespace {

using namespace nssf;
namespace fs = std::filesystem;

const UtterancePool& test_pool() {
  static const UtterancePool pool = make_synth_pool(3, 2, 2.0, 9001);
  return pool;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// --------------------------------------------------------------------------
// Rooms and geometry

TEST(SampleRoom, WithinTableRanges) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const RoomSpec r = sample_room(rng);
    EXPECT_GE(r.length, 4.0);
    EXPECT_LE(r.length, 8.0);
    EXPECT_GE(r.width, 4.0);
    EXPECT_LE(r.width, 8.0);
    EXPECT_GE(r.height, 1.0);
    EXPECT_LE(r.height, 4.0);
    EXPECT_GE(r.t60, 0.2);
    EXPECT_LE(r.t60, 0.5);
  }
}

TEST(SampleRoom, DeterministicUnderSeed) {
  Rng a(7), b(7);
  const RoomSpec ra = sample_room(a), rb = sample_room(b);
  EXPECT_EQ(ra.length, rb.length);
  EXPECT_EQ(ra.t60, rb.t60);
}

TEST(SampleRoom, MonteCarloCoversRanges) {
  // Empirical min/max of each field within 1% of the range endpoints.
  Rng rng(3);
  double lo[4] = {1e9, 1e9, 1e9, 1e9}, hi[4] = {0, 0, 0, 0};
  for (int i = 0; i < 10000; ++i) {
    const RoomSpec r = sample_room(rng);
    const double v[4] = {r.length, r.width, r.height, r.t60};
    for (int k = 0; k < 4; ++k) {
      lo[k] = std::min(lo[k], v[k]);
      hi[k] = std::max(hi[k], v[k]);
    }
  }
  const double lo_want[4] = {4, 4, 1, 0.2}, hi_want[4] = {8, 8, 4, 0.5};
  for (int k = 0; k < 4; ++k) {
    const double span = hi_want[k] - lo_want[k];
    EXPECT_LT(lo[k] - lo_want[k], 0.01 * span);
    EXPECT_LT(hi_want[k] - hi[k], 0.01 * span);
  }
}

TEST(DoaOf, EndfireBroadsideAndDiagonal) {
  const ArrayGeometry g = make_ula({0, 0, 0}, {1, 0, 0}, 3, 0.04);
  EXPECT_NEAR(doa_of({1, 0, 0}, g), 0.0, 1e-12);
  EXPECT_NEAR(doa_of({-2, 0, 0}, g), 180.0, 1e-12);
  EXPECT_NEAR(doa_of({0, 3, 0}, g), 90.0, 1e-12);
  EXPECT_NEAR(doa_of({1, 1, 0}, g), 45.0, 1e-12);
}

TEST(PlaceAtDoa, ExactDoaAndClearances) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const RoomSpec room = sample_room(rng);
    const ArrayGeometry array = sample_array(room, rng);
    const double want = rng.uniform(0.0, 180.0);
    const SourcePlacement p = place_at_doa(room, array, want, rng);
    EXPECT_NEAR(doa_of(p.position, array), want, 1e-9);
    EXPECT_TRUE(room.contains(p.position, 0.2 - 1e-9));
    EXPECT_GE(norm(p.position - array.center), 0.3);
  }
}

// --------------------------------------------------------------------------
// RIR

TEST(Rir, SabineCrossCheck) {
  // Independent Sabine arithmetic for one (room, t60) pair.
  RoomSpec room{5.0, 4.0, 3.0, 0.3};
  const double volume = 5.0 * 4.0 * 3.0;
  const double area = 2 * (5.0 * 4.0 + 5.0 * 3.0 + 4.0 * 3.0);
  const double alpha = 0.161 * volume / (0.3 * area);
  EXPECT_NEAR(sabine_absorption(room), alpha, 1e-12);
  EXPECT_NEAR(reflection_coefficient(room), std::sqrt(1.0 - alpha), 1e-12);
}

TEST(Rir, AnechoicSingleImpulse) {
  RoomSpec room{8.0, 6.0, 3.0, 0.0};
  // Distance chosen to land on an exact sample: 32 samples = 0.686 m.
  const Vec3 mic{2.0, 2.0, 1.0};
  const Vec3 src{2.0 + 0.686, 2.0, 1.0};
  const AudioSignal h = simulate_rir(room, src, mic);
  double off_peak = 0.0;
  for (std::size_t i = 0; i < h.samples.size(); ++i)
    if (i != 32) off_peak += std::abs(h.samples[i]);
  EXPECT_NEAR(h.samples[32], 1.0 / 0.686, 1e-9);
  EXPECT_LT(off_peak, 1e-9);
}

TEST(Rir, EndfireOnsetDifference) {
  RoomSpec room{8.0, 6.0, 3.0, 0.0};
  const Vec3 m1{2.0, 2.0, 1.0}, m2{2.04, 2.0, 1.0};
  const Vec3 src{6.0, 2.0, 1.0};
  AudioSignal h1 = simulate_rir(room, src, m1);
  AudioSignal h2 = simulate_rir(room, src, m2);
  // Delay difference from the cross-spectrum phase slope, least squares
  // over low bins (exact for pure delays).
  const int n = 512;
  h1.samples.resize(n, 0.0);
  h2.samples.resize(n, 0.0);
  std::vector<std::complex<double>> s1(n / 2 + 1), s2(n / 2 + 1);
  rfft(h1.samples.data(), n, s1.data());
  rfft(h2.samples.data(), n, s2.data());
  double num = 0, den = 0;
  for (int f = 1; f < 60; ++f) {
    // h1 is farther so it lags h2: arg(s2 conj(s1)) = +omega * delay_diff.
    const double phase = std::arg(s2[f] * std::conj(s1[f]));
    const double omega = 2.0 * M_PI * f / n;
    num += phase * omega;
    den += omega * omega;
  }
  EXPECT_NEAR(num / den, 0.04 / kSpeedOfSound * 16000.0, 0.02);
}

TEST(Rir, EnergyDecays) {
  RoomSpec room{5.0, 4.5, 2.5, 0.4};
  const AudioSignal h =
      simulate_rir(room, {1.5, 2.0, 1.2}, {3.2, 2.6, 1.2});
  const std::size_t half = h.samples.size() / 2;
  double early = 0, late = 0;
  for (std::size_t i = 0; i < h.samples.size(); ++i)
    (i < half ? early : late) += h.samples[i] * h.samples[i];
  EXPECT_GT(early, late);
}

TEST(Rir, SourceOutsideRoomThrows) {
  RoomSpec room{5.0, 4.0, 3.0, 0.3};
  EXPECT_THROW(simulate_rir(room, {6.0, 2.0, 1.0}, {2.0, 2.0, 1.0}),
               GeometryError);
  EXPECT_THROW(simulate_rir(room, {2.0, 2.0, 1.0}, {2.0, 5.0, 1.0}),
               GeometryError);
}

// --------------------------------------------------------------------------
// Scenario builders

TEST(BuildScene, UnconstrainedTimelineShape) {
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    Rng r = rng.derive(i);
    const SceneSpec s = build_unconstrained_scene(test_pool(), r, i);
    ASSERT_EQ(s.timeline.segments.size(), 3u);
    EXPECT_EQ(s.timeline.segments[0].active, Active::kSource1);
    EXPECT_EQ(s.timeline.segments[1].active, Active::kSource2);
    EXPECT_EQ(s.timeline.segments[2].active, Active::kSource1);
    const double t1 = s.timeline.segments[0].end_s;
    const double t2 = s.timeline.segments[1].end_s;
    EXPECT_GE(t1, 1.0);
    EXPECT_LE(t1, 3.0);
    EXPECT_GE(t2, 5.0);
    EXPECT_LE(t2, 6.0);
    EXPECT_NEAR(s.timeline.segments[2].end_s, 7.0, 1e-12);
    EXPECT_GE(std::abs(s.geometry.sources[0].doa_deg -
                       s.geometry.sources[1].doa_deg),
              15.0);
    EXPECT_EQ(s.desired, (std::vector<int>{1, 2}));
  }
}

TEST(BuildScene, ActivityChangeUniformity) {
  // Kolmogorov-Smirnov check that t1 ~ U[1,3]; critical value for
  // p > 0.01 with n = 1000 is 1.628 / sqrt(n).
  const int n = 1000;
  std::vector<double> t1s;
  Rng rng(31);
  for (int i = 0; i < n; ++i) {
    Rng r = rng.derive(i);
    const SceneSpec s = build_unconstrained_scene(test_pool(), r, i);
    t1s.push_back(s.timeline.segments[0].end_s);
  }
  std::sort(t1s.begin(), t1s.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = (t1s[i] - 1.0) / 2.0;
    d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / n));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
  }
  EXPECT_LT(d, 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST(BuildScene, ConstrainedRules) {
  Rng rng(41);
  for (int i = 0; i < 50; ++i) {
    Rng r = rng.derive(i);
    const SceneSpec s = build_constrained_scene(test_pool(), r, i);
    EXPECT_EQ(s.geometry.sources[0].doa_deg, 90.0);  // exact
    const double doa2 = s.geometry.sources[1].doa_deg;
    EXPECT_TRUE(doa2 <= 75.0 || doa2 >= 105.0) << doa2;
    double target_len = 0.0;
    for (const auto& seg : s.timeline.segments)
      if (seg.active == Active::kSource1)
        target_len += seg.end_s - seg.start_s;
    EXPECT_GE(target_len, 3.0);
    EXPECT_LE(target_len, 5.0);
    EXPECT_EQ(s.desired, (std::vector<int>{1}));
  }
}

TEST(BuildScene, ControlVariants) {
  Rng rng(51);
  {
    Rng r = rng.derive(1);
    const SceneSpec s = build_control_scene(ScenarioKind::k2spk1pos, false,
                                            test_pool(), r, 0);
    EXPECT_EQ(s.geometry.sources[0].doa_deg, s.geometry.sources[1].doa_deg);
    EXPECT_EQ(s.geometry.sources[0].position, s.geometry.sources[1].position);
    EXPECT_NE(s.speaker_ids[0], s.speaker_ids[1]);
  }
  {
    Rng r = rng.derive(2);
    const SceneSpec s = build_control_scene(ScenarioKind::k1spk2pos, false,
                                            test_pool(), r, 0);
    EXPECT_EQ(s.speaker_ids[0], s.speaker_ids[1]);
    EXPECT_GE(std::abs(s.geometry.sources[0].doa_deg -
                       s.geometry.sources[1].doa_deg),
              15.0);
    // Same identity but different speech material.
    EXPECT_NE(s.dry[0].samples, s.dry[1].samples);
  }
  {
    Rng r = rng.derive(3);
    const SceneSpec s = build_control_scene(ScenarioKind::k1spk2pos, true,
                                            test_pool(), r, 0);
    EXPECT_EQ(s.geometry.sources[0].doa_deg, 90.0);
  }
  {
    Rng r = rng.derive(4);
    const SceneSpec s = build_control_scene(ScenarioKind::k2spk1pos, true,
                                            test_pool(), r, 0);
    EXPECT_EQ(s.geometry.sources[0].doa_deg, 90.0);
    EXPECT_EQ(s.geometry.sources[1].doa_deg, 90.0);
  }
}

TEST(BuildScene, TooSmallPoolThrows) {
  const UtterancePool one = make_synth_pool(1, 2, 1.0, 5);
  Rng r(1);
  EXPECT_THROW(build_unconstrained_scene(one, r), NoUtterances);
}

// --------------------------------------------------------------------------
// Rendering

SceneSpec manual_anechoic_spec() {
  SceneSpec spec;
  spec.scenario = "2spk2pos";
  spec.geometry.room = RoomSpec{8.0, 6.0, 3.0, 0.0};
  spec.geometry.array = make_ula({2.0, 2.0, 1.0}, {1, 0, 0}, 3, 0.04);
  SourcePlacement p;
  p.position = {2.0, 2.0 + 0.686, 1.0};  // integer-sample delay to center mic
  p.doa_deg = 90.0;
  spec.geometry.sources = {p};
  spec.timeline.segments = {{0.0, 7.0, Active::kSource1}};
  AudioSignal dry = synth_speech(5, 7.0, 123);
  spec.dry = {dry};
  spec.speaker_ids = {"synth5"};
  spec.desired = {1};
  return spec;
}

TEST(RenderSequence, IdentityPropagationAnechoic) {
  const SceneSpec spec = manual_anechoic_spec();
  Rng rng(61);
  const SceneExample ex = render_sequence(
      spec, std::numeric_limits<double>::infinity(), rng);
  // Center mic (index 1) is exactly 0.686 m away: delay 32 samples,
  // amplitude 1/0.686.
  const auto& x = ex.input.channels[1];
  const auto& s = spec.dry[0].samples;
  for (int i = 40; i < 112000; i += 997)
    EXPECT_NEAR(x[i], s[i - 32] / 0.686, 1e-9);
}

TEST(RenderSequence, NoNoiseMeansExactSum) {
  const SceneSpec spec = manual_anechoic_spec();
  Rng rng(62);
  const SceneExample ex = render_sequence(
      spec, std::numeric_limits<double>::infinity(), rng);
  for (int m = 0; m < 3; ++m)
    for (int i = 0; i < 112000; i += 313)
      EXPECT_EQ(ex.input.channels[m][i], ex.images[0].channels[m][i]);
}

TEST(RenderSequence, ExactNoiseSnr) {
  Rng scene_rng(63);
  const SceneSpec spec =
      build_unconstrained_scene(test_pool(), scene_rng, 0);
  Rng rng(64);
  const SceneExample ex = render_sequence(spec, 30.0, rng);
  for (int m = 0; m < 3; ++m) {
    std::vector<double> sum(ex.input.size(), 0.0);
    for (const auto& img : ex.images)
      for (std::size_t i = 0; i < sum.size(); ++i)
        sum[i] += img.channels[m][i];
    double sig_e = 0, noise_e = 0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sig_e += sum[i] * sum[i];
      const double n = ex.input.channels[m][i] - sum[i];
      noise_e += n * n;
    }
    EXPECT_NEAR(10.0 * std::log10(sig_e / noise_e), 30.0, 0.1);
  }
}

// --------------------------------------------------------------------------
// Dataset generation

TEST(GenerateDataset, LayoutDeterminismAndMetadata) {
  const fs::path root = fs::temp_directory_path() / "nssf_ds_test";
  fs::remove_all(root);
  DatasetSpec spec;
  spec.scenario = "2spk1pos";
  spec.count = 2;
  spec.seed = 77;
  spec.noise_snr_db = 30.0;

  spec.out_dir = (root / "a" / "2spk1pos").string();
  generate_dataset(spec, test_pool(), 1);
  spec.out_dir = (root / "b" / "2spk1pos").string();
  generate_dataset(spec, test_pool(), 2);  // different worker count

  const std::string ma = slurp((root / "a/2spk1pos/manifest.json").string());
  const std::string mb = slurp((root / "b/2spk1pos/manifest.json").string());
  ASSERT_FALSE(ma.empty());
  EXPECT_EQ(ma, mb);  // byte-identical across thread counts
  EXPECT_EQ(slurp((root / "a/2spk1pos/ex_0000/input.wav").string()),
            slurp((root / "b/2spk1pos/ex_0000/input.wav").string()));

  // Shared position in the control scenario.
  const SceneExample ex =
      load_example((root / "a/2spk1pos/ex_0000").string());
  EXPECT_EQ(ex.geometry.sources[0].doa_deg, ex.geometry.sources[1].doa_deg);
  EXPECT_EQ(ex.images.size(), 2u);
  EXPECT_EQ(ex.input.num_channels(), 3);
  EXPECT_EQ(ex.timeline.segments.size(), 3u);
  fs::remove_all(root);
}

TEST(GenerateDataset, SpeakersRotateAcrossExamples) {
  const fs::path root = fs::temp_directory_path() / "nssf_ds_rot";
  fs::remove_all(root);
  DatasetSpec spec;
  spec.scenario = "2spk2pos";
  spec.count = 3;
  spec.seed = 5;
  spec.out_dir = (root / "2spk2pos").string();
  generate_dataset(spec, test_pool(), 1);
  const auto dirs = dataset_example_dirs(spec.out_dir);
  ASSERT_EQ(dirs.size(), 3u);
  std::set<std::string> firsts;
  for (const auto& d : dirs) firsts.insert(load_example(d).speaker_ids[0]);
  EXPECT_GT(firsts.size(), 1u);
  fs::remove_all(root);
}

}  // namespace
