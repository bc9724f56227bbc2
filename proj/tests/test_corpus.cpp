#include <gtest/gtest.h>

#include <filesystem>

#include "nssf/corpus.hpp"
#include "nssf/fft.hpp"

namespace {

using namespace nssf;
namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nssf_corpus_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_tone(const fs::path& p, int rate, double seconds, double freq) {
  AudioSignal s;
  s.sample_rate = rate;
  const int n = static_cast<int>(seconds * rate);
  s.samples.resize(n);
  for (int i = 0; i < n; ++i)
    s.samples[i] = 0.3 * std::sin(2 * M_PI * freq * i / rate);
  write_wav(p.string(), s, WavFormat::kPcm16);
}

TEST(LoadWavDir, CountsAndSpeakerIds) {
  TempDir tmp;
  for (int spk = 0; spk < 2; ++spk) {
    fs::create_directories(tmp.path / ("spk" + std::to_string(spk)));
    for (int u = 0; u < 3; ++u)
      write_tone(tmp.path / ("spk" + std::to_string(spk)) /
                     ("utt" + std::to_string(u) + ".wav"),
                 16000, 1.5, 200.0 + 50 * u);
  }
  const UtterancePool pool = load_wav_dir(tmp.path.string());
  EXPECT_EQ(pool.utterances.size(), 6u);
  EXPECT_EQ(pool.speaker_ids().size(), 2u);

  // Pure function of directory content.
  const UtterancePool again = load_wav_dir(tmp.path.string());
  ASSERT_EQ(again.utterances.size(), pool.utterances.size());
  for (std::size_t i = 0; i < pool.utterances.size(); ++i) {
    EXPECT_EQ(again.utterances[i].speaker_id, pool.utterances[i].speaker_id);
    EXPECT_EQ(again.utterances[i].signal.samples,
              pool.utterances[i].signal.samples);
  }
}

TEST(LoadWavDir, RejectsWrongSampleRate) {
  TempDir tmp;
  fs::create_directories(tmp.path / "spk0");
  write_tone(tmp.path / "spk0" / "a.wav", 44100, 1.5, 300.0);
  EXPECT_THROW(load_wav_dir(tmp.path.string()), UnsupportedFormat);
}

TEST(LoadWavDir, EmptyDirectoryThrows) {
  TempDir tmp;
  EXPECT_THROW(load_wav_dir(tmp.path.string()), NoUtterances);
}

TEST(LoadWavDir, Pcm16NegativeFullScale) {
  TempDir tmp;
  fs::create_directories(tmp.path / "spk0");
  MultichannelAudio a;
  a.sample_rate = 16000;
  a.channels.assign(1, std::vector<double>(16000, 0.0));
  a.channels[0][0] = -1.0;  // encodes to -32768
  write_wav((tmp.path / "spk0" / "a.wav").string(), a, WavFormat::kPcm16);
  const UtterancePool pool = load_wav_dir(tmp.path.string());
  ASSERT_EQ(pool.utterances.size(), 1u);
  EXPECT_EQ(pool.utterances[0].signal.samples[0], -1.0);
}

TEST(SynthSpeech, DeterministicBitIdentical) {
  const AudioSignal a = synth_speech(7, 2.0, 99);
  const AudioSignal b = synth_speech(7, 2.0, 99);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(SynthSpeech, LengthAndLevel) {
  const AudioSignal a = synth_speech(1, 2.0, 5);
  EXPECT_EQ(a.samples.size(), 32000u);
  EXPECT_NEAR(rms(a.samples), 0.1, 1e-6);
  EXPECT_LE(peak_abs(a.samples), 1.0);
}

TEST(SynthSpeech, DifferentSpeakersDecorrelated) {
  const AudioSignal a = synth_speech(1, 2.0, 42);
  const AudioSignal b = synth_speech(2, 2.0, 42);
  // Normalized cross-correlation peak over all lags, via FFT.
  std::vector<double> rb(b.samples.rbegin(), b.samples.rend());
  const std::vector<double> xc = fft_convolve(a.samples, rb);
  double peak = 0.0;
  for (double v : xc) peak = std::max(peak, std::abs(v));
  const double denom = std::sqrt(energy(a.samples) * energy(b.samples));
  EXPECT_LT(peak / denom, 0.5);
}

TEST(SynthSpeech, HasSilenceGaps) {
  const AudioSignal a = synth_speech(3, 8.0, 11);
  int quiet = 0;
  const int win = 160;  // 10 ms
  const int hops = static_cast<int>(a.samples.size()) / win;
  for (int h = 0; h < hops; ++h) {
    double e = 0;
    for (int i = 0; i < win; ++i) e += a.samples[h * win + i] * a.samples[h * win + i];
    if (e < 1e-10) ++quiet;
  }
  const double frac = static_cast<double>(quiet) / hops;
  EXPECT_GT(frac, 0.03);
  EXPECT_LT(frac, 0.4);
}

TEST(SynthSpeech, RejectsBadDuration) {
  EXPECT_THROW(synth_speech(1, 0.5, 1), Error);
  EXPECT_THROW(synth_speech(1, 11.0, 1), Error);
}

TEST(LoopToLength, LoopsWithCrossfade) {
  std::vector<double> src(1600, 0.5);  // 100 ms of DC
  const std::vector<double> out = loop_to_length(src, 8000);
  EXPECT_EQ(out.size(), 8000u);
  // DC source must stay near DC through the crossfade joins.
  for (double v : out) EXPECT_NEAR(v, 0.5, 1e-9);
}

TEST(LoopToLength, TruncatesLongSource) {
  std::vector<double> src(1000);
  for (int i = 0; i < 1000; ++i) src[i] = i;
  const std::vector<double> out = loop_to_length(src, 100);
  ASSERT_EQ(out.size(), 100u);
  EXPECT_EQ(out[99], 99.0);
}

TEST(MakeSynthPool, DisjointSpeakerNamespaces) {
  const UtterancePool a = make_synth_pool(2, 1, 1.0, 1);
  EXPECT_EQ(a.speaker_ids().size(), 2u);
  EXPECT_EQ(a.utterances.size(), 2u);
}

}  // namespace
