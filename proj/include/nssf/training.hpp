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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nssf/beamform.hpp"
#include "nssf/checkpoint.hpp"
#include "nssf/dataset.hpp"
#include "nssf/model_cospa.hpp"
#include "nssf/model_jnf.hpp"
#include "nssf/optim.hpp"

namespace nssf {

// Training: STFT -> forward -> mask application -> WOLA synthesis -> SNR
// loss in the time domain -> Adam. Batch is one full sequence.

namespace ad {

// Differentiable WOLA synthesis. Input: time-major [T x F] (or [T*F x 1])
// real and imaginary planes with frame-contiguous rows. Output: [len x 1]
// time signal, len = frame_len + (T-1) shift. Linear, so the adjoint is the
// scaled forward rfft of the windowed gradient segments.
inline Var istft_wola(Var est_re, Var est_im, const StftConfig& cfg,
                      int frames) {
  Tape* tp = est_re.tape;
  const int bins = cfg.bins();
  const int n = cfg.frame_len;
  require(tp->value(est_re).size() ==
              static_cast<Eigen::Index>(bins) * frames &&
          tp->value(est_im).size() == tp->value(est_re).size(),
          "istft_wola: bad plane size");

  auto win = std::make_shared<std::vector<double>>(hann_periodic(n));
  auto denom =
      std::make_shared<std::vector<double>>(wola_denominator(cfg, frames));
  const Eigen::Index len = static_cast<Eigen::Index>(cfg.span(frames));

  Arr out = Arr::Zero(len);
  {
    std::vector<std::complex<double>> spec(bins);
    std::vector<double> frame(n);
    const Arr& re = tp->value(est_re);
    const Arr& im = tp->value(est_im);
    for (int t = 0; t < frames; ++t) {
      for (int f = 0; f < bins; ++f)
        spec[f] = {re[static_cast<Eigen::Index>(t) * bins + f],
                   im[static_cast<Eigen::Index>(t) * bins + f]};
      irfft(spec.data(), n, frame.data());
      const Eigen::Index off = static_cast<Eigen::Index>(t) * cfg.shift;
      for (int i = 0; i < n; ++i) out[off + i] += frame[i] * (*win)[i];
    }
    for (Eigen::Index i = 0; i < len; ++i)
      out[i] = (*denom)[i] > 1e-12 ? out[i] / (*denom)[i] : 0.0;
  }

  Var r = tp->make_node(len, 1, std::move(out), {est_re, est_im}, {});
  const int rid = r.id, re_id = est_re.id, im_id = est_im.id;
  if (tp->node(rid).requires_grad) {
    tp->node(rid).backward = [tp, rid, re_id, im_id, cfg, frames, bins, n, win,
                              denom]() {
      const Arr& g = tp->node(rid).grad;
      Arr& gre = tp->grad_buffer(re_id);
      Arr& gim = tp->grad_buffer(im_id);
      std::vector<double> fg(n);
      std::vector<std::complex<double>> spec(bins);
      for (int t = 0; t < frames; ++t) {
        const Eigen::Index off = static_cast<Eigen::Index>(t) * cfg.shift;
        for (int i = 0; i < n; ++i) {
          const double d = (*denom)[off + i];
          fg[i] = d > 1e-12 ? g[off + i] / d * (*win)[i] : 0.0;
        }
        rfft(fg.data(), n, spec.data());
        for (int f = 0; f < bins; ++f) {
          const double s = (f == 0 || f == bins - 1) ? 1.0 / n : 2.0 / n;
          gre[static_cast<Eigen::Index>(t) * bins + f] += s * spec[f].real();
          gim[static_cast<Eigen::Index>(t) * bins + f] += s * spec[f].imag();
        }
      }
    };
  }
  return r;
}

}  // namespace ad

// loss = -10 log10(||s||^2 / (||s - s_hat||^2 + eps ||s||^2)); bounded
// below by 10 log10(eps) on exact recovery.
constexpr double kSnrLossEps = 1e-8;

inline double snr_loss_value(const std::vector<double>& estimate,
                             const std::vector<double>& target,
                             double eps = kSnrLossEps) {
  require(estimate.size() == target.size(), "snr_loss: length mismatch");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    sig += target[i] * target[i];
    const double d = target[i] - estimate[i];
    err += d * d;
  }
  if (sig <= 0.0) throw DegenerateTarget("snr_loss: zero target");
  return 10.0 * std::log10(err + eps * sig) - 10.0 * std::log10(sig);
}

// Plain output SNR in dB (higher is better).
inline double snr_db(const std::vector<double>& estimate,
                     const std::vector<double>& target) {
  double sig = 0.0, err = 0.0;
  const std::size_t n = std::min(estimate.size(), target.size());
  for (std::size_t i = 0; i < n; ++i) {
    sig += target[i] * target[i];
    const double d = target[i] - estimate[i];
    err += d * d;
  }
  return 10.0 * std::log10(sig / std::max(err, 1e-300));
}

namespace ad {

// Tape version; `target` is constant.
inline Var snr_loss_graph(Tape& tape, Var estimate,
                          const std::vector<double>& target,
                          double eps = kSnrLossEps) {
  require(tape.value(estimate).size() ==
              static_cast<Eigen::Index>(target.size()),
          "snr_loss: length mismatch");
  double sig = 0.0;
  for (double v : target) sig += v * v;
  if (sig <= 0.0) throw DegenerateTarget("snr_loss: zero target");
  Var t = tape.constant(
      Eigen::Map<const Arr>(target.data(), target.size()),
      static_cast<Eigen::Index>(target.size()), 1);
  Var err = sum(square(sub(estimate, t)));
  Var loss = scale(log_(add_scalar(err, eps * sig)), 10.0 / std::log(10.0));
  return add_scalar(loss, -10.0 * std::log10(sig));
}

}  // namespace ad

// --------------------------------------------------------------------------
// Targets on disk

inline std::string target_path(const std::string& example_dir,
                               TargetKind kind) {
  return example_dir + "/target_" + target_name(kind) + ".wav";
}

// Builds (or reuses) the cached training target for one example. DSB
// targets depend on the STFT config; a sidecar JSON records it and a
// mismatch triggers a rebuild.
inline AudioSignal ensure_target(const std::string& example_dir,
                                 const SceneExample& ex, TargetKind kind,
                                 const StftConfig& cfg, int ref_channel = 0) {
  namespace fs = std::filesystem;
  const std::string path = target_path(example_dir, kind);
  const std::string sidecar = example_dir + "/target_dsb.json";
  bool valid = fs::exists(path);
  if (valid && kind == TargetKind::kDsb) {
    valid = false;
    if (fs::exists(sidecar)) {
      const auto j = dataset_detail::read_json(sidecar);
      valid = j.value("frame_len", 0) == cfg.frame_len &&
              j.value("shift", 0) == cfg.shift &&
              j.value("ref_channel", -1) == ref_channel;
    }
  }
  if (valid) {
    MultichannelAudio t = read_wav(path);
    AudioSignal a;
    a.sample_rate = t.sample_rate;
    a.samples = std::move(t.channels.at(0));
    return a;
  }
  AudioSignal target = make_target(ex, kind, cfg, ref_channel);
  write_wav(path, target);
  // Return the same float32-quantized samples a cache reload would see.
  for (double& v : target.samples) v = static_cast<double>(static_cast<float>(v));
  if (kind == TargetKind::kDsb) {
    nlohmann::json j;
    j["frame_len"] = cfg.frame_len;
    j["shift"] = cfg.shift;
    j["ref_channel"] = ref_channel;
    dataset_detail::write_text(sidecar, j.dump(2) + "\n");
  }
  return target;
}

// Cross-correlation alignment guard: the SNR loss is shift-sensitive, so
// the target must sit within one sample of the desired content in the
// reference channel.
inline void check_target_alignment(const SceneExample& ex,
                                   const AudioSignal& target,
                                   int ref_channel = 0, int max_lag = 4) {
  std::vector<double> desired(ex.input.size(), 0.0);
  for (int q : ex.desired)
    for (std::size_t i = 0; i < desired.size(); ++i)
      desired[i] += ex.images[q - 1].channels[ref_channel][i];
  double best = -1e300;
  int best_lag = 0;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i < target.samples.size(); ++i) {
      const long j = static_cast<long>(i) + lag;
      if (j >= 0 && j < static_cast<long>(desired.size()))
        acc += target.samples[i] * desired[j];
    }
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  if (std::abs(best_lag) > 1)
    throw DatasetError("target misaligned by " + std::to_string(best_lag) +
                       " samples");
}

// --------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::string model_kind = "jnf";   // jnf | cospa
  std::string target_kind = "dry";  // dry | dsb
  std::string dataset_dir;
  std::string out_dir;
  std::string preset = "tiny";  // paper | tiny
  int epochs = 1;
  int max_steps = 0;  // 0 = run all epochs
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  int ref_channel = 0;
};

struct TrainLog {
  std::vector<double> step_loss;
  std::vector<double> epoch_val_snr_db;
  std::string checkpoint_path;
};

inline JnfConfig jnf_config_for(const std::string& preset) {
  if (preset == "paper") return JnfConfig::paper();
  if (preset == "tiny") return JnfConfig::tiny();
  throw Error("unknown preset: " + preset);
}

inline CospaConfig cospa_config_for(const std::string& preset) {
  if (preset == "paper") return CospaConfig::paper();
  if (preset == "tiny") return CospaConfig::tiny();
  throw Error("unknown preset: " + preset);
}

inline nlohmann::json train_manifest(const TrainConfig& cfg,
                                     const StftConfig& stft, int epoch,
                                     long step) {
  nlohmann::json j;
  j["model_kind"] = cfg.model_kind;
  j["target_kind"] = cfg.target_kind;
  j["preset"] = cfg.preset;
  j["frame_len"] = stft.frame_len;
  j["shift"] = stft.shift;
  j["seed"] = cfg.seed;
  j["lr"] = cfg.lr;
  j["clip_norm"] = cfg.clip_norm;
  j["ref_channel"] = cfg.ref_channel;
  j["epoch"] = epoch;
  j["step"] = step;
  return j;
}

namespace train_detail {

// One differentiable forward to the time-domain estimate.
inline ad::Var estimate_graph(ad::Tape& tape, const SpectrogramStack& stack,
                              const std::map<std::string, ad::Var>& leaves,
                              const std::string& model_kind,
                              const JnfConfig& jnf_cfg,
                              const CospaConfig& cospa_cfg, int ref_channel) {
  using namespace ad;
  const int bins = stack.bins, frames = stack.frames;
  if (model_kind == "jnf") {
    JnfGraph g = jnf_forward_leaves(tape, stack, leaves, jnf_cfg);
    // Reference channel plane, time-major, frame-contiguous.
    Arr xre(static_cast<Eigen::Index>(frames) * bins),
        xim(static_cast<Eigen::Index>(frames) * bins);
    for (int t = 0; t < frames; ++t)
      for (int f = 0; f < bins; ++f) {
        xre[static_cast<Eigen::Index>(t) * bins + f] =
            stack.at(ref_channel, f, t).real();
        xim[static_cast<Eigen::Index>(t) * bins + f] =
            stack.at(ref_channel, f, t).imag();
      }
    Var cre = tape.constant(std::move(xre),
                            static_cast<Eigen::Index>(frames) * bins, 1);
    Var cim = tape.constant(std::move(xim),
                            static_cast<Eigen::Index>(frames) * bins, 1);
    auto [est_re, est_im] = complex_mul(g.mask_re, g.mask_im, cre, cim);
    return istft_wola(est_re, est_im, jnf_cfg.stft(), frames);
  }
  CospaGraph g = cospa_forward_leaves(tape, stack, leaves, cospa_cfg);
  Var acc_re, acc_im;
  for (int m = 0; m < cospa_cfg.mics; ++m) {
    Arr xre(static_cast<Eigen::Index>(frames) * bins),
        xim(static_cast<Eigen::Index>(frames) * bins);
    for (int t = 0; t < frames; ++t)
      for (int f = 0; f < bins; ++f) {
        xre[static_cast<Eigen::Index>(t) * bins + f] = stack.at(m, f, t).real();
        xim[static_cast<Eigen::Index>(t) * bins + f] = stack.at(m, f, t).imag();
      }
    Var cre = tape.constant(std::move(xre), frames, bins);
    Var cim = tape.constant(std::move(xim), frames, bins);
    auto [er, ei] = complex_mul(g.masks[m].re, g.masks[m].im, cre, cim);
    acc_re = m == 0 ? er : add(acc_re, er);
    acc_im = m == 0 ? ei : add(acc_im, ei);
  }
  return istft_wola(acc_re, acc_im, cospa_cfg.stft(), frames);
}

}  // namespace train_detail

// Full training run; deterministic given cfg.seed. Returns the log with the
// final checkpoint path. Writes runs/<name>/checkpoint_ep<k> and log.jsonl.
inline TrainLog train(const TrainConfig& cfg) {
  namespace fs = std::filesystem;
  using namespace ad;
  using nlohmann::json;

  const bool is_jnf = cfg.model_kind == "jnf";
  if (!is_jnf && cfg.model_kind != "cospa")
    throw Error("unknown model kind: " + cfg.model_kind);
  const JnfConfig jnf_cfg = jnf_config_for(cfg.preset);
  const CospaConfig cospa_cfg = cospa_config_for(cfg.preset);
  const StftConfig stft = is_jnf ? jnf_cfg.stft() : cospa_cfg.stft();
  const TargetKind tkind = target_from_name(cfg.target_kind);

  const std::vector<std::string> dirs = dataset_example_dirs(cfg.dataset_dir);
  if (dirs.empty()) throw DatasetError("empty dataset: " + cfg.dataset_dir);

  // Build/validate all targets up front (fail fast before step 1).
  std::vector<AudioSignal> targets(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const SceneExample ex = load_example(dirs[i]);
    targets[i] = ensure_target(dirs[i], ex, tkind, stft, cfg.ref_channel);
    check_target_alignment(ex, targets[i], cfg.ref_channel);
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream log_file(cfg.out_dir + "/log.jsonl", std::ios::trunc);

  Rng root(cfg.seed);
  Rng init_rng = root.derive(1);
  Params params = is_jnf ? jnf_init_params(jnf_cfg, init_rng)
                         : cospa_init_params(cospa_cfg, init_rng);
  AdamState adam;
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  TrainLog out;
  long step = 0;
  const long total_steps =
      cfg.max_steps > 0 ? cfg.max_steps
                        : static_cast<long>(cfg.epochs) * dirs.size();

  int epoch = 0;
  while (step < total_steps) {
    // Deterministic per-epoch order.
    std::vector<int> order(dirs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    Rng shuffle_rng = root.derive(2, epoch);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    for (int idx : order) {
      if (step >= total_steps) break;
      const auto t0 = std::chrono::steady_clock::now();
      const SceneExample ex = load_example(dirs[idx]);
      const SpectrogramStack stack = analyze(ex.input, stft);

      Tape tape;
      std::map<std::string, Var> leaves = make_leaves(tape, params, true);
      Var est = train_detail::estimate_graph(tape, stack, leaves,
                                             cfg.model_kind, jnf_cfg,
                                             cospa_cfg, cfg.ref_channel);
      const std::size_t span = stft.span(stack.frames);
      std::vector<double> target_span(targets[idx].samples.begin(),
                                      targets[idx].samples.begin() + span);
      Var loss = snr_loss_graph(tape, est, target_span);
      const double loss_v = tape.value(loss)[0];
      if (!std::isfinite(loss_v))
        throw Error("training diverged: non-finite loss at step " +
                    std::to_string(step));
      tape.backward(loss);

      Params grads;
      for (const auto& [name, leaf] : leaves) {
        Tensor g(params.at(name).rows, params.at(name).cols);
        g.v = tape.grad(leaf);
        grads.emplace(name, std::move(g));
      }
      clip_global_norm(grads, cfg.clip_norm);
      adam_step(params, grads, adam, adam_cfg);

      const auto t1 = std::chrono::steady_clock::now();
      const double wall_ms =
          std::chrono::duration<double, std::milli>(t1 - t0).count();
      out.step_loss.push_back(loss_v);
      json line;
      line["step"] = step;
      line["loss"] = loss_v;
      line["lr"] = cfg.lr;
      line["wall_ms"] = wall_ms;
      log_file << line.dump() << "\n";
      log_file.flush();
      ++step;
    }
    ++epoch;

    // Validation: mean output SNR on a fixed prefix of the dataset.
    const std::size_t val_n = std::min<std::size_t>(4, dirs.size());
    double val = 0.0;
    for (std::size_t i = 0; i < val_n; ++i) {
      const SceneExample ex = load_example(dirs[i]);
      const SpectrogramStack stack = analyze(ex.input, stft);
      std::vector<double> est;
      if (is_jnf) {
        const JnfInference inf = jnf_infer(stack, params, jnf_cfg);
        const auto spec = apply_mask(stack, inf.mask, cfg.ref_channel);
        SpectrogramStack s1;
        s1.bins = stack.bins;
        s1.frames = stack.frames;
        s1.config = stft;
        s1.sample_rate = stack.sample_rate;
        s1.channels.push_back(spec);
        est = synthesize_mono(s1).samples;
      } else {
        const CospaInference inf = cospa_infer(stack, params, cospa_cfg);
        const auto spec = apply_masks(stack, inf.masks);
        SpectrogramStack s1;
        s1.bins = stack.bins;
        s1.frames = stack.frames;
        s1.config = stft;
        s1.sample_rate = stack.sample_rate;
        s1.channels.push_back(spec);
        est = synthesize_mono(s1).samples;
      }
      const std::size_t span = std::min(est.size(), targets[i].samples.size());
      val += snr_db({est.begin(), est.begin() + span},
                    {targets[i].samples.begin(),
                     targets[i].samples.begin() + span});
    }
    val /= static_cast<double>(val_n);
    out.epoch_val_snr_db.push_back(val);
    json vline;
    vline["epoch"] = epoch;
    vline["val_snr_db"] = val;
    log_file << vline.dump() << "\n";
    log_file.flush();

    const std::string ckpt =
        cfg.out_dir + "/checkpoint_ep" + std::to_string(epoch);
    save_checkpoint(ckpt, params, train_manifest(cfg, stft, epoch, step));
    out.checkpoint_path = ckpt;
  }
  return out;
}

// Latest checkpoint in a run directory.
inline std::string latest_checkpoint(const std::string& run_dir) {
  namespace fs = std::filesystem;
  int best = -1;
  std::string best_path;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("checkpoint_ep", 0) == 0) {
      const int k = std::atoi(name.c_str() + 13);
      if (k > best) {
        best = k;
        best_path = e.path().string();
      }
    }
  }
  if (best < 0) throw IoError("no checkpoint in " + run_dir);
  return best_path;
}

}  // namespace nssf
