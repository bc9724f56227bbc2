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

#include <thread>
#include <utility>
#include <vector>

#include "nssf/autodiff.hpp"
#include "nssf/rng.hpp"

namespace nssf::ad {

// Recurrent building blocks. The LSTM cell is a fused tape node (one node
// per step with a hand-written adjoint); the complex GRU is composed from
// primitives. Complex layers use split activations: the nonlinearity acts
// on real and imaginary parts independently, and gate combinations use the
// real/imaginary parts as independent real gates, which keeps every state
// component inside tanh range.

inline Tensor init_uniform(Eigen::Index rows, Eigen::Index cols, double bound,
                           Rng& rng) {
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t.v[i] = rng.uniform(-bound, bound);
  return t;
}

// --------------------------------------------------------------------------
// LSTM

struct LstmWeights {
  Tensor w_ih;  // [in x 4U], gate order i, f, g, o
  Tensor w_hh;  // [U x 4U]
  Tensor b;     // [1 x 4U]
};

inline LstmWeights lstm_init(Eigen::Index in, Eigen::Index units, Rng& rng,
                             double forget_bias = 1.0) {
  const double k = 1.0 / std::sqrt(static_cast<double>(units));
  LstmWeights w;
  w.w_ih = init_uniform(in, 4 * units, k, rng);
  w.w_hh = init_uniform(units, 4 * units, k, rng);
  w.b = Tensor(1, 4 * units);
  for (Eigen::Index u = 0; u < units; ++u) w.b.v[units + u] = forget_bias;
  return w;
}

struct LstmVars {
  Var w_ih, w_hh, b;
  Eigen::Index units = 0;
};

inline LstmVars lstm_vars(Tape& tape, const LstmWeights& w,
                          bool requires_grad = true) {
  LstmVars v;
  v.w_ih = tape.leaf(w.w_ih, requires_grad);
  v.w_hh = tape.leaf(w.w_hh, requires_grad);
  v.b = tape.leaf(w.b, requires_grad);
  v.units = w.w_hh.rows;
  return v;
}

// One LSTM step with the input projection xp = x . w_ih already applied.
// Returns [h | c] as a single [B x 2U] node; slice_cols splits it.
inline Var lstm_cell_pre(Var xp, Var h_prev, Var c_prev, Var w_hh, Var bias) {
  Tape* tp = xp.tape;
  const Eigen::Index batch = tp->rows(xp);
  const Eigen::Index units = tp->rows(w_hh);
  if (tp->cols(xp) != 4 * units || tp->cols(h_prev) != units ||
      tp->cols(c_prev) != units || tp->cols(w_hh) != 4 * units)
    throw ShapeError("lstm_cell: inconsistent dims");

  Mat gates(batch, 4 * units);
  gates.noalias() = ConstMatMap(tp->value(xp).data(), batch, 4 * units);
  gates.noalias() += tp->mat(h_prev) * tp->mat(w_hh);
  gates.rowwise() +=
      Eigen::RowVectorXd::Map(tp->value(bias).data(), 4 * units);

  Arr gi(batch * units), gf(batch * units), gg(batch * units),
      go(batch * units), th(batch * units);
  Arr out(batch * 2 * units);
  MatMap i_m(gi.data(), batch, units), f_m(gf.data(), batch, units),
      g_m(gg.data(), batch, units), o_m(go.data(), batch, units),
      th_m(th.data(), batch, units);
  i_m = (1.0 + (-gates.leftCols(units).array()).exp()).inverse();
  f_m = (1.0 + (-gates.middleCols(units, units).array()).exp()).inverse();
  g_m = gates.middleCols(2 * units, units).array().tanh();
  o_m = (1.0 + (-gates.rightCols(units).array()).exp()).inverse();

  MatMap out_m(out.data(), batch, 2 * units);
  out_m.rightCols(units).array() =
      f_m.array() * tp->mat(c_prev).array() + i_m.array() * g_m.array();
  th_m.array() = out_m.rightCols(units).array().tanh();
  out_m.leftCols(units).array() = o_m.array() * th_m.array();

  Var r = tp->make_node(batch, 2 * units, std::move(out),
                        {xp, h_prev, c_prev, w_hh, bias}, {});
  const int rid = r.id, xpid = xp.id, hid = h_prev.id, cid = c_prev.id,
            wid = w_hh.id, bid = bias.id;
  if (tp->node(rid).requires_grad) {
    tp->node(rid).backward = [tp, rid, xpid, hid, cid, wid, bid, batch, units,
                              gi = std::move(gi), gf = std::move(gf),
                              gg = std::move(gg), go = std::move(go),
                              th = std::move(th)]() {
      ConstMatMap gout(tp->node(rid).grad.data(), batch, 2 * units);
      const auto dh = gout.leftCols(units).array();
      const auto dc_ext = gout.rightCols(units).array();
      ConstMatMap i_m(gi.data(), batch, units), f_m(gf.data(), batch, units),
          g_m(gg.data(), batch, units), o_m(go.data(), batch, units),
          th_m(th.data(), batch, units);
      ConstMatMap c_prev_m(tp->node(cid).value.data(), batch, units);
      ConstMatMap h_prev_m(tp->node(hid).value.data(), batch, units);
      ConstMatMap w_hh_m(tp->node(wid).value.data(), units, 4 * units);

      Mat dgates(batch, 4 * units);
      const Eigen::ArrayXXd dc =
          dc_ext + dh * o_m.array() * (1.0 - th_m.array() * th_m.array());
      dgates.leftCols(units).array() =
          dc * g_m.array() * i_m.array() * (1.0 - i_m.array());
      dgates.middleCols(units, units).array() =
          dc * c_prev_m.array() * f_m.array() * (1.0 - f_m.array());
      dgates.middleCols(2 * units, units).array() =
          dc * i_m.array() * (1.0 - g_m.array() * g_m.array());
      dgates.rightCols(units).array() =
          dh * th_m.array() * o_m.array() * (1.0 - o_m.array());

      if (tp->node(xpid).requires_grad)
        MatMap(tp->grad_buffer(xpid).data(), batch, 4 * units) += dgates;
      if (tp->node(bid).requires_grad)
        Eigen::RowVectorXd::Map(tp->grad_buffer(bid).data(), 4 * units) +=
            dgates.colwise().sum();
      if (tp->node(hid).requires_grad)
        MatMap(tp->grad_buffer(hid).data(), batch, units).noalias() +=
            dgates * w_hh_m.transpose();
      if (tp->node(wid).requires_grad)
        MatMap(tp->grad_buffer(wid).data(), units, 4 * units).noalias() +=
            h_prev_m.transpose() * dgates;
      if (tp->node(cid).requires_grad)
        MatMap(tp->grad_buffer(cid).data(), batch, units).array() +=
            dc * f_m.array();
    };
  }
  return r;
}

// Standard LSTM step: gates i,f,o = sigmoid, g = tanh;
// c = f (.) c_prev + i (.) g; h = o (.) tanh(c).
inline std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev,
                                     const LstmVars& w) {
  Var xp = matmul(x, w.w_ih);
  Var hc = lstm_cell_pre(xp, h_prev, c_prev, w.w_hh, w.b);
  return {slice_cols(hc, 0, w.units), slice_cols(hc, w.units, 2 * w.units)};
}

// Bidirectional LSTM over a sequence given as one stacked block
// [steps*batch x in] (step-major rows). Returns per-step outputs
// concat(h_fwd_t, h_bwd_t), each [batch x 2U]. The input projection for all
// steps runs as a single matmul per direction.
inline std::vector<Var> bilstm_layer_stacked(Var stacked, Eigen::Index steps,
                                             Eigen::Index batch,
                                             const LstmVars& fwd,
                                             const LstmVars& bwd) {
  Tape* tp = stacked.tape;
  require(tp->rows(stacked) == steps * batch, "bilstm: bad stacked shape");
  const Eigen::Index units = fwd.units;
  Var zero_h = tp->constant(Arr::Zero(batch * units), batch, units);
  Var zero_c = zero_h;

  Var xp_f = matmul(stacked, fwd.w_ih);
  Var xp_b = matmul(stacked, bwd.w_ih);

  std::vector<Var> h_f(steps), h_b(steps);
  Var h = zero_h, c = zero_c;
  for (Eigen::Index t = 0; t < steps; ++t) {
    Var hc = lstm_cell_pre(slice_rows(xp_f, t * batch, (t + 1) * batch), h, c,
                           fwd.w_hh, fwd.b);
    h = slice_cols(hc, 0, units);
    c = slice_cols(hc, units, 2 * units);
    h_f[t] = h;
  }
  h = zero_h;
  c = zero_c;
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    Var hc = lstm_cell_pre(slice_rows(xp_b, t * batch, (t + 1) * batch), h, c,
                           bwd.w_hh, bwd.b);
    h = slice_cols(hc, 0, units);
    c = slice_cols(hc, units, 2 * units);
    h_b[t] = h;
  }
  std::vector<Var> out(steps);
  for (Eigen::Index t = 0; t < steps; ++t)
    out[t] = concat_cols(h_f[t], h_b[t]);
  return out;
}

inline std::vector<Var> bilstm_layer(const std::vector<Var>& xs,
                                     const LstmVars& fwd,
                                     const LstmVars& bwd) {
  require(!xs.empty(), "bilstm_layer: empty sequence");
  Tape* tp = xs[0].tape;
  const Eigen::Index batch = tp->rows(xs[0]);
  Var stacked = xs.size() == 1 ? xs[0] : stack_rows(xs);
  return bilstm_layer_stacked(stacked, static_cast<Eigen::Index>(xs.size()),
                              batch, fwd, bwd);
}

// --------------------------------------------------------------------------
// Fused BLSTM scan: the whole bidirectional pass as a single tape node with
// hand-written BPTT. Numerically identical to the per-cell composition (the
// tests assert this); it exists because one node per layer instead of ~10
// per step is what makes full-sequence training affordable. The two
// directions write disjoint output halves and independent stashes, so they
// run on two threads with bit-identical results.

namespace fused_detail {

struct ScanStash {
  // Per-direction activations, step-major [S*B x U] each.
  Arr i, f, g, o, th, c;
};

}  // namespace fused_detail

// Fused bidirectional layer on a stacked [steps*batch x in] block; output
// [steps*batch x 2U] with forward/backward halves in columns. Input
// projections run per step so every GEMM stays cache-resident.
inline Var bilstm_fused(Var stacked, Eigen::Index steps, Eigen::Index batch,
                        const LstmVars& fwd, const LstmVars& bwd) {
  Tape* tp = stacked.tape;
  const Eigen::Index units = fwd.units;
  const Eigen::Index in = tp->cols(stacked);
  require(tp->rows(stacked) == steps * batch, "bilstm_fused: bad shape");
  require(bwd.units == units, "bilstm_fused: unit mismatch");

  auto stash_f = std::make_shared<fused_detail::ScanStash>();
  auto stash_b = std::make_shared<fused_detail::ScanStash>();
  Arr out(steps * batch * 2 * units);

  auto run_dir = [&](const Arr& wih, const Arr& whh, const Arr& bias,
                     bool reverse, fused_detail::ScanStash& st,
                     Eigen::Index out_col) {
    const Arr& x = tp->value(stacked);
    const Eigen::Index n = steps * batch * units;
    st.i.resize(n);
    st.f.resize(n);
    st.g.resize(n);
    st.o.resize(n);
    st.th.resize(n);
    st.c.resize(n);
    Mat h = Mat::Zero(batch, units), c_prev = Mat::Zero(batch, units);
    Mat gates(batch, 4 * units);
    ConstMatMap wih_m(wih.data(), in, 4 * units);
    ConstMatMap whh_m(whh.data(), units, 4 * units);
    for (Eigen::Index s = 0; s < steps; ++s) {
      const Eigen::Index t = reverse ? steps - 1 - s : s;
      const Eigen::Index off = t * batch * units;
      gates.noalias() =
          ConstMatMap(x.data() + t * batch * in, batch, in) * wih_m;
      gates.noalias() += h * whh_m;
      gates.rowwise() += Eigen::RowVectorXd::Map(bias.data(), 4 * units);
      MatMap i_m(st.i.data() + off, batch, units);
      MatMap f_m(st.f.data() + off, batch, units);
      MatMap g_m(st.g.data() + off, batch, units);
      MatMap o_m(st.o.data() + off, batch, units);
      MatMap th_m(st.th.data() + off, batch, units);
      MatMap c_m(st.c.data() + off, batch, units);
      i_m = (1.0 + (-gates.leftCols(units).array()).exp()).inverse();
      f_m = (1.0 + (-gates.middleCols(units, units).array()).exp()).inverse();
      g_m = gates.middleCols(2 * units, units).array().tanh();
      o_m = (1.0 + (-gates.rightCols(units).array()).exp()).inverse();
      c_m.array() = f_m.array() * c_prev.array() + i_m.array() * g_m.array();
      th_m.array() = c_m.array().tanh();
      h.array() = o_m.array() * th_m.array();
      c_prev = c_m;
      for (Eigen::Index r = 0; r < batch; ++r)
        Eigen::RowVectorXd::Map(
            out.data() + ((t * batch + r) * 2 * units) + out_col, units) =
            h.row(r);
    }
  };

  {
    std::thread tf([&] {
      run_dir(tp->value(fwd.w_ih), tp->value(fwd.w_hh), tp->value(fwd.b),
              false, *stash_f, 0);
    });
    run_dir(tp->value(bwd.w_ih), tp->value(bwd.w_hh), tp->value(bwd.b), true,
            *stash_b, units);
    tf.join();
  }

  Var r = tp->make_node(
      steps * batch, 2 * units, std::move(out),
      {stacked, fwd.w_ih, fwd.w_hh, fwd.b, bwd.w_ih, bwd.w_hh, bwd.b}, {});
  const int rid = r.id, x_id = stacked.id;
  const int wif_id = fwd.w_ih.id, whf_id = fwd.w_hh.id, bf_id = fwd.b.id;
  const int wib_id = bwd.w_ih.id, whb_id = bwd.w_hh.id, bb_id = bwd.b.id;
  if (tp->node(rid).requires_grad) {
    tp->node(rid).backward = [tp, rid, x_id, wif_id, whf_id, bf_id, wib_id,
                              whb_id, bb_id, steps, batch, units, in, stash_f,
                              stash_b]() {
      const Arr& gout = tp->node(rid).grad;
      const bool want_dx = tp->node(x_id).requires_grad;
      // Preallocate shared buffers before spawning the direction threads;
      // each direction owns a private dx accumulator.
      Arr& g_wif = tp->grad_buffer(wif_id);
      Arr& g_whf = tp->grad_buffer(whf_id);
      Arr& g_bf = tp->grad_buffer(bf_id);
      Arr& g_wib = tp->grad_buffer(wib_id);
      Arr& g_whb = tp->grad_buffer(whb_id);
      Arr& g_bb = tp->grad_buffer(bb_id);
      Arr dx_f, dx_b;
      if (want_dx) {
        dx_f = Arr::Zero(steps * batch * in);
        dx_b = Arr::Zero(steps * batch * in);
      }

      auto back_dir = [&](const fused_detail::ScanStash& st, const Arr& wih,
                          const Arr& whh, bool reverse, Eigen::Index out_col,
                          Arr& g_wi, Arr& g_wh, Arr& g_b, Arr& dx) {
        const Arr& x = tp->node(x_id).value;
        ConstMatMap wih_m(wih.data(), in, 4 * units);
        ConstMatMap whh_m(whh.data(), units, 4 * units);
        Mat dh_rec = Mat::Zero(batch, units);
        Mat dc_rec = Mat::Zero(batch, units);
        Mat dgates(batch, 4 * units);
        MatMap g_wi_m(g_wi.data(), in, 4 * units);
        MatMap g_wh_m(g_wh.data(), units, 4 * units);
        auto g_b_m = Eigen::RowVectorXd::Map(g_b.data(), 4 * units);
        Mat h_prev(batch, units), dh(batch, units);
        for (Eigen::Index s = steps; s-- > 0;) {
          const Eigen::Index t = reverse ? steps - 1 - s : s;
          const Eigen::Index off = t * batch * units;
          ConstMatMap i_m(st.i.data() + off, batch, units);
          ConstMatMap f_m(st.f.data() + off, batch, units);
          ConstMatMap g_m(st.g.data() + off, batch, units);
          ConstMatMap o_m(st.o.data() + off, batch, units);
          ConstMatMap th_m(st.th.data() + off, batch, units);
          for (Eigen::Index r = 0; r < batch; ++r)
            dh.row(r) = Eigen::RowVectorXd::Map(
                gout.data() + (t * batch + r) * 2 * units + out_col, units);
          dh += dh_rec;
          const Eigen::Index prev_t = reverse ? t + 1 : t - 1;
          const bool has_prev = reverse ? prev_t < steps : prev_t >= 0;
          if (has_prev) {
            const Eigen::Index poff = prev_t * batch * units;
            h_prev.array() =
                ConstMatMap(st.o.data() + poff, batch, units).array() *
                ConstMatMap(st.th.data() + poff, batch, units).array();
          } else {
            h_prev.setZero();
          }
          const Eigen::ArrayXXd c_prev_arr =
              has_prev ? Eigen::ArrayXXd(
                             ConstMatMap(st.c.data() + prev_t * batch * units,
                                         batch, units)
                                 .array())
                       : Eigen::ArrayXXd::Zero(batch, units);
          const Eigen::ArrayXXd dc =
              dc_rec.array() +
              dh.array() * o_m.array() * (1.0 - th_m.array() * th_m.array());
          dgates.leftCols(units).array() =
              dc * g_m.array() * i_m.array() * (1.0 - i_m.array());
          dgates.middleCols(units, units).array() =
              dc * c_prev_arr * f_m.array() * (1.0 - f_m.array());
          dgates.middleCols(2 * units, units).array() =
              dc * i_m.array() * (1.0 - g_m.array() * g_m.array());
          dgates.rightCols(units).array() =
              dh.array() * th_m.array() * o_m.array() * (1.0 - o_m.array());

          ConstMatMap x_t(x.data() + t * batch * in, batch, in);
          g_wi_m.noalias() += x_t.transpose() * dgates;
          g_b_m += dgates.colwise().sum();
          g_wh_m.noalias() += h_prev.transpose() * dgates;
          if (dx.size() > 0)
            MatMap(dx.data() + t * batch * in, batch, in).noalias() +=
                dgates * wih_m.transpose();
          dh_rec.noalias() = dgates * whh_m.transpose();
          dc_rec.array() = dc * f_m.array();
        }
      };

      std::thread tf([&] {
        back_dir(*stash_f, tp->node(wif_id).value, tp->node(whf_id).value,
                 false, 0, g_wif, g_whf, g_bf, dx_f);
      });
      back_dir(*stash_b, tp->node(wib_id).value, tp->node(whb_id).value, true,
               units, g_wib, g_whb, g_bb, dx_b);
      tf.join();
      if (want_dx) tp->grad_buffer(x_id) += dx_f + dx_b;
    };
  }
  return r;
}

// --------------------------------------------------------------------------
// Complex helpers

struct CVar {
  Var re, im;
};

inline CVar complex_affine(CVar x, CVar w, CVar b) {
  auto [re, im] = complex_matmul(x.re, x.im, w.re, w.im);
  return {add_rowvec(re, b.re), add_rowvec(im, b.im)};
}

// Split activation: the nonlinearity acts per real component.
inline CVar split_tanh(CVar x) { return {tanh_(x.re), tanh_(x.im)}; }
inline CVar split_sigmoid(CVar x) { return {sigmoid(x.re), sigmoid(x.im)}; }

inline Var one_minus(Var v) { return add_scalar(scale(v, -1.0), 1.0); }

// --------------------------------------------------------------------------
// Complex GRU

struct ComplexGruWeights {
  Tensor wz_re, wz_im;  // [(in+U) x U]
  Tensor wr_re, wr_im;
  Tensor wh_re, wh_im;
  Tensor bz_re, bz_im;  // [1 x U]
  Tensor br_re, br_im;
  Tensor bh_re, bh_im;
};

inline ComplexGruWeights gru_complex_init(Eigen::Index in, Eigen::Index units,
                                          Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(units));
  ComplexGruWeights w;
  w.wz_re = init_uniform(in + units, units, k, rng);
  w.wz_im = init_uniform(in + units, units, k, rng);
  w.wr_re = init_uniform(in + units, units, k, rng);
  w.wr_im = init_uniform(in + units, units, k, rng);
  w.wh_re = init_uniform(in + units, units, k, rng);
  w.wh_im = init_uniform(in + units, units, k, rng);
  w.bz_re = Tensor(1, units);
  w.bz_im = Tensor(1, units);
  w.br_re = Tensor(1, units);
  w.br_im = Tensor(1, units);
  w.bh_re = Tensor(1, units);
  w.bh_im = Tensor(1, units);
  return w;
}

struct ComplexGruVars {
  CVar wz, wr, wh, bz, br, bh;
  Eigen::Index units = 0;
};

inline ComplexGruVars gru_complex_vars(Tape& tape, const ComplexGruWeights& w,
                                       bool requires_grad = true) {
  ComplexGruVars v;
  v.wz = {tape.leaf(w.wz_re, requires_grad), tape.leaf(w.wz_im, requires_grad)};
  v.wr = {tape.leaf(w.wr_re, requires_grad), tape.leaf(w.wr_im, requires_grad)};
  v.wh = {tape.leaf(w.wh_re, requires_grad), tape.leaf(w.wh_im, requires_grad)};
  v.bz = {tape.leaf(w.bz_re, requires_grad), tape.leaf(w.bz_im, requires_grad)};
  v.br = {tape.leaf(w.br_re, requires_grad), tape.leaf(w.br_im, requires_grad)};
  v.bh = {tape.leaf(w.bh_re, requires_grad), tape.leaf(w.bh_im, requires_grad)};
  v.units = w.wz_re.cols;
  return v;
}

// GRU recurrence with complex weights (paired-real arithmetic) and split
// gates: update and reset act on real and imaginary parts as independent
// real gates, the candidate uses split-tanh. Each component of h stays in
// [-1, 1], so |h| <= sqrt(2) per complex entry.
inline CVar gru_cell_complex(CVar x, CVar h_prev, const ComplexGruVars& w) {
  CVar xin{concat_cols(x.re, h_prev.re), concat_cols(x.im, h_prev.im)};
  CVar z = split_sigmoid(complex_affine(xin, w.wz, w.bz));
  CVar r = split_sigmoid(complex_affine(xin, w.wr, w.br));
  CVar rh{mul(r.re, h_prev.re), mul(r.im, h_prev.im)};
  CVar cin{concat_cols(x.re, rh.re), concat_cols(x.im, rh.im)};
  CVar cand = split_tanh(complex_affine(cin, w.wh, w.bh));
  Var h_re = add(mul(one_minus(z.re), h_prev.re), mul(z.re, cand.re));
  Var h_im = add(mul(one_minus(z.im), h_prev.im), mul(z.im, cand.im));
  return {h_re, h_im};
}

}  // namespace nssf::ad
