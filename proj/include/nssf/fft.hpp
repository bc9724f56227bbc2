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

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

namespace nssf {

// Thin FFTW3 wrapper. Plans are cached per transform size and created under
// a lock (the FFTW planner is not thread-safe); execution uses the
// new-array interface, which is. FFTW_UNALIGNED keeps the plans valid for
// arbitrary caller buffers.

class FftPlans {
 public:
  static FftPlans& instance() {
    static FftPlans p;
    return p;
  }

  fftw_plan r2c(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = r2c_.find(n);
    if (it != r2c_.end()) return it->second;
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(
        n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    r2c_[n] = p;
    return p;
  }

  fftw_plan c2r(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = c2r_.find(n);
    if (it != c2r_.end()) return it->second;
    std::vector<std::complex<double>> in(n / 2 + 1);
    std::vector<double> out(n);
    fftw_plan p = fftw_plan_dft_c2r_1d(
        n, reinterpret_cast<fftw_complex*>(in.data()), out.data(),
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    c2r_[n] = p;
    return p;
  }

 private:
  FftPlans() = default;
  std::mutex mu_;
  std::map<int, fftw_plan> r2c_, c2r_;
};

// Onesided FFT of a real signal; out has n/2+1 bins.
inline void rfft(const double* in, int n, std::complex<double>* out) {
  fftw_plan p = FftPlans::instance().r2c(n);
  // FFTW wants a non-const input pointer but r2c does not modify it.
  fftw_execute_dft_r2c(p, const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

// Inverse of rfft, normalized so irfft(rfft(x)) == x.
inline void irfft(const std::complex<double>* in, int n, double* out) {
  fftw_plan p = FftPlans::instance().c2r(n);
  // c2r destroys its input; work on a copy.
  std::vector<std::complex<double>> tmp(in, in + n / 2 + 1);
  fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(tmp.data()), out);
  const double scale = 1.0 / n;
  for (int i = 0; i < n; ++i) out[i] *= scale;
}

// Full linear convolution, output length |a| + |b| - 1.
inline std::vector<double> fft_convolve(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  int n = 1;
  while (static_cast<std::size_t>(n) < out_len) n <<= 1;
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  std::vector<std::complex<double>> fa(n / 2 + 1), fb(n / 2 + 1);
  rfft(pa.data(), n, fa.data());
  rfft(pb.data(), n, fb.data());
  for (int i = 0; i <= n / 2; ++i) fa[i] *= fb[i];
  std::vector<double> full(n);
  irfft(fa.data(), n, full.data());
  full.resize(out_len);
  return full;
}

}  // namespace nssf
