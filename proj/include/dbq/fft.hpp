#pragma once

// Thin RAII wrapper over FFTW3 real transforms with a process-wide plan cache.
// Plans are created under a mutex; execution uses the new-array interface,
// which FFTW documents as thread-safe.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "dbq/error.hpp"

namespace dbq {

using Complex = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

class RealFft {
 public:
  // Cached transform of length n (n even, >= 2).
  static const RealFft& get(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, std::unique_ptr<RealFft>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::unique_ptr<RealFft>(new RealFft(n))).first;
    return *it->second;
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  // out[k] = sum_m in[m] e^{-j 2 pi k m / n}, k = 0..n/2.
  void forward(std::span<const double> in, std::span<Complex> out) const {
    // FFTW does not modify the input of an r2c transform.
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
  }

  // Inverse of forward(), including the 1/n factor. `in` is used as scratch.
  void inverse(std::span<Complex> in, std::span<double> out) const {
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : out) v *= scale;
  }

  std::vector<Complex> forward(std::span<const double> in) const {
    std::vector<Complex> out(bins());
    forward(in, out);
    return out;
  }

  std::vector<double> inverse(std::span<const Complex> in) const {
    std::vector<Complex> scratch(in.begin(), in.end());
    std::vector<double> out(n_);
    inverse(scratch, out);
    return out;
  }

 private:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n < 2 || n % 2 != 0) throw DomainError("FFT length must be even and >= 2");
    std::vector<double> real(n);
    std::vector<Complex> spec(n / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(),
                                    reinterpret_cast<fftw_complex*>(spec.data()), flags);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                    reinterpret_cast<fftw_complex*>(spec.data()), real.data(), flags);
  }

  std::size_t n_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace dbq
