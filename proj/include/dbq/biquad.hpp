#pragma once

// Stateless second-order section math: recursion, frequency response,
// cascades, cookbook peaking/shelving design and the two-tap delay.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dbq/dual.hpp"
#include "dbq/error.hpp"
#include "dbq/fft.hpp"

namespace dbq {

inline constexpr double kDenominatorGuard = 1e-8;
inline constexpr double kMaxDelaySamples = 64.0;

// One second-order section with a0 normalized to 1.
template <typename T>
struct BasicBiquad {
  T b0{1.0}, b1{0.0}, b2{0.0}, a1{0.0}, a2{0.0};

  static BasicBiquad identity() { return {}; }
};

using BiquadCoeffs = BasicBiquad<double>;

// Strict interior of the stability triangle: a2 < 1 and a2 > |a1| - 1.
inline bool stable(const BiquadCoeffs& c) {
  return c.a2 < 1.0 && c.a2 > std::abs(c.a1) - 1.0;
}

inline bool finite(const BiquadCoeffs& c) {
  return std::isfinite(c.b0) && std::isfinite(c.b1) && std::isfinite(c.b2) &&
         std::isfinite(c.a1) && std::isfinite(c.a2);
}

struct AudioClip {
  std::vector<double> samples;
  double sample_rate = 44100.0;

  std::size_t size() const noexcept { return samples.size(); }
};

inline void validate(const AudioClip& clip) {
  if (!(clip.sample_rate > 0.0)) throw DomainError("sample rate must be positive");
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw DomainError("audio clip contains a non-finite sample");
}

// One-sided grid of an N-point transform: omega_i = 2 pi i / N, i = 0..N/2.
class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::size_t fft_size) : fft_size_(fft_size) {
    if (fft_size < 2 || fft_size % 2 != 0) throw DomainError("grid transform size must be even");
    omegas_.resize(fft_size / 2 + 1);
    for (std::size_t i = 0; i < omegas_.size(); ++i)
      omegas_[i] = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(fft_size);
  }

  std::size_t fft_size() const noexcept { return fft_size_; }
  std::size_t bin_count() const noexcept { return omegas_.size(); }
  const std::vector<double>& omegas() const noexcept { return omegas_; }
  double omega(std::size_t i) const { return omegas_[i]; }
  double hz(std::size_t i, double sample_rate) const {
    return omegas_[i] * sample_rate / (2.0 * std::numbers::pi);
  }

 private:
  std::size_t fft_size_;
  std::vector<double> omegas_;
};

using ComplexResponse = std::vector<Complex>;

// Unit-delay powers e^{-j w}, e^{-j 2w} for one grid bin.
struct BinPhasors {
  Complex z1, z2;
  explicit BinPhasors(double omega) : z1(std::polar(1.0, -omega)), z2(std::polar(1.0, -2.0 * omega)) {}
};

// H(e^{j omega}) of one section.
inline Complex evaluate_response(const BiquadCoeffs& c, double omega) {
  const BinPhasors e(omega);
  return (c.b0 + c.b1 * e.z1 + c.b2 * e.z2) / (1.0 + c.a1 * e.z1 + c.a2 * e.z2);
}

inline ComplexResponse biquad_response(const BiquadCoeffs& c, const FrequencyGrid& grid) {
  ComplexResponse h(grid.bin_count());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const BinPhasors e(grid.omega(i));
    const Complex num = c.b0 + c.b1 * e.z1 + c.b2 * e.z2;
    const Complex den = 1.0 + c.a1 * e.z1 + c.a2 * e.z2;
    if (std::abs(den) < kDenominatorGuard)
      throw DegeneracyError("biquad denominator vanishes at bin " + std::to_string(i));
    h[i] = num / den;
  }
  return h;
}

inline ComplexResponse cascade_response(std::span<const BiquadCoeffs> sections, const FrequencyGrid& grid) {
  if (sections.empty()) throw DomainError("cascade must contain at least one section");
  ComplexResponse h = biquad_response(sections.front(), grid);
  for (std::size_t k = 1; k < sections.size(); ++k) {
    const ComplexResponse hk = biquad_response(sections[k], grid);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= hk[i];
  }
  return h;
}

// Direct form I history; zero unless supplied.
struct FilterState {
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
};

// In-place direct form I recursion. Throws InstabilityError at the first
// non-finite output sample.
inline void biquad_filter_inplace(const BiquadCoeffs& c, std::span<double> x, FilterState state = {}) {
  assert(stable(c));
  auto [x1, x2, y1, y2] = state;
  for (double& s : x) {
    const double in = s;
    const double y = c.b0 * in + c.b1 * x1 + c.b2 * x2 - c.a1 * y1 - c.a2 * y2;
    x2 = x1;
    x1 = in;
    y2 = y1;
    y1 = y;
    s = y;
  }
  const auto bad = std::find_if(x.begin(), x.end(), [](double v) { return !std::isfinite(v); });
  if (bad != x.end())
    throw InstabilityError("biquad output is not finite", static_cast<std::size_t>(bad - x.begin()));
}

inline AudioClip biquad_filter(const BiquadCoeffs& c, AudioClip x, FilterState state = {}) {
  biquad_filter_inplace(c, x.samples, state);
  return x;
}

inline void cascade_filter_inplace(std::span<const BiquadCoeffs> sections, std::span<double> x) {
  for (const auto& c : sections) biquad_filter_inplace(c, x);
}

inline AudioClip cascade_filter(std::span<const BiquadCoeffs> sections, AudioClip x) {
  cascade_filter_inplace(sections, x.samples);
  return x;
}

template <typename T>
T db_to_linear(const T& db) {
  return pow10(db / T(20.0));
}

inline AudioClip tanh_nl(AudioClip x) {
  for (double& s : x.samples) s = std::tanh(s);
  return x;
}

enum class RbjKind { Peaking, LowShelf, HighShelf };

inline const char* to_string(RbjKind k) {
  switch (k) {
    case RbjKind::Peaking: return "peaking";
    case RbjKind::LowShelf: return "low_shelf";
    case RbjKind::HighShelf: return "high_shelf";
  }
  return "?";
}

// Cookbook peaking and shelving sections. Shelves use the Q form of alpha
// directly, alpha = sin(w0) / (2 Q). Written for double and Dual scalars.
template <typename T>
BasicBiquad<T> rbj_design(RbjKind kind, const T& freq_hz, const T& gain_db, const T& q, double sample_rate) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const double f = value_of(freq_hz);
  if (!(f > 0.0 && f < sample_rate / 2.0))
    throw DomainError("cookbook frequency " + std::to_string(f) + " Hz outside (0, fs/2)");
  if (!(value_of(q) > 0.0)) throw DomainError("cookbook Q must be positive");

  const T amp = pow10(gain_db / T(40.0));
  const T w0 = freq_hz * T(2.0 * std::numbers::pi / sample_rate);
  const T cs = cos(w0);
  const T alpha = sin(w0) / (T(2.0) * q);

  T b0{}, b1{}, b2{}, a0{}, a1{}, a2{};
  switch (kind) {
    case RbjKind::Peaking:
      b0 = T(1.0) + alpha * amp;
      b1 = T(-2.0) * cs;
      b2 = T(1.0) - alpha * amp;
      a0 = T(1.0) + alpha / amp;
      a1 = T(-2.0) * cs;
      a2 = T(1.0) - alpha / amp;
      break;
    case RbjKind::LowShelf: {
      const T ap = amp + T(1.0), am = amp - T(1.0);
      const T beta = T(2.0) * sqrt(amp) * alpha;
      b0 = amp * (ap - am * cs + beta);
      b1 = T(2.0) * amp * (am - ap * cs);
      b2 = amp * (ap - am * cs - beta);
      a0 = ap + am * cs + beta;
      a1 = T(-2.0) * (am + ap * cs);
      a2 = ap + am * cs - beta;
      break;
    }
    case RbjKind::HighShelf: {
      const T ap = amp + T(1.0), am = amp - T(1.0);
      const T beta = T(2.0) * sqrt(amp) * alpha;
      b0 = amp * (ap + am * cs + beta);
      b1 = T(-2.0) * amp * (am + ap * cs);
      b2 = amp * (ap + am * cs - beta);
      a0 = ap - am * cs + beta;
      a1 = T(2.0) * (am - ap * cs);
      a2 = ap - am * cs - beta;
      break;
    }
  }
  return {b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

// Two-tap linear-interpolation delay: taps (1 - frac, frac) at floor(d), floor(d) + 1.
struct DelayTaps {
  std::size_t whole = 0;
  double frac = 0.0;

  double first() const { return 1.0 - frac; }
  double second() const { return frac; }
};

inline DelayTaps delay_taps(double d, double d_max = kMaxDelaySamples) {
  if (!(d >= 0.0 && d <= d_max)) throw DomainError("delay " + std::to_string(d) + " outside [0, D_max]");
  const double whole = std::floor(d);
  return {static_cast<std::size_t>(whole), d - whole};
}

inline std::vector<double> apply_delay(const DelayTaps& taps, std::span<const double> x) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = taps.whole; n < x.size(); ++n) {
    double acc = taps.first() * x[n - taps.whole];
    if (n > taps.whole) acc += taps.second() * x[n - taps.whole - 1];
    y[n] = acc;
  }
  return y;
}

inline AudioClip fractional_delay_filter(double d, const AudioClip& x, double d_max = kMaxDelaySamples) {
  return {apply_delay(delay_taps(d, d_max), x.samples), x.sample_rate};
}

}  // namespace dbq
