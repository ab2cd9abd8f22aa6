#pragma once

// The three cascaded-biquad parameterizations and their parameter-to-coefficient
// ("p2c") activations. Every activation is total and yields sections strictly
// inside the stability triangle.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbq/biquad.hpp"
#include "dbq/dual.hpp"
#include "dbq/error.hpp"

namespace dbq {

enum class Representation { Coefficient, PoleZero, ParametricEq };

inline constexpr std::size_t params_per_biquad(Representation r) {
  return r == Representation::ParametricEq ? 3 : 4;
}

inline std::string_view to_string(Representation r) {
  switch (r) {
    case Representation::Coefficient: return "coefficient";
    case Representation::PoleZero: return "pole_zero";
    case Representation::ParametricEq: return "parametric_eq";
  }
  return "?";
}

inline Representation parse_representation(std::string_view s) {
  if (s == "coefficient") return Representation::Coefficient;
  if (s == "pole_zero" || s == "polezero") return Representation::PoleZero;
  if (s == "parametric_eq" || s == "peq") return Representation::ParametricEq;
  throw ValidationError("representation", "unknown representation '" + std::string(s) + "'");
}

// Pole radii are scaled by this factor, which shrinks the stability triangle
// to the region whose poles have radius <= kPoleRadiusCap.
inline constexpr double kPoleRadiusCap = 1.0 - 1e-3;
// Lower bound on the realized Q of cookbook sections.
inline constexpr double kMinQ = 1e-3;
// Cookbook frequencies are kept this far (Hz) from 0 and Nyquist.
inline constexpr double kFreqEdgeHz = 1.0;

// Unconstrained parameters of one stage: the gain in dB followed by K
// section vectors of length P, stored section-major.
struct RawStageParams {
  double gain_db_raw = 0.0;
  std::vector<double> sections;

  std::size_t section_count(Representation r) const { return sections.size() / params_per_biquad(r); }
  double at(Representation r, std::size_t k, std::size_t p) const {
    return sections[k * params_per_biquad(r) + p];
  }

  // [gain, v_0, v_1, ...], the layout produced by the hyperconditioning map.
  std::vector<double> flat() const {
    std::vector<double> out;
    out.reserve(1 + sections.size());
    out.push_back(gain_db_raw);
    out.insert(out.end(), sections.begin(), sections.end());
    return out;
  }

  static RawStageParams from_flat(std::span<const double> flat) {
    if (flat.empty()) throw DomainError("raw stage vector must hold at least the gain");
    return {flat.front(), std::vector<double>(flat.begin() + 1, flat.end())};
  }
};

struct RealizedStage {
  std::vector<BiquadCoeffs> sections;
  double gain_db = 0.0;
  double linear_gain = 1.0;
};

// Realized cookbook parameters of one parametric-EQ section, for inspection.
struct EqSection {
  RbjKind kind;
  double freq_hz;
  double gain_db;
  double q;
};

namespace detail {

template <typename T>
BasicBiquad<T> coefficient_section(const T& b1, const T& b2, const T& a1_raw, const T& a2_raw) {
  using std::abs;
  using std::tanh;
  const T a1 = T(2.0) * tanh(a1_raw);
  const T a1_mag = abs(a1);
  const T a2 = ((T(2.0) - a1_mag) * tanh(a2_raw) + a1_mag) / T(2.0);
  const double rho = kPoleRadiusCap;
  return {T(1.0), b1, b2, a1 * T(rho), a2 * T(rho * rho)};
}

// tanh(r)/r as a smooth function of r^2 (series near the origin).
template <typename T>
T tanh_ratio_of_square(const T& r2) {
  using std::sqrt;
  using std::tanh;
  if (value_of(r2) < 1e-6)
    return T(1.0) - r2 / T(3.0) + T(2.0 / 15.0) * r2 * r2 - T(17.0 / 315.0) * r2 * r2 * r2;
  const T r = sqrt(r2);
  return tanh(r) / r;
}

template <typename T>
BasicBiquad<T> polezero_section(const T& q_re, const T& q_im, const T& p_re, const T& p_im) {
  const T scale = tanh_ratio_of_square(p_re * p_re + p_im * p_im) * T(kPoleRadiusCap);
  const T pr = p_re * scale;
  const T pi = p_im * scale;
  return {T(1.0), T(-2.0) * q_re, q_re * q_re + q_im * q_im, T(-2.0) * pr, pr * pr + pi * pi};
}

// Triangle-wave fold |round(f) - f| in [0, 0.5] (ties to even) and its slope.
inline double fold(double f) { return std::abs(std::nearbyint(f) - f); }
inline double fold_slope(double f) {
  const double d = f - std::nearbyint(f);
  return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
}

inline RbjKind eq_kind(std::size_t k, std::size_t count) {
  if (k == 0) return RbjKind::LowShelf;
  if (k + 1 == count) return RbjKind::HighShelf;
  return RbjKind::Peaking;
}

inline double eq_q_max(std::size_t k, std::size_t count) { return (k > 0 && k + 1 < count) ? 3.0 : 1.0; }

template <typename T>
T eq_q(const T& q_raw, double q_max) {
  return T(kMinQ) + T(q_max - kMinQ) * sigmoid(q_raw);
}

// Cumulative folded frequencies in Hz, before the edge clamp.
inline std::vector<double> eq_frequencies_unclamped(const RawStageParams& raw, double sample_rate) {
  const std::size_t count = raw.section_count(Representation::ParametricEq);
  std::vector<double> out(count);
  const double scale = sample_rate / static_cast<double>(count);
  double acc = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    acc += fold(raw.at(Representation::ParametricEq, k, 0));
    out[k] = scale * acc;
  }
  return out;
}

inline double clamp_eq_frequency(double f, double sample_rate) {
  return std::clamp(f, kFreqEdgeHz, sample_rate / 2.0 - kFreqEdgeHz);
}

inline void require_sections(const RawStageParams& raw, Representation rep) {
  const std::size_t p = params_per_biquad(rep);
  if (raw.sections.empty() || raw.sections.size() % p != 0)
    throw DomainError("raw stage vector length is not a multiple of P");
  if (rep == Representation::ParametricEq && raw.sections.size() / p < 2)
    throw DomainError("parametric EQ stages need K >= 2 (low shelf and high shelf)");
}

}  // namespace detail

inline RealizedStage p2c_coefficient(const RawStageParams& raw) {
  detail::require_sections(raw, Representation::Coefficient);
  RealizedStage out;
  for (std::size_t k = 0; k < raw.section_count(Representation::Coefficient); ++k) {
    const auto* v = &raw.sections[k * 4];
    out.sections.push_back(detail::coefficient_section<double>(v[0], v[1], v[2], v[3]));
  }
  out.gain_db = raw.gain_db_raw;
  out.linear_gain = db_to_linear(raw.gain_db_raw);
  return out;
}

inline RealizedStage p2c_polezero(const RawStageParams& raw) {
  detail::require_sections(raw, Representation::PoleZero);
  RealizedStage out;
  for (std::size_t k = 0; k < raw.section_count(Representation::PoleZero); ++k) {
    const auto* v = &raw.sections[k * 4];
    out.sections.push_back(detail::polezero_section<double>(v[0], v[1], v[2], v[3]));
  }
  out.gain_db = raw.gain_db_raw;
  out.linear_gain = db_to_linear(raw.gain_db_raw);
  return out;
}

// Realized cookbook settings of every section of a parametric-EQ stage.
inline std::vector<EqSection> eq_sections(const RawStageParams& raw, double sample_rate) {
  detail::require_sections(raw, Representation::ParametricEq);
  const std::size_t count = raw.section_count(Representation::ParametricEq);
  const auto freqs = detail::eq_frequencies_unclamped(raw, sample_rate);
  std::vector<EqSection> out;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back({detail::eq_kind(k, count), detail::clamp_eq_frequency(freqs[k], sample_rate),
                   raw.at(Representation::ParametricEq, k, 1),
                   detail::eq_q(raw.at(Representation::ParametricEq, k, 2), detail::eq_q_max(k, count))});
  }
  return out;
}

inline RealizedStage p2c_parametric_eq(const RawStageParams& raw, double sample_rate) {
  RealizedStage out;
  for (const auto& s : eq_sections(raw, sample_rate))
    out.sections.push_back(rbj_design<double>(s.kind, s.freq_hz, s.gain_db, s.q, sample_rate));
  out.gain_db = raw.gain_db_raw;
  out.linear_gain = db_to_linear(raw.gain_db_raw);
  return out;
}

inline RealizedStage p2c(Representation rep, const RawStageParams& raw, double sample_rate) {
  switch (rep) {
    case Representation::Coefficient: return p2c_coefficient(raw);
    case Representation::PoleZero: return p2c_polezero(raw);
    case Representation::ParametricEq: return p2c_parametric_eq(raw, sample_rate);
  }
  throw DomainError("unknown representation");
}

// Realized stage together with the Jacobian of every coefficient and of the
// linear gain with respect to the flat raw vector [gain, v_0, ..., v_{K-1}].
struct StageJacobian {
  RealizedStage stage;
  std::size_t width = 0;            // 1 + K P
  std::vector<double> coeff;        // K x 5 x width, coefficient order b0 b1 b2 a1 a2
  double gain = 0.0;                // d linear_gain / d raw[0]

  double& at(std::size_t k, std::size_t c, std::size_t j) { return coeff[(k * 5 + c) * width + j]; }
  double at(std::size_t k, std::size_t c, std::size_t j) const { return coeff[(k * 5 + c) * width + j]; }
};

namespace detail {

template <std::size_t N>
void store_section(StageJacobian& jac, std::size_t k, const BasicBiquad<Dual<N>>& s,
                   std::span<const std::size_t> columns) {
  const Dual<N>* parts[5] = {&s.b0, &s.b1, &s.b2, &s.a1, &s.a2};
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t i = 0; i < N; ++i) jac.at(k, c, columns[i]) += parts[c]->d[i];
  jac.stage.sections.push_back({s.b0.v, s.b1.v, s.b2.v, s.a1.v, s.a2.v});
}

}  // namespace detail

inline StageJacobian p2c_with_jacobian(Representation rep, const RawStageParams& raw, double sample_rate) {
  detail::require_sections(raw, rep);
  const std::size_t p = params_per_biquad(rep);
  const std::size_t count = raw.sections.size() / p;
  StageJacobian jac;
  jac.width = 1 + count * p;
  jac.coeff.assign(count * 5 * jac.width, 0.0);
  jac.stage.gain_db = raw.gain_db_raw;
  jac.stage.linear_gain = db_to_linear(raw.gain_db_raw);
  jac.gain = jac.stage.linear_gain * std::numbers::ln10 / 20.0;

  if (rep != Representation::ParametricEq) {
    using D = Dual<4>;
    for (std::size_t k = 0; k < count; ++k) {
      const auto* v = &raw.sections[k * 4];
      const D x0 = D::variable(v[0], 0), x1 = D::variable(v[1], 1);
      const D x2 = D::variable(v[2], 2), x3 = D::variable(v[3], 3);
      const auto s = rep == Representation::Coefficient ? detail::coefficient_section(x0, x1, x2, x3)
                                                        : detail::polezero_section(x0, x1, x2, x3);
      const std::size_t base = 1 + k * 4;
      const std::size_t cols[4] = {base, base + 1, base + 2, base + 3};
      detail::store_section<4>(jac, k, s, cols);
    }
    return jac;
  }

  using D = Dual<3>;
  const auto freqs = detail::eq_frequencies_unclamped(raw, sample_rate);
  const double scale = sample_rate / static_cast<double>(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double f = freqs[k];
    const double fc = detail::clamp_eq_frequency(f, sample_rate);
    const bool clamped = fc != f;
    const D fh = D::variable(fc, 0);
    const D g = D::variable(raw.at(rep, k, 1), 1);
    const D q = detail::eq_q(D::variable(raw.at(rep, k, 2), 2), detail::eq_q_max(k, count));
    const auto s = rbj_design(detail::eq_kind(k, count), fh, g, q, sample_rate);
    const std::size_t base = 1 + k * 3;
    // Frequency tangent is spread over the raw frequencies of sections 0..k below.
    const std::size_t cols[2] = {base + 1, base + 2};
    const Dual<3>* parts[5] = {&s.b0, &s.b1, &s.b2, &s.a1, &s.a2};
    for (std::size_t c = 0; c < 5; ++c) {
      jac.at(k, c, cols[0]) += parts[c]->d[1];
      jac.at(k, c, cols[1]) += parts[c]->d[2];
      if (clamped) continue;
      for (std::size_t j = 0; j <= k; ++j) {
        const double df = scale * detail::fold_slope(raw.at(rep, j, 0));
        jac.at(k, c, 1 + j * 3) += parts[c]->d[0] * df;
      }
    }
    jac.stage.sections.push_back({s.b0.v, s.b1.v, s.b2.v, s.a1.v, s.a2.v});
  }
  return jac;
}

// Discrete branch indicators of every piecewise activation in a stage. Two raw
// vectors with equal signatures lie on the same smooth branch.
inline std::vector<long> kink_signature(Representation rep, const RawStageParams& raw, double sample_rate) {
  std::vector<long> sig;
  const std::size_t p = params_per_biquad(rep);
  const std::size_t count = raw.sections.size() / p;
  if (rep == Representation::Coefficient) {
    for (std::size_t k = 0; k < count; ++k) {
      const double a1 = raw.at(rep, k, 2);
      sig.push_back(a1 > 0.0 ? 1 : (a1 < 0.0 ? -1 : 0));
    }
  } else if (rep == Representation::ParametricEq) {
    for (std::size_t k = 0; k < count; ++k) {
      // floor(2 f) changes at every integer and half-integer, the two kinks of the fold.
      const double f = raw.at(rep, k, 0);
      const double twice = 2.0 * f;
      sig.push_back(static_cast<long>(std::floor(twice)) * 2 + (twice == std::floor(twice) ? 1 : 0));
    }
    const auto freqs = detail::eq_frequencies_unclamped(raw, sample_rate);
    for (double f : freqs) sig.push_back(detail::clamp_eq_frequency(f, sample_rate) == f ? 0 : 1);
  }
  return sig;
}

}  // namespace dbq
