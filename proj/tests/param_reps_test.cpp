#include "dbq/representation.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace dbq {
namespace {

constexpr double kFs = 44100.0;
constexpr double kRho = kPoleRadiusCap;

RawStageParams raw_of(double gain, std::vector<double> sections) { return {gain, std::move(sections)}; }

TEST(RepresentationTest, ParamsPerBiquad) {
  EXPECT_EQ(params_per_biquad(Representation::Coefficient), 4u);
  EXPECT_EQ(params_per_biquad(Representation::PoleZero), 4u);
  EXPECT_EQ(params_per_biquad(Representation::ParametricEq), 3u);
}

TEST(RepresentationTest, ParseRoundTrip) {
  for (auto r : {Representation::Coefficient, Representation::PoleZero, Representation::ParametricEq})
    EXPECT_EQ(parse_representation(to_string(r)), r);
  EXPECT_EQ(parse_representation("peq"), Representation::ParametricEq);
  EXPECT_THROW(parse_representation("lattice"), ValidationError);
}

TEST(P2cCoefficientTest, CenterOfTriangle) {
  const auto st = p2c_coefficient(raw_of(0.0, {0.3, -0.2, 0.0, 0.0}));
  ASSERT_EQ(st.sections.size(), 1u);
  const auto& c = st.sections[0];
  EXPECT_EQ(c.b0, 1.0);
  EXPECT_EQ(c.b1, 0.3);
  EXPECT_EQ(c.b2, -0.2);
  EXPECT_EQ(c.a1, 0.0);
  EXPECT_EQ(c.a2, 0.0);
  EXPECT_EQ(st.linear_gain, 1.0);
}

TEST(P2cCoefficientTest, ScalarEvaluation) {
  const auto c = p2c_coefficient(raw_of(0.0, {0.0, 0.0, 1.0, 0.5})).sections[0];
  const double a1 = 2.0 * std::tanh(1.0);
  const double a2 = ((2.0 - a1) * std::tanh(0.5) + a1) / 2.0;
  EXPECT_NEAR(a1, 1.5232, 1e-4);
  EXPECT_NEAR(a2, 0.8718, 1e-4);
  EXPECT_DOUBLE_EQ(c.a1, kRho * a1);
  EXPECT_DOUBLE_EQ(c.a2, kRho * kRho * a2);
  EXPECT_TRUE(stable(c));
}

TEST(P2cCoefficientTest, SaturationStaysInsideTriangle) {
  for (double s : {1.0, -1.0}) {
    const auto c = p2c_coefficient(raw_of(0.0, {0.0, 0.0, s * 1e6, 1e6})).sections[0];
    EXPECT_NEAR(c.a1, s * 2.0 * kRho, 1e-12);
    EXPECT_NEAR(c.a2, kRho * kRho, 1e-12);
    EXPECT_TRUE(stable(c));
  }
  const auto low = p2c_coefficient(raw_of(0.0, {0.0, 0.0, 0.0, -1e6})).sections[0];
  EXPECT_NEAR(low.a2, -kRho * kRho, 1e-12);
  EXPECT_TRUE(stable(low));
}

TEST(P2cPoleZeroTest, PoleCompressedByTanh) {
  const auto c = p2c_polezero(raw_of(0.0, {0.0, 0.0, 2.0, 0.0})).sections[0];
  const double p = kRho * std::tanh(2.0);
  EXPECT_NEAR(std::tanh(2.0), 0.9640, 1e-4);
  EXPECT_DOUBLE_EQ(c.a1, -2.0 * p);
  EXPECT_DOUBLE_EQ(c.a2, p * p);
}

TEST(P2cPoleZeroTest, OriginPole) {
  const auto c = p2c_polezero(raw_of(0.0, {0.0, 0.0, 0.0, 0.0})).sections[0];
  EXPECT_EQ(c.a1, 0.0);
  EXPECT_EQ(c.a2, 0.0);
}

TEST(P2cPoleZeroTest, ZeroExpansionIndependentOfPole) {
  for (double pr : {0.0, 0.4, -3.0}) {
    const auto c = p2c_polezero(raw_of(0.0, {1.0, 1.0, pr, 0.7})).sections[0];
    EXPECT_EQ(c.b0, 1.0);
    EXPECT_EQ(c.b1, -2.0);
    EXPECT_EQ(c.b2, 2.0);
  }
}

TEST(P2cPoleZeroTest, SeriesBranchIsContinuous) {
  // Both sides of the small-radius series switch agree with the closed form.
  for (double r : {std::sqrt(0.999e-6), std::sqrt(1.001e-6), 1e-9}) {
    const auto c = p2c_polezero(raw_of(0.0, {0, 0, r, 0})).sections[0];
    EXPECT_NEAR(c.a1, -2.0 * kRho * std::tanh(r), 1e-18);
  }
}

TEST(P2cParametricEqTest, CumulativeFrequencies) {
  std::vector<double> v;
  for (int k = 0; k < 4; ++k) v.insert(v.end(), {0.25, 0.0, 0.0});
  const auto eq = eq_sections(raw_of(0.0, v), kFs);
  const double expected[4] = {2756.25, 5512.5, 8268.75, 11025.0};
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(eq[k].freq_hz, expected[k]);
  EXPECT_EQ(eq[0].kind, RbjKind::LowShelf);
  EXPECT_EQ(eq[1].kind, RbjKind::Peaking);
  EXPECT_EQ(eq[2].kind, RbjKind::Peaking);
  EXPECT_EQ(eq[3].kind, RbjKind::HighShelf);
}

TEST(P2cParametricEqTest, SigmoidMidpointQ) {
  std::vector<double> v;
  for (int k = 0; k < 4; ++k) v.insert(v.end(), {0.2, 0.0, 0.0});
  const auto eq = eq_sections(raw_of(0.0, v), kFs);
  // Q = Qmin + (Qmax - Qmin) / 2
  EXPECT_DOUBLE_EQ(eq[0].q, kMinQ + (1.0 - kMinQ) / 2.0);
  EXPECT_DOUBLE_EQ(eq[1].q, kMinQ + (3.0 - kMinQ) / 2.0);
  EXPECT_DOUBLE_EQ(eq[3].q, kMinQ + (1.0 - kMinQ) / 2.0);
  EXPECT_NEAR(eq[0].q, 0.5, 1e-3);
  EXPECT_NEAR(eq[1].q, 1.5, 1e-3);
}

TEST(P2cParametricEqTest, ZeroGainsGiveUnityResponse) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v;
  for (int k = 0; k < 6; ++k) v.insert(v.end(), {g(rng), 0.0, g(rng)});
  const auto st = p2c_parametric_eq(raw_of(-6.0, v), kFs);
  for (const auto& h : cascade_response(st.sections, FrequencyGrid(1024))) EXPECT_NEAR(std::abs(h), 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(st.linear_gain, db_to_linear(-6.0));
}

TEST(P2cParametricEqTest, EdgeFrequenciesClampedInward) {
  // All folded terms zero puts every section at 0 Hz; all 0.5 puts the last at Nyquist.
  const auto low = eq_sections(raw_of(0.0, {0, 0, 0, 1, 0, 0, 2, 0, 0}), kFs);
  for (const auto& s : low) EXPECT_EQ(s.freq_hz, kFreqEdgeHz);
  const auto high = eq_sections(raw_of(0.0, {0.5, 0, 0, 0.5, 0, 0, 0.5, 0, 0}), kFs);
  EXPECT_EQ(high.back().freq_hz, kFs / 2.0 - kFreqEdgeHz);
  EXPECT_NO_THROW(p2c_parametric_eq(raw_of(0.0, {0.5, 3, 0, 0.5, 3, 0, 0.5, 3, 0}), kFs));
}

TEST(P2cParametricEqTest, RequiresShelvesPair) {
  EXPECT_THROW(p2c_parametric_eq(raw_of(0.0, {0.1, 0.0, 0.0}), kFs), DomainError);
  EXPECT_THROW(p2c_parametric_eq(raw_of(0.0, {0.1, 0.0, 0.0, 0.2}), kFs), DomainError);
}

TEST(P2cPropertyTest, AlwaysStable) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 10.0);
  for (auto rep : {Representation::Coefficient, Representation::PoleZero, Representation::ParametricEq}) {
    const std::size_t k = 4, p = params_per_biquad(rep);
    for (int trial = 0; trial < 20000; ++trial) {
      std::vector<double> v(k * p);
      for (auto& x : v) x = g(rng);
      const auto st = p2c(rep, raw_of(g(rng), v), kFs);
      for (const auto& c : st.sections) ASSERT_TRUE(stable(c) && finite(c)) << to_string(rep);
    }
  }
}

TEST(P2cPropertyTest, EqFrequenciesNonDecreasing) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<double> v(8 * 3);
    for (auto& x : v) x = g(rng);
    const auto eq = eq_sections(raw_of(0.0, v), kFs);
    for (std::size_t k = 1; k < eq.size(); ++k) ASSERT_LE(eq[k - 1].freq_hz, eq[k].freq_hz);
    ASSERT_GE(eq.front().freq_hz, kFreqEdgeHz);
    ASSERT_LE(eq.back().freq_hz, kFs / 2.0 - kFreqEdgeHz);
  }
}

TEST(FoldTest, TiesToEven) {
  EXPECT_EQ(detail::fold(0.5), 0.5);
  EXPECT_EQ(detail::fold(1.5), 0.5);
  EXPECT_EQ(detail::fold(2.25), 0.25);
  EXPECT_EQ(detail::fold(-0.75), 0.25);
  EXPECT_EQ(detail::fold(3.0), 0.0);
}

// Central differences of p2c against the forward-mode Jacobian.
void check_jacobian(Representation rep, std::size_t k, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> flat(1 + k * params_per_biquad(rep));
  for (auto& x : flat) x = g(rng);
  if (rep == Representation::ParametricEq)
    for (std::size_t s = 0; s < k; ++s) flat[1 + 3 * s] = 0.05 + 0.3 * std::abs(g(rng)) / (1.0 + std::abs(g(rng)));
  const auto raw = RawStageParams::from_flat(flat);
  const auto jac = p2c_with_jacobian(rep, raw, kFs);
  const auto plain = p2c(rep, raw, kFs);
  for (std::size_t s = 0; s < k; ++s) {
    EXPECT_NEAR(jac.stage.sections[s].a1, plain.sections[s].a1, 1e-14);
    EXPECT_NEAR(jac.stage.sections[s].b2, plain.sections[s].b2, 1e-14);
  }
  for (std::size_t j = 0; j < flat.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(flat[j]));
    auto up = flat, dn = flat;
    up[j] += h;
    dn[j] -= h;
    const auto su = p2c(rep, RawStageParams::from_flat(up), kFs);
    const auto sd = p2c(rep, RawStageParams::from_flat(dn), kFs);
    if (j == 0) {
      EXPECT_NEAR(jac.gain, (su.linear_gain - sd.linear_gain) / (2 * h), 1e-6 * std::abs(jac.gain));
    }
    for (std::size_t s = 0; s < k; ++s) {
      const double u[5] = {su.sections[s].b0, su.sections[s].b1, su.sections[s].b2, su.sections[s].a1,
                           su.sections[s].a2};
      const double d[5] = {sd.sections[s].b0, sd.sections[s].b1, sd.sections[s].b2, sd.sections[s].a1,
                           sd.sections[s].a2};
      for (std::size_t c = 0; c < 5; ++c) {
        const double fd = (u[c] - d[c]) / (2 * h);
        EXPECT_NEAR(jac.at(s, c, j), fd, 1e-6 * std::max(1.0, std::abs(fd)))
            << to_string(rep) << " section " << s << " coeff " << c << " raw " << j;
      }
    }
  }
}

TEST(P2cJacobianTest, MatchesFiniteDifferences) {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    check_jacobian(Representation::Coefficient, 3, seed);
    check_jacobian(Representation::PoleZero, 3, seed);
    check_jacobian(Representation::ParametricEq, 4, seed);
  }
}

TEST(KinkSignatureTest, DetectsBranchChanges) {
  const auto base = raw_of(0.0, {0, 0, 0.5, 0});
  auto flipped = base;
  flipped.sections[2] = -0.5;
  EXPECT_NE(kink_signature(Representation::Coefficient, base, kFs),
            kink_signature(Representation::Coefficient, flipped, kFs));
  EXPECT_TRUE(kink_signature(Representation::PoleZero, raw_of(0.0, {1, 2, 3, 4}), kFs).empty());

  const auto eq_a = raw_of(0.0, {0.2, 0, 0, 0.3, 0, 0});
  const auto eq_b = raw_of(0.0, {0.2, 0, 0, 0.6, 0, 0});
  EXPECT_NE(kink_signature(Representation::ParametricEq, eq_a, kFs),
            kink_signature(Representation::ParametricEq, eq_b, kFs));
}

}  // namespace
}  // namespace dbq
