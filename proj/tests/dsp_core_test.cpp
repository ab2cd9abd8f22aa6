#include "dbq/biquad.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "dbq/fft.hpp"
#include "gtest/gtest.h"

namespace dbq {
namespace {

constexpr double kPi = std::numbers::pi;

BiquadCoeffs one_pole(double pole) { return {1.0, 0.0, 0.0, -pole, 0.0}; }
BiquadCoeffs unit_delay() { return {0.0, 1.0, 0.0, 0.0, 0.0}; }

// Random section with conjugate poles of radius <= max_radius.
BiquadCoeffs random_stable(std::mt19937_64& rng, double max_radius) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = max_radius * unit(rng), theta = kPi * unit(rng);
  const double zr = 1.2 * unit(rng), ztheta = kPi * unit(rng);
  return {1.0, -2.0 * zr * std::cos(ztheta), zr * zr, -2.0 * r * std::cos(theta), r * r};
}

// O(N^2) DFT used as an independent oracle for the FFT wrapper.
std::vector<Complex> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k)
    for (std::size_t m = 0; m < n; ++m) out[k] += x[m] * std::polar(1.0, -2.0 * kPi * double(k * m) / double(n));
  return out;
}

TEST(FrequencyGridTest, OneSidedLinearGrid) {
  const FrequencyGrid grid(8);
  ASSERT_EQ(grid.bin_count(), 5u);
  EXPECT_EQ(grid.omega(0), 0.0);
  EXPECT_DOUBLE_EQ(grid.omega(4), kPi);
  for (std::size_t i = 1; i < grid.bin_count(); ++i) EXPECT_GT(grid.omega(i), grid.omega(i - 1));
  EXPECT_THROW(FrequencyGrid(7), DomainError);
}

TEST(FftTest, MatchesNaiveDftAndRoundTrips) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> x(64);
  for (auto& v : x) v = g(rng);
  const auto& fft = RealFft::get(64);
  const auto fast = fft.forward(x);
  const auto slow = naive_dft(x);
  for (std::size_t k = 0; k < fast.size(); ++k) EXPECT_LT(std::abs(fast[k] - slow[k]), 1e-11);
  const auto back = fft.inverse(fast);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-13);
}

TEST(BiquadResponseTest, IdentityIsUnity) {
  const auto h = biquad_response(BiquadCoeffs::identity(), FrequencyGrid(16));
  for (const auto& v : h) EXPECT_EQ(v, Complex(1.0, 0.0));
}

TEST(BiquadResponseTest, OnePoleAtDcAndNyquist) {
  const auto h = biquad_response(one_pole(0.5), FrequencyGrid(4));
  EXPECT_NEAR(h.front().real(), 2.0, 1e-15);
  EXPECT_NEAR(h.front().imag(), 0.0, 1e-15);
  EXPECT_NEAR(h.back().real(), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(h.back().imag(), 0.0, 1e-15);
}

TEST(BiquadResponseTest, VanishingDenominatorIsDegenerate) {
  // Double pole at z = 1.
  const BiquadCoeffs c{1.0, 0.0, 0.0, -2.0, 1.0};
  EXPECT_THROW(biquad_response(c, FrequencyGrid(16)), DegeneracyError);
}

TEST(CascadeResponseTest, Examples) {
  const FrequencyGrid grid(8);
  const std::vector<BiquadCoeffs> ids{BiquadCoeffs::identity(), BiquadCoeffs::identity()};
  for (const auto& v : cascade_response(ids, grid)) EXPECT_EQ(v, Complex(1.0));

  const std::vector<BiquadCoeffs> poles{one_pole(0.5), one_pole(0.5)};
  EXPECT_NEAR(cascade_response(poles, grid).front().real(), 4.0, 1e-14);

  const std::vector<BiquadCoeffs> single{one_pole(0.3)};
  const auto a = cascade_response(single, grid);
  const auto b = biquad_response(one_pole(0.3), grid);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);

  EXPECT_THROW(cascade_response(std::vector<BiquadCoeffs>{}, grid), DomainError);
}

TEST(CascadeResponseTest, ProductOfMemberResponses) {
  std::mt19937_64 rng(11);
  const FrequencyGrid grid(512);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BiquadCoeffs> sections;
    for (int k = 0; k < 4; ++k) sections.push_back(random_stable(rng, 0.99));
    const auto h = cascade_response(sections, grid);
    for (std::size_t i = 0; i < h.size(); ++i) {
      Complex prod(1.0);
      for (const auto& s : sections) prod *= evaluate_response(s, grid.omega(i));
      EXPECT_LE(std::abs(h[i] - prod), 1e-12 * std::abs(prod));
    }
  }
}

TEST(BiquadFilterTest, Examples) {
  const AudioClip x{{0.3, -1.0, 2.5, 0.0, 7.0}, 44100.0};
  EXPECT_EQ(biquad_filter(BiquadCoeffs::identity(), x).samples, x.samples);

  const auto y = biquad_filter(one_pole(0.5), AudioClip{{1.0, 0.0, 0.0, 0.0}, 44100.0});
  EXPECT_EQ(y.samples, (std::vector<double>{1.0, 0.5, 0.25, 0.125}));

  const auto d = biquad_filter(unit_delay(), AudioClip{{1.0, 2.0, 3.0}, 44100.0});
  EXPECT_EQ(d.samples, (std::vector<double>{0.0, 1.0, 2.0}));
}

TEST(BiquadFilterTest, InitialStateFeedsRecursion) {
  // y[0] = b0 x[0] + b1 x1 + b2 x2 - a1 y1 - a2 y2
  const BiquadCoeffs c{0.5, 0.25, 0.125, -0.5, 0.25};
  const auto y = biquad_filter(c, AudioClip{{1.0}, 1.0}, FilterState{2.0, 4.0, 1.0, -1.0});
  EXPECT_DOUBLE_EQ(y.samples[0], 0.5 + 0.5 + 0.5 + 0.5 + 0.25);
}

TEST(BiquadFilterTest, NonFiniteOutputReportsIndex) {
#ifndef NDEBUG
  GTEST_SKIP() << "unstable coefficients trip the debug assertion";
#else
  const BiquadCoeffs growing{1.0, 0.0, 0.0, -3.0, 0.0};
  std::vector<double> x(2000, 0.0);
  x[0] = 1.0;
  try {
    biquad_filter(growing, AudioClip{x, 1.0});
    FAIL() << "expected InstabilityError";
  } catch (const InstabilityError& e) {
    // 3^n overflows double once n exceeds log(DBL_MAX) / log(3) ~ 646.
    EXPECT_GT(e.index(), 600u);
    EXPECT_LT(e.index(), 700u);
  }
#endif
}

TEST(CascadeFilterTest, Examples) {
  const AudioClip x{{0.1, 0.2, -0.3}, 1.0};
  const std::vector<BiquadCoeffs> ids(3, BiquadCoeffs::identity());
  EXPECT_EQ(cascade_filter(ids, x).samples, x.samples);

  std::vector<double> impulse(32, 0.0);
  impulse[0] = 1.0;
  const std::vector<BiquadCoeffs> poles{one_pole(0.5), one_pole(0.5)};
  const auto y = cascade_filter(poles, AudioClip{impulse, 1.0});
  for (std::size_t n = 0; n < y.size(); ++n) EXPECT_NEAR(y.samples[n], (n + 1.0) * std::pow(0.5, n), 1e-15);

  const std::vector<BiquadCoeffs> delays{unit_delay(), unit_delay()};
  EXPECT_EQ(cascade_filter(delays, AudioClip{{1, 0, 0, 0}, 1.0}).samples, (std::vector<double>{0, 0, 1, 0}));
}

TEST(StabilityPropertyTest, ImpulseResponseEnergyConverges) {
  std::mt19937_64 rng(5);
  const std::size_t n = 1024;
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_stable(rng, 0.99);
    ASSERT_TRUE(stable(c));
    std::vector<double> x(10 * n, 0.0);
    x[0] = 1.0;
    biquad_filter_inplace(c, x);
    double total = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      total += x[i] * x[i];
      if (i >= 9 * n) tail += x[i] * x[i];
    }
    EXPECT_LT(std::sqrt(tail / n), 1e-6 * std::sqrt(total));
  }
}

TEST(DualityPropertyTest, FrequencySamplingMatchesRecursion) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const std::size_t len = 2048, n = 4096;
  const FrequencyGrid grid(n);
  const auto& fft = RealFft::get(n);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BiquadCoeffs> sections;
    for (int k = 0; k < 4; ++k) sections.push_back(random_stable(rng, 0.99));
    std::vector<double> x(len);
    for (auto& v : x) v = g(rng);
    std::vector<double> padded(n, 0.0);
    std::copy(x.begin(), x.end(), padded.begin());
    auto spec = fft.forward(padded);
    const auto h = cascade_response(sections, grid);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= h[k];
    const auto freq = fft.inverse(spec);
    const auto time = cascade_filter(sections, AudioClip{x, 1.0}).samples;
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      err += (freq[i] - time[i]) * (freq[i] - time[i]);
      ref += time[i] * time[i];
    }
    EXPECT_LT(std::sqrt(err / ref), 1e-4) << "trial " << trial;
  }
}

TEST(RbjDesignTest, ZeroGainIsUnity) {
  const FrequencyGrid grid(1024);
  for (auto kind : {RbjKind::Peaking, RbjKind::LowShelf, RbjKind::HighShelf})
    for (double f : {30.0, 1000.0, 15000.0})
      for (double q : {0.1, 0.707, 1.0}) {
        const auto c = rbj_design<double>(kind, f, 0.0, q, 44100.0);
        for (const auto& v : biquad_response(c, grid)) EXPECT_NEAR(std::abs(v), 1.0, 1e-9);
      }
}

TEST(RbjDesignTest, PeakingCenterGain) {
  const auto c = rbj_design<double>(RbjKind::Peaking, 1000.0, 6.0206, 1.0, 44100.0);
  const double w = 2.0 * kPi * 1000.0 / 44100.0;
  // 10^(6.0206 / 20) = 2.0000 to five digits.
  EXPECT_NEAR(std::abs(evaluate_response(c, w)), std::pow(10.0, 6.0206 / 20.0), 1e-6);
  EXPECT_NEAR(std::abs(evaluate_response(c, w)), 2.0, 1e-4);
}

TEST(RbjDesignTest, ShelfDcAndNyquistGains) {
  const auto low = rbj_design<double>(RbjKind::LowShelf, 100.0, -12.0, 1.0, 44100.0);
  EXPECT_NEAR(std::abs(evaluate_response(low, 0.0)), std::pow(10.0, -12.0 / 20.0), 1e-12);
  EXPECT_NEAR(std::abs(evaluate_response(low, 0.0)), 0.2512, 1e-4);
  EXPECT_NEAR(std::abs(evaluate_response(low, kPi)), 1.0, 1e-9);

  const auto high = rbj_design<double>(RbjKind::HighShelf, 3000.0, 9.0, 0.7, 44100.0);
  EXPECT_NEAR(std::abs(evaluate_response(high, kPi)), std::pow(10.0, 9.0 / 20.0), 1e-12);
  EXPECT_NEAR(std::abs(evaluate_response(high, 0.0)), 1.0, 1e-12);
}

TEST(RbjDesignTest, FrequencyOutsideOpenBandThrows) {
  EXPECT_THROW(rbj_design<double>(RbjKind::Peaking, 0.0, 3.0, 1.0, 44100.0), DomainError);
  EXPECT_THROW(rbj_design<double>(RbjKind::Peaking, 22050.0, 3.0, 1.0, 44100.0), DomainError);
  EXPECT_THROW(rbj_design<double>(RbjKind::LowShelf, -5.0, 3.0, 1.0, 44100.0), DomainError);
}

TEST(FractionalDelayTest, Examples) {
  const AudioClip x{{1.0, 0.0, 0.0, 0.0}, 1.0};
  EXPECT_EQ(fractional_delay_filter(0.0, x).samples, x.samples);
  EXPECT_EQ(fractional_delay_filter(0.5, AudioClip{{1.0, 0.0, 0.0}, 1.0}).samples,
            (std::vector<double>{0.5, 0.5, 0.0}));
  EXPECT_EQ(fractional_delay_filter(2.0, x).samples, (std::vector<double>{0.0, 0.0, 1.0, 0.0}));
  EXPECT_THROW(fractional_delay_filter(-0.1, x), DomainError);
  EXPECT_THROW(fractional_delay_filter(kMaxDelaySamples + 0.5, x), DomainError);
}

TEST(FractionalDelayTest, TapsSumToExactlyOne) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.0, kMaxDelaySamples);
  for (int i = 0; i < 100000; ++i) {
    const auto taps = delay_taps(d(rng));
    ASSERT_EQ(taps.first() + taps.second(), 1.0);
  }
}

TEST(GainTest, DbToLinear) {
  EXPECT_EQ(db_to_linear(0.0), 1.0);
  EXPECT_DOUBLE_EQ(db_to_linear(20.0), 10.0);
  EXPECT_NEAR(db_to_linear(-6.0206), 0.5, 1e-5);
  EXPECT_NEAR(db_to_linear(-20.0 * std::log10(2.0)), 0.5, 1e-15);
}

TEST(GainTest, TanhNonlinearity) {
  const auto y = tanh_nl(AudioClip{{0.0, 50.0, 0.5}, 1.0});
  EXPECT_EQ(y.samples[0], 0.0);
  EXPECT_NEAR(y.samples[1], 1.0, 1e-15);
  EXPECT_NEAR(y.samples[2], 0.4621, 1e-4);
}

}  // namespace
}  // namespace dbq
