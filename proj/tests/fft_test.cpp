#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "libiq/fft.hpp"

namespace {

using Cd = std::complex<double>;

// Brute-force DFT straight from the definition, used as the reference for
// the fast path.
std::vector<Cd> naive_dft(const std::vector<Cd>& x) {
  const std::size_t n = x.size();
  std::vector<Cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Cd acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = -2.0 * std::numbers::pi * double(k) * double(j) / double(n);
      acc += x[j] * Cd(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

double peak_rel_error(const std::vector<Cd>& got, const std::vector<Cd>& want) {
  double max_err = 0.0, max_mag = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    max_err = std::max(max_err, std::abs(got[i] - want[i]));
    max_mag = std::max(max_mag, std::abs(want[i]));
  }
  return max_mag > 0.0 ? max_err / max_mag : max_err;
}

std::vector<Cd> random_signal(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<Cd> x(n);
  for (auto& v : x) v = Cd(dist(rng), dist(rng));
  return x;
}

TEST(Fft, ImpulseHasFlatSpectrum) {
  const std::vector<Cd> x = {1.0, 0.0, 0.0, 0.0};
  const auto X = libiq::dft_forward(x);
  ASSERT_EQ(X.size(), 4u);
  for (const auto& b : X) {
    EXPECT_NEAR(b.real(), 1.0, 1e-12);
    EXPECT_NEAR(b.imag(), 0.0, 1e-12);
  }
}

TEST(Fft, ConstantIsDcOnly) {
  const std::vector<Cd> x = {1.0, 1.0, 1.0, 1.0};
  const auto X = libiq::dft_forward(x);
  EXPECT_NEAR(X[0].real(), 4.0, 1e-12);
  EXPECT_NEAR(X[0].imag(), 0.0, 1e-12);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_NEAR(std::abs(X[k]), 0.0, 1e-12);
}

// Reference bins computed with an independent DFT implementation for the
// fixed input {1+2i, -0.5+0.25i, 3-1i, 0, -2-2i, 0.5+1.5i}.
TEST(Fft, MatchesFrozenReferenceLength6) {
  const std::vector<Cd> x = {{1.0, 2.0}, {-0.5, 0.25}, {3.0, -1.0},
                             {0.0, 0.0}, {-2.0, -2.0}, {0.5, 1.5}};
  const std::vector<Cd> want = {
      {2, 0.75},
      {0.28349364905389063, 0.91089838486224561},
      {-1.4485571585149868, 7.821152422706632},
      {1.9999999999999996, -2.7499999999999996},
      {2.448557158514987, -2.571152422706632},
      {0.71650635094610982, 7.8391016151377535},
  };
  const auto X = libiq::dft_forward(x);
  ASSERT_EQ(X.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    EXPECT_NEAR(X[k].real(), want[k].real(), 1e-9) << "bin " << k;
    EXPECT_NEAR(X[k].imag(), want[k].imag(), 1e-9) << "bin " << k;
  }
}

TEST(Fft, PureToneLandsInOneBin) {
  const std::size_t n = 16, f = 3;
  std::vector<Cd> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ang = 2.0 * std::numbers::pi * double(f) * double(i) / double(n);
    x[i] = Cd(std::cos(ang), std::sin(ang));
  }
  const auto X = libiq::dft_forward(x);
  EXPECT_NEAR(X[f].real(), 16.0, 1e-10);
  EXPECT_NEAR(X[f].imag(), 0.0, 1e-10);
  for (std::size_t k = 0; k < n; ++k)
    if (k != f) EXPECT_LT(std::abs(X[k]), 1e-10) << "bin " << k;
}

TEST(Fft, MatchesNaiveDftAtCaptureLength) {
  const auto x = random_signal(1536, 42);
  const auto fast = libiq::dft_forward(x);
  const auto slow = naive_dft(x);
  EXPECT_LT(peak_rel_error(fast, slow), 1e-4);
  EXPECT_LT(peak_rel_error(fast, slow), 1e-10);
}

TEST(Fft, MatchesNaiveDftOnPrimeLengths) {
  for (std::size_t n : {7u, 13u, 31u}) {
    const auto x = random_signal(n, 100 + unsigned(n));
    EXPECT_LT(peak_rel_error(libiq::dft_forward(x), naive_dft(x)), 1e-10)
        << "n=" << n;
  }
}

TEST(Fft, MatchesNaiveDftOnMixedLengths) {
  for (std::size_t n : {1u, 2u, 3u, 6u, 12u, 45u, 96u, 100u, 360u}) {
    const auto x = random_signal(n, 200 + unsigned(n));
    EXPECT_LT(peak_rel_error(libiq::dft_forward(x), naive_dft(x)), 1e-10)
        << "n=" << n;
  }
}

TEST(Fft, InverseRecoversInput) {
  const auto x = random_signal(1536, 9);
  const auto back = libiq::dft_inverse(libiq::dft_forward(x));
  ASSERT_EQ(back.size(), x.size());
  double max_err = 0.0, max_mag = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    max_err = std::max(max_err, std::abs(back[i] - x[i]));
    max_mag = std::max(max_mag, std::abs(x[i]));
  }
  EXPECT_LT(max_err / max_mag, 1e-4);
  EXPECT_LT(max_err / max_mag, 1e-12);
}

TEST(Fft, LinearityHolds) {
  const auto a = random_signal(96, 1);
  const auto b = random_signal(96, 2);
  const Cd alpha(1.5, -0.75);
  std::vector<Cd> mix(96);
  for (std::size_t i = 0; i < 96; ++i) mix[i] = alpha * a[i] + b[i];
  const auto Xa = libiq::dft_forward(a);
  const auto Xb = libiq::dft_forward(b);
  const auto Xm = libiq::dft_forward(mix);
  for (std::size_t k = 0; k < 96; ++k)
    EXPECT_LT(std::abs(Xm[k] - (alpha * Xa[k] + Xb[k])), 1e-10);
}

TEST(Fft, EmptyInputThrows) {
  EXPECT_THROW(libiq::dft_forward({}), libiq::InvalidArgument);
  EXPECT_THROW(libiq::dft_inverse({}), libiq::InvalidArgument);
}

}  // namespace
