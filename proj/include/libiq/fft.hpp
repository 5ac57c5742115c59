#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "libiq/errors.hpp"

namespace libiq {
namespace detail {

/// Mixed-radix Cooley-Tukey DFT. Handles any length whose prime factors are
/// small (1536 = 2^9 * 3 is the common capture size); genuinely prime lengths
/// fall back to the O(N^2) definition.
class FftPlan {
 public:
  using cd = std::complex<double>;

  explicit FftPlan(std::size_t n) : n_(n), roots_(n) {
    const double step = -2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = step * static_cast<double>(j);
      roots_[j] = cd(std::cos(a), std::sin(a));
    }
  }

  std::size_t size() const { return n_; }

  /// Forward transform, unnormalized: X[k] = sum_n x[n] * exp(-2*pi*i*k*n/N).
  void forward(const cd* in, cd* out) const {
    std::vector<cd> scratch(n_);
    transform(in, out, scratch.data(), n_, 1, 1);
  }

 private:
  // w_N^(j*mult), reduced modulo N.
  cd root(std::size_t j, std::size_t mult) const {
    return roots_[(j * mult) % n_];
  }

  static std::size_t smallest_factor(std::size_t n) {
    for (std::size_t p = 2; p * p <= n; ++p)
      if (n % p == 0) return p;
    return n;
  }

  // `len` is the sub-transform size, `stride` the input decimation step, and
  // `mult = n_/len` scales indices into the top-level root table. `scratch`
  // mirrors `out` so each recursion level can combine without aliasing.
  void transform(const cd* in, cd* out, cd* scratch, std::size_t len,
                 std::size_t stride, std::size_t mult) const {
    if (len == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t p = smallest_factor(len);
    const std::size_t m = len / p;
    if (p == len) {
      naive(in, out, len, stride, mult);
      return;
    }
    for (std::size_t r = 0; r < p; ++r)
      transform(in + r * stride, out + r * m, scratch + r * m, m, stride * p,
                mult * p);
    for (std::size_t j = 0; j < len; ++j) scratch[j] = out[j];
    // X[q + t*m] = sum_r scratch[r*m + q] * w_len^(r*q) * w_p^(r*t)
    for (std::size_t q = 0; q < m; ++q) {
      for (std::size_t t = 0; t < p; ++t) {
        cd acc(0.0, 0.0);
        for (std::size_t r = 0; r < p; ++r) {
          const cd tw = root(r * q, mult) * root(r * t * m, mult);
          acc += scratch[r * m + q] * tw;
        }
        out[q + t * m] = acc;
      }
    }
  }

  void naive(const cd* in, cd* out, std::size_t len, std::size_t stride,
             std::size_t mult) const {
    for (std::size_t k = 0; k < len; ++k) {
      cd acc(0.0, 0.0);
      for (std::size_t j = 0; j < len; ++j)
        acc += in[j * stride] * root(k * j, mult);
      out[k] = acc;
    }
  }

  std::size_t n_;
  std::vector<cd> roots_;
};

}  // namespace detail

/// Forward DFT, unnormalized forward convention.
inline std::vector<std::complex<double>> dft_forward(
    const std::vector<std::complex<double>>& x) {
  if (x.empty()) throw InvalidArgument("dft_forward: empty input");
  detail::FftPlan plan(x.size());
  std::vector<std::complex<double>> out(x.size());
  plan.forward(x.data(), out.data());
  return out;
}

/// Inverse DFT with 1/N normalization; dft_inverse(dft_forward(x)) == x.
inline std::vector<std::complex<double>> dft_inverse(
    const std::vector<std::complex<double>>& x) {
  if (x.empty()) throw InvalidArgument("dft_inverse: empty input");
  std::vector<std::complex<double>> tmp(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = std::conj(x[i]);
  tmp = dft_forward(tmp);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (auto& v : tmp) v = std::conj(v) * inv_n;
  return tmp;
}

}  // namespace libiq
