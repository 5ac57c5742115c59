#pragma once

#include <zlib.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "libiq/analyzer.hpp"
#include "libiq/errors.hpp"
#include "libiq/fft.hpp"

namespace libiq {

enum class Scale { linear, dB };
enum class ScatterMode { components, magnitude_phase };

/// Power-over-time matrix: one row per FFT window, one column per bin.
/// Row-major storage, row 0 is the earliest window.
struct SpectrogramMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::size_t window_size = 0;
  std::size_t overlap = 0;
  Scale scale = Scale::linear;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Splits the flattened series into windows of window_size samples advancing
/// by window_size - overlap, FFTs each, and stores |X[k]|^2 per bin.
/// Trailing samples that do not fill a window are dropped. dB output is
/// 10*log10(power + 1e-12).
inline SpectrogramMatrix spectrogram(const TimeSeries& ts,
                                     std::size_t window_size,
                                     std::size_t overlap,
                                     Scale scale = Scale::dB) {
  if (window_size < 2)
    throw InvalidArgument("spectrogram: window_size must be >= 2");
  if (overlap >= window_size)
    throw InvalidArgument("spectrogram: overlap must be < window_size");
  const auto flat = ts.flatten();
  if (flat.size() < window_size)
    throw InvalidArgument("spectrogram: series shorter than one window");

  const std::size_t hop = window_size - overlap;
  SpectrogramMatrix m;
  m.window_size = window_size;
  m.overlap = overlap;
  m.scale = scale;
  m.cols = window_size;
  m.rows = (flat.size() - window_size) / hop + 1;
  m.values.resize(m.rows * m.cols);

  const detail::FftPlan plan(window_size);
  std::vector<std::complex<double>> seg(window_size), bins(window_size);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const std::size_t start = r * hop;
    for (std::size_t i = 0; i < window_size; ++i)
      seg[i] = std::complex<double>(flat[start + i].real(),
                                    flat[start + i].imag());
    plan.forward(seg.data(), bins.data());
    for (std::size_t k = 0; k < window_size; ++k) {
      const double p = std::norm(bins[k]);
      m.at(r, k) = scale == Scale::dB ? 10.0 * std::log10(p + 1e-12) : p;
    }
  }
  return m;
}

/// Rotates each row so the DC bin sits at the center column, for display.
inline SpectrogramMatrix fftshift(const SpectrogramMatrix& m) {
  SpectrogramMatrix out = m;
  const std::size_t half = m.cols / 2;
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c)
      out.at(r, c) = m.at(r, (c + half) % m.cols);
  return out;
}

/// Per-sample real pairs for scatter plots: (Re, Im) or (magnitude, phase).
inline std::vector<std::pair<float, float>> scatter_data(const IQVector& v,
                                                         ScatterMode mode) {
  if (v.empty()) throw InvalidArgument("scatter_data: empty vector");
  std::vector<std::pair<float, float>> out(v.size());
  if (mode == ScatterMode::components) {
    for (std::size_t i = 0; i < v.size(); ++i)
      out[i] = {v[i].real(), v[i].imag()};
  } else {
    for (std::size_t i = 0; i < v.size(); ++i)
      out[i] = {std::abs(v[i]), detail::phase_of(v[i])};
  }
  return out;
}

enum class RenderFormat { png, csv };

namespace detail {

inline void put_u32be(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  buf.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  buf.push_back(static_cast<unsigned char>(v & 0xff));
}

inline void png_chunk(std::vector<unsigned char>& out, const char type[4],
                      const unsigned char* data, std::size_t len) {
  put_u32be(out, static_cast<std::uint32_t>(len));
  const std::size_t type_pos = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  const auto crc = crc32(crc32(0L, Z_NULL, 0), out.data() + type_pos,
                         static_cast<uInt>(4 + len));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

// Sequential colormap, five anchors interpolated over t in [0,1].
inline std::array<unsigned char, 3> heat_color(double t) {
  static constexpr double stops[5][3] = {{68, 1, 84},
                                         {59, 82, 139},
                                         {33, 145, 140},
                                         {94, 201, 98},
                                         {253, 231, 37}};
  t = std::fmin(std::fmax(t, 0.0), 1.0) * 4.0;
  const int lo = static_cast<int>(t) >= 4 ? 3 : static_cast<int>(t);
  const double f = t - lo;
  std::array<unsigned char, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<unsigned char>(
        std::lround(stops[lo][c] + f * (stops[lo + 1][c] - stops[lo][c])));
  return rgb;
}

// Truecolor 8-bit PNG, one pixel per matrix cell, min-max normalized.
inline void write_png(const std::filesystem::path& path,
                      const SpectrogramMatrix& m) {
  double lo = m.values.front(), hi = m.values.front();
  for (double v : m.values) {
    lo = std::fmin(lo, v);
    hi = std::fmax(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;

  std::vector<unsigned char> raw;
  raw.reserve(m.rows * (1 + 3 * m.cols));
  for (std::size_t r = 0; r < m.rows; ++r) {
    raw.push_back(0);  // scanline filter: none
    for (std::size_t c = 0; c < m.cols; ++c) {
      const auto rgb = heat_color((m.at(r, c) - lo) / span);
      raw.insert(raw.end(), rgb.begin(), rgb.end());
    }
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("write_png: deflate failure");
  comp.resize(comp_len);

  std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<unsigned char> ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(m.cols));
  put_u32be(ihdr, static_cast<std::uint32_t>(m.rows));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);   // deflate
  ihdr.push_back(0);   // adaptive filtering
  ihdr.push_back(0);   // no interlace
  png_chunk(out, "IHDR", ihdr.data(), ihdr.size());
  png_chunk(out, "IDAT", comp.data(), comp.size());
  png_chunk(out, "IEND", nullptr, 0);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write_png: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write_png: write failure on " + path.string());
}

inline void write_matrix_csv(const std::filesystem::path& path,
                             const SpectrogramMatrix& m) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("render: cannot open " + path.string());
  char buf[48];
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", m.at(r, c));
      if (c) f << ',';
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw IoError("render: write failure on " + path.string());
}

}  // namespace detail

/// Writes the matrix as a one-pixel-per-cell PNG (row 0 at the top) or as
/// CSV with one matrix row per line.
inline void render(const SpectrogramMatrix& m, const std::filesystem::path& path,
                   RenderFormat format) {
  if (m.rows == 0 || m.cols == 0 || m.values.size() != m.rows * m.cols)
    throw InvalidArgument("render: empty or inconsistent matrix");
  if (format == RenderFormat::png)
    detail::write_png(path, m);
  else
    detail::write_matrix_csv(path, m);
}

}  // namespace libiq
