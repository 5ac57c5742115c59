#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "libiq/errors.hpp"
#include "libiq/fft.hpp"

namespace libiq {

using Complex = std::complex<float>;

/// One spectrum-sensing snapshot: frequency-domain I/Q bins as delivered by
/// the capture source. Default capture length is 1536 samples.
struct IQVector {
  std::vector<Complex> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  Complex& operator[](std::size_t i) { return samples[i]; }
  const Complex& operator[](std::size_t i) const { return samples[i]; }
};

/// K consecutive IQVectors forming one classification input.
struct TimeSeries {
  std::vector<IQVector> vectors;

  std::size_t window() const { return vectors.size(); }

  /// Concatenated samples in time order. Throws if vector lengths differ.
  std::vector<Complex> flatten() const {
    std::vector<Complex> out;
    if (vectors.empty()) return out;
    const std::size_t len = vectors.front().size();
    out.reserve(len * vectors.size());
    for (const auto& v : vectors) {
      if (v.size() != len)
        throw InvalidArgument("TimeSeries: vectors of unequal length");
      out.insert(out.end(), v.samples.begin(), v.samples.end());
    }
    return out;
  }
};

/// DFT of one IQVector. bin_resolution is band_width/length when the band
/// width is known, 0 otherwise.
struct Spectrum {
  std::vector<std::complex<double>> bins;
  double bin_resolution = 0.0;
};

/// Periodogram power spectral density, power per Hz.
struct PsdVector {
  std::vector<double> values;
  double sample_rate = 0.0;
};

enum class Component { real, imag, magnitude, phase };

namespace detail {

constexpr std::size_t kBytesPerSample = 2 * sizeof(float);  // interleaved I/Q

inline float load_f32le(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          static_cast<std::uint32_t>(p[1]) << 8 |
                          static_cast<std::uint32_t>(p[2]) << 16 |
                          static_cast<std::uint32_t>(p[3]) << 24;
  return std::bit_cast<float>(u);
}

inline void store_f32le(float v, unsigned char* p) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  p[0] = static_cast<unsigned char>(u & 0xff);
  p[1] = static_cast<unsigned char>((u >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((u >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

inline float phase_of(Complex s) {
  if (s.real() == 0.0f && s.imag() == 0.0f) return 0.0f;
  float p = std::atan2(s.imag(), s.real());
  // atan2 lands in [-pi, pi]; fold the branch cut so the range is (-pi, pi].
  if (p == -std::numbers::pi_v<float>) p = std::numbers::pi_v<float>;
  return p;
}

}  // namespace detail

/// Parse a raw binary capture: interleaved real-then-imag float32 LE, no
/// header, vector_len complex samples per vector.
inline std::vector<IQVector> parse_bin(const std::filesystem::path& path,
                                       std::size_t vector_len) {
  if (vector_len == 0) throw InvalidArgument("parse_bin: vector_len == 0");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("parse_bin: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("parse_bin: read failure on " + path.string());

  const std::size_t record = vector_len * detail::kBytesPerSample;
  if (bytes.size() % record != 0)
    throw FormatError("parse_bin: " + path.string() + " size " +
                      std::to_string(bytes.size()) +
                      " is not a multiple of the vector record size " +
                      std::to_string(record) + " (partial trailing record)");

  std::vector<IQVector> out(bytes.size() / record);
  const unsigned char* p = bytes.data();
  for (auto& vec : out) {
    vec.samples.resize(vector_len);
    for (auto& s : vec.samples) {
      const float re = detail::load_f32le(p);
      const float im = detail::load_f32le(p + 4);
      p += detail::kBytesPerSample;
      if (!std::isfinite(re) || !std::isfinite(im))
        throw DataError("parse_bin: non-finite sample in " + path.string());
      s = Complex(re, im);
    }
  }
  return out;
}

/// Write vectors in the binary capture format. Lossless round trip with
/// parse_bin (bitwise on the float32 payload).
inline void write_bin(const std::filesystem::path& path,
                      const std::vector<IQVector>& vectors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("write_bin: cannot open " + path.string());
  std::vector<unsigned char> buf;
  for (const auto& vec : vectors) {
    buf.resize(vec.size() * detail::kBytesPerSample);
    unsigned char* p = buf.data();
    for (const auto& s : vec.samples) {
      detail::store_f32le(s.real(), p);
      detail::store_f32le(s.imag(), p + 4);
      p += detail::kBytesPerSample;
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write_bin: write failure on " + path.string());
}

/// Parse the CSV capture schema: header `vector,idx,i,q`, one row per complex
/// sample, `vector` grouping rows into IQVectors in order.
inline std::vector<IQVector> parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("parse_csv: cannot open " + path.string());

  auto fail = [&](std::size_t line, const std::string& what) -> FormatError {
    return FormatError("parse_csv: " + path.string() + ":" +
                       std::to_string(line) + ": " + what);
  };

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) return {};
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "vector,idx,i,q")
    throw fail(lineno, "bad header, expected 'vector,idx,i,q'");

  std::vector<IQVector> out;
  long long current_vec = -1;
  std::size_t expect_idx = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view rest(line);
    std::string_view fields[4];
    for (int f = 0; f < 4; ++f) {
      const std::size_t comma = rest.find(',');
      if (f < 3) {
        if (comma == std::string_view::npos)
          throw fail(lineno, "expected 4 fields");
        fields[f] = rest.substr(0, comma);
        rest.remove_prefix(comma + 1);
      } else {
        if (comma != std::string_view::npos)
          throw fail(lineno, "expected 4 fields");
        fields[f] = rest;
      }
    }

    auto parse_u64 = [&](std::string_view sv, const char* name) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
      if (ec != std::errc() || ptr != sv.data() + sv.size())
        throw fail(lineno, std::string("non-numeric '") + name + "' field");
      return v;
    };
    auto parse_f32 = [&](std::string_view sv, const char* name) {
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
      if (ec != std::errc() || ptr != sv.data() + sv.size())
        throw fail(lineno, std::string("non-numeric '") + name + "' field");
      return v;
    };

    const std::uint64_t vec_idx = parse_u64(fields[0], "vector");
    const std::uint64_t idx = parse_u64(fields[1], "idx");
    const float re = parse_f32(fields[2], "i");
    const float im = parse_f32(fields[3], "q");
    if (!std::isfinite(re) || !std::isfinite(im))
      throw DataError("parse_csv: " + path.string() + ":" +
                      std::to_string(lineno) + ": non-finite sample");

    if (static_cast<long long>(vec_idx) != current_vec) {
      if (current_vec >= 0 && vec_idx <= static_cast<std::uint64_t>(current_vec))
        throw fail(lineno, "vector index not increasing");
      current_vec = static_cast<long long>(vec_idx);
      expect_idx = 0;
      out.emplace_back();
    }
    if (idx != expect_idx)
      throw fail(lineno, "sample idx " + std::to_string(idx) +
                             ", expected " + std::to_string(expect_idx));
    ++expect_idx;
    out.back().samples.emplace_back(re, im);
  }
  if (in.bad()) throw IoError("parse_csv: read failure on " + path.string());
  return out;
}

/// Write vectors in the CSV capture schema. Floats are printed with 9
/// significant digits so float32 values round-trip exactly.
inline void write_csv(const std::filesystem::path& path,
                      const std::vector<IQVector>& vectors) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_csv: cannot open " + path.string());
  out << "vector,idx,i,q\n";
  char buf[64];
  for (std::size_t v = 0; v < vectors.size(); ++v) {
    for (std::size_t i = 0; i < vectors[v].size(); ++i) {
      const Complex s = vectors[v][i];
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9g,%.9g", v, i,
                    static_cast<double>(s.real()),
                    static_cast<double>(s.imag()));
      out << buf << '\n';
    }
  }
  if (!out) throw IoError("write_csv: write failure on " + path.string());
}

/// Elementwise component extraction. Phase is atan2(Im, Re) in (-pi, pi],
/// with the phase of a zero sample defined as 0.
inline std::vector<float> extract_component(const IQVector& v, Component which) {
  if (v.empty()) throw InvalidArgument("extract_component: empty vector");
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Complex s = v[i];
    switch (which) {
      case Component::real: out[i] = s.real(); break;
      case Component::imag: out[i] = s.imag(); break;
      case Component::magnitude: out[i] = std::abs(s); break;
      case Component::phase: out[i] = detail::phase_of(s); break;
    }
  }
  return out;
}

/// Forward DFT of one vector. Pass the sensed band width to get a bin
/// resolution in Hz; otherwise bin_resolution stays 0.
inline Spectrum fft(const IQVector& v, double band_width_hz = 0.0) {
  if (v.empty()) throw InvalidArgument("fft: empty vector");
  std::vector<std::complex<double>> x(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    x[i] = std::complex<double>(v[i].real(), v[i].imag());
  Spectrum s;
  s.bins = dft_forward(x);
  if (band_width_hz > 0.0)
    s.bin_resolution = band_width_hz / static_cast<double>(v.size());
  return s;
}

/// Periodogram PSD: values[k] = |X[k]|^2 / (N * sample_rate).
inline PsdVector psd(const IQVector& v, double sample_rate) {
  if (sample_rate <= 0.0)
    throw InvalidArgument("psd: sample_rate must be positive");
  const Spectrum s = fft(v);
  PsdVector p;
  p.sample_rate = sample_rate;
  p.values.resize(s.bins.size());
  const double scale = 1.0 / (static_cast<double>(v.size()) * sample_rate);
  for (std::size_t k = 0; k < s.bins.size(); ++k)
    p.values[k] = std::norm(s.bins[k]) * scale;
  return p;
}

}  // namespace libiq
