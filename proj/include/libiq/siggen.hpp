#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "libiq/analyzer.hpp"
#include "libiq/errors.hpp"
#include "libiq/preprocessor.hpp"

namespace libiq {

/// One synthesis scene: a signal class dropped onto a noise floor at a
/// chosen spectral position. snr_db sets the total in-band signal energy to
/// signal_bw_bins * 10^(snr_db/10) * noise_power, so every class radiates
/// the same power at the same SNR regardless of how its signature spreads.
struct SceneConfig {
  Label label = Label::NoRFI;
  std::size_t vector_len = 1536;
  std::size_t center_bin = 768;
  std::size_t signal_bw_bins = 38;  // roughly 1 MHz at 40 MHz / 1536 bins
  double snr_db = 20.0;
  double noise_floor_db = 0.0;
  std::uint64_t seed = 0;
  std::size_t vectors = 100;
};

/// Bin positions of the four standard transmit offsets (-15, -5, +5, +15
/// MHz) inside a band_width_hz window of vector_len bins.
inline std::vector<std::size_t> default_center_bins(
    std::size_t vector_len = 1536, double band_width_hz = 40e6) {
  if (vector_len == 0 || band_width_hz <= 0.0)
    throw InvalidArgument("default_center_bins: bad window parameters");
  const double bin_hz = band_width_hz / double(vector_len);
  std::vector<std::size_t> bins;
  for (const double offset_hz : {-15e6, -5e6, 5e6, 15e6}) {
    const double bin = double(vector_len) / 2.0 + offset_hz / bin_hz;
    bins.push_back(std::size_t(std::llround(bin)));
  }
  return bins;
}

namespace detail {

/// Spectral signature of a class: bin offsets from the center with relative
/// amplitudes. LTE additionally randomizes each tap's phase per vector.
struct Signature {
  std::vector<std::pair<std::ptrdiff_t, double>> taps;
  bool random_phase = false;
};

inline Signature class_signature(Label label, std::size_t bw) {
  Signature s;
  const std::ptrdiff_t half = std::ptrdiff_t(bw) / 2;
  switch (label) {
    case Label::Radar:
      s.taps = {{-1, 0.25}, {0, 1.0}, {1, 0.25}};
      break;
    case Label::Square:
    case Label::Triangular: {
      const double power = label == Label::Square ? 1.0 : 2.0;
      for (std::ptrdiff_t n = 1; n == 1 || n <= half; n += 2) {
        const double amp = 1.0 / std::pow(double(n), power);
        s.taps.push_back({-n, amp});
        s.taps.push_back({n, amp});
      }
      break;
    }
    case Label::Jammer: {
      for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(bw); ++j)
        s.taps.push_back({j - half, 1.0});
      break;
    }
    case Label::LTE: {
      // Flat top with a short half-cosine ramp at each edge.
      const std::ptrdiff_t edge =
          std::min<std::ptrdiff_t>(3, std::ptrdiff_t(bw) / 2);
      for (std::ptrdiff_t j = 0; j < std::ptrdiff_t(bw); ++j) {
        const std::ptrdiff_t from_lo = j;
        const std::ptrdiff_t from_hi = std::ptrdiff_t(bw) - 1 - j;
        const std::ptrdiff_t d = std::min(from_lo, from_hi);
        double amp = 1.0;
        if (d < edge)
          amp = std::sin(std::numbers::pi * double(d + 1) /
                         (2.0 * double(edge + 1)));
        s.taps.push_back({j - half, amp});
      }
      s.random_phase = true;
      break;
    }
    case Label::NoRFI:
      break;
  }
  return s;
}

}  // namespace detail

/// Synthesizes cfg.vectors frequency-domain snapshots: complex Gaussian
/// noise at the floor plus the class signature. Deterministic given cfg.
inline std::vector<IQVector> generate(const SceneConfig& cfg) {
  if (cfg.vector_len == 0)
    throw InvalidArgument("generate: vector_len must be positive");
  if (cfg.vectors == 0)
    throw InvalidArgument("generate: vectors must be positive");
  if (cfg.center_bin >= cfg.vector_len)
    throw InvalidArgument("generate: center_bin " +
                          std::to_string(cfg.center_bin) +
                          " outside vector of length " +
                          std::to_string(cfg.vector_len));
  if (cfg.signal_bw_bins == 0)
    throw InvalidArgument("generate: signal_bw_bins must be at least 1");

  const auto sig = detail::class_signature(cfg.label, cfg.signal_bw_bins);
  for (const auto& [off, amp] : sig.taps) {
    const std::ptrdiff_t bin = std::ptrdiff_t(cfg.center_bin) + off;
    if (bin < 0 || bin >= std::ptrdiff_t(cfg.vector_len))
      throw InvalidArgument(
          "generate: signature bin " + std::to_string(bin) +
          " falls outside [0, " + std::to_string(cfg.vector_len) + ")");
  }

  const double noise_power = std::pow(10.0, cfg.noise_floor_db / 10.0);
  double rel_energy = 0.0;
  for (const auto& [off, amp] : sig.taps) rel_energy += amp * amp;
  const double scale =
      sig.taps.empty()
          ? 0.0
          : std::sqrt(double(cfg.signal_bw_bins) *
                      std::pow(10.0, cfg.snr_db / 10.0) * noise_power /
                      rel_energy);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(noise_power / 2.0));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  std::vector<IQVector> out(cfg.vectors);
  for (auto& vec : out) {
    vec.samples.resize(cfg.vector_len);
    for (auto& s : vec.samples)
      s = Complex(float(noise(rng)), float(noise(rng)));
    for (const auto& [off, amp] : sig.taps) {
      const std::size_t bin = std::size_t(std::ptrdiff_t(cfg.center_bin) + off);
      const double ph = sig.random_phase ? phase(rng) : 0.0;
      const double a = scale * amp;
      vec.samples[bin] += Complex(float(a * std::cos(ph)),
                                  float(a * std::sin(ph)));
    }
  }
  return out;
}

/// A full labeled corpus: one capture file per (class, center bin, index)
/// cell, named `<label>_<bin>_<idx>.bin`, plus manifest.json in out_dir.
struct CorpusParams {
  std::vector<std::size_t> bins = default_center_bins();
  std::size_t per_cell = 1;
  std::size_t vectors_per_file = 100;
  std::size_t vector_len = 1536;
  std::size_t signal_bw_bins = 38;
  double snr_db = 20.0;
  double noise_floor_db = 0.0;
  std::uint64_t seed = 0;
};

inline nlohmann::json generate_corpus(const CorpusParams& params,
                                      const std::filesystem::path& out_dir) {
  if (params.bins.empty())
    throw InvalidArgument("generate_corpus: need at least one center bin");
  if (params.per_cell == 0)
    throw InvalidArgument("generate_corpus: per_cell must be positive");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("generate_corpus: cannot create " + out_dir.string() +
                  ": " + ec.message());

  nlohmann::json manifest;
  manifest["vector_len"] = params.vector_len;
  manifest["vectors_per_file"] = params.vectors_per_file;
  manifest["signal_bw_bins"] = params.signal_bw_bins;
  manifest["snr_db"] = params.snr_db;
  manifest["noise_floor_db"] = params.noise_floor_db;
  auto& files = manifest["files"] = nlohmann::json::array();

  for (std::size_t code = 0; code < kNumClasses; ++code) {
    const Label label = Label(code);
    for (std::size_t bi = 0; bi < params.bins.size(); ++bi) {
      for (std::size_t idx = 0; idx < params.per_cell; ++idx) {
        SceneConfig cfg;
        cfg.label = label;
        cfg.vector_len = params.vector_len;
        cfg.center_bin = params.bins[bi];
        cfg.signal_bw_bins = params.signal_bw_bins;
        cfg.snr_db = params.snr_db;
        cfg.noise_floor_db = params.noise_floor_db;
        cfg.vectors = params.vectors_per_file;
        const std::size_t cell =
            (code * params.bins.size() + bi) * params.per_cell + idx;
        cfg.seed = params.seed + cell + 1;

        const std::string name = std::string(label_name(label)) + "_" +
                                 std::to_string(params.bins[bi]) + "_" +
                                 std::to_string(idx) + ".bin";
        write_bin(out_dir / name, generate(cfg));
        files.push_back({{"file", name},
                         {"label", label_name(label)},
                         {"center_bin", params.bins[bi]},
                         {"seed", cfg.seed}});
      }
    }
  }

  const std::filesystem::path mpath = out_dir / "manifest.json";
  std::ofstream out(mpath, std::ios::trunc);
  if (!out) throw IoError("generate_corpus: cannot open " + mpath.string());
  out << manifest.dump(2) << '\n';
  if (!out)
    throw IoError("generate_corpus: write failure on " + mpath.string());
  return manifest;
}

}  // namespace libiq
