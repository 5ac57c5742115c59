// Reads a raw I/Q capture and reports the strongest PSD bin of each vector.
//
//   psd_peak <capture.bin> [vector_len] [sample_rate_hz]

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "libiq/analyzer.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <capture.bin> [vector_len] [sample_rate_hz]\n",
                 argv[0]);
    return 2;
  }
  const std::size_t vector_len = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1536;
  const double fs = argc > 3 ? std::strtod(argv[3], nullptr) : 40e6;

  try {
    const auto vectors = libiq::parse_bin(argv[1], vector_len);
    std::printf("vectors: %zu (len %zu, fs %.0f Hz)\n", vectors.size(),
                vector_len, fs);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const auto p = libiq::psd(vectors[i], fs);
      const auto it = std::max_element(p.values.begin(), p.values.end());
      const std::size_t bin = std::size_t(it - p.values.begin());
      std::printf("vector %4zu  peak bin %4zu  %.3e W/Hz\n", i, bin, *it);
    }
  } catch (const libiq::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
