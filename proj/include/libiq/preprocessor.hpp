#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "libiq/analyzer.hpp"
#include "libiq/errors.hpp"

namespace libiq {

/// Signal classes, stable wire codes 0..5.
enum class Label : std::uint8_t {
  LTE = 0,
  Jammer = 1,
  NoRFI = 2,
  Square = 3,
  Triangular = 4,
  Radar = 5,
};

inline constexpr std::size_t kNumClasses = 6;
inline constexpr std::array<const char*, kNumClasses> kLabelNames = {
    "LTE", "Jammer", "NoRFI", "Square", "Triangular", "Radar"};

inline const char* label_name(Label l) {
  const auto i = static_cast<std::size_t>(l);
  if (i >= kNumClasses) throw InvalidArgument("label_name: bad label code");
  return kLabelNames[i];
}

inline Label label_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (name == kLabelNames[i]) return static_cast<Label>(i);
  throw InvalidArgument("label_from_name: unknown class '" + std::string(name) +
                        "'");
}

inline constexpr std::size_t kChannels = 4;  // real, imag, magnitude, phase

/// One classifier input: length samples x 4 channels, row-major.
struct FeatureTensor {
  std::vector<float> data;

  std::size_t length() const { return data.size() / kChannels; }
  float& at(std::size_t i, std::size_t c) { return data[i * kChannels + c]; }
  float at(std::size_t i, std::size_t c) const {
    return data[i * kChannels + c];
  }
};

/// Per-channel z-score statistics, computed on a training set.
struct NormStats {
  std::array<double, kChannels> mean{};
  std::array<double, kChannels> stdev{};
};

struct DatasetMeta {
  std::size_t vector_len = 0;
  std::size_t out_len = 0;        // detector output length per vector
  std::size_t series_len = 0;     // vectors per time series (K)
  std::size_t detect_window = 0;  // detector sliding-window width
  std::vector<std::string> classes{kLabelNames.begin(), kLabelNames.end()};
  bool normalized = false;
  std::optional<NormStats> stats;
};

struct LabeledDataset {
  std::vector<FeatureTensor> tensors;
  std::vector<Label> labels;
  DatasetMeta meta;

  std::size_t size() const { return tensors.size(); }
  bool empty() const { return tensors.empty(); }
};

/// Start index of the slice energy_peak_detector would return: the window of
/// detect_window samples with the highest energy (lowest start index on
/// ties) is located, its center c = start + w/2 is taken, and the slice
/// [c - out_len/2, ...) is clamped to lie inside the vector.
inline std::size_t energy_peak_start(const IQVector& v,
                                     std::size_t detect_window,
                                     std::size_t out_len) {
  const std::size_t n = v.size();
  if (detect_window == 0 || detect_window > n)
    throw InvalidArgument("energy_peak_detector: detect_window out of range");
  if (out_len == 0 || out_len > n)
    throw InvalidArgument("energy_peak_detector: out_len out of range");

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double re = v[j].real(), im = v[j].imag();
    prefix[j + 1] = prefix[j] + (re * re + im * im);
  }

  std::size_t best = 0;
  double best_e = prefix[detect_window] - prefix[0];
  for (std::size_t i = 1; i + detect_window <= n; ++i) {
    const double e = prefix[i + detect_window] - prefix[i];
    if (e > best_e) {
      best_e = e;
      best = i;
    }
  }

  const auto center = static_cast<std::ptrdiff_t>(best + detect_window / 2);
  const auto lo = center - static_cast<std::ptrdiff_t>(out_len / 2);
  const auto hi = static_cast<std::ptrdiff_t>(n - out_len);
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(lo, 0, hi));
}

/// Fixed-length cut of v around its highest-energy window.
inline IQVector energy_peak_detector(const IQVector& v,
                                     std::size_t detect_window,
                                     std::size_t out_len) {
  const std::size_t s = energy_peak_start(v, detect_window, out_len);
  IQVector out;
  out.samples.assign(v.samples.begin() + static_cast<std::ptrdiff_t>(s),
                     v.samples.begin() + static_cast<std::ptrdiff_t>(s + out_len));
  return out;
}

/// Runs the detector on each of the K vectors independently and concatenates
/// the per-sample channels [real, imag, magnitude, phase] in time order.
/// Output shape is (out_len * K, 4).
inline FeatureTensor build_features(const TimeSeries& ts,
                                    std::size_t detect_window,
                                    std::size_t out_len) {
  if (ts.vectors.empty()) throw InvalidArgument("build_features: empty series");
  FeatureTensor t;
  t.data.reserve(ts.vectors.size() * out_len * kChannels);
  for (const auto& v : ts.vectors) {
    const IQVector cut = energy_peak_detector(v, detect_window, out_len);
    for (const auto& s : cut.samples) {
      t.data.push_back(s.real());
      t.data.push_back(s.imag());
      t.data.push_back(std::abs(s));
      t.data.push_back(detail::phase_of(s));
    }
  }
  return t;
}

namespace detail {

template <typename ParseFn>
LabeledDataset create_dataset(const std::vector<std::filesystem::path>& paths,
                              const std::vector<Label>& labels, std::size_t k,
                              std::size_t detect_window, std::size_t out_len,
                              ParseFn&& parse) {
  if (paths.size() != labels.size())
    throw InvalidArgument("create_dataset: paths/labels length mismatch");
  if (k == 0) throw InvalidArgument("create_dataset: K must be >= 1");

  LabeledDataset ds;
  ds.meta.out_len = out_len;
  ds.meta.series_len = k;
  ds.meta.detect_window = detect_window;
  for (std::size_t f = 0; f < paths.size(); ++f) {
    const std::vector<IQVector> vectors = parse(paths[f]);
    if (vectors.size() < k)
      throw InvalidArgument("create_dataset: " + paths[f].string() + " has " +
                            std::to_string(vectors.size()) +
                            " vectors, need at least K=" + std::to_string(k));
    if (ds.meta.vector_len == 0) ds.meta.vector_len = vectors.front().size();
    for (const auto& v : vectors)
      if (v.size() != ds.meta.vector_len)
        throw DataError("create_dataset: vector length mismatch in " +
                        paths[f].string());

    const std::size_t groups = vectors.size() / k;
    for (std::size_t g = 0; g < groups; ++g) {
      TimeSeries ts;
      ts.vectors.assign(vectors.begin() + static_cast<std::ptrdiff_t>(g * k),
                        vectors.begin() + static_cast<std::ptrdiff_t>((g + 1) * k));
      ds.tensors.push_back(build_features(ts, detect_window, out_len));
      ds.labels.push_back(labels[f]);
    }
  }
  return ds;
}

}  // namespace detail

/// Builds a dataset from binary captures: file-local, non-overlapping groups
/// of K vectors become one tensor each; leftover vectors are dropped.
inline LabeledDataset create_dataset_from_bin(
    const std::vector<std::filesystem::path>& paths,
    const std::vector<Label>& labels, std::size_t k, std::size_t vector_len,
    std::size_t detect_window, std::size_t out_len) {
  return detail::create_dataset(
      paths, labels, k, detect_window, out_len,
      [vector_len](const std::filesystem::path& p) {
        return parse_bin(p, vector_len);
      });
}

/// CSV counterpart of create_dataset_from_bin.
inline LabeledDataset create_dataset_from_csv(
    const std::vector<std::filesystem::path>& paths,
    const std::vector<Label>& labels, std::size_t k, std::size_t detect_window,
    std::size_t out_len) {
  return detail::create_dataset(
      paths, labels, k, detect_window, out_len,
      [](const std::filesystem::path& p) { return parse_csv(p); });
}

/// Per-channel mean and population std over every sample of every tensor.
/// A zero std is reported as 1 so constant channels pass through unscaled.
inline NormStats compute_norm_stats(const LabeledDataset& ds) {
  if (ds.empty()) throw InvalidArgument("compute_norm_stats: empty dataset");
  std::array<double, kChannels> sum{}, sumsq{};
  std::size_t count = 0;
  for (const auto& t : ds.tensors) {
    const std::size_t len = t.length();
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double x = t.at(i, c);
        sum[c] += x;
        sumsq[c] += x * x;
      }
    count += len;
  }
  NormStats st;
  for (std::size_t c = 0; c < kChannels; ++c) {
    st.mean[c] = sum[c] / double(count);
    const double var = sumsq[c] / double(count) - st.mean[c] * st.mean[c];
    st.stdev[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return st;
}

/// Applies stored z-score statistics. Refuses to run twice on the same
/// dataset; double normalization silently corrupts features.
inline void apply_normalization(LabeledDataset& ds, const NormStats& st) {
  if (ds.meta.normalized)
    throw InvalidArgument("apply_normalization: dataset already normalized");
  for (auto& t : ds.tensors) {
    const std::size_t len = t.length();
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < kChannels; ++c)
        t.at(i, c) = float((t.at(i, c) - st.mean[c]) / st.stdev[c]);
  }
  ds.meta.normalized = true;
  ds.meta.stats = st;
}

/// Computes statistics from ds (a training set) and applies them in place.
inline NormStats normalize(LabeledDataset& ds) {
  const NormStats st = compute_norm_stats(ds);
  apply_normalization(ds, st);
  return st;
}

/// Deterministic stratified split: about val_fraction of each class goes to
/// the second dataset. Classes with a single tensor keep it in the first.
inline std::pair<LabeledDataset, LabeledDataset> stratified_split(
    const LabeledDataset& ds, double val_fraction, std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw InvalidArgument("stratified_split: fraction must be in [0,1)");
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> val_idx;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t take = static_cast<std::size_t>(
        std::llround(val_fraction * double(idx.size())));
    if (take >= idx.size() && !idx.empty()) take = idx.size() - 1;
    val_idx.insert(val_idx.end(), idx.begin(),
                   idx.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::vector<bool> in_val(ds.size(), false);
  for (std::size_t i : val_idx) in_val[i] = true;

  LabeledDataset train, val;
  train.meta = ds.meta;
  val.meta = ds.meta;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& dst = in_val[i] ? val : train;
    dst.tensors.push_back(ds.tensors[i]);
    dst.labels.push_back(ds.labels[i]);
  }
  return {std::move(train), std::move(val)};
}

namespace detail {

inline nlohmann::json norm_stats_to_json(const NormStats& st) {
  return {{"mean", st.mean}, {"stdev", st.stdev}};
}

inline NormStats norm_stats_from_json(const nlohmann::json& j) {
  NormStats st;
  for (std::size_t c = 0; c < kChannels; ++c) {
    st.mean[c] = j.at("mean").at(c).get<double>();
    st.stdev[c] = j.at("stdev").at(c).get<double>();
  }
  return st;
}

inline nlohmann::json meta_to_json(const DatasetMeta& m) {
  nlohmann::json j = {{"vector_len", m.vector_len},
                      {"out_len", m.out_len},
                      {"series_len", m.series_len},
                      {"detect_window", m.detect_window},
                      {"classes", m.classes},
                      {"normalized", m.normalized}};
  if (m.stats) j["stats"] = norm_stats_to_json(*m.stats);
  return j;
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  m.vector_len = j.at("vector_len").get<std::size_t>();
  m.out_len = j.at("out_len").get<std::size_t>();
  m.series_len = j.at("series_len").get<std::size_t>();
  m.detect_window = j.at("detect_window").get<std::size_t>();
  m.classes = j.at("classes").get<std::vector<std::string>>();
  m.normalized = j.at("normalized").get<bool>();
  if (j.contains("stats")) m.stats = norm_stats_from_json(j.at("stats"));
  return m;
}

inline void write_f32le_blob(const std::filesystem::path& path,
                             const std::vector<FeatureTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_dataset: cannot open " + path.string());
  std::vector<unsigned char> buf;
  for (const auto& t : tensors) {
    buf.resize(t.data.size() * 4);
    for (std::size_t i = 0; i < t.data.size(); ++i)
      store_f32le(t.data[i], buf.data() + i * 4);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("save_dataset: write failure on " + path.string());
}

}  // namespace detail

/// Writes <stem>.json (meta + shape), <stem>.tensors.f32le (flat float32 LE
/// feature blob) and <stem>.labels.u8 (one byte per tensor).
inline void save_dataset(const LabeledDataset& ds,
                         const std::filesystem::path& stem) {
  const std::size_t tensor_len = ds.empty() ? 0 : ds.tensors.front().length();
  for (const auto& t : ds.tensors)
    if (t.length() != tensor_len)
      throw InvalidArgument("save_dataset: tensors of unequal length");

  nlohmann::json j = detail::meta_to_json(ds.meta);
  j["count"] = ds.size();
  j["tensor_len"] = tensor_len;
  j["channels"] = kChannels;
  std::ofstream mf(std::filesystem::path(stem).concat(".json"),
                   std::ios::trunc);
  if (!mf) throw IoError("save_dataset: cannot open manifest for " +
                         stem.string());
  mf << j.dump(2) << '\n';
  if (!mf) throw IoError("save_dataset: manifest write failure");

  detail::write_f32le_blob(std::filesystem::path(stem).concat(".tensors.f32le"),
                           ds.tensors);

  std::ofstream lf(std::filesystem::path(stem).concat(".labels.u8"),
                   std::ios::binary | std::ios::trunc);
  if (!lf) throw IoError("save_dataset: cannot open label file");
  for (Label l : ds.labels) lf.put(static_cast<char>(l));
  if (!lf) throw IoError("save_dataset: label write failure");
}

inline LabeledDataset load_dataset(const std::filesystem::path& stem) {
  std::ifstream mf(std::filesystem::path(stem).concat(".json"));
  if (!mf) throw IoError("load_dataset: cannot open " + stem.string() +
                         ".json");
  nlohmann::json j;
  try {
    mf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_dataset: bad manifest: " + std::string(e.what()));
  }

  LabeledDataset ds;
  std::size_t count = 0, tensor_len = 0;
  try {
    ds.meta = detail::meta_from_json(j);
    count = j.at("count").get<std::size_t>();
    tensor_len = j.at("tensor_len").get<std::size_t>();
    if (j.at("channels").get<std::size_t>() != kChannels)
      throw FormatError("load_dataset: unsupported channel count");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_dataset: bad manifest: " + std::string(e.what()));
  }

  const auto blob_path = std::filesystem::path(stem).concat(".tensors.f32le");
  std::ifstream bf(blob_path, std::ios::binary);
  if (!bf) throw IoError("load_dataset: cannot open " + blob_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bf)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() != count * tensor_len * kChannels * 4)
    throw FormatError("load_dataset: tensor blob size " +
                      std::to_string(bytes.size()) + " does not match " +
                      std::to_string(count) + " tensors of length " +
                      std::to_string(tensor_len));
  ds.tensors.resize(count);
  const unsigned char* p = bytes.data();
  for (auto& t : ds.tensors) {
    t.data.resize(tensor_len * kChannels);
    for (auto& x : t.data) {
      x = detail::load_f32le(p);
      p += 4;
    }
  }

  const auto label_path = std::filesystem::path(stem).concat(".labels.u8");
  std::ifstream lf(label_path, std::ios::binary);
  if (!lf) throw IoError("load_dataset: cannot open " + label_path.string());
  std::vector<unsigned char> lb((std::istreambuf_iterator<char>(lf)),
                                std::istreambuf_iterator<char>());
  if (lb.size() != count)
    throw FormatError("load_dataset: label file has " +
                      std::to_string(lb.size()) + " entries, expected " +
                      std::to_string(count));
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (lb[i] >= kNumClasses)
      throw DataError("load_dataset: label code " + std::to_string(lb[i]) +
                      " out of range");
    ds.labels[i] = static_cast<Label>(lb[i]);
  }
  return ds;
}

}  // namespace libiq
