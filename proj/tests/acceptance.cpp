// End-to-end acceptance harness. Each numbered check prints one [PASS] or
// [FAIL] line with the measured numbers; the exit code is the number of
// failing checks. `--only 1,5,9` restricts which checks run (the training
// and streaming legs are shared and built lazily). Progress goes to stderr.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <libiq/analyzer.hpp>
#include <libiq/classifier.hpp>
#include <libiq/plotter.hpp>
#include <libiq/preprocessor.hpp>
#include <libiq/siggen.hpp>
#include <libiq/stream.hpp>

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string fmt_sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

void progress(const std::string& msg) {
  std::cerr << "[acceptance] " << msg << std::endl;
}

// ------------------------------------------------------------------------
// Shared corpus recipe: four center bins, two for training and two held
// out, so the test set sits at frequencies the model never saw.

constexpr std::size_t kVectorLen = 1536;
constexpr std::size_t kOutLen = 120;
constexpr std::size_t kDetect = 64;
constexpr std::size_t kBwBins = 38;
constexpr double kSnrDb = 20.0;
constexpr std::size_t kVectorsPerFile = 100;
constexpr std::size_t kTrainFilesPerCell = 12;
constexpr std::size_t kTestFilesPerCell = 34;
constexpr std::size_t kTrainCapPerClass = 500;
const std::vector<std::size_t> kTrainBins{576, 960};
const std::vector<std::size_t> kTestBins{192, 1344};
const std::vector<std::size_t> kWindows{1, 5, 10, 15};

libiq::LabeledDataset build_split(std::size_t k,
                                  const std::vector<std::size_t>& bins,
                                  std::size_t files_per_cell,
                                  std::uint64_t seed_base) {
  libiq::LabeledDataset ds;
  ds.meta.vector_len = kVectorLen;
  ds.meta.out_len = kOutLen;
  ds.meta.series_len = k;
  ds.meta.detect_window = kDetect;
  for (std::size_t c = 0; c < libiq::kNumClasses; ++c) {
    for (std::size_t bi = 0; bi < bins.size(); ++bi) {
      for (std::size_t f = 0; f < files_per_cell; ++f) {
        libiq::SceneConfig sc;
        sc.label = libiq::Label(c);
        sc.vector_len = kVectorLen;
        sc.center_bin = bins[bi];
        sc.signal_bw_bins = kBwBins;
        sc.snr_db = kSnrDb;
        sc.seed = seed_base + c * 1000 + bi * 100 + f;
        sc.vectors = kVectorsPerFile;
        const auto vectors = libiq::generate(sc);
        for (std::size_t g = 0; g + k <= vectors.size(); g += k) {
          libiq::TimeSeries ts;
          ts.vectors.assign(vectors.begin() + std::ptrdiff_t(g),
                            vectors.begin() + std::ptrdiff_t(g + k));
          ds.tensors.push_back(libiq::build_features(ts, kDetect, kOutLen));
          ds.labels.push_back(libiq::Label(c));
        }
      }
    }
  }
  return ds;
}

/// Balanced deterministic subsample so the low-K legs do not train on ten
/// times more series than the high-K legs.
void cap_per_class(libiq::LabeledDataset& ds, std::size_t cap) {
  std::vector<std::vector<std::size_t>> per_class(libiq::kNumClasses);
  for (std::size_t i = 0; i < ds.size(); ++i)
    per_class[std::size_t(ds.labels[i])].push_back(i);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto& idx = per_class[c];
    std::mt19937_64 rng(123 + c);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), cap));
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  libiq::LabeledDataset out;
  out.meta = ds.meta;
  for (std::size_t i : keep) {
    out.tensors.push_back(std::move(ds.tensors[i]));
    out.labels.push_back(ds.labels[i]);
  }
  ds = std::move(out);
}

struct Leg {
  libiq::TrainResult result;
  libiq::EvalReport report;
  std::size_t min_test_series = 0;
  double seconds = 0.0;
};

Leg build_leg(std::size_t k) {
  const auto t0 = Clock::now();
  progress("leg K=" + std::to_string(k) + ": building train split");
  libiq::LabeledDataset train_ds =
      build_split(k, kTrainBins, kTrainFilesPerCell, 1000000);
  cap_per_class(train_ds, kTrainCapPerClass);
  libiq::normalize(train_ds);
  auto [train, val] = libiq::stratified_split(train_ds, 0.1, 7);

  libiq::ModelConfig cfg;
  cfg.input_len = kOutLen * k;
  cfg.conv_blocks = 2;
  cfg.filters = 32;
  cfg.kernel_size = 7;
  cfg.classes = libiq::kNumClasses;
  cfg.batch_size = 32;
  cfg.epochs = 10;
  cfg.learning_rate = 1e-3;
  cfg.seed = 42;
  progress("leg K=" + std::to_string(k) + ": training on " +
           std::to_string(train.size()) + " series");
  Leg leg{libiq::cnn_train(train, val, cfg), {}, 0, 0.0};

  progress("leg K=" + std::to_string(k) + ": building test split");
  libiq::LabeledDataset test_ds =
      build_split(k, kTestBins, kTestFilesPerCell, 2000000);
  libiq::apply_normalization(test_ds, leg.result.model.norm_stats);
  std::vector<std::size_t> per_class(libiq::kNumClasses, 0);
  for (libiq::Label l : test_ds.labels) ++per_class[std::size_t(l)];
  leg.min_test_series =
      *std::min_element(per_class.begin(), per_class.end());
  progress("leg K=" + std::to_string(k) + ": scoring " +
           std::to_string(test_ds.size()) + " test series");
  leg.report = libiq::cnn_test(leg.result.model, test_ds);
  leg.seconds = seconds_since(t0);
  progress("leg K=" + std::to_string(k) + ": accuracy " +
           fmt(leg.report.accuracy) + ", macro-F1 " +
           fmt(leg.report.macro_f1) + ", " + fmt(leg.seconds, 1) + "s");
  return leg;
}

Leg& leg(std::size_t k) {
  static std::map<std::size_t, Leg> cache;
  auto it = cache.find(k);
  if (it == cache.end()) it = cache.emplace(k, build_leg(k)).first;
  return it->second;
}

struct CheckResult {
  bool pass = false;
  std::string detail;
};

// ------------------------------------------------------------ checks ----

CheckResult check_cross_frequency() {
  const Leg& l = leg(5);
  const bool pass = l.report.accuracy >= 0.95 && l.report.macro_f1 >= 0.95 &&
                    l.min_test_series >= 400 && l.seconds <= 900.0;
  return {pass, "K=5 held-out bins: accuracy " + fmt(l.report.accuracy) +
                    ", macro-F1 " + fmt(l.report.macro_f1) + " (bars 0.95), " +
                    std::to_string(l.min_test_series) +
                    " test series/class (bar 400), " + fmt(l.seconds, 1) +
                    "s (bar 900s)"};
}

CheckResult check_per_window_accuracy() {
  bool pass = true;
  std::string detail = "held-out accuracy";
  for (std::size_t k : kWindows) {
    const double acc = leg(k).report.accuracy;
    pass = pass && acc >= 0.93;
    detail += " K=" + std::to_string(k) + ": " + fmt(acc);
  }
  return {pass, detail + " (bar 0.93 each)"};
}

CheckResult check_latency() {
  std::map<std::size_t, std::vector<double>> pooled;
  constexpr int kReps = 3;
  constexpr int kRepSeconds = 60;
  for (int rep = 0; rep < kReps; ++rep) {
    for (std::size_t ki = 0; ki < kWindows.size(); ++ki) {
      const std::size_t k = kWindows[ki];
      const libiq::ModelBundle& model = leg(k).result.model;
      const std::string endpoint =
          "127.0.0.1:" + std::to_string(48520 + rep * 10 + int(ki));
      progress("latency rep " + std::to_string(rep + 1) + "/3 K=" +
               std::to_string(k) + " (" + std::to_string(kRepSeconds) +
               "s on " + endpoint + ")");

      libiq::SceneConfig sc;
      sc.label = libiq::Label::Radar;
      sc.vector_len = kVectorLen;
      sc.center_bin = 960;
      sc.signal_bw_bins = kBwBins;
      sc.snr_db = kSnrDb;
      sc.seed = 9100 + std::uint64_t(rep) * 10 + ki;
      sc.vectors = 200;
      const auto source = libiq::generate(sc);

      std::atomic<bool> stop{false};
      std::string serve_err;
      std::thread producer([&] {
        try {
          libiq::ServeOptions so;
          so.period_ms = 8.0;
          so.stop = &stop;
          so.accept_timeout_ms = 30000;
          libiq::serve(endpoint, source, so);
        } catch (const std::exception& e) {
          serve_err = e.what();
        }
      });
      std::thread timer([&] {
        std::this_thread::sleep_for(std::chrono::seconds(kRepSeconds));
        stop = true;
      });
      libiq::ClassifyStreamOptions co;
      co.connect_timeout_ms = 10000;
      co.recv_timeout_ms = 30000;
      const auto records = libiq::classify_stream(endpoint, model, k, co);
      producer.join();
      timer.join();
      if (!serve_err.empty())
        throw libiq::IoError("latency producer failed: " + serve_err);
      for (const auto& r : records) pooled[k].push_back(r.latency_ms);
    }
  }

  bool pass = true;
  std::string detail = "mean per-prediction latency";
  double prev_mean = -1.0;
  for (std::size_t k : kWindows) {
    const libiq::LatencyStats st = libiq::latency_report(pooled[k]);
    pass = pass && st.mean_ms < 10.0;
    if (prev_mean >= 0.0 && st.mean_ms > 1.2 * prev_mean) pass = false;
    prev_mean = st.mean_ms;
    detail += " K=" + std::to_string(k) + ": " + fmt(st.mean_ms, 3) + "+-" +
              fmt(st.std_ms, 3) + "ms (n=" + std::to_string(st.n) +
              ", removed " + std::to_string(st.outliers_removed) + ")";
  }
  return {pass, detail + "; bars: mean < 10ms each, non-increasing over K "
                         "within 20%"};
}

CheckResult check_update_arithmetic() {
  libiq::LabeledDataset ds;
  ds.meta.vector_len = 16;
  ds.meta.out_len = 16;
  ds.meta.series_len = 1;
  ds.meta.detect_window = 4;
  ds.meta.normalized = true;
  std::mt19937_64 rng(5);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (std::size_t i = 0; i < 17600; ++i) {
    libiq::FeatureTensor t;
    t.data.resize(16 * libiq::kChannels);
    for (float& v : t.data) v = dist(rng);
    ds.tensors.push_back(std::move(t));
    ds.labels.push_back(libiq::Label(i % libiq::kNumClasses));
  }
  libiq::ModelConfig cfg;
  cfg.input_len = 16;
  cfg.conv_blocks = 1;
  cfg.filters = 4;
  cfg.kernel_size = 3;
  cfg.classes = libiq::kNumClasses;
  cfg.batch_size = 32;
  cfg.epochs = 10;
  cfg.seed = 5;
  progress("update arithmetic: training 10 epochs on 17600 series");
  const libiq::TrainResult res =
      libiq::cnn_train(ds, libiq::LabeledDataset{}, cfg);
  const auto& h = res.history;
  const bool pass = h.updates_per_epoch == 550 && h.total_updates == 5500 &&
                    h.epochs.size() == 10;
  return {pass, "N=17600, batch 32: " + std::to_string(h.updates_per_epoch) +
                    " updates/epoch over " + std::to_string(h.epochs.size()) +
                    " epochs, " + std::to_string(h.total_updates) +
                    " total (want 550/10/5500)"};
}

CheckResult check_fft_oracle() {
  constexpr std::size_t n = 1536;
  std::vector<std::complex<double>> twiddle(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double ang = -2.0 * M_PI * double(m) / double(n);
    twiddle[m] = {std::cos(ang), std::sin(ang)};
  }
  double worst = 0.0;
  std::mt19937_64 rng(1536);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  for (int c = 0; c < 100; ++c) {
    libiq::IQVector v;
    v.samples.resize(n);
    for (auto& s : v.samples) s = {dist(rng), dist(rng)};
    const libiq::Spectrum f = libiq::fft(v);

    double case_err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t t = 0; t < n; ++t) {
        const auto& s = v.samples[t];
        acc += std::complex<double>(s.real(), s.imag()) *
               twiddle[(k * t) % n];
      }
      case_err = std::max(case_err, std::abs(f.bins[k] - acc));
      scale = std::max(scale, std::abs(acc));
    }
    worst = std::max(worst, case_err / scale);
  }
  return {worst < 1e-4, "100 random 1536-point vectors vs direct DFT: max "
                        "relative error " +
                            fmt_sci(worst) + " (bar 1e-4)"};
}

std::size_t brute_peak_start(const libiq::IQVector& v, std::size_t w,
                             std::size_t out_len) {
  const std::size_t n = v.size();
  std::size_t best = 0;
  double best_e = -1.0;
  for (std::size_t s = 0; s + w <= n; ++s) {
    double e = 0.0;
    for (std::size_t i = s; i < s + w; ++i) e += double(std::norm(v[i]));
    if (e > best_e) {
      best_e = e;
      best = s;
    }
  }
  const std::size_t center = best + w / 2;
  std::size_t start = center >= out_len / 2 ? center - out_len / 2 : 0;
  return std::min(start, n - out_len);
}

CheckResult check_detector_oracle() {
  std::mt19937_64 rng(64);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  const std::vector<std::size_t> lens{256, 777, 1536};
  const std::vector<std::size_t> windows{8, 16, 64, 128};
  const std::vector<std::size_t> out_lens{16, 120, 600};
  std::size_t mismatches = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = lens[std::size_t(rng() % lens.size())];
    std::size_t w = windows[std::size_t(rng() % windows.size())];
    std::size_t out_len = out_lens[std::size_t(rng() % out_lens.size())];
    w = std::min(w, n);
    out_len = std::min(out_len, n);
    libiq::IQVector v;
    v.samples.resize(n);
    for (auto& s : v.samples) s = {dist(rng), dist(rng)};
    if (c % 10 == 0) v.samples.front() = {1e3f, 1e3f};
    if (c % 10 == 1) v.samples.back() = {1e3f, -1e3f};
    if (c % 10 == 2) v.samples[1] = {-1e3f, 1e3f};
    if (libiq::energy_peak_start(v, w, out_len) !=
        brute_peak_start(v, w, out_len))
      ++mismatches;
  }
  return {mismatches == 0,
          "1000 random inputs with edge spikes vs exhaustive search: " +
              std::to_string(mismatches) + " slice-start mismatches"};
}

CheckResult check_gradients() {
  libiq::ModelConfig cfg;
  cfg.input_len = 12;
  cfg.conv_blocks = 2;
  cfg.filters = 3;
  cfg.kernel_size = 3;
  cfg.classes = 4;
  cfg.batch_size = 2;
  cfg.epochs = 1;
  cfg.seed = 11;
  const libiq::GradCheckReport rep = libiq::gradient_check(cfg);
  return {rep.max_rel_error < 1e-3,
          "analytic vs central differences over every parameter: max "
          "relative error " +
              fmt_sci(rep.max_rel_error) + " at " + rep.worst_param +
              " (bar 1e-3)"};
}

CheckResult check_properties() {
  std::mt19937_64 rng(8);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::string detail;

  libiq::ModelConfig cfg;
  cfg.input_len = 40;
  cfg.conv_blocks = 1;
  cfg.filters = 8;
  cfg.kernel_size = 5;
  cfg.classes = libiq::kNumClasses;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.seed = 3;
  libiq::ModelBundle bundle(cfg);
  bundle.net.init_params(3);
  std::vector<libiq::FeatureTensor> tensors(60);
  for (auto& t : tensors) {
    t.data.resize(cfg.input_len * libiq::kChannels);
    for (float& v : t.data) v = dist(rng);
  }
  double worst_sum = 0.0;
  for (const auto& row : libiq::forward(bundle, tensors)) {
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  const bool softmax_ok = worst_sum <= 1e-6;
  detail += "softmax row sum off by " + fmt_sci(worst_sum) + " (bar 1e-6)";

  bool conv_ok = true;
  libiq::detail::Net<float> net(cfg);
  net.init_params(3);
  for (std::size_t len : {std::size_t(1), std::size_t(2), std::size_t(7),
                          std::size_t(64), std::size_t(121),
                          std::size_t(600)}) {
    Eigen::MatrixXf x =
        Eigen::MatrixXf::Random(Eigen::Index(libiq::kChannels),
                                Eigen::Index(len));
    Eigen::MatrixXf y;
    net.conv_forward(net.conv_w(0),
                     libiq::detail::Net<float>::Vec(net.conv_b(0)), x, y);
    conv_ok = conv_ok && y.cols() == x.cols() &&
              y.rows() == Eigen::Index(cfg.filters);
  }
  detail += "; conv keeps time-length over 6 lengths: ";
  detail += conv_ok ? "yes" : "NO";

  bool channels_ok = true;
  double worst_mag = 0.0;
  for (int c = 0; c < 200; ++c) {
    libiq::IQVector v;
    v.samples.resize(256);
    for (auto& s : v.samples) s = {dist(rng), dist(rng)};
    libiq::TimeSeries ts;
    ts.vectors.push_back(v);
    const libiq::FeatureTensor t = libiq::build_features(ts, 16, 64);
    for (std::size_t i = 0; i < t.length(); ++i) {
      const double mag_err =
          std::abs(double(t.at(i, 2)) -
                   std::hypot(double(t.at(i, 0)), double(t.at(i, 1))));
      worst_mag = std::max(worst_mag, mag_err);
      channels_ok = channels_ok && mag_err <= 1e-5;
      const double ph = t.at(i, 3);
      channels_ok = channels_ok && ph > -M_PI - 1e-7 && ph <= M_PI + 1e-7;
    }
  }
  detail += "; magnitude channel off by " + fmt_sci(worst_mag) +
            " with phase in (-pi, pi]: " + (channels_ok ? "yes" : "NO");

  bool accounting_ok = true;
  const fs::path dir = fs::temp_directory_path() / "libiq_acceptance";
  fs::create_directories(dir);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 1 + rng() % 5;
    const std::size_t nfiles = 1 + rng() % 4;
    std::vector<fs::path> paths;
    std::vector<libiq::Label> labels;
    std::size_t expected = 0;
    for (std::size_t f = 0; f < nfiles; ++f) {
      const std::size_t count = k + rng() % (3 * k + 2);
      expected += count / k;
      std::vector<libiq::IQVector> vecs(count);
      for (auto& v : vecs) {
        v.samples.resize(64);
        for (auto& s : v.samples) s = {dist(rng), dist(rng)};
      }
      const fs::path p =
          dir / ("acct_" + std::to_string(trial) + "_" + std::to_string(f) +
                 ".bin");
      libiq::write_bin(p, vecs);
      paths.push_back(p);
      labels.push_back(libiq::Label(f % libiq::kNumClasses));
    }
    const auto ds = libiq::create_dataset_from_bin(paths, labels, k, 64, 8, 16);
    accounting_ok = accounting_ok && ds.size() == expected;
  }
  detail += "; dataset N = sum over files of floor(vectors/K) in 30 trials: ";
  detail += accounting_ok ? "yes" : "NO";

  return {softmax_ok && conv_ok && channels_ok && accounting_ok, detail};
}

CheckResult check_round_trips() {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  const fs::path dir = fs::temp_directory_path() / "libiq_acceptance";
  fs::create_directories(dir);
  std::string detail;

  std::vector<libiq::IQVector> vecs(12);
  for (auto& v : vecs) {
    v.samples.resize(384);
    for (auto& s : v.samples) s = {dist(rng), dist(rng)};
  }
  auto same = [](const std::vector<libiq::IQVector>& a,
                 const std::vector<libiq::IQVector>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != b[i].size()) return false;
      for (std::size_t j = 0; j < a[i].size(); ++j)
        if (a[i][j] != b[i][j]) return false;
    }
    return true;
  };
  libiq::write_bin(dir / "rt.bin", vecs);
  const bool bin_ok = same(vecs, libiq::parse_bin(dir / "rt.bin", 384));
  libiq::write_csv(dir / "rt.csv", vecs);
  const bool csv_ok = same(vecs, libiq::parse_csv(dir / "rt.csv"));
  detail += std::string("binary bit-exact: ") + (bin_ok ? "yes" : "NO") +
            "; CSV bit-exact: " + (csv_ok ? "yes" : "NO");

  libiq::LabeledDataset ds;
  ds.meta.vector_len = 384;
  ds.meta.out_len = 24;
  ds.meta.series_len = 2;
  ds.meta.detect_window = 8;
  for (std::size_t i = 0; i < 18; ++i) {
    libiq::FeatureTensor t;
    t.data.resize(48 * libiq::kChannels);
    for (float& v : t.data) v = dist(rng);
    ds.tensors.push_back(std::move(t));
    ds.labels.push_back(libiq::Label(i % libiq::kNumClasses));
  }
  libiq::normalize(ds);
  libiq::save_dataset(ds, dir / "rt_ds");
  const libiq::LabeledDataset back = libiq::load_dataset(dir / "rt_ds");
  bool ds_ok = back.size() == ds.size() && back.labels == ds.labels &&
               back.meta.vector_len == ds.meta.vector_len &&
               back.meta.out_len == ds.meta.out_len &&
               back.meta.series_len == ds.meta.series_len &&
               back.meta.detect_window == ds.meta.detect_window &&
               back.meta.normalized && back.meta.stats.has_value();
  for (std::size_t i = 0; ds_ok && i < ds.size(); ++i)
    ds_ok = back.tensors[i].data == ds.tensors[i].data;
  detail += std::string("; dataset bit-exact: ") + (ds_ok ? "yes" : "NO");

  libiq::ModelConfig cfg;
  cfg.input_len = 48;
  cfg.conv_blocks = 2;
  cfg.filters = 8;
  cfg.kernel_size = 5;
  cfg.classes = libiq::kNumClasses;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.seed = 21;
  libiq::ModelBundle model(cfg);
  model.net.init_params(21);
  model.norm_stats = ds.meta.stats.value();
  model.data_meta = ds.meta;
  libiq::save_model(model, dir / "rt.liqm");
  const libiq::ModelBundle loaded = libiq::load_model(dir / "rt.liqm");
  const auto before = libiq::forward(model, ds.tensors);
  const auto after = libiq::forward(loaded, ds.tensors);
  double worst = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i)
    for (std::size_t c = 0; c < before[i].size(); ++c)
      worst = std::max(worst,
                       std::abs(double(before[i][c]) - double(after[i][c])));
  const bool model_ok = worst <= 1e-6;
  detail += "; model predictions after reload off by " + fmt_sci(worst) + " (bar 1e-6)";

  return {bin_ok && csv_ok && ds_ok && model_ok, detail};
}

CheckResult check_learning_curve() {
  const auto& h = leg(5).result.history;
  const auto& first = h.epochs.front();
  const auto& last = h.epochs.back();
  const bool pass = h.epochs.size() == 10 &&
                    last.train_loss < first.train_loss &&
                    last.val_acc >= 0.90;
  return {pass, "train loss epoch 1 -> " + std::to_string(h.epochs.size()) +
                    ": " + fmt(first.train_loss) + " -> " +
                    fmt(last.train_loss) + "; final val accuracy " +
                    fmt(last.val_acc) + " (bar 0.90)"};
}

CheckResult check_confusion_diagonal() {
  const auto& rep = leg(5).report;
  double worst = 1.0;
  std::size_t worst_class = 0;
  for (std::size_t c = 0; c < rep.confusion.size(); ++c) {
    const auto& row = rep.confusion[c];
    const double total =
        double(std::accumulate(row.begin(), row.end(), std::size_t(0)));
    const double share = total > 0 ? double(row[c]) / total : 0.0;
    if (share < worst) {
      worst = share;
      worst_class = c;
    }
  }
  return {worst >= 0.90, "smallest per-class diagonal share " + fmt(worst) +
                             " (" + libiq::kLabelNames[worst_class] +
                             ", bar 0.90 for all six)"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--only", 0) == 0) {
      std::string list = arg.size() > 6 && arg[6] == '='
                             ? arg.substr(7)
                             : (i + 1 < argc ? argv[++i] : "");
      std::stringstream ss(list);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...]\n";
      return 2;
    }
  }

  struct Entry {
    int id;
    const char* name;
    CheckResult (*run)();
  };
  const Entry entries[] = {
      {1, "cross-frequency generalization", check_cross_frequency},
      {2, "per-window accuracy", check_per_window_accuracy},
      {3, "streaming latency budget", check_latency},
      {4, "update arithmetic", check_update_arithmetic},
      {5, "FFT vs direct DFT", check_fft_oracle},
      {6, "peak detector vs exhaustive search", check_detector_oracle},
      {7, "gradient check", check_gradients},
      {8, "shape and normalization properties", check_properties},
      {9, "round trips", check_round_trips},
      {10, "learning curve", check_learning_curve},
      {11, "confusion diagonals", check_confusion_diagonal},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    if (!only.empty() && !only.count(e.id)) continue;
    CheckResult r;
    try {
      r = e.run();
    } catch (const std::exception& ex) {
      r = {false, std::string("exception: ") + ex.what()};
    }
    if (!r.pass) ++failures;
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << e.id << " " << e.name
              << ": " << r.detail << std::endl;
  }
  std::cout << (failures == 0 ? "acceptance: all checks passed"
                              : "acceptance: " + std::to_string(failures) +
                                    " check(s) failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
