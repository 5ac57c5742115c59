#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <libiq/analyzer.hpp>
#include <libiq/classifier.hpp>
#include <libiq/errors.hpp>
#include <libiq/plotter.hpp>
#include <libiq/preprocessor.hpp>
#include <libiq/siggen.hpp>
#include <libiq/stream.hpp>
#include <libiq/version.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iso_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json g_argv = json::array();

/// Reproducibility sidecar written next to each command's primary output.
void write_run_manifest(const fs::path& path, const std::string& command,
                        const json& config, const json& seeds,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["argv"] = g_argv;
  m["tool_version"] = libiq::kVersion;
  m["wall_clock_utc"] = iso_utc_now();
  m["deterministic"] = true;
  m["config"] = config;
  m["seeds"] = seeds;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw libiq::IoError("cannot write run manifest " + path.string());
  out << m.dump(2) << '\n';
  if (!out)
    throw libiq::IoError("run manifest write failure on " + path.string());
}

fs::path manifest_beside(const fs::path& primary) {
  fs::path p = primary;
  p += ".run.json";
  return p;
}

std::size_t argmax_row(const std::vector<float>& row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

json eval_report_json(const libiq::EvalReport& r,
                      const std::vector<std::string>& classes) {
  json j;
  j["accuracy"] = r.accuracy;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["macro_f1"] = r.macro_f1;
  j["latency_mean_ms"] = r.latency_mean_ms;
  j["latency_std_ms"] = r.latency_std_ms;
  j["confusion"] = r.confusion;
  j["classes"] = classes;
  j["absent_classes"] = r.absent_classes;
  std::size_t total = 0;
  for (const auto& row : r.confusion)
    for (std::size_t n : row) total += n;
  j["count"] = total;
  return j;
}

void write_confusion_csv(const fs::path& path,
                         const std::vector<std::vector<std::size_t>>& m,
                         const std::vector<std::string>& classes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw libiq::IoError("cannot write " + path.string());
  out << "truth\\pred";
  for (const auto& c : classes) out << ',' << c;
  out << '\n';
  for (std::size_t t = 0; t < m.size(); ++t) {
    out << classes.at(t);
    for (std::size_t p = 0; p < m[t].size(); ++p) out << ',' << m[t][p];
    out << '\n';
  }
  if (!out) throw libiq::IoError("write failure on " + path.string());
}

struct CorpusEntry {
  fs::path path;
  libiq::Label label;
  std::size_t center_bin;
};

struct CorpusIndex {
  std::size_t vector_len = 0;
  std::vector<CorpusEntry> entries;
};

CorpusIndex read_corpus_manifest(const fs::path& dir,
                                 const std::vector<std::size_t>& bins) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in)
    throw libiq::IoError("cannot open corpus manifest " + mpath.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw libiq::FormatError("corpus manifest " + mpath.string() + ": " +
                             e.what());
  }
  CorpusIndex idx;
  try {
    idx.vector_len = m.at("vector_len").get<std::size_t>();
    for (const auto& f : m.at("files")) {
      const auto bin = f.at("center_bin").get<std::size_t>();
      if (!bins.empty() &&
          std::find(bins.begin(), bins.end(), bin) == bins.end())
        continue;
      idx.entries.push_back(
          {dir / f.at("file").get<std::string>(),
           libiq::label_from_name(f.at("label").get<std::string>()), bin});
    }
  } catch (const json::exception& e) {
    throw libiq::FormatError("corpus manifest " + mpath.string() + ": " +
                             e.what());
  }
  if (idx.entries.empty())
    throw libiq::InvalidArgument("no corpus files match the requested bins");
  return idx;
}

libiq::NormStats read_norm_stats(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw libiq::IoError("cannot open stats file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw libiq::FormatError("stats file " + path.string() + ": " + e.what());
  }
  return libiq::detail::norm_stats_from_json(j);
}

void write_norm_stats(const fs::path& path, const libiq::NormStats& st) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw libiq::IoError("cannot write " + path.string());
  out << libiq::detail::norm_stats_to_json(st).dump(2) << '\n';
}

// ---------------------------------------------------------------- gen ----

struct GenArgs {
  std::string out_dir;
  std::size_t vector_len = 1536;
  std::vector<std::size_t> bins;
  std::size_t files_per_cell = 1;
  std::size_t vectors_per_file = 100;
  std::size_t bw_bins = 38;
  double snr_db = 20.0;
  double floor_db = 0.0;
  std::uint64_t seed = 0;
};

int cmd_gen(const GenArgs& a) {
  libiq::CorpusParams p;
  p.bins = a.bins.empty() ? libiq::default_center_bins(a.vector_len) : a.bins;
  p.per_cell = a.files_per_cell;
  p.vectors_per_file = a.vectors_per_file;
  p.vector_len = a.vector_len;
  p.signal_bw_bins = a.bw_bins;
  p.snr_db = a.snr_db;
  p.noise_floor_db = a.floor_db;
  p.seed = a.seed;

  const json manifest = libiq::generate_corpus(p, a.out_dir);

  json config{{"vector_len", p.vector_len},
              {"bins", p.bins},
              {"files_per_cell", p.per_cell},
              {"vectors_per_file", p.vectors_per_file},
              {"bw_bins", p.signal_bw_bins},
              {"snr_db", p.snr_db},
              {"floor_db", p.noise_floor_db},
              {"seed", p.seed}};
  std::vector<std::string> outputs{a.out_dir};
  for (const auto& f : manifest.at("files"))
    outputs.push_back((fs::path(a.out_dir) / f.at("file").get<std::string>())
                          .string());
  write_run_manifest(fs::path(a.out_dir) / "run.json", "gen", config,
                     json{{"seed", p.seed}}, {}, outputs);

  json summary{{"out_dir", a.out_dir},
               {"files", manifest.at("files").size()},
               {"vectors_per_file", p.vectors_per_file}};
  std::cout << summary.dump() << '\n';
  return 0;
}

// ------------------------------------------------------------ dataset ----

struct DatasetArgs {
  std::string corpus;
  std::string out_stem;
  std::size_t window = 5;
  std::size_t detect_window = 64;
  std::size_t out_len = 600;
  std::vector<std::size_t> bins;
  bool normalize = false;
  std::string stats_file;
};

int cmd_dataset(const DatasetArgs& a) {
  const CorpusIndex idx = read_corpus_manifest(a.corpus, a.bins);
  std::vector<fs::path> paths;
  std::vector<libiq::Label> labels;
  for (const auto& e : idx.entries) {
    paths.push_back(e.path);
    labels.push_back(e.label);
  }
  libiq::LabeledDataset ds = libiq::create_dataset_from_bin(
      paths, labels, a.window, idx.vector_len, a.detect_window, a.out_len);
  if (a.normalize)
    libiq::normalize(ds);
  else if (!a.stats_file.empty())
    libiq::apply_normalization(ds, read_norm_stats(a.stats_file));
  libiq::save_dataset(ds, a.out_stem);

  json config{{"corpus", a.corpus},    {"window", a.window},
              {"detect_window", a.detect_window},
              {"out_len", a.out_len},  {"bins", a.bins},
              {"normalize", a.normalize}, {"stats_file", a.stats_file}};
  std::vector<std::string> inputs{a.corpus};
  if (!a.stats_file.empty()) inputs.push_back(a.stats_file);
  write_run_manifest(manifest_beside(a.out_stem), "dataset", config, json{},
                     inputs,
                     {a.out_stem + ".json", a.out_stem + ".tensors.f32le",
                      a.out_stem + ".labels.u8"});

  json summary{{"tensors", ds.size()},
               {"tensor_len", ds.empty() ? 0 : ds.tensors.front().length()},
               {"normalized", ds.meta.normalized},
               {"out", a.out_stem}};
  std::cout << summary.dump() << '\n';
  return 0;
}

// -------------------------------------------------------------- train ----

struct TrainArgs {
  std::string data_stem;
  std::string out_model;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 17;
  std::size_t epochs = 10;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::size_t filters = 64;
  std::size_t blocks = 3;
  std::size_t kernel = 7;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  libiq::LabeledDataset ds = libiq::load_dataset(a.data_stem);
  if (ds.empty()) throw libiq::InvalidArgument("dataset is empty");
  if (!ds.meta.normalized) libiq::normalize(ds);
  auto [train, val] = libiq::stratified_split(ds, a.val_fraction, a.split_seed);

  libiq::ModelConfig cfg;
  cfg.input_len = ds.tensors.front().length();
  cfg.conv_blocks = a.blocks;
  cfg.filters = a.filters;
  cfg.kernel_size = a.kernel;
  cfg.classes = ds.meta.classes.size();
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;

  const libiq::TrainResult res = libiq::cnn_train(train, val, cfg);
  libiq::save_model(res.model, a.out_model);
  const std::string history_path = a.out_model + ".history.csv";
  res.history.save_csv(history_path);
  const std::string norm_path = a.out_model + ".norm.json";
  write_norm_stats(norm_path, res.model.norm_stats);

  json config{{"data", a.data_stem},
              {"val_fraction", a.val_fraction},
              {"split_seed", a.split_seed},
              {"input_len", cfg.input_len},
              {"blocks", cfg.conv_blocks},
              {"filters", cfg.filters},
              {"kernel", cfg.kernel_size},
              {"classes", cfg.classes},
              {"batch", cfg.batch_size},
              {"epochs", cfg.epochs},
              {"learning_rate", cfg.learning_rate},
              {"seed", cfg.seed}};
  write_run_manifest(manifest_beside(a.out_model), "train", config,
                     json{{"seed", a.seed}, {"split_seed", a.split_seed}},
                     {a.data_stem + ".json", a.data_stem + ".tensors.f32le",
                      a.data_stem + ".labels.u8"},
                     {a.out_model, history_path, norm_path});

  const auto& last = res.history.epochs.back();
  json summary{{"model", a.out_model},
               {"epochs", res.history.epochs.size()},
               {"updates_per_epoch", res.history.updates_per_epoch},
               {"total_updates", res.history.total_updates},
               {"train_acc", last.train_acc},
               {"train_loss", last.train_loss}};
  if (!val.empty()) {
    summary["val_acc"] = last.val_acc;
    summary["val_loss"] = last.val_loss;
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

// --------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string model;
  std::string data_stem;
  std::string out_report;
  std::string confusion_csv;
};

int cmd_eval(const EvalArgs& a) {
  const libiq::ModelBundle model = libiq::load_model(a.model);
  libiq::LabeledDataset ds = libiq::load_dataset(a.data_stem);
  if (!ds.meta.normalized) libiq::apply_normalization(ds, model.norm_stats);

  const libiq::EvalReport rep = libiq::cnn_test(model, ds);
  const json j = eval_report_json(rep, model.class_map);
  std::ofstream out(a.out_report, std::ios::trunc);
  if (!out) throw libiq::IoError("cannot write " + a.out_report);
  out << j.dump(2) << '\n';
  if (!out) throw libiq::IoError("write failure on " + a.out_report);

  const std::string confusion_path =
      a.confusion_csv.empty() ? a.out_report + ".confusion.csv"
                              : a.confusion_csv;
  write_confusion_csv(confusion_path, rep.confusion, model.class_map);

  write_run_manifest(manifest_beside(a.out_report), "eval",
                     json{{"model", a.model}, {"data", a.data_stem}}, json{},
                     {a.model, a.data_stem + ".json"},
                     {a.out_report, confusion_path});
  std::cout << j.dump() << '\n';
  return 0;
}

// ----------------------------------------------------------- classify ----

struct ClassifyArgs {
  std::string model;
  std::string input;
  std::string out_csv;
  std::size_t window = 0;        // 0: the model's training window
  std::size_t detect_window = 0; // 0: the model's training value
  std::size_t vector_len = 0;    // 0: the model's training value
};

int cmd_classify(const ClassifyArgs& a) {
  const libiq::ModelBundle model = libiq::load_model(a.model);
  const std::size_t in_k =
      a.window != 0 ? a.window : model.data_meta.series_len;
  const std::size_t detect =
      a.detect_window != 0 ? a.detect_window : model.data_meta.detect_window;
  const std::size_t vlen =
      a.vector_len != 0 ? a.vector_len : model.data_meta.vector_len;
  if (in_k == 0 || detect == 0 || vlen == 0)
    throw libiq::InvalidArgument(
        "window, detect-window and vector-len must be given when the model "
        "does not carry them");
  if (model.config.input_len % in_k != 0)
    throw libiq::ShapeError("model input length " +
                            std::to_string(model.config.input_len) +
                            " is not divisible by window " +
                            std::to_string(in_k));
  const std::size_t out_len = model.config.input_len / in_k;

  const std::vector<libiq::IQVector> vectors = libiq::parse_bin(a.input, vlen);
  if (vectors.size() < in_k)
    throw libiq::InvalidArgument("capture has " +
                                 std::to_string(vectors.size()) +
                                 " vectors, need at least " +
                                 std::to_string(in_k));
  libiq::LabeledDataset ds;
  ds.meta.vector_len = vlen;
  ds.meta.out_len = out_len;
  ds.meta.series_len = in_k;
  ds.meta.detect_window = detect;
  const std::size_t groups = vectors.size() / in_k;
  for (std::size_t g = 0; g < groups; ++g) {
    libiq::TimeSeries ts;
    ts.vectors.assign(vectors.begin() + std::ptrdiff_t(g * in_k),
                      vectors.begin() + std::ptrdiff_t((g + 1) * in_k));
    ds.tensors.push_back(libiq::build_features(ts, detect, out_len));
    ds.labels.push_back(libiq::Label::NoRFI);
  }
  libiq::apply_normalization(ds, model.norm_stats);
  const auto probs = libiq::forward(model, ds.tensors);

  std::ofstream csv(a.out_csv, std::ios::trunc);
  if (!csv) throw libiq::IoError("cannot write " + a.out_csv);
  csv << "window,first_vector,last_vector,label,prob\n";
  std::cout << "window,first_vector,last_vector,label,prob\n";
  char buf[64];
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t best = argmax_row(probs[g]);
    std::snprintf(buf, sizeof buf, "%.9g", double(probs[g][best]));
    const std::string line = std::to_string(g) + ',' +
                             std::to_string(g * in_k) + ',' +
                             std::to_string((g + 1) * in_k - 1) + ',' +
                             model.class_map.at(best) + ',' + buf;
    csv << line << '\n';
    std::cout << line << '\n';
  }
  if (!csv) throw libiq::IoError("write failure on " + a.out_csv);

  write_run_manifest(manifest_beside(a.out_csv), "classify",
                     json{{"model", a.model},
                          {"input", a.input},
                          {"window", in_k},
                          {"detect_window", detect},
                          {"vector_len", vlen}},
                     json{}, {a.model, a.input}, {a.out_csv});
  return 0;
}

// -------------------------------------------------------------- serve ----

struct ServeArgs {
  std::string endpoint = "127.0.0.1:45901";
  std::string input;
  std::string label;
  std::string report = "serve_report.json";
  std::size_t vector_len = 1536;
  double period_ms = 8.0;
  std::uint64_t max_frames = 0;
  std::size_t center_bin = 768;
  std::size_t bw_bins = 38;
  double snr_db = 20.0;
  double floor_db = 0.0;
  std::uint64_t seed = 0;
  std::size_t vectors = 100;
};

int cmd_serve(const ServeArgs& a) {
  if (a.input.empty() == a.label.empty())
    throw libiq::InvalidArgument("give exactly one of --input or --label");

  libiq::ServeOptions opts;
  opts.period_ms = a.period_ms;
  opts.max_frames = a.max_frames;

  libiq::ServeReport rep;
  if (!a.input.empty()) {
    rep = libiq::serve(a.endpoint, libiq::parse_bin(a.input, a.vector_len),
                       opts);
  } else {
    libiq::SceneConfig sc;
    sc.label = libiq::label_from_name(a.label);
    sc.vector_len = a.vector_len;
    sc.center_bin = a.center_bin;
    sc.signal_bw_bins = a.bw_bins;
    sc.snr_db = a.snr_db;
    sc.noise_floor_db = a.floor_db;
    sc.seed = a.seed;
    sc.vectors = a.vectors;
    rep = libiq::serve(a.endpoint, sc, opts);
  }

  json j{{"endpoint", a.endpoint},
         {"period_ms", a.period_ms},
         {"frames_sent", rep.frames_sent},
         {"frames_dropped", rep.frames_dropped}};
  std::ofstream out(a.report, std::ios::trunc);
  if (!out) throw libiq::IoError("cannot write " + a.report);
  out << j.dump(2) << '\n';
  if (!out) throw libiq::IoError("write failure on " + a.report);

  json config{{"endpoint", a.endpoint}, {"input", a.input},
              {"label", a.label},       {"vector_len", a.vector_len},
              {"period_ms", a.period_ms}, {"max_frames", a.max_frames},
              {"center_bin", a.center_bin}, {"bw_bins", a.bw_bins},
              {"snr_db", a.snr_db},     {"floor_db", a.floor_db},
              {"seed", a.seed},         {"vectors", a.vectors}};
  std::vector<std::string> inputs;
  if (!a.input.empty()) inputs.push_back(a.input);
  write_run_manifest(manifest_beside(a.report), "serve", config,
                     json{{"seed", a.seed}}, inputs, {a.report});
  std::cout << j.dump() << '\n';
  return 0;
}

// ------------------------------------------------------------- stream ----

struct StreamArgs {
  std::string endpoint = "127.0.0.1:45901";
  std::string model;
  std::string out_csv = "stream_records.csv";
  std::size_t window = 0;  // 0: the model's training window
  std::size_t detect_window = 0;
  std::size_t max_records = 0;
  int connect_timeout_ms = 5000;
};

int cmd_stream(const StreamArgs& a) {
  const libiq::ModelBundle model = libiq::load_model(a.model);
  const std::size_t k = a.window != 0 ? a.window : model.data_meta.series_len;
  if (k == 0)
    throw libiq::InvalidArgument(
        "window must be given when the model does not carry one");

  libiq::ClassifyStreamOptions opts;
  opts.detect_window = a.detect_window;
  opts.max_records = a.max_records;
  opts.connect_timeout_ms = a.connect_timeout_ms;
  std::cout << "first_seq,last_seq,label,prob,latency_ms\n";
  opts.on_record = [](const libiq::ClassifyRecord& r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", double(r.prob));
    std::cout << r.first_seq << ',' << r.last_seq << ','
              << libiq::label_name(r.label) << ',' << buf << ','
              << r.latency_ms << '\n';
  };

  const auto records = libiq::classify_stream(a.endpoint, model, k, opts);
  libiq::write_records_csv(fs::path(a.out_csv), records);

  json stats_j{{"records", records.size()}};
  if (records.size() >= 2) {
    const libiq::LatencyStats st = libiq::latency_report(records);
    stats_j["latency"] = {{"n", st.n},
                          {"mean_ms", st.mean_ms},
                          {"std_ms", st.std_ms},
                          {"outliers_removed", st.outliers_removed}};
  }
  const std::string stats_path = a.out_csv + ".stats.json";
  std::ofstream sout(stats_path, std::ios::trunc);
  if (!sout) throw libiq::IoError("cannot write " + stats_path);
  sout << stats_j.dump(2) << '\n';

  write_run_manifest(manifest_beside(a.out_csv), "stream",
                     json{{"endpoint", a.endpoint},
                          {"model", a.model},
                          {"window", k},
                          {"detect_window", a.detect_window},
                          {"max_records", a.max_records}},
                     json{}, {a.model}, {a.out_csv, stats_path});
  return 0;
}

// -------------------------------------------------------- spectrogram ----

struct SpectrogramArgs {
  std::string input;
  std::string out;
  std::string format = "png";
  std::size_t vector_len = 1536;
  std::size_t window_size = 0;  // 0: one FFT window per capture vector
  std::size_t overlap = 0;
  std::string scale = "db";
  bool shift = true;
};

int cmd_spectrogram(const SpectrogramArgs& a) {
  libiq::TimeSeries ts;
  ts.vectors = libiq::parse_bin(a.input, a.vector_len);
  const std::size_t wsize = a.window_size != 0 ? a.window_size : a.vector_len;
  libiq::SpectrogramMatrix m = libiq::spectrogram(
      ts, wsize, a.overlap,
      a.scale == "linear" ? libiq::Scale::linear : libiq::Scale::dB);
  if (a.shift) m = libiq::fftshift(m);
  libiq::render(m, a.out,
                a.format == "csv" ? libiq::RenderFormat::csv
                                  : libiq::RenderFormat::png);

  write_run_manifest(manifest_beside(a.out), "spectrogram",
                     json{{"input", a.input},
                          {"vector_len", a.vector_len},
                          {"window_size", wsize},
                          {"overlap", a.overlap},
                          {"scale", a.scale},
                          {"fftshift", a.shift},
                          {"format", a.format}},
                     json{}, {a.input}, {a.out});
  json summary{{"out", a.out}, {"rows", m.rows}, {"cols", m.cols}};
  std::cout << summary.dump() << '\n';
  return 0;
}

// --------------------------------------------------------------- plot ----

struct PlotArgs {
  std::string input;
  std::string out;
  std::string mode = "components";
  std::string format = "csv";
  std::size_t vector_len = 1536;
  std::size_t index = 0;
  std::size_t grid = 256;
};

int cmd_plot(const PlotArgs& a) {
  const auto vectors = libiq::parse_bin(a.input, a.vector_len);
  if (a.index >= vectors.size())
    throw libiq::InvalidArgument("vector index " + std::to_string(a.index) +
                                 " out of range, capture has " +
                                 std::to_string(vectors.size()));
  const auto pairs = libiq::scatter_data(
      vectors[a.index], a.mode == "magnitude-phase"
                            ? libiq::ScatterMode::magnitude_phase
                            : libiq::ScatterMode::components);

  if (a.format == "csv") {
    std::ofstream out(a.out, std::ios::trunc);
    if (!out) throw libiq::IoError("cannot write " + a.out);
    out << "x,y\n";
    char buf[80];
    for (const auto& [x, y] : pairs) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g", double(x), double(y));
      out << buf << '\n';
    }
    if (!out) throw libiq::IoError("write failure on " + a.out);
  } else {
    // Density raster of the point cloud, rendered with the heat palette.
    float xmin = pairs[0].first, xmax = xmin;
    float ymin = pairs[0].second, ymax = ymin;
    for (const auto& [x, y] : pairs) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    const float xspan = xmax > xmin ? xmax - xmin : 1.0f;
    const float yspan = ymax > ymin ? ymax - ymin : 1.0f;
    libiq::SpectrogramMatrix m;
    m.rows = a.grid;
    m.cols = a.grid;
    m.values.assign(a.grid * a.grid, 0.0);
    for (const auto& [x, y] : pairs) {
      auto col = std::size_t(float(a.grid - 1) * (x - xmin) / xspan);
      auto row = std::size_t(float(a.grid - 1) * (ymax - y) / yspan);
      m.at(row, col) += 1.0;
    }
    libiq::render(m, a.out, libiq::RenderFormat::png);
  }

  write_run_manifest(manifest_beside(a.out), "plot",
                     json{{"input", a.input},
                          {"vector_len", a.vector_len},
                          {"index", a.index},
                          {"mode", a.mode},
                          {"format", a.format}},
                     json{}, {a.input}, {a.out});
  json summary{{"out", a.out}, {"points", pairs.size()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_argv.push_back(argv[i]);

  CLI::App app{"I/Q spectrum sensing pipeline: generation, preprocessing, "
               "training, evaluation and streaming classification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI/TOML file");
  app.set_version_flag("--version", libiq::kVersion);

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen", "Generate a labeled capture corpus");
  cgen->add_option("--out", gen.out_dir, "Output directory")->required();
  cgen->add_option("--vector-len", gen.vector_len, "Samples per vector");
  cgen->add_option("--bins", gen.bins,
                   "Center bins (default: the four standard offsets)");
  cgen->add_option("--files-per-cell", gen.files_per_cell,
                   "Files per class and bin");
  cgen->add_option("--vectors-per-file", gen.vectors_per_file,
                   "Vectors per capture file");
  cgen->add_option("--bw-bins", gen.bw_bins, "Signal bandwidth in bins");
  cgen->add_option("--snr-db", gen.snr_db, "In-band SNR in dB");
  cgen->add_option("--floor-db", gen.floor_db, "Noise floor in dB");
  cgen->add_option("--seed", gen.seed, "Corpus seed");

  DatasetArgs dsa;
  auto* cds = app.add_subcommand("dataset",
                                 "Build a feature dataset from a corpus");
  cds->add_option("--corpus", dsa.corpus, "Corpus directory")->required();
  cds->add_option("--out", dsa.out_stem, "Output stem")->required();
  cds->add_option("--window", dsa.window, "Vectors per time series (K)");
  cds->add_option("--detect-window", dsa.detect_window,
                  "Energy detector window");
  cds->add_option("--out-len", dsa.out_len, "Detector slice per vector (J)");
  cds->add_option("--bins", dsa.bins, "Keep only these center bins");
  auto* norm_flag =
      cds->add_flag("--normalize", dsa.normalize,
                    "Compute and apply z-score stats from this dataset");
  cds->add_option("--stats", dsa.stats_file,
                  "Apply existing z-score stats from a JSON file")
      ->excludes(norm_flag);

  TrainArgs tra;
  auto* ctr = app.add_subcommand("train", "Train the time-series classifier");
  ctr->add_option("--data", tra.data_stem, "Training dataset stem")
      ->required();
  ctr->add_option("--out", tra.out_model, "Output model file")->required();
  ctr->add_option("--val-fraction", tra.val_fraction,
                  "Held-out validation fraction");
  ctr->add_option("--split-seed", tra.split_seed, "Validation split seed");
  ctr->add_option("--epochs", tra.epochs, "Training epochs");
  ctr->add_option("--batch", tra.batch, "Batch size");
  ctr->add_option("--lr", tra.lr, "Adam learning rate");
  ctr->add_option("--filters", tra.filters, "Convolution filters per block");
  ctr->add_option("--blocks", tra.blocks, "Convolution blocks");
  ctr->add_option("--kernel", tra.kernel, "Convolution kernel size");
  ctr->add_option("--seed", tra.seed, "Initialization and shuffle seed");

  EvalArgs eva;
  auto* cev = app.add_subcommand("eval", "Score a model on a dataset");
  cev->add_option("--model", eva.model, "Model file")->required();
  cev->add_option("--data", eva.data_stem, "Dataset stem")->required();
  cev->add_option("--out", eva.out_report, "Report JSON path")->required();
  cev->add_option("--confusion", eva.confusion_csv,
                  "Confusion CSV path (default: <report>.confusion.csv)");

  ClassifyArgs cla;
  auto* ccl = app.add_subcommand("classify", "Label a capture file");
  ccl->add_option("--model", cla.model, "Model file")->required();
  ccl->add_option("--input", cla.input, "Capture file (.bin)")->required();
  ccl->add_option("--out", cla.out_csv, "Output CSV path")->required();
  ccl->add_option("--window", cla.window, "Vectors per prediction (K)");
  ccl->add_option("--detect-window", cla.detect_window,
                  "Energy detector window");
  ccl->add_option("--vector-len", cla.vector_len, "Samples per vector");

  ServeArgs sva;
  auto* csv_cmd = app.add_subcommand("serve",
                                     "Emit capture frames at a fixed period");
  csv_cmd->add_option("--endpoint", sva.endpoint, "host:port to listen on");
  csv_cmd->add_option("--input", sva.input, "Capture file to replay");
  csv_cmd->add_option("--label", sva.label,
                      "Generate a scene of this class instead of replaying");
  csv_cmd->add_option("--report", sva.report, "Report JSON path");
  csv_cmd->add_option("--vector-len", sva.vector_len, "Samples per vector");
  csv_cmd->add_option("--period-ms", sva.period_ms, "Frame period in ms");
  csv_cmd->add_option("--max-frames", sva.max_frames,
                      "Stop after this many frame slots (0: run until "
                      "stopped)");
  csv_cmd->add_option("--center-bin", sva.center_bin, "Scene center bin");
  csv_cmd->add_option("--bw-bins", sva.bw_bins, "Scene bandwidth in bins");
  csv_cmd->add_option("--snr-db", sva.snr_db, "Scene SNR in dB");
  csv_cmd->add_option("--floor-db", sva.floor_db, "Scene noise floor in dB");
  csv_cmd->add_option("--seed", sva.seed, "Scene seed");
  csv_cmd->add_option("--vectors", sva.vectors, "Scene vectors to cycle");

  StreamArgs sta;
  auto* cst = app.add_subcommand(
      "stream", "Classify frames from a producer in real time");
  cst->add_option("--endpoint", sta.endpoint, "host:port of the producer");
  cst->add_option("--model", sta.model, "Model file")->required();
  cst->add_option("--out", sta.out_csv, "Records CSV path");
  cst->add_option("--window", sta.window, "Vectors per prediction (K)");
  cst->add_option("--detect-window", sta.detect_window,
                  "Energy detector window");
  cst->add_option("--max-records", sta.max_records,
                  "Stop after this many records (0: until disconnect)");
  cst->add_option("--connect-timeout-ms", sta.connect_timeout_ms,
                  "Producer connect timeout");

  SpectrogramArgs spa;
  auto* csp = app.add_subcommand("spectrogram",
                                 "Render a waterfall from a capture");
  csp->add_option("--input", spa.input, "Capture file (.bin)")->required();
  csp->add_option("--out", spa.out, "Output path")->required();
  csp->add_option("--format", spa.format, "png or csv")
      ->check(CLI::IsMember({"png", "csv"}));
  csp->add_option("--vector-len", spa.vector_len, "Samples per vector");
  csp->add_option("--window-size", spa.window_size,
                  "FFT window (0: one window per vector)");
  csp->add_option("--overlap", spa.overlap, "FFT window overlap");
  csp->add_option("--scale", spa.scale, "db or linear")
      ->check(CLI::IsMember({"db", "linear"}));
  csp->add_flag("--fftshift,!--no-fftshift", spa.shift,
                "Center the zero-frequency bin");

  PlotArgs pla;
  auto* cpl = app.add_subcommand("plot", "Scatter plot of one vector");
  cpl->add_option("--input", pla.input, "Capture file (.bin)")->required();
  cpl->add_option("--out", pla.out, "Output path")->required();
  cpl->add_option("--mode", pla.mode, "components or magnitude-phase")
      ->check(CLI::IsMember({"components", "magnitude-phase"}));
  cpl->add_option("--format", pla.format, "csv or png")
      ->check(CLI::IsMember({"csv", "png"}));
  cpl->add_option("--vector-len", pla.vector_len, "Samples per vector");
  cpl->add_option("--index", pla.index, "Vector index to plot");
  cpl->add_option("--grid", pla.grid, "Density raster size for png");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
    json err{{"error", "usage"}, {"message", e.what()}};
    std::cerr << err.dump() << '\n' << app.help();
    return 1;
  }

  try {
    if (*cgen) return cmd_gen(gen);
    if (*cds) return cmd_dataset(dsa);
    if (*ctr) return cmd_train(tra);
    if (*cev) return cmd_eval(eva);
    if (*ccl) return cmd_classify(cla);
    if (*csv_cmd) return cmd_serve(sva);
    if (*cst) return cmd_stream(sta);
    if (*csp) return cmd_spectrogram(spa);
    if (*cpl) return cmd_plot(pla);
  } catch (const libiq::InvalidArgument& e) {
    std::cerr << json{{"error", "InvalidArgument"}, {"message", e.what()}}.dump()
              << '\n';
    return 1;
  } catch (const libiq::FormatError& e) {
    std::cerr << json{{"error", "FormatError"}, {"message", e.what()}}.dump()
              << '\n';
    return 1;
  } catch (const libiq::DataError& e) {
    std::cerr << json{{"error", "DataError"}, {"message", e.what()}}.dump()
              << '\n';
    return 1;
  } catch (const libiq::ShapeError& e) {
    std::cerr << json{{"error", "ShapeError"}, {"message", e.what()}}.dump()
              << '\n';
    return 1;
  } catch (const libiq::IoError& e) {
    std::cerr << json{{"error", "IoError"}, {"message", e.what()}}.dump()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump()
              << '\n';
    return 2;
  }
  return 2;
}
