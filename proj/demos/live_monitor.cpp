// Self-contained streaming demo: trains a small classifier on synthetic
// scenes, then serves one scene over a local socket and prints the live
// predictions with their per-window latency.
//
//   live_monitor [label] [seconds]

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "libiq/classifier.hpp"
#include "libiq/preprocessor.hpp"
#include "libiq/siggen.hpp"
#include "libiq/stream.hpp"

namespace {

libiq::LabeledDataset make_training_set(std::size_t vector_len,
                                        std::size_t center_bin, std::size_t k,
                                        std::size_t detect, std::size_t out) {
  libiq::LabeledDataset ds;
  ds.meta.vector_len = vector_len;
  ds.meta.out_len = out;
  ds.meta.series_len = k;
  ds.meta.detect_window = detect;
  for (std::size_t c = 0; c < libiq::kNumClasses; ++c) {
    libiq::SceneConfig sc;
    sc.label = libiq::Label(c);
    sc.vector_len = vector_len;
    sc.center_bin = center_bin;
    sc.signal_bw_bins = 12;
    sc.seed = 40 + c;
    sc.vectors = 200;
    const auto vectors = libiq::generate(sc);
    for (std::size_t g = 0; g + k <= vectors.size(); g += k) {
      libiq::TimeSeries ts;
      ts.vectors.assign(vectors.begin() + std::ptrdiff_t(g),
                        vectors.begin() + std::ptrdiff_t(g + k));
      ds.tensors.push_back(libiq::build_features(ts, detect, out));
      ds.labels.push_back(libiq::Label(c));
    }
  }
  return ds;
}

}  // namespace

int main(int argc, char** argv) {
  const char* label_name = argc > 1 ? argv[1] : "Radar";
  const int seconds = argc > 2 ? std::atoi(argv[2]) : 5;
  const std::size_t vector_len = 512, center_bin = 128, k = 5;
  const std::size_t detect = 32, out = 48;
  const char* endpoint = "127.0.0.1:45930";

  try {
    const libiq::Label truth = libiq::label_from_name(label_name);

    std::printf("training a %zu-window classifier on synthetic scenes...\n",
                k);
    libiq::LabeledDataset ds =
        make_training_set(vector_len, center_bin, k, detect, out);
    libiq::normalize(ds);
    auto [train, val] = libiq::stratified_split(ds, 0.15, 1);
    libiq::ModelConfig cfg;
    cfg.input_len = out * k;
    cfg.conv_blocks = 2;
    cfg.filters = 24;
    cfg.kernel_size = 5;
    cfg.batch_size = 16;
    cfg.epochs = 20;
    cfg.seed = 1;
    const libiq::TrainResult trained = libiq::cnn_train(train, val, cfg);
    std::printf("final val accuracy %.3f\n",
                trained.history.epochs.back().val_acc);

    std::atomic<bool> stop{false};
    libiq::SceneConfig scene;
    scene.label = truth;
    scene.vector_len = vector_len;
    scene.center_bin = center_bin;
    scene.signal_bw_bins = 12;
    scene.seed = 777;
    scene.vectors = 120;
    std::thread producer([&] {
      libiq::ServeOptions opts;
      opts.period_ms = 8.0;
      opts.stop = &stop;
      libiq::serve(endpoint, scene, opts);
    });
    std::thread timer([&] {
      std::this_thread::sleep_for(std::chrono::seconds(seconds));
      stop = true;
    });

    std::printf("serving a %s scene on %s for %d s\n",
                libiq::label_name(truth), endpoint, seconds);
    libiq::ClassifyStreamOptions opts;
    opts.on_record = [&](const libiq::ClassifyRecord& r) {
      std::printf("frames %llu..%llu  ->  %-10s p=%.3f  %.3f ms%s\n",
                  (unsigned long long)r.first_seq,
                  (unsigned long long)r.last_seq,
                  libiq::label_name(r.label), r.prob, r.latency_ms,
                  r.label == truth ? "" : "  (miss)");
    };
    const auto records =
        libiq::classify_stream(endpoint, trained.model, k, opts);
    producer.join();
    timer.join();

    std::size_t hits = 0;
    for (const auto& r : records) hits += r.label == truth;
    if (records.size() >= 2) {
      const auto st = libiq::latency_report(records);
      std::printf("%zu/%zu windows labeled %s, latency %.3f +- %.3f ms\n",
                  hits, records.size(), libiq::label_name(truth),
                  st.mean_ms, st.std_ms);
    }
  } catch (const libiq::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
