#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "libiq/errors.hpp"
#include "libiq/preprocessor.hpp"

namespace libiq {

struct ModelConfig {
  std::size_t input_len = 600;  // samples per tensor (detector out_len * K)
  std::size_t in_channels = kChannels;
  std::size_t conv_blocks = 3;
  std::size_t filters = 64;
  std::size_t kernel_size = 7;
  std::size_t classes = kNumClasses;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_len == 0 || in_channels == 0 || conv_blocks == 0 ||
        filters == 0 || kernel_size == 0 || classes < 2 || batch_size == 0 ||
        epochs == 0)
      throw InvalidArgument("ModelConfig: all sizes must be positive");
    if (kernel_size > input_len)
      throw InvalidArgument("ModelConfig: kernel longer than input");
    if (learning_rate <= 0.0)
      throw InvalidArgument("ModelConfig: learning_rate must be positive");
  }
};

namespace detail {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

/// Offsets of each layer's tensors inside the flat parameter vector.
struct ParamLayout {
  struct Block {
    std::size_t in_ch = 0;
    std::size_t w = 0;      // filters x (in_ch * kernel), column-major
    std::size_t bias = 0;   // filters
    std::size_t gamma = 0;  // filters
    std::size_t beta = 0;   // filters
  };
  std::vector<Block> blocks;
  std::size_t dense_w = 0;  // classes x filters, column-major
  std::size_t dense_b = 0;  // classes
  std::size_t total = 0;
  std::size_t running_total = 0;  // per block: mean then var, filters each

  explicit ParamLayout(const ModelConfig& cfg) {
    std::size_t off = 0;
    for (std::size_t b = 0; b < cfg.conv_blocks; ++b) {
      Block blk;
      blk.in_ch = b == 0 ? cfg.in_channels : cfg.filters;
      blk.w = off;
      off += cfg.filters * blk.in_ch * cfg.kernel_size;
      blk.bias = off;
      off += cfg.filters;
      blk.gamma = off;
      off += cfg.filters;
      blk.beta = off;
      off += cfg.filters;
      blocks.push_back(blk);
    }
    dense_w = off;
    off += cfg.classes * cfg.filters;
    dense_b = off;
    off += cfg.classes;
    total = off;
    running_total = cfg.conv_blocks * 2 * cfg.filters;
  }
};

/// The network: [conv1d -> batch-norm -> ReLU] x blocks ->
/// global average pooling -> dense -> softmax. Templated on the scalar so
/// training runs in float and finite-difference checks in double.
template <typename T>
class Net {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  explicit Net(const ModelConfig& cfg) : cfg_(cfg), layout_(cfg) {
    cfg.validate();
    theta_.assign(layout_.total, T(0));
    running_.assign(layout_.running_total, T(0));
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b)
      run_var(b).setOnes();
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b)
      gamma(b).setOnes();
  }

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<T>& params() { return theta_; }
  const std::vector<T>& params() const { return theta_; }
  std::vector<T>& running_stats() { return running_; }
  const std::vector<T>& running_stats() const { return running_; }

  /// Kaiming-uniform conv/dense weights, zero biases, gamma 1, beta 0.
  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b) {
      const auto& blk = layout_.blocks[b];
      const double bound =
          std::sqrt(6.0 / double(blk.in_ch * cfg_.kernel_size));
      std::uniform_real_distribution<double> dist(-bound, bound);
      auto w = conv_w(b);
      for (Eigen::Index j = 0; j < w.size(); ++j) w.data()[j] = T(dist(rng));
      conv_b(b).setZero();
      gamma(b).setOnes();
      beta(b).setZero();
      run_mean(b).setZero();
      run_var(b).setOnes();
    }
    const double bound = std::sqrt(6.0 / double(cfg_.filters));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = dense_w();
    for (Eigen::Index j = 0; j < w.size(); ++j) w.data()[j] = T(dist(rng));
    dense_b().setZero();
  }

  // Parameter views. Conv weights are (filters, in_ch*kernel) with tap j at
  // columns [j*in_ch, (j+1)*in_ch); dense weights are (classes, filters).
  Eigen::Map<Mat> conv_w(std::size_t b) {
    const auto& blk = layout_.blocks[b];
    return {theta_.data() + blk.w, Eigen::Index(cfg_.filters),
            Eigen::Index(blk.in_ch * cfg_.kernel_size)};
  }
  Eigen::Map<const Mat> conv_w(std::size_t b) const {
    const auto& blk = layout_.blocks[b];
    return {theta_.data() + blk.w, Eigen::Index(cfg_.filters),
            Eigen::Index(blk.in_ch * cfg_.kernel_size)};
  }
  Eigen::Map<Vec> conv_b(std::size_t b) {
    return {theta_.data() + layout_.blocks[b].bias, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<const Vec> conv_b(std::size_t b) const {
    return {theta_.data() + layout_.blocks[b].bias, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<Vec> gamma(std::size_t b) {
    return {theta_.data() + layout_.blocks[b].gamma, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<const Vec> gamma(std::size_t b) const {
    return {theta_.data() + layout_.blocks[b].gamma, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<Vec> beta(std::size_t b) {
    return {theta_.data() + layout_.blocks[b].beta, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<const Vec> beta(std::size_t b) const {
    return {theta_.data() + layout_.blocks[b].beta, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<Vec> run_mean(std::size_t b) {
    return {running_.data() + b * 2 * cfg_.filters, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<const Vec> run_mean(std::size_t b) const {
    return {running_.data() + b * 2 * cfg_.filters, Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<Vec> run_var(std::size_t b) {
    return {running_.data() + b * 2 * cfg_.filters + cfg_.filters,
            Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<const Vec> run_var(std::size_t b) const {
    return {running_.data() + b * 2 * cfg_.filters + cfg_.filters,
            Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<Mat> dense_w() {
    return {theta_.data() + layout_.dense_w, Eigen::Index(cfg_.classes),
            Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<const Mat> dense_w() const {
    return {theta_.data() + layout_.dense_w, Eigen::Index(cfg_.classes),
            Eigen::Index(cfg_.filters)};
  }
  Eigen::Map<Vec> dense_b() {
    return {theta_.data() + layout_.dense_b, Eigen::Index(cfg_.classes)};
  }
  Eigen::Map<const Vec> dense_b() const {
    return {theta_.data() + layout_.dense_b, Eigen::Index(cfg_.classes)};
  }

  /// Same-length conv: out column t gathers input columns t-pad .. t-pad+k-1
  /// (zero outside), done as one GEMM per kernel tap.
  template <typename WMat>
  void conv_forward(const WMat& w, const Vec& bias, const Mat& x,
                    Mat& y) const {
    const Eigen::Index len = x.cols();
    const Eigen::Index in_ch = x.rows();
    const Eigen::Index k = Eigen::Index(cfg_.kernel_size);
    const Eigen::Index pad = (k - 1) / 2;
    y.resize(bias.size(), len);
    y.colwise() = bias;
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index shift = j - pad;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
      const Eigen::Index t1 = std::min<Eigen::Index>(len, len - shift);
      if (t1 <= t0) continue;
      y.middleCols(t0, t1 - t0).noalias() +=
          w.middleCols(j * in_ch, in_ch) * x.middleCols(t0 + shift, t1 - t0);
    }
  }

  /// Batch-norm scale/shift folded for inference: y = a*z + c per filter.
  void eval_bn_coeffs(std::size_t b, Vec& a, Vec& c) const {
    a = (gamma(b).array() / (run_var(b).array() + T(kBnEps)).sqrt()).matrix();
    c = (beta(b).array() - run_mean(b).array() * a.array()).matrix();
  }

  /// Inference forward for one sample (channels x length). Uses running
  /// batch-norm statistics; returns class probabilities.
  Vec forward_eval(const Mat& x) const {
    check_input(x);
    Mat act = x, z;
    Vec a, c;
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b) {
      conv_forward(conv_w(b), Vec(conv_b(b)), act, z);
      eval_bn_coeffs(b, a, c);
      act = ((z.array().colwise() * a.array()).colwise() + c.array())
                .max(T(0))
                .matrix();
    }
    const Vec pooled = act.rowwise().mean();
    Vec logits = dense_w() * pooled + dense_b();
    return softmax(logits);
  }

  static Vec softmax(const Vec& logits) {
    const T m = logits.maxCoeff();
    const Vec e = (logits.array() - m).exp().matrix();
    return e / e.sum();
  }

  struct BatchCache {
    std::vector<std::vector<Mat>> inputs;  // per block, per sample
    std::vector<std::vector<Mat>> xhat;    // per block, per sample
    std::vector<Vec> inv_std;              // per block
    std::vector<Mat> last_act;             // per sample, after final block
    Mat pooled;                            // filters x batch
    Mat probs;                             // classes x batch
    T min_pre_abs = T(0);  // smallest |pre-ReLU activation| seen
  };

  /// Training-mode forward over a batch; returns mean cross-entropy against
  /// the target distributions (classes x batch). Batch statistics are
  /// reduced in sample order so repeated runs are bitwise identical.
  T forward_train(const std::vector<Mat>& xs, const Mat& targets,
                  BatchCache& cache, bool update_running) {
    const std::size_t bsz = xs.size();
    if (bsz == 0) throw InvalidArgument("forward_train: empty batch");
    for (const auto& x : xs) check_input(x);
    if (targets.rows() != Eigen::Index(cfg_.classes) ||
        targets.cols() != Eigen::Index(bsz))
      throw ShapeError("forward_train: targets shape mismatch");

    const Eigen::Index len = xs.front().cols();
    const T m_count = T(double(bsz) * double(len));

    cache.inputs.assign(cfg_.conv_blocks, {});
    cache.xhat.assign(cfg_.conv_blocks, {});
    cache.inv_std.assign(cfg_.conv_blocks, Vec());
    cache.last_act.resize(bsz);
    cache.min_pre_abs = std::numeric_limits<T>::infinity();

    std::vector<Mat> act(xs.begin(), xs.end());
    Mat z;
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b) {
      cache.inputs[b] = std::move(act);
      act.clear();
      auto& xhat = cache.xhat[b];
      xhat.resize(bsz);

      Vec sum = Vec::Zero(Eigen::Index(cfg_.filters));
      Vec sumsq = Vec::Zero(Eigen::Index(cfg_.filters));
      for (std::size_t i = 0; i < bsz; ++i) {
        conv_forward(conv_w(b), Vec(conv_b(b)), cache.inputs[b][i], z);
        xhat[i] = z;  // holds raw conv output until stats are ready
        sum += z.rowwise().sum();
        sumsq += z.array().square().matrix().rowwise().sum();
      }
      const Vec mean = sum / m_count;
      Vec var = sumsq / m_count - mean.array().square().matrix();
      var = var.array().max(T(0)).matrix();
      cache.inv_std[b] = (var.array() + T(kBnEps)).rsqrt().matrix();

      if (update_running) {
        run_mean(b) = (T(1) - T(kBnMomentum)) * run_mean(b) +
                      T(kBnMomentum) * mean;
        run_var(b) = (T(1) - T(kBnMomentum)) * run_var(b) +
                     T(kBnMomentum) * var;
      }

      act.resize(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        xhat[i] = ((xhat[i].colwise() - mean).array().colwise() *
                   cache.inv_std[b].array())
                      .matrix();
        const Mat pre =
            ((xhat[i].array().colwise() * gamma(b).array()).colwise() +
             beta(b).array())
                .matrix();
        cache.min_pre_abs =
            std::min(cache.min_pre_abs, pre.array().abs().minCoeff());
        act[i] = pre.array().max(T(0)).matrix();
      }
    }

    cache.last_act = act;
    cache.pooled.resize(Eigen::Index(cfg_.filters), Eigen::Index(bsz));
    for (std::size_t i = 0; i < bsz; ++i)
      cache.pooled.col(i) = act[i].rowwise().mean();

    cache.probs.resize(Eigen::Index(cfg_.classes), Eigen::Index(bsz));
    T loss = T(0);
    for (std::size_t i = 0; i < bsz; ++i) {
      const Vec logits =
          dense_w() * cache.pooled.col(Eigen::Index(i)) + dense_b();
      const T mx = logits.maxCoeff();
      const Vec shifted = (logits.array() - mx).matrix();
      const T lse = std::log(shifted.array().exp().sum());
      cache.probs.col(Eigen::Index(i)) =
          (shifted.array() - lse).exp().matrix();
      loss -=
          targets.col(Eigen::Index(i)).dot((shifted.array() - lse).matrix());
    }
    return loss / T(bsz);
  }

  /// Gradient of the mean cross-entropy w.r.t. every parameter, laid out
  /// like the flat parameter vector. Reductions run in sample order.
  void backward(const Mat& targets, const BatchCache& cache,
                std::vector<T>& grad) const {
    const std::size_t bsz = cache.last_act.size();
    const Eigen::Index len = cache.last_act.front().cols();
    grad.assign(layout_.total, T(0));

    Eigen::Map<Mat> d_dense_w(grad.data() + layout_.dense_w,
                              Eigen::Index(cfg_.classes),
                              Eigen::Index(cfg_.filters));
    Eigen::Map<Vec> d_dense_b(grad.data() + layout_.dense_b,
                              Eigen::Index(cfg_.classes));

    const T inv_b = T(1) / T(bsz);
    Mat dlogits = (cache.probs - targets) * inv_b;  // classes x batch
    d_dense_w.noalias() = dlogits * cache.pooled.transpose();
    d_dense_b = dlogits.rowwise().sum();
    Mat dpooled = dense_w().transpose() * dlogits;  // filters x batch

    // Pooling spreads each sample's gradient evenly over time.
    std::vector<Mat> dact(bsz);
    const T inv_len = T(1) / T(len);
    for (std::size_t i = 0; i < bsz; ++i)
      dact[i] = (dpooled.col(Eigen::Index(i)) * inv_len)
                    .replicate(1, len);

    const T m_count = T(double(bsz) * double(len));
    Mat dz;
    for (std::size_t b = cfg_.conv_blocks; b-- > 0;) {
      Eigen::Map<Mat> d_w(grad.data() + layout_.blocks[b].w,
                          Eigen::Index(cfg_.filters),
                          Eigen::Index(layout_.blocks[b].in_ch *
                                       cfg_.kernel_size));
      Eigen::Map<Vec> d_b(grad.data() + layout_.blocks[b].bias,
                          Eigen::Index(cfg_.filters));
      Eigen::Map<Vec> d_gamma(grad.data() + layout_.blocks[b].gamma,
                              Eigen::Index(cfg_.filters));
      Eigen::Map<Vec> d_beta(grad.data() + layout_.blocks[b].beta,
                             Eigen::Index(cfg_.filters));

      // ReLU mask, then the three batch-norm reductions.
      Vec s1 = Vec::Zero(Eigen::Index(cfg_.filters));
      Vec s2 = Vec::Zero(Eigen::Index(cfg_.filters));
      for (std::size_t i = 0; i < bsz; ++i) {
        const auto& xh = cache.xhat[b][i];
        const Mat pre = ((xh.array().colwise() * gamma(b).array()).colwise() +
                         beta(b).array())
                            .matrix();
        dact[i] = (pre.array() > T(0))
                      .select(dact[i], Mat::Zero(xh.rows(), xh.cols()));
        d_beta += dact[i].rowwise().sum();
        d_gamma += (dact[i].array() * xh.array()).matrix().rowwise().sum();
      }
      for (std::size_t i = 0; i < bsz; ++i) {
        const Mat dxhat =
            (dact[i].array().colwise() * gamma(b).array()).matrix();
        s1 += dxhat.rowwise().sum();
        s2 += (dxhat.array() * cache.xhat[b][i].array())
                  .matrix()
                  .rowwise()
                  .sum();
      }

      const Eigen::Index k = Eigen::Index(cfg_.kernel_size);
      const Eigen::Index pad = (k - 1) / 2;
      const Eigen::Index in_ch = Eigen::Index(layout_.blocks[b].in_ch);
      const Vec inv_std_scaled = cache.inv_std[b] / m_count;
      const bool need_dx = b > 0;
      for (std::size_t i = 0; i < bsz; ++i) {
        const Mat dxhat =
            (dact[i].array().colwise() * gamma(b).array()).matrix();
        dz = (dxhat * m_count).colwise() - s1;
        dz -= (cache.xhat[b][i].array().colwise() * s2.array()).matrix();
        dz = (dz.array().colwise() * inv_std_scaled.array()).matrix();

        d_b += dz.rowwise().sum();
        const Mat& x_in = cache.inputs[b][i];
        for (Eigen::Index j = 0; j < k; ++j) {
          const Eigen::Index shift = j - pad;
          const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
          const Eigen::Index t1 = std::min<Eigen::Index>(len, len - shift);
          if (t1 <= t0) continue;
          d_w.middleCols(j * in_ch, in_ch).noalias() +=
              dz.middleCols(t0, t1 - t0) *
              x_in.middleCols(t0 + shift, t1 - t0).transpose();
        }
        if (need_dx) {
          Mat dx = Mat::Zero(in_ch, len);
          for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::Index shift = j - pad;
            const Eigen::Index t0 = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index t1 = std::min<Eigen::Index>(len, len - shift);
            if (t1 <= t0) continue;
            dx.middleCols(t0 + shift, t1 - t0).noalias() +=
                conv_w(b).middleCols(j * in_ch, in_ch).transpose() *
                dz.middleCols(t0, t1 - t0);
          }
          dact[i] = std::move(dx);
        }
      }
    }
  }

 private:
  void check_input(const Mat& x) const {
    if (x.rows() != Eigen::Index(cfg_.in_channels) ||
        x.cols() != Eigen::Index(cfg_.input_len))
      throw ShapeError("Net: input is " + std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()) + ", expected " +
                       std::to_string(cfg_.in_channels) + "x" +
                       std::to_string(cfg_.input_len));
  }

  ModelConfig cfg_;
  ParamLayout layout_;
  std::vector<T> theta_;
  std::vector<T> running_;
};

/// Maps a feature tensor to a (channels x length) Eigen view. Row-major
/// (length, channels) storage is exactly column-major (channels, length).
inline Eigen::Map<const Eigen::MatrixXf> tensor_view(const FeatureTensor& t) {
  return {t.data.data(), Eigen::Index(kChannels), Eigen::Index(t.length())};
}

}  // namespace detail

/// Trained classifier plus everything inference needs: the normalization
/// statistics and the class map travel with the weights.
struct ModelBundle {
  ModelConfig config;
  detail::Net<float> net;
  NormStats norm_stats;
  std::vector<std::string> class_map{kLabelNames.begin(), kLabelNames.end()};
  DatasetMeta data_meta;

  explicit ModelBundle(const ModelConfig& cfg) : config(cfg), net(cfg) {}
};

/// Class probabilities for a batch of feature tensors (inference mode).
inline std::vector<std::vector<float>> forward(
    const ModelBundle& model, const std::vector<FeatureTensor>& batch) {
  std::vector<std::vector<float>> out;
  out.reserve(batch.size());
  for (const auto& t : batch) {
    if (t.length() != model.config.input_len)
      throw ShapeError("forward: tensor length " + std::to_string(t.length()) +
                       ", model expects " +
                       std::to_string(model.config.input_len));
    const Eigen::VectorXf p =
        model.net.forward_eval(detail::tensor_view(t));
    out.emplace_back(p.data(), p.data() + p.size());
  }
  return out;
}

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t updates_per_epoch = 0;
  std::size_t total_updates = 0;

  void save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("save_csv: cannot open " + path.string());
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char buf[160];
    for (const auto& e : epochs) {
      std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g", e.epoch,
                    e.train_loss, e.train_acc, e.val_loss, e.val_acc);
      out << buf << '\n';
    }
    if (!out) throw IoError("save_csv: write failure on " + path.string());
  }
};

struct TrainResult {
  ModelBundle model;
  TrainHistory history;
};

namespace detail {

inline void validate_dataset_shapes(const LabeledDataset& ds, const char* who,
                                    const ModelConfig& cfg) {
  for (const auto& t : ds.tensors)
    if (t.length() != cfg.input_len)
      throw InvalidArgument(std::string(who) + ": tensor length " +
                            std::to_string(t.length()) +
                            " does not match config input_len " +
                            std::to_string(cfg.input_len));
  for (Label l : ds.labels)
    if (std::size_t(l) >= cfg.classes)
      throw InvalidArgument(std::string(who) +
                            ": label code exceeds config.classes");
}

struct EvalPass {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline EvalPass eval_on(const Net<float>& net, const LabeledDataset& ds) {
  if (ds.empty()) return {std::nan(""), std::nan("")};
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Eigen::VectorXf p = net.forward_eval(tensor_view(ds.tensors[i]));
    const std::size_t want = std::size_t(ds.labels[i]);
    loss -= std::log(std::max(double(p[Eigen::Index(want)]), 1e-30));
    Eigen::Index am = 0;
    for (Eigen::Index c = 1; c < p.size(); ++c)
      if (p[c] > p[am]) am = c;
    if (std::size_t(am) == want) ++correct;
  }
  return {loss / double(ds.size()), double(correct) / double(ds.size())};
}

}  // namespace detail

/// Trains the CNN with Adam on shuffled mini-batches, dropping the final
/// partial batch each epoch. Deterministic for a fixed (seed, dataset,
/// config) on a given toolchain: every reduction runs in a fixed order, so
/// repeated runs produce bitwise-identical weights and histories.
inline TrainResult cnn_train(const LabeledDataset& train,
                             const LabeledDataset& val,
                             const ModelConfig& config) {
  config.validate();
  if (train.empty()) throw InvalidArgument("cnn_train: empty training set");
  detail::validate_dataset_shapes(train, "cnn_train(train)", config);
  detail::validate_dataset_shapes(val, "cnn_train(val)", config);
  const std::size_t updates_per_epoch = train.size() / config.batch_size;
  if (updates_per_epoch == 0)
    throw InvalidArgument("cnn_train: training set smaller than one batch (" +
                          std::to_string(train.size()) + " < " +
                          std::to_string(config.batch_size) + ")");

  TrainResult result{ModelBundle(config), {}};
  auto& net = result.model.net;
  net.init_params(config.seed);
  result.model.norm_stats = train.meta.stats.value_or(NormStats{
      {0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}});
  result.model.class_map = train.meta.classes;
  result.model.data_meta = train.meta;

  // Adam state.
  std::vector<float> m(net.params().size(), 0.0f);
  std::vector<float> v(net.params().size(), 0.0f);
  std::vector<float> grad;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 shuffle_rng(config.seed);

  detail::Net<float>::BatchCache cache;
  std::vector<Eigen::MatrixXf> batch_x(config.batch_size);
  Eigen::MatrixXf targets(Eigen::Index(config.classes),
                          Eigen::Index(config.batch_size));

  result.history.updates_per_epoch = updates_per_epoch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;

    for (std::size_t u = 0; u < updates_per_epoch; ++u) {
      targets.setZero();
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        const std::size_t idx = order[u * config.batch_size + i];
        batch_x[i] = detail::tensor_view(train.tensors[idx]);
        targets(Eigen::Index(std::size_t(train.labels[idx])),
                Eigen::Index(i)) = 1.0f;
      }
      const float loss = net.forward_train(batch_x, targets, cache, true);
      epoch_loss += loss;
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        Eigen::Index am = 0;
        cache.probs.col(Eigen::Index(i)).maxCoeff(&am);
        if (targets(am, Eigen::Index(i)) > 0.5f) ++epoch_correct;
      }
      net.backward(targets, cache, grad);

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, double(step));
      const double bc2 = 1.0 - std::pow(beta2, double(step));
      auto& theta = net.params();
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = float(beta1 * m[i] + (1.0 - beta1) * grad[i]);
        v[i] = float(beta2 * v[i] + (1.0 - beta2) * double(grad[i]) * grad[i]);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= float(config.learning_rate * mhat /
                          (std::sqrt(vhat) + eps));
      }
    }

    const auto val_pass = detail::eval_on(net, val);
    result.history.epochs.push_back(
        {epoch, epoch_loss / double(updates_per_epoch),
         double(epoch_correct) /
             double(updates_per_epoch * config.batch_size),
         val_pass.loss, val_pass.accuracy});
  }
  result.history.total_updates = step;
  return result;
}

struct EvalReport {
  double accuracy = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
  double latency_mean_ms = 0;
  double latency_std_ms = 0;
  std::vector<std::size_t> absent_classes;  // no test items of this class
};

namespace detail {

/// Metrics from a confusion matrix; classes with no test items contribute 0
/// to the macro averages.
inline void metrics_from_confusion(EvalReport& r) {
  const std::size_t n = r.confusion.size();
  std::size_t total = 0, diag = 0;
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t p = 0; p < n; ++p) {
      total += r.confusion[t][p];
      if (t == p) diag += r.confusion[t][p];
    }
  r.accuracy = total ? double(diag) / double(total) : 0.0;

  double psum = 0, rsum = 0, fsum = 0;
  r.absent_classes.clear();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row += r.confusion[c][j];
      col += r.confusion[j][c];
    }
    if (row == 0) r.absent_classes.push_back(c);
    const double prec = col ? double(r.confusion[c][c]) / double(col) : 0.0;
    const double rec = row ? double(r.confusion[c][c]) / double(row) : 0.0;
    const double f1 =
        prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    psum += prec;
    rsum += rec;
    fsum += f1;
  }
  r.macro_precision = psum / double(n);
  r.macro_recall = rsum / double(n);
  r.macro_f1 = fsum / double(n);
}

}  // namespace detail

/// Scores every test item (partial batches included), timing each forward
/// pass. Argmax ties resolve to the lowest class code.
inline EvalReport cnn_test(const ModelBundle& model,
                           const LabeledDataset& test) {
  detail::validate_dataset_shapes(test, "cnn_test", model.config);
  EvalReport r;
  r.confusion.assign(model.config.classes,
                     std::vector<std::size_t>(model.config.classes, 0));
  std::vector<double> lat_ms;
  lat_ms.reserve(test.size());

  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::VectorXf p =
        model.net.forward_eval(detail::tensor_view(test.tensors[i]));
    const auto t1 = std::chrono::steady_clock::now();
    lat_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());

    Eigen::Index am = 0;
    for (Eigen::Index c = 1; c < p.size(); ++c)
      if (p[c] > p[am]) am = c;
    ++r.confusion[std::size_t(test.labels[i])][std::size_t(am)];
  }
  detail::metrics_from_confusion(r);

  if (!lat_ms.empty()) {
    double sum = 0;
    for (double x : lat_ms) sum += x;
    r.latency_mean_ms = sum / double(lat_ms.size());
    double sq = 0;
    for (double x : lat_ms) sq += (x - r.latency_mean_ms) * (x - r.latency_mean_ms);
    r.latency_std_ms = lat_ms.size() > 1
                           ? std::sqrt(sq / double(lat_ms.size() - 1))
                           : 0.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Model serialization: magic "LIQM", version u16 LE, u32 LE header length,
// JSON header (config, norm stats, class map, dataset meta, tensor table),
// then raw float32 LE tensors in table order.
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kModelMagic[4] = {'L', 'I', 'Q', 'M'};
constexpr std::uint16_t kModelVersion = 1;

struct TensorDecl {
  std::string name;
  std::vector<std::size_t> dims;
  const float* data;  // save side
  float* dst;         // load side
};

inline std::vector<TensorDecl> model_tensor_table(Net<float>& net) {
  const auto& cfg = net.config();
  const auto& lay = net.layout();
  auto* theta = net.params().data();
  auto* running = net.running_stats().data();
  std::vector<TensorDecl> t;
  for (std::size_t b = 0; b < cfg.conv_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    const auto& blk = lay.blocks[b];
    t.push_back({p + "conv_w",
                 {cfg.filters, cfg.kernel_size, blk.in_ch},
                 theta + blk.w, theta + blk.w});
    t.push_back({p + "conv_b", {cfg.filters}, theta + blk.bias,
                 theta + blk.bias});
    t.push_back({p + "bn_gamma", {cfg.filters}, theta + blk.gamma,
                 theta + blk.gamma});
    t.push_back({p + "bn_beta", {cfg.filters}, theta + blk.beta,
                 theta + blk.beta});
    float* rm = running + b * 2 * cfg.filters;
    t.push_back({p + "bn_running_mean", {cfg.filters}, rm, rm});
    t.push_back({p + "bn_running_var", {cfg.filters}, rm + cfg.filters,
                 rm + cfg.filters});
  }
  t.push_back({"dense_w", {cfg.filters, cfg.classes},
               theta + lay.dense_w, theta + lay.dense_w});
  t.push_back({"dense_b", {cfg.classes}, theta + lay.dense_b,
               theta + lay.dense_b});
  return t;
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"input_len", c.input_len},     {"in_channels", c.in_channels},
          {"conv_blocks", c.conv_blocks}, {"filters", c.filters},
          {"kernel_size", c.kernel_size}, {"classes", c.classes},
          {"batch_size", c.batch_size},   {"epochs", c.epochs},
          {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_len = j.at("input_len").get<std::size_t>();
  c.in_channels = j.at("in_channels").get<std::size_t>();
  c.conv_blocks = j.at("conv_blocks").get<std::size_t>();
  c.filters = j.at("filters").get<std::size_t>();
  c.kernel_size = j.at("kernel_size").get<std::size_t>();
  c.classes = j.at("classes").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace detail

inline void save_model(const ModelBundle& model,
                       const std::filesystem::path& path) {
  auto& net = const_cast<detail::Net<float>&>(model.net);
  const auto table = detail::model_tensor_table(net);

  nlohmann::json header;
  header["config"] = detail::config_to_json(model.config);
  header["norm_stats"] = detail::norm_stats_to_json(model.norm_stats);
  header["classes"] = model.class_map;
  header["data"] = detail::meta_to_json(model.data_meta);
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& t : table)
    tensors.push_back({{"name", t.name}, {"dims", t.dims}});
  const std::string hdr = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_model: cannot open " + path.string());
  out.write(detail::kModelMagic, 4);
  const std::uint16_t ver = detail::kModelVersion;
  unsigned char u16[2] = {static_cast<unsigned char>(ver & 0xff),
                          static_cast<unsigned char>(ver >> 8)};
  out.write(reinterpret_cast<const char*>(u16), 2);
  const std::uint32_t hlen = static_cast<std::uint32_t>(hdr.size());
  unsigned char u32[4] = {static_cast<unsigned char>(hlen & 0xff),
                          static_cast<unsigned char>((hlen >> 8) & 0xff),
                          static_cast<unsigned char>((hlen >> 16) & 0xff),
                          static_cast<unsigned char>((hlen >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(u32), 4);
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));

  std::vector<unsigned char> buf;
  for (const auto& t : table) {
    std::size_t count = 1;
    for (std::size_t d : t.dims) count *= d;
    buf.resize(count * 4);
    for (std::size_t i = 0; i < count; ++i)
      detail::store_f32le(t.data[i], buf.data() + i * 4);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("save_model: write failure on " + path.string());
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_model: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 10) throw FormatError("load_model: truncated file");

  if (std::memcmp(bytes.data(), detail::kModelMagic, 4) != 0)
    throw FormatError("load_model: bad magic, not a model file");
  const std::uint16_t ver = std::uint16_t(bytes[4]) |
                            std::uint16_t(bytes[5]) << 8;
  if (ver != detail::kModelVersion)
    throw FormatError("load_model: expected version " +
                      std::to_string(detail::kModelVersion) + ", found " +
                      std::to_string(ver));
  const std::uint32_t hlen = std::uint32_t(bytes[6]) |
                             std::uint32_t(bytes[7]) << 8 |
                             std::uint32_t(bytes[8]) << 16 |
                             std::uint32_t(bytes[9]) << 24;
  if (bytes.size() < 10 + std::size_t(hlen))
    throw FormatError("load_model: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 10,
                                   bytes.begin() + 10 + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_model: bad header: " + std::string(e.what()));
  }

  ModelConfig cfg;
  try {
    cfg = detail::config_from_json(header.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_model: bad config: " + std::string(e.what()));
  }
  ModelBundle model(cfg);
  try {
    model.norm_stats = detail::norm_stats_from_json(header.at("norm_stats"));
    model.class_map = header.at("classes").get<std::vector<std::string>>();
    model.data_meta = detail::meta_from_json(header.at("data"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_model: bad header fields: " +
                      std::string(e.what()));
  }

  auto table = detail::model_tensor_table(model.net);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != table.size())
    throw FormatError("load_model: tensor table size mismatch");

  std::size_t off = 10 + hlen;
  for (std::size_t ti = 0; ti < table.size(); ++ti) {
    const auto dims = tensors[ti].at("dims").get<std::vector<std::size_t>>();
    if (dims != table[ti].dims)
      throw FormatError("load_model: shape mismatch for " + table[ti].name);
    std::size_t count = 1;
    for (std::size_t d : dims) count *= d;
    if (off + count * 4 > bytes.size())
      throw FormatError("load_model: truncated tensor data at " +
                        table[ti].name);
    for (std::size_t i = 0; i < count; ++i)
      table[ti].dst[i] = detail::load_f32le(bytes.data() + off + i * 4);
    off += count * 4;
  }
  if (off != bytes.size())
    throw FormatError("load_model: trailing bytes after tensor data");
  for (float x : model.net.params())
    if (!std::isfinite(x)) throw DataError("load_model: non-finite weight");
  return model;
}

// ---------------------------------------------------------------------------
// Finite-difference validation of the analytic gradients.
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0;
  std::string worst_param;
  // |central difference - analytic| on one dense-bias component, a smooth
  // direction useful for step-size (truncation order) checks.
  double probe_abs_error = 0;
};

/// Compares analytic gradients with central finite differences for every
/// parameter of a double-precision net built from config (keep it tiny).
/// Central differences only measure the derivative where the loss is smooth
/// across the probe interval, so among a fixed set of candidate batches the
/// one whose pre-ReLU activations sit farthest from zero is used.
inline GradCheckReport gradient_check(const ModelConfig& config,
                                      double h = 1e-3) {
  config.validate();
  detail::Net<double> net(config);
  net.init_params(config.seed);

  const std::size_t bsz = 2;
  std::vector<Eigen::MatrixXd> xs(bsz);
  Eigen::MatrixXd targets(Eigen::Index(config.classes), Eigen::Index(bsz));
  detail::Net<double>::BatchCache cache;

  auto draw_batch = [&](std::uint64_t salt) {
    std::mt19937_64 rng(config.seed + 101 + salt * 7919);
    std::normal_distribution<double> dist(0.0, 1.0);
    targets.setZero();
    for (std::size_t i = 0; i < bsz; ++i) {
      xs[i].resize(Eigen::Index(config.in_channels),
                   Eigen::Index(config.input_len));
      for (Eigen::Index j = 0; j < xs[i].size(); ++j)
        xs[i].data()[j] = dist(rng);
      targets(Eigen::Index(rng() % config.classes), Eigen::Index(i)) = 1.0;
    }
  };

  std::uint64_t best_salt = 0;
  double best_margin = -1.0;
  for (std::uint64_t salt = 0; salt < 200; ++salt) {
    draw_batch(salt);
    net.forward_train(xs, targets, cache, false);
    if (cache.min_pre_abs > best_margin) {
      best_margin = cache.min_pre_abs;
      best_salt = salt;
    }
  }
  draw_batch(best_salt);

  net.forward_train(xs, targets, cache, false);
  std::vector<double> grad;
  net.backward(targets, cache, grad);

  const auto& lay = net.layout();
  auto param_name = [&](std::size_t i) -> std::string {
    for (std::size_t b = 0; b < lay.blocks.size(); ++b) {
      const auto& blk = lay.blocks[b];
      const std::string p = "block" + std::to_string(b) + ".";
      if (i >= blk.w && i < blk.bias)
        return p + "conv_w[" + std::to_string(i - blk.w) + "]";
      if (i >= blk.bias && i < blk.gamma)
        return p + "conv_b[" + std::to_string(i - blk.bias) + "]";
      if (i >= blk.gamma && i < blk.beta)
        return p + "bn_gamma[" + std::to_string(i - blk.gamma) + "]";
      if (i >= blk.beta && i < blk.beta + config.filters)
        return p + "bn_beta[" + std::to_string(i - blk.beta) + "]";
    }
    if (i >= lay.dense_w && i < lay.dense_b)
      return "dense_w[" + std::to_string(i - lay.dense_w) + "]";
    return "dense_b[" + std::to_string(i - lay.dense_b) + "]";
  };

  GradCheckReport report;
  auto& theta = net.params();
  const std::size_t probe = net.layout().dense_b;  // dense_b[0]
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double lp = net.forward_train(xs, targets, cache, false);
    theta[i] = saved - h;
    const double lm = net.forward_train(xs, targets, cache, false);
    theta[i] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    const double denom = std::max(std::abs(fd) + std::abs(grad[i]), 1e-8);
    const double rel = std::abs(fd - grad[i]) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = param_name(i);
    }
    if (i == probe) report.probe_abs_error = std::abs(fd - grad[i]);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Streaming forward: feeds feature columns through the conv stack as they
// arrive, so most of the inference work is already done when the last
// sample of a window lands.
// ---------------------------------------------------------------------------

/// Incremental inference-mode forward. Push normalized feature columns in
/// any chunking; finish() returns the same probabilities as forward_eval on
/// the concatenation (up to float reassociation).
class StreamingForward {
 public:
  explicit StreamingForward(const ModelBundle& model)
      : model_(&model), cfg_(model.config) {
    const Eigen::Index k = Eigen::Index(cfg_.kernel_size);
    layers_.resize(cfg_.conv_blocks);
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b) {
      auto& l = layers_[b];
      l.in_ch = Eigen::Index(b == 0 ? cfg_.in_channels : cfg_.filters);
      l.carry = Eigen::MatrixXf::Zero(l.in_ch, k - 1);
      l.received = 0;
      l.emitted = 0;
      Eigen::VectorXf a, c;
      model.net.eval_bn_coeffs(b, a, c);
      l.bn_scale = a;
      l.bn_shift = c;
    }
    pool_sum_ = Eigen::VectorXf::Zero(Eigen::Index(cfg_.filters));
    pooled_cols_ = 0;
  }

  std::size_t columns_pushed() const { return std::size_t(layers_[0].received); }

  /// Feed a chunk of feature columns (channels x n).
  void push(const Eigen::Ref<const Eigen::MatrixXf>& cols) {
    if (cols.rows() != Eigen::Index(cfg_.in_channels))
      throw ShapeError("StreamingForward: channel count mismatch");
    if (std::size_t(layers_[0].received + cols.cols()) > cfg_.input_len)
      throw ShapeError("StreamingForward: more columns than input_len");
    Eigen::MatrixXf block = cols;
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b)
      block = layers_[b].advance(*this, b, block, false);
    absorb(block);
  }

  /// Flush the right zero-padding and produce the class probabilities.
  Eigen::VectorXf finish() {
    if (std::size_t(layers_[0].received) != cfg_.input_len)
      throw ShapeError("StreamingForward: got " +
                       std::to_string(layers_[0].received) +
                       " columns, model expects " +
                       std::to_string(cfg_.input_len));
    Eigen::MatrixXf block(layers_[0].in_ch, 0);
    for (std::size_t b = 0; b < cfg_.conv_blocks; ++b)
      block = layers_[b].advance(*this, b, block, true);
    absorb(block);
    if (pooled_cols_ != Eigen::Index(cfg_.input_len))
      throw ShapeError("StreamingForward: internal column accounting error");
    const Eigen::VectorXf pooled = pool_sum_ / float(pooled_cols_);
    Eigen::VectorXf logits =
        model_->net.dense_w() * pooled + model_->net.dense_b();
    return detail::Net<float>::softmax(logits);
  }

 private:
  struct Layer {
    Eigen::Index in_ch = 0;
    Eigen::MatrixXf carry;  // last kernel-1 input columns (zeros at start)
    Eigen::Index received = 0;
    Eigen::Index emitted = 0;
    Eigen::VectorXf bn_scale, bn_shift;

    // Consumes an input chunk, returns the output columns that became
    // computable. When flushing, pads on the right with zeros.
    Eigen::MatrixXf advance(const StreamingForward& s, std::size_t b,
                            const Eigen::MatrixXf& chunk, bool flush) {
      const Eigen::Index k = Eigen::Index(s.cfg_.kernel_size);
      const Eigen::Index pad_l = (k - 1) / 2;
      const Eigen::Index pad_r = k - 1 - pad_l;
      const Eigen::Index total = Eigen::Index(s.layer_len(b));

      Eigen::Index incoming = chunk.cols();
      Eigen::MatrixXf ext(in_ch, (k - 1) + incoming + (flush ? pad_r : 0));
      ext.leftCols(k - 1) = carry;
      if (incoming > 0) ext.middleCols(k - 1, incoming) = chunk;
      if (flush && pad_r > 0) ext.rightCols(pad_r).setZero();
      received += incoming;

      // Output t needs inputs through t + pad_r; all inputs < received
      // (+ zero padding when flushing) are available.
      const Eigen::Index avail = flush ? total : received - pad_r;
      const Eigen::Index last = std::min(total, std::max<Eigen::Index>(0, avail));
      const Eigen::Index n_out = last - emitted;
      Eigen::MatrixXf out(bn_scale.size(), std::max<Eigen::Index>(n_out, 0));
      if (n_out > 0) {
        // Global input column g lives at ext column g - (received - incoming)
        // + (k - 1); the first one needed is emitted - pad_l.
        const Eigen::Index base = (received - incoming) - (k - 1);
        out.colwise() = Eigen::VectorXf(s.model_->net.conv_b(b));
        const auto w = s.model_->net.conv_w(b);
        for (Eigen::Index j = 0; j < k; ++j) {
          const Eigen::Index g0 = emitted - pad_l + j;
          out.noalias() +=
              w.middleCols(j * in_ch, in_ch) * ext.middleCols(g0 - base, n_out);
        }
        out = ((out.array().colwise() * bn_scale.array()).colwise() +
               bn_shift.array())
                  .max(0.0f)
                  .matrix();
        emitted += n_out;
      }
      if (!flush) {
        const Eigen::Index keep = k - 1;
        Eigen::MatrixXf new_carry = ext.middleCols(incoming, keep);
        carry = std::move(new_carry);
      }
      return out;
    }
  };

  std::size_t layer_len(std::size_t) const { return cfg_.input_len; }

  void absorb(const Eigen::MatrixXf& final_cols) {
    if (final_cols.cols() == 0) return;
    pool_sum_ += final_cols.rowwise().sum();
    pooled_cols_ += final_cols.cols();
  }

  const ModelBundle* model_;
  ModelConfig cfg_;
  std::vector<Layer> layers_;
  Eigen::VectorXf pool_sum_;
  Eigen::Index pooled_cols_;
};

}  // namespace libiq
