#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <libiq/analyzer.hpp>
#include <libiq/classifier.hpp>
#include <libiq/errors.hpp>
#include <libiq/preprocessor.hpp>
#include <libiq/siggen.hpp>

namespace libiq {

/// One wire unit: a 24-byte header (magic `LIQF`, seq u64, timestamp u64,
/// vector_len u32, all little-endian) followed by vector_len interleaved
/// float32 LE I/Q pairs.
struct Frame {
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  IQVector payload;
};

inline constexpr char kFrameMagic[4] = {'L', 'I', 'Q', 'F'};
inline constexpr std::size_t kFrameHeaderBytes = 24;

namespace detail {

inline void store_u32le(std::uint32_t v, unsigned char* p) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline void store_u64le(std::uint64_t v, unsigned char* p) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline std::uint32_t load_u32le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
  return v;
}

inline std::uint64_t load_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> pack_frame(const Frame& f) {
  std::vector<unsigned char> out(kFrameHeaderBytes +
                                 f.payload.size() * detail::kBytesPerSample);
  std::memcpy(out.data(), kFrameMagic, 4);
  detail::store_u64le(f.seq, out.data() + 4);
  detail::store_u64le(f.timestamp_ns, out.data() + 12);
  detail::store_u32le(static_cast<std::uint32_t>(f.payload.size()),
                      out.data() + 20);
  unsigned char* p = out.data() + kFrameHeaderBytes;
  for (const Complex& s : f.payload.samples) {
    detail::store_f32le(s.real(), p);
    detail::store_f32le(s.imag(), p + 4);
    p += 8;
  }
  return out;
}

inline Frame unpack_frame(const unsigned char* data, std::size_t size) {
  if (size < kFrameHeaderBytes)
    throw FormatError("unpack_frame: " + std::to_string(size) +
                      " bytes, header needs " +
                      std::to_string(kFrameHeaderBytes));
  if (std::memcmp(data, kFrameMagic, 4) != 0)
    throw FormatError("unpack_frame: bad magic");
  Frame f;
  f.seq = detail::load_u64le(data + 4);
  f.timestamp_ns = detail::load_u64le(data + 12);
  const std::uint32_t len = detail::load_u32le(data + 20);
  const std::size_t want =
      kFrameHeaderBytes + std::size_t(len) * detail::kBytesPerSample;
  if (size != want)
    throw FormatError("unpack_frame: vector_len " + std::to_string(len) +
                      " implies " + std::to_string(want) + " bytes, got " +
                      std::to_string(size));
  f.payload.samples.resize(len);
  const unsigned char* p = data + kFrameHeaderBytes;
  for (std::uint32_t i = 0; i < len; ++i) {
    f.payload.samples[i] = Complex(detail::load_f32le(p),
                                   detail::load_f32le(p + 4));
    p += 8;
  }
  return f;
}

inline Frame unpack_frame(const std::vector<unsigned char>& bytes) {
  return unpack_frame(bytes.data(), bytes.size());
}

/// Mean and spread of per-prediction latencies after one pass of |z| > 3
/// outlier removal (z-scores use the n-1 sample deviation).
struct LatencyStats {
  std::size_t n = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  std::size_t outliers_removed = 0;
};

inline LatencyStats latency_report(const std::vector<double>& latencies_ms) {
  const std::size_t n0 = latencies_ms.size();
  if (n0 < 2)
    throw InvalidArgument("latency_report: need at least 2 records, got " +
                          std::to_string(n0));
  double sum = 0.0;
  for (double x : latencies_ms) sum += x;
  const double mean0 = sum / double(n0);
  double ss = 0.0;
  for (double x : latencies_ms) ss += (x - mean0) * (x - mean0);
  const double std0 = std::sqrt(ss / double(n0 - 1));

  std::vector<double> kept;
  kept.reserve(n0);
  for (double x : latencies_ms)
    if (std0 <= 0.0 || std::abs(x - mean0) <= 3.0 * std0) kept.push_back(x);

  LatencyStats st;
  st.outliers_removed = n0 - kept.size();
  st.n = kept.size();
  double s2 = 0.0;
  for (double x : kept) s2 += x;
  st.mean_ms = s2 / double(st.n);
  if (st.n >= 2) {
    double d = 0.0;
    for (double x : kept) d += (x - st.mean_ms) * (x - st.mean_ms);
    st.std_ms = std::sqrt(d / double(st.n - 1));
  }
  return st;
}

/// One classified window: the frame range it covers, the winning class, its
/// probability, and receipt-of-last-frame to label-emission latency.
struct ClassifyRecord {
  std::uint64_t first_seq = 0;
  std::uint64_t last_seq = 0;
  Label label = Label::NoRFI;
  float prob = 0.0f;
  double latency_ms = 0.0;
};

inline LatencyStats latency_report(const std::vector<ClassifyRecord>& records) {
  std::vector<double> ms;
  ms.reserve(records.size());
  for (const auto& r : records) ms.push_back(r.latency_ms);
  return latency_report(ms);
}

inline void write_records_csv(std::ostream& os,
                              const std::vector<ClassifyRecord>& records) {
  os << "first_seq,last_seq,label,prob,latency_ms\n";
  char buf[64];
  for (const auto& r : records) {
    os << r.first_seq << ',' << r.last_seq << ',' << label_name(r.label) << ',';
    std::snprintf(buf, sizeof buf, "%.9g", double(r.prob));
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.9g", r.latency_ms);
    os << buf << '\n';
  }
}

inline void write_records_csv(const std::filesystem::path& path,
                              const std::vector<ClassifyRecord>& records) {
  std::ofstream os(path);
  if (!os) throw IoError("write_records_csv: cannot open " + path.string());
  write_records_csv(os, records);
  os.flush();
  if (!os) throw IoError("write_records_csv: write failed on " + path.string());
}

namespace detail {

struct Socket {
  int fd = -1;

  Socket() = default;
  explicit Socket(int f) : fd(f) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd(o.fd) { o.fd = -1; }
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close_now();
      fd = o.fd;
      o.fd = -1;
    }
    return *this;
  }
  ~Socket() { close_now(); }

  void close_now() {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }
  bool valid() const { return fd >= 0; }
};

inline sockaddr_in parse_endpoint(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= endpoint.size())
    throw InvalidArgument("endpoint must be host:port, got '" + endpoint + "'");
  const std::string host = endpoint.substr(0, colon);
  const std::string port_s = endpoint.substr(colon + 1);
  unsigned long port = 0;
  try {
    std::size_t pos = 0;
    port = std::stoul(port_s, &pos);
    if (pos != port_s.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw InvalidArgument("endpoint port '" + port_s + "' is not a number");
  }
  if (port == 0 || port > 65535)
    throw InvalidArgument("endpoint port " + port_s + " out of range");

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw InvalidArgument("endpoint host '" + host +
                          "' is not an IPv4 address");
  return addr;
}

inline void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0)
    throw IoError("fcntl(O_NONBLOCK) failed: " +
                  std::string(std::strerror(errno)));
}

inline void set_nodelay(int fd) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

/// Connects to a TCP endpoint, retrying while the listener comes up.
inline Socket connect_with_retry(const std::string& endpoint, int timeout_ms) {
  const sockaddr_in addr = parse_endpoint(endpoint);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(timeout_ms);
  int last_err = 0;
  do {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid())
      throw IoError("socket() failed: " + std::string(std::strerror(errno)));
    if (::connect(s.fd, reinterpret_cast<const sockaddr*>(&addr),
                  sizeof addr) == 0) {
      set_nodelay(s.fd);
      return s;
    }
    last_err = errno;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  } while (std::chrono::steady_clock::now() < deadline);
  throw IoError("connect to " + endpoint + " failed: " +
                std::string(std::strerror(last_err)));
}

/// Reads exactly n bytes. Returns the byte count delivered before EOF; a
/// short count means the peer closed. Throws IoError on socket errors or
/// when no data arrives for timeout_ms.
inline std::size_t recv_exact(int fd, unsigned char* buf, std::size_t n,
                              int timeout_ms) {
  std::size_t got = 0;
  while (got < n) {
    pollfd p{fd, POLLIN, 0};
    const int pr = ::poll(&p, 1, timeout_ms);
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw IoError("poll failed: " + std::string(std::strerror(errno)));
    }
    if (pr == 0)
      throw IoError("recv timed out after " + std::to_string(timeout_ms) +
                    " ms");
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) return got;
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == ECONNRESET) return got;
      throw IoError("recv failed: " + std::string(std::strerror(errno)));
    }
    got += std::size_t(r);
  }
  return got;
}

inline std::uint64_t steady_now_ns() {
  return std::uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now().time_since_epoch())
                           .count());
}

}  // namespace detail

struct ServeOptions {
  double period_ms = 8.0;
  /// Frame slots to emit before closing; 0 means run until stopped.
  std::uint64_t max_frames = 0;
  /// Optional external stop request, polled once per period.
  const std::atomic<bool>* stop = nullptr;
  /// How long to wait for a consumer before giving up.
  int accept_timeout_ms = 30000;
};

struct ServeReport {
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_dropped = 0;
};

/// Emits one frame per period over a local TCP connection, cycling through
/// the source vectors. Every period consumes one seq number; when the
/// consumer cannot keep up the frame is dropped instead of queued, so the
/// receiver sees a seq gap and the report counts the loss.
inline ServeReport serve(const std::string& endpoint,
                         const std::vector<IQVector>& source,
                         const ServeOptions& opts = {}) {
  if (source.empty()) throw InvalidArgument("serve: empty source");
  const std::size_t vlen = source.front().size();
  if (vlen == 0) throw InvalidArgument("serve: zero-length vectors");
  for (const auto& v : source)
    if (v.size() != vlen)
      throw InvalidArgument("serve: source vectors must share one length");
  if (!(opts.period_ms > 0.0))
    throw InvalidArgument("serve: period_ms must be positive");

  const sockaddr_in addr = detail::parse_endpoint(endpoint);
  detail::Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
  if (!listener.valid())
    throw IoError("socket() failed: " + std::string(std::strerror(errno)));
  const int one = 1;
  ::setsockopt(listener.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listener.fd, reinterpret_cast<const sockaddr*>(&addr),
             sizeof addr) < 0)
    throw IoError("bind " + endpoint + " failed: " +
                  std::string(std::strerror(errno)));
  if (::listen(listener.fd, 1) < 0)
    throw IoError("listen failed: " + std::string(std::strerror(errno)));

  detail::Socket client;
  {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(opts.accept_timeout_ms);
    while (true) {
      if (opts.stop && opts.stop->load()) return {};
      pollfd p{listener.fd, POLLIN, 0};
      const int pr = ::poll(&p, 1, 50);
      if (pr < 0 && errno != EINTR)
        throw IoError("poll on listener failed: " +
                      std::string(std::strerror(errno)));
      if (pr > 0) {
        client = detail::Socket(::accept(listener.fd, nullptr, nullptr));
        if (!client.valid())
          throw IoError("accept failed: " + std::string(std::strerror(errno)));
        break;
      }
      if (std::chrono::steady_clock::now() >= deadline)
        throw IoError("accept timed out after " +
                      std::to_string(opts.accept_timeout_ms) + " ms");
    }
  }
  detail::set_nonblocking(client.fd);
  detail::set_nodelay(client.fd);

  ServeReport report;
  std::vector<unsigned char> tail;  // unsent remainder of the last frame
  std::size_t tail_off = 0;
  bool peer_gone = false;

  const auto flush_tail = [&]() {
    while (tail_off < tail.size()) {
      const ssize_t w = ::send(client.fd, tail.data() + tail_off,
                               tail.size() - tail_off, MSG_NOSIGNAL);
      if (w > 0) {
        tail_off += std::size_t(w);
        continue;
      }
      if (w < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return;
      if (w < 0 && errno == EINTR) continue;
      peer_gone = true;
      return;
    }
    tail.clear();
    tail_off = 0;
  };

  const auto t0 = std::chrono::steady_clock::now();
  const auto period = std::chrono::duration<double, std::milli>(opts.period_ms);
  for (std::uint64_t seq = 0;; ++seq) {
    if (opts.stop && opts.stop->load()) break;
    if (opts.max_frames != 0 && seq >= opts.max_frames) break;
    std::this_thread::sleep_until(
        t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                 period * double(seq)));

    flush_tail();
    if (peer_gone) break;
    if (!tail.empty()) {
      ++report.frames_dropped;
      continue;
    }

    Frame f;
    f.seq = seq;
    f.timestamp_ns = detail::steady_now_ns();
    f.payload = source[seq % source.size()];
    tail = pack_frame(f);
    tail_off = 0;
    flush_tail();
    if (peer_gone) break;
    ++report.frames_sent;
  }

  // Give a live consumer one second to drain the last partial frame.
  const auto drain_deadline =
      std::chrono::steady_clock::now() + std::chrono::seconds(1);
  while (!peer_gone && !tail.empty() &&
         std::chrono::steady_clock::now() < drain_deadline) {
    pollfd p{client.fd, POLLOUT, 0};
    if (::poll(&p, 1, 50) > 0) flush_tail();
  }
  ::shutdown(client.fd, SHUT_WR);
  return report;
}

/// Frequency-domain scene variant: generates the scene once and cycles it.
inline ServeReport serve(const std::string& endpoint, const SceneConfig& scene,
                         const ServeOptions& opts = {}) {
  return serve(endpoint, generate(scene), opts);
}

struct ClassifyStreamOptions {
  /// Detector sliding-window width; 0 takes the model's training value.
  std::size_t detect_window = 0;
  /// Stop after this many records; 0 runs until the producer disconnects.
  std::size_t max_records = 0;
  int connect_timeout_ms = 5000;
  int recv_timeout_ms = 30000;
  /// Called as each record is emitted, in window order.
  std::function<void(const ClassifyRecord&)> on_record;
};

/// Consumes frames from a producer, groups them into non-overlapping windows
/// of k consecutive seqs, and classifies each complete window. Per-frame
/// work (detector, features, normalization, streaming convolution) happens
/// as frames arrive; the reported latency spans receipt of a window's last
/// frame to emission of its label. A seq gap discards the window in
/// progress, and a disconnect mid-window discards the partial window.
inline std::vector<ClassifyRecord> classify_stream(
    const std::string& endpoint, const ModelBundle& model, std::size_t k,
    const ClassifyStreamOptions& opts = {}) {
  if (k == 0) throw InvalidArgument("classify_stream: K must be >= 1");
  const std::size_t out_len = model.data_meta.out_len != 0
                                  ? model.data_meta.out_len
                                  : model.config.input_len / k;
  if (out_len == 0 || out_len * k != model.config.input_len)
    throw ShapeError("classify_stream: model input_len " +
                     std::to_string(model.config.input_len) +
                     " != out_len " + std::to_string(out_len) + " x K " +
                     std::to_string(k));
  const std::size_t detect_window = opts.detect_window != 0
                                        ? opts.detect_window
                                        : model.data_meta.detect_window;
  if (detect_window == 0)
    throw InvalidArgument(
        "classify_stream: detector window unknown; set "
        "ClassifyStreamOptions::detect_window");

  detail::Socket sock =
      detail::connect_with_retry(endpoint, opts.connect_timeout_ms);

  const NormStats& st = model.norm_stats;
  std::vector<ClassifyRecord> records;
  StreamingForward sf(model);
  std::size_t collected = 0;
  std::uint64_t first_seq = 0, expected = 0;
  std::size_t stream_vlen = model.data_meta.vector_len;  // 0 = take from wire

  unsigned char header[kFrameHeaderBytes];
  std::vector<unsigned char> body;
  Eigen::MatrixXf cols = Eigen::MatrixXf::Zero(
      static_cast<Eigen::Index>(kChannels), static_cast<Eigen::Index>(out_len));

  while (opts.max_records == 0 || records.size() < opts.max_records) {
    const std::size_t hr = detail::recv_exact(sock.fd, header,
                                              kFrameHeaderBytes,
                                              opts.recv_timeout_ms);
    if (hr < kFrameHeaderBytes) break;  // producer closed; drop partial window
    if (std::memcmp(header, kFrameMagic, 4) != 0)
      throw FormatError("classify_stream: bad frame magic");
    const std::uint64_t seq = detail::load_u64le(header + 4);
    const std::uint32_t vlen = detail::load_u32le(header + 20);
    if (vlen == 0 || vlen > (1u << 24))
      throw FormatError("classify_stream: implausible vector_len " +
                        std::to_string(vlen));
    if (stream_vlen == 0) stream_vlen = vlen;
    if (vlen != stream_vlen)
      throw ShapeError("classify_stream: frame vector_len " +
                       std::to_string(vlen) + ", expected " +
                       std::to_string(stream_vlen));
    if (out_len > stream_vlen || detect_window > stream_vlen)
      throw ShapeError("classify_stream: vector_len " +
                       std::to_string(stream_vlen) +
                       " shorter than detector window or slice");

    body.resize(std::size_t(vlen) * detail::kBytesPerSample);
    const std::size_t br =
        detail::recv_exact(sock.fd, body.data(), body.size(),
                           opts.recv_timeout_ms);
    if (br < body.size()) break;  // truncated tail at disconnect
    const auto t_recv = std::chrono::steady_clock::now();

    if (collected > 0 && seq != expected) {
      collected = 0;  // gap: never classify across dropped frames
      sf = StreamingForward(model);
    }
    if (collected == 0) first_seq = seq;

    IQVector v;
    v.samples.resize(vlen);
    const unsigned char* p = body.data();
    for (std::uint32_t i = 0; i < vlen; ++i) {
      v.samples[i] = Complex(detail::load_f32le(p), detail::load_f32le(p + 4));
      p += 8;
    }
    const IQVector cut = energy_peak_detector(v, detect_window, out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
      const Complex s = cut.samples[i];
      cols(0, Eigen::Index(i)) = float((s.real() - st.mean[0]) / st.stdev[0]);
      cols(1, Eigen::Index(i)) = float((s.imag() - st.mean[1]) / st.stdev[1]);
      cols(2, Eigen::Index(i)) = float((std::abs(s) - st.mean[2]) / st.stdev[2]);
      cols(3, Eigen::Index(i)) =
          float((detail::phase_of(s) - st.mean[3]) / st.stdev[3]);
    }
    sf.push(cols);
    ++collected;
    expected = seq + 1;

    if (collected == std::size_t(k)) {
      const Eigen::VectorXf probs = sf.finish();
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
      ClassifyRecord rec;
      rec.first_seq = first_seq;
      rec.last_seq = seq;
      rec.label = static_cast<Label>(best);
      rec.prob = probs[best];
      rec.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t_recv)
                           .count();
      if (opts.on_record) opts.on_record(rec);
      records.push_back(rec);
      collected = 0;
      sf = StreamingForward(model);
    }
  }
  return records;
}

}  // namespace libiq
