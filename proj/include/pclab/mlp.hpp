#pragma once

// Dense feedforward Q-network: rectifier hidden layers, linear output,
// semi-gradient updates on the selected action only, and a bit-exact
// little-endian weights file.
//
// Weights file layout:
//   bytes 0-7   "PCLABMLP"
//   u32         format version (1)
//   u32         number of dims n (layers = n - 1)
//   u32 * n     dims
//   per layer   weights (out x in, row-major) then biases (out), f64 each

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pclab {

class MlpError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;

  double& at(int o, int i) { return w[static_cast<std::size_t>(o) * static_cast<std::size_t>(in) + static_cast<std::size_t>(i)]; }
  double at(int o, int i) const { return w[static_cast<std::size_t>(o) * static_cast<std::size_t>(in) + static_cast<std::size_t>(i)]; }
};

struct Sample {
  std::vector<double> state;
  int action = 0;
  double target = 0.0;
};

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

class Mlp {
public:
  Mlp() = default;

  explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw MlpError("an MLP needs at least input and output dims");
    for (int d : dims_)
      if (d <= 0) throw MlpError("layer dims must be positive");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      Layer layer;
      layer.in = dims_[l];
      layer.out = dims_[l + 1];
      layer.w.assign(static_cast<std::size_t>(layer.in) * static_cast<std::size_t>(layer.out), 0.0);
      layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
      layers_.push_back(std::move(layer));
    }
  }

  /// Uniform fan-in initialisation, U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  static Mlp initialised(std::vector<int> dims, std::uint64_t seed) {
    Mlp net(std::move(dims));
    std::mt19937_64 rng(seed);
    for (auto& layer : net.layers_) {
      const double lim = 1.0 / std::sqrt(static_cast<double>(layer.in));
      std::uniform_real_distribution<double> u(-lim, lim);
      for (auto& w : layer.w) w = u(rng);
      for (auto& b : layer.b) b = u(rng);
    }
    return net;
  }

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
  }

  std::vector<double> forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != input_dim())
      throw MlpError("input has " + std::to_string(x.size()) + " values, expected " + std::to_string(input_dim()));
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      a = affine(layers_[l], a);
      if (l + 1 < layers_.size())
        for (auto& v : a) v = v > 0.0 ? v : 0.0;
    }
    return a;
  }

  /// Mean over the batch of 0.5 (y - Q(s, a))^2. Only the chosen action enters.
  double loss(std::span<const Sample> batch) const {
    double s = 0.0;
    for (const auto& smp : batch) {
      const double e = smp.target - forward(smp.state).at(static_cast<std::size_t>(smp.action));
      s += 0.5 * e * e;
    }
    return batch.empty() ? 0.0 : s / static_cast<double>(batch.size());
  }

  /// Gradient of loss() with respect to every parameter, in layer order (weights then biases).
  std::vector<Layer> gradient(std::span<const Sample> batch) const {
    std::vector<Layer> g = zero_like();
    const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    for (const auto& smp : batch) accumulate(smp, scale, g);
    return g;
  }

private:
  friend class Trainer;
  friend void copy_into(const Mlp& src, Mlp& dst);

  static std::vector<double> affine(const Layer& layer, std::span<const double> x) {
    std::vector<double> out(layer.b);
    for (int o = 0; o < layer.out; ++o) {
      double s = out[static_cast<std::size_t>(o)];
      const double* row = &layer.w[static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in)];
      for (int i = 0; i < layer.in; ++i) s += row[i] * x[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(o)] = s;
    }
    return out;
  }

  std::vector<Layer> zero_like() const {
    std::vector<Layer> g = layers_;
    for (auto& l : g) {
      std::fill(l.w.begin(), l.w.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    return g;
  }

  void accumulate(const Sample& smp, double scale, std::vector<Layer>& g) const {
    if (smp.action < 0 || smp.action >= output_dim()) throw MlpError("action index out of range");
    if (!std::isfinite(smp.target)) throw MlpError("non-finite training target");
    if (static_cast<int>(smp.state.size()) != input_dim()) throw MlpError("state dimension mismatch");
    // Forward with cached activations.
    std::vector<std::vector<double>> acts{smp.state};
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto z = affine(layers_[l], acts.back());
      if (l + 1 < layers_.size())
        for (auto& v : z) v = v > 0.0 ? v : 0.0;
      acts.push_back(std::move(z));
    }
    // dL/dQ_a = -(y - Q_a); other outputs carry no error.
    std::vector<double> delta(static_cast<std::size_t>(output_dim()), 0.0);
    delta[static_cast<std::size_t>(smp.action)] = -(smp.target - acts.back()[static_cast<std::size_t>(smp.action)]) * scale;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& layer = layers_[l];
      const auto& input = acts[l];
      auto& gl = g[l];
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        if (d == 0.0) continue;
        gl.b[static_cast<std::size_t>(o)] += d;
        double* row = &gl.w[static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in)];
        for (int i = 0; i < layer.in; ++i) row[i] += d * input[static_cast<std::size_t>(i)];
      }
      if (l == 0) break;
      std::vector<double> prev(static_cast<std::size_t>(layer.in), 0.0);
      for (int o = 0; o < layer.out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        if (d == 0.0) continue;
        for (int i = 0; i < layer.in; ++i) prev[static_cast<std::size_t>(i)] += layer.at(o, i) * d;
      }
      for (int i = 0; i < layer.in; ++i)
        if (input[static_cast<std::size_t>(i)] <= 0.0) prev[static_cast<std::size_t>(i)] = 0.0;
      delta = std::move(prev);
    }
  }

  std::vector<int> dims_;
  std::vector<Layer> layers_;
};

inline void copy_into(const Mlp& src, Mlp& dst) {
  if (src.dims_ != dst.dims_) throw MlpError("copy between networks of different shape");
  dst.layers_ = src.layers_;
}

/// Applies updates to one network. SGD is the plain semi-gradient step
/// theta += lr * (y - Q) * dQ/dtheta averaged over the batch.
class Trainer {
public:
  explicit Trainer(OptimizerConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.learning_rate > 0)) throw MlpError("learning rate must be positive");
  }

  const OptimizerConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return steps_; }

  /// Returns the mean squared error over the batch before the update.
  double train_batch(Mlp& net, std::span<const Sample> batch) {
    if (batch.empty()) return 0.0;
    double mse = 0.0;
    for (const auto& s : batch) {
      if (!std::isfinite(s.target)) throw MlpError("non-finite training target");
      const double e = s.target - net.forward(s.state).at(static_cast<std::size_t>(s.action));
      mse += e * e;
    }
    mse /= static_cast<double>(batch.size());
    const auto g = net.gradient(batch);
    ++steps_;
    if (cfg_.kind == OptimizerKind::sgd) {
      for (std::size_t l = 0; l < g.size(); ++l) {
        auto& layer = net.layers_[l];
        for (std::size_t i = 0; i < layer.w.size(); ++i) layer.w[i] -= cfg_.learning_rate * g[l].w[i];
        for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= cfg_.learning_rate * g[l].b[i];
      }
    } else {
      if (m_.empty()) {
        m_ = net.zero_like();
        v_ = net.zero_like();
      }
      const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
      auto update = [&](std::vector<double>& p, const std::vector<double>& gr, std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * gr[i];
          v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * gr[i] * gr[i];
          p[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
        }
      };
      for (std::size_t l = 0; l < g.size(); ++l) {
        update(net.layers_[l].w, g[l].w, m_[l].w, v_[l].w);
        update(net.layers_[l].b, g[l].b, m_[l].b, v_[l].b);
      }
    }
    for (const auto& layer : net.layers_) {
      for (double w : layer.w)
        if (!std::isfinite(w)) throw MlpError("non-finite parameter after update");
      for (double b : layer.b)
        if (!std::isfinite(b)) throw MlpError("non-finite parameter after update");
    }
    if (!std::isfinite(mse)) throw MlpError("non-finite loss");
    return mse;
  }

private:
  OptimizerConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<Layer> m_, v_;
};

// ---------------------------------------------------------------- weights io

inline constexpr char kWeightsMagic[8] = {'P', 'C', 'L', 'A', 'B', 'M', 'L', 'P'};
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}
  std::size_t offset() const { return off_; }
  bool done() const { return off_ == b_.size(); }

  void need(std::size_t n, const char* what) const {
    if (b_.size() - off_ < n)
      throw MlpError(std::string("weights file truncated while reading ") + what + " at byte offset " + std::to_string(off_));
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[off_ + static_cast<std::size_t>(i)])) << (8 * i);
    off_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[off_ + static_cast<std::size_t>(i)])) << (8 * i);
    off_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    auto s = b_.substr(off_, n);
    off_ += n;
    return s;
  }

private:
  const std::string& b_;
  std::size_t off_ = 0;
};

}  // namespace detail

inline std::string serialize_weights(const Mlp& net) {
  std::string out(kWeightsMagic, sizeof kWeightsMagic);
  detail::put_u32(out, kWeightsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(net.dims().size()));
  for (int d : net.dims()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& l : net.layers()) {
    for (double w : l.w) detail::put_f64(out, w);
    for (double b : l.b) detail::put_f64(out, b);
  }
  return out;
}

inline Mlp deserialize_weights(const std::string& bytes) {
  detail::Reader r(bytes);
  if (r.raw(8, "magic") != std::string(kWeightsMagic, 8)) throw MlpError("weights file has wrong magic at byte offset 0");
  const auto version_at = r.offset();
  if (const auto v = r.u32("version"); v != kWeightsVersion)
    throw MlpError("unsupported weights version " + std::to_string(v) + " at byte offset " + std::to_string(version_at));
  const auto count_at = r.offset();
  const auto n = r.u32("dim count");
  if (n < 2 || n > 64) throw MlpError("implausible dim count " + std::to_string(n) + " at byte offset " + std::to_string(count_at));
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto at = r.offset();
    const auto d = r.u32("dims");
    if (d == 0 || d > (1u << 20)) throw MlpError("invalid layer dim at byte offset " + std::to_string(at));
    dims.push_back(static_cast<int>(d));
  }
  Mlp net(dims);
  for (auto& l : net.layers()) {
    for (auto& w : l.w) w = r.f64("weights");
    for (auto& b : l.b) b = r.f64("biases");
  }
  if (!r.done()) throw MlpError("trailing bytes in weights file at byte offset " + std::to_string(r.offset()));
  return net;
}

inline void save_weights(const Mlp& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MlpError("cannot open " + path + " for writing");
  const auto bytes = serialize_weights(net);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw MlpError("failed writing " + path);
}

inline Mlp load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MlpError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return deserialize_weights(bytes);
  } catch (const MlpError& e) {
    throw MlpError(path + ": " + e.what());
  }
}

}  // namespace pclab
