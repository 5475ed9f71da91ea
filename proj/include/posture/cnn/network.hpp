#pragma once

// Small convolutional regressor: 3x3 same-padded convolutions, ReLU, 2x2
// max-pooling and fully-connected layers. Activations are channel-major
// (C, H, W). Parameters of all layers live in one flat buffer so optimizers
// can treat them as a single vector.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "posture/error.hpp"
#include "posture/random.hpp"

namespace posture::cnn {

enum class LayerKind { conv3x3, relu, maxpool2, dense };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv3x3: return "conv3x3";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv3x3") return LayerKind::conv3x3;
  if (s == "relu") return LayerKind::relu;
  if (s == "maxpool2") return LayerKind::maxpool2;
  if (s == "dense") return LayerKind::dense;
  throw FormatError("unknown layer kind '" + s + "'");
}

struct Shape {
  std::size_t c = 1, h = 1, w = 1;
  [[nodiscard]] std::size_t size() const { return c * h * w; }
  bool operator==(const Shape&) const = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;  // filters for conv3x3, outputs for dense
  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  Shape input{2, 110, 110};
  std::vector<LayerSpec> layers;

  /// 64/32/16-filter convolution stack with pooling, a 128-unit hidden
  /// layer and a linear output per identified parameter.
  static NetworkSpec standard(std::size_t outputs = 7) {
    using K = LayerKind;
    return {{2, 110, 110},
            {{K::conv3x3, 64}, {K::relu, 0}, {K::maxpool2, 0},
             {K::conv3x3, 32}, {K::relu, 0}, {K::maxpool2, 0},
             {K::conv3x3, 16}, {K::relu, 0}, {K::maxpool2, 0},
             {K::dense, 128}, {K::relu, 0},
             {K::dense, outputs}}};
  }

  /// Shape of every activation, input first. Throws on incompatible stacks.
  [[nodiscard]] std::vector<Shape> shapes() const {
    if (input.size() == 0) throw ConfigError("network input shape is empty");
    std::vector<Shape> s{input};
    for (const auto& l : layers) {
      const Shape in = s.back();
      switch (l.kind) {
        case LayerKind::conv3x3:
          if (l.units == 0) throw ConfigError("conv3x3 layer needs >= 1 filter");
          s.push_back({l.units, in.h, in.w});
          break;
        case LayerKind::relu: s.push_back(in); break;
        case LayerKind::maxpool2:
          if (in.h < 2 || in.w < 2) throw ConfigError("maxpool2 on activation smaller than 2x2");
          s.push_back({in.c, in.h / 2, in.w / 2});
          break;
        case LayerKind::dense:
          if (l.units == 0) throw ConfigError("dense layer needs >= 1 unit");
          s.push_back({l.units, 1, 1});
          break;
      }
    }
    return s;
  }

  [[nodiscard]] std::size_t output_size() const { return shapes().back().size(); }

  bool operator==(const NetworkSpec&) const = default;
};

/// Per-sample scratch: activations (and what backward needs) from the last
/// forward pass. One workspace per thread.
template <typename T>
struct Workspace {
  std::vector<std::vector<T>> act;            // act[0] = input, act[l+1] = output of layer l
  std::vector<std::vector<T>> cols;           // im2col buffers of conv layers
  std::vector<std::vector<std::uint32_t>> argmax;  // pooling winners
  std::vector<T> grad_a, grad_b, dcol;
};

template <typename T>
class Network {
public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Network() = default;
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)), shapes_(spec_.shapes()) {
    std::size_t off = 0;
    offsets_.reserve(spec_.layers.size());
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      offsets_.push_back(off);
      off += layer_param_count(l);
    }
    params_.assign(off, T(0));
  }

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
  [[nodiscard]] const std::vector<Shape>& shapes() const { return shapes_; }
  [[nodiscard]] std::span<T> params() { return params_; }
  [[nodiscard]] std::span<const T> params() const { return params_; }
  [[nodiscard]] std::size_t param_count() const { return params_.size(); }
  [[nodiscard]] std::size_t input_size() const { return shapes_.front().size(); }
  [[nodiscard]] std::size_t output_size() const { return shapes_.back().size(); }

  [[nodiscard]] std::size_t layer_param_count(std::size_t l) const {
    const auto& L = spec_.layers[l];
    const Shape in = shapes_[l];
    switch (L.kind) {
      case LayerKind::conv3x3: return L.units * in.c * 9 + L.units;
      case LayerKind::dense: return L.units * in.size() + L.units;
      default: return 0;
    }
  }
  [[nodiscard]] std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

  /// Zero-mean uniform weights scaled by fan-in (He range for layers feeding
  /// a ReLU, LeCun range for the linear output); zero biases.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), T(0));
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      const auto& L = spec_.layers[l];
      if (L.kind != LayerKind::conv3x3 && L.kind != LayerKind::dense) continue;
      const std::size_t fan_in = L.kind == LayerKind::conv3x3 ? shapes_[l].c * 9 : shapes_[l].size();
      const bool last = l + 1 == spec_.layers.size();
      const double a = std::sqrt((last ? 3.0 : 6.0) / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-a, a);
      const std::size_t nw = L.units * fan_in;
      for (std::size_t i = 0; i < nw; ++i) params_[offsets_[l] + i] = static_cast<T>(u(rng));
    }
  }

  void prepare(Workspace<T>& ws) const {
    if (ws.act.size() == shapes_.size()) return;
    ws.act.assign(shapes_.size(), {});
    ws.cols.assign(spec_.layers.size(), {});
    ws.argmax.assign(spec_.layers.size(), {});
    std::size_t biggest = 0, biggest_col = 0;
    for (std::size_t i = 0; i < shapes_.size(); ++i) {
      ws.act[i].assign(shapes_[i].size(), T(0));
      biggest = std::max(biggest, shapes_[i].size());
    }
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      const Shape in = shapes_[l];
      if (spec_.layers[l].kind == LayerKind::conv3x3) {
        ws.cols[l].assign(in.c * 9 * in.h * in.w, T(0));
        biggest_col = std::max(biggest_col, ws.cols[l].size());
      }
      if (spec_.layers[l].kind == LayerKind::maxpool2) ws.argmax[l].assign(shapes_[l + 1].size(), 0);
    }
    ws.grad_a.assign(biggest, T(0));
    ws.grad_b.assign(biggest, T(0));
    ws.dcol.assign(biggest_col, T(0));
  }

  /// Forward pass; the returned view aliases the workspace.
  std::span<const T> forward(std::span<const T> input, Workspace<T>& ws) const {
    if (input.size() != input_size())
      throw FormatError("network input has " + std::to_string(input.size()) + " values, expected " +
                        std::to_string(input_size()));
    prepare(ws);
    std::copy(input.begin(), input.end(), ws.act[0].begin());
    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      const Shape in = shapes_[l], out = shapes_[l + 1];
      const T* x = ws.act[l].data();
      T* y = ws.act[l + 1].data();
      const T* p = params_.data() + offsets_[l];
      switch (spec_.layers[l].kind) {
        case LayerKind::conv3x3: {
          T* col = ws.cols[l].data();
          im2col(x, in, col);
          const std::size_t hw = in.h * in.w, k = in.c * 9;
          Eigen::Map<const Mat> W(p, out.c, k);
          Eigen::Map<const Vec> b(p + out.c * k, out.c);
          Eigen::Map<const Mat> C(col, k, hw);
          Eigen::Map<Mat> Y(y, out.c, hw);
          Y.noalias() = W * C;
          Y.colwise() += b;
          break;
        }
        case LayerKind::relu:
          for (std::size_t i = 0; i < out.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
          break;
        case LayerKind::maxpool2: maxpool_forward(x, in, y, out, ws.argmax[l].data()); break;
        case LayerKind::dense: {
          const std::size_t n_in = in.size();
          Eigen::Map<const Mat> W(p, out.c, n_in);
          Eigen::Map<const Vec> b(p + out.c * n_in, out.c);
          Eigen::Map<const Vec> X(x, n_in);
          Eigen::Map<Vec> Y(y, out.c);
          Y.noalias() = W * X;
          Y += b;
          break;
        }
      }
    }
    return ws.act.back();
  }

  /// Backpropagates `grad_out` (dLoss/dOutput) through the activations left
  /// in `ws` by the matching forward pass and ADDS parameter gradients into
  /// `grad_params` (same layout as params()).
  void backward(Workspace<T>& ws, std::span<const T> grad_out, std::span<T> grad_params) const {
    if (grad_out.size() != output_size()) throw FormatError("backward: gradient has wrong size");
    if (grad_params.size() != params_.size()) throw FormatError("backward: parameter gradient has wrong size");
    prepare(ws);
    T* g = ws.grad_a.data();
    T* gnext = ws.grad_b.data();
    std::copy(grad_out.begin(), grad_out.end(), g);
    for (std::size_t l = spec_.layers.size(); l-- > 0;) {
      const Shape in = shapes_[l], out = shapes_[l + 1];
      const bool need_dx = l > 0;
      const T* x = ws.act[l].data();
      const T* y = ws.act[l + 1].data();
      const T* p = params_.data() + offsets_[l];
      T* gp = grad_params.data() + offsets_[l];
      switch (spec_.layers[l].kind) {
        case LayerKind::conv3x3: {
          const std::size_t hw = in.h * in.w, k = in.c * 9;
          Eigen::Map<const Mat> dY(g, out.c, hw);
          Eigen::Map<const Mat> C(ws.cols[l].data(), k, hw);
          Eigen::Map<Mat> dW(gp, out.c, k);
          Eigen::Map<Vec> db(gp + out.c * k, out.c);
          dW.noalias() += dY * C.transpose();
          db += dY.rowwise().sum();
          if (need_dx) {
            Eigen::Map<const Mat> W(p, out.c, k);
            Eigen::Map<Mat> dC(ws.dcol.data(), k, hw);
            dC.noalias() = W.transpose() * dY;
            col2im(ws.dcol.data(), in, gnext);
          }
          break;
        }
        case LayerKind::relu:
          for (std::size_t i = 0; i < out.size(); ++i) gnext[i] = y[i] > T(0) ? g[i] : T(0);
          break;
        case LayerKind::maxpool2: {
          std::fill(gnext, gnext + in.size(), T(0));
          const auto* am = ws.argmax[l].data();
          for (std::size_t i = 0; i < out.size(); ++i) gnext[am[i]] += g[i];
          break;
        }
        case LayerKind::dense: {
          const std::size_t n_in = in.size();
          Eigen::Map<const Vec> dY(g, out.c);
          Eigen::Map<const Vec> X(x, n_in);
          Eigen::Map<Mat> dW(gp, out.c, n_in);
          Eigen::Map<Vec> db(gp + out.c * n_in, out.c);
          dW.noalias() += dY * X.transpose();
          db += dY;
          if (need_dx) {
            Eigen::Map<const Mat> W(p, out.c, n_in);
            Eigen::Map<Vec> dX(gnext, n_in);
            dX.noalias() = W.transpose() * dY;
          }
          break;
        }
      }
      std::swap(g, gnext);
    }
  }

  /// Forward pass without keeping the workspace.
  [[nodiscard]] std::vector<T> predict(std::span<const T> input) const {
    Workspace<T> ws;
    const auto out = forward(input, ws);
    return {out.begin(), out.end()};
  }

private:
  static void im2col(const T* x, Shape in, T* col) {
    const std::size_t H = in.h, W = in.w, hw = H * W;
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx) {
          T* dst = col + ((c * 3 + ky) * 3 + kx) * hw;
          for (std::size_t yo = 0; yo < H; ++yo) {
            T* d = dst + yo * W;
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(yo + ky) - 1;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) {
              std::fill(d, d + W, T(0));
              continue;
            }
            const T* s = x + (c * H + static_cast<std::size_t>(yy)) * W;
            if (kx == 0) {
              d[0] = T(0);
              std::copy(s, s + W - 1, d + 1);
            } else if (kx == 1) {
              std::copy(s, s + W, d);
            } else {
              std::copy(s + 1, s + W, d);
              d[W - 1] = T(0);
            }
          }
        }
  }

  static void col2im(const T* col, Shape in, T* dx) {
    const std::size_t H = in.h, W = in.w, hw = H * W;
    std::fill(dx, dx + in.size(), T(0));
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const T* src = col + ((c * 3 + ky) * 3 + kx) * hw;
          for (std::size_t yo = 0; yo < H; ++yo) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(yo + ky) - 1;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
            const T* s = src + yo * W;
            T* d = dx + (c * H + static_cast<std::size_t>(yy)) * W;
            if (kx == 0) {
              for (std::size_t xo = 1; xo < W; ++xo) d[xo - 1] += s[xo];
            } else if (kx == 1) {
              for (std::size_t xo = 0; xo < W; ++xo) d[xo] += s[xo];
            } else {
              for (std::size_t xo = 0; xo + 1 < W; ++xo) d[xo + 1] += s[xo];
            }
          }
        }
  }

  static void maxpool_forward(const T* x, Shape in, T* y, Shape out, std::uint32_t* argmax) {
    for (std::size_t c = 0; c < out.c; ++c)
      for (std::size_t i = 0; i < out.h; ++i)
        for (std::size_t j = 0; j < out.w; ++j) {
          std::size_t best = (c * in.h + 2 * i) * in.w + 2 * j;
          for (std::size_t di = 0; di < 2; ++di)
            for (std::size_t dj = 0; dj < 2; ++dj) {
              const std::size_t idx = (c * in.h + 2 * i + di) * in.w + 2 * j + dj;
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t o = (c * out.h + i) * out.w + j;
          y[o] = x[best];
          argmax[o] = static_cast<std::uint32_t>(best);
        }
  }

  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> offsets_;
  std::vector<T> params_;
};

} // namespace posture::cnn
