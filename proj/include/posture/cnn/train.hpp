#pragma once

// Mean-squared-error regression, SGD with classical momentum, and the
// mini-batch training loop with validation tracking.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "posture/cnn/network.hpp"
#include "posture/error.hpp"
#include "posture/random.hpp"

namespace posture::cnn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  std::vector<T> grad;  // dLoss/dPred
};

/// Mean of squared differences; gradient 2 (pred - target) / n.
template <typename T, typename U>
LossResult<T> mse_loss(std::span<const T> pred, std::span<const U> target) {
  if (pred.size() != target.size() || pred.empty()) throw FormatError("mse_loss: length mismatch");
  LossResult<T> r;
  r.grad.resize(pred.size());
  const double n = static_cast<double>(pred.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    s += d * d;
    r.grad[i] = static_cast<T>(2.0 * d / n);
  }
  r.loss = s / n;
  return r;
}

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
};

/// Classical momentum: v <- mu v - eta g; w <- w + v.
template <typename T>
void sgd_momentum_step(std::span<T> weights, std::span<T> velocity, std::span<const T> grad, const SgdConfig& cfg) {
  if (weights.size() != velocity.size() || weights.size() != grad.size())
    throw FormatError("sgd_momentum_step: shape mismatch");
  const T mu = static_cast<T>(cfg.momentum), eta = static_cast<T>(cfg.learning_rate);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    velocity[i] = mu * velocity[i] - eta * grad[i];
    weights[i] += velocity[i];
  }
}

struct TrainConfig {
  double learning_rate = 0.002;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 1;
  double lr_decay = 1.0;           // multiply the rate by this ...
  std::size_t lr_decay_every = 0;  // ... every this many epochs (0 = never)
  bool shuffle = true;             // reshuffle the training order every epoch
  double grad_clip = 0.0;          // max global gradient norm per batch (0 = off)

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0, 1)");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
    if (!(lr_decay > 0.0)) throw ConfigError("train.lr_decay must be positive");
  }
  [[nodiscard]] double rate_at(std::size_t epoch) const {
    if (lr_decay_every == 0) return learning_rate;
    return learning_rate * std::pow(lr_decay, static_cast<double>(epoch / lr_decay_every));
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

/// A view of (input, target) pairs. `load` writes input i (already in
/// network form) into the buffer; targets are stored row-major.
template <typename T>
struct SampleSource {
  std::size_t count = 0;
  std::size_t target_size = 0;
  std::function<void(std::size_t, std::span<T>)> load;
  std::function<void(std::size_t, std::span<double>)> target;
};

template <typename T>
double evaluate_mse(const Network<T>& net, const SampleSource<T>& data) {
  if (data.count == 0) return 0.0;
  Workspace<T> ws;
  std::vector<T> in(net.input_size());
  std::vector<double> t(data.target_size);
  double total = 0.0;
  for (std::size_t i = 0; i < data.count; ++i) {
    data.load(i, in);
    data.target(i, t);
    const auto out = net.forward(std::span<const T>(in), ws);
    total += mse_loss<T, double>(out, t).loss;
  }
  return total / static_cast<double>(data.count);
}

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
};

/// Mini-batch SGD with momentum over `train`; after every epoch the
/// validation MSE is recorded and the best-validation weights are kept in
/// `net` at return. Non-finite losses abort with DivergenceError.
template <typename T>
FitResult fit(Network<T>& net, const SampleSource<T>& train, const SampleSource<T>& val, const TrainConfig& cfg,
              const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train.count == 0) throw ConfigError("fit: empty training set");
  if (train.target_size != net.output_size()) throw ConfigError("fit: target size differs from network output");

  const std::size_t np = net.param_count();
  std::vector<T> velocity(np, T(0)), grad(np, T(0)), best(net.params().begin(), net.params().end());
  std::vector<std::size_t> order(train.count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Workspace<T> ws;
  std::vector<T> in(net.input_size());
  std::vector<double> t(train.target_size);

  FitResult result;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.shuffle) {
      Rng rng(derive_seed(cfg.seed, epoch, streams::epoch));
      for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    }
    const SgdConfig sgd{cfg.rate_at(epoch - 1), cfg.momentum};
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), T(0));
      for (std::size_t s = start; s < stop; ++s) {
        train.load(order[s], in);
        train.target(order[s], t);
        const auto out = net.forward(std::span<const T>(in), ws);
        auto lr = mse_loss<T, double>(out, t);
        if (!std::isfinite(lr.loss))
          throw DivergenceError("training loss became non-finite in epoch " + std::to_string(epoch) +
                                "; lower train.learning_rate (currently " + std::to_string(sgd.learning_rate) +
                                ") or enable train.grad_clip");
        epoch_loss += lr.loss;
        for (auto& g : lr.grad) g = static_cast<T>(g * inv_b);
        net.backward(ws, lr.grad, grad);
      }
      if (cfg.grad_clip > 0.0) {
        double norm = 0.0;
        for (T g : grad) norm += static_cast<double>(g) * static_cast<double>(g);
        norm = std::sqrt(norm);
        if (norm > cfg.grad_clip) {
          const T s = static_cast<T>(cfg.grad_clip / norm);
          for (auto& g : grad) g *= s;
        }
      }
      sgd_momentum_step<T>(net.params(), velocity, grad, sgd);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = epoch_loss / static_cast<double>(train.count);
    rec.val_mse = val.count ? evaluate_mse(net, val) : rec.train_mse;
    rec.learning_rate = sgd.learning_rate;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(rec.val_mse)) throw DivergenceError("validation loss became non-finite in epoch " + std::to_string(epoch));
    if (rec.val_mse < result.best_val_mse) {
      result.best_val_mse = rec.val_mse;
      result.best_epoch = epoch;
      std::copy(net.params().begin(), net.params().end(), best.begin());
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  std::copy(best.begin(), best.end(), net.params().begin());
  return result;
}

} // namespace posture::cnn
