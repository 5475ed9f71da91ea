#pragma once

// Derivative-free minimization over the unit box [0, 1]^d: differential
// evolution (current-to-best/1/bin with dithered scale factor) followed by a
// clamped Nelder-Mead polish of the incumbent. Candidate evaluations within
// a generation run in parallel; all random draws happen on the calling
// thread, so results do not depend on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "posture/error.hpp"
#include "posture/parallel.hpp"
#include "posture/random.hpp"

namespace posture {

struct SearchConfig {
  std::size_t budget = 2000;        // objective evaluations
  std::size_t population = 0;       // 0 = 8 * dimension
  double crossover = 0.9;
  double scale_min = 0.5, scale_max = 0.9;  // dithered per generation
  double polish_fraction = 0.3;     // share of the budget kept for Nelder-Mead
  double f_target = 0.0;            // stop once the best value is <= this
  double x_tol = 1e-7;              // simplex diameter at which the polish has converged
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

struct SearchResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<double> best_history;  // best value after each evaluation
};

using BoxObjective = std::function<double(std::span<const double>)>;

namespace detail {

class Evaluator {
public:
  Evaluator(const BoxObjective& f, SearchResult& r, std::size_t budget, unsigned workers)
      : f_(f), r_(r), budget_(budget), workers_(workers) {}

  [[nodiscard]] std::size_t remaining() const { return budget_ - r_.evaluations; }

  /// Evaluates up to remaining() points; returns how many were evaluated.
  std::size_t run(const std::vector<std::vector<double>>& xs, std::vector<double>& values) {
    const std::size_t n = std::min(xs.size(), remaining());
    values.assign(xs.size(), std::numeric_limits<double>::infinity());
    parallel_for(n, workers_, [&](std::size_t i) { values[i] = sanitize(f_(xs[i])); });
    for (std::size_t i = 0; i < n; ++i) record(xs[i], values[i]);
    return n;
  }

  double one(const std::vector<double>& x) {
    if (remaining() == 0) return std::numeric_limits<double>::infinity();
    const double v = sanitize(f_(x));
    record(x, v);
    return v;
  }

private:
  static double sanitize(double v) { return std::isnan(v) ? std::numeric_limits<double>::infinity() : v; }
  void record(const std::vector<double>& x, double v) {
    ++r_.evaluations;
    if (v < r_.value) {
      r_.value = v;
      r_.x = x;
    }
    r_.best_history.push_back(r_.value);
  }

  const BoxObjective& f_;
  SearchResult& r_;
  std::size_t budget_;
  unsigned workers_;
};

inline void nelder_mead(Evaluator& ev, SearchResult& r, double step, double x_tol) {
  const std::size_t d = r.x.size();
  auto clamp01 = [](std::vector<double> x) {
    for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
    return x;
  };
  std::vector<std::vector<double>> simplex{r.x};
  std::vector<double> fv{r.value};
  for (std::size_t i = 0; i < d && ev.remaining(); ++i) {
    auto x = r.x;
    x[i] += x[i] + step <= 1.0 ? step : -step;
    simplex.push_back(clamp01(x));
    fv.push_back(ev.one(simplex.back()));
  }
  if (simplex.size() != d + 1) return;

  std::vector<std::size_t> idx(d + 1);
  while (ev.remaining() > 0) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    double diam = 0.0;
    for (std::size_t i = 1; i <= d; ++i)
      for (std::size_t k = 0; k < d; ++k) diam = std::max(diam, std::abs(simplex[idx[i]][k] - simplex[idx[0]][k]));
    if (diam < x_tol) {
      r.converged = true;
      return;
    }
    const std::size_t worst = idx[d], second = idx[d - 1], best = idx[0];
    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) centroid[k] += simplex[idx[i]][k] / static_cast<double>(d);
    auto along = [&](double t) {
      std::vector<double> x(d);
      for (std::size_t k = 0; k < d; ++k) x[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
      return clamp01(x);
    };
    const auto xr = along(-1.0);
    const double fr = ev.one(xr);
    if (fr < fv[best]) {
      const auto xe = along(-2.0);
      const double fe = ev.one(xe);
      if (fe < fr) simplex[worst] = xe, fv[worst] = fe;
      else simplex[worst] = xr, fv[worst] = fr;
    } else if (fr < fv[second]) {
      simplex[worst] = xr, fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const auto xc = along(outside ? -0.5 : 0.5);
      const double fc = ev.one(xc);
      if (fc < (outside ? fr : fv[worst])) {
        simplex[worst] = xc, fv[worst] = fc;
      } else {
        for (std::size_t i = 1; i <= d && ev.remaining(); ++i) {
          auto& x = simplex[idx[i]];
          for (std::size_t k = 0; k < d; ++k) x[k] = simplex[best][k] + 0.5 * (x[k] - simplex[best][k]);
          fv[idx[i]] = ev.one(x);
        }
      }
    }
  }
}

} // namespace detail

inline SearchResult minimize_box(const BoxObjective& f, std::size_t dim, const SearchConfig& cfg) {
  if (dim == 0) throw ConfigError("minimize_box: dimension must be >= 1");
  if (cfg.budget < 1) throw ConfigError("search budget must be >= 1 evaluation");
  SearchResult r;
  detail::Evaluator ev(f, r, cfg.budget, cfg.workers);
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // Budget 1: the box centre is the single candidate.
  if (cfg.budget == 1) {
    ev.one(std::vector<double>(dim, 0.5));
    return r;
  }

  const std::size_t np = std::clamp<std::size_t>(cfg.population ? cfg.population : 8 * dim, 4, cfg.budget);
  const auto polish = static_cast<std::size_t>(cfg.polish_fraction * static_cast<double>(cfg.budget));
  const std::size_t de_budget = cfg.budget - std::min(polish, cfg.budget - np);

  // Stratified initial population: each coordinate takes one value per stratum.
  std::vector<std::vector<double>> pop(np, std::vector<double>(dim));
  for (std::size_t k = 0; k < dim; ++k) {
    std::vector<std::size_t> perm(np);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = np - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
    for (std::size_t i = 0; i < np; ++i) pop[i][k] = (static_cast<double>(perm[i]) + u01(rng)) / static_cast<double>(np);
  }
  std::vector<double> fit;
  ev.run(pop, fit);

  std::vector<std::vector<double>> trials(np, std::vector<double>(dim));
  std::vector<double> tfit;
  while (r.evaluations + np <= de_budget && r.value > cfg.f_target) {
    const std::size_t best = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
    const double F = cfg.scale_min + (cfg.scale_max - cfg.scale_min) * u01(rng);
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t a, b;
      do a = rng() % np; while (a == i);
      do b = rng() % np; while (b == i || b == a);
      const std::size_t jr = rng() % dim;
      for (std::size_t k = 0; k < dim; ++k) {
        double v = pop[i][k];
        if (k == jr || u01(rng) < cfg.crossover) {
          v = pop[i][k] + F * (pop[best][k] - pop[i][k]) + F * (pop[a][k] - pop[b][k]);
          // Out-of-box components land between the parent and the violated bound.
          if (v < 0.0) v = 0.5 * pop[i][k];
          if (v > 1.0) v = 0.5 * (pop[i][k] + 1.0);
        }
        trials[i][k] = v;
      }
    }
    ev.run(trials, tfit);
    for (std::size_t i = 0; i < np; ++i)
      if (tfit[i] <= fit[i]) pop[i] = trials[i], fit[i] = tfit[i];
  }

  if (r.value <= cfg.f_target) {
    r.converged = true;
    return r;
  }
  if (ev.remaining() > dim) detail::nelder_mead(ev, r, 0.02, cfg.x_tol);
  if (r.value <= cfg.f_target) r.converged = true;
  return r;
}

} // namespace posture
