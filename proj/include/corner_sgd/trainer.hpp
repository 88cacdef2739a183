#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "contour.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "parallel.hpp"
#include "propagator.hpp"
#include "rng.hpp"
#include "spectrum.hpp"

namespace corner_sgd {

// Target of the indicator experiment: 1 on [1/4, 3/4].
inline double indicator_target(double x) { return (x >= 0.25 && x <= 0.75) ? 1.0 : 0.0; }

// y_hat(x) = (1/N) sum_n w_n (x - n/N)_+, n = 1..N.
struct IndicatorModel {
  std::size_t n = 0;
  std::vector<double> w;

  IndicatorModel() = default;
  explicit IndicatorModel(std::size_t features) : n(features), w(features, 0.0) {
    require(features >= 1, "indicator model: need at least one feature");
  }

  std::size_t dim() const { return n; }
  std::span<double> params() { return w; }

  // Naive O(N) evaluation; the batch code paths use prefix sums instead.
  double predict(double x) const {
    double s = 0.0;
    for (std::size_t k = 1; k <= n; ++k) s += w[k - 1] * std::max(0.0, x - static_cast<double>(k) / n);
    return s / static_cast<double>(n);
  }

  // Prefix sums W0[j] = sum_{k<=j} w_k, W1[j] = sum_{k<=j} w_k k/N, so that
  // y_hat(x) = (x W0[j] - W1[j]) / N with j = min(floor(x N), N).
  void prefix(std::vector<double>& w0, std::vector<double>& w1) const {
    w0.assign(n + 1, 0.0);
    w1.assign(n + 1, 0.0);
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t k = 1; k <= n; ++k) {
      w0[k] = w0[k - 1] + w[k - 1];
      w1[k] = w1[k - 1] + w[k - 1] * static_cast<double>(k) * inv;
    }
  }

  std::size_t active(double x) const {
    double f = std::floor(x * static_cast<double>(n));
    if (f <= 0.0) return 0;
    return std::min(n, static_cast<std::size_t>(f));
  }

  // Exact 1/2 int_0^1 (y_hat - y)^2 dx: the integrand is quadratic between the
  // knots k/N and the target jumps, so Simpson's rule is exact per segment.
  double population_loss() const {
    std::vector<double> w0, w1;
    prefix(w0, w1);
    const double inv = 1.0 / static_cast<double>(n);
    double total = 0.0;
    auto segment = [&](double a, double b, std::size_t j) {
      if (b <= a) return;
      double mid = 0.5 * (a + b);
      double y = indicator_target(mid);
      auto f = [&](double x) { return (x * w0[j] - w1[j]) * inv - y; };
      double fa = f(a), fm = f(mid), fb = f(b);
      total += (b - a) / 6.0 * (fa * fa + 4.0 * fm * fm + fb * fb);
    };
    for (std::size_t j = 0; j < n; ++j) {
      double a = static_cast<double>(j) * inv, b = static_cast<double>(j + 1) * inv;
      double cut[4] = {a, 0.25, 0.75, b};
      std::size_t c = 1;
      double pts[4];
      pts[0] = a;
      for (int i = 1; i <= 2; ++i)
        if (cut[i] > a && cut[i] < b) pts[c++] = cut[i];
      pts[c++] = b;
      for (std::size_t i = 0; i + 1 < c; ++i) segment(pts[i], pts[i + 1], j);
    }
    return 0.5 * total;
  }

  // (1/|B|) sum_x (y_hat(x) - y(x)) phi(x), phi_k(x) = (x - k/N)_+ / N.
  void batch_gradient(std::span<const double> xs, std::span<double> grad) const {
    require(!xs.empty(), "indicator gradient: empty batch");
    require(grad.size() == n, "indicator gradient: size mismatch");
    std::vector<double> w0, w1;
    prefix(w0, w1);
    const double inv = 1.0 / static_cast<double>(n);
    std::vector<std::pair<double, double>> xr(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double x = xs[i];
      std::size_t j = active(x);
      xr[i] = {x, (x * w0[j] - w1[j]) * inv - indicator_target(x)};
    }
    std::sort(xr.begin(), xr.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
    // sweep k from N down: S0 = sum r_i, S1 = sum r_i x_i over x_i > k/N
    double s0 = 0.0, s1 = 0.0;
    std::size_t i = 0;
    const double scale = inv / static_cast<double>(xs.size());
    for (std::size_t k = n; k >= 1; --k) {
      double knot = static_cast<double>(k) * inv;
      while (i < xr.size() && xr[i].first > knot) {
        s0 += xr[i].second;
        s1 += xr[i].second * xr[i].first;
        ++i;
      }
      grad[k - 1] = (s1 - knot * s0) * scale;
    }
  }

  template <class Rng>
  void stochastic_gradient(std::size_t batch, Rng& rng, std::span<double> grad, std::vector<double>& scratch) const {
    scratch.resize(batch);
    for (auto& x : scratch) x = rng.uniform();
    batch_gradient(scratch, grad);
  }

  void exact_gradient(std::span<double>) const {
    throw config_error("indicator model: exact gradients are not available, use sampled batches");
  }

  // H_km = (1/N^2) int_{max}^{1} (x - k/N)(x - m/N) dx.
  double hessian_entry(std::size_t k, std::size_t m) const {
    double a = static_cast<double>(k) / n, b = static_cast<double>(m) / n, c = std::max(a, b);
    double v = (1.0 - c * c * c) / 3.0 - (a + b) * (1.0 - c * c) / 2.0 + a * b * (1.0 - c);
    return v / (static_cast<double>(n) * n);
  }

  // Largest Hessian eigenvalue by power iteration on the dense matrix.
  double hessian_top_eigenvalue(std::size_t iterations = 200, double tol = 1e-12) const {
    std::vector<double> h(n * n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t m = k; m < n; ++m) h[k * n + m] = h[m * n + k] = hessian_entry(k + 1, m + 1);
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n))), nv(n);
    double lam = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
      for (std::size_t k = 0; k < n; ++k) {
        double s = 0.0;
        for (std::size_t m = 0; m < n; ++m) s += h[k * n + m] * v[m];
        nv[k] = s;
      }
      double norm = std::sqrt(std::inner_product(nv.begin(), nv.end(), nv.begin(), 0.0));
      double next = std::inner_product(v.begin(), v.end(), nv.begin(), 0.0);
      for (std::size_t k = 0; k < n; ++k) v[k] = nv[k] / norm;
      if (it > 0 && std::abs(next - lam) <= tol * std::abs(next)) return next;
      lam = next;
    }
    return lam;
  }
};

inline double indicator_population_loss(const IndicatorModel& m) { return m.population_loss(); }

inline std::vector<double> indicator_batch_gradient(const IndicatorModel& m, std::span<const double> xs) {
  std::vector<double> g(m.n);
  m.batch_gradient(xs, g);
  return g;
}

// Linear model with Gaussian features x = sum_k sqrt(lambda_k) g_k e_k, tracked
// through delta_w = w - w_* in the eigenbasis (w_* has coordinates sqrt(s_k)).
struct GaussianSpectralModel {
  SpectralProblem problem;
  std::vector<double> delta_w;

  GaussianSpectralModel() = default;
  explicit GaussianSpectralModel(SpectralProblem p) : problem(std::move(p)) {
    problem.validate();
    delta_w.resize(problem.size());
    for (std::size_t k = 0; k < problem.size(); ++k) delta_w[k] = -std::sqrt(problem.coeffs[k]);  // w_0 = 0
    sqrt_lambda.resize(problem.size());
    for (std::size_t k = 0; k < problem.size(); ++k) sqrt_lambda[k] = std::sqrt(problem.eigenvalues[k]);
  }

  std::size_t dim() const { return delta_w.size(); }
  std::span<double> params() { return delta_w; }

  double population_loss() const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) s += problem.eigenvalues[k] * delta_w[k] * delta_w[k];
    return 0.5 * s;
  }

  void exact_gradient(std::span<double> grad) const {
    for (std::size_t k = 0; k < dim(); ++k) grad[k] = problem.eigenvalues[k] * delta_w[k];
  }

  // (1/|B|) sum_i (x_i . delta_w) x_i
  template <class Rng>
  void stochastic_gradient(std::size_t batch, Rng& rng, std::span<double> grad, std::vector<double>& scratch) const {
    require(batch >= 1, "gaussian gradient: batch must be positive");
    const std::size_t K = dim();
    scratch.resize(K);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        scratch[k] = sqrt_lambda[k] * rng.normal();
        dot += scratch[k] * delta_w[k];
      }
      for (std::size_t k = 0; k < K; ++k) grad[k] += dot * scratch[k];
    }
    const double inv = 1.0 / static_cast<double>(batch);
    for (auto& g : grad) g *= inv;
  }

  std::vector<double> sqrt_lambda;
};

template <class Rng>
std::vector<double> gaussian_sample_gradient(const GaussianSpectralModel& m, std::size_t count, Rng& rng) {
  std::vector<double> g(m.dim()), scratch;
  m.stochastic_gradient(count, rng, g, scratch);
  return g;
}

template <class M>
concept TrainableModel = requires(M m, const M cm, Xoshiro256pp& rng, std::span<double> g, std::vector<double>& s) {
  { cm.dim() } -> std::convertible_to<std::size_t>;
  { m.params() } -> std::same_as<std::span<double>>;
  { cm.population_loss() } -> std::convertible_to<double>;
  cm.exact_gradient(g);
  cm.stochastic_gradient(std::size_t{1}, rng, g, s);
};

// {0} plus round(10^{j/per_decade}) up to steps, deduplicated.
inline std::vector<std::size_t> log_schedule(std::size_t steps, std::size_t per_decade = 40) {
  require(per_decade >= 1, "log_schedule: per_decade must be positive");
  std::vector<std::size_t> s{0};
  for (std::size_t j = 0;; ++j) {
    double v = std::round(std::pow(10.0, static_cast<double>(j) / static_cast<double>(per_decade)));
    if (v > static_cast<double>(steps)) break;
    auto t = static_cast<std::size_t>(v);
    if (t > s.back()) s.push_back(t);
  }
  if (s.back() != steps) s.push_back(steps);
  return s;
}

struct TrainConfig {
  MemoryAlgorithm algorithm;
  std::size_t steps = 1;
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool exact_gradient = false;
  std::vector<std::size_t> eval_schedule;  // empty: log_schedule(steps)
  double divergence_factor = 1e6;

  void validate() const {
    algorithm.validate();
    require(steps >= 1, "train config: steps must be positive");
    require(batch >= 1, "train config: batch must be positive");
    require(divergence_factor > 1.0, "train config: divergence factor must exceed 1");
    for (std::size_t i = 1; i < eval_schedule.size(); ++i)
      require(eval_schedule[i] > eval_schedule[i - 1], "train config: eval schedule must strictly increase");
    if (!eval_schedule.empty()) require(eval_schedule.back() <= steps, "train config: eval schedule beyond steps");
  }
};

// Memory-M iteration from w_0 = 0, u_0 = 0:
//   w' = w - alpha g + sum_m b_m u_m,   u' = D u + c g.
template <TrainableModel M>
LossTrajectory sgd_run(const TrainConfig& cfg, M& model) {
  cfg.validate();
  const auto& alg = cfg.algorithm;
  const std::size_t dim = model.dim();
  const std::size_t mem = alg.memory();
  const bool diag = alg.d_is_diagonal();
  auto schedule = cfg.eval_schedule.empty() ? log_schedule(cfg.steps) : cfg.eval_schedule;

  Xoshiro256pp rng(cfg.seed, cfg.stream);
  std::vector<double> grad(dim), scratch, u(mem * dim, 0.0), tmp(diag ? 0 : mem * dim);

  LossTrajectory traj;
  traj.provenance = Provenance::empirical;
  const double initial = model.population_loss();
  std::size_t next = 0;
  auto record = [&](std::size_t t) -> bool {
    double l = t == 0 ? initial : model.population_loss();
    traj.steps.push_back(t);
    traj.loss.push_back(l);
    bool blown = !std::isfinite(l) || (initial > 0.0 && l > cfg.divergence_factor * initial);
    if (blown) traj.diverged_at = t;
    return !blown;
  };
  if (next < schedule.size() && schedule[next] == 0) {
    record(0);
    ++next;
  }
  for (std::size_t t = 1; t <= cfg.steps && next < schedule.size(); ++t) {
    if (cfg.exact_gradient)
      model.exact_gradient(grad);
    else
      model.stochastic_gradient(cfg.batch, rng, grad, scratch);
    auto w = model.params();
    for (std::size_t i = 0; i < dim; ++i) w[i] -= alg.alpha * grad[i];
    for (std::size_t m = 0; m < mem; ++m) {
      const double bm = alg.b[m];
      const double* um = u.data() + m * dim;
      for (std::size_t i = 0; i < dim; ++i) w[i] += bm * um[i];
    }
    if (diag) {
      for (std::size_t m = 0; m < mem; ++m) {
        const double dm = alg.d(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        const double cm = alg.c[m];
        double* um = u.data() + m * dim;
        for (std::size_t i = 0; i < dim; ++i) um[i] = dm * um[i] + cm * grad[i];
      }
    } else {
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (std::size_t r = 0; r < mem; ++r) {
        double* out = tmp.data() + r * dim;
        for (std::size_t m = 0; m < mem; ++m) {
          const double drm = alg.d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m));
          if (drm == 0.0) continue;
          const double* um = u.data() + m * dim;
          for (std::size_t i = 0; i < dim; ++i) out[i] += drm * um[i];
        }
        for (std::size_t i = 0; i < dim; ++i) out[i] += alg.c[r] * grad[i];
      }
      std::swap(u, tmp);
    }
    if (schedule[next] == t) {
      ++next;
      if (!record(t)) break;
    }
  }
  return traj;
}

// Runs seeds with streams 0..runs-1 of cfg.seed and averages the losses over
// the common evaluation steps. make_model() must return a fresh model.
template <class Factory>
LossTrajectory sgd_run_averaged(const TrainConfig& cfg, Factory&& make_model, std::size_t runs) {
  require(runs >= 1, "sgd_run_averaged: need at least one run");
  std::vector<LossTrajectory> all(runs);
  parallel_for(runs, [&](std::size_t r) {
    TrainConfig c = cfg;
    c.stream = cfg.stream + r;
    auto model = make_model();
    all[r] = sgd_run(c, model);
  });
  LossTrajectory avg;
  avg.provenance = Provenance::empirical;
  std::size_t len = all[0].steps.size();
  for (const auto& t : all) {
    len = std::min(len, t.steps.size());
    if (t.diverged_at && (!avg.diverged_at || *t.diverged_at < *avg.diverged_at)) avg.diverged_at = t.diverged_at;
  }
  avg.steps.assign(all[0].steps.begin(), all[0].steps.begin() + static_cast<std::ptrdiff_t>(len));
  avg.loss.assign(len, 0.0);
  for (const auto& t : all)
    for (std::size_t i = 0; i < len; ++i) avg.loss[i] += t.loss[i] / static_cast<double>(runs);
  return avg;
}

struct ExponentEstimate {
  double exponent = 0.0;
  double stderr_ = 0.0;
  double prefactor = 0.0;
};

inline ExponentEstimate fit_loss_exponent(const LossTrajectory& traj, double t_min, double t_max) {
  std::vector<double> t(traj.steps.begin(), traj.steps.end());
  PowerFit f = smoothed_power_fit(t, traj.loss, t_min, t_max, 20);
  return {f.exponent, f.stderr_, f.prefactor};
}

}  // namespace corner_sgd
