#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "contour.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "parallel.hpp"
#include "spectrum.hpp"

namespace corner_sgd {

struct KernelPair {
  std::vector<double> u;  // U(t, lambda), t = 1..T
  std::vector<double> v;  // V(t, lambda), t = 1..T
  double leak = 0.0;      // contour path only: max |coef at t <= 0| / max |coef|
};

namespace detail {

// Streams U(t), V(t) for t = 1..T into sink(t_index, u, v). Diagonal D only.
template <class Sink>
void diagonal_kernels(const MemoryAlgorithm& alg, double lam, std::size_t T, Sink&& sink) {
  const std::size_t m = alg.memory();
  std::vector<double> d(m), lc(m), uu(m, 0.0), uv(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    d[i] = alg.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    lc[i] = lam * alg.c[i];
  }
  const double* b = alg.b.data();
  const double decay = 1.0 - alg.alpha * lam;
  // state (w; u) starting from (-alpha; c) and (1; 0)
  double wu = -alg.alpha, wv = 1.0;
  for (std::size_t i = 0; i < m; ++i) uu[i] = alg.c[i];
  for (std::size_t t = 0; t < T; ++t) {
    sink(t, wu, wv);
    double au = 0.0, av = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      au += b[i] * uu[i];
      av += b[i] * uv[i];
    }
    for (std::size_t i = 0; i < m; ++i) {
      uu[i] = d[i] * uu[i] + lc[i] * wu;
      uv[i] = d[i] * uv[i] + lc[i] * wv;
    }
    wu = decay * wu + au;
    wv = decay * wv + av;
  }
}

template <class Sink>
void dense_kernels(const MemoryAlgorithm& alg, double lam, std::size_t T, Sink&& sink) {
  const auto m = static_cast<Eigen::Index>(alg.memory());
  Eigen::MatrixXd s(m + 1, m + 1);
  s(0, 0) = 1.0 - alg.alpha * lam;
  for (Eigen::Index i = 0; i < m; ++i) {
    s(0, i + 1) = alg.b[static_cast<std::size_t>(i)];
    s(i + 1, 0) = lam * alg.c[static_cast<std::size_t>(i)];
  }
  s.bottomRightCorner(m, m) = alg.d;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m + 1, 2);
  x(0, 0) = -alg.alpha;
  for (Eigen::Index i = 0; i < m; ++i) x(i + 1, 0) = alg.c[static_cast<std::size_t>(i)];
  x(0, 1) = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    sink(t, x(0, 0), x(0, 1));
    x = (s * x).eval();
  }
}

template <class Sink>
void matrix_kernels(const MemoryAlgorithm& alg, double lam, std::size_t T, Sink&& sink) {
  if (alg.d_is_diagonal())
    diagonal_kernels(alg, lam, T, sink);
  else
    dense_kernels(alg, lam, T, sink);
}

}  // namespace detail

inline KernelPair kernels_matrix(const MemoryAlgorithm& alg, double lambda, std::size_t T) {
  alg.validate();
  require(T >= 1, "kernels_matrix: T must be at least 1");
  require(lambda > 0.0, "kernels_matrix: lambda must be positive");
  KernelPair k;
  k.u.resize(T);
  k.v.resize(T);
  detail::matrix_kernels(alg, lambda, T, [&](std::size_t t, double u, double v) {
    k.u[t] = u;
    k.v[t] = v;
  });
  return k;
}

namespace detail {

// Cached backward plans; execution on other arrays is thread safe, planning is not.
class FftPlans {
 public:
  static fftw_plan backward(std::size_t n) {
    static FftPlans cache;
    std::lock_guard lock(cache.mutex_);
    auto it = cache.plans_.find(n);
    if (it != cache.plans_.end()) return it->second;
    std::vector<std::complex<double>> buf(n);
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw numerical_error("fftw planning failed");
    cache.plans_.emplace(n, plan);
    return plan;
  }
  ~FftPlans() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

inline bool is_pow2(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

// Values of Psi and Psi/(mu-1) on the grid mu_j = e^{2 pi i j / N}.
struct CircleSamples {
  std::vector<cplx> psi;
  std::vector<cplx> ratio;
};

inline cplx grid_point(std::size_t j, std::size_t n, double radius) {
  return std::polar(radius, 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
}

// On the unit circle the mu = 1 node takes the analytic limits Psi(1) = 0 and
// Psi/(mu-1) -> Psi'(1) = P'(1)/Q(1).
inline CircleSamples circle_samples(const RationalMap& map, std::size_t n, double radius = 1.0) {
  map.validate();
  CircleSamples s;
  s.psi.resize(n);
  s.ratio.resize(n);
  std::size_t first = 0;
  if (radius == 1.0) {
    double q1 = poly_eval<double>(map.q, 1.0);
    if (q1 == 0.0) throw numerical_error("contour kernels: pole of Psi at mu = 1");
    s.psi[0] = 0.0;
    s.ratio[0] = poly_eval<double>(poly_derivative(map.p), 1.0) / q1;
    first = 1;
  }
  for (std::size_t j = first; j < n; ++j) {
    cplx mu = grid_point(j, n, radius);
    cplx qv = poly_eval<cplx>(map.q, mu);
    if (std::abs(qv) < 1e-300) throw numerical_error("contour kernels: pole of Psi on the sampling circle");
    s.psi[j] = poly_eval<cplx>(map.p, mu) / qv;
    s.ratio[j] = s.psi[j] / (mu - 1.0);
  }
  return s;
}

// Resolvent form Psi = (mu-1)/r(mu), r = b.(mu-D)^{-1}c - alpha. Same rational
// function as rational_from_algorithm, but free of the cancellation that the
// monomial coefficients suffer when roots of P cluster near 1 (long memory).
inline CircleSamples circle_samples(const MemoryAlgorithm& alg, std::size_t n, double radius = 1.0) {
  alg.validate();
  CircleSamples s;
  s.psi.resize(n);
  s.ratio.resize(n);
  const auto m = static_cast<Eigen::Index>(alg.memory());
  const bool diag = alg.d_is_diagonal();
  Eigen::VectorXcd c(m), b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    c(i) = alg.c[static_cast<std::size_t>(i)];
    b(i) = alg.b[static_cast<std::size_t>(i)];
  }
  for (std::size_t j = 0; j < n; ++j) {
    cplx mu = grid_point(j, n, radius);
    cplx r = -alg.alpha;
    if (diag) {
      for (Eigen::Index i = 0; i < m; ++i) r += b(i) * c(i) / (mu - alg.d(i, i));
    } else if (m > 0) {
      Eigen::MatrixXcd x = -alg.d.cast<cplx>();
      x.diagonal().array() += mu;
      r += b.dot(x.partialPivLu().solve(c));  // dot conjugates its left side; b is real
    }
    if (std::abs(r) < 1e-300) throw numerical_error("contour kernels: pole of Psi on the sampling circle");
    s.ratio[j] = 1.0 / r;
    s.psi[j] = (j == 0 && radius == 1.0) ? cplx(0.0) : (mu - 1.0) / r;
  }
  return s;
}

// Ideal map: Psi ~ (mu-1)^theta with theta > 1, so both limits vanish at mu = 1.
inline CircleSamples circle_samples(const CornerSpec& spec, std::size_t n, double radius = 1.0) {
  spec.validate();
  CircleSamples s;
  s.psi.resize(n);
  s.ratio.resize(n);
  std::size_t first = radius == 1.0 ? 1 : 0;
  s.psi[0] = 0.0;
  s.ratio[0] = 0.0;
  parallel_for(n - first, [&](std::size_t i) {
    std::size_t j = i + first;
    cplx mu = grid_point(j, n, radius);
    s.psi[j] = corner_map_eval(spec.theta, spec.a, mu);
    s.ratio[j] = s.psi[j] / (mu - 1.0);
  });
  return s;
}

// U in the real part and V in the imaginary part of one transform; both
// coefficient sequences are real because Psi has real coefficients.
// On a circle of radius R the transform returns c_t R^{-t}, undone here,
// while the aliases c_{t+kN} arrive damped by R^{-kN}.
inline void contour_kernels_from_samples(const CircleSamples& s, double radius, double lam, std::size_t T,
                                         std::vector<cplx>& buf, std::span<double> u, std::span<double> v,
                                         double* leak) {
  const std::size_t n = s.psi.size();
  buf.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    cplx den = s.psi[j] - lam;
    if (std::abs(den) < 1e-12) throw numerical_error("contour kernels: Psi - lambda nearly vanishes on the circle");
    cplx inv = 1.0 / den;
    cplx gu = inv, gv = s.ratio[j] * inv;
    buf[j] = gu + cplx(0.0, 1.0) * gv;
  }
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(FftPlans::backward(n), p, p);
  double scale = radius / static_cast<double>(n);
  for (std::size_t t = 1; t <= T; ++t, scale *= radius) {
    u[t - 1] = buf[t].real() * scale;
    v[t - 1] = buf[t].imag() * scale;
  }
  // Coefficients at t = 0, -1, ..., -T sit in bins n - j scaled by R^j; aliases from t near n reach
  // them only after damping by R^{-n}.
  if (leak) {
    double pos = 0.0, neg = 0.0, rt = radius, rj = 1.0;
    for (std::size_t t = 1; t <= T; ++t, rt *= radius) pos = std::max(pos, std::abs(buf[t]) * rt);
    for (std::size_t j = 0; j <= T; ++j, rj /= radius) neg = std::max(neg, std::abs(buf[(n - j) % n]) * rj);
    *leak = pos > 0.0 ? neg / pos : 0.0;
  }
}

}  // namespace detail

using KernelSource = std::variant<MemoryAlgorithm, RationalMap, CornerSpec>;

inline std::size_t default_grid(std::size_t T) {
  std::size_t n = 1024;
  while (n < 4 * T) n *= 2;
  return n;
}

// Sampling radius e^{damping/grid}: damping 0 is the unit circle. The default
// suppresses aliasing from slowly decaying memory modes by e^{-20} while
// amplifying rounding by at most e^{20 T/grid}.
inline constexpr double kDefaultDamping = 20.0;

inline double sampling_radius(double damping, std::size_t grid) {
  require(damping >= 0.0, "contour kernels: damping must be nonnegative");
  return std::exp(damping / static_cast<double>(grid));
}

template <class Map>
KernelPair kernels_contour(const Map& map, double lambda, std::size_t T, std::size_t grid,
                           double damping = kDefaultDamping) {
  require(T >= 1, "kernels_contour: T must be at least 1");
  require(lambda > 0.0, "kernels_contour: lambda must be positive");
  require(detail::is_pow2(grid), "kernels_contour: grid must be a power of two");
  require(grid >= 4 * T, "kernels_contour: grid must be at least 4T");
  double radius = sampling_radius(damping, grid);
  auto samples = detail::circle_samples(map, grid, radius);
  KernelPair k;
  k.u.resize(T);
  k.v.resize(T);
  std::vector<cplx> buf;
  detail::contour_kernels_from_samples(samples, radius, lambda, T, buf, k.u, k.v, &k.leak);
  return k;
}

struct PropagatorSeries {
  std::vector<double> u;  // U_t, t = 1..T
  std::vector<double> v;  // V_t, t = 1..T
  double tau1 = 1.0;
  std::size_t batch = 1;
  double max_leak = 0.0;  // contour sources only

  std::size_t size() const { return u.size(); }
};

struct AggregateOptions {
  std::size_t grid = 0;     // contour sources; 0 picks default_grid(T)
  double bin_width = 0.0;   // relative eigenvalue merge width, 0 disables
  std::size_t block = 64;   // eigenvalues per reduction block
  double damping = kDefaultDamping;
};

namespace detail {

struct EigenGroup {
  double lambda;
  double weight_u;  // sum lambda^2
  double weight_v;  // sum lambda s
};

inline std::vector<EigenGroup> eigen_groups(const SpectralProblem& pb, double width) {
  std::vector<EigenGroup> g;
  std::size_t k = 0, K = pb.size();
  while (k < K) {
    std::size_t e = k + 1;
    if (width > 0.0)
      while (e < K && pb.eigenvalues[k] / pb.eigenvalues[e] - 1.0 <= width) ++e;
    EigenGroup grp{std::sqrt(pb.eigenvalues[k] * pb.eigenvalues[e - 1]), 0.0, 0.0};
    for (std::size_t i = k; i < e; ++i) {
      grp.weight_u += pb.eigenvalues[i] * pb.eigenvalues[i];
      grp.weight_v += pb.eigenvalues[i] * pb.coeffs[i];
    }
    g.push_back(grp);
    k = e;
  }
  return g;
}

}  // namespace detail

// U_t = (tau1/|B|) sum_k lambda_k^2 U(t,lambda_k)^2, V_t = sum_k lambda_k s_k V(t,lambda_k)^2.
// Blocks of eigenvalues are reduced in descending k, so results do not depend on threading.
inline PropagatorSeries aggregate(const SpectralProblem& problem, const KernelSource& source, std::size_t T,
                                  double tau1, std::size_t batch, const AggregateOptions& opts = {}) {
  problem.validate();
  require(T >= 1, "aggregate: T must be at least 1");
  require(tau1 >= 0.0, "aggregate: tau1 must be nonnegative");
  require(batch >= 1, "aggregate: batch must be positive");
  require(opts.block >= 1, "aggregate: block must be positive");
  auto groups = detail::eigen_groups(problem, opts.bin_width);
  const std::size_t G = groups.size();
  const std::size_t nblocks = (G + opts.block - 1) / opts.block;

  std::optional<detail::CircleSamples> samples;
  double radius = 1.0;
  if (!std::holds_alternative<MemoryAlgorithm>(source)) {
    std::size_t grid = opts.grid ? opts.grid : default_grid(T);
    require(detail::is_pow2(grid) && grid >= 4 * T, "aggregate: grid must be a power of two >= 4T");
    radius = sampling_radius(opts.damping, grid);
    samples = std::visit(
        [&](const auto& s) -> detail::CircleSamples {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, MemoryAlgorithm>)
            return {};
          else
            return detail::circle_samples(s, grid, radius);
        },
        source);
  } else {
    std::get<MemoryAlgorithm>(source).validate();
  }

  std::vector<std::vector<double>> pu(nblocks), pv(nblocks);
  std::vector<double> leaks(nblocks, 0.0);
  parallel_for(nblocks, [&](std::size_t bi) {
    std::vector<double> au(T, 0.0), av(T, 0.0);
    std::vector<double> ku(T), kv(T);
    std::vector<cplx> buf;
    std::size_t lo = bi * opts.block, hi = std::min(G, lo + opts.block);
    for (std::size_t gi = hi; gi-- > lo;) {
      const auto& grp = groups[gi];
      if (samples) {
        double lk = 0.0;
        detail::contour_kernels_from_samples(*samples, radius, grp.lambda, T, buf, ku, kv, &lk);
        leaks[bi] = std::max(leaks[bi], lk);
        for (std::size_t t = 0; t < T; ++t) {
          au[t] += grp.weight_u * ku[t] * ku[t];
          av[t] += grp.weight_v * kv[t] * kv[t];
        }
      } else {
        detail::matrix_kernels(std::get<MemoryAlgorithm>(source), grp.lambda, T,
                               [&](std::size_t t, double u, double v) {
                                 au[t] += grp.weight_u * u * u;
                                 av[t] += grp.weight_v * v * v;
                               });
      }
    }
    pu[bi] = std::move(au);
    pv[bi] = std::move(av);
  });

  PropagatorSeries s;
  s.tau1 = tau1;
  s.batch = batch;
  s.u.assign(T, 0.0);
  s.v.assign(T, 0.0);
  for (std::size_t bi = nblocks; bi-- > 0;) {
    for (std::size_t t = 0; t < T; ++t) {
      s.u[t] += pu[bi][t];
      s.v[t] += pv[bi][t];
    }
    s.max_leak = std::max(s.max_leak, leaks[bi]);
  }
  const double scale = tau1 / static_cast<double>(batch);
  for (double& x : s.u) x *= scale;
  return s;
}

struct SeriesTotal {
  double value = 0.0;    // partial + tail, or +inf when divergent
  double partial = 0.0;  // sum over the computed horizon
  double tail = 0.0;     // fitted power-law extrapolation beyond T
  double tail_exponent = std::numeric_limits<double>::quiet_NaN();
  bool divergent = false;
};

// Sum of a nonnegative sequence x_t, t = 1..T, with a power-law tail fitted on the last decade.
inline SeriesTotal series_total(std::span<const double> x) {
  SeriesTotal r;
  for (double e : x) {
    if (!std::isfinite(e)) throw numerical_error("series_total: non-finite entry");
    r.partial += e;
  }
  const std::size_t T = x.size();
  std::vector<double> t(T);
  std::iota(t.begin(), t.end(), 1.0);
  std::size_t positive = 0;
  double lo = std::max(1.0, static_cast<double>(T) / 10.0);
  for (std::size_t i = 0; i < T; ++i)
    if (t[i] >= lo && x[i] > 0.0) ++positive;
  if (positive < 20) {
    lo = 1.0;
    positive = static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [](double e) { return e > 0.0; }));
  }
  if (positive >= 3 && x.back() > 0.0) {
    PowerFit f = smoothed_power_fit(t, x, lo, static_cast<double>(T), 3);
    r.tail_exponent = f.exponent;
    if (f.exponent <= 1.0) {
      r.divergent = true;
      r.value = std::numeric_limits<double>::infinity();
      return r;
    }
    double edge = static_cast<double>(T) + 0.5;
    r.tail = f.prefactor * std::pow(edge, 1.0 - f.exponent) / (f.exponent - 1.0);
  }
  r.value = r.partial + r.tail;
  return r;
}

inline SeriesTotal total_noise(const PropagatorSeries& s) { return series_total(s.u); }

// Frequency-domain form: (tau1/|B|) sum_k lambda_k^2 (1/2pi) int |Psi(e^{i phi}) - lambda_k|^{-2} d phi,
// by the trapezoid rule on n points (spectrally accurate for rational maps).
inline double total_noise_frequency(const SpectralProblem& problem, const RationalMap& map, double tau1,
                                    std::size_t batch, std::size_t n = 1 << 16) {
  problem.validate();
  require(batch >= 1 && n >= 8, "total_noise_frequency: bad arguments");
  auto s = detail::circle_samples(map, n);
  double total = 0.0;
  for (std::size_t k = problem.size(); k-- > 0;) {
    double lam = problem.eigenvalues[k];
    double acc = 0.0;
    for (const auto& p : s.psi) acc += 1.0 / std::norm(p - lam);
    total += lam * lam * acc / static_cast<double>(n);
  }
  return tau1 / static_cast<double>(batch) * total;
}

enum class Provenance { theory, empirical };

inline std::string_view to_string(Provenance p) { return p == Provenance::theory ? "theory" : "empirical"; }

struct LossTrajectory {
  std::vector<std::size_t> steps;
  std::vector<double> loss;
  Provenance provenance = Provenance::theory;
  std::string fingerprint;
  std::optional<std::size_t> diverged_at;
};

// W_n = V_n + sum_{s<n} U_{n-s} W_s, L_t = W_{t+1}/2 for t = 0..T-1.
inline std::vector<double> loss_recursion(std::span<const double> u, std::span<const double> v, std::size_t T) {
  require(T >= 1, "loss_recursion: T must be at least 1");
  require(u.size() >= T && v.size() >= T, "loss_recursion: series shorter than horizon");
  std::vector<double> w(T);
  for (std::size_t n = 0; n < T; ++n) {
    double acc = v[n];
    for (std::size_t s = 0; s < n; ++s) acc += u[n - s - 1] * w[s];
    w[n] = acc;
  }
  for (double& x : w) x *= 0.5;
  return w;
}

inline LossTrajectory loss_from_propagators(const PropagatorSeries& s, std::size_t T) {
  LossTrajectory l;
  l.loss = loss_recursion(s.u, s.v, T);
  l.steps.resize(T);
  std::iota(l.steps.begin(), l.steps.end(), std::size_t{0});
  l.provenance = Provenance::theory;
  return l;
}

enum class Regime { immediate_divergence, divergence, signal_dominated, noise_dominated, converging_unclassified };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::immediate_divergence: return "immediate_divergence";
    case Regime::divergence: return "divergence";
    case Regime::signal_dominated: return "signal_dominated";
    case Regime::noise_dominated: return "noise_dominated";
    case Regime::converging_unclassified: return "converging_unclassified";
  }
  return "converging_unclassified";
}

struct RegimeReport {
  Regime regime = Regime::converging_unclassified;
  double u_sigma = 0.0;
  double v_sigma = std::numeric_limits<double>::quiet_NaN();
  double xi_u = std::numeric_limits<double>::quiet_NaN();
  double xi_v = std::numeric_limits<double>::quiet_NaN();
  double c_u = std::numeric_limits<double>::quiet_NaN();
  double c_v = std::numeric_limits<double>::quiet_NaN();
  double predicted_coeff = std::numeric_limits<double>::quiet_NaN();
  double loss_exponent = std::numeric_limits<double>::quiet_NaN();
  bool near_critical = false;  // |U_Sigma - 1| < 0.02, left unclassified
};

inline RegimeReport classify_regime(const PropagatorSeries& s) {
  const std::size_t T = s.size();
  require(T >= 100 && s.v.size() == T, "classify_regime: need at least 100 terms");
  RegimeReport r;
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(s.u.begin(), s.u.end(), finite) || !std::all_of(s.v.begin(), s.v.end(), finite)) {
    r.regime = Regime::immediate_divergence;
    r.u_sigma = std::numeric_limits<double>::infinity();
    return r;
  }
  std::vector<double> t(T);
  std::iota(t.begin(), t.end(), 1.0);
  double lo = static_cast<double>(T) / 10.0, hi = static_cast<double>(T);
  auto fit = [&](const std::vector<double>& x, double& xi, double& c) {
    try {
      PowerFit f = smoothed_power_fit(t, x, lo, hi);
      xi = f.exponent;
      c = f.prefactor;
    } catch (const config_error&) {
      // sequence vanished inside the window: faster than any power
      xi = std::numeric_limits<double>::infinity();
      c = 0.0;
    }
  };
  fit(s.u, r.xi_u, r.c_u);
  fit(s.v, r.xi_v, r.c_v);
  SeriesTotal us = series_total(s.u);
  r.u_sigma = us.value;
  if (std::abs(r.u_sigma - 1.0) < 0.02) {
    r.near_critical = true;
    r.regime = Regime::converging_unclassified;
    return r;
  }
  if (r.u_sigma > 1.0) {
    r.regime = Regime::divergence;
    return r;
  }
  if (r.xi_u > std::max(r.xi_v, 1.0)) {
    r.regime = Regime::signal_dominated;
    r.loss_exponent = r.xi_v;
    r.predicted_coeff = r.c_v / (2.0 * (1.0 - r.u_sigma));
  } else if (r.xi_u > 1.0 && r.xi_u < r.xi_v) {
    r.regime = Regime::noise_dominated;
    r.v_sigma = series_total(s.v).value;
    r.loss_exponent = r.xi_u;
    r.predicted_coeff = r.v_sigma * r.c_u / (2.0 * (1.0 - r.u_sigma) * (1.0 - r.u_sigma));
  }
  return r;
}

struct FiniteMemoryAsymptote {
  double v_pred = 0.0;
  double u_pred = 0.0;
};

// V_t ~ Q Gamma(zeta+1) (2 alpha_eff t)^{-zeta},
// U_t ~ (tau1/|B|) (alpha_eff Lambda)^{1/nu} Gamma(2-1/nu)/nu (2t)^{1/nu-2}.
template <class Source>
  requires std::same_as<Source, RationalMap> || std::same_as<Source, MemoryAlgorithm>
inline FiniteMemoryAsymptote finite_memory_asymptote(const Source& source, const SpectralProblem& problem,
                                                     double tau1, std::size_t batch, double t) {
  require(problem.meta.has_value(), "finite_memory_asymptote: problem has no power-law metadata");
  const auto& m = *problem.meta;
  require(m.nu > 0.5, "finite_memory_asymptote: nu <= 1/2 diverges immediately");
  require(batch >= 1 && t > 0.0, "finite_memory_asymptote: bad arguments");
  double a = effective_learning_rate(source);
  require(a > 0.0, "finite_memory_asymptote: effective learning rate must be positive");
  FiniteMemoryAsymptote r;
  r.v_pred = m.q_src * std::tgamma(m.zeta + 1.0) * std::pow(2.0 * a * t, -m.zeta);
  r.u_pred = tau1 / static_cast<double>(batch) * std::pow(a * m.lambda_scale, 1.0 / m.nu) *
             std::tgamma(2.0 - 1.0 / m.nu) / m.nu * std::pow(2.0 * t, 1.0 / m.nu - 2.0);
  return r;
}

struct Tau2Kernels {
  std::vector<double> g;
  std::vector<double> h;
};

// Iterates Z -> S Z S^T - (tau2/|B|) lambda^2 Z_00 a a^T with a = (-alpha; c), reading Z_00.
inline Tau2Kernels kernels_tau2(const MemoryAlgorithm& alg, double lambda, std::size_t T, double tau2,
                                std::size_t batch) {
  alg.validate();
  require(T >= 1 && batch >= 1, "kernels_tau2: bad arguments");
  const auto m = static_cast<Eigen::Index>(alg.memory());
  Eigen::MatrixXd s(m + 1, m + 1);
  s(0, 0) = 1.0 - alg.alpha * lambda;
  for (Eigen::Index i = 0; i < m; ++i) {
    s(0, i + 1) = alg.b[static_cast<std::size_t>(i)];
    s(i + 1, 0) = lambda * alg.c[static_cast<std::size_t>(i)];
  }
  s.bottomRightCorner(m, m) = alg.d;
  Eigen::VectorXd a(m + 1);
  a(0) = -alg.alpha;
  for (Eigen::Index i = 0; i < m; ++i) a(i + 1) = alg.c[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd aat = a * a.transpose();
  const double k = tau2 / static_cast<double>(batch) * lambda * lambda;
  auto run = [&](Eigen::MatrixXd z) {
    std::vector<double> out(T);
    for (std::size_t t = 0; t < T; ++t) {
      out[t] = z(0, 0);
      Eigen::MatrixXd next = s * z * s.transpose();
      next -= k * z(0, 0) * aat;
      z = std::move(next);
    }
    return out;
  };
  Tau2Kernels r;
  r.g = run(aat);
  Eigen::MatrixXd e0 = Eigen::MatrixXd::Zero(m + 1, m + 1);
  e0(0, 0) = 1.0;
  r.h = run(e0);
  return r;
}

}  // namespace corner_sgd
