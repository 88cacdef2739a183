// Loss curves of plain GD and a memory-5 corner algorithm on a power-law problem,
// next to the exponents the asymptotic theory predicts.
#include <cstdio>
#include <numeric>
#include <string>

#include "corner_sgd/corner_sgd.hpp"

using namespace corner_sgd;

int main() {
  const double nu = 4.0, zeta = 0.25;
  const std::size_t T = 5000;
  auto problem = power_law_problem(nu, zeta, 1.0, 1.0, 5000);
  const double top = problem.eigenvalues.front();

  struct Entry {
    const char* name;
    MemoryAlgorithm alg;
    double predicted;
  } runs[] = {
      {"plain", plain_gd(1.9 / top), zeta},
      {"corner 1.5", algorithm_from_corner({1.5, top / 1.9, 5, 5.0}), 1.5 * zeta},
      {"corner 1.8", algorithm_from_corner({1.8, top / 1.9, 5, 5.0}), 1.8 * zeta},
  };

  std::printf("%-12s %10s %10s %10s %10s\n", "algorithm", "L(100)", ("L(" + std::to_string(T - 1) + ")").c_str(),
              "fitted", "predicted");
  for (auto& r : runs) {
    auto series = aggregate(problem, r.alg, T + 1, 1.0, 100);
    auto loss = loss_from_propagators(series, T);
    auto fit = fit_loss_exponent(loss, 100.0, static_cast<double>(T - 1));
    std::printf("%-12s %10.4g %10.4g %10.4f %10.3f\n", r.name, loss.loss[100], loss.loss[T - 1], fit.exponent,
                r.predicted);
  }
  auto th = theta_max(zeta, nu);
  std::printf("largest useful theta for (zeta, nu) = (%.2f, %.1f): %.3f, region %s\n", zeta, nu, th.theta_max,
              std::string(to_string(th.region)).c_str());
}
