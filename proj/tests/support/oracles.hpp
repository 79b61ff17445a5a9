#pragma once

// Brute-force reference computations, written without the library's
// closed forms so they can catch algebra mistakes.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace vaer::testing {

/// Composite Simpson rule with n (even) intervals.
template <class F>
double simpson(F&& f, double a, double b, int n = 4000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// KL(N(mu, sigma^2) || N(0, 1)) per dimension by integrating q log(q / p).
inline double kl_quadrature(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double m = mu(j), s = sigma(j);
    total += simpson(
        [&](double x) {
          const double q = normal_pdf(x, m, s);
          if (q <= 0.0) return 0.0;
          return q * (std::log(q) - std::log(normal_pdf(x, 0.0, 1.0)));
        },
        m - 12.0 * s, m + 12.0 * s, 6000);
  }
  return total;
}

/// Squared 2-Wasserstein distance between product Gaussians from the
/// one-dimensional optimal (monotone) coupling x = mu_p + sigma_p z,
/// y = mu_q + sigma_q z, integrated over z ~ N(0, 1).
inline double w2_quadrature(const Eigen::VectorXd& mu_p, const Eigen::VectorXd& sigma_p,
                            const Eigen::VectorXd& mu_q, const Eigen::VectorXd& sigma_q) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < mu_p.size(); ++j) {
    total += simpson(
        [&](double z) {
          const double gap = (mu_p(j) + sigma_p(j) * z) - (mu_q(j) + sigma_q(j) * z);
          return gap * gap * normal_pdf(z, 0.0, 1.0);
        },
        -12.0, 12.0, 4000);
  }
  return total;
}

/// H(p) = integral_0^p ln((1 - t) / t) dt, by the midpoint rule (the
/// endpoint singularities are integrable and never sampled).
inline double entropy_integral(double p, int n = 200000) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  const double h = p / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) * h;
    s += std::log1p(-t) - std::log(t);
  }
  return s * h;
}

/// Gaussian KDE summed over every sample, Silverman bandwidth from the
/// sample standard deviation.
inline double kde_brute(const std::vector<double>& samples, double x, double min_bandwidth = 1e-3) {
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const double h = std::max(1.06 * sd * std::pow(n, -0.2), min_bandwidth);
  double s = 0.0;
  for (double v : samples) s += normal_pdf(x, v, h);
  return s / n;
}

}  // namespace vaer::testing
