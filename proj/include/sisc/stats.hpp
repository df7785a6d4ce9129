#ifndef SISC_STATS_HPP
#define SISC_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace sisc {

inline double normal_cdf(double x, double mean, double variance) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

inline double normal_log_density(double x, double mean, double variance) {
  constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(variance)) - d * d / (2.0 * variance);
}

/// Weighted mean, accumulated around the first positive-weight value so a point mass is returned exactly.
inline double weighted_mean(std::span<const double> values, std::span<const double> weights) {
  const auto first = std::find_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
  const double shift = first == weights.end() ? 0.0 : values[static_cast<std::size_t>(first - weights.begin())];
  double sum = 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (weights[j] > 0.0) {
      sum += weights[j] * (values[j] - shift);
      total += weights[j];
    }
  }
  return shift + sum / total;
}

inline double weighted_variance(std::span<const double> values, std::span<const double> weights) {
  const double mean = weighted_mean(values, weights);
  double sum = 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    sum += weights[j] * (values[j] - mean) * (values[j] - mean);
    total += weights[j];
  }
  return sum / total;
}

/// A weighted sample collapsed onto its distinct values, sorted ascending.
struct WeightedAtoms {
  std::vector<double> values;
  std::vector<double> weights;  ///< normalized
};

inline WeightedAtoms collapse_atoms(std::span<const double> values, std::span<const double> weights) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  WeightedAtoms atoms;
  double total = 0.0;
  for (std::size_t j : order) {
    if (weights[j] <= 0.0) {
      continue;
    }
    if (!atoms.values.empty() && atoms.values.back() == values[j]) {
      atoms.weights.back() += weights[j];
    } else {
      atoms.values.push_back(values[j]);
      atoms.weights.push_back(weights[j]);
    }
    total += weights[j];
  }
  for (double& w : atoms.weights) {
    w /= total;
  }
  return atoms;
}

/// Smallest sample value whose cumulative weight reaches `q`.
inline double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  const auto atoms = collapse_atoms(values, weights);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < atoms.values.size(); ++k) {
    cumulative += atoms.weights[k];
    if (cumulative >= q - 1e-12) {
      return atoms.values[k];
    }
  }
  return atoms.values.back();
}

/**
 * Standard error of a self-normalized weighted mean.
 *
 * Identical values are merged first: after resampling, copies of one ancestor
 * are perfectly correlated and must not count as independent draws.
 */
inline double weighted_mean_standard_error(std::span<const double> values, std::span<const double> weights) {
  const auto atoms = collapse_atoms(values, weights);
  const double mean = weighted_mean(atoms.values, atoms.weights);
  double sum = 0.0;
  for (std::size_t k = 0; k < atoms.values.size(); ++k) {
    const double d = atoms.values[k] - mean;
    sum += atoms.weights[k] * atoms.weights[k] * d * d;
  }
  return std::sqrt(sum);
}

/// Effective sample size of the distinct values of a weighted sample.
inline double distinct_effective_sample_size(std::span<const double> values, std::span<const double> weights) {
  const auto atoms = collapse_atoms(values, weights);
  double sum_sq = 0.0;
  for (double w : atoms.weights) {
    sum_sq += w * w;
  }
  return 1.0 / sum_sq;
}

/// sup_x |F_w(x) - F(x)| between the weighted empirical CDF and a continuous CDF.
inline double ks_distance(std::span<const double> values, std::span<const double> weights,
                          const std::function<double(double)>& cdf) {
  const auto atoms = collapse_atoms(values, weights);
  double below = 0.0;
  double distance = 0.0;
  for (std::size_t k = 0; k < atoms.values.size(); ++k) {
    const double f = cdf(atoms.values[k]);
    const double above = below + atoms.weights[k];
    distance = std::max({distance, std::abs(f - below), std::abs(above - f)});
    below = above;
  }
  return distance;
}

}  // namespace sisc

#endif
