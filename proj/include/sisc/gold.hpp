#ifndef SISC_GOLD_HPP
#define SISC_GOLD_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sisc/errors.hpp"
#include "sisc/matrix.hpp"
#include "sisc/models/ar1.hpp"
#include "sisc/stats.hpp"

/**
 * \file
 * \brief Closed-form posteriors of missing AR(1) values given exact observations.
 *
 * By the Markov property a missing x^i depends on the data only through the
 * nearest known values on either side. Times are 1-based.
 */

namespace sisc {

struct GaussianPosterior {
  double mean = 0.0;
  double variance = 1.0;
};

/// Posterior of x^i given x^tau and x^m for tau < i < m.
inline GaussianPosterior bridge_posterior(const Ar1Params& params, std::size_t tau, std::size_t m, std::size_t i,
                                          double x_tau, double x_m) {
  if (!(tau < i && i < m)) {
    throw InputError{"bridge posterior needs tau < i < m"};
  }
  const std::size_t before = i - tau;
  const std::size_t after = m - i;
  const double s_before = geometric_sum(params.phi, before);
  const double s_after = geometric_sum(params.phi, after);
  const double s_total = geometric_sum(params.phi, m - tau);
  const double mean = (std::pow(params.phi, static_cast<double>(after)) * s_before * x_m +
                       std::pow(params.phi, static_cast<double>(before)) * s_after * x_tau) /
                      s_total;
  return {mean, params.sigma2 * s_after * s_before / s_total};
}

/**
 * Posterior of x^i given only x^tau, on either side.
 *
 * A stationary Gaussian AR(1) is time-reversible, so a leading value (i < tau)
 * has the same law as a forward one at the same distance.
 */
inline GaussianPosterior tail_posterior(const Ar1Params& params, std::size_t tau, std::size_t i, double x_tau) {
  if (i == tau) {
    throw InputError{"tail posterior needs i != tau"};
  }
  const std::size_t distance = i > tau ? i - tau : tau - i;
  return {std::pow(params.phi, static_cast<double>(distance)) * x_tau,
          params.sigma2 * geometric_sum(params.phi, distance)};
}

struct OracleComparison {
  double ks_distance = 0.0;
  double mean_error = 0.0;
  double variance_error = 0.0;
};

/// Weighted-ECDF vs normal-CDF sup distance and absolute moment errors.
inline OracleComparison compare_to_oracle(std::span<const double> values, std::span<const double> weights,
                                          const GaussianPosterior& oracle) {
  OracleComparison result;
  result.ks_distance =
      ks_distance(values, weights, [&](double x) { return normal_cdf(x, oracle.mean, oracle.variance); });
  result.mean_error = std::abs(weighted_mean(values, weights) - oracle.mean);
  result.variance_error = std::abs(weighted_variance(values, weights) - oracle.variance);
  return result;
}

enum class BlockKind { kInterior, kLeading, kTrailing, kUnobserved };

inline const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kInterior:
      return "interior";
    case BlockKind::kLeading:
      return "leading";
    case BlockKind::kTrailing:
      return "trailing";
    case BlockKind::kUnobserved:
      return "unobserved";
  }
  return "?";
}

struct MissingValuePosterior {
  std::size_t time = 0;   ///< 1-based
  BlockKind kind = BlockKind::kInterior;
  std::size_t left = 0;   ///< nearest known time before, 0 if none
  std::size_t right = 0;  ///< nearest known time after, 0 if none
  GaussianPosterior posterior;
};

/// Exact posterior of every missing value of a scalar observation matrix z^t.
inline std::vector<MissingValuePosterior> gold_posteriors(const Ar1Params& params,
                                                          const ObservationMatrix<double>& observations) {
  const std::size_t t = observations.rows();
  std::vector<MissingValuePosterior> result;
  for (std::size_t i = 1; i <= t; ++i) {
    if (observations(i - 1, 0).has_value()) {
      continue;
    }
    MissingValuePosterior entry;
    entry.time = i;
    for (std::size_t k = i; k-- > 1;) {
      if (observations(k - 1, 0).has_value()) {
        entry.left = k;
        break;
      }
    }
    for (std::size_t k = i + 1; k <= t; ++k) {
      if (observations(k - 1, 0).has_value()) {
        entry.right = k;
        break;
      }
    }
    if (entry.left != 0 && entry.right != 0) {
      entry.kind = BlockKind::kInterior;
      entry.posterior = bridge_posterior(params, entry.left, entry.right, i, *observations(entry.left - 1, 0),
                                         *observations(entry.right - 1, 0));
    } else if (entry.left != 0) {
      entry.kind = BlockKind::kTrailing;
      entry.posterior = tail_posterior(params, entry.left, i, *observations(entry.left - 1, 0));
    } else if (entry.right != 0) {
      entry.kind = BlockKind::kLeading;
      entry.posterior = tail_posterior(params, entry.right, i, *observations(entry.right - 1, 0));
    } else {
      entry.kind = BlockKind::kUnobserved;
      entry.posterior = {0.0, params.stationary_variance()};
    }
    result.push_back(entry);
  }
  return result;
}

}  // namespace sisc

#endif
