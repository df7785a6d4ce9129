#ifndef SISC_MODELS_AR1_HPP
#define SISC_MODELS_AR1_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sisc/engine.hpp"
#include "sisc/errors.hpp"
#include "sisc/matrix.hpp"
#include "sisc/rng.hpp"
#include "sisc/stats.hpp"

/**
 * \file
 * \brief Stationary Gaussian AR(1) process with Bernoulli missing-at-random revelation.
 *
 * x^1 ~ N(0, sigma2 / (1 - phi^2)), x^t | x^{t-1} ~ N(phi x^{t-1}, sigma2).
 * Every still-unknown past value is revealed independently with probability
 * theta at each step. Revelation does not depend on the state, so the
 * observation process drops out of the weights and the filter never
 * simulates it.
 */

namespace sisc {

struct Ar1Params {
  double phi = 0.5;
  double sigma2 = 1.0;
  double theta = 0.2;  ///< per-step revelation probability

  /// Validated construction: |phi| < 1, sigma2 > 0, theta in [0, 1].
  static Ar1Params make(double phi, double sigma2, double theta) {
    if (!(std::abs(phi) < 1.0)) {
      throw InputError{"AR(1) requires |phi| < 1 for stationarity, got " + std::to_string(phi)};
    }
    if (!(sigma2 > 0.0)) {
      throw InputError{"AR(1) requires sigma2 > 0, got " + std::to_string(sigma2)};
    }
    if (!(theta >= 0.0 && theta <= 1.0)) {
      throw InputError{"revelation probability theta must lie in [0, 1], got " + std::to_string(theta)};
    }
    return Ar1Params{phi, sigma2, theta};
  }

  double stationary_variance() const { return sigma2 / (1.0 - phi * phi); }
};

/// Sum_{j=0}^{k-1} phi^{2j}, the k-step variance factor.
inline double geometric_sum(double phi, std::size_t k) {
  const double phi2 = phi * phi;
  if (k == 0) {
    return 0.0;
  }
  if (phi2 == 0.0) {
    return 1.0;
  }
  return (1.0 - std::pow(phi2, static_cast<double>(k))) / (1.0 - phi2);
}

inline double ar1_initial_sample(const Ar1Params& params, Stream& stream) {
  std::normal_distribution<double> normal{0.0, std::sqrt(params.stationary_variance())};
  return normal(stream);
}

inline double ar1_transition_sample(const Ar1Params& params, double previous, Stream& stream) {
  std::normal_distribution<double> normal{params.phi * previous, std::sqrt(params.sigma2)};
  return normal(stream);
}

inline double ar1_initial_log_density(const Ar1Params& params, double x) {
  return normal_log_density(x, 0.0, params.stationary_variance());
}

inline double ar1_transition_log_density(const Ar1Params& params, double previous, double current) {
  return normal_log_density(current, params.phi * previous, params.sigma2);
}

/**
 * Draws b^t from b^{t-1}: every unknown cell of the previous mask flips to
 * known with probability theta, and the new time row is revealed cell by cell
 * with the same probability. Known cells stay known.
 */
inline KnowledgeMatrix revelation_sample(const Ar1Params& params, const KnowledgeMatrix& previous, std::size_t cols,
                                         Stream& stream) {
  KnowledgeMatrix next(previous.rows() + 1, cols, 0);
  for (std::size_t i = 0; i < next.rows(); ++i) {
    for (std::size_t m = 0; m < cols; ++m) {
      const bool known = i < previous.rows() && previous(i, m) != 0;
      const double u = stream.uniform();
      next(i, m) = (known || u < params.theta) ? 1 : 0;
    }
  }
  return next;
}

/**
 * Log partial weight of the U1 scheme at 0-based `row` for scalar paths.
 *
 * Row 0 compares stationary densities, exp(-(1 - phi^2) x^2 / (2 sigma2));
 * later rows compare transition kernels, exp(-(x^i - phi x^{i-1})^2 / (2 sigma2)).
 * Normalizing constants cancel in the ratio.
 */
inline double ar1_partial_log_weight(const Ar1Params& params, std::span<const double> original,
                                     std::span<const double> corrected, std::size_t row) {
  if (original[row] == corrected[row] && (row == 0 || original[row - 1] == corrected[row - 1])) {
    return 0.0;
  }
  if (row == 0) {
    const double c = (1.0 - params.phi * params.phi) / (2.0 * params.sigma2);
    return -c * corrected[0] * corrected[0] + c * original[0] * original[0];
  }
  const double dc = corrected[row] - params.phi * corrected[row - 1];
  const double d0 = original[row] - params.phi * original[row - 1];
  return -(dc * dc - d0 * d0) / (2.0 * params.sigma2);
}

/**
 * Log prior mass of the fiber of a corrected scalar path at time `t`.
 *
 * The newly observed rows form blocks of consecutive indices. A block p..q
 * touches the factors p..q+1; integrating them over the block's values gives
 * the (q - p + 2)-step transition density between the flanking known values,
 * the stationary density of the right flank for a leading block, and 1 for a
 * block that reaches the current time.
 */
inline FiberMass ar1_u2_fiber_mass(const Ar1Params& params, std::span<const double> corrected,
                                   std::span<const std::size_t> newly_observed_rows) {
  FiberMass fiber;
  const std::size_t t = corrected.size();
  std::size_t k = 0;
  while (k < newly_observed_rows.size()) {
    const std::size_t p = newly_observed_rows[k];
    std::size_t q = p;
    while (k + 1 < newly_observed_rows.size() && newly_observed_rows[k + 1] == q + 1) {
      ++k;
      ++q;
    }
    ++k;
    for (std::size_t i = p; i <= q; ++i) {
      fiber.factor_rows.push_back(i);
    }
    if (q + 1 < t) {
      fiber.factor_rows.push_back(q + 1);
      const double right = corrected[q + 1];
      if (p > 0) {
        const std::size_t steps = q - p + 2;
        const double mean = std::pow(params.phi, static_cast<double>(steps)) * corrected[p - 1];
        fiber.log_mass += normal_log_density(right, mean, params.sigma2 * geometric_sum(params.phi, steps));
      } else {
        fiber.log_mass += normal_log_density(right, 0.0, params.stationary_variance());
      }
    }
  }
  return fiber;
}

/// Engine adapter for the AR(1) model (one coordinate per time).
class Ar1Model {
 public:
  using value_type = double;
  static constexpr bool kMissingAtRandom = true;

  /// U1 box defaults to +-8 stationary standard deviations around 0.
  explicit Ar1Model(Ar1Params params)
      : Ar1Model{params, -8.0 * std::sqrt(params.stationary_variance()), 8.0 * std::sqrt(params.stationary_variance())} {}

  Ar1Model(Ar1Params params, double u1_lower, double u1_upper)
      : params_{params}, u1_lower_{u1_lower}, u1_upper_{u1_upper} {
    if (!(u1_lower < u1_upper)) {
      throw InputError{"U1 bounds must satisfy lower < upper"};
    }
  }

  const Ar1Params& params() const noexcept { return params_; }
  double u1_lower() const noexcept { return u1_lower_; }
  double u1_upper() const noexcept { return u1_upper_; }

  std::size_t dimension() const noexcept { return 1; }

  std::vector<double> sample_initial(Stream& stream) const { return {ar1_initial_sample(params_, stream)}; }

  std::vector<double> sample_transition(std::span<const double> previous, Stream& stream) const {
    return {ar1_transition_sample(params_, previous[0], stream)};
  }

  double initial_log_density(std::span<const double> row) const { return ar1_initial_log_density(params_, row[0]); }

  double transition_log_density(std::span<const double> previous, std::span<const double> current) const {
    return ar1_transition_log_density(params_, previous[0], current[0]);
  }

  bool u1_contains(Cell /*cell*/, double value) const { return value >= u1_lower_ && value <= u1_upper_; }

  FiberMass u2_fiber_mass(const TrajectoryMatrix<double>& corrected, const ObservationHistory<double>& history,
                          std::size_t t) const {
    std::vector<std::size_t> rows;
    for (const Cell& cell : history.newly_observed(t)) {
      rows.push_back(cell.row);
    }
    return ar1_u2_fiber_mass(params_, corrected.data(), rows);
  }

 private:
  Ar1Params params_;
  double u1_lower_;
  double u1_upper_;
};

struct Ar1Truth {
  std::vector<double> path;
  std::vector<ObservationMatrix<double>> feed;  ///< z^1, ..., z^T
};

/// Simulates a stationary path of length `steps` and its revelation feed.
inline Ar1Truth simulate_ar1_truth(const Ar1Params& params, std::size_t steps, std::uint64_t seed) {
  Ar1Truth truth;
  TrajectoryMatrix<double> path;
  KnowledgeMatrix knowledge;
  for (std::size_t t = 1; t <= steps; ++t) {
    Stream stream{seed, StreamPurpose::kTruth, 0, t};
    const double x = t == 1 ? ar1_initial_sample(params, stream) : ar1_transition_sample(params, truth.path.back(), stream);
    truth.path.push_back(x);
    path.append_row(std::vector<double>{x});
    Stream reveal{seed, StreamPurpose::kTruthObserve, 0, t};
    knowledge = revelation_sample(params, knowledge, 1, reveal);
    truth.feed.push_back(observe(path, knowledge));
  }
  return truth;
}

}  // namespace sisc

#endif
