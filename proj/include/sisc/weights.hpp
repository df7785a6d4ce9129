#ifndef SISC_WEIGHTS_HPP
#define SISC_WEIGHTS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sisc/errors.hpp"
#include "sisc/rng.hpp"

namespace sisc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum(exp(x))) with max subtraction. Returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> log_values) {
  double max = kNegInf;
  for (double v : log_values) {
    max = std::max(max, v);
  }
  if (max == kNegInf) {
    return kNegInf;
  }
  double sum = 0.0;
  for (double v : log_values) {
    sum += std::exp(v - max);
  }
  return max + std::log(sum);
}

/**
 * Normalizes unnormalized log weights.
 *
 * The maximum is subtracted before exponentiating so that products of many
 * density ratios do not underflow. Particles with log weight -inf get weight
 * exactly zero. Throws ParticleCollapse naming `time` when every weight is zero
 * and ModelError on NaN or +inf.
 */
inline std::vector<double> normalize_log_weights(std::span<const double> log_weights, std::size_t time) {
  double max = kNegInf;
  for (double v : log_weights) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw ModelError{"invalid log weight at time " + std::to_string(time)};
    }
    max = std::max(max, v);
  }
  if (max == kNegInf) {
    throw ParticleCollapse{time, "all importance weights are zero"};
  }
  std::vector<double> weights(log_weights.size());
  double total = 0.0;
  for (std::size_t j = 0; j < log_weights.size(); ++j) {
    weights[j] = std::exp(log_weights[j] - max);
    total += weights[j];
  }
  for (double& w : weights) {
    w /= total;
  }
  return weights;
}

/// 1 / sum(w^2) for normalized weights; lies in [1, n].
inline double effective_sample_size(std::span<const double> weights) {
  double sum_sq = 0.0;
  for (double w : weights) {
    sum_sq += w * w;
  }
  return sum_sq > 0.0 ? 1.0 / sum_sq : 0.0;
}

enum class ResamplerKind { kMultinomial, kSystematic };

/**
 * Draws `count` ancestor indices with probabilities proportional to `weights`.
 *
 * Multinomial draws are independent; systematic draws use one uniform offset
 * and a regular grid. Both replicate index j `count * w_j` times in expectation.
 */
inline std::vector<std::size_t> resample_indices(std::span<const double> weights, std::size_t count, Stream& stream,
                                                 ResamplerKind kind = ResamplerKind::kMultinomial) {
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.empty() ? 0.0 : cumulative.back();
  std::vector<std::size_t> indices;
  indices.reserve(count);
  if (weights.empty() || count == 0) {
    return indices;
  }
  // Last index with positive weight; guards against u landing past a rounded total.
  std::size_t last = weights.size() - 1;
  while (last > 0 && weights[last] <= 0.0) {
    --last;
  }
  auto pick = [&](double u) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u * total);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), last);
  };
  if (kind == ResamplerKind::kMultinomial) {
    for (std::size_t k = 0; k < count; ++k) {
      indices.push_back(pick(stream.uniform()));
    }
  } else {
    const double offset = stream.uniform();
    for (std::size_t k = 0; k < count; ++k) {
      indices.push_back(pick((static_cast<double>(k) + offset) / static_cast<double>(count)));
    }
  }
  return indices;
}

/// Replaces `population` by `population.size()` draws proportional to `weights`.
template <class Particle>
std::vector<Particle> resample(const std::vector<Particle>& population, std::span<const double> weights, Stream& stream,
                               ResamplerKind kind = ResamplerKind::kMultinomial) {
  const auto indices = resample_indices(weights, population.size(), stream, kind);
  std::vector<Particle> result;
  result.reserve(indices.size());
  for (std::size_t index : indices) {
    result.push_back(population[index]);
  }
  return result;
}

}  // namespace sisc

#endif
