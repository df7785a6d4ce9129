#ifndef SISC_ENGINE_HPP
#define SISC_ENGINE_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sisc/errors.hpp"
#include "sisc/matrix.hpp"
#include "sisc/rng.hpp"
#include "sisc/stats.hpp"
#include "sisc/weights.hpp"

/**
 * \file
 * \brief Sequential importance sampling with deterministic corrections.
 *
 * Each step propagates particles under the model, overwrites them with the
 * newly revealed exact observations, and reweights the (uncorrected,
 * corrected) pair so the corrected particles target the posterior. Weights
 * are products of per-time density ratios ("partial weights") that equal one
 * wherever correction left rows i and i-1 untouched, so only touched rows are
 * evaluated.
 */

namespace sisc {

/// Auxiliary density on the set of uncorrected states that correct to the same state.
enum class AuxiliaryScheme {
  kU1,  ///< uniform on a bounded box; weight is the product of partial weights
  kU2,  ///< prior restricted to the fiber; weight is prior density over fiber mass
};

/// Log mass of the prior restricted to a fiber, over the factors it integrates.
struct FiberMass {
  double log_mass = 0.0;
  std::vector<std::size_t> factor_rows;  ///< rows whose f (and g) factors were integrated
};

/**
 * What the engine needs from a model.
 *
 * Rows are spans of `value_type` of length `dimension()`. Densities are
 * returned as logs; -inf marks an impossible transition. `u1_contains` bounds
 * the box of the U1 scheme per cell; `u2_fiber_mass` integrates the prior over
 * the uncorrected states that map to the corrected trajectory at time t.
 * Correction itself is the generic overwrite by observed values.
 */
template <class M>
concept Model = requires(const M& model, Stream& stream, std::span<const typename M::value_type> row,
                         const TrajectoryMatrix<typename M::value_type>& trajectory,
                         const ObservationHistory<typename M::value_type>& history, Cell cell,
                         typename M::value_type value, std::size_t t) {
  { M::kMissingAtRandom } -> std::convertible_to<bool>;
  { model.dimension() } -> std::convertible_to<std::size_t>;
  { model.sample_initial(stream) } -> std::same_as<std::vector<typename M::value_type>>;
  { model.sample_transition(row, stream) } -> std::same_as<std::vector<typename M::value_type>>;
  { model.initial_log_density(row) } -> std::convertible_to<double>;
  { model.transition_log_density(row, row) } -> std::convertible_to<double>;
  { model.u1_contains(cell, value) } -> std::convertible_to<bool>;
  { model.u2_fiber_mass(trajectory, history, t) } -> std::same_as<FiberMass>;
};

/// Models whose observation process depends on the state (g is not constant).
template <class M>
concept ObservationProcessModel =
    Model<M> && requires(const M& model, Stream& stream, std::span<const typename M::value_type> row,
                         const KnowledgeMatrix& knowledge) {
      { model.sample_knowledge(row, knowledge, stream) } -> std::same_as<KnowledgeMatrix>;
      { model.observation_log_density(knowledge, row, knowledge) } -> std::convertible_to<double>;
    };

template <class T>
struct Particle {
  TrajectoryMatrix<T> trajectory;
  KnowledgeMatrix knowledge;
  double weight = 0.0;
  std::vector<double> partial_log;  ///< log partial weight per row from the latest reweighting
  std::uint64_t stream = 0;         ///< index keying this particle's random streams
};

namespace detail {

template <class T>
bool rows_equal(const TrajectoryMatrix<T>& a, const TrajectoryMatrix<T>& b, std::size_t row) {
  const auto ra = a.row(row);
  const auto rb = b.row(row);
  return std::equal(ra.begin(), ra.end(), rb.begin(), rb.end());
}

template <class M>
double log_f(const M& model, const TrajectoryMatrix<typename M::value_type>& x, std::size_t row) {
  return row == 0 ? model.initial_log_density(x.row(0)) : model.transition_log_density(x.row(row - 1), x.row(row));
}

inline const KnowledgeMatrix& empty_knowledge() {
  static const KnowledgeMatrix kEmpty;
  return kEmpty;
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t j = 0; j < count; ++j) {
      fn(j);
    }
    return;
  }
  threads = std::min(threads, count);
  const std::size_t chunk = (count + threads - 1) / threads;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t j = w * chunk; j < std::min(count, (w + 1) * chunk); ++j) {
            fn(j);
          }
        } catch (...) {
          const std::lock_guard lock{failure_mutex};
          if (!failure) {
            failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

}  // namespace detail

/**
 * Appends the next time row to `particle`: a draw from the initial law or the
 * transition kernel, and, for state-dependent observation processes, a
 * simulated knowledge mask. Missing-at-random models skip the knowledge draw.
 */
template <Model M>
void propagate(const M& model, Particle<typename M::value_type>& particle, std::uint64_t seed) {
  const std::size_t t = particle.trajectory.rows() + 1;
  Stream stream{seed, StreamPurpose::kPropagate, particle.stream, t};
  auto row = t == 1 ? model.sample_initial(stream) : model.sample_transition(particle.trajectory.row(t - 2), stream);
  if (row.size() != model.dimension()) {
    throw ModelError{"sampler returned a row of width " + std::to_string(row.size())};
  }
  particle.trajectory.append_row(row);
  if constexpr (M::kMissingAtRandom) {
    particle.knowledge.append_row(std::vector<std::uint8_t>(model.dimension(), 0));
  } else {
    Stream observe{seed, StreamPurpose::kObserve, particle.stream, t};
    particle.knowledge = model.sample_knowledge(particle.trajectory.row(t - 1), particle.knowledge, observe);
    if (particle.knowledge.rows() != t) {
      throw ModelError{"knowledge sampler returned " + std::to_string(particle.knowledge.rows()) + " rows at time " +
                       std::to_string(t)};
    }
  }
}

/// Overwrites known coordinates with their observed values and adopts the observed knowledge mask.
template <class T>
Particle<T> correct(Particle<T> particle, const ObservationMatrix<T>& observations, const KnowledgeMatrix& knowledge) {
  if (observations.rows() != particle.trajectory.rows() || observations.cols() != particle.trajectory.cols()) {
    throw InputError{"observation shape does not match particle at time " + std::to_string(observations.rows())};
  }
  for (std::size_t i = 0; i < observations.rows(); ++i) {
    for (std::size_t m = 0; m < observations.cols(); ++m) {
      if (const auto& cell = observations(i, m)) {
        particle.trajectory(i, m) = *cell;
      }
    }
  }
  particle.knowledge = knowledge;
  return particle;
}

template <class T>
Particle<T> correct(Particle<T> particle, const ObservationMatrix<T>& observations) {
  return correct(std::move(particle), observations, knowledge_of(observations));
}

/**
 * Log partial weight at 0-based `row`: the log ratio of the f (and g) factors
 * between corrected and original histories. Exactly 0 when neither this row
 * nor the previous one changed. -inf is a legal result; a zero density on the
 * original (sampled) side throws ModelError.
 *
 * `history` must hold observations up to the particles' current time.
 */
template <Model M>
double partial_log_weight(const M& model, const Particle<typename M::value_type>& original,
                          const Particle<typename M::value_type>& corrected,
                          const ObservationHistory<typename M::value_type>& history, std::size_t row) {
  const std::size_t t = corrected.trajectory.rows();
  const bool row_changed = !detail::rows_equal(original.trajectory, corrected.trajectory, row);
  const bool prev_changed = row > 0 && !detail::rows_equal(original.trajectory, corrected.trajectory, row - 1);

  double numerator = 0.0;
  double denominator = 0.0;
  if (row_changed || prev_changed) {
    numerator += detail::log_f(model, corrected.trajectory, row);
    denominator += detail::log_f(model, original.trajectory, row);
  }
  if constexpr (!M::kMissingAtRandom) {
    const bool last = row + 1 == t;
    const auto& knowledge_original = last ? original.knowledge : history.knowledge(row + 1);
    const auto& knowledge_corrected = last ? corrected.knowledge : history.knowledge(row + 1);
    if (row_changed || !(knowledge_original == knowledge_corrected)) {
      const auto& knowledge_prev = row == 0 ? detail::empty_knowledge() : history.knowledge(row);
      numerator += model.observation_log_density(knowledge_corrected, corrected.trajectory.row(row), knowledge_prev);
      denominator += model.observation_log_density(knowledge_original, original.trajectory.row(row), knowledge_prev);
    }
  }
  if (denominator == kNegInf) {
    throw ModelError{"sampled particle has zero prior density at row " + std::to_string(row + 1)};
  }
  if (numerator == kNegInf) {
    return kNegInf;
  }
  return numerator - denominator;
}

/// Rows whose partial weight can differ from 1: changed rows, their successors, and the last row when the mask changed.
template <Model M>
std::vector<std::size_t> touched_rows(const Particle<typename M::value_type>& original,
                                      const Particle<typename M::value_type>& corrected) {
  const std::size_t t = corrected.trajectory.rows();
  std::vector<std::size_t> rows;
  bool prev_changed = false;
  for (std::size_t i = 0; i < t; ++i) {
    const bool changed = !detail::rows_equal(original.trajectory, corrected.trajectory, i);
    if (changed || prev_changed) {
      rows.push_back(i);
    }
    prev_changed = changed;
  }
  if constexpr (!M::kMissingAtRandom) {
    if (t > 0 && (rows.empty() || rows.back() != t - 1) && !(original.knowledge == corrected.knowledge)) {
      rows.push_back(t - 1);
    }
  }
  return rows;
}

enum class Reweighting {
  kSparse,  ///< only rows touched by the correction
  kFull,    ///< every row of the history
};

/**
 * Unnormalized log weight under the U1 scheme.
 *
 * Returns -inf when a newly observed coordinate of the uncorrected particle
 * lies outside the model's U1 box; such particles are discarded before
 * normalization. Fills `partial_log` (one entry per row) when given.
 */
template <Model M>
double log_weight_u1(const M& model, const Particle<typename M::value_type>& original,
                     const Particle<typename M::value_type>& corrected,
                     const ObservationHistory<typename M::value_type>& history,
                     Reweighting mode = Reweighting::kSparse, std::vector<double>* partial_log = nullptr) {
  const std::size_t t = corrected.trajectory.rows();
  if (partial_log != nullptr) {
    partial_log->assign(t, 0.0);
  }
  for (const Cell& cell : history.newly_observed(t)) {
    if (!model.u1_contains(cell, original.trajectory(cell.row, cell.col))) {
      return kNegInf;
    }
  }
  std::vector<std::size_t> rows;
  if (mode == Reweighting::kSparse) {
    rows = touched_rows<M>(original, corrected);
  } else {
    rows.resize(t);
    for (std::size_t i = 0; i < t; ++i) {
      rows[i] = i;
    }
  }
  double total = 0.0;
  for (std::size_t i : rows) {
    const double w = partial_log_weight(model, original, corrected, history, i);
    if (partial_log != nullptr) {
      (*partial_log)[i] = w;
    }
    if (w == kNegInf) {
      return kNegInf;
    }
    total += w;
  }
  return total;
}

/// log v at `row`: the f (and g) factor of a corrected particle, whose knowledge equals the observed history.
template <Model M>
double log_prior_factor(const M& model, const TrajectoryMatrix<typename M::value_type>& corrected,
                        const ObservationHistory<typename M::value_type>& history, std::size_t row) {
  double value = detail::log_f(model, corrected, row);
  if constexpr (!M::kMissingAtRandom) {
    const auto& knowledge_prev = row == 0 ? detail::empty_knowledge() : history.knowledge(row);
    value += model.observation_log_density(history.knowledge(row + 1), corrected.row(row), knowledge_prev);
  }
  return value;
}

/**
 * Unnormalized log weight under the U2 scheme: the prior factors the model
 * integrated over the fiber, evaluated at the corrected particle, minus the
 * log fiber mass. A vanishing fiber mass cannot occur for a sampled particle
 * (it lies in its own fiber) and is reported as particle collapse.
 */
template <Model M>
double log_weight_u2(const M& model, const Particle<typename M::value_type>& corrected,
                     const ObservationHistory<typename M::value_type>& history,
                     std::vector<double>* partial_log = nullptr) {
  const std::size_t t = corrected.trajectory.rows();
  const FiberMass fiber = model.u2_fiber_mass(corrected.trajectory, history, t);
  if (fiber.log_mass == kNegInf) {
    throw ParticleCollapse{t, "prior mass of a correction fiber is zero"};
  }
  if (std::isnan(fiber.log_mass) || fiber.log_mass == -kNegInf) {
    throw ModelError{"invalid fiber mass at time " + std::to_string(t)};
  }
  if (partial_log != nullptr) {
    partial_log->assign(t, 0.0);
  }
  double total = 0.0;
  for (std::size_t i : fiber.factor_rows) {
    const double v = log_prior_factor(model, corrected.trajectory, history, i);
    if (partial_log != nullptr) {
      (*partial_log)[i] = v;
    }
    if (v == kNegInf) {
      return kNegInf;
    }
    total += v;
  }
  return total - fiber.log_mass;
}

/// Normalized weights plus the number of particles discarded with zero weight.
struct WeightResult {
  std::vector<double> weights;
  std::size_t discarded = 0;
};

/**
 * Weights for a population of (original, corrected) pairs that were all
 * corrected against the newest observation in `history`. Throws
 * ParticleCollapse when every weight is zero.
 */
template <Model M>
WeightResult compute_weights(const M& model, std::span<const Particle<typename M::value_type>> originals,
                             std::span<const Particle<typename M::value_type>> corrected,
                             const ObservationHistory<typename M::value_type>& history, AuxiliaryScheme scheme) {
  std::vector<double> log_weights(corrected.size());
  for (std::size_t j = 0; j < corrected.size(); ++j) {
    log_weights[j] = scheme == AuxiliaryScheme::kU1 ? log_weight_u1(model, originals[j], corrected[j], history)
                                                    : log_weight_u2(model, corrected[j], history);
  }
  WeightResult result;
  result.discarded = static_cast<std::size_t>(std::count(log_weights.begin(), log_weights.end(), kNegInf));
  result.weights = normalize_log_weights(log_weights, history.size());
  return result;
}

/// Weighted sum of `functional` over the corrected particles.
template <class T, class Functional>
double estimate_expectation(std::span<const Particle<T>> particles, std::span<const double> weights,
                            Functional&& functional) {
  double sum = 0.0;
  for (std::size_t j = 0; j < particles.size(); ++j) {
    if (weights[j] > 0.0) {
      sum += weights[j] * static_cast<double>(functional(particles[j]));
    }
  }
  return sum;
}

struct CoordinateSummary {
  double mean = 0.0;
  double variance = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};

/// Weighted marginal summaries of every coordinate of one row.
template <class T>
std::vector<CoordinateSummary> summarize_row(std::span<const Particle<T>> particles, std::span<const double> weights,
                                             std::size_t row) {
  const std::size_t cols = particles.empty() ? 0 : particles.front().trajectory.cols();
  std::vector<CoordinateSummary> result(cols);
  std::vector<double> values(particles.size());
  for (std::size_t m = 0; m < cols; ++m) {
    for (std::size_t j = 0; j < particles.size(); ++j) {
      values[j] = static_cast<double>(particles[j].trajectory(row, m));
    }
    auto& s = result[m];
    s.mean = weighted_mean(values, weights);
    s.variance = std::max(0.0, weighted_variance(values, weights));
    s.q05 = weighted_quantile(values, weights, 0.05);
    s.q95 = weighted_quantile(values, weights, 0.95);
  }
  return result;
}

struct FilterOptions {
  std::size_t particles = 1000;
  std::uint64_t seed = 0;
  AuxiliaryScheme scheme = AuxiliaryScheme::kU1;
  ResamplerKind resampler = ResamplerKind::kMultinomial;
  std::size_t threads = 1;
};

/// Per-time diagnostics, taken after weighting and before resampling.
struct StepSummary {
  std::size_t time = 0;
  std::vector<CoordinateSummary> coordinates;  ///< marginals of the newest row
  double ess = 0.0;
  std::size_t discarded = 0;
};

template <class T>
struct FilterResult {
  std::vector<StepSummary> steps;
  std::vector<Particle<T>> particles;  ///< corrected population at the final time, before resampling
  std::vector<double> weights;
  ObservationHistory<T> history;
};

/// Observer that ignores every step.
struct NoObserver {
  template <class... Args>
  void operator()(Args&&...) const noexcept {}
};

/**
 * Runs the full loop over the feed: propagate, correct, weight, normalize,
 * resample. `observer(t, particles, weights)` sees each weighted population
 * before it is resampled.
 *
 * Every random draw comes from a stream keyed by (seed, particle index, time),
 * so output is bit-identical for identical inputs regardless of `threads`.
 */
template <Model M, class Observer = NoObserver>
FilterResult<typename M::value_type> run_filter(const M& model,
                                                std::span<const ObservationMatrix<typename M::value_type>> feed,
                                                const FilterOptions& options, Observer&& observer = {}) {
  using T = typename M::value_type;
  if (options.particles == 0) {
    throw InputError{"particle count must be positive"};
  }
  FilterResult<T> result;
  std::vector<Particle<T>> population(options.particles);
  std::vector<Particle<T>> originals(options.particles);
  std::vector<double> log_weights(options.particles);

  for (std::size_t t = 1; t <= feed.size(); ++t) {
    result.history.push(feed[t - 1]);
    if (result.history.cols() != model.dimension()) {
      throw InputError{"feed has " + std::to_string(result.history.cols()) + " coordinates, model expects " +
                       std::to_string(model.dimension())};
    }
    const auto& observations = result.history.at(t);
    const auto& knowledge = result.history.knowledge(t);

    detail::parallel_for(options.particles, options.threads, [&](std::size_t j) {
      auto& particle = population[j];
      particle.stream = j;
      propagate(model, particle, options.seed);
      originals[j] = particle;
      particle = correct(std::move(particle), observations, knowledge);
      log_weights[j] = options.scheme == AuxiliaryScheme::kU1
                           ? log_weight_u1(model, originals[j], particle, result.history, Reweighting::kSparse,
                                           &particle.partial_log)
                           : log_weight_u2(model, particle, result.history, &particle.partial_log);
    });

    StepSummary step;
    step.time = t;
    step.discarded = static_cast<std::size_t>(std::count(log_weights.begin(), log_weights.end(), kNegInf));
    const auto weights = normalize_log_weights(log_weights, t);
    for (std::size_t j = 0; j < population.size(); ++j) {
      population[j].weight = weights[j];
    }
    step.ess = effective_sample_size(weights);
    step.coordinates = summarize_row<T>(population, weights, t - 1);
    result.steps.push_back(std::move(step));
    observer(t, std::span<const Particle<T>>{population}, std::span<const double>{weights});

    if (t == feed.size()) {
      result.particles = population;
      result.weights = weights;
    }
    Stream stream{options.seed, StreamPurpose::kResample, 0, t};
    population = resample(population, weights, stream, options.resampler);
    for (auto& particle : population) {
      particle.weight = 1.0 / static_cast<double>(population.size());
    }
  }
  return result;
}

}  // namespace sisc

#endif
