#ifndef SISC_MODELS_INVASION_HPP
#define SISC_MODELS_INVASION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sisc/engine.hpp"
#include "sisc/errors.hpp"
#include "sisc/matrix.hpp"
#include "sisc/rng.hpp"
#include "sisc/weights.hpp"

/**
 * \file
 * \brief One-dimensional river invasion observed by presence-only probes.
 *
 * The invaded cells always form one interval containing the origin. Each
 * front advances one cell per step with probability theta until it reaches
 * the end of the river. Each step, a probe walks outward from the detected
 * interval on each side and detects an invaded cell with probability phi,
 * stopping at the first failure or at the first uninvaded cell.
 *
 * Cell indices are 0-based in code and 1-based in files and parameters.
 */

namespace sisc {

struct InvasionParams {
  std::size_t cells = 50;
  std::size_t origin = 25;  ///< 1-based index of the first invaded cell
  double theta = 0.3;       ///< per-side expansion probability per step
  double phi = 0.3;         ///< per-cell probe detection probability
  std::size_t max_time = 0; ///< horizon; 0 runs until every cell is invaded

  void validate() const {
    if (cells == 0) {
      throw InputError{"invasion needs at least one cell"};
    }
    if (origin < 1 || origin > cells) {
      throw InputError{"origin must lie in 1.." + std::to_string(cells)};
    }
    if (!(theta >= 0.0 && theta <= 1.0) || !(phi >= 0.0 && phi <= 1.0)) {
      throw InputError{"theta and phi must be probabilities"};
    }
  }

  std::size_t origin_index() const { return origin - 1; }
};

/// Inclusive 0-based interval [left, right]: invaded cells (beta, gamma) or detected cells (c, a).
struct Interval {
  std::size_t left = 0;
  std::size_t right = 0;
  friend bool operator==(const Interval&, const Interval&) = default;
  std::size_t size() const { return right - left + 1; }
  bool contains(std::size_t m) const { return left <= m && m <= right; }
};

using DetectionFrontier = Interval;

/// The set cells of `row` if they form one non-empty interval.
template <class T>
std::optional<Interval> set_interval(std::span<const T> row) {
  std::optional<Interval> result;
  for (std::size_t m = 0; m < row.size(); ++m) {
    if (row[m] == T{0}) {
      continue;
    }
    if (!result) {
      result = Interval{m, m};
    } else if (result->right + 1 == m) {
      result->right = m;
    } else {
      return std::nullopt;
    }
  }
  return result;
}

inline std::vector<std::uint8_t> interval_row(std::size_t cells, Interval interval) {
  std::vector<std::uint8_t> row(cells, 0);
  std::fill(row.begin() + static_cast<std::ptrdiff_t>(interval.left),
            row.begin() + static_cast<std::ptrdiff_t>(interval.right) + 1, std::uint8_t{1});
  return row;
}

/// A state row with its fronts cached.
struct InvasionState {
  std::vector<std::uint8_t> row;
  Interval front;

  static InvasionState from_interval(std::size_t cells, Interval front) { return {interval_row(cells, front), front}; }
};

namespace detail {

inline double log_bernoulli(double p, bool success) { return success ? std::log(p) : std::log1p(-p); }

/// k * log(p), with 0 * log(0) = 0.
inline double log_power(double p, std::size_t k) { return k == 0 ? 0.0 : static_cast<double>(k) * std::log(p); }

}  // namespace detail

/// Advances each front by one cell with probability theta, unless it already sits at the river end.
inline Interval invasion_transition_sample(const InvasionParams& params, Interval front, Stream& stream) {
  const double right_draw = stream.uniform();
  const double left_draw = stream.uniform();
  if (front.right + 1 < params.cells && right_draw < params.theta) {
    ++front.right;
  }
  if (front.left > 0 && left_draw < params.theta) {
    --front.left;
  }
  return front;
}

/**
 * log f(x^t | x^{t-1}) = log theta^k (1-theta)^{1-k} theta^h (1-theta)^{1-h}.
 * A side that already reached the river end contributes no factor. Shrinking
 * or jumping more than one cell is impossible (-inf).
 */
inline double invasion_transition_log_density(const InvasionParams& params, Interval previous, Interval current) {
  double result = 0.0;
  if (current.right < previous.right || current.right > previous.right + 1 || current.right >= params.cells) {
    return kNegInf;
  }
  if (previous.right + 1 < params.cells) {
    result += detail::log_bernoulli(params.theta, current.right == previous.right + 1);
  }
  if (current.left > previous.left || current.left + 1 < previous.left) {
    return kNegInf;
  }
  if (previous.left > 0) {
    result += detail::log_bernoulli(params.theta, current.left + 1 == previous.left);
  }
  return result;
}

/**
 * Probes outward from the previous detected interval. On each side the next
 * cell is probed while it lies inside the invaded interval; a success extends
 * the detected interval, a failure ends the search on that side. Sides are
 * independent.
 */
inline DetectionFrontier probe_observation_sample(const InvasionParams& params, Interval state,
                                                  DetectionFrontier previous, Stream& stream) {
  DetectionFrontier next = previous;
  while (next.right < state.right) {
    if (stream.uniform() < params.phi) {
      ++next.right;
    } else {
      break;
    }
  }
  while (next.left > state.left) {
    if (stream.uniform() < params.phi) {
      --next.left;
    } else {
      break;
    }
  }
  return next;
}

/**
 * log g(b^t | x^t, b^{t-1}): phi^(a_t - a_{t-1}) (1-phi)^[a_t != gamma_t]
 * phi^(c_{t-1} - c_t) (1-phi)^[c_t != beta_t]. The detected interval may only
 * grow and must stay inside the invaded interval; otherwise -inf.
 */
inline double invasion_observation_log_density(const InvasionParams& params, Interval state,
                                               DetectionFrontier previous, DetectionFrontier current) {
  if (current.right < previous.right || current.left > previous.left || current.right > state.right ||
      current.left < state.left) {
    return kNegInf;
  }
  double result = detail::log_power(params.phi, current.right - previous.right) +
                  detail::log_power(params.phi, previous.left - current.left);
  if (current.right != state.right) {
    result += std::log1p(-params.phi);
  }
  if (current.left != state.left) {
    result += std::log1p(-params.phi);
  }
  return result;
}

/**
 * Log partial weight at a time step where correction moved the state from
 * `original` to `corrected` and the detections from `simulated` to `observed`,
 * both starting from `previous_state` and `previous_detected`.
 */
inline double invasion_partial_log_weight(const InvasionParams& params, Interval previous_state, Interval original,
                                          Interval corrected, DetectionFrontier previous_detected,
                                          DetectionFrontier simulated, DetectionFrontier observed) {
  if (original == corrected && simulated == observed) {
    return 0.0;
  }
  const double numerator = invasion_transition_log_density(params, previous_state, corrected) +
                           invasion_observation_log_density(params, corrected, previous_detected, observed);
  const double denominator = invasion_transition_log_density(params, previous_state, original) +
                             invasion_observation_log_density(params, original, previous_detected, simulated);
  if (denominator == kNegInf) {
    throw ModelError{"sampled invasion state has zero prior density"};
  }
  return numerator == kNegInf ? kNegInf : numerator - denominator;
}

/// Engine adapter for the river invasion.
class InvasionModel {
 public:
  using value_type = std::uint8_t;
  static constexpr bool kMissingAtRandom = false;

  explicit InvasionModel(InvasionParams params) : params_{params} { params_.validate(); }

  const InvasionParams& params() const noexcept { return params_; }
  std::size_t dimension() const noexcept { return params_.cells; }

  std::vector<std::uint8_t> sample_initial(Stream& /*stream*/) const {
    return interval_row(params_.cells, {params_.origin_index(), params_.origin_index()});
  }

  std::vector<std::uint8_t> sample_transition(std::span<const std::uint8_t> previous, Stream& stream) const {
    const auto front = set_interval(previous);
    if (!front) {
      throw ModelError{"invasion state is not one interval"};
    }
    return interval_row(params_.cells, invasion_transition_sample(params_, *front, stream));
  }

  double initial_log_density(std::span<const std::uint8_t> row) const {
    const auto front = set_interval(row);
    const Interval origin{params_.origin_index(), params_.origin_index()};
    return front && *front == origin ? 0.0 : kNegInf;
  }

  double transition_log_density(std::span<const std::uint8_t> previous, std::span<const std::uint8_t> current) const {
    const auto before = set_interval(previous);
    const auto after = set_interval(current);
    if (!before || !after) {
      return kNegInf;
    }
    return invasion_transition_log_density(params_, *before, *after);
  }

  /// Appends the probe outcome for state `row` to the knowledge of the previous time.
  KnowledgeMatrix sample_knowledge(std::span<const std::uint8_t> row, const KnowledgeMatrix& previous,
                                   Stream& stream) const {
    KnowledgeMatrix next = previous;
    if (previous.rows() == 0) {
      next.append_row(interval_row(params_.cells, {params_.origin_index(), params_.origin_index()}));
      return next;
    }
    const auto state = set_interval(row);
    const auto detected = set_interval(previous.row(previous.rows() - 1));
    if (!state || !detected) {
      throw ModelError{"probe needs an interval state and an interval of detections"};
    }
    next.append_row(interval_row(params_.cells, probe_observation_sample(params_, *state, *detected, stream)));
    return next;
  }

  double observation_log_density(const KnowledgeMatrix& current, std::span<const std::uint8_t> row,
                                 const KnowledgeMatrix& previous) const {
    const auto state = set_interval(row);
    const auto detected = set_interval(current.row(current.rows() - 1));
    if (!state || !detected) {
      return kNegInf;
    }
    if (previous.rows() == 0) {
      const Interval origin{params_.origin_index(), params_.origin_index()};
      return *detected == origin && state->contains(params_.origin_index()) ? 0.0 : kNegInf;
    }
    const auto detected_before = set_interval(previous.row(previous.rows() - 1));
    if (!detected_before) {
      return kNegInf;
    }
    return invasion_observation_log_density(params_, *state, *detected_before, *detected);
  }

  /// Discrete state space: the U1 box is the whole fiber.
  bool u1_contains(Cell /*cell*/, std::uint8_t /*value*/) const { return true; }

  /**
   * Prior mass of the uncorrected states that correct to the newest row.
   *
   * Only the newest row is ever revealed, and the simulated detections are
   * replaced wholesale, so the fiber is every successor of the previous row
   * whose union with the detected interval equals the corrected row, paired
   * with every detection outcome. Detection probabilities sum to one, leaving
   * the sum of transition probabilities over at most four successors.
   */
  FiberMass u2_fiber_mass(const TrajectoryMatrix<std::uint8_t>& corrected, const ObservationHistory<std::uint8_t>& history,
                          std::size_t t) const {
    for (const Cell& cell : history.newly_observed(t)) {
      if (cell.row + 1 != t) {
        throw InputError{"invasion observations may only reveal the current time row"};
      }
    }
    FiberMass fiber;
    fiber.factor_rows = {t - 1};
    if (t == 1) {
      return fiber;
    }
    const auto previous = set_interval(corrected.row(t - 2));
    const auto target = set_interval(corrected.row(t - 1));
    const auto detected = set_interval(history.knowledge(t).row(t - 1));
    if (!previous || !target || !detected) {
      fiber.log_mass = kNegInf;
      return fiber;
    }
    std::vector<double> terms;
    for (std::size_t grow_left = 0; grow_left <= (previous->left > 0 ? 1U : 0U); ++grow_left) {
      for (std::size_t grow_right = 0; grow_right <= (previous->right + 1 < params_.cells ? 1U : 0U); ++grow_right) {
        const Interval candidate{previous->left - grow_left, previous->right + grow_right};
        const Interval image{std::min(candidate.left, detected->left), std::max(candidate.right, detected->right)};
        if (image == *target) {
          terms.push_back(invasion_transition_log_density(params_, *previous, candidate));
        }
      }
    }
    fiber.log_mass = log_sum_exp(terms);
    return fiber;
  }

 private:
  InvasionParams params_;
};

struct InvasionTruth {
  TrajectoryMatrix<std::uint8_t> trajectory;
  std::vector<ObservationMatrix<std::uint8_t>> feed;  ///< z^1, ..., z^T (presence-only)
  std::size_t completion_time = 0;                    ///< first time every cell is invaded, 0 if never reached
};

/// Presence-only observation matrix for detections `detected[i]` at each time i.
inline ObservationMatrix<std::uint8_t> detections_to_observations(std::size_t cells,
                                                                  std::span<const DetectionFrontier> detected) {
  ObservationMatrix<std::uint8_t> z(detected.size(), cells);
  for (std::size_t i = 0; i < detected.size(); ++i) {
    for (std::size_t m = detected[i].left; m <= detected[i].right; ++m) {
      z(i, m) = std::uint8_t{1};
    }
  }
  return z;
}

/**
 * Simulates an invasion and its probe feed. Runs `max_time` steps when set,
 * otherwise until every cell is invaded.
 */
inline InvasionTruth simulate_invasion_truth(const InvasionParams& params, std::uint64_t seed) {
  params.validate();
  if (params.max_time == 0 && params.theta == 0.0 && params.cells > 1) {
    throw InputError{"with theta = 0 the invasion never completes; set max_time"};
  }
  InvasionTruth truth;
  const Interval origin{params.origin_index(), params.origin_index()};
  Interval front = origin;
  DetectionFrontier detected = origin;
  std::vector<DetectionFrontier> detections;
  for (std::size_t t = 1;; ++t) {
    if (t > 1) {
      Stream grow{seed, StreamPurpose::kTruth, 0, t};
      front = invasion_transition_sample(params, front, grow);
      Stream probe{seed, StreamPurpose::kTruthObserve, 0, t};
      detected = probe_observation_sample(params, front, detected, probe);
    }
    truth.trajectory.append_row(interval_row(params.cells, front));
    detections.push_back(detected);
    truth.feed.push_back(detections_to_observations(params.cells, detections));
    if (truth.completion_time == 0 && front.size() == params.cells) {
      truth.completion_time = t;
    }
    if (params.max_time != 0 ? t >= params.max_time : truth.completion_time != 0) {
      break;
    }
  }
  return truth;
}

/// Exact posterior of the invasion given a feed, by summing over all front paths.
struct InvasionEnumeration {
  std::vector<Interval> states;                         ///< every interval containing the origin
  std::vector<std::vector<double>> state_probability;   ///< [row][state]
  Matrix<double> occupancy;                             ///< P(x^i_m = 1 | z^t)
  double log_evidence = 0.0;                            ///< log of the total f*g mass of the feed
};

inline constexpr std::size_t kEnumerationWorkLimit = 50'000'000;

/**
 * Posterior over trajectories given z^1..z^t, by forward-backward summation
 * over interval states. Contiguity makes the state one (beta, gamma) pair, so
 * the cost is O(t * states). Refuses work beyond kEnumerationWorkLimit.
 */
inline InvasionEnumeration exact_posterior_enumeration(const InvasionParams& params,
                                                       std::span<const ObservationMatrix<std::uint8_t>> feed,
                                                       std::size_t t) {
  params.validate();
  if (t == 0 || t > feed.size()) {
    throw InputError{"enumeration time must lie in 1.." + std::to_string(feed.size())};
  }
  const std::size_t mu = params.origin_index();
  const std::size_t state_count = (mu + 1) * (params.cells - mu);
  if (state_count * t > kEnumerationWorkLimit) {
    throw InputError{"enumeration infeasible: " + std::to_string(state_count) + " states x " + std::to_string(t) +
                     " steps exceeds bound " + std::to_string(kEnumerationWorkLimit)};
  }
  InvasionEnumeration result;
  result.states.reserve(state_count);
  for (std::size_t left = 0; left <= mu; ++left) {
    for (std::size_t right = mu; right < params.cells; ++right) {
      result.states.push_back({left, right});
    }
  }
  auto index_of = [&](Interval s) { return s.left * (params.cells - mu) + (s.right - mu); };

  std::vector<DetectionFrontier> detected(t);
  for (std::size_t i = 0; i < t; ++i) {
    if (feed[i].rows() != i + 1 || feed[i].cols() != params.cells) {
      throw InputError{"feed matrix at time " + std::to_string(i + 1) + " has the wrong shape"};
    }
    const auto knowledge = knowledge_of(feed[t - 1]);
    const auto interval = set_interval(knowledge.row(i));
    if (!interval) {
      throw InputError{"detections at time " + std::to_string(i + 1) + " are not one interval"};
    }
    detected[i] = *interval;
  }
  auto log_g = [&](std::size_t i, Interval state) {
    if (i == 0) {
      const Interval origin{mu, mu};
      return detected[0] == origin ? 0.0 : kNegInf;
    }
    return invasion_observation_log_density(params, state, detected[i - 1], detected[i]);
  };
  auto successors = [&](Interval s) {
    std::vector<Interval> next;
    for (std::size_t grow_left = 0; grow_left <= (s.left > 0 ? 1U : 0U); ++grow_left) {
      for (std::size_t grow_right = 0; grow_right <= (s.right + 1 < params.cells ? 1U : 0U); ++grow_right) {
        next.push_back({s.left - grow_left, s.right + grow_right});
      }
    }
    return next;
  };

  // Scaled forward pass: alpha[i] sums to one, scale[i] holds the log normalizer.
  std::vector<std::vector<double>> alpha(t, std::vector<double>(state_count, 0.0));
  std::vector<double> log_scale(t, 0.0);
  auto rescale = [&](std::size_t i) {
    double total = 0.0;
    for (double a : alpha[i]) {
      total += a;
    }
    if (!(total > 0.0)) {
      throw InputError{"feed has zero probability under the model at time " + std::to_string(i + 1)};
    }
    for (double& a : alpha[i]) {
      a /= total;
    }
    log_scale[i] = std::log(total);
  };
  alpha[0][index_of({mu, mu})] = std::exp(log_g(0, {mu, mu}));
  rescale(0);
  for (std::size_t i = 1; i < t; ++i) {
    for (std::size_t k = 0; k < state_count; ++k) {
      if (alpha[i - 1][k] == 0.0) {
        continue;
      }
      const Interval s = result.states[k];
      for (const Interval& next : successors(s)) {
        const double w = std::exp(invasion_transition_log_density(params, s, next) + log_g(i, next));
        alpha[i][index_of(next)] += alpha[i - 1][k] * w;
      }
    }
    rescale(i);
  }

  std::vector<double> beta(state_count, 1.0);
  result.state_probability.assign(t, std::vector<double>(state_count, 0.0));
  result.occupancy = Matrix<double>(t, params.cells, 0.0);
  for (std::size_t i = t; i-- > 0;) {
    if (i + 1 < t) {
      std::vector<double> previous_beta(state_count, 0.0);
      for (std::size_t k = 0; k < state_count; ++k) {
        const Interval s = result.states[k];
        double sum = 0.0;
        for (const Interval& next : successors(s)) {
          sum += std::exp(invasion_transition_log_density(params, s, next) + log_g(i + 1, next)) * beta[index_of(next)];
        }
        previous_beta[k] = sum / std::exp(log_scale[i + 1]);
      }
      beta = std::move(previous_beta);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < state_count; ++k) {
      result.state_probability[i][k] = alpha[i][k] * beta[k];
      total += result.state_probability[i][k];
    }
    for (std::size_t k = 0; k < state_count; ++k) {
      auto& p = result.state_probability[i][k];
      p /= total;
      for (std::size_t m = result.states[k].left; m <= result.states[k].right; ++m) {
        result.occupancy(i, m) += p;
      }
    }
  }
  for (double s : log_scale) {
    result.log_evidence += s;
  }
  return result;
}

}  // namespace sisc

#endif
