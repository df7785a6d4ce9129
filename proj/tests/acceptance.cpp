// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned below.
#include <sisc/experiment.hpp>
#include <sisc/sisc.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace {

using sisc::AuxiliaryScheme;
using sisc::ObservationMatrix;
using sisc::Particle;
using sisc::ResamplerKind;

constexpr double kKsThreshold = 0.08;
constexpr double kKsPassFraction = 0.90;
constexpr double kMeanSeMultiple = 3.0;
constexpr double kGoldRuntimeSeconds = 10.0;
constexpr std::uint64_t kGoldSeeds = 20;

constexpr double kTvTolerance = 0.02;
constexpr double kEnumerationRuntimeSeconds = 60.0;
constexpr std::size_t kEnumerationParticles = 100'000;
constexpr std::uint64_t kEnumerationFeeds = 5;

constexpr std::size_t kIdentityReplicates = 20;
constexpr double kIdentitySlopeLow = -0.75;
constexpr double kIdentitySlopeHigh = -0.25;

constexpr std::size_t kEquivalenceParticles = 10'000;
constexpr double kEquivalenceFraction = 0.95;

constexpr int kCancellationCases = 1000;
constexpr double kCancellationTolerance = 1e-12;

constexpr double kChiSquaredAlpha = 0.001;
constexpr int kResampleTrials = 10'000;

constexpr std::uint64_t kDegradationSeeds = 50;
constexpr std::size_t kDegradationParticles = 1000;

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

void info(const std::string& text) {
  std::printf("       info: %s\n", text.c_str());
  std::fflush(stdout);
}

std::string format(const char* fmt, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, fmt, args...);
  return buffer;
}

ObservationMatrix<double> column(const std::vector<std::optional<double>>& cells) {
  ObservationMatrix<double> z(cells.size(), 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    z(i, 0) = cells[i];
  }
  return z;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

sisc::Ar1Params gold_params() { return sisc::Ar1Params::make(0.5, 1.0, 0.2); }

sisc::InvasionParams river(double phi) { return sisc::InvasionParams{5, 3, 0.3, phi, 4}; }

template <class T>
std::span<const ObservationMatrix<T>> view(const std::vector<ObservationMatrix<T>>& feed) {
  return std::span<const ObservationMatrix<T>>{feed};
}

struct GoldStudy {
  int cases = 0;
  int ks_ok = 0;
  int means_ok = 0;
  double mean_ks = 0.0;
  double worst_z = 0.0;
  double seconds = 0.0;
};

GoldStudy gold_study(AuxiliaryScheme scheme, ResamplerKind resampler) {
  const auto params = gold_params();
  const sisc::Ar1Model model{params};
  GoldStudy study;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 1; seed <= kGoldSeeds; ++seed) {
    const auto truth = sisc::simulate_ar1_truth(params, 30, seed);
    const auto result = sisc::run_filter(model, view(truth.feed), sisc::FilterOptions{1000, seed, scheme, resampler, 1});
    for (const auto& row : sisc::compare_population_to_gold(params, truth.feed.back(), result.particles, result.weights)) {
      if (row.oracle.kind != sisc::BlockKind::kInterior) {
        continue;
      }
      ++study.cases;
      study.ks_ok += row.comparison.ks_distance < kKsThreshold ? 1 : 0;
      study.mean_ks += row.comparison.ks_distance;
      const double z = row.comparison.mean_error / row.standard_error;
      study.means_ok += row.comparison.mean_error <= kMeanSeMultiple * row.standard_error ? 1 : 0;
      study.worst_z = std::max(study.worst_z, std::isfinite(z) ? z : 1e300);
    }
  }
  study.seconds = seconds_since(start);
  study.mean_ks /= std::max(study.cases, 1);
  return study;
}

std::string describe(const GoldStudy& s) {
  return format("%d/%d cases KS<%.2f (%.3f), mean KS %.3f, %d/%d means within %.0f SE (worst %.1f), %.2fs", s.ks_ok,
                s.cases, kKsThreshold, static_cast<double>(s.ks_ok) / s.cases, s.mean_ks, s.means_ok, s.cases,
                kMeanSeMultiple, s.worst_z, s.seconds);
}

void criterion_gold() {
  const auto s = gold_study(AuxiliaryScheme::kU1, ResamplerKind::kMultinomial);
  const bool pass = static_cast<double>(s.ks_ok) >= kKsPassFraction * s.cases && s.means_ok == s.cases &&
                    s.seconds < kGoldRuntimeSeconds;
  report(1, "gold-standard agreement, u1 multinomial n=1000", pass, describe(s));
  info("u2 multinomial: " + describe(gold_study(AuxiliaryScheme::kU2, ResamplerKind::kMultinomial)));
  info("u2 systematic: " + describe(gold_study(AuxiliaryScheme::kU2, ResamplerKind::kSystematic)));
}

void criterion_enumeration() {
  const auto params = river(0.5);
  const sisc::InvasionModel model{params};
  double worst = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 1; seed <= kEnumerationFeeds; ++seed) {
    const auto truth = sisc::simulate_invasion_truth(params, seed);
    std::vector<sisc::Matrix<double>> exact;
    for (std::size_t t = 1; t <= truth.feed.size(); ++t) {
      exact.push_back(sisc::exact_posterior_enumeration(params, view(truth.feed), t).occupancy);
    }
    auto observer = [&](std::size_t t, std::span<const Particle<std::uint8_t>> particles, std::span<const double> weights) {
      const auto estimate = sisc::occupancy_estimate(particles, weights);
      for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t m = 0; m < params.cells; ++m) {
          worst = std::max(worst, std::abs(estimate(i, m) - exact[t - 1](i, m)));
        }
      }
    };
    sisc::run_filter(model, view(truth.feed),
                     sisc::FilterOptions{kEnumerationParticles, seed, AuxiliaryScheme::kU2, ResamplerKind::kMultinomial, 1},
                     observer);
  }
  const double elapsed = seconds_since(start);
  report(2, "enumeration agreement, n=1e5", worst <= kTvTolerance && elapsed < kEnumerationRuntimeSeconds,
         format("max marginal TV %.4f (limit %.2f) over %llu feeds, %.2fs", worst, kTvTolerance,
                static_cast<unsigned long long>(kEnumerationFeeds), elapsed));
}

double invaded_at_final_time(const Particle<std::uint8_t>& particle) {
  const auto& x = particle.trajectory;
  double count = 0.0;
  for (std::size_t m = 0; m < x.cols(); ++m) {
    count += x(x.rows() - 1, m);
  }
  return count;
}

void criterion_identity() {
  const auto params = river(0.5);
  const sisc::InvasionModel model{params};
  const auto truth = sisc::simulate_invasion_truth(params, 7);
  const auto exact = sisc::exact_posterior_enumeration(params, view(truth.feed), truth.feed.size());
  double expected = 0.0;
  for (std::size_t m = 0; m < params.cells; ++m) {
    expected += exact.occupancy(exact.occupancy.rows() - 1, m);
  }
  bool pass = true;
  std::string detail = format("E[l]=%.5f;", expected);
  std::vector<double> log_n;
  std::vector<double> log_rmse;
  for (std::size_t n : {1000UL, 10'000UL, 100'000UL}) {
    std::vector<double> estimates;
    for (std::size_t r = 0; r < kIdentityReplicates; ++r) {
      const auto result = sisc::run_filter(
          model, view(truth.feed), sisc::FilterOptions{n, 1000 + r, AuxiliaryScheme::kU2, ResamplerKind::kMultinomial, 1});
      estimates.push_back(sisc::estimate_expectation<std::uint8_t>(result.particles, result.weights, invaded_at_final_time));
    }
    double mean = 0.0;
    double squared_error = 0.0;
    for (double e : estimates) {
      mean += e / static_cast<double>(estimates.size());
      squared_error += (e - expected) * (e - expected) / static_cast<double>(estimates.size());
    }
    double spread = 0.0;
    for (double e : estimates) {
      spread += (e - mean) * (e - mean) / static_cast<double>(estimates.size() - 1);
    }
    const double se = std::sqrt(spread);
    const double error = std::abs(estimates.front() - expected);
    pass = pass && error <= kMeanSeMultiple * se;
    log_n.push_back(std::log(static_cast<double>(n)));
    log_rmse.push_back(0.5 * std::log(squared_error));
    detail += format(" n=%zu est %.5f err %.5f se %.5f rmse %.5f;", n, estimates.front(), error, se, std::sqrt(squared_error));
  }
  const double slope = (log_rmse.back() - log_rmse.front()) / (log_n.back() - log_n.front());
  pass = pass && slope >= kIdentitySlopeLow && slope <= kIdentitySlopeHigh;
  detail += format(" rmse slope %.3f (want %.2f..%.2f)", slope, kIdentitySlopeLow, kIdentitySlopeHigh);
  report(3, "expectation identity vs enumeration", pass, detail);
}

void criterion_equivalence() {
  const auto params = gold_params();
  const sisc::Ar1Model model{params};
  int coordinates = 0;
  int agree = 0;
  for (std::uint64_t seed = 1; seed <= kGoldSeeds; ++seed) {
    const auto truth = sisc::simulate_ar1_truth(params, 30, seed);
    const auto run = [&](AuxiliaryScheme scheme) {
      const auto result = sisc::run_filter(
          model, view(truth.feed), sisc::FilterOptions{kEquivalenceParticles, seed, scheme, ResamplerKind::kMultinomial, 1});
      return sisc::compare_population_to_gold(params, truth.feed.back(), result.particles, result.weights);
    };
    const auto u1 = run(AuxiliaryScheme::kU1);
    const auto u2 = run(AuxiliaryScheme::kU2);
    for (std::size_t k = 0; k < u1.size(); ++k) {
      const double combined = std::hypot(u1[k].standard_error, u2[k].standard_error);
      ++coordinates;
      agree += std::abs(u1[k].particle_mean - u2[k].particle_mean) < kMeanSeMultiple * combined ? 1 : 0;
    }
  }
  const double fraction = static_cast<double>(agree) / coordinates;
  report(4, "u1/u2 equivalence, n=1e4", fraction >= kEquivalenceFraction,
         format("%d/%d missing coordinates within %.0f combined SE (%.3f, want >= %.2f)", agree, coordinates,
                kMeanSeMultiple, fraction, kEquivalenceFraction));
}

void criterion_cancellation() {
  const sisc::Ar1Model model{sisc::Ar1Params::make(0.8, 0.7, 0.25)};
  std::mt19937_64 rng{2024};
  std::normal_distribution<double> normal{0.0, 1.2};
  std::bernoulli_distribution reveal{0.3};
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < kCancellationCases; ++trial) {
    const std::size_t t = 2 + static_cast<std::size_t>(trial) % 14;
    std::vector<ObservationMatrix<double>> feed;
    std::vector<double> truth;
    sisc::ObservationHistory<double> history;
    for (std::size_t s = 1; s <= t; ++s) {
      truth.push_back(normal(rng));
      std::vector<std::optional<double>> cells(s);
      for (std::size_t i = 0; i < s; ++i) {
        if ((i + 1 < s && feed.back()(i, 0).has_value()) || reveal(rng)) {
          cells[i] = truth[i];
        }
      }
      const auto z = column(cells);
      feed.push_back(z);
      history.push(z);
    }
    Particle<double> original;
    original.trajectory = sisc::TrajectoryMatrix<double>(t, 1);
    for (std::size_t i = 0; i < t; ++i) {
      original.trajectory(i, 0) = i + 1 < t && feed[t - 2](i, 0) ? truth[i] : normal(rng);
    }
    const auto corrected = sisc::correct(original, history.at(t));
    const double sparse = sisc::log_weight_u1(model, original, corrected, history, sisc::Reweighting::kSparse);
    const double full = sisc::log_weight_u1(model, original, corrected, history, sisc::Reweighting::kFull);
    worst = std::max(worst, std::abs(sparse - full) / std::max(1.0, std::abs(full)));
    ++checked;
  }
  for (int trial = 0; trial < kCancellationCases; ++trial) {
    const sisc::InvasionParams params{6, 1 + static_cast<std::size_t>(trial) % 6, 0.15 + 0.1 * (trial % 6),
                                      0.1 + 0.2 * (trial % 5), 2 + static_cast<std::size_t>(trial) % 7};
    const sisc::InvasionModel model{params};
    const auto truth = sisc::simulate_invasion_truth(params, 5000 + static_cast<std::uint64_t>(trial));
    sisc::ObservationHistory<std::uint8_t> history;
    Particle<std::uint8_t> particle;
    particle.stream = static_cast<std::uint64_t>(trial);
    for (std::size_t t = 1; t <= truth.feed.size(); ++t) {
      history.push(truth.feed[t - 1]);
      sisc::propagate(model, particle, 31);
      const auto original = particle;
      const auto corrected = sisc::correct(particle, history.at(t), history.knowledge(t));
      const double sparse = sisc::log_weight_u1(model, original, corrected, history, sisc::Reweighting::kSparse);
      const double full = sisc::log_weight_u1(model, original, corrected, history, sisc::Reweighting::kFull);
      ++checked;
      if (std::isinf(full) || std::isinf(sparse)) {
        worst = std::max(worst, sparse == full ? 0.0 : 1.0);
        break;
      }
      worst = std::max(worst, std::abs(sparse - full));
      particle = corrected;
    }
  }
  report(5, "sparse reweighting equals full reweighting", worst <= kCancellationTolerance,
         format("%d comparisons from %d ar1 and %d invasion cases, worst difference %.3g (limit %.0e)", checked,
                kCancellationCases, kCancellationCases, worst, kCancellationTolerance));
}

double chi_squared_p_value(const std::vector<double>& counts, const std::vector<double>& expected) {
  double statistic = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    statistic += (counts[k] - expected[k]) * (counts[k] - expected[k]) / expected[k];
  }
  const boost::math::chi_squared_distribution<double> law(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(law, statistic));
}

void criterion_resampling() {
  std::mt19937_64 rng{77};
  std::gamma_distribution<double> gamma{1.0, 1.0};
  std::string detail;
  bool pass = true;
  for (std::size_t n : {8UL, 50UL}) {
    for (bool uniform : {true, false}) {
      std::vector<double> weights(n, 1.0);
      if (!uniform) {
        std::generate(weights.begin(), weights.end(), [&] { return gamma(rng); });
      }
      const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
      for (double& w : weights) {
        w /= total;
      }
      std::vector<double> counts(n, 0.0);
      for (int trial = 0; trial < kResampleTrials; ++trial) {
        sisc::Stream stream{12345, sisc::StreamPurpose::kTest, n, static_cast<std::uint64_t>(trial)};
        for (std::size_t index : sisc::resample_indices(weights, n, stream)) {
          counts[index] += 1.0;
        }
      }
      std::vector<double> expected(n);
      for (std::size_t k = 0; k < n; ++k) {
        expected[k] = static_cast<double>(kResampleTrials) * static_cast<double>(n) * weights[k];
      }
      const double p = chi_squared_p_value(counts, expected);
      pass = pass && p > kChiSquaredAlpha;
      detail += format(" n=%zu %s p=%.3f;", n, uniform ? "uniform" : "random", p);
    }
  }
  report(6, "multinomial resampling unbiasedness", pass,
         format("chi-squared over %d trials at alpha %.3f:", kResampleTrials, kChiSquaredAlpha) + detail);
}

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in{path, std::ios::binary};
  return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

void criterion_determinism(const std::filesystem::path& configs) {
  const auto scratch = std::filesystem::temp_directory_path() / ("sisc-acceptance-" + std::to_string(::getpid()));
  std::filesystem::remove_all(scratch);
  bool pass = true;
  std::string detail;
  try {
    for (const char* name : {"ar1.json", "invasion.json", "small_invasion.json"}) {
      auto config = sisc::load_config((configs / name).string());
      const auto first = scratch / name / "first";
      const auto snapshot = scratch / name / "snapshot";
      config.out = first.string();
      const auto report_first = sisc::run_experiment(config);
      std::filesystem::create_directories(snapshot);
      std::filesystem::copy(first, snapshot, std::filesystem::copy_options::recursive);
      sisc::run_experiment(sisc::load_config((first / "manifest.json").string()));
      int identical = 0;
      for (const auto& file : report_first.files) {
        const bool same = file_bytes(first / file) == file_bytes(snapshot / file);
        identical += same ? 1 : 0;
        pass = pass && same;
      }
      detail += format(" %s %d/%zu files identical;", name, identical, report_first.files.size());
    }
  } catch (const std::exception& error) {
    pass = false;
    detail += std::string{" error: "} + error.what();
  }
  std::filesystem::remove_all(scratch);
  report(7, "rerun from manifest is byte-identical", pass, detail);
}

void criterion_degradation() {
  std::vector<double> errors;
  std::string detail;
  for (double phi : {0.1, 0.3, 0.8}) {
    const auto params = river(phi);
    const sisc::InvasionModel model{params};
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= kDegradationSeeds; ++seed) {
      const auto truth = sisc::simulate_invasion_truth(params, seed);
      const auto exact = sisc::exact_posterior_enumeration(params, view(truth.feed), truth.feed.size());
      const auto result = sisc::run_filter(
          model, view(truth.feed),
          sisc::FilterOptions{kDegradationParticles, seed, AuxiliaryScheme::kU2, ResamplerKind::kMultinomial, 1});
      const auto estimate = sisc::occupancy_estimate(result.particles, result.weights);
      double sum = 0.0;
      for (std::size_t i = 0; i < estimate.rows(); ++i) {
        for (std::size_t m = 0; m < estimate.cols(); ++m) {
          sum += std::abs(estimate(i, m) - exact.occupancy(i, m));
        }
      }
      total += sum / static_cast<double>(estimate.rows() * estimate.cols());
    }
    errors.push_back(total / static_cast<double>(kDegradationSeeds));
    detail += format(" phi=%.1f %.5f;", phi, errors.back());
  }
  const bool pass = errors[1] <= errors[0] && errors[2] <= errors[1];
  report(8, "occupancy error nonincreasing in detection probability", pass,
         format("mean absolute occupancy error over %llu seeds:", static_cast<unsigned long long>(kDegradationSeeds)) +
             detail);
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path configs = argc > 1 ? argv[1] : "configs";
  criterion_gold();
  criterion_enumeration();
  criterion_identity();
  criterion_equivalence();
  criterion_cancellation();
  criterion_resampling();
  criterion_determinism(configs);
  criterion_degradation();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
