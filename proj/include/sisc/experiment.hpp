#ifndef SISC_EXPERIMENT_HPP
#define SISC_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sisc/engine.hpp"
#include "sisc/errors.hpp"
#include "sisc/gold.hpp"
#include "sisc/io/feed.hpp"
#include "sisc/models/ar1.hpp"
#include "sisc/models/invasion.hpp"
#include "sisc/stats.hpp"

/**
 * \file
 * \brief Seeded experiments: configuration, feeds, filtering and CSV output.
 */

namespace sisc {

inline constexpr const char* kCodeVersion = "sisc 0.1.0";

enum class ModelKind { kAr1, kInvasion };

struct ExperimentConfig {
  ModelKind model = ModelKind::kAr1;
  Ar1Params ar1;
  std::size_t time_steps = 30;
  InvasionParams invasion;
  std::size_t particles = 1000;
  std::uint64_t seed = 0;
  std::optional<AuxiliaryScheme> scheme;  ///< defaults to U1 for ar1 and U2 for invasion
  ResamplerKind resampler = ResamplerKind::kMultinomial;
  std::optional<std::pair<double, double>> u1_bounds;
  std::string feed = "simulate";
  std::string out = "sisc-out";
  std::size_t threads = 1;

  AuxiliaryScheme effective_scheme() const {
    return scheme.value_or(model == ModelKind::kAr1 ? AuxiliaryScheme::kU1 : AuxiliaryScheme::kU2);
  }

  void validate() const {
    if (particles < 2) {
      throw InputError{"particles must be at least 2"};
    }
    if (threads == 0) {
      throw InputError{"threads must be at least 1"};
    }
    if (model == ModelKind::kAr1) {
      Ar1Params::make(ar1.phi, ar1.sigma2, ar1.theta);
      if (time_steps == 0 && feed == "simulate") {
        throw InputError{"time_steps must be positive"};
      }
      if (u1_bounds && !(u1_bounds->first < u1_bounds->second)) {
        throw InputError{"u1_bounds must satisfy lower < upper"};
      }
    } else {
      invasion.validate();
      if (u1_bounds) {
        throw InputError{"u1_bounds applies to the ar1 model only"};
      }
    }
    if (feed != "simulate" && !std::filesystem::exists(feed)) {
      throw InputError{"feed file " + feed + " does not exist"};
    }
  }
};

inline const char* to_string(ModelKind kind) { return kind == ModelKind::kAr1 ? "ar1" : "invasion"; }
inline const char* to_string(AuxiliaryScheme scheme) { return scheme == AuxiliaryScheme::kU1 ? "u1" : "u2"; }
inline const char* to_string(ResamplerKind kind) {
  return kind == ResamplerKind::kMultinomial ? "multinomial" : "systematic";
}

inline AuxiliaryScheme parse_scheme(const std::string& text) {
  if (text == "u1") {
    return AuxiliaryScheme::kU1;
  }
  if (text == "u2") {
    return AuxiliaryScheme::kU2;
  }
  throw InputError{"scheme must be u1 or u2, got `" + text + "`"};
}

inline ResamplerKind parse_resampler(const std::string& text) {
  if (text == "multinomial") {
    return ResamplerKind::kMultinomial;
  }
  if (text == "systematic") {
    return ResamplerKind::kSystematic;
  }
  throw InputError{"resampler must be multinomial or systematic, got `" + text + "`"};
}

/// Reads a config object, or the `config` member of a run manifest. Unknown keys are errors.
inline ExperimentConfig config_from_json(const nlohmann::json& document) {
  const nlohmann::json& j = document.contains("config") && document.contains("code_version") ? document["config"]
                                                                                            : document;
  if (!j.is_object()) {
    throw InputError{"config must be a JSON object"};
  }
  ExperimentConfig config;
  try {
    const std::string model = j.value("model", "ar1");
    if (model == "ar1") {
      config.model = ModelKind::kAr1;
    } else if (model == "invasion") {
      config.model = ModelKind::kInvasion;
    } else {
      throw InputError{"model must be ar1 or invasion, got `" + model + "`"};
    }
    for (const auto& [key, value] : j.items()) {
      if (key == "model") {
        continue;
      }
      if (key == "phi") {
        config.ar1.phi = config.invasion.phi = value.get<double>();
      } else if (key == "theta") {
        config.ar1.theta = config.invasion.theta = value.get<double>();
      } else if (key == "sigma2" && config.model == ModelKind::kAr1) {
        config.ar1.sigma2 = value.get<double>();
      } else if (key == "time_steps" && config.model == ModelKind::kAr1) {
        config.time_steps = value.get<std::size_t>();
      } else if (key == "cells" && config.model == ModelKind::kInvasion) {
        config.invasion.cells = value.get<std::size_t>();
      } else if (key == "origin" && config.model == ModelKind::kInvasion) {
        config.invasion.origin = value.get<std::size_t>();
      } else if (key == "max_time" && config.model == ModelKind::kInvasion) {
        config.invasion.max_time = value.get<std::size_t>();
      } else if (key == "particles") {
        config.particles = value.get<std::size_t>();
      } else if (key == "seed") {
        config.seed = value.get<std::uint64_t>();
      } else if (key == "scheme") {
        config.scheme = parse_scheme(value.get<std::string>());
      } else if (key == "resampler") {
        config.resampler = parse_resampler(value.get<std::string>());
      } else if (key == "u1_bounds" && config.model == ModelKind::kAr1) {
        const auto bounds = value.get<std::vector<double>>();
        if (bounds.size() != 2) {
          throw InputError{"u1_bounds must be [lower, upper]"};
        }
        config.u1_bounds = {bounds[0], bounds[1]};
      } else if (key == "feed") {
        config.feed = value.get<std::string>();
      } else if (key == "out") {
        config.out = value.get<std::string>();
      } else if (key == "threads") {
        config.threads = value.get<std::size_t>();
      } else {
        throw InputError{"unknown config key `" + key + "` for model " + model};
      }
    }
  } catch (const nlohmann::json::exception& error) {
    throw InputError{std::string{"bad config value: "} + error.what()};
  }
  return config;
}

inline nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["model"] = to_string(config.model);
  if (config.model == ModelKind::kAr1) {
    j["phi"] = config.ar1.phi;
    j["sigma2"] = config.ar1.sigma2;
    j["theta"] = config.ar1.theta;
    j["time_steps"] = config.time_steps;
    if (config.u1_bounds) {
      j["u1_bounds"] = {config.u1_bounds->first, config.u1_bounds->second};
    }
  } else {
    j["cells"] = config.invasion.cells;
    j["origin"] = config.invasion.origin;
    j["theta"] = config.invasion.theta;
    j["phi"] = config.invasion.phi;
    j["max_time"] = config.invasion.max_time;
  }
  j["particles"] = config.particles;
  j["seed"] = config.seed;
  j["scheme"] = to_string(config.effective_scheme());
  j["resampler"] = to_string(config.resampler);
  j["feed"] = config.feed;
  j["out"] = config.out;
  j["threads"] = config.threads;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in{path};
  if (!in) {
    throw IoError{"cannot open config file " + path};
  }
  nlohmann::json document;
  try {
    document = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& error) {
    throw InputError{"config " + path + " is not valid JSON: " + error.what()};
  }
  return config_from_json(document);
}

inline Ar1Model make_ar1_model(const ExperimentConfig& config) {
  const auto params = Ar1Params::make(config.ar1.phi, config.ar1.sigma2, config.ar1.theta);
  return config.u1_bounds ? Ar1Model{params, config.u1_bounds->first, config.u1_bounds->second} : Ar1Model{params};
}

inline FilterOptions filter_options(const ExperimentConfig& config) {
  return {config.particles, config.seed, config.effective_scheme(), config.resampler, config.threads};
}

inline FeedRules invasion_feed_rules(const InvasionParams& params) {
  return {true, true, true, params.origin_index()};
}

/// Observation feed for an experiment plus the truth behind it when simulated.
template <class T>
struct ExperimentFeed {
  std::vector<ObservationMatrix<T>> matrices;
  std::optional<TrajectoryMatrix<T>> truth;
  std::size_t completion_time = 0;
};

inline ExperimentFeed<double> ar1_feed(const ExperimentConfig& config) {
  ExperimentFeed<double> result;
  if (config.feed == "simulate") {
    const auto truth = simulate_ar1_truth(config.ar1, config.time_steps, config.seed);
    result.matrices = truth.feed;
    TrajectoryMatrix<double> path;
    for (double x : truth.path) {
      path.append_row(std::vector<double>{x});
    }
    result.truth = std::move(path);
    return result;
  }
  Feed feed = read_feed_file(config.feed);
  if (feed.cols != 1) {
    throw InputError{"ar1 feeds have one coordinate, " + config.feed + " has " + std::to_string(feed.cols)};
  }
  if (const auto report = validate_feed(feed); !report.ok) {
    throw InputError{config.feed + ": " + report.describe()};
  }
  result.matrices = std::move(feed.matrices);
  return result;
}

inline ExperimentFeed<std::uint8_t> invasion_feed(const ExperimentConfig& config) {
  ExperimentFeed<std::uint8_t> result;
  if (config.feed == "simulate") {
    auto truth = simulate_invasion_truth(config.invasion, config.seed);
    result.matrices = std::move(truth.feed);
    result.truth = std::move(truth.trajectory);
    result.completion_time = truth.completion_time;
    return result;
  }
  Feed feed = read_feed_file(config.feed);
  if (feed.cols != config.invasion.cells) {
    throw InputError{"feed has " + std::to_string(feed.cols) + " cells, config has " +
                     std::to_string(config.invasion.cells)};
  }
  if (const auto report = validate_feed(feed, invasion_feed_rules(config.invasion)); !report.ok) {
    throw InputError{config.feed + ": " + report.describe()};
  }
  result.matrices = to_presence_feed(feed);
  return result;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    throw IoError{"cannot write " + path.string()};
  }
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) {
    throw IoError{"failed writing " + path.string()};
  }
}

inline std::filesystem::path prepare_directory(const std::string& out) {
  std::error_code error;
  std::filesystem::create_directories(out, error);
  if (error) {
    throw IoError{"cannot create output directory " + out + ": " + error.message()};
  }
  return out;
}

template <class T>
void write_truth(const std::filesystem::path& path, const TrajectoryMatrix<T>& truth) {
  auto out = open_output(path);
  out << "t,m,value\n";
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t m = 0; m < truth.cols(); ++m) {
      out << i + 1 << ',' << m + 1 << ',' << format_number(static_cast<double>(truth(i, m))) << '\n';
    }
  }
  finish_output(out, path);
}

inline void write_summary(const std::filesystem::path& path, const std::vector<StepSummary>& steps) {
  auto out = open_output(path);
  out << "t,m,mean,variance,q05,q95,ess,discarded\n";
  for (const auto& step : steps) {
    for (std::size_t m = 0; m < step.coordinates.size(); ++m) {
      const auto& c = step.coordinates[m];
      out << step.time << ',' << m + 1 << ',' << format_number(c.mean) << ',' << format_number(c.variance) << ','
          << format_number(c.q05) << ',' << format_number(c.q95) << ',' << format_number(step.ess) << ','
          << step.discarded << '\n';
    }
  }
  finish_output(out, path);
}

inline void write_occupancy(const std::filesystem::path& path, const Matrix<double>& occupancy) {
  auto out = open_output(path);
  out << 't';
  for (std::size_t m = 0; m < occupancy.cols(); ++m) {
    out << ",cell_" << m + 1;
  }
  out << '\n';
  for (std::size_t i = 0; i < occupancy.rows(); ++i) {
    out << i + 1;
    for (std::size_t m = 0; m < occupancy.cols(); ++m) {
      out << ',' << format_number(occupancy(i, m));
    }
    out << '\n';
  }
  finish_output(out, path);
}

}  // namespace detail

/// Weighted occupancy P(x^i_m = 1) of a binary particle population.
inline Matrix<double> occupancy_estimate(std::span<const Particle<std::uint8_t>> particles,
                                         std::span<const double> weights) {
  if (particles.empty()) {
    return {};
  }
  Matrix<double> occupancy(particles.front().trajectory.rows(), particles.front().trajectory.cols(), 0.0);
  for (std::size_t j = 0; j < particles.size(); ++j) {
    if (weights[j] == 0.0) {
      continue;
    }
    const auto& x = particles[j].trajectory;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t m = 0; m < x.cols(); ++m) {
        occupancy(i, m) += weights[j] * x(i, m);
      }
    }
  }
  return occupancy;
}

/// Particle estimate next to the exact posterior for one missing AR(1) value.
struct GoldComparisonRow {
  MissingValuePosterior oracle;
  double particle_mean = 0.0;
  double particle_variance = 0.0;
  double standard_error = 0.0;
  OracleComparison comparison;
};

inline std::vector<GoldComparisonRow> compare_population_to_gold(const Ar1Params& params,
                                                                 const ObservationMatrix<double>& observations,
                                                                 std::span<const Particle<double>> particles,
                                                                 std::span<const double> weights) {
  std::vector<GoldComparisonRow> rows;
  std::vector<double> values(particles.size());
  for (const auto& oracle : gold_posteriors(params, observations)) {
    for (std::size_t j = 0; j < particles.size(); ++j) {
      values[j] = particles[j].trajectory(oracle.time - 1, 0);
    }
    GoldComparisonRow row;
    row.oracle = oracle;
    row.particle_mean = weighted_mean(values, weights);
    row.particle_variance = weighted_variance(values, weights);
    row.standard_error = weighted_mean_standard_error(values, weights);
    row.comparison = compare_to_oracle(values, weights, oracle.posterior);
    rows.push_back(row);
  }
  return rows;
}

inline void write_gold_compare(const std::filesystem::path& path, const std::vector<GoldComparisonRow>& rows) {
  auto out = detail::open_output(path);
  out << "time,kind,left,right,oracle_mean,oracle_variance,particle_mean,particle_variance,standard_error,"
         "mean_error,variance_error,ks_distance\n";
  for (const auto& r : rows) {
    out << r.oracle.time << ',' << to_string(r.oracle.kind) << ',' << r.oracle.left << ',' << r.oracle.right << ','
        << format_number(r.oracle.posterior.mean) << ',' << format_number(r.oracle.posterior.variance) << ','
        << format_number(r.particle_mean) << ',' << format_number(r.particle_variance) << ','
        << format_number(r.standard_error) << ',' << format_number(r.comparison.mean_error) << ','
        << format_number(r.comparison.variance_error) << ',' << format_number(r.comparison.ks_distance) << '\n';
  }
  detail::finish_output(out, path);
}

struct RunReport {
  std::vector<std::string> files;  ///< written files, relative to the output directory
  std::vector<StepSummary> steps;
  std::vector<GoldComparisonRow> gold;  ///< ar1 only
  std::size_t completion_time = 0;      ///< simulated invasion only
};

/**
 * Runs one configured experiment and writes summary.csv, feed.txt,
 * truth.csv (simulated feeds), gold_compare.csv (ar1) or heatmap.csv
 * (invasion, from the final weighted population), and manifest.json.
 */
inline RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto dir = detail::prepare_directory(config.out);
  RunReport report;
  auto record = [&](const std::string& name) {
    report.files.push_back(name);
    return dir / name;
  };
  if (config.model == ModelKind::kAr1) {
    const auto model = make_ar1_model(config);
    const auto feed = ar1_feed(config);
    const auto result = run_filter(model, std::span<const ObservationMatrix<double>>{feed.matrices},
                                   filter_options(config));
    report.steps = result.steps;
    report.gold = compare_population_to_gold(model.params(), feed.matrices.back(), result.particles, result.weights);
    detail::write_summary(record("summary.csv"), result.steps);
    write_gold_compare(record("gold_compare.csv"), report.gold);
    write_feed_file(record("feed.txt").string(), 1, feed.matrices, FeedLayout::kFull);
    if (feed.truth) {
      detail::write_truth(record("truth.csv"), *feed.truth);
    }
  } else {
    const InvasionModel model{config.invasion};
    const auto feed = invasion_feed(config);
    const auto result = run_filter(model, std::span<const ObservationMatrix<std::uint8_t>>{feed.matrices},
                                   filter_options(config));
    report.steps = result.steps;
    report.completion_time = feed.completion_time;
    detail::write_summary(record("summary.csv"), result.steps);
    detail::write_occupancy(record("heatmap.csv"), occupancy_estimate(result.particles, result.weights));
    write_feed_file(record("feed.txt").string(), config.invasion.cells, feed.matrices, FeedLayout::kNewestRow);
    if (feed.truth) {
      detail::write_truth(record("truth.csv"), *feed.truth);
    }
  }
  nlohmann::json manifest;
  manifest["code_version"] = kCodeVersion;
  manifest["config"] = config_to_json(config);
  report.files.push_back("manifest.json");
  manifest["outputs"] = report.files;
  const auto path = dir / "manifest.json";
  auto out = detail::open_output(path);
  out << manifest.dump(2) << '\n';
  detail::finish_output(out, path);
  return report;
}

/// Simulates the configured truth and writes feed.txt and truth.csv. Returns the invasion completion time (0 for ar1).
inline std::size_t simulate_truth_files(const ExperimentConfig& config) {
  config.validate();
  const auto dir = detail::prepare_directory(config.out);
  if (config.model == ModelKind::kAr1) {
    const auto truth = simulate_ar1_truth(config.ar1, config.time_steps, config.seed);
    TrajectoryMatrix<double> path;
    for (double x : truth.path) {
      path.append_row(std::vector<double>{x});
    }
    write_feed_file((dir / "feed.txt").string(), 1, truth.feed, FeedLayout::kFull);
    detail::write_truth(dir / "truth.csv", path);
    return 0;
  }
  const auto truth = simulate_invasion_truth(config.invasion, config.seed);
  write_feed_file((dir / "feed.txt").string(), config.invasion.cells, truth.feed, FeedLayout::kNewestRow);
  detail::write_truth(dir / "truth.csv", truth.trajectory);
  return truth.completion_time;
}

/// Exact occupancy given z^1..z^t of the configured invasion feed; writes enumeration.csv.
inline InvasionEnumeration enumerate_files(const ExperimentConfig& config, std::optional<std::size_t> time) {
  if (config.model != ModelKind::kInvasion) {
    throw InputError{"enumerate needs the invasion model"};
  }
  config.validate();
  const auto feed = invasion_feed(config);
  const std::size_t t = time.value_or(feed.matrices.size());
  auto result = exact_posterior_enumeration(config.invasion, feed.matrices, t);
  const auto dir = detail::prepare_directory(config.out);
  detail::write_occupancy(dir / "enumeration.csv", result.occupancy);
  return result;
}

}  // namespace sisc

#endif
