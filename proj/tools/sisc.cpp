#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sisc/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kCollapse = 3, kIo = 4 };

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
  std::optional<std::string> scheme;
  std::optional<std::string> out;
};

void add_common(CLI::App& command, Overrides& overrides) {
  command.add_option("--config", overrides.config, "experiment config or run manifest (JSON)")->required();
  command.add_option("--seed", overrides.seed, "override the seed");
  command.add_option("--particles", overrides.particles, "override the particle count");
  command.add_option("--scheme", overrides.scheme, "override the auxiliary scheme (u1 or u2)");
  command.add_option("--out", overrides.out, "override the output directory");
}

sisc::ExperimentConfig resolve(const Overrides& overrides) {
  auto config = sisc::load_config(overrides.config);
  if (overrides.seed) {
    config.seed = *overrides.seed;
  }
  if (overrides.particles) {
    config.particles = *overrides.particles;
  }
  if (overrides.scheme) {
    config.scheme = sisc::parse_scheme(*overrides.scheme);
  }
  if (overrides.out) {
    config.out = *overrides.out;
  }
  return config;
}

int print_gold(const std::vector<sisc::GoldComparisonRow>& rows) {
  std::size_t interior = 0;
  std::size_t close = 0;
  std::printf("%6s %-10s %12s %12s %12s %8s\n", "time", "kind", "oracle_mean", "particle", "std_err", "ks");
  for (const auto& r : rows) {
    std::printf("%6zu %-10s %12.5f %12.5f %12.5f %8.4f\n", r.oracle.time, sisc::to_string(r.oracle.kind),
                r.oracle.posterior.mean, r.particle_mean, r.standard_error, r.comparison.ks_distance);
    if (r.oracle.kind == sisc::BlockKind::kInterior) {
      ++interior;
      close += r.comparison.ks_distance < 0.08 ? 1 : 0;
    }
  }
  std::printf("interior missing values with KS < 0.08: %zu of %zu\n", close, interior);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential importance sampling with exact-observation corrections"};
  app.require_subcommand(1);

  Overrides overrides;
  auto* run = app.add_subcommand("run", "filter a feed and write summary, oracle and manifest files");
  add_common(*run, overrides);

  auto* simulate = app.add_subcommand("simulate-truth", "simulate a truth trajectory and its observation feed");
  add_common(*simulate, overrides);

  auto* compare = app.add_subcommand("compare-gold", "filter an ar1 feed and compare against the exact posterior");
  add_common(*compare, overrides);

  std::optional<std::size_t> enumerate_time;
  auto* enumerate = app.add_subcommand("enumerate", "exact invasion occupancy by summing over all front paths");
  add_common(*enumerate, overrides);
  enumerate->add_option("--time", enumerate_time, "condition on z^1..z^t (default: whole feed)");

  std::string feed_path;
  std::string feed_model = "ar1";
  std::size_t origin = 0;
  auto* validate = app.add_subcommand("validate-feed", "check a feed file for revelation and format rules");
  validate->add_option("path", feed_path, "feed file")->required();
  validate->add_option("--model", feed_model, "ar1 or invasion (adds presence-only rules)")
      ->check(CLI::IsMember({"ar1", "invasion"}));
  validate->add_option("--origin", origin, "1-based invasion origin that must be the only detection at t = 1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*validate) {
      const auto feed = sisc::read_feed_file(feed_path);
      sisc::FeedRules rules;
      if (feed_model == "invasion") {
        rules = {true, true, true, std::nullopt};
        if (origin != 0) {
          rules.origin = origin - 1;
        }
      }
      const auto report = sisc::validate_feed(feed, rules);
      std::cout << report.describe() << '\n';
      return report.ok ? kOk : kConfig;
    }
    const auto config = resolve(overrides);
    if (*run) {
      const auto report = sisc::run_experiment(config);
      for (const auto& file : report.files) {
        std::cout << config.out << '/' << file << '\n';
      }
    } else if (*simulate) {
      const auto completion = sisc::simulate_truth_files(config);
      std::cout << config.out << "/feed.txt\n" << config.out << "/truth.csv\n";
      if (config.model == sisc::ModelKind::kInvasion) {
        std::cout << "completion time: " << completion << '\n';
      }
    } else if (*compare) {
      if (config.model != sisc::ModelKind::kAr1) {
        throw sisc::InputError{"compare-gold needs the ar1 model"};
      }
      return print_gold(sisc::run_experiment(config).gold);
    } else if (*enumerate) {
      const auto result = sisc::enumerate_files(config, enumerate_time);
      std::cout << config.out << "/enumeration.csv\nlog evidence: " << sisc::format_number(result.log_evidence)
                << '\n';
    }
  } catch (const sisc::ParticleCollapse& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kCollapse;
  } catch (const sisc::InputError& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kConfig;
  } catch (const sisc::IoError& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kIo;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << '\n';
    return kInternal;
  }
  return kOk;
}
