#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sisc/models/ar1.hpp"

namespace {

using sisc::Ar1Params;
using sisc::Stream;
using sisc::StreamPurpose;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

double pdf(double x, double mean, double variance) {
  return boost::math::pdf(boost::math::normal{mean, std::sqrt(variance)}, x);
}

template <class F>
double integrate(F f) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -kInf, kInf, 15, 1e-13);
}

TEST(Ar1Params, RejectsInvalidParameters) {
  EXPECT_THROW(Ar1Params::make(1.0, 1.0, 0.2), sisc::InputError);
  EXPECT_THROW(Ar1Params::make(-1.2, 1.0, 0.2), sisc::InputError);
  EXPECT_THROW(Ar1Params::make(0.5, 0.0, 0.2), sisc::InputError);
  EXPECT_THROW(Ar1Params::make(0.5, 1.0, 1.5), sisc::InputError);
  EXPECT_NO_THROW(Ar1Params::make(-0.99, 2.0, 0.0));
}

TEST(Ar1Params, StationaryStandardDeviation) {
  EXPECT_NEAR(std::sqrt(Ar1Params::make(0.9, 1.0, 0.2).stationary_variance()), 2.294, 5e-4);
  EXPECT_DOUBLE_EQ(Ar1Params::make(0.0, 2.5, 0.2).stationary_variance(), 2.5);
}

double sample_variance_of_initial(const Ar1Params& params, std::size_t draws) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    Stream stream{31, StreamPurpose::kTest, k, 1};
    const double x = sisc::ar1_initial_sample(params, stream);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / draws;
  return sum_sq / draws - mean * mean;
}

TEST(Ar1Sampling, InitialVarianceIsStationary) {
  constexpr std::size_t draws = 100000;
  for (const auto& params : {Ar1Params::make(0.5, 1.0, 0.2), Ar1Params::make(0.0, 1.7, 0.2)}) {
    const double v = params.stationary_variance();
    EXPECT_NEAR(sample_variance_of_initial(params, draws), v, 3.0 * v * std::sqrt(2.0 / draws));
  }
  EXPECT_NEAR(Ar1Params::make(0.5, 1.0, 0.2).stationary_variance(), 4.0 / 3.0, 1e-15);
}

TEST(Ar1Sampling, StationarityOverFiftyUnobservedSteps) {
  const auto params = Ar1Params::make(0.8, 0.6, 0.2);
  constexpr std::size_t particles = 100000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t j = 0; j < particles; ++j) {
    Stream first{17, StreamPurpose::kTest, j, 1};
    double x = sisc::ar1_initial_sample(params, first);
    for (std::size_t t = 2; t <= 51; ++t) {
      Stream stream{17, StreamPurpose::kTest, j, t};
      x = sisc::ar1_transition_sample(params, x, stream);
    }
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / particles;
  const double v = params.stationary_variance();
  EXPECT_NEAR(sum_sq / particles - mean * mean, v, 3.0 * v * std::sqrt(2.0 / particles));
}

TEST(Ar1Density, Examples) {
  const auto params = Ar1Params::make(0.5, 1.0, 0.2);
  EXPECT_NEAR(sisc::ar1_transition_log_density(params, 2.0, 1.0), -0.5 * std::log(2.0 * kPi), 1e-15);
  EXPECT_NEAR(sisc::ar1_transition_log_density(params, 0.0, 1.0), -0.5 * std::log(2.0 * kPi) - 0.5, 1e-15);
  EXPECT_EQ(sisc::ar1_transition_log_density(params, 0.0, 1.7), sisc::ar1_transition_log_density(params, 0.0, -1.7));
  EXPECT_NEAR(sisc::ar1_transition_log_density(params, 0.3, -0.4), std::log(pdf(-0.4, 0.15, 1.0)), 1e-13);
  EXPECT_NEAR(sisc::ar1_initial_log_density(params, 0.9), std::log(pdf(0.9, 0.0, 4.0 / 3.0)), 1e-13);
}

TEST(Revelation, ExtremeProbabilities) {
  sisc::KnowledgeMatrix previous(2, 3, 0);
  previous(0, 1) = 1;
  Stream a{1, StreamPurpose::kTest, 0, 0};
  const auto none = sisc::revelation_sample(Ar1Params::make(0.5, 1.0, 0.0), previous, 3, a);
  ASSERT_EQ(none.rows(), 3U);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t m = 0; m < 3; ++m) {
      EXPECT_EQ(none(i, m), i < 2 ? previous(i, m) : 0);
    }
  }
  Stream b{1, StreamPurpose::kTest, 0, 0};
  const auto all = sisc::revelation_sample(Ar1Params::make(0.5, 1.0, 1.0), previous, 3, b);
  for (auto bit : all.data()) {
    EXPECT_EQ(bit, 1);
  }
}

TEST(Revelation, FrequencyMatchesTheta) {
  const auto params = Ar1Params::make(0.5, 1.0, 0.2);
  const sisc::KnowledgeMatrix previous(1, 1, 0);
  constexpr std::size_t trials = 100000;
  double revealed = 0.0;
  for (std::size_t k = 0; k < trials; ++k) {
    Stream stream{8, StreamPurpose::kTest, k, 0};
    revealed += sisc::revelation_sample(params, previous, 1, stream)(0, 0);
  }
  EXPECT_NEAR(revealed / trials, 0.2, 3.0 * std::sqrt(0.2 * 0.8 / trials));
}

TEST(Ar1PartialWeight, Examples) {
  const auto params = Ar1Params::make(0.5, 1.0, 0.2);
  const std::vector<double> original{0.0, 0.0};
  const std::vector<double> first_changed{1.0, 0.0};
  const std::vector<double> second_changed{0.0, 1.0};
  EXPECT_EQ(sisc::ar1_partial_log_weight(params, original, original, 1), 0.0);
  EXPECT_NEAR(sisc::ar1_partial_log_weight(params, original, first_changed, 0), -0.375, 1e-15);
  EXPECT_NEAR(sisc::ar1_partial_log_weight(params, original, second_changed, 1), -0.5, 1e-15);
}

TEST(Ar1PartialWeight, EqualsDensityRatio) {
  const auto params = Ar1Params::make(-0.7, 2.3, 0.2);
  const std::vector<double> original{0.4, -1.1, 2.0};
  const std::vector<double> corrected{0.4, 0.6, 2.0};
  EXPECT_NEAR(sisc::ar1_partial_log_weight(params, original, corrected, 1),
              std::log(pdf(0.6, -0.7 * 0.4, 2.3) / pdf(-1.1, -0.7 * 0.4, 2.3)), 1e-12);
  EXPECT_NEAR(sisc::ar1_partial_log_weight(params, original, corrected, 2),
              std::log(pdf(2.0, -0.7 * 0.6, 2.3) / pdf(2.0, -0.7 * -1.1, 2.3)), 1e-12);
  const std::vector<double> first{1.9, -1.1, 2.0};
  const double v = params.stationary_variance();
  EXPECT_NEAR(sisc::ar1_partial_log_weight(params, original, first, 0), std::log(pdf(1.9, 0.0, v) / pdf(0.4, 0.0, v)),
              1e-12);
}

TEST(Ar1FiberMass, NoNewObservationsIsUnitMass) {
  const auto params = Ar1Params::make(0.5, 1.0, 0.2);
  const std::vector<double> path{0.1, 0.2, 0.3};
  const auto fiber = sisc::ar1_u2_fiber_mass(params, path, {});
  EXPECT_EQ(fiber.log_mass, 0.0);
  EXPECT_TRUE(fiber.factor_rows.empty());
}

TEST(Ar1FiberMass, TerminalValueIntegratesToOne) {
  const auto params = Ar1Params::make(0.5, 1.0, 0.2);
  const std::vector<double> path{0.8, -0.3};
  const std::vector<std::size_t> rows{1};
  const auto fiber = sisc::ar1_u2_fiber_mass(params, path, rows);
  const double quadrature = integrate([&](double x) { return pdf(x, 0.5 * 0.8, 1.0); });
  EXPECT_NEAR(std::exp(fiber.log_mass), quadrature, 1e-9);
  EXPECT_EQ(fiber.factor_rows, (std::vector<std::size_t>{1}));
}

TEST(Ar1FiberMass, InteriorValueMatchesQuadrature) {
  const auto params = Ar1Params::make(0.6, 1.4, 0.2);
  const std::vector<double> path{0.8, 5.0, -0.5};
  const std::vector<std::size_t> rows{1};
  const auto fiber = sisc::ar1_u2_fiber_mass(params, path, rows);
  const double quadrature = integrate([&](double x) { return pdf(x, 0.6 * 0.8, 1.4) * pdf(-0.5, 0.6 * x, 1.4); });
  EXPECT_NEAR(std::exp(fiber.log_mass), quadrature, 1e-9);
  EXPECT_EQ(fiber.factor_rows, (std::vector<std::size_t>{1, 2}));
}

TEST(Ar1FiberMass, TwoContiguousValuesMatchTwoDimensionalQuadrature) {
  const auto params = Ar1Params::make(0.6, 1.4, 0.2);
  const std::vector<double> path{-1.2, 0.0, 0.0, 0.9, 0.4};
  const std::vector<std::size_t> rows{1, 2};
  const auto fiber = sisc::ar1_u2_fiber_mass(params, path, rows);
  const double quadrature = integrate([&](double x1) {
    return pdf(x1, 0.6 * -1.2, 1.4) * integrate([&](double x2) { return pdf(x2, 0.6 * x1, 1.4) * pdf(0.9, 0.6 * x2, 1.4); });
  });
  EXPECT_NEAR(std::exp(fiber.log_mass), quadrature, 1e-9);
  EXPECT_EQ(fiber.factor_rows, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Ar1FiberMass, LeadingValueMatchesQuadrature) {
  const auto params = Ar1Params::make(-0.4, 0.7, 0.2);
  const std::vector<double> path{3.0, 0.5, 1.0};
  const std::vector<std::size_t> rows{0};
  const auto fiber = sisc::ar1_u2_fiber_mass(params, path, rows);
  const double v = params.stationary_variance();
  const double quadrature = integrate([&](double x) { return pdf(x, 0.0, v) * pdf(0.5, -0.4 * x, 0.7); });
  EXPECT_NEAR(std::exp(fiber.log_mass), quadrature, 1e-9);
}

TEST(Ar1FiberMass, SeparateBlocksMultiply) {
  const auto params = Ar1Params::make(0.5, 1.0, 0.2);
  const std::vector<double> path{0.2, 9.0, 0.4, 9.0, -0.1, 9.0};
  const std::vector<std::size_t> rows{1, 3, 5};
  const auto fiber = sisc::ar1_u2_fiber_mass(params, path, rows);
  const double first = integrate([&](double x) { return pdf(x, 0.5 * 0.2, 1.0) * pdf(0.4, 0.5 * x, 1.0); });
  const double second = integrate([&](double x) { return pdf(x, 0.5 * 0.4, 1.0) * pdf(-0.1, 0.5 * x, 1.0); });
  EXPECT_NEAR(std::exp(fiber.log_mass), first * second, 1e-9);
  EXPECT_EQ(fiber.factor_rows, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
}

TEST(Ar1Model, DefaultU1BoxIsEightStationarySds) {
  const sisc::Ar1Model model{Ar1Params::make(0.5, 1.0, 0.2)};
  const double bound = 8.0 * std::sqrt(4.0 / 3.0);
  EXPECT_NEAR(model.u1_upper(), bound, 1e-12);
  EXPECT_NEAR(model.u1_lower(), -bound, 1e-12);
  EXPECT_TRUE(model.u1_contains({0, 0}, bound - 1e-9));
  EXPECT_FALSE(model.u1_contains({0, 0}, bound + 1e-9));
  EXPECT_THROW((sisc::Ar1Model{Ar1Params::make(0.5, 1.0, 0.2), 1.0, 1.0}), sisc::InputError);
}

TEST(Ar1Truth, FeedRevealsMonotonicallyAndMatchesPath) {
  const auto params = Ar1Params::make(0.5, 1.0, 0.2);
  const auto truth = sisc::simulate_ar1_truth(params, 30, 5);
  ASSERT_EQ(truth.feed.size(), 30U);
  sisc::ObservationHistory<double> history;
  for (const auto& z : truth.feed) {
    EXPECT_NO_THROW(history.push(z));
    for (std::size_t i = 0; i < z.rows(); ++i) {
      if (z(i, 0)) {
        EXPECT_EQ(*z(i, 0), truth.path[i]);
      }
    }
  }
}

}  // namespace
