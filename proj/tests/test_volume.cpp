#include "oracles.hpp"

#include "pdmpvol/diagnostics.hpp"
#include "pdmpvol/models.hpp"
#include "pdmpvol/volume.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace pdmpvol;

namespace {

double normalized_gaussian(double x, double y, double sigma) {
  const double s2 = sigma * sigma;
  return std::exp(-(x * x + y * y) / (2.0 * s2)) / (2.0 * std::numbers::pi * s2);
}

// A warmed-up sampler at sigma with a tuned output clock.
BpsState warm_state(const HPolytope& P, double sigma, SamplerParams& params, std::uint64_t seed) {
  BpsState s = BpsState::start(P, Vector::Zero(P.dim()), CounterRng(seed));
  const GaussianTarget target = GaussianTarget::from_sigma(sigma);
  const EventCounters c0 = s.counters;
  const double T = run_events(s, P, target, params.lambda_refresh, 10000);
  params.lambda_out = tune_output_rate((s.counters - c0).events(), T, P.dim());
  return s;
}

struct SeriesStats {
  double mean, se;
};

SeriesStats mc_stats(const std::vector<double>& w, double var) {
  return {oracle::mean(w), std::sqrt(var / ess(w))};
}

std::vector<double> log_volumes(const HPolytope& P, const ModelInfo& info, EstimatorConfig cfg,
                                int repeats) {
  std::vector<double> out;
  for (int r = 0; r < repeats; ++r) {
    cfg.repeat = static_cast<std::uint64_t>(r);
    out.push_back(estimate_volume(P, info, cfg).log_volume);
  }
  return out;
}

}  // namespace

TEST(ChooseSigma0, IntervalBracket) {
  Matrix A(2, 1);
  A << 1, -1;
  const HPolytope P(A, Vector::Ones(2));
  // Analytic bracket from 2 Phi(1/sigma) - 1 in [0.1, 0.2].
  EXPECT_NEAR(2.0 * oracle::normal_cdf(1.0 / 3.947) - 1.0, 0.2, 1e-4);
  EXPECT_NEAR(2.0 * oracle::normal_cdf(1.0 / 7.956) - 1.0, 0.1, 1e-4);
  EstimatorConfig cfg;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Sigma0Choice c = choose_sigma0(P, 1.0, cfg, CounterRng(seed));
    EXPECT_GE(c.p_bisect, 0.1);
    EXPECT_LE(c.p_bisect, 0.2);
    EXPECT_GT(c.sigma0, 3.947 * 0.97);
    EXPECT_LT(c.sigma0, 7.956 * 1.03);
    const double p = 2.0 * oracle::normal_cdf(1.0 / c.sigma0) - 1.0;
    const double se = std::sqrt((1.0 - p) / (p * 4.0 * cfg.sigma0_trials));
    EXPECT_NEAR(c.log_mass0, std::log(p), 3.0 * se);
  }
}

TEST(ChooseSigma0, CubeMassAgainstIndependentRejection) {
  const Model m = make_cube(3);
  EstimatorConfig cfg;
  const Sigma0Choice c = choose_sigma0(m.polytope, *m.info.bounding_radius, cfg, CounterRng(5));
  EXPECT_GE(c.p_bisect, 0.1);
  EXPECT_LE(c.p_bisect, 0.2);
  std::mt19937_64 gen(1234);
  std::normal_distribution<double> normal;
  const int n = 1000000;
  int inside = 0;
  for (int t = 0; t < n; ++t) {
    bool in = true;
    for (int j = 0; j < 3; ++j) in = in && std::abs(c.sigma0 * normal(gen)) <= 1.0;
    inside += in;
  }
  const double p = static_cast<double>(inside) / n;
  const double p_hat = std::exp(c.log_mass0);
  const double se = std::sqrt(p * (1 - p) / n + p * (1 - p) / (4.0 * cfg.sigma0_trials));
  EXPECT_NEAR(p_hat, p, 3.0 * se);
}

TEST(BuildSchedule, Examples) {
  const Schedule s = build_schedule(1.0, std::sqrt(2.0), 2.0, 2.0);
  ASSERT_EQ(s.sigmas.size(), 3u);
  EXPECT_NEAR(s.sigmas[1] * s.sigmas[1], 2.0, 1e-12);
  EXPECT_NEAR(s.sigmas[2] * s.sigmas[2], 4.0, 1e-12);
  EXPECT_EQ(s.ratios(), 2u);
  EXPECT_NEAR(default_schedule_factor(100), 1.1, 1e-15);

  const Schedule none = build_schedule(10.0, 1.0, 1.5, 2.0);
  EXPECT_EQ(none.ratios(), 0u);

  CounterRng rng(2);
  for (int t = 0; t < 100; ++t) {
    const Schedule r = build_schedule(0.01 + rng.uniform(), 1.0 + 10 * rng.uniform(),
                                      1.0 + 0.5 * rng.uniform() + 1e-3, 1.0 + 100 * rng.uniform());
    for (std::size_t i = 1; i < r.sigmas.size(); ++i) ASSERT_GT(r.sigmas[i], r.sigmas[i - 1]);
  }
  EXPECT_THROW(build_schedule(1.0, 1.0, 1.0, 2.0), std::invalid_argument);
}

TEST(LogDensityRatio, Examples) {
  EXPECT_NEAR(log_density_ratio(Vector::Zero(2), 1.0, std::sqrt(2.0), 2), -std::log(2.0), 1e-15);
  EXPECT_EQ(log_density_ratio(Vector::Ones(3), 0.7, 0.7, 3), 0.0);

  CounterRng rng(4);
  for (int t = 0; t < 200; ++t) {
    const Index d = 1 + static_cast<Index>(rng() % 10);
    Vector x(d);
    for (auto& c : x) c = 2.0 * rng.uniform() - 1.0;
    const double sp = 0.1 + rng.uniform(), sn = sp * (1.0 + rng.uniform());
    long double r2 = 0.0L;
    for (double c : x) r2 += static_cast<long double>(c) * c;
    auto density = [&](long double s) {
      return std::exp(-r2 / (2.0L * s * s)) /
             std::pow(2.0L * std::numbers::pi_v<long double> * s * s, d / 2.0L);
    };
    const long double direct = density(sn) / density(sp);
    EXPECT_NEAR(std::exp(log_density_ratio(x, sp, sn, d)) / static_cast<double>(direct), 1.0,
                1e-12);
  }
}

TEST(FlatCorrection, ClosedForm) {
  EXPECT_NEAR(flat_correction(10.0, 2), 6.4430, 5e-5);
  EXPECT_NEAR(flat_correction(10.0, 2), std::log(2.0 * std::numbers::pi * 100.0), 1e-13);
}

TEST(AllocateBudget, Examples) {
  EXPECT_EQ(allocate_budget({0.5, 0.25}, 300), (std::vector<std::uint64_t>{100, 200}));
  const auto eq = allocate_budget({0.3, 0.3, 0.3}, 100);
  for (auto n : eq) EXPECT_NEAR(static_cast<double>(n), 100.0 / 3.0, 1.0);

  CounterRng rng(6);
  for (int t = 0; t < 500; ++t) {
    const std::size_t m = 1 + rng() % 40;
    std::vector<double> ess(m);
    for (auto& e : ess) e = std::pow(10.0, -4.0 * rng.uniform());
    const std::uint64_t N = m + rng() % 5000;
    const auto n = allocate_budget(ess, N);
    std::uint64_t total = 0;
    for (auto k : n) {
      EXPECT_GE(k, 1u);
      total += k;
    }
    ASSERT_EQ(total, N);
  }
  EXPECT_THROW(allocate_budget({0.5, 0.5, 0.5}, 2), std::invalid_argument);
  EXPECT_THROW(allocate_budget({0.5, 0.0}, 20), std::invalid_argument);
}

TEST(EstimatePhase, IdenticalSigmasGiveZero) {
  const HPolytope P = make_cube(3).polytope;
  SamplerParams params;
  BpsState s = warm_state(P, 0.8, params, 3);
  EXPECT_EQ(estimate_phase(s, P, 0.8, 0.8, 500, params).log_ratio, 0.0);
}

TEST(EstimatePhase, SquareRatioMatchesQuadrature) {
  const HPolytope P = make_cube(2).polytope;
  const double sp = 1.0, sn = std::sqrt(2.0);
  const double Ip = oracle::square_integral([&](double x, double y) {
    return normalized_gaussian(x, y, sp);
  });
  const double In = oracle::square_integral([&](double x, double y) {
    return normalized_gaussian(x, y, sn);
  });
  const double W2 = oracle::square_integral([&](double x, double y) {
    const double fn = normalized_gaussian(x, y, sn);
    return fn * fn / normalized_gaussian(x, y, sp);
  }) / Ip;
  const double ratio = In / Ip;
  EXPECT_LT(ratio, 1.0);

  SamplerParams params;
  BpsState s = warm_state(P, sp, params, 10);
  BpsState twin = s;
  const int N = 100000;
  const SampleRun run = sample_n(twin, P, GaussianTarget::from_sigma(sp), params, N);
  std::vector<double> w(N);
  for (int i = 0; i < N; ++i)
    w[i] = std::exp(log_density_ratio(run.samples.row(i).transpose(), sp, sn, 2));
  const SeriesStats st = mc_stats(w, W2 - ratio * ratio);
  EXPECT_NEAR(st.mean, ratio, 3.0 * st.se);

  const PhaseResult r = estimate_phase(s, P, sp, sn, N, params);
  EXPECT_NEAR(r.log_ratio, std::log(st.mean), 1e-12);
  EXPECT_EQ(r.N_i, static_cast<std::uint64_t>(N));
  EXPECT_LE(r.log_ratio, 3.0 * st.se / st.mean);
  EXPECT_GT(r.ess_per_sample, 0.0);
  EXPECT_LE(r.ess_per_sample, 1.0);
}

TEST(FinalCorrection, ExactRatioOnSquare) {
  const HPolytope P = make_cube(2).polytope;
  const double sm = 10.0;
  const double I = oracle::square_integral([&](double x, double y) {
    return normalized_gaussian(x, y, sm);
  });
  const double G2 = oracle::square_integral([&](double x, double y) {
    return 1.0 / normalized_gaussian(x, y, sm);
  }) / I;
  const double mean_g = 4.0 / I;

  SamplerParams params;
  BpsState s = warm_state(P, sm, params, 11);
  BpsState twin = s;
  const int N = 100000;
  const SampleRun run = sample_n(twin, P, GaussianTarget::from_sigma(sm), params, N);
  std::vector<double> g(N);
  for (int i = 0; i < N; ++i) g[i] = std::exp(log_inverse_density(run.samples.row(i).transpose(), sm, 2));
  const SeriesStats st = mc_stats(g, G2 - mean_g * mean_g);

  const FinalCorrection fc = final_correction(s, P, sm, N, params, FinalMode::exact_ratio);
  EXPECT_NEAR(fc.log_value, std::log(st.mean), 1e-12);
  EXPECT_NEAR(fc.log_value + std::log(I), std::log(4.0), 3.0 * st.se / st.mean);
  EXPECT_EQ(fc.phase.N_i, static_cast<std::uint64_t>(N));

  const FinalCorrection flat = final_correction(s, P, sm, 0, params, FinalMode::flat_approx);
  EXPECT_NEAR(flat.log_value, 6.4430, 5e-5);
  EXPECT_EQ(flat.phase.N_i, 0u);
}

TEST(FinalCorrection, VarianceVanishesWhenFlat) {
  const HPolytope P = make_cube(2).polytope;
  SamplerParams params;
  BpsState s = warm_state(P, 1e4, params, 12);
  const FinalCorrection fc = final_correction(s, P, 1e4, 2000, params, FinalMode::exact_ratio);
  EXPECT_NEAR(fc.log_value, flat_correction(1e4, 2), 1e-7);
}

TEST(ToScientific, RoundTripAndHugeValues) {
  for (double lv : {std::log(4.0), -std::lgamma(11.0), 500.0 * std::numbers::ln2, 0.0, -800.0}) {
    const ScientificValue s = to_scientific(lv);
    EXPECT_GE(s.mantissa, 1.0);
    EXPECT_LT(s.mantissa, 10.0);
    const double back = std::log(s.mantissa) + s.exp10 * std::numbers::ln10;
    EXPECT_NEAR(back, lv, 1e-9 * std::max(1.0, std::abs(lv)));
  }
  EXPECT_EQ(to_scientific(std::log(4.0)).exp10, 0);
  EXPECT_EQ(to_scientific(500.0 * std::numbers::ln2).exp10, 150);
}

TEST(EstimatorConfig, Validation) {
  EstimatorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.c_min = 0.3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.schedule_factor = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(EstimateVolume, SquareWithinStandardErrors) {
  const Model m = make_cube(2);
  EstimatorConfig cfg;
  cfg.total_budget = 100000;
  const auto lv = log_volumes(m.polytope, m.info, cfg, 10);
  const double sd = std::sqrt(oracle::variance(lv));
  EXPECT_LE(std::abs(lv[0] - std::log(4.0)), 3.0 * sd);
  EXPECT_LE(std::abs(oracle::mean(lv) - std::log(4.0)), 3.0 * sd / std::sqrt(10.0));
  EXPECT_LT(sd, 0.05);
}

TEST(EstimateVolume, ScaleEquivariance) {
  const Model m = make_cube(5);
  const HPolytope scaled(m.polytope.A() / 2.0, m.polytope.b());
  ModelInfo info = m.info;
  info.bounding_radius = 2.0 * *m.info.bounding_radius;
  EstimatorConfig cfg;
  cfg.total_budget = 20000;
  const auto a = log_volumes(m.polytope, m.info, cfg, 8);
  const auto b = log_volumes(scaled, info, cfg, 8);
  const double se = std::sqrt(oracle::variance(a) / 8 + oracle::variance(b) / 8);
  EXPECT_NEAR(oracle::mean(b) - oracle::mean(a), 5.0 * std::numbers::ln2, 3.0 * se);
}

TEST(EstimateVolume, BudgetConservationAndDeterminism) {
  const Model m = make_std_simplex(4);
  EstimatorConfig cfg;
  cfg.total_budget = 12345;
  const VolumeEstimate e = estimate_volume(m.polytope, m.info, cfg);
  std::uint64_t total = 0, outputs = 0;
  for (const auto& p : e.phases) {
    EXPECT_GE(p.N_i, 1u);
    EXPECT_TRUE(std::isfinite(p.log_ratio));
    total += p.N_i;
    outputs += p.events.outputs;
  }
  EXPECT_EQ(total, cfg.total_budget);
  EXPECT_EQ(outputs, cfg.total_budget);
  EXPECT_EQ(e.phases.back().kind, PhaseKind::final_correction);
  double assembled = e.log_mass0 + e.final_term;
  for (std::size_t i = 0; i + 1 < e.phases.size(); ++i) assembled += e.phases[i].log_ratio;
  EXPECT_NEAR(e.log_volume, assembled, 1e-12);

  const VolumeEstimate again = estimate_volume(m.polytope, m.info, cfg);
  EXPECT_EQ(again.log_volume, e.log_volume);
  EXPECT_EQ(again.events, e.events);
  cfg.repeat = 1;
  EXPECT_NE(estimate_volume(m.polytope, m.info, cfg).log_volume, e.log_volume);
}

TEST(EstimateVolume, FlatModeAndFixedRefresh) {
  const Model m = make_cube(3);
  EstimatorConfig cfg;
  cfg.total_budget = 30000;
  cfg.final_mode = FinalMode::flat_approx;
  cfg.lambda_refresh = 2.0;
  const VolumeEstimate e = estimate_volume(m.polytope, m.info, cfg);
  EXPECT_NEAR(e.log_volume, *m.info.exact_log_volume, 0.1);
  EXPECT_EQ(e.phases.back().N_i, 0u);
  for (std::size_t i = 0; i + 1 < e.phases.size(); ++i) EXPECT_EQ(e.phases[i].lambda_refresh, 2.0);
}

TEST(EstimateVolume, EstimatesRadiusWhenMissing) {
  const Model m = make_cube(3);
  EstimatorConfig cfg;
  cfg.total_budget = 30000;
  const VolumeEstimate e = estimate_volume(m.polytope, ModelInfo{}, cfg);
  EXPECT_NEAR(e.log_volume, *m.info.exact_log_volume, 0.1);
}

TEST(EstimateVolume, BudgetTooSmall) {
  const Model m = make_cube(10);
  EstimatorConfig cfg;
  cfg.total_budget = 3;
  EXPECT_THROW(estimate_volume(m.polytope, m.info, cfg), std::invalid_argument);
}

// Unbiasedness of the product estimator: mean of the linear-scale volume.
TEST(SlowEstimateVolume, Cube10MeanOverRepeats) {
  const Model m = make_cube(10);
  EstimatorConfig cfg;
  cfg.total_budget = 1000000;
  const auto lv = log_volumes(m.polytope, m.info, cfg, 50);
  std::vector<double> v(lv.size());
  for (std::size_t i = 0; i < lv.size(); ++i) v[i] = std::exp(lv[i]);
  const double se = std::sqrt(oracle::variance(v) / static_cast<double>(v.size()));
  EXPECT_NEAR(oracle::mean(v), 1024.0, 2.0 * se);
}
