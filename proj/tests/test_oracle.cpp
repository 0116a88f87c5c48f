#include <doctest.h>

#include <cmath>

#include "searchlab/analysis.hpp"
#include "searchlab/oracle.hpp"

using namespace searchlab;

TEST_CASE("calibrated landscape: architecture dominates AP variance") {
  const auto& space = ConfigurationSpace::default_space();
  const LandscapeParams params = calibrate_default(space, 1);
  Rng rng = Rng::stream(1, 77);
  std::vector<std::pair<std::string, double>> labeled;
  for (int i = 0; i < 5000; ++i) {
    const Configuration c = sample_uniform(space, rng);
    const EvalOutcome out = evaluate(params, space, c, rng);
    if (out.status == EvalStatus::completed)
      labeled.emplace_back(c.level("backbone") + "|" + c.level("encoder"), out.ap);
  }
  Rng prng(1);
  const AnovaResult res = anova_oneway_values(labeled, 1, 0, prng);
  CHECK(res.eta_sq >= 0.75);
  CHECK(res.eta_sq <= 0.95);
}

TEST_CASE("zero noise makes evaluation deterministic") {
  const auto& space = ConfigurationSpace::default_space();
  LandscapeParams params = calibrate_default(space, 2);
  params.noise_sigma = 0.0;
  params.failure_profile.clear();
  Rng rng(9);
  const Configuration config = sample_uniform(space, rng);
  Rng e1(3), e2(3), e3(99);
  const EvalOutcome a = evaluate(params, space, config, e1);
  const EvalOutcome b = evaluate(params, space, config, e2);
  const EvalOutcome c = evaluate(params, space, config, e3);
  CHECK(a.ap == b.ap);
  CHECK(a.ap == c.ap);  // noise-free value is rng-independent
  CHECK(a.ap == true_value(params, space, config));
}

TEST_CASE("the designated dominant backbone owns the best cell") {
  const auto& space = ConfigurationSpace::default_space();
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const LandscapeParams params = calibrate_default(space, seed);
    const auto [cell, value] = true_optimum(params, space, 200000);
    CHECK(cell.levels.front() == dominant_backbone(params));
    CHECK(value > 0.0);
    CHECK(value <= 1.0);
  }
}

TEST_CASE("observation noise magnitude matches the configured sigma") {
  const auto& space = ConfigurationSpace::default_space();
  LandscapeParams params = calibrate_default(space, 6);
  params.noise_sigma = 0.01;
  params.failure_profile.clear();
  Rng rng(13);
  Configuration config = sample_uniform(space, rng);
  // Keep the mean far from the clamp so the sample sd is undistorted.
  config.set("backbone", dominant_backbone(params));
  Rng erng(21);
  std::vector<double> aps;
  for (int i = 0; i < 10000; ++i) aps.push_back(evaluate(params, space, config, erng).ap);
  double mean = 0.0;
  for (double a : aps) mean += a;
  mean /= static_cast<double>(aps.size());
  double var = 0.0;
  for (double a : aps) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(aps.size() - 1));
  CHECK(sd > 0.0085);
  CHECK(sd < 0.0115);
}

TEST_CASE("failure injection matches the configured rate") {
  const auto& space = ConfigurationSpace::default_space();
  LandscapeParams params = calibrate_default(space, 7);
  params.failure_profile = {{FailureCategory::nan_loss, 0.04},
                            {FailureCategory::oom, 0.03},
                            {FailureCategory::missing_file, 0.03}};
  Rng rng(31);
  const Configuration config = sample_uniform(space, rng);
  Rng erng(77);
  int failures = 0;
  for (int i = 0; i < 10000; ++i)
    if (evaluate(params, space, config, erng).status == EvalStatus::failed) ++failures;
  CHECK(failures > 900);
  CHECK(failures < 1100);
}

TEST_CASE("true optimum dominates noise-free evaluations") {
  const auto& space = ConfigurationSpace::default_space();
  LandscapeParams params = calibrate_default(space, 8);
  params.noise_sigma = 0.0;
  params.failure_profile.clear();
  const auto [cell, f_star] = true_optimum(params, space, 200000);
  (void)cell;
  Rng rng(15);
  for (int i = 0; i < 2000; ++i) {
    const Configuration config = sample_uniform(space, rng);
    CHECK(true_value(params, space, config) <= f_star + 1e-12);
  }
}

TEST_CASE("noise-free evaluation at the continuous optimum hits the cell value") {
  const auto& space = ConfigurationSpace::default_space();
  LandscapeParams params = calibrate_default(space, 13);
  params.noise_sigma = 0.0;
  params.failure_profile.clear();
  Rng rng(1);
  Configuration config = sample_uniform(space, rng);
  // Move every active continuous dim to its response optimum; the quadratic
  // penalties vanish and only the categorical effects remain.
  for (const auto& [dim_name, response] : params.continuous_response) {
    if (!config.has(dim_name)) continue;
    config.set(dim_name, space.unscaled(space.at(dim_name), response.optimum));
  }
  const double expected =
      std::min(1.0, std::max(0.0, params.base_level +
                                      params.backbone_effects.at(config.level("backbone")) +
                                      params.encoder_effects.at(config.level("encoder")) +
                                      params.interaction_effects.at(
                                          config.level("backbone") + "|" +
                                          config.level("encoder"))));
  Rng erng(2);
  const EvalOutcome out = evaluate(params, space, config, erng);
  CHECK(out.ap == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("true optimum matches an independent full-enumeration scan") {
  const auto& space = ConfigurationSpace::default_space();
  const LandscapeParams params = calibrate_default(space, 14);
  const auto [cell, value] = true_optimum(params, space, 200000);

  // Independent route: enumerate every cell, build a configuration with all
  // continuous dims at their optima, and score it through true_value.
  const auto cats = space.categorical_dimensions();
  double brute_best = -1.0;
  CellId brute_cell;
  for (const auto& candidate : enumerate_cells(space, 200000)) {
    Configuration config;
    for (std::size_t i = 0; i < cats.size(); ++i)
      config.set(cats[i]->name, candidate.levels[i]);
    for (const auto& [dim_name, response] : params.continuous_response) {
      if (!space.dimension_active(dim_name, config)) continue;
      config.set(dim_name, space.unscaled(space.at(dim_name), response.optimum));
    }
    const double v = true_value(params, space, config);
    if (v > brute_best) {
      brute_best = v;
      brute_cell = candidate;
    }
  }
  CHECK(value == doctest::Approx(brute_best).epsilon(1e-12));
  CHECK(cell == brute_cell);
}

TEST_CASE("all-zero effects tie-break to the first canonical cell") {
  const auto space = define_space(R"({"dimensions": [
    {"name": "backbone", "kind": "categorical", "levels": ["a", "b"]},
    {"name": "encoder", "kind": "categorical", "levels": ["x", "y"]}]})");
  LandscapeParams params;
  params.base_level = 0.4;
  const auto [cell, value] = true_optimum(params, space);
  CHECK(value == doctest::Approx(0.4));
  CHECK(cell.levels == std::vector<std::string>{"a", "x"});
}

TEST_CASE("single positive backbone effect wins") {
  const auto space = define_space(R"({"dimensions": [
    {"name": "backbone", "kind": "categorical", "levels": ["a", "b", "c"]},
    {"name": "encoder", "kind": "categorical", "levels": ["x", "y"]}]})");
  LandscapeParams params;
  params.base_level = 0.5;
  params.backbone_effects = {{"b", 0.2}};
  const auto [cell, value] = true_optimum(params, space);
  CHECK(cell.levels.front() == "b");
  CHECK(value == doctest::Approx(0.7));
}

TEST_CASE("enumeration limit is enforced") {
  const auto& space = ConfigurationSpace::default_space();
  const LandscapeParams params = calibrate_default(space, 1);
  CHECK_THROWS_AS(true_optimum(params, space, 1000), Error);
}

TEST_CASE("landscape parameters round-trip through JSON") {
  const auto& space = ConfigurationSpace::default_space();
  const LandscapeParams params = calibrate_default(space, 12);
  const LandscapeParams back = LandscapeParams::from_json_text(params.to_json_text());
  CHECK(back.base_level == params.base_level);
  CHECK(back.noise_sigma == params.noise_sigma);
  CHECK(back.backbone_effects == params.backbone_effects);
  CHECK(back.interaction_effects == params.interaction_effects);
  CHECK(back.failure_profile.size() == params.failure_profile.size());
  Rng rng(2);
  const Configuration config = sample_uniform(space, rng);
  CHECK(true_value(params, space, config) == true_value(back, space, config));
}

TEST_CASE("replay oracle returns recorded outcomes and flags misses") {
  const auto& space = ConfigurationSpace::default_space();
  Rng rng(77);
  std::vector<ExperimentRecord> records;
  for (int i = 0; i < 10; ++i) {
    ExperimentRecord r;
    r.id = i + 1;
    r.config = sample_uniform(space, rng);
    r.status = RecordStatus::completed;
    r.ap = 0.1 * (i + 1) / 11.0 + 0.3;
    r.start_tick = i;
    r.end_tick = i + 1;
    records.push_back(std::move(r));
  }
  ReplayOracle oracle(records, space);
  Rng erng(1);
  const EvalOutcome out = oracle.run(records[3].config, erng);
  CHECK(out.status == EvalStatus::completed);
  CHECK(out.ap == doctest::Approx(*records[3].ap));

  const Configuration unseen = sample_uniform(space, erng);
  CHECK_THROWS_WITH_AS(oracle.run(unseen, erng), doctest::Contains("config not in pool"),
                       PoolMissError);

  // Identity replay reproduces the recorded cumulative best.
  const BestSeries original = cumulative_best(records);
  std::vector<ExperimentRecord> replayed;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ExperimentRecord r = records[i];
    r.ap = oracle.run(records[i].config, erng).ap;
    replayed.push_back(std::move(r));
  }
  const BestSeries again = cumulative_best(replayed);
  REQUIRE(original.size() == again.size());
  for (std::size_t i = 0; i < original.size(); ++i)
    CHECK(original[i].ap_star == again[i].ap_star);
}

TEST_CASE("evaluation durations stay within the configured tick range") {
  const auto& space = ConfigurationSpace::default_space();
  const LandscapeParams params = calibrate_default(space, 9);
  Rng rng(3), erng(4);
  const Configuration config = sample_uniform(space, rng);
  for (int i = 0; i < 500; ++i) {
    const EvalOutcome out = evaluate(params, space, config, erng);
    CHECK(out.duration_ticks >= 3);
    CHECK(out.duration_ticks <= 10);
    if (out.status == EvalStatus::completed) {
      CHECK(out.ap >= 0.0);
      CHECK(out.ap <= 1.0);
    }
  }
}
