// Acceptance suite: one line per criterion, nonzero exit on any FAIL.
// Optional released-dataset checks run only when SEARCHLAB_DATASET and
// SEARCHLAB_DATASET_MAPPING are set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "searchlab/analysis.hpp"
#include "searchlab/log.hpp"
#include "searchlab/oracle.hpp"
#include "searchlab/orchestrator.hpp"
#include "searchlab/selftest.hpp"

using namespace searchlab;

namespace {

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

BestSeries synthetic_power_series(double a, double b, double c, int n, double noise_sd,
                                  Rng& rng, bool monotone_clip) {
  BestSeries series;
  double prev = -1e300;
  for (int i = 1; i <= n; ++i) {
    double v = a - b * std::pow(static_cast<double>(i), -c);
    if (noise_sd > 0.0) v += rng.normal(0.0, noise_sd);
    if (monotone_clip) v = std::max(prev, v);
    prev = v;
    series.push_back({i, v, i});
  }
  return series;
}

// ---- criterion 1: cardinality -------------------------------------------

Outcome criterion_cardinality() {
  const auto& space = ConfigurationSpace::default_space();
  const std::uint64_t product = discrete_cardinality(space);
  const auto cells = enumerate_cells(space, 200000);
  std::set<std::string> unique;
  for (const auto& cell : cells) unique.insert(cell.to_string());
  const bool pass = product == 108000 && cells.size() == 108000 && unique.size() == 108000;
  return {pass, false,
          "cardinality=" + std::to_string(product) +
              " enumerated=" + std::to_string(cells.size())};
}

// ---- criterion 2: fit recovery -------------------------------------------

Outcome criterion_fit_recovery() {
  int hits = 0;
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + static_cast<std::uint64_t>(seed));
    const auto series = synthetic_power_series(0.99, 0.3, 0.5, 500, 0.005, rng, true);
    const FitResult fit = fit_model(series, ModelKind::power);
    const double err = std::fabs(fit.c - 0.5);
    worst = std::max(worst, err);
    if (err <= 0.05) ++hits;
  }
  return {hits >= 90, false,
          "c within 0.05 in " + std::to_string(hits) + "/100, worst err " + fmt(worst)};
}

// ---- criterion 3: AIC model selection -------------------------------------

Outcome criterion_aic_selection() {
  int power_hits = 0, exp_hits = 0, log_hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto sp = synthetic_power_series(0.99, 0.3, 0.5, 300, 0.002, rng, false);
    if (select_model_aic(sp).front().model == ModelKind::power) ++power_hits;
    BestSeries se, sl;
    for (int i = 1; i <= 300; ++i) {
      se.push_back({i, 0.95 - 0.4 * std::exp(-0.02 * i) + rng.normal(0, 0.002), i});
      sl.push_back({i, 0.3 + 0.05 * std::log(i) + rng.normal(0, 0.002), i});
    }
    if (select_model_aic(se).front().model == ModelKind::exponential) ++exp_hits;
    if (select_model_aic(sl).front().model == ModelKind::logarithmic) ++log_hits;
  }
  const bool pass = power_hits >= 95 && exp_hits >= 95 && log_hits >= 95;
  return {pass, false,
          "power " + std::to_string(power_hits) + "/100, exponential " +
              std::to_string(exp_hits) + "/100, logarithmic " + std::to_string(log_hits) +
              "/100"};
}

// ---- criterion 4: permutation baseline vs exhaustive enumeration ----------

Outcome criterion_permutation_baseline() {
  const std::vector<double> values = {0.42, 0.58, 0.51};
  std::vector<ExperimentRecord> records;
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentRecord r;
    r.id = static_cast<std::int64_t>(i + 1);
    r.status = RecordStatus::completed;
    r.ap = values[i];
    r.end_tick = static_cast<std::int64_t>(i + 1);
    records.push_back(std::move(r));
  }

  // Independent exhaustive enumeration of all 6 orderings.
  std::vector<double> oracle_r2s;
  bool monotone = true;
  std::vector<std::size_t> idx = {0, 1, 2};
  do {
    BestSeries series;
    double best = -1e300;
    for (std::size_t i = 0; i < 3; ++i) {
      best = std::max(best, values[idx[i]]);
      series.push_back({static_cast<std::int64_t>(i + 1), best, 0});
    }
    for (std::size_t i = 1; i < series.size(); ++i)
      monotone = monotone && series[i].ap_star >= series[i - 1].ap_star;
    const FitResult fit = fit_model(series, ModelKind::power, 2);
    if (fit.r2_defined) oracle_r2s.push_back(fit.r2);
  } while (std::next_permutation(idx.begin(), idx.end()));

  const double oracle_mean = std::accumulate(oracle_r2s.begin(), oracle_r2s.end(), 0.0) /
                             static_cast<double>(oracle_r2s.size());
  double sq = 0.0;
  for (double r2 : oracle_r2s) sq += (r2 - oracle_mean) * (r2 - oracle_mean);
  const double oracle_sd = std::sqrt(sq / static_cast<double>(oracle_r2s.size() - 1));

  Rng rng(1);
  const PermutationR2 result = permutation_r2_baseline(records, 6, rng);
  const bool pass = monotone && result.exhaustive &&
                    result.n_permutations == static_cast<int>(oracle_r2s.size()) &&
                    std::fabs(result.mean_r2 - oracle_mean) < 1e-12 &&
                    std::fabs(result.sd_r2 - oracle_sd) < 1e-12;
  return {pass, false,
          "mean=" + fmt(result.mean_r2) + " (oracle " + fmt(oracle_mean) + "), sd=" +
              fmt(result.sd_r2) + " (oracle " + fmt(oracle_sd) + "), orderings=" +
              std::to_string(result.n_permutations)};
}

// ---- criterion 5: ANOVA oracle --------------------------------------------

Outcome criterion_anova_oracle() {
  std::vector<std::pair<std::string, double>> labeled = {
      {"g1", 1}, {"g1", 2}, {"g1", 3}, {"g2", 4}, {"g2", 5}, {"g2", 6}};
  Rng rng(1);
  const AnovaResult hand = anova_oneway_values(labeled, 1, 0, rng);
  bool pass = std::fabs(hand.f_stat - 13.5) < 1e-9 * 13.5 &&
              std::fabs(hand.eta_sq - 27.0 / 35.0) < 1e-9;

  // Partition identity on 1000 random datasets.
  Rng meta(77);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::pair<std::string, double>> data;
    const int groups = 2 + static_cast<int>(meta.below(6));
    for (int g = 0; g < groups; ++g) {
      const int n = 2 + static_cast<int>(meta.below(12));
      for (int i = 0; i < n; ++i)
        data.emplace_back("g" + std::to_string(g), meta.normal(0.05 * g, 0.03 + 0.01 * g));
    }
    Rng prng(static_cast<std::uint64_t>(trial));
    const AnovaResult res = anova_oneway_values(data, 1, 0, prng);
    const double rel =
        std::fabs(res.ss_between + res.ss_within - res.ss_total) / res.ss_total;
    worst_rel = std::max(worst_rel, rel);
    pass = pass && rel <= 1e-9;
  }
  return {pass, false,
          "F=" + fmt(hand.f_stat) + " eta2=" + fmt(hand.eta_sq) +
              ", worst |SSB+SSW-SST|/SST=" + fmt(worst_rel)};
}

// ---- criterion 6: landscape calibration ------------------------------------

Outcome criterion_calibration() {
  const auto& space = ConfigurationSpace::default_space();
  int in_band = 0;
  double lo = 1e9, hi = -1e9;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const LandscapeParams params = calibrate_default(space, seed);
    Rng rng = Rng::stream(seed, 0xCA11);
    std::vector<std::pair<std::string, double>> labeled;
    for (int i = 0; i < 5000; ++i) {
      const Configuration c = sample_uniform(space, rng);
      const EvalOutcome out = evaluate(params, space, c, rng);
      if (out.status == EvalStatus::completed)
        labeled.emplace_back(
            c.level(params.backbone_dimension) + "|" + c.level(params.encoder_dimension),
            out.ap);
    }
    Rng prng(seed);
    const AnovaResult res = anova_oneway_values(labeled, 1, 0, prng);
    lo = std::min(lo, res.eta_sq);
    hi = std::max(hi, res.eta_sq);
    if (res.eta_sq >= 0.75 && res.eta_sq <= 0.95) ++in_band;
  }
  return {in_band >= 95, false,
          "eta2 in [0.75, 0.95] for " + std::to_string(in_band) + "/100 seeds, range [" +
              fmt(lo) + ", " + fmt(hi) + "]"};
}

// ---- criterion 7: qualitative policy ordering ------------------------------

Outcome criterion_policy_ordering() {
  const auto& space = ConfigurationSpace::default_space();
  LandscapeParams params = calibrate_default(space, 11);
  params.noise_sigma = 0.01;
  const std::string dominant = dominant_backbone(params);

  // (i) An adaptive generating campaign records a 3,000-step pool;
  // pool-random replays of it converge faster (larger fitted c) because the
  // shuffle surfaces the curated tail early. The generating campaign explores
  // broadly for its first ~800 completions before TPE concentrates, so its
  // own improvements stretch across the horizon.
  CampaignConfig gen_cfg;
  gen_cfg.n_steps = 3000;
  gen_cfg.n_workers = 4;
  gen_cfg.seed = 2026;
  gen_cfg.dedup_threshold = 0.9;
  gen_cfg.heal_max_retries = 2;
  AgentSpec tpe_agent;
  tpe_agent.name = "tpe-1";
  tpe_agent.policy = PolicyKind::tpe;
  tpe_agent.ideas_per_cycle = 5;
  tpe_agent.tpe.min_history = 800;
  AgentSpec random_agent;
  random_agent.name = "rand-1";
  random_agent.policy = PolicyKind::random;
  random_agent.ideas_per_cycle = 5;
  gen_cfg.agents = {tpe_agent, random_agent};
  gen_cfg.diversity_budget = {{"backbone", 1}};

  SyntheticOracle gen_oracle(params, space);
  const History generating = run_campaign(space, gen_oracle, gen_cfg);
  const BestSeries gen_best = cumulative_best(generating.records);
  const FitResult gen_fit = fit_model(gen_best, ModelKind::power);

  std::vector<ExperimentRecord> pool;
  for (const auto& r : generating.records)
    if (r.status == RecordStatus::completed && r.ap) pool.push_back(r);

  double replay_c_sum = 0.0;
  int replays = 0;
  for (int s = 0; s < 20; ++s) {
    CampaignConfig replay_cfg;
    replay_cfg.n_steps = static_cast<std::int64_t>(pool.size());
    replay_cfg.n_workers = 1;
    replay_cfg.seed = 9000 + static_cast<std::uint64_t>(s);
    replay_cfg.dedup_threshold = 1.0;
    replay_cfg.heal_max_retries = 0;
    AgentSpec pooler;
    pooler.name = "pool";
    pooler.policy = PolicyKind::pool_random;
    pooler.ideas_per_cycle = 16;
    replay_cfg.agents = {pooler};
    ReplayOracle oracle(pool, space);
    const History replayed = run_campaign(space, oracle, replay_cfg, &pool);
    const FitResult fit = fit_model(cumulative_best(replayed.records), ModelKind::power);
    replay_c_sum += fit.c;
    ++replays;
  }
  const double replay_c_mean = replay_c_sum / replays;
  const bool part_i = replay_c_mean > gen_fit.c;

  // (ii) TPE concentrates on the dominant backbone's cells (>= 50% of a
  // trailing 20-experiment window) in fewer median experiments than
  // generative random search; runs without a dominant-backbone takeover are
  // censored at the campaign length.
  auto first_concentration = [&](PolicyKind kind, std::uint64_t seed) {
    CampaignConfig cfg;
    cfg.n_steps = 150;
    cfg.n_workers = 1;
    cfg.seed = seed;
    cfg.dedup_threshold = 0.9;
    AgentSpec agent;
    agent.name = "agent";
    agent.policy = kind;
    agent.ideas_per_cycle = 4;
    cfg.agents = {agent};
    LandscapeParams quiet = params;
    quiet.noise_sigma = 0.02;
    quiet.failure_profile.clear();
    SyntheticOracle oracle(quiet, space);
    const History history = run_campaign(space, oracle, cfg);
    std::vector<int> in_dominant;
    for (const auto* r : completion_order(history.records))
      if (r->status == RecordStatus::completed)
        in_dominant.push_back(r->config.has("backbone") &&
                              r->config.level("backbone") == dominant);
    const int window = 20;
    for (int t = window; t <= static_cast<int>(in_dominant.size()); ++t) {
      int count = 0;
      for (int i = t - window; i < t; ++i) count += in_dominant[static_cast<std::size_t>(i)];
      if (2 * count >= window) return t;
    }
    return static_cast<int>(in_dominant.size()) + 1;  // censored
  };
  std::vector<int> tpe_first, random_first;
  for (std::uint64_t s = 0; s < 20; ++s) {
    tpe_first.push_back(first_concentration(PolicyKind::tpe, 100 + s));
    random_first.push_back(first_concentration(PolicyKind::random, 200 + s));
  }
  std::sort(tpe_first.begin(), tpe_first.end());
  std::sort(random_first.begin(), random_first.end());
  const int tpe_median = tpe_first[10];
  const int random_median = random_first[10];
  const bool part_ii = tpe_median < random_median;

  // (iii) The oracle policy attains the pool maximum at step 1.
  double pool_max = 0.0;
  for (const auto& r : pool) pool_max = std::max(pool_max, *r.ap);
  CampaignConfig oracle_cfg;
  oracle_cfg.n_steps = 50;
  oracle_cfg.n_workers = 1;
  oracle_cfg.seed = 1;
  oracle_cfg.dedup_threshold = 1.0;
  AgentSpec oracle_agent;
  oracle_agent.name = "oracle";
  oracle_agent.policy = PolicyKind::pool_oracle;
  oracle_agent.ideas_per_cycle = 8;
  oracle_cfg.agents = {oracle_agent};
  ReplayOracle replay_oracle(pool, space);
  const History oracle_history = run_campaign(space, replay_oracle, oracle_cfg, &pool);
  const BestSeries oracle_best = cumulative_best(oracle_history.records);
  const bool part_iii =
      !oracle_best.empty() && std::fabs(oracle_best.front().ap_star - pool_max) < 1e-12 &&
      std::fabs(oracle_best.back().ap_star - pool_max) < 1e-12;

  const bool pass = part_i && part_ii && part_iii;
  return {pass, false,
          "replay mean c=" + fmt(replay_c_mean) + " vs generating c=" + fmt(gen_fit.c) +
              "; tpe median=" + std::to_string(tpe_median) +
              " vs random median=" + std::to_string(random_median) +
              "; oracle step-1 best=" + fmt(oracle_best.empty() ? 0.0 : oracle_best.front().ap_star)};
}

// ---- criterion 8: dynamics identities ---------------------------------------

Outcome criterion_dynamics_identities() {
  const auto space = define_space(R"({"dimensions": [
    {"name": "row", "kind": "categorical", "subspace": "arch",
     "levels": ["r1", "r2", "r3", "r4"]},
    {"name": "col", "kind": "categorical", "subspace": "train",
     "levels": ["c1", "c2", "c3", "c4"]}]})");
  auto cell_record = [](std::int64_t id, const std::string& row, const std::string& col,
                        const std::string& agent) {
    ExperimentRecord r;
    r.id = id;
    r.agent = agent;
    r.config.set("row", row);
    r.config.set("col", col);
    r.status = RecordStatus::completed;
    r.ap = 0.5;
    r.end_tick = id;
    return r;
  };

  // Entropy: exactly log K on a balanced uniform stream, 0 on a constant one.
  std::vector<ExperimentRecord> uniform, constant;
  std::int64_t id = 0;
  for (int rep = 0; rep < 4; ++rep)
    for (const auto& row : space.at("row").levels)
      for (const auto& col : space.at("col").levels)
        uniform.push_back(cell_record(++id, row, col, "a"));
  for (int i = 0; i < 64; ++i) constant.push_back(cell_record(i + 1, "r1", "c1", "a"));
  const double log_k = std::log(16.0);
  const EntropyResult ent_uniform =
      entropy_series(uniform, space, Projection::total, EntropyMode::cumulative, 0);
  const EntropyResult ent_constant =
      entropy_series(constant, space, Projection::total, EntropyMode::cumulative, 0);
  bool pass = std::fabs(ent_uniform.series.points.back().value - log_k) < 1e-12 &&
              std::fabs(ent_constant.series.points.back().value) < 1e-12;

  // JSD: 0 on identical windows, log 2 on disjoint supports.
  std::map<std::string, double> p = {{"x", 0.25}, {"y", 0.75}};
  std::map<std::string, double> q = {{"u", 0.5}, {"v", 0.5}};
  pass = pass && std::fabs(jsd(p, p)) < 1e-15 &&
         std::fabs(jsd(p, q) - std::log(2.0)) < 1e-12;

  // Innovation: windowed estimates around t = 10 and t = 100 track 1/t
  // within 10% over 1000 iid streams.
  Rng rng(2);
  const int streams = 1000, horizon = 130;
  std::map<int, std::pair<double, double>> windows = {{10, {0.0, 0.0}}, {100, {0.0, 0.0}}};
  for (int s = 0; s < streams; ++s) {
    double best = -1.0;
    for (int t = 1; t <= horizon; ++t) {
      const double y = rng.uniform();
      const int innovation = y > best ? 1 : 0;
      best = std::max(best, y);
      for (auto& [center, acc] : windows) {
        if (t >= static_cast<int>(center * 0.7) && t <= static_cast<int>(center * 1.3)) {
          acc.first += innovation;
          acc.second += 1.0;
        }
      }
    }
  }
  std::string innovation_detail;
  for (const auto& [center, acc] : windows) {
    const double observed = acc.first / acc.second;
    double expected = 0.0;
    int terms = 0;
    for (int t = static_cast<int>(center * 0.7); t <= static_cast<int>(center * 1.3); ++t) {
      expected += 1.0 / t;
      ++terms;
    }
    expected /= terms;
    pass = pass && std::fabs(observed - expected) <= 0.1 * expected;
    innovation_detail += " t~" + std::to_string(center) + ": " + fmt(observed) + " vs " +
                         fmt(expected);
  }
  return {pass, false,
          "entropy/jsd identities exact; innovation" + innovation_detail};
}

// ---- criterion 9: orchestration invariants ----------------------------------

Outcome criterion_orchestration() {
  const auto& space = ConfigurationSpace::default_space();
  Rng meta(0xFEED);
  bool pass = true;
  std::string why;

  auto note = [&](bool ok, const std::string& what) {
    if (!ok && why.empty()) why = what;
    pass = pass && ok;
  };

  for (int trial = 0; trial < 50; ++trial) {
    CampaignConfig cfg;
    cfg.n_steps = 15 + static_cast<std::int64_t>(meta.below(25));
    cfg.n_workers = 1 + static_cast<int>(meta.below(4));
    cfg.seed = meta.next_u64();
    cfg.dedup_threshold = 0.9;
    cfg.heal_max_retries = static_cast<int>(meta.below(3));
    AgentSpec rnd;
    rnd.name = "rand";
    rnd.policy = PolicyKind::random;
    rnd.ideas_per_cycle = 3;
    AgentSpec tpe;
    tpe.name = "tpe";
    tpe.policy = PolicyKind::tpe;
    tpe.ideas_per_cycle = 2;
    AgentSpec sweep;
    sweep.name = "sweep";
    sweep.policy = PolicyKind::sweep;
    sweep.ideas_per_cycle = 2;
    cfg.agents = {rnd, tpe, sweep};
    if (meta.below(2)) cfg.diversity_budget = {{"backbone", 1}};

    SyntheticOracle oracle(calibrate_default(space, meta.next_u64()), space);
    const History history = run_campaign(space, oracle, cfg);

    // No duplicate executed fingerprints outside self-heal lineages.
    std::map<std::string, int> fp_heal_free;
    for (const auto& r : history.records) {
      if (r.status == RecordStatus::abandoned || r.heal_attempts > 0) continue;
      note(++fp_heal_free[fingerprint(space, r.config).key()] == 1,
           "duplicate executed fingerprint");
    }

    // Concurrency never exceeds the worker pool.
    std::vector<std::pair<std::int64_t, int>> events;
    for (const auto& r : history.records) {
      if (r.status == RecordStatus::abandoned) continue;
      events.emplace_back(r.start_tick, +1);
      events.emplace_back(r.end_tick, -1);
    }
    std::sort(events.begin(), events.end());
    int running = 0;
    for (const auto& [tick, delta] : events) {
      running += delta;
      note(running <= cfg.n_workers, "concurrency exceeded n_workers");
    }
    note(history.completed_count() == cfg.n_steps, "campaign missed its step target");
  }

  // Byte-identity is checked explicitly on dedicated seeds.
  for (std::uint64_t seed : {1001u, 1002u, 1003u}) {
    CampaignConfig cfg;
    cfg.n_steps = 40;
    cfg.n_workers = 1;
    cfg.seed = seed;
    AgentSpec rnd;
    rnd.name = "rand";
    rnd.policy = PolicyKind::random;
    rnd.ideas_per_cycle = 4;
    cfg.agents = {rnd};
    SyntheticOracle o1(calibrate_default(space, seed), space);
    SyntheticOracle o2(calibrate_default(space, seed), space);
    const std::string a = serialize_log(run_campaign(space, o1, cfg), space, cfg);
    const std::string b = serialize_log(run_campaign(space, o2, cfg), space, cfg);
    note(a == b, "seeded single-worker rerun not byte-identical");
  }

  // OOM healing halves the batch and abandons at the floor.
  {
    LandscapeParams params = calibrate_default(space, 9);
    params.failure_profile = {{FailureCategory::oom, 1.0}};
    SyntheticOracle oracle(params, space);
    CampaignConfig cfg;
    cfg.n_steps = 5;
    cfg.n_workers = 1;
    cfg.seed = 77;
    cfg.heal_max_retries = 10;
    cfg.max_executed = 40;
    AgentSpec rnd;
    rnd.name = "rand";
    rnd.policy = PolicyKind::random;
    rnd.ideas_per_cycle = 1;
    cfg.agents = {rnd};
    const History history = run_campaign(space, oracle, cfg);
    std::map<std::int64_t, const ExperimentRecord*> by_id;
    for (const auto& r : history.records) by_id[r.id] = &r;
    bool saw_chain = false, saw_floor = false;
    for (const auto& r : history.records) {
      if (r.heal_attempts > 0 && r.parent_id && by_id.count(*r.parent_id)) {
        const auto* parent = by_id[*r.parent_id];
        const double child = std::stod(r.config.level("batch_size"));
        const double from = std::stod(parent->config.level("batch_size"));
        note(std::fabs(child - from / 2.0) < 1e-9, "oom heal did not halve the batch");
        saw_chain = true;
      }
      if (r.status == RecordStatus::failed && r.config.level("batch_size") == "16")
        saw_floor = true;
    }
    note(saw_chain, "no oom heal chain observed");
    note(saw_floor, "no floor abandonment observed");
  }

  return {pass, false, pass ? "50 campaigns + reruns + oom chains ok" : why};
}

// ---- criterion 10: encoder math ---------------------------------------------

Outcome criterion_encoders() {
  const auto results = run_encoder_selftest();
  int passed = 0;
  std::string first_fail;
  for (const auto& r : results) {
    if (r.pass)
      ++passed;
    else if (first_fail.empty())
      first_fail = r.name;
  }
  const bool pass = passed == static_cast<int>(results.size());
  return {pass, false,
          std::to_string(passed) + "/" + std::to_string(results.size()) +
              " property checks" + (pass ? "" : ", first failure: " + first_fail)};
}

// ---- criterion 11: released-dataset checks (optional) -----------------------

Outcome criterion_released_dataset() {
  const char* dataset = std::getenv("SEARCHLAB_DATASET");
  const char* mapping = std::getenv("SEARCHLAB_DATASET_MAPPING");
  if (!dataset || !mapping)
    return {true, true, "requires SEARCHLAB_DATASET and SEARCHLAB_DATASET_MAPPING"};

  const auto& space = ConfigurationSpace::default_space();
  std::ifstream mf(mapping);
  if (!mf) return {false, false, "cannot open mapping spec"};
  std::stringstream mapping_text;
  mapping_text << mf.rdbuf();
  const IngestResult ingest = ingest_external(dataset, mapping_text.str(), space);
  const auto& records = ingest.log.records;

  std::vector<std::string> checks;
  bool pass = true;
  auto expect = [&](const std::string& name, double value, double target, double tol) {
    const bool ok = std::fabs(value - target) <= tol;
    pass = pass && ok;
    checks.push_back(name + "=" + fmt(value) + (ok ? "" : "(!)"));
  };

  // Post-bugfix subset: tail of the completion order, bounded by an optional
  // start index in the mapping-adjacent env var.
  std::vector<ExperimentRecord> post;
  {
    std::int64_t start = 0;
    if (const char* s = std::getenv("SEARCHLAB_DATASET_POST_START")) start = std::atoll(s);
    for (const auto* r : completion_order(records))
      if (r->id >= start) post.push_back(*r);
  }
  const BestSeries best = cumulative_best(post);
  if (best.size() >= 5) {
    const FitResult fit = fit_model(best, ModelKind::power);
    expect("c", fit.c, 0.11, 0.02);
    pass = pass && fit.r2 >= 0.90;
    checks.push_back("r2=" + fmt(fit.r2));
  }
  Rng rng(1);
  try {
    const AnovaResult oneway =
        anova_oneway(post, space, {"backbone", "encoder"}, 10, 200, rng);
    expect("eta2", oneway.eta_sq, 0.94, 0.01);
    const AnovaResult balanced =
        anova_balanced(post, space, {"backbone", "encoder"}, 10, 1, 200);
    expect("balanced_eta2", balanced.eta_sq, 0.50, 0.05);
  } catch (const AnalysisError& e) {
    pass = false;
    checks.push_back(std::string("anova: ") + e.what());
  }
  try {
    const Enrichment enrich = enrichment_ratio(
        records, [](const ExperimentRecord& r) { return r.source == Source::sweep; }, 100);
    expect("enrichment", enrich.ratio, 1.7, 0.1);
  } catch (const AnalysisError& e) {
    pass = false;
    checks.push_back(std::string("enrichment: ") + e.what());
  }
  {
    std::vector<std::pair<double, double>> pairs;
    for (const auto& r : records)
      if (r.ap && r.extra.count("test_ap")) {
        try {
          pairs.emplace_back(*r.ap, std::stod(r.extra.at("test_ap")));
        } catch (...) {
        }
      }
    if (pairs.size() >= 3) {
      const RankCorrelation rho = rank_correlation(pairs);
      expect("spearman", rho.rho, 0.7059, 0.005);
    }
  }
  {
    const DynamicsSeries innovation = innovation_series(records, 100);
    const InnovationDecay decay = fit_innovation_decay(innovation);
    if (decay.defined) expect("alpha", decay.alpha, 0.34, 0.05);
  }
  std::string detail;
  for (const auto& c : checks) detail += (detail.empty() ? "" : ", ") + c;
  return {pass, false, detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"cardinality-enumeration", 1.0, criterion_cardinality},
      {"fit-recovery", 10.0, criterion_fit_recovery},
      {"aic-model-selection", 30.0, criterion_aic_selection},
      {"permutation-baseline", 10.0, criterion_permutation_baseline},
      {"anova-oracle", 10.0, criterion_anova_oracle},
      {"landscape-calibration", 120.0, criterion_calibration},
      {"policy-ordering", 300.0, criterion_policy_ordering},
      {"dynamics-identities", 30.0, criterion_dynamics_identities},
      {"orchestration-invariants", 120.0, criterion_orchestration},
      {"encoder-math", 10.0, criterion_encoders},
      {"released-dataset-checks", 600.0, criterion_released_dataset},
  };

  int failures = 0, skips = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const double t0 = now_seconds();
    Outcome outcome;
    try {
      outcome = criteria[i].run();
    } catch (const std::exception& e) {
      outcome = {false, false, std::string("exception: ") + e.what()};
    }
    const double elapsed = now_seconds() - t0;
    const bool in_budget = elapsed <= criteria[i].budget_seconds;
    const char* verdict = outcome.skipped ? "SKIP" : (outcome.pass && in_budget ? "PASS" : "FAIL");
    if (outcome.skipped)
      ++skips;
    else if (!(outcome.pass && in_budget))
      ++failures;
    std::printf("[%2zu] %-26s %-4s (%.1fs)  %s%s\n", i + 1, criteria[i].name, verdict,
                elapsed, outcome.detail.c_str(),
                outcome.pass && !in_budget ? "  [over time budget]" : "");
    std::fflush(stdout);
  }
  std::printf("RESULT: %zu passed, %d failed, %d skipped\n",
              criteria.size() - static_cast<std::size_t>(failures) - static_cast<std::size_t>(skips),
              failures, skips);
  return failures == 0 ? 0 : 1;
}
