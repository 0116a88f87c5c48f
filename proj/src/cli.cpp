#include "searchlab/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "searchlab/analysis.hpp"
#include "searchlab/log.hpp"
#include "searchlab/oracle.hpp"
#include "searchlab/orchestrator.hpp"
#include "searchlab/report.hpp"
#include "searchlab/selftest.hpp"
#include "searchlab/space.hpp"

namespace searchlab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

ConfigurationSpace load_space(const std::string& path) {
  if (path.empty()) return ConfigurationSpace::default_space();
  return ConfigurationSpace::from_file(path);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string current;
  for (char c : s) {
    if (c == sep) {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

void print_breadcrumb(std::uint64_t seed, std::uint64_t config_hash) {
  std::cout << "# seed=" << seed << " config-hash=" << config_hash << "\n";
}

struct LoadedLog {
  CampaignLog log;
  ConfigurationSpace space;
};

LoadedLog load_log_and_space(const std::string& log_path, const std::string& space_path) {
  LoadedLog out;
  out.space = load_space(space_path);
  out.log = read_log(log_path, out.space.schema_hash());
  for (const auto& warning : out.log.warnings) std::cerr << "warning: " << warning << "\n";
  print_breadcrumb(out.log.header.seed, out.log.header.config_hash);
  return out;
}

RecordPredicate parse_predicate(const std::string& text, const ConfigurationSpace& space) {
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw UsageError("predicate must be field=value, e.g. source=sweep");
  const std::string field = text.substr(0, eq);
  const std::string value = text.substr(eq + 1);
  if (field == "source") {
    auto source = source_from(value);
    if (!source) throw UsageError("unknown source '" + value + "'");
    return [s = *source](const ExperimentRecord& r) { return r.source == s; };
  }
  if (field == "agent")
    return [value](const ExperimentRecord& r) { return r.agent == value; };
  if (space.find(field))
    return [field, value](const ExperimentRecord& r) {
      return r.config.has(field) &&
             std::holds_alternative<std::string>(r.config.assignments.at(field)) &&
             r.config.level(field) == value;
    };
  throw UsageError("unknown predicate field '" + field + "'");
}

int cmd_space_show(const std::string& space_path) {
  const ConfigurationSpace space = load_space(space_path);
  print_breadcrumb(0, space.schema_hash());
  std::cout << "dimensions: " << space.dimensions().size() << "\n";
  for (const auto& d : space.dimensions()) {
    std::cout << "  " << d.name << " [" << to_string(d.subspace) << "] ";
    if (d.kind == DimKind::categorical) {
      std::cout << "categorical {";
      for (std::size_t i = 0; i < d.levels.size(); ++i)
        std::cout << (i ? ", " : "") << d.levels[i];
      std::cout << "}";
    } else {
      std::cout << "continuous [" << fmt(d.low) << ", " << fmt(d.high) << "] "
                << to_string(d.scale);
    }
    if (auto g = space.guard(d.name))
      std::cout << " (active when " << g->first << "=" << g->second << ")";
    std::cout << "\n";
  }
  std::cout << "discrete cells: " << discrete_cardinality(space) << "\n";
  std::cout << "conditional rules: " << space.conditional_rules().size() << "\n";
  return 0;
}

CampaignConfig build_campaign_config(const std::string& config_path,
                                     const std::string& policy_list, std::int64_t steps,
                                     int workers, std::uint64_t seed, double dedup_threshold,
                                     int heal_retries, const std::string& diversity,
                                     int ideas_per_cycle) {
  CampaignConfig cfg;
  if (!config_path.empty()) cfg = CampaignConfig::from_file(config_path);
  if (steps >= 0) cfg.n_steps = steps;
  if (workers > 0) cfg.n_workers = workers;
  cfg.seed = seed;
  if (dedup_threshold >= 0.0) cfg.dedup_threshold = dedup_threshold;
  if (heal_retries >= 0) cfg.heal_max_retries = heal_retries;
  if (!policy_list.empty()) {
    cfg.agents.clear();
    int index = 0;
    for (const auto& name : split_list(policy_list)) {
      auto kind = policy_kind_from(name);
      if (!kind) throw UsageError("unknown policy '" + name + "'");
      AgentSpec agent;
      agent.name = name + "-" + std::to_string(++index);
      agent.policy = *kind;
      agent.ideas_per_cycle = ideas_per_cycle;
      cfg.agents.push_back(std::move(agent));
    }
  }
  if (!diversity.empty()) {
    cfg.diversity_budget.clear();
    for (const auto& rule_text : split_list(diversity)) {
      const auto colon = rule_text.find(':');
      DiversityRule rule;
      rule.dimension = colon == std::string::npos ? rule_text : rule_text.substr(0, colon);
      if (colon != std::string::npos)
        rule.min_non_modal = std::stoi(rule_text.substr(colon + 1));
      cfg.diversity_budget.push_back(std::move(rule));
    }
  }
  if (cfg.agents.empty() && cfg.n_steps > 0) {
    AgentSpec agent;
    agent.name = "random-1";
    agent.policy = PolicyKind::random;
    agent.ideas_per_cycle = ideas_per_cycle;
    cfg.agents.push_back(std::move(agent));
  }
  return cfg;
}

int cmd_campaign_run(const std::string& space_path, const std::string& oracle_kind,
                     const std::string& replay_in, const std::string& policy_list,
                     std::int64_t steps, int workers, std::uint64_t seed,
                     const std::string& out_path, const std::string& config_path,
                     double dedup_threshold, int heal_retries, const std::string& diversity,
                     int ideas_per_cycle, const std::string& landscape_path,
                     const std::string& save_landscape, std::uint64_t landscape_seed,
                     double noise_sigma, double failure_rate) {
  const ConfigurationSpace space = load_space(space_path);
  CampaignConfig cfg =
      build_campaign_config(config_path, policy_list, steps, workers, seed, dedup_threshold,
                            heal_retries, diversity, ideas_per_cycle);
  print_breadcrumb(cfg.seed, cfg.config_hash());

  History history;
  std::vector<ExperimentRecord> pool;
  if (oracle_kind == "replay") {
    if (replay_in.empty()) throw UsageError("--oracle replay requires --replay-in LOG");
    CampaignLog source = read_log(replay_in, space.schema_hash());
    pool = std::move(source.records);
    ReplayOracle oracle(pool, space);
    history = run_campaign(space, oracle, cfg, &pool);
  } else if (oracle_kind == "synthetic") {
    LandscapeParams params = landscape_path.empty()
                                 ? calibrate_default(space, landscape_seed)
                                 : LandscapeParams::from_file(landscape_path);
    if (noise_sigma >= 0.0) params.noise_sigma = noise_sigma;
    if (failure_rate >= 0.0)
      params.failure_profile = {{FailureCategory::nan_loss, failure_rate},
                                {FailureCategory::oom, failure_rate},
                                {FailureCategory::missing_file, failure_rate}};
    if (!save_landscape.empty()) params.save(save_landscape);
    SyntheticOracle oracle(std::move(params), space);
    history = run_campaign(space, oracle, cfg, nullptr);
  } else {
    throw UsageError("unknown oracle '" + oracle_kind + "' (synthetic|replay)");
  }

  if (!out_path.empty()) write_log(history, space, cfg, out_path);
  std::int64_t completed = history.completed_count();
  std::cout << "records=" << history.records.size() << " completed=" << completed;
  const BestSeries best = cumulative_best(history.records);
  if (!best.empty()) std::cout << " best_ap=" << fmt(best.back().ap_star);
  if (history.truncated) std::cout << " truncated=" << history.truncation_reason;
  std::cout << "\n";
  // Execution-rate report from the per-cycle accounting.
  std::int64_t generated = 0, rejected = 0, replaced = 0;
  for (const auto& stats : history.cycles) {
    generated += stats.generated;
    rejected += stats.rejected_dedup;
    replaced += stats.replaced_diversity;
  }
  std::int64_t executed = 0, heal_reruns = 0;
  for (const auto& r : history.records) {
    if (r.status == RecordStatus::abandoned) continue;
    if (r.heal_attempts > 0)
      ++heal_reruns;  // re-executions of accepted work, not fresh proposals
    else
      ++executed;
  }
  if (generated > 0)
    std::cout << "generated=" << generated << " executed=" << executed
              << " heal_reruns=" << heal_reruns << " rejected_dedup=" << rejected
              << " replaced_diversity=" << replaced << " execution_rate="
              << fmt(static_cast<double>(executed) / static_cast<double>(generated))
              << "\n";
  std::size_t note_count = 0;
  for (const auto& stats : history.cycles) note_count += stats.notes.size();
  if (note_count > 0) {
    std::cout << "policy notes: " << note_count << " (first: ";
    for (const auto& stats : history.cycles)
      if (!stats.notes.empty()) {
        std::cout << stats.notes.front();
        break;
      }
    std::cout << ")\n";
  }
  return 0;
}

int cmd_campaign_replay(const std::string& in_path, const std::string& space_path,
                        const std::string& policy, int permutations, std::uint64_t seed,
                        std::int64_t steps, const std::string& out_path) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  std::vector<ExperimentRecord> pool;
  for (auto& r : loaded.log.records)
    if (r.status == RecordStatus::completed && r.ap) pool.push_back(std::move(r));
  if (pool.size() < 2) throw AnalysisError("replay needs at least 2 completed records");

  auto kind = policy_kind_from(policy);
  if (!kind || (*kind != PolicyKind::pool_random && *kind != PolicyKind::pool_tpe &&
                *kind != PolicyKind::pool_oracle))
    throw UsageError("replay policy must be pool-random, pool-tpe, or pool-oracle");

  const std::int64_t n_steps = steps > 0 ? steps : static_cast<std::int64_t>(pool.size());
  std::cout << "policy=" << policy << " pool=" << pool.size() << " steps=" << n_steps
            << " permutations=" << permutations << "\n";
  std::vector<double> cs, r2s;
  for (int p = 0; p < std::max(1, permutations); ++p) {
    CampaignConfig cfg;
    cfg.n_steps = n_steps;
    cfg.n_workers = 1;
    cfg.dedup_threshold = 1.0;  // pool entries replay verbatim
    cfg.seed = seed + static_cast<std::uint64_t>(p);
    cfg.heal_max_retries = 0;
    AgentSpec agent;
    agent.name = policy;
    agent.policy = *kind;
    agent.ideas_per_cycle = 8;
    cfg.agents.push_back(agent);

    ReplayOracle oracle(pool, loaded.space);
    const History history = run_campaign(loaded.space, oracle, cfg, &pool);
    const BestSeries best = cumulative_best(history.records);
    if (best.size() >= 5) {
      const FitResult fit = fit_model(best, ModelKind::power);
      cs.push_back(fit.c);
      if (fit.r2_defined) r2s.push_back(fit.r2);
      std::cout << "replay " << p << ": completed=" << best.size()
                << " best_ap=" << fmt(best.back().ap_star) << " c=" << fmt(fit.c)
                << " r2=" << (fit.r2_defined ? fmt(fit.r2) : "undefined") << "\n";
    }
    if (p == 0 && !out_path.empty()) write_log(history, loaded.space, cfg, out_path);
  }
  if (!cs.empty()) {
    double mean_c = 0.0;
    for (double c : cs) mean_c += c;
    mean_c /= static_cast<double>(cs.size());
    double mean_r2 = 0.0;
    for (double r2 : r2s) mean_r2 += r2;
    if (!r2s.empty()) mean_r2 /= static_cast<double>(r2s.size());
    std::cout << "mean_c=" << fmt(mean_c) << " mean_r2=" << fmt(mean_r2) << "\n";
  }
  return 0;
}

int cmd_analyze_convergence(const std::string& in_path, const std::string& space_path,
                            const std::string& model) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  const BestSeries best = cumulative_best(loaded.log.records);
  if (model == "all") {
    const auto fits = select_model_aic(best);
    std::cout << "model\ta\tb\tc\tr2\taic\n";
    for (const auto& f : fits)
      std::cout << to_string(f.model) << "\t" << fmt(f.a) << "\t" << fmt(f.b) << "\t"
                << fmt(f.c) << "\t" << (f.r2_defined ? fmt(f.r2) : "undefined") << "\t"
                << fmt(f.aic) << "\n";
    std::cout << "selected=" << to_string(fits.front().model) << "\n";
  } else {
    ModelKind kind;
    if (model == "power")
      kind = ModelKind::power;
    else if (model == "exponential")
      kind = ModelKind::exponential;
    else if (model == "logarithmic")
      kind = ModelKind::logarithmic;
    else
      throw UsageError("unknown model '" + model + "'");
    const FitResult f = fit_model(best, kind);
    std::cout << "model=" << to_string(f.model) << " a=" << fmt(f.a) << " b=" << fmt(f.b)
              << " c=" << fmt(f.c) << " r2=" << (f.r2_defined ? fmt(f.r2) : "undefined")
              << " aic=" << fmt(f.aic) << " converged=" << (f.converged ? "yes" : "no")
              << "\n";
  }
  return 0;
}

int cmd_analyze_dynamics(const std::string& in_path, const std::string& space_path,
                         int window, const std::string& projection_name,
                         const std::string& agent_a, const std::string& agent_b,
                         const std::string& chi2_key, int n_perm, std::uint64_t seed) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  Projection projection = Projection::total;
  if (projection_name == "arch") projection = Projection::arch;
  else if (projection_name == "train") projection = Projection::train;
  else if (projection_name != "total") throw UsageError("projection must be total|arch|train");

  std::vector<ExperimentRecord> executed;
  for (const auto& r : loaded.log.records)
    if (r.status == RecordStatus::completed || r.status == RecordStatus::failed)
      executed.push_back(r);

  const EntropyResult cumulative = entropy_series(executed, loaded.space, projection,
                                                  EntropyMode::cumulative, window);
  if (!cumulative.series.points.empty())
    std::cout << "entropy[" << to_string(projection)
              << "] final=" << fmt(cumulative.series.points.back().value)
              << " logK=" << fmt(cumulative.log_cell_count) << " logfit_k="
              << fmt(cumulative.k_slope) << " logfit_r2=" << fmt(cumulative.fit_r2) << "\n";

  std::string a = agent_a, b = agent_b;
  if (a.empty() || b.empty()) {
    std::map<std::string, int> counts;
    for (const auto& r : executed)
      if (!r.agent.empty() && r.agent != "unattributed" && r.agent != "system")
        counts[r.agent] += 1;
    std::vector<std::pair<std::string, int>> ordered(counts.begin(), counts.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    if (ordered.size() >= 2) {
      a = ordered[0].first;
      b = ordered[1].first;
    }
  }
  if (!a.empty() && !b.empty()) {
    const DynamicsSeries series = jsd_series(executed, loaded.space, a, b, projection, window);
    double last = 0.0, peak = 0.0;
    bool any = false;
    for (const auto& p : series.points) {
      if (!p.defined) continue;
      last = p.value;
      peak = std::max(peak, p.value);
      any = true;
    }
    if (any)
      std::cout << "jsd agents=" << a << "," << b << " window=" << window
                << " peak=" << fmt(peak) << " final=" << fmt(last) << "\n";
  }

  const DynamicsSeries innovation = innovation_series(loaded.log.records, window);
  const InnovationDecay decay = fit_innovation_decay(innovation);
  if (decay.defined)
    std::cout << "innovation window=" << window << " alpha=" << fmt(decay.alpha)
              << " r2=" << fmt(decay.r2) << " bins=" << decay.n_bins << "\n";

  if (!chi2_key.empty()) {
    std::vector<std::string> subset, population;
    for (const auto& r : loaded.log.records) {
      if (r.status != RecordStatus::completed || !r.config.has(chi2_key)) continue;
      population.push_back(r.config.level(chi2_key));
      if (r.agent != "unattributed" && !r.agent.empty())
        subset.push_back(r.config.level(chi2_key));
    }
    Rng rng(seed);
    const Chi2Result chi2 = chi2_representativeness(subset, population, n_perm, rng);
    std::cout << "chi2[" << chi2_key << "] chi2=" << fmt(chi2.chi2) << " df=" << chi2.df
              << " cramers_v=" << fmt(chi2.cramers_v) << " p=" << fmt(chi2.p_perm) << "\n";
  }
  return 0;
}

int cmd_analyze_anova(const std::string& in_path, const std::string& space_path,
                      const std::string& group_dims_text, std::int64_t min_n, int n_perm,
                      std::int64_t balanced_n, const std::string& two_way,
                      std::uint64_t seed) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  Rng rng(seed);
  if (!two_way.empty()) {
    const auto dims = split_list(two_way);
    if (dims.size() != 2) throw UsageError("--two-way needs exactly two dimensions");
    const TwoWayResult result =
        anova_twoway(loaded.log.records, loaded.space, dims[0], dims[1], n_perm, rng);
    std::cout << "term\tss\teta_sq\tF\tp_perm\tdf\n";
    for (const auto* term : {&result.factor_a, &result.factor_b, &result.interaction})
      std::cout << term->name << "\t" << fmt(term->ss) << "\t" << fmt(term->eta_sq) << "\t"
                << fmt(term->f) << "\t" << fmt(term->p_perm) << "\t" << term->df << "\n";
    std::cout << "residual_ss=" << fmt(result.ss_residual) << " df=" << result.df_residual
              << (result.confounded ? " (confounded design)" : "") << "\n";
    std::cout << "# sequential (type-I) sums of squares in declared factor order\n";
    return 0;
  }
  const auto dims = split_list(group_dims_text);
  if (dims.empty()) throw UsageError("--group-dims required, e.g. backbone,encoder");
  const AnovaResult result =
      balanced_n > 0
          ? anova_balanced(loaded.log.records, loaded.space, dims, balanced_n, seed, n_perm)
          : anova_oneway(loaded.log.records, loaded.space, dims, min_n, n_perm, rng);
  std::cout << "groups=" << result.groups.size() << " F=" << fmt(result.f_stat)
            << " eta_sq=" << fmt(result.eta_sq) << " p_perm=" << fmt(result.p_perm) << "\n";
  std::cout << "group\tn\tmean\tvariance\n";
  for (const auto& g : result.groups)
    std::cout << g.label << "\t" << g.n << "\t" << fmt(g.mean) << "\t" << fmt(g.variance)
              << "\n";
  return 0;
}

int cmd_analyze_enrichment(const std::string& in_path, const std::string& space_path,
                           const std::string& predicate_text, std::int64_t top_k) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  const RecordPredicate predicate = parse_predicate(predicate_text, loaded.space);
  const Enrichment result = enrichment_ratio(loaded.log.records, predicate, top_k);
  if (!result.defined) {
    std::cout << "enrichment undefined (zero base rate)\n";
    return 0;
  }
  std::cout << "predicate=" << predicate_text << " top_k=" << top_k
            << " top_fraction=" << fmt(result.top_fraction)
            << " base_fraction=" << fmt(result.base_fraction) << " ratio=" << fmt(result.ratio)
            << "\n";
  return 0;
}

int cmd_analyze_jumps(const std::string& in_path, const std::string& space_path,
                      double min_jump) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  const auto jumps = detect_jumps(cumulative_best(loaded.log.records), min_jump);
  std::cout << "jumps (min_jump=" << fmt(min_jump) << "): " << jumps.size() << "\n";
  for (const auto& j : jumps)
    std::cout << "  n=" << j.index << " magnitude=" << fmt(j.magnitude) << "\n";
  return 0;
}

int cmd_analyze_regret(const std::string& in_path, const std::string& space_path,
                       const std::string& landscape_path, double f_star_flag) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  double f_star = f_star_flag;
  if (!landscape_path.empty()) {
    const LandscapeParams params = LandscapeParams::from_file(landscape_path);
    f_star = true_optimum(params, loaded.space).second;
  }
  if (f_star < 0.0)
    throw UsageError("regret needs --landscape FILE or --f-star VALUE (synthetic mode only)");
  const BestSeries best = cumulative_best(loaded.log.records);
  const auto regret = simple_regret(best, f_star);
  std::cout << "f_star=" << fmt(f_star) << "\n";
  std::cout << "n\tregret\n";
  for (std::size_t i = 0; i < best.size(); ++i)
    std::cout << best[i].n << "\t" << fmt(regret[i]) << "\n";
  return 0;
}

int cmd_analyze_rank(const std::string& in_path, const std::string& space_path,
                     const std::string& extra_key, std::int64_t top_k) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  std::vector<const ExperimentRecord*> completed;
  for (const auto& r : loaded.log.records)
    if (r.status == RecordStatus::completed && r.ap && r.extra.count(extra_key))
      completed.push_back(&r);
  std::stable_sort(completed.begin(), completed.end(),
                   [](const ExperimentRecord* a, const ExperimentRecord* b) {
                     return *a->ap > *b->ap;
                   });
  if (top_k > 0 && completed.size() > static_cast<std::size_t>(top_k))
    completed.resize(static_cast<std::size_t>(top_k));
  std::vector<std::pair<double, double>> pairs;
  for (const auto* r : completed) {
    try {
      pairs.emplace_back(*r->ap, std::stod(r->extra.at(extra_key)));
    } catch (...) {
      // non-numeric extra field entries are skipped
    }
  }
  const RankCorrelation rho = rank_correlation(pairs);
  std::cout << "pairs=" << pairs.size() << " spearman_rho="
            << (rho.defined ? fmt(rho.rho) : "undefined") << "\n";
  return 0;
}

int cmd_encoders_selftest() {
  print_breadcrumb(20240517, 0);  // fixed property-check seed
  const auto results = run_encoder_selftest();
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name;
    if (!r.detail.empty()) std::cout << "  (" << r.detail << ")";
    std::cout << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "all checks passed" : "some checks FAILED") << "\n";
  return all_pass ? 0 : 3;
}

int cmd_report(const std::string& in_path, const std::string& space_path,
               const std::string& out_dir, int window) {
  LoadedLog loaded = load_log_and_space(in_path, space_path);
  ReportOptions options;
  if (window > 0) {
    options.entropy_window = window;
    options.jsd_window = window;
    options.innovation_window = window;
  }
  const auto files = emit_report(loaded.log.records, loaded.space, out_dir, options);
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  return 0;
}

int cmd_ingest(const std::string& in_path, const std::string& mapping_path,
               const std::string& space_path, const std::string& out_path) {
  const ConfigurationSpace space = load_space(space_path);
  std::ifstream mapping_file(mapping_path);
  if (!mapping_file) throw DataError("cannot open mapping spec '" + mapping_path + "'");
  std::stringstream mapping_text;
  mapping_text << mapping_file.rdbuf();
  const IngestResult result = ingest_external(in_path, mapping_text.str(), space);
  print_breadcrumb(0, space.schema_hash());
  std::cout << "parsed=" << result.stats.parsed << " unparseable=" << result.stats.unparseable
            << " dropped_missing_ap=" << result.stats.dropped_missing_ap
            << " unattributed=" << result.stats.unattributed << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + out_path + "'");
    out << serialize_log(result.log);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"searchlab: combinatorial ML-experiment search workbench"};
  app.require_subcommand(1);

  std::string space_path, in_path, out_path, out_dir, config_path;
  std::string oracle_kind = "synthetic", replay_in, policy_list, diversity;
  std::string model = "all", projection = "total", agent_a, agent_b, chi2_key;
  std::string group_dims = "backbone,encoder", two_way, predicate = "source=sweep";
  std::string mapping_path, landscape_path, save_landscape, extra_key = "test_ap";
  std::int64_t steps = -1, min_n = 10, balanced_n = 0, top_k = 100;
  int workers = 1, permutations = 1, n_perm = 500, window = 100, ideas = 4;
  int heal_retries = -1;
  std::uint64_t seed = 0, landscape_seed = 1;
  double dedup_threshold = -1.0, min_jump = 0.01, f_star = -1.0;
  double noise_sigma = -1.0, failure_rate = -1.0;

  auto* space_cmd = app.add_subcommand("space", "configuration space tools");
  auto* space_show = space_cmd->add_subcommand("show", "print dimensions and cardinality");
  space_show->add_option("--space", space_path, "space schema file (default: built-in)");

  auto* campaign = app.add_subcommand("campaign", "run or replay campaigns");
  auto* run = campaign->add_subcommand("run", "run a multi-agent campaign");
  run->add_option("--space", space_path);
  run->add_option("--oracle", oracle_kind, "synthetic|replay");
  run->add_option("--replay-in", replay_in, "pool log for the replay oracle");
  run->add_option("--policy", policy_list, "comma list: random,tpe,llm,sweep,pool-*");
  run->add_option("--steps", steps, "completed-experiment target");
  run->add_option("--workers", workers);
  run->add_option("--seed", seed);
  run->add_option("--out", out_path);
  run->add_option("--config", config_path, "campaign config JSON");
  run->add_option("--dedup-threshold", dedup_threshold);
  run->add_option("--heal-retries", heal_retries);
  run->add_option("--diversity", diversity, "dim:min_non_modal[,dim:n]");
  run->add_option("--ideas-per-cycle", ideas);
  run->add_option("--landscape", landscape_path, "landscape params JSON");
  run->add_option("--save-landscape", save_landscape);
  run->add_option("--landscape-seed", landscape_seed);
  run->add_option("--noise-sigma", noise_sigma);
  run->add_option("--failure-rate", failure_rate, "per-category failure probability");

  auto* replay = campaign->add_subcommand("replay", "replay a recorded pool");
  replay->add_option("--in", in_path)->required();
  replay->add_option("--space", space_path);
  replay->add_option("--policy", policy_list, "pool-random|pool-tpe|pool-oracle")->required();
  replay->add_option("--permutations", permutations);
  replay->add_option("--seed", seed);
  replay->add_option("--steps", steps);
  replay->add_option("--out", out_path);

  auto* analyze = app.add_subcommand("analyze", "statistics over a campaign log");
  auto* convergence = analyze->add_subcommand("convergence", "model fits + AIC ranking");
  convergence->add_option("--in", in_path)->required();
  convergence->add_option("--space", space_path);
  convergence->add_option("--model", model, "power|exponential|logarithmic|all");

  auto* dynamics = analyze->add_subcommand("dynamics", "entropy, JSD, innovation");
  dynamics->add_option("--in", in_path)->required();
  dynamics->add_option("--space", space_path);
  dynamics->add_option("--window", window);
  dynamics->add_option("--projection", projection, "total|arch|train");
  dynamics->add_option("--agent-a", agent_a);
  dynamics->add_option("--agent-b", agent_b);
  dynamics->add_option("--chi2-key", chi2_key, "representativeness key dimension");
  dynamics->add_option("--n-perm", n_perm);
  dynamics->add_option("--seed", seed);

  auto* anova = analyze->add_subcommand("anova", "variance decomposition");
  anova->add_option("--in", in_path)->required();
  anova->add_option("--space", space_path);
  anova->add_option("--group-dims", group_dims);
  anova->add_option("--min-n", min_n);
  anova->add_option("--n-perm", n_perm);
  anova->add_option("--balanced", balanced_n, "subsample to N per group");
  anova->add_option("--two-way", two_way, "dimA,dimB");
  anova->add_option("--seed", seed);

  auto* enrichment = analyze->add_subcommand("enrichment", "top-k enrichment ratio");
  enrichment->add_option("--in", in_path)->required();
  enrichment->add_option("--space", space_path);
  enrichment->add_option("--predicate", predicate, "field=value");
  enrichment->add_option("--top-k", top_k);

  auto* jumps = analyze->add_subcommand("jumps", "changepoints in the best series");
  jumps->add_option("--in", in_path)->required();
  jumps->add_option("--space", space_path);
  jumps->add_option("--min-jump", min_jump);

  auto* regret = analyze->add_subcommand("regret", "simple regret vs the true optimum");
  regret->add_option("--in", in_path)->required();
  regret->add_option("--space", space_path);
  regret->add_option("--landscape", landscape_path);
  regret->add_option("--f-star", f_star);

  auto* rank = analyze->add_subcommand("rank", "rank correlation of ap vs an extra field");
  rank->add_option("--in", in_path)->required();
  rank->add_option("--space", space_path);
  rank->add_option("--extra-field", extra_key);
  rank->add_option("--top-k", top_k);

  auto* encoders = app.add_subcommand("encoders", "encoder math");
  auto* selftest = encoders->add_subcommand("selftest", "run numeric property checks");
  (void)selftest;

  auto* report = app.add_subcommand("report", "emit tables and plot data");
  report->add_option("--in", in_path)->required();
  report->add_option("--space", space_path);
  report->add_option("--out-dir", out_dir)->required();
  report->add_option("--window", window);

  auto* ingest = app.add_subcommand("ingest", "normalize an external log");
  ingest->add_option("--in", in_path)->required();
  ingest->add_option("--mapping", mapping_path)->required();
  ingest->add_option("--space", space_path);
  ingest->add_option("--out", out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (space_show->parsed()) return cmd_space_show(space_path);
    if (run->parsed())
      return cmd_campaign_run(space_path, oracle_kind, replay_in, policy_list, steps, workers,
                              seed, out_path, config_path, dedup_threshold, heal_retries,
                              diversity, ideas, landscape_path, save_landscape,
                              landscape_seed, noise_sigma, failure_rate);
    if (replay->parsed())
      return cmd_campaign_replay(in_path, space_path, policy_list, permutations, seed, steps,
                                 out_path);
    if (convergence->parsed()) return cmd_analyze_convergence(in_path, space_path, model);
    if (dynamics->parsed())
      return cmd_analyze_dynamics(in_path, space_path, window, projection, agent_a, agent_b,
                                  chi2_key, n_perm, seed);
    if (anova->parsed())
      return cmd_analyze_anova(in_path, space_path, group_dims, min_n, n_perm, balanced_n,
                               two_way, seed);
    if (enrichment->parsed())
      return cmd_analyze_enrichment(in_path, space_path, predicate, top_k);
    if (jumps->parsed()) return cmd_analyze_jumps(in_path, space_path, min_jump);
    if (regret->parsed()) return cmd_analyze_regret(in_path, space_path, landscape_path, f_star);
    if (rank->parsed()) return cmd_analyze_rank(in_path, space_path, extra_key, top_k);
    if (selftest->parsed()) return cmd_encoders_selftest();
    if (report->parsed()) return cmd_report(in_path, space_path, out_dir, window);
    if (ingest->parsed()) return cmd_ingest(in_path, mapping_path, space_path, out_path);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const AnalysisError& e) {
    std::cerr << "analysis error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace searchlab
