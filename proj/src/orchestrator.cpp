#include "searchlab/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace searchlab {

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::random: return "random";
    case PolicyKind::tpe: return "tpe";
    case PolicyKind::llm: return "llm";
    case PolicyKind::sweep: return "sweep";
    case PolicyKind::pool_random: return "pool-random";
    case PolicyKind::pool_tpe: return "pool-tpe";
    case PolicyKind::pool_oracle: return "pool-oracle";
  }
  return "?";
}

std::optional<PolicyKind> policy_kind_from(const std::string& s) {
  if (s == "random") return PolicyKind::random;
  if (s == "tpe") return PolicyKind::tpe;
  if (s == "llm") return PolicyKind::llm;
  if (s == "sweep") return PolicyKind::sweep;
  if (s == "pool-random" || s == "pool_random") return PolicyKind::pool_random;
  if (s == "pool-tpe" || s == "pool_tpe") return PolicyKind::pool_tpe;
  if (s == "pool-oracle" || s == "pool_oracle") return PolicyKind::pool_oracle;
  return std::nullopt;
}

std::string CampaignConfig::to_json_text() const {
  nlohmann::ordered_json j;
  j["n_steps"] = n_steps;
  j["n_workers"] = n_workers;
  j["dedup_threshold"] = dedup_threshold;
  j["heal_max_retries"] = heal_max_retries;
  j["seed"] = seed;
  j["max_executed"] = max_executed;
  j["leaderboard_k"] = leaderboard_k;
  j["recent_window"] = recent_window;
  j["failure_window"] = failure_window;
  nlohmann::ordered_json ja = nlohmann::ordered_json::array();
  for (const auto& a : agents) {
    nlohmann::ordered_json jag;
    jag["name"] = a.name;
    jag["policy"] = to_string(a.policy);
    jag["ideas_per_cycle"] = a.ideas_per_cycle;
    if (a.policy == PolicyKind::tpe || a.policy == PolicyKind::pool_tpe) {
      jag["tpe"] = {{"gamma_quantile", a.tpe.gamma_quantile},
                    {"n_candidates", a.tpe.n_candidates},
                    {"min_history", a.tpe.min_history},
                    {"bandwidth_factor", a.tpe.bandwidth_factor}};
    }
    if (a.policy == PolicyKind::sweep) jag["sweep_dims"] = a.sweep_dims;
    if (a.policy == PolicyKind::pool_random)
      jag["pool_without_replacement"] = a.pool_without_replacement;
    if (a.policy == PolicyKind::llm) {
      // The auth token stays out of serialized configs; it comes from the
      // environment.
      nlohmann::ordered_json je;
      if (!a.endpoint.url.empty()) je["url"] = a.endpoint.url;
      je["timeout_ms"] = a.endpoint.timeout_ms;
      je["max_retries"] = a.endpoint.max_retries;
      jag["endpoint"] = je;
    }
    ja.push_back(jag);
  }
  j["agents"] = ja;
  nlohmann::ordered_json jd = nlohmann::ordered_json::array();
  for (const auto& r : diversity_budget)
    jd.push_back({{"dimension", r.dimension}, {"min_non_modal", r.min_non_modal}});
  j["diversity_budget"] = jd;
  return j.dump(2);
}

CampaignConfig CampaignConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("campaign config is not valid JSON: ") + e.what());
  }
  CampaignConfig c;
  c.n_steps = j.value("n_steps", std::int64_t{0});
  c.n_workers = j.value("n_workers", 1);
  c.dedup_threshold = j.value("dedup_threshold", 0.9);
  c.heal_max_retries = j.value("heal_max_retries", 2);
  c.seed = j.value("seed", std::uint64_t{0});
  c.max_executed = j.value("max_executed", std::int64_t{0});
  c.leaderboard_k = j.value("leaderboard_k", 5);
  c.recent_window = j.value("recent_window", 50);
  c.failure_window = j.value("failure_window", 10);
  if (j.contains("agents")) {
    for (const auto& jag : j["agents"]) {
      AgentSpec a;
      a.name = jag.value("name", "agent");
      auto kind = policy_kind_from(jag.value("policy", "random"));
      if (!kind) throw DataError("unknown policy '" + jag.value("policy", "") + "'");
      a.policy = *kind;
      a.ideas_per_cycle = jag.value("ideas_per_cycle", 4);
      if (jag.contains("tpe")) {
        const auto& jt = jag["tpe"];
        a.tpe.gamma_quantile = jt.value("gamma_quantile", 0.25);
        a.tpe.n_candidates = jt.value("n_candidates", 24);
        a.tpe.min_history = jt.value("min_history", 10);
        a.tpe.bandwidth_factor = jt.value("bandwidth_factor", 1.06);
      }
      if (jag.contains("sweep_dims"))
        a.sweep_dims = jag["sweep_dims"].get<std::vector<std::string>>();
      a.pool_without_replacement = jag.value("pool_without_replacement", true);
      if (jag.contains("endpoint")) {
        const auto& je = jag["endpoint"];
        a.endpoint.url = je.value("url", std::string(""));
        a.endpoint.timeout_ms = je.value("timeout_ms", 30000);
        a.endpoint.max_retries = je.value("max_retries", 2);
      }
      c.agents.push_back(std::move(a));
    }
  }
  if (j.contains("diversity_budget")) {
    for (const auto& jr : j["diversity_budget"]) {
      DiversityRule r;
      r.dimension = jr.at("dimension").get<std::string>();
      r.min_non_modal = jr.value("min_non_modal", 1);
      c.diversity_budget.push_back(std::move(r));
    }
  }
  if (c.dedup_threshold < 0.0 || c.dedup_threshold > 1.0)
    throw DataError("dedup_threshold must be in [0, 1]");
  if (c.n_workers < 1) throw DataError("n_workers must be at least 1");
  return c;
}

CampaignConfig CampaignConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open campaign config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::uint64_t CampaignConfig::config_hash() const {
  const std::string text = to_json_text();
  return fnv1a64(text.data(), text.size());
}

namespace {

// J(A, B) > t  <=>  |A ∩ B| > t * (|A| + |B|) / (1 + t); two-pointer walk
// with early abort once the bound is unreachable.
bool jaccard_exceeds(const Fingerprint& a, const Fingerprint& b, double threshold) {
  const auto& ha = a.token_hashes;
  const auto& hb = b.token_hashes;
  if (ha.empty() && hb.empty()) return threshold < 1.0;
  const double need =
      threshold * static_cast<double>(ha.size() + hb.size()) / (1.0 + threshold);
  std::size_t i = 0, j = 0, both = 0;
  while (i < ha.size() && j < hb.size()) {
    const std::size_t best_possible =
        both + std::min(ha.size() - i, hb.size() - j);
    if (static_cast<double>(best_possible) <= need) return false;
    if (ha[i] == hb[j]) {
      ++both;
      ++i;
      ++j;
    } else if (ha[i] < hb[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(both) > need;
}

}  // namespace

DedupResult dedup_filter(const std::vector<Proposal>& proposals, const History& history,
                         const std::vector<Fingerprint>& queued, double threshold,
                         const ConfigurationSpace& space) {
  DedupResult result;
  if (threshold >= 1.0) {
    result.accepted = proposals;
    return result;
  }
  std::vector<Fingerprint> seen;
  seen.reserve(history.records.size() + queued.size());
  for (const auto& r : history.records) seen.push_back(fingerprint(space, r.config));
  for (const auto& fp : queued) seen.push_back(fp);

  for (const auto& p : proposals) {
    const Fingerprint fp = fingerprint(space, p.config);
    std::string reason;
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (jaccard_exceeds(fp, seen[i], threshold)) {
        reason = i < history.records.size()
                     ? "duplicate of record " + std::to_string(history.records[i].id)
                     : "duplicate of queued or batch proposal";
        break;
      }
    }
    if (reason.empty()) {
      result.accepted.push_back(p);
      seen.push_back(fp);
    } else {
      result.rejected.emplace_back(p, reason);
    }
  }
  return result;
}

DiversityResult enforce_diversity(const std::vector<Proposal>& proposals,
                                  const PolicyContext& context,
                                  const std::vector<DiversityRule>& budget) {
  DiversityResult result;
  result.kept = proposals;
  if (proposals.empty()) return result;  // nothing to balance

  for (const auto& rule : budget) {
    auto modal = modal_level(context, result.kept, rule.dimension);
    if (!modal) continue;
    int non_modal = 0;
    for (const auto& p : result.kept) {
      if (p.config.has(rule.dimension) &&
          std::holds_alternative<std::string>(p.config.assignments.at(rule.dimension)) &&
          p.config.level(rule.dimension) != *modal)
        ++non_modal;
    }
    int deficit = rule.min_non_modal - non_modal;
    if (deficit <= 0) continue;
    // Swap out trailing modal proposals to make room for replacements.
    for (std::size_t i = result.kept.size(); i-- > 0 && deficit > 0;) {
      const auto& p = result.kept[i];
      if (p.config.has(rule.dimension) &&
          std::holds_alternative<std::string>(p.config.assignments.at(rule.dimension)) &&
          p.config.level(rule.dimension) == *modal) {
        result.kept.erase(result.kept.begin() + static_cast<long>(i));
        --deficit;
      }
    }
    const int requests = rule.min_non_modal - non_modal;
    for (int i = 0; i < requests; ++i) result.requests.push_back({rule.dimension, *modal});
  }
  return result;
}

std::vector<std::size_t> schedule(const std::vector<PendingExperiment>& queue,
                                  int free_workers) {
  std::vector<std::size_t> order(queue.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto pa = static_cast<int>(queue[a].proposal.priority);
    const auto pb = static_cast<int>(queue[b].proposal.priority);
    if (pa != pb) return pa < pb;
    if (queue[a].submit_tick != queue[b].submit_tick)
      return queue[a].submit_tick < queue[b].submit_tick;
    return queue[a].id < queue[b].id;
  });
  if (free_workers < 0) free_workers = 0;
  if (order.size() > static_cast<std::size_t>(free_workers))
    order.resize(static_cast<std::size_t>(free_workers));
  return order;
}

HealRemedy self_heal(const ExperimentRecord& record, FailureCategory category, int attempt,
                     int heal_max_retries, const ConfigurationSpace& space) {
  HealRemedy remedy;
  if (attempt >= heal_max_retries) return remedy;  // abandon

  switch (category) {
    case FailureCategory::oom: {
      const auto* batch = space.find("batch_size");
      if (!batch || batch->kind != DimKind::categorical || !record.config.has("batch_size"))
        return remedy;
      // Halve within the available levels; abandon at the floor.
      std::vector<std::pair<double, std::string>> levels;
      for (const auto& level : batch->levels) {
        try {
          levels.emplace_back(std::stod(level), level);
        } catch (...) {
          return remedy;
        }
      }
      std::sort(levels.begin(), levels.end());
      const double current = std::stod(record.config.level("batch_size"));
      const double target = current / 2.0;
      std::string pick;
      for (const auto& [value, level] : levels)
        if (value <= target + 1e-9) pick = level;
      if (pick.empty()) return remedy;  // already at the smallest level
      remedy.kind = HealRemedy::Kind::requeue;
      remedy.config = record.config;
      remedy.config.set("batch_size", pick);
      remedy.annotation = "[heal] reduced batch_size to " + pick;
      return remedy;
    }
    case FailureCategory::nan_loss:
      remedy.kind = HealRemedy::Kind::requeue;
      remedy.config = record.config;
      remedy.annotation = "[heal] grad guard enabled";
      return remedy;
    case FailureCategory::missing_file:
      if (attempt >= 1) return remedy;  // requeue unchanged at most once
      remedy.kind = HealRemedy::Kind::requeue;
      remedy.config = record.config;
      remedy.annotation = "[heal] requeued after missing file";
      return remedy;
  }
  return remedy;
}

std::vector<const ExperimentRecord*> leaderboard(const History& history, int k) {
  auto completed = history.completed();
  std::stable_sort(completed.begin(), completed.end(),
                   [](const ExperimentRecord* a, const ExperimentRecord* b) {
                     if (*a->ap != *b->ap) return *a->ap > *b->ap;
                     if (a->end_tick != b->end_tick) return a->end_tick < b->end_tick;
                     return a->id < b->id;
                   });
  if (completed.size() > static_cast<std::size_t>(std::max(0, k)))
    completed.resize(static_cast<std::size_t>(std::max(0, k)));
  return completed;
}

namespace {

struct AgentState {
  AgentSpec spec;
  std::optional<PoolRandomSampler> pool_random;
  std::optional<PoolOracleSampler> pool_oracle;
  std::optional<PoolTpeSampler> pool_tpe;
  bool pool_exhausted = false;
};

struct RunningExperiment {
  std::int64_t end_tick = 0;
  std::int64_t start_tick = 0;
  PendingExperiment pending;
  EvalOutcome outcome;
};

class CampaignRunner {
 public:
  CampaignRunner(const ConfigurationSpace& space, Oracle& oracle, const CampaignConfig& cfg,
                 const std::vector<ExperimentRecord>* pool)
      : space_(space), oracle_(oracle), cfg_(cfg), pool_(pool),
        system_rng_(Rng::stream(cfg.seed, 0x5e5e5e)) {
    if (cfg_.n_workers < 1) throw UsageError("n_workers must be at least 1");
    if (cfg_.dedup_threshold < 0.0 || cfg_.dedup_threshold > 1.0)
      throw UsageError("dedup_threshold must be in [0, 1]");
    for (const auto& spec : cfg_.agents) {
      AgentState st{spec, std::nullopt, std::nullopt, std::nullopt, false};
      const bool pool_policy = spec.policy == PolicyKind::pool_random ||
                               spec.policy == PolicyKind::pool_tpe ||
                               spec.policy == PolicyKind::pool_oracle;
      if (pool_policy) {
        if (!pool_) throw UsageError("pool policies require a replay pool");
        if (spec.policy == PolicyKind::pool_random)
          st.pool_random.emplace(*pool_, spec.pool_without_replacement);
        else if (spec.policy == PolicyKind::pool_oracle)
          st.pool_oracle.emplace(*pool_);
        else
          st.pool_tpe.emplace(*pool_, space_, spec.tpe);
      }
      if (spec.policy == PolicyKind::llm) {
        const EndpointConfig env = endpoint_from_env();
        if (st.spec.endpoint.url.empty()) st.spec.endpoint.url = env.url;
        if (st.spec.endpoint.auth_token.empty()) st.spec.endpoint.auth_token = env.auth_token;
      }
      agents_.push_back(std::move(st));
    }
    max_executed_ = cfg_.max_executed > 0
                        ? cfg_.max_executed
                        : std::max<std::int64_t>(4 * cfg_.n_steps, cfg_.n_steps + 100);
  }

  History run() {
    if (cfg_.n_steps <= 0) return std::move(history_);
    if (agents_.empty()) throw UsageError("campaign needs at least one agent");

    while (completed_ < cfg_.n_steps && !truncated_) {
      if (executed_ >= max_executed_) {
        truncate("executed-cap");
        break;
      }
      if (queue_.empty() && running_.empty()) {
        run_cycle();
        if (queue_.empty()) {
          if (!truncated_) truncate("stalled");
          break;
        }
      }
      assign_workers();
      if (running_.empty()) {
        if (!truncated_) continue;
        break;
      }
      advance_to_next_completion();
    }
    finalize();
    return std::move(history_);
  }

 private:
  void truncate(const std::string& reason) {
    if (!truncated_) {
      truncated_ = true;
      history_.truncated = true;
      history_.truncation_reason = reason;
    }
  }

  Rng agent_rng(std::size_t agent_index) {
    return Rng::stream(hash_mix(cfg_.seed, 0xA3E47 + agent_index),
                       static_cast<std::uint64_t>(cycle_));
  }

  std::vector<Proposal> agent_propose(std::size_t agent_index, const PolicyContext& context,
                                      std::vector<std::string>& notes) {
    AgentState& st = agents_[agent_index];
    Rng rng = agent_rng(agent_index);
    std::vector<Proposal> out;
    const int n = std::max(1, st.spec.ideas_per_cycle);
    try {
      switch (st.spec.policy) {
        case PolicyKind::random:
          for (int i = 0; i < n; ++i) out.push_back(propose_random(space_, rng));
          break;
        case PolicyKind::tpe:
          for (int i = 0; i < n; ++i)
            out.push_back(propose_tpe(history_.records, space_, st.spec.tpe, rng));
          break;
        case PolicyKind::llm: {
          const std::string text = encode_context(context, space_, n);
          auto result = propose_llm(text, st.spec.endpoint, space_, n, rng);
          if (!result.transport_error.empty())
            notes.push_back(st.spec.name + ": " + result.transport_error);
          for (const auto& rejection : result.rejections)
            notes.push_back(st.spec.name + ": rejected " + rejection);
          out = std::move(result.proposals);
          break;
        }
        case PolicyKind::sweep:
          out = sweep_cycle(st, rng, n);
          break;
        case PolicyKind::pool_random:
          for (int i = 0; i < n && !st.pool_random->exhausted(); ++i)
            out.push_back(st.pool_random->next(rng));
          if (st.pool_random->exhausted() && out.empty()) st.pool_exhausted = true;
          break;
        case PolicyKind::pool_oracle:
          for (int i = 0; i < n && !st.pool_oracle->exhausted(); ++i)
            out.push_back(st.pool_oracle->next());
          if (st.pool_oracle->exhausted() && out.empty()) st.pool_exhausted = true;
          break;
        case PolicyKind::pool_tpe:
          for (int i = 0; i < n && !st.pool_tpe->exhausted(); ++i)
            out.push_back(st.pool_tpe->next(history_.records, rng));
          if (st.pool_tpe->exhausted() && out.empty()) st.pool_exhausted = true;
          break;
      }
    } catch (const DataError&) {
      st.pool_exhausted = true;  // pool drained mid-cycle
    }
    return out;
  }

  std::vector<Proposal> sweep_cycle(AgentState& st, Rng& rng, int n) {
    const auto top = leaderboard(history_, 1);
    if (top.empty()) {
      // No base to expand yet.
      Proposal p = propose_random(space_, rng);
      p.rationale = "sweep agent bootstrap";
      return {std::move(p)};
    }
    const ExperimentRecord& base_record = *top.front();
    Proposal base;
    base.config = base_record.config;
    base.parent_id = base_record.id;
    base.priority = Priority::medium;

    std::vector<Proposal> children;
    for (const auto& dim_name : st.spec.sweep_dims) {
      const auto* dim = space_.find(dim_name);
      if (!dim || !base.config.has(dim_name)) continue;
      SweepSpec spec;
      std::vector<ConfigValue> values;
      if (dim->kind == DimKind::continuous) {
        const double z = space_.scaled(*dim, base.config.real(dim_name));
        for (double dz : {-0.10, -0.05, 0.05, 0.10}) {
          const double zz = std::max(0.0, std::min(1.0, z + dz));
          values.emplace_back(space_.unscaled(*dim, zz));
        }
      } else {
        for (const auto& level : dim->levels)
          if (level != base.config.level(dim_name)) values.emplace_back(level);
      }
      if (values.empty()) continue;
      spec.grid.emplace_back(dim_name, std::move(values));
      auto expanded = expand_sweep(base, spec, space_);
      for (auto& child : expanded) children.push_back(std::move(child));
    }
    if (children.size() > static_cast<std::size_t>(n))
      children.resize(static_cast<std::size_t>(n));
    return children;
  }

  void run_cycle() {
    ++cycle_;
    CycleStats stats;
    stats.cycle = cycle_;

    const PolicyContext context =
        build_context(history_, space_, cfg_.leaderboard_k, cfg_.recent_window,
                      cfg_.failure_window, cfg_.diversity_budget);

    std::vector<Proposal> collected;
    std::vector<std::string> proposer;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      auto proposals = agent_propose(i, context, stats.notes);
      for (auto& p : proposals) {
        collected.push_back(std::move(p));
        proposer.push_back(agents_[i].spec.name);
      }
    }

    bool all_pools_done = !agents_.empty();
    for (const auto& st : agents_) {
      const bool is_pool = st.spec.policy == PolicyKind::pool_random ||
                           st.spec.policy == PolicyKind::pool_tpe ||
                           st.spec.policy == PolicyKind::pool_oracle;
      if (!is_pool || !st.pool_exhausted) all_pools_done = false;
    }
    if (all_pools_done) truncate("pool-exhausted");

    // Dedup against history and current queue, in record order. Fingerprints
    // are cached incrementally; this mirrors dedup_filter.
    DedupResult dedup;
    if (cfg_.dedup_threshold >= 1.0) {
      dedup.accepted = collected;
    } else {
      std::vector<const Fingerprint*> seen;
      seen.reserve(history_fps_.size() + queue_.size());
      for (const auto& f : history_fps_) seen.push_back(&f);
      for (const auto& q : queue_) seen.push_back(&q.fp);
      std::vector<Fingerprint> batch_fps;
      for (const auto& p : collected) {
        const Fingerprint fp = fingerprint(space_, p.config);
        std::string reason;
        for (std::size_t i = 0; i < seen.size() && reason.empty(); ++i) {
          if (jaccard_exceeds(fp, *seen[i], cfg_.dedup_threshold))
            reason = i < history_fps_.size()
                         ? "duplicate of record " + std::to_string(history_.records[i].id)
                         : "duplicate of queued proposal";
        }
        for (std::size_t i = 0; i < batch_fps.size() && reason.empty(); ++i)
          if (jaccard_exceeds(fp, batch_fps[i], cfg_.dedup_threshold))
            reason = "duplicate of batch proposal";
        if (reason.empty()) {
          dedup.accepted.push_back(p);
          batch_fps.push_back(fp);
        } else {
          dedup.rejected.emplace_back(p, reason);
        }
      }
    }

    // Re-associate accepted proposals with their proposing agent.
    std::vector<std::string> accepted_agent;
    {
      std::size_t src = 0;
      for (const auto& p : dedup.accepted) {
        while (src < collected.size() && !(collected[src].config == p.config)) ++src;
        accepted_agent.push_back(src < proposer.size() ? proposer[src] : "system");
        if (src < collected.size()) ++src;
      }
    }

    DiversityResult diversity =
        enforce_diversity(dedup.accepted, context, cfg_.diversity_budget);
    // Track which accepted proposals survived so agent attribution follows.
    std::vector<std::string> kept_agent;
    {
      std::size_t src = 0;
      for (const auto& p : diversity.kept) {
        while (src < dedup.accepted.size() && !(dedup.accepted[src].config == p.config)) ++src;
        kept_agent.push_back(src < accepted_agent.size() ? accepted_agent[src] : "system");
        if (src < dedup.accepted.size()) ++src;
      }
    }

    int replacements = 0;
    std::vector<Proposal> to_enqueue = diversity.kept;
    std::vector<std::string> enqueue_agent = kept_agent;
    if (oracle_.generative()) {
      for (const auto& request : diversity.requests) {
        auto replacement = make_replacement(request, to_enqueue);
        if (replacement) {
          to_enqueue.push_back(std::move(*replacement));
          enqueue_agent.push_back("system");
          ++replacements;
        }
      }
      if (to_enqueue.empty()) {
        // Rescue: keep the campaign alive with fresh random proposals.
        for (int attempt = 0; attempt < 50 && to_enqueue.empty(); ++attempt) {
          Proposal p = propose_random(space_, system_rng_);
          if (!is_duplicate(p, to_enqueue)) {
            p.rationale = "rescue proposal (cycle produced no accepted ideas)";
            to_enqueue.push_back(std::move(p));
            enqueue_agent.push_back("system");
            ++replacements;
          }
        }
      }
    }

    for (std::size_t i = 0; i < to_enqueue.size(); ++i)
      enqueue(std::move(to_enqueue[i]), enqueue_agent[i], 0);

    stats.generated = static_cast<int>(collected.size()) + replacements;
    stats.accepted = static_cast<int>(to_enqueue.size());
    stats.rejected_dedup = static_cast<int>(dedup.rejected.size());
    stats.replaced_diversity =
        static_cast<int>(dedup.accepted.size() - diversity.kept.size());
    history_.cycles.push_back(stats);
  }

  bool is_duplicate(const Proposal& p, const std::vector<Proposal>& batch) {
    if (cfg_.dedup_threshold >= 1.0) return false;
    const Fingerprint fp = fingerprint(space_, p.config);
    for (const auto& f : history_fps_)
      if (jaccard_exceeds(fp, f, cfg_.dedup_threshold)) return true;
    for (const auto& q : queue_)
      if (jaccard_exceeds(fp, q.fp, cfg_.dedup_threshold)) return true;
    for (const auto& b : batch)
      if (jaccard_exceeds(fp, fingerprint(space_, b.config), cfg_.dedup_threshold))
        return true;
    return false;
  }

  std::optional<Proposal> make_replacement(const ReplacementRequest& request,
                                           const std::vector<Proposal>& batch) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      Proposal p =
          propose_random_excluding(space_, system_rng_, request.dimension,
                                   request.exclude_level);
      p.rationale = "diversity replacement (non-" + request.exclude_level + " " +
                    request.dimension + ")";
      if (!is_duplicate(p, batch)) return p;
    }
    return std::nullopt;
  }

  void enqueue(Proposal proposal, const std::string& agent, int heal_attempts,
               std::optional<std::int64_t> parent_id = std::nullopt) {
    PendingExperiment pe;
    pe.id = next_id_++;
    pe.agent = agent;
    pe.cycle = cycle_;
    pe.proposal = std::move(proposal);
    if (parent_id) pe.proposal.parent_id = parent_id;
    pe.submit_tick = tick_;
    pe.heal_attempts = heal_attempts;
    pe.fp = fingerprint(space_, pe.proposal.config);
    queue_.push_back(std::move(pe));
  }

  void assign_workers() {
    const int free = cfg_.n_workers - static_cast<int>(running_.size());
    if (free <= 0 || queue_.empty()) return;
    const auto picks = schedule(queue_, free);
    // Remove picked entries from the queue in descending index order.
    std::vector<std::size_t> sorted_picks = picks;
    std::sort(sorted_picks.begin(), sorted_picks.end(), std::greater<>());
    std::vector<PendingExperiment> started;
    for (std::size_t idx : picks) started.push_back(queue_[idx]);
    for (std::size_t idx : sorted_picks) queue_.erase(queue_.begin() + static_cast<long>(idx));

    for (auto& pending : started) {
      Rng eval_rng = Rng::stream(cfg_.seed, 0xE7A100000000ULL ^
                                                static_cast<std::uint64_t>(pending.id));
      RunningExperiment run;
      run.start_tick = tick_;
      run.pending = std::move(pending);
      try {
        run.outcome = oracle_.run(run.pending.proposal.config, eval_rng);
      } catch (const PoolMissError&) {
        truncate("pool-miss");
        ExperimentRecord record;
        record.id = run.pending.id;
        record.agent = run.pending.agent;
        record.cycle = run.pending.cycle;
        record.parent_id = run.pending.proposal.parent_id;
        record.config = run.pending.proposal.config;
        record.source = run.pending.proposal.source;
        record.status = RecordStatus::abandoned;
        record.heal_attempts = run.pending.heal_attempts;
        record.submit_tick = run.pending.submit_tick;
        record.start_tick = tick_;
        record.end_tick = tick_;
        history_.records.push_back(record);
        history_fps_.push_back(run.pending.fp);
        continue;
      }
      run.end_tick = tick_ + std::max<std::int64_t>(1, run.outcome.duration_ticks);
      running_.push_back(std::move(run));
    }
  }

  void advance_to_next_completion() {
    std::int64_t next = 0;
    bool first = true;
    for (const auto& r : running_) {
      if (first || r.end_tick < next) next = r.end_tick;
      first = false;
    }
    tick_ = next;

    std::vector<std::size_t> finishing;
    for (std::size_t i = 0; i < running_.size(); ++i)
      if (running_[i].end_tick == tick_) finishing.push_back(i);
    std::sort(finishing.begin(), finishing.end(), [&](std::size_t a, std::size_t b) {
      return running_[a].pending.id < running_[b].pending.id;
    });

    std::vector<std::size_t> processed;
    for (std::size_t idx : finishing) {
      if (completed_ >= cfg_.n_steps) break;  // target reached mid-batch
      complete(running_[idx]);
      processed.push_back(idx);
    }
    // Erase in descending order to preserve indices.
    std::sort(processed.begin(), processed.end(), std::greater<>());
    for (std::size_t idx : processed)
      running_.erase(running_.begin() + static_cast<long>(idx));
  }

  void complete(const RunningExperiment& run) {
    ExperimentRecord record;
    record.id = run.pending.id;
    record.agent = run.pending.agent;
    record.cycle = run.pending.cycle;
    record.parent_id = run.pending.proposal.parent_id;
    record.config = run.pending.proposal.config;
    record.source = run.pending.proposal.source;
    record.heal_attempts = run.pending.heal_attempts;
    record.submit_tick = run.pending.submit_tick;
    record.start_tick = run.start_tick;
    record.end_tick = run.end_tick;
    if (run.outcome.status == EvalStatus::completed) {
      record.status = RecordStatus::completed;
      record.ap = run.outcome.ap;
      ++completed_;
    } else {
      record.status = RecordStatus::failed;
      record.failure_category = run.outcome.failure_category;
    }
    ++executed_;
    history_.records.push_back(record);
    history_fps_.push_back(run.pending.fp);

    // Healing can modify configs, which a replay oracle cannot evaluate;
    // recorded failures stay failed in replay mode.
    if (record.status == RecordStatus::failed && oracle_.generative()) {
      auto remedy = self_heal(record, *record.failure_category, record.heal_attempts,
                              cfg_.heal_max_retries, space_);
      if (remedy.kind == HealRemedy::Kind::requeue) {
        Proposal healed;
        healed.config = std::move(remedy.config);
        healed.priority = run.pending.proposal.priority;
        healed.source = run.pending.proposal.source;
        healed.rationale = remedy.annotation;
        enqueue(std::move(healed), record.agent, record.heal_attempts + 1, record.id);
      }
    }
  }

  void finalize() {
    // In-flight and still-queued work is recorded as abandoned.
    std::stable_sort(running_.begin(), running_.end(),
                     [](const RunningExperiment& a, const RunningExperiment& b) {
                       if (a.end_tick != b.end_tick) return a.end_tick < b.end_tick;
                       return a.pending.id < b.pending.id;
                     });
    for (const auto& run : running_) {
      ExperimentRecord record;
      record.id = run.pending.id;
      record.agent = run.pending.agent;
      record.cycle = run.pending.cycle;
      record.parent_id = run.pending.proposal.parent_id;
      record.config = run.pending.proposal.config;
      record.source = run.pending.proposal.source;
      record.status = RecordStatus::abandoned;
      record.heal_attempts = run.pending.heal_attempts;
      record.submit_tick = run.pending.submit_tick;
      record.start_tick = run.start_tick;
      record.end_tick = tick_;
      history_.records.push_back(std::move(record));
    }
    running_.clear();
    std::stable_sort(queue_.begin(), queue_.end(),
                     [](const PendingExperiment& a, const PendingExperiment& b) {
                       return a.id < b.id;
                     });
    for (const auto& pending : queue_) {
      ExperimentRecord record;
      record.id = pending.id;
      record.agent = pending.agent;
      record.cycle = pending.cycle;
      record.parent_id = pending.proposal.parent_id;
      record.config = pending.proposal.config;
      record.source = pending.proposal.source;
      record.status = RecordStatus::abandoned;
      record.heal_attempts = pending.heal_attempts;
      record.submit_tick = pending.submit_tick;
      record.start_tick = pending.submit_tick;
      record.end_tick = pending.submit_tick;
      history_.records.push_back(std::move(record));
    }
    queue_.clear();
  }

  const ConfigurationSpace& space_;
  Oracle& oracle_;
  CampaignConfig cfg_;
  const std::vector<ExperimentRecord>* pool_;
  std::vector<AgentState> agents_;

  History history_;
  std::vector<Fingerprint> history_fps_;  // parallel to history_.records
  std::vector<PendingExperiment> queue_;
  std::vector<RunningExperiment> running_;
  Rng system_rng_;
  std::int64_t tick_ = 0;
  std::int64_t next_id_ = 1;
  std::int64_t cycle_ = 0;
  std::int64_t completed_ = 0;
  std::int64_t executed_ = 0;
  std::int64_t max_executed_ = 0;
  bool truncated_ = false;
};

}  // namespace

History run_campaign(const ConfigurationSpace& space, Oracle& oracle,
                     const CampaignConfig& config, const std::vector<ExperimentRecord>* pool) {
  CampaignRunner runner(space, oracle, config, pool);
  return runner.run();
}

}  // namespace searchlab
