#pragma once

// Multi-agent campaign driver: per-cycle proposal collection, dedup,
// diversity enforcement, priority scheduling over a simulated worker pool,
// failure self-healing, and append-only history maintenance. Time is
// discrete ticks driven by oracle durations; completions are merged by
// (end_tick, id), so runs are deterministic for any worker count.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "searchlab/oracle.hpp"
#include "searchlab/policies.hpp"
#include "searchlab/record.hpp"

namespace searchlab {

enum class PolicyKind { random, tpe, llm, sweep, pool_random, pool_tpe, pool_oracle };

const char* to_string(PolicyKind k);
std::optional<PolicyKind> policy_kind_from(const std::string& s);

struct AgentSpec {
  std::string name;
  PolicyKind policy = PolicyKind::random;
  int ideas_per_cycle = 4;
  TpeParams tpe;
  std::vector<std::string> sweep_dims = {"learning_rate", "focal_gamma"};
  EndpointConfig endpoint;  // llm only; empty url falls back to env
  bool pool_without_replacement = true;
};

struct CampaignConfig {
  std::int64_t n_steps = 0;
  int n_workers = 1;
  double dedup_threshold = 0.9;
  std::vector<AgentSpec> agents;
  std::vector<DiversityRule> diversity_budget;
  int heal_max_retries = 2;
  std::uint64_t seed = 0;
  // 0 means derive: max(4 * n_steps, n_steps + 100). Bounds total executed
  // experiments so campaigns with pathological failure rates terminate.
  std::int64_t max_executed = 0;
  int leaderboard_k = 5;
  int recent_window = 50;
  int failure_window = 10;

  std::string to_json_text() const;
  static CampaignConfig from_json_text(const std::string& text);
  static CampaignConfig from_file(const std::string& path);
  std::uint64_t config_hash() const;
};

struct PendingExperiment {
  std::int64_t id = 0;
  std::string agent;
  std::int64_t cycle = 0;
  Proposal proposal;
  std::int64_t submit_tick = 0;
  int heal_attempts = 0;
  Fingerprint fp;
};

struct DedupResult {
  std::vector<Proposal> accepted;
  std::vector<std::pair<Proposal, std::string>> rejected;  // with reason
};

// Rejects proposals whose fingerprint Jaccard similarity to any seen
// fingerprint (history first, then queue, then earlier accepted proposals)
// strictly exceeds the threshold.
DedupResult dedup_filter(const std::vector<Proposal>& proposals, const History& history,
                         const std::vector<Fingerprint>& queued, double threshold,
                         const ConfigurationSpace& space);

struct ReplacementRequest {
  std::string dimension;
  std::string exclude_level;
};

struct DiversityResult {
  std::vector<Proposal> kept;
  std::vector<ReplacementRequest> requests;
};

DiversityResult enforce_diversity(const std::vector<Proposal>& proposals,
                                  const PolicyContext& context,
                                  const std::vector<DiversityRule>& budget);

// Indices of queue entries to assign, highest priority first, FIFO within a
// priority class, never more than free_workers.
std::vector<std::size_t> schedule(const std::vector<PendingExperiment>& queue,
                                  int free_workers);

struct HealRemedy {
  enum class Kind { requeue, abandon } kind = Kind::abandon;
  Configuration config;    // requeue only
  std::string annotation;  // requeue only
};

HealRemedy self_heal(const ExperimentRecord& record, FailureCategory category, int attempt,
                     int heal_max_retries, const ConfigurationSpace& space);

std::vector<const ExperimentRecord*> leaderboard(const History& history, int k);

// Runs the campaign loop until n_steps experiments complete (or the
// executed cap / pool exhaustion truncates it). `pool` is required when the
// roster contains pool policies.
History run_campaign(const ConfigurationSpace& space, Oracle& oracle,
                     const CampaignConfig& config,
                     const std::vector<ExperimentRecord>* pool = nullptr);

}  // namespace searchlab
