#pragma once

// Search policies: generative (uniform random, TPE, external LLM endpoint,
// sweep expansion) and pool-based replay variants, plus the history-context
// encoding and idea-document interchange used by the LLM policy.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "searchlab/oracle.hpp"
#include "searchlab/record.hpp"
#include "searchlab/rng.hpp"
#include "searchlab/space.hpp"

namespace searchlab {

struct Proposal {
  Configuration config;
  Priority priority = Priority::medium;
  std::string rationale;
  Source source = Source::random;
  std::optional<std::int64_t> parent_id;
  std::string idea_name;
};

struct LeaderboardEntry {
  int rank = 0;
  double ap = 0.0;
  CellId cell;
  std::string backbone, encoder;  // empty when the space lacks those dims
  std::string loss_summary;       // e.g. "focal g=3.0"
  std::int64_t id = 0;
  std::int64_t end_tick = 0;
};

struct DiversityRule {
  std::string dimension;
  int min_non_modal = 1;
};

struct PolicyContext {
  std::vector<LeaderboardEntry> leaderboard;
  // dimension -> level -> count over a trailing window of executed records.
  std::map<std::string, std::map<std::string, int>> recent_distribution;
  struct FailureSummary {
    std::int64_t id = 0;
    FailureCategory category = FailureCategory::nan_loss;
    CellId cell;
  };
  std::vector<FailureSummary> failure_summaries;
  std::vector<DiversityRule> diversity_budget;
  std::vector<Fingerprint> banned;
  int leaderboard_k = 5;
};

PolicyContext build_context(const History& history, const ConfigurationSpace& space,
                            int leaderboard_k, int recent_window, int failure_window,
                            const std::vector<DiversityRule>& budget);

// Most frequent level of `dimension` in the context's trailing window;
// falls back to the given proposals when the window is empty.
std::optional<std::string> modal_level(const PolicyContext& context,
                                       const std::vector<Proposal>& proposals,
                                       const std::string& dimension);

struct TpeParams {
  double gamma_quantile = 0.25;
  int n_candidates = 24;
  int min_history = 10;
  double bandwidth_factor = 1.06;  // Silverman: factor * sd * n^(-1/5)
  // Density sources are capped for O(1) proposal cost on long campaigns.
  std::size_t max_good_points = 500;
  std::size_t max_bad_points = 1000;
};

Proposal propose_random(const ConfigurationSpace& space, Rng& rng);

// propose_random with one categorical dimension forced away from `exclude`.
Proposal propose_random_excluding(const ConfigurationSpace& space, Rng& rng,
                                  const std::string& dimension, const std::string& exclude);

Proposal propose_tpe(const std::vector<ExperimentRecord>& history,
                     const ConfigurationSpace& space, const TpeParams& params, Rng& rng);

// Pool policies replay already-evaluated configurations.
class PoolRandomSampler {
 public:
  PoolRandomSampler(const std::vector<ExperimentRecord>& pool, bool without_replacement);
  Proposal next(Rng& rng);
  bool exhausted() const { return without_replacement_ && remaining_.empty(); }

 private:
  const std::vector<ExperimentRecord>* pool_;
  std::vector<std::size_t> remaining_;
  bool without_replacement_;
};

class PoolOracleSampler {
 public:
  explicit PoolOracleSampler(const std::vector<ExperimentRecord>& pool);
  Proposal next();
  bool exhausted() const { return pos_ >= order_.size(); }

 private:
  const std::vector<ExperimentRecord>* pool_;
  std::vector<std::size_t> order_;  // indices sorted by ap desc, earlier record first
  std::size_t pos_ = 0;
};

// Scores the remaining pool entries by TPE density ratio built from the
// outcomes revealed so far; uniform below min_history.
class PoolTpeSampler {
 public:
  PoolTpeSampler(const std::vector<ExperimentRecord>& pool, const ConfigurationSpace& space,
                 TpeParams params);
  Proposal next(const std::vector<ExperimentRecord>& revealed, Rng& rng);
  bool exhausted() const { return used_count_ >= pool_->size(); }

 private:
  const std::vector<ExperimentRecord>* pool_;
  const ConfigurationSpace* space_;
  TpeParams params_;
  std::vector<bool> used_;
  std::size_t used_count_ = 0;
};

// History-context text in the leaderboard / distribution / failures /
// diversity-budget / schema layout consumed by the external policy.
std::string encode_context(const PolicyContext& context, const ConfigurationSpace& space,
                           int n_ideas);

struct IdeaParseResult {
  std::vector<Proposal> proposals;
  std::vector<std::string> rejections;  // one reason per rejected idea
};

// Parses the idea interchange document (YAML-style list of flat mappings).
// Ideas failing validation are reported in `rejections`, not thrown.
IdeaParseResult parse_ideas(const std::string& idea_document, const ConfigurationSpace& space);

// Renders proposals into the idea interchange format; parse_ideas of the
// result yields equal configurations.
std::string render_ideas(const std::vector<Proposal>& proposals,
                         const ConfigurationSpace& space);

struct EndpointConfig {
  std::string url;        // e.g. http://127.0.0.1:8080/propose
  std::string auth_token; // sent as a bearer token when non-empty
  int timeout_ms = 30000;
  int max_retries = 2;
};

// Reads SEARCHLAB_ENDPOINT / SEARCHLAB_TOKEN.
EndpointConfig endpoint_from_env();

struct LlmProposeResult {
  std::vector<Proposal> proposals;
  std::vector<std::string> rejections;
  bool fallback_used = false;
  std::string transport_error;
};

// Sends {context, schema, n_ideas} to the external policy endpoint and
// parses the response document. On transport failure or zero valid ideas,
// returns a single random proposal (source = random) as fallback.
LlmProposeResult propose_llm(const std::string& context, const EndpointConfig& endpoint,
                             const ConfigurationSpace& space, int n_ideas, Rng& rng);

struct SweepSpec {
  // Dimension name -> list of values; expansion is the cartesian product.
  std::vector<std::pair<std::string, std::vector<ConfigValue>>> grid;
};

std::vector<Proposal> expand_sweep(const Proposal& base, const SweepSpec& spec,
                                   const ConfigurationSpace& space);

}  // namespace searchlab
