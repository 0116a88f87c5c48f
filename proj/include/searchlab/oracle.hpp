#pragma once

// Evaluation oracle: a calibrated synthetic landscape (additive main
// effects + backbone x encoder interaction + concave quadratic responses
// per continuous dimension, clamped to [0, 1]) or a replay oracle over a
// recorded pool of (configuration, outcome) pairs.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "searchlab/record.hpp"
#include "searchlab/rng.hpp"
#include "searchlab/space.hpp"

namespace searchlab {

enum class EvalStatus { completed, failed };

struct EvalOutcome {
  EvalStatus status = EvalStatus::completed;
  double ap = 0.0;                                 // completed only
  std::optional<FailureCategory> failure_category; // failed only
  std::int64_t duration_ticks = 1;
};

// Concave quadratic in scaled coordinates: q(z) = -amplitude * (z - optimum)^2.
struct ContinuousResponse {
  double optimum = 0.5;
  double amplitude = 0.0;
};

struct LandscapeParams {
  std::string backbone_dimension = "backbone";
  std::string encoder_dimension = "encoder";
  std::map<std::string, double> backbone_effects;
  std::map<std::string, double> encoder_effects;
  std::map<std::string, double> interaction_effects;  // key "backbone|encoder"
  std::map<std::string, ContinuousResponse> continuous_response;
  double base_level = 0.62;
  double noise_sigma = 0.06;
  std::map<FailureCategory, double> failure_profile;
  std::int64_t duration_min = 3, duration_max = 10;

  std::string to_json_text() const;
  static LandscapeParams from_json_text(const std::string& text);
  static LandscapeParams from_file(const std::string& path);
  void save(const std::string& path) const;
};

// A landscape whose AP variance is dominated by the backbone x encoder
// choice, with exactly one backbone level strictly dominant.
LandscapeParams calibrate_default(const ConfigurationSpace& space, std::uint64_t seed);

// Noise-free landscape value for a valid configuration (clamped to [0, 1]).
double true_value(const LandscapeParams& params, const ConfigurationSpace& space,
                  const Configuration& config);

EvalOutcome evaluate(const LandscapeParams& params, const ConfigurationSpace& space,
                     const Configuration& config, Rng& rng);

// Exhaustive scan over discrete cells with each continuous response at its
// optimum; ties broken by canonical cell order.
std::pair<CellId, double> true_optimum(const LandscapeParams& params,
                                       const ConfigurationSpace& space,
                                       std::uint64_t enumeration_limit = 1000000);

// The backbone level with the largest main effect.
std::string dominant_backbone(const LandscapeParams& params);

class PoolMissError : public DataError {
 public:
  using DataError::DataError;
};

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual EvalOutcome run(const Configuration& config, Rng& rng) = 0;
  // Whether arbitrary fresh configurations can be evaluated.
  virtual bool generative() const = 0;
};

class SyntheticOracle final : public Oracle {
 public:
  SyntheticOracle(LandscapeParams params, const ConfigurationSpace& space)
      : params_(std::move(params)), space_(&space) {}

  EvalOutcome run(const Configuration& config, Rng& rng) override {
    return evaluate(params_, *space_, config, rng);
  }
  bool generative() const override { return true; }
  const LandscapeParams& params() const { return params_; }

 private:
  LandscapeParams params_;
  const ConfigurationSpace* space_;
};

// Returns recorded outcomes for configurations whose fingerprint exactly
// matches a pool record; anything else is a pool miss.
class ReplayOracle final : public Oracle {
 public:
  ReplayOracle(const std::vector<ExperimentRecord>& records, const ConfigurationSpace& space);

  EvalOutcome run(const Configuration& config, Rng& rng) override;
  bool generative() const override { return false; }
  std::size_t pool_size() const { return outcomes_.size(); }

 private:
  const ConfigurationSpace* space_;
  std::map<std::string, EvalOutcome> outcomes_;  // fingerprint key -> outcome
};

}  // namespace searchlab
