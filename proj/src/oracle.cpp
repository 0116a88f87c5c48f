#include "searchlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace searchlab {

namespace {

double clamp01(double v) { return std::max(0.0, std::min(1.0, v)); }

std::string pair_key(const std::string& a, const std::string& b) { return a + "|" + b; }

double effect_or_zero(const std::map<std::string, double>& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? 0.0 : it->second;
}

const FailureCategory kCategories[] = {FailureCategory::nan_loss, FailureCategory::oom,
                                       FailureCategory::missing_file};

}  // namespace

std::string LandscapeParams::to_json_text() const {
  nlohmann::ordered_json j;
  j["backbone_dimension"] = backbone_dimension;
  j["encoder_dimension"] = encoder_dimension;
  j["base_level"] = base_level;
  j["noise_sigma"] = noise_sigma;
  j["duration_min"] = duration_min;
  j["duration_max"] = duration_max;
  j["backbone_effects"] = backbone_effects;
  j["encoder_effects"] = encoder_effects;
  j["interaction_effects"] = interaction_effects;
  nlohmann::ordered_json jc;
  for (const auto& [dim, r] : continuous_response)
    jc[dim] = {{"optimum", r.optimum}, {"amplitude", r.amplitude}};
  j["continuous_response"] = jc;
  nlohmann::ordered_json jf;
  for (const auto& [cat, p] : failure_profile) jf[to_string(cat)] = p;
  j["failure_profile"] = jf;
  return j.dump(2);
}

LandscapeParams LandscapeParams::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("landscape parameters are not valid JSON: ") + e.what());
  }
  LandscapeParams p;
  p.backbone_dimension = j.value("backbone_dimension", std::string("backbone"));
  p.encoder_dimension = j.value("encoder_dimension", std::string("encoder"));
  p.base_level = j.value("base_level", 0.62);
  p.noise_sigma = j.value("noise_sigma", 0.06);
  p.duration_min = j.value("duration_min", std::int64_t{3});
  p.duration_max = j.value("duration_max", std::int64_t{10});
  if (p.noise_sigma < 0.0) throw DataError("noise_sigma must be nonnegative");
  if (j.contains("backbone_effects"))
    p.backbone_effects = j["backbone_effects"].get<std::map<std::string, double>>();
  if (j.contains("encoder_effects"))
    p.encoder_effects = j["encoder_effects"].get<std::map<std::string, double>>();
  if (j.contains("interaction_effects"))
    p.interaction_effects = j["interaction_effects"].get<std::map<std::string, double>>();
  if (j.contains("continuous_response"))
    for (const auto& [dim, jr] : j["continuous_response"].items())
      p.continuous_response[dim] = {jr.value("optimum", 0.5), jr.value("amplitude", 0.0)};
  double total = 0.0;
  if (j.contains("failure_profile")) {
    for (const auto& [name, jp] : j["failure_profile"].items()) {
      auto cat = failure_category_from(name);
      if (!cat) throw DataError("unknown failure category '" + name + "'");
      const double prob = jp.get<double>();
      if (prob < 0.0 || prob > 1.0) throw DataError("failure probability out of [0,1]");
      p.failure_profile[*cat] = prob;
      total += prob;
    }
  }
  if (total > 1.0) throw DataError("failure probabilities sum to more than 1");
  return p;
}

LandscapeParams LandscapeParams::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open landscape file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void LandscapeParams::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write landscape file '" + path + "'");
  out << to_json_text() << "\n";
}

LandscapeParams calibrate_default(const ConfigurationSpace& space, std::uint64_t seed) {
  LandscapeParams p;
  const auto* backbone = space.find(p.backbone_dimension);
  const auto* encoder = space.find(p.encoder_dimension);
  if (!backbone || backbone->kind != DimKind::categorical || !encoder ||
      encoder->kind != DimKind::categorical)
    throw Error("calibrate_default requires categorical 'backbone' and 'encoder' dimensions");

  Rng rng = Rng::stream(seed, 0x1a5d);

  // Fixed effect spreads assigned to seed-shuffled levels. The backbone
  // spread dominates everything else, and the top-vs-second margin (0.45 /
  // (L-1)) exceeds twice the interaction range, so exactly one backbone is
  // strictly dominant in cell-optimal value.
  auto spread = [](std::size_t n, double top, double span) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
      v[i] = top - (n == 1 ? 0.0 : span * static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
  };

  std::vector<std::string> backbone_levels = backbone->levels;
  rng.shuffle(backbone_levels);
  const auto backbone_spread = spread(backbone_levels.size(), 0.20, 0.45);
  for (std::size_t i = 0; i < backbone_levels.size(); ++i)
    p.backbone_effects[backbone_levels[i]] = backbone_spread[i];

  std::vector<std::string> encoder_levels = encoder->levels;
  rng.shuffle(encoder_levels);
  const auto encoder_spread = spread(encoder_levels.size(), 0.03, 0.06);
  for (std::size_t i = 0; i < encoder_levels.size(); ++i)
    p.encoder_effects[encoder_levels[i]] = encoder_spread[i];

  for (const auto& b : backbone->levels)
    for (const auto& e : encoder->levels)
      p.interaction_effects[pair_key(b, e)] = rng.uniform(-0.01, 0.01);

  for (const auto* d : space.continuous_dimensions())
    p.continuous_response[d->name] = {rng.uniform(0.2, 0.8), rng.uniform(0.02, 0.07)};

  p.base_level = 0.62;
  p.noise_sigma = 0.06;
  p.failure_profile = {{FailureCategory::nan_loss, 0.02},
                       {FailureCategory::oom, 0.02},
                       {FailureCategory::missing_file, 0.02}};
  return p;
}

double true_value(const LandscapeParams& params, const ConfigurationSpace& space,
                  const Configuration& config) {
  double v = params.base_level;
  if (config.has(params.backbone_dimension))
    v += effect_or_zero(params.backbone_effects, config.level(params.backbone_dimension));
  if (config.has(params.encoder_dimension))
    v += effect_or_zero(params.encoder_effects, config.level(params.encoder_dimension));
  if (config.has(params.backbone_dimension) && config.has(params.encoder_dimension))
    v += effect_or_zero(params.interaction_effects,
                        pair_key(config.level(params.backbone_dimension),
                                 config.level(params.encoder_dimension)));
  for (const auto& [dim, response] : params.continuous_response) {
    const auto* d = space.find(dim);
    if (!d || d->kind != DimKind::continuous) continue;
    if (!config.has(dim)) continue;  // inactive conditional dims contribute nothing
    const double z = space.scaled(*d, config.real(dim));
    const double dz = z - response.optimum;
    v -= response.amplitude * dz * dz;
  }
  return clamp01(v);
}

EvalOutcome evaluate(const LandscapeParams& params, const ConfigurationSpace& space,
                     const Configuration& config, Rng& rng) {
  EvalOutcome out;
  // Fixed draw order: failure, duration, observation noise.
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::optional<FailureCategory> hit;
  for (const auto cat : kCategories) {
    auto it = params.failure_profile.find(cat);
    if (it == params.failure_profile.end()) continue;
    cumulative += it->second;
    if (u < cumulative) {
      hit = cat;
      break;
    }
  }
  out.duration_ticks = rng.uniform_int(params.duration_min, params.duration_max);
  if (hit) {
    out.status = EvalStatus::failed;
    out.failure_category = hit;
    return out;
  }
  double v = true_value(params, space, config);
  if (params.noise_sigma > 0.0) v = clamp01(v + rng.normal(0.0, params.noise_sigma));
  out.status = EvalStatus::completed;
  out.ap = v;
  return out;
}

std::pair<CellId, double> true_optimum(const LandscapeParams& params,
                                       const ConfigurationSpace& space,
                                       std::uint64_t enumeration_limit) {
  const auto cats = space.categorical_dimensions();
  std::size_t backbone_idx = cats.size(), encoder_idx = cats.size();
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (cats[i]->name == params.backbone_dimension) backbone_idx = i;
    if (cats[i]->name == params.encoder_dimension) encoder_idx = i;
  }
  const auto cells = enumerate_cells(space, enumeration_limit);
  if (cells.empty()) throw Error("space has no discrete cells");

  CellId best_cell;
  double best = -1.0;
  for (const auto& cell : cells) {
    double v = params.base_level;
    if (backbone_idx < cats.size())
      v += effect_or_zero(params.backbone_effects, cell.levels[backbone_idx]);
    if (encoder_idx < cats.size())
      v += effect_or_zero(params.encoder_effects, cell.levels[encoder_idx]);
    if (backbone_idx < cats.size() && encoder_idx < cats.size())
      v += effect_or_zero(params.interaction_effects,
                          pair_key(cell.levels[backbone_idx], cell.levels[encoder_idx]));
    // Continuous responses reach 0 at their optimum, so they drop out.
    v = clamp01(v);
    if (v > best) {
      best = v;
      best_cell = cell;
    }
  }
  return {best_cell, best};
}

std::string dominant_backbone(const LandscapeParams& params) {
  std::string best_level;
  double best = -1e300;
  for (const auto& [level, effect] : params.backbone_effects) {
    if (effect > best) {
      best = effect;
      best_level = level;
    }
  }
  return best_level;
}

ReplayOracle::ReplayOracle(const std::vector<ExperimentRecord>& records,
                           const ConfigurationSpace& space)
    : space_(&space) {
  for (const auto& r : records) {
    EvalOutcome out;
    out.duration_ticks = std::max<std::int64_t>(0, r.end_tick - r.start_tick);
    if (r.status == RecordStatus::completed && r.ap) {
      out.status = EvalStatus::completed;
      out.ap = *r.ap;
    } else if (r.status == RecordStatus::failed) {
      out.status = EvalStatus::failed;
      out.failure_category = r.failure_category;
    } else {
      continue;  // abandoned entries never executed
    }
    outcomes_.emplace(fingerprint(*space_, r.config).key(), out);
  }
}

EvalOutcome ReplayOracle::run(const Configuration& config, Rng&) {
  auto it = outcomes_.find(fingerprint(*space_, config).key());
  if (it == outcomes_.end()) throw PoolMissError("config not in pool");
  return it->second;
}

}  // namespace searchlab
