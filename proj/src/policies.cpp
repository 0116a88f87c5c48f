#include "searchlab/policies.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace searchlab {

namespace {

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string loss_summary_of(const ConfigurationSpace& space, const Configuration& config) {
  if (!space.find("loss") || !config.has("loss")) return "";
  std::string out = config.level("loss");
  if (config.has("focal_gamma") && space.find("focal_gamma"))
    out += " g=" + format_short(config.real("focal_gamma"));
  else if (config.has("smoothing_epsilon") && space.find("smoothing_epsilon"))
    out += " e=" + format_short(config.real("smoothing_epsilon"));
  return out;
}

bool record_executed(const ExperimentRecord& r) {
  return r.status == RecordStatus::completed || r.status == RecordStatus::failed;
}

// Standard normal pdf.
double phi(double z) { return std::exp(-0.5 * z * z) * 0.3989422804014327; }

struct CategoricalDensity {
  std::vector<double> probs;  // indexed by level, add-one smoothed
};

struct ContinuousDensity {
  std::vector<double> points;  // scaled to [0, 1]
  double bandwidth = 0.1;

  bool empty() const { return points.empty(); }
  double density(double z) const {
    if (points.empty()) return 1.0;  // uniform on [0, 1]
    double sum = 0.0;
    for (double p : points) sum += phi((z - p) / bandwidth);
    return sum / (static_cast<double>(points.size()) * bandwidth) + 1e-12;
  }
};

CategoricalDensity categorical_density(const DimensionSpec& dim,
                                       const std::vector<const Configuration*>& configs) {
  CategoricalDensity d;
  d.probs.assign(dim.levels.size(), 1.0);  // add-one smoothing
  double total = static_cast<double>(dim.levels.size());
  for (const auto* c : configs) {
    if (!c->has(dim.name)) continue;
    auto it = std::find(dim.levels.begin(), dim.levels.end(), c->level(dim.name));
    if (it == dim.levels.end()) continue;
    d.probs[static_cast<std::size_t>(it - dim.levels.begin())] += 1.0;
    total += 1.0;
  }
  for (auto& p : d.probs) p /= total;
  return d;
}

ContinuousDensity continuous_density(const ConfigurationSpace& space, const DimensionSpec& dim,
                                     const std::vector<const Configuration*>& configs,
                                     double bandwidth_factor) {
  ContinuousDensity d;
  for (const auto* c : configs)
    if (c->has(dim.name)) d.points.push_back(space.scaled(dim, c->real(dim.name)));
  if (d.points.empty()) return d;
  double mean = 0.0;
  for (double p : d.points) mean += p;
  mean /= static_cast<double>(d.points.size());
  double var = 0.0;
  for (double p : d.points) var += (p - mean) * (p - mean);
  var /= static_cast<double>(d.points.size());
  const double n = static_cast<double>(d.points.size());
  d.bandwidth = std::max(0.01, bandwidth_factor * std::sqrt(var) * std::pow(n, -0.2));
  return d;
}

struct TpeModel {
  std::map<std::string, CategoricalDensity> cat_good, cat_bad;
  std::map<std::string, ContinuousDensity> cont_good, cont_bad;
};

TpeModel build_tpe_model(const std::vector<const ExperimentRecord*>& completed,
                         const ConfigurationSpace& space, const TpeParams& params) {
  // Split at the gamma quantile: the top ceil(gamma * n) records are "good".
  std::vector<const ExperimentRecord*> sorted = completed;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ExperimentRecord* a, const ExperimentRecord* b) {
                     if (*a->ap != *b->ap) return *a->ap > *b->ap;
                     return a->id < b->id;
                   });
  const std::size_t n = sorted.size();
  std::size_t n_good = static_cast<std::size_t>(
      std::ceil(params.gamma_quantile * static_cast<double>(n)));
  n_good = std::max<std::size_t>(1, std::min(n_good, n));

  std::vector<const Configuration*> good, bad;
  for (std::size_t i = 0; i < n_good && good.size() < params.max_good_points; ++i)
    good.push_back(&sorted[i]->config);
  std::vector<const ExperimentRecord*> bad_records(sorted.begin() + static_cast<long>(n_good),
                                                   sorted.end());
  if (bad_records.size() > params.max_bad_points) {
    // Keep the most recent bad records.
    std::stable_sort(bad_records.begin(), bad_records.end(),
                     [](const ExperimentRecord* a, const ExperimentRecord* b) {
                       return a->id > b->id;
                     });
    bad_records.resize(params.max_bad_points);
  }
  for (const auto* r : bad_records) bad.push_back(&r->config);

  TpeModel model;
  for (const auto& dim : space.dimensions()) {
    if (dim.kind == DimKind::categorical) {
      model.cat_good[dim.name] = categorical_density(dim, good);
      model.cat_bad[dim.name] = categorical_density(dim, bad);
    } else {
      model.cont_good[dim.name] =
          continuous_density(space, dim, good, params.bandwidth_factor);
      model.cont_bad[dim.name] = continuous_density(space, dim, bad, params.bandwidth_factor);
    }
  }
  return model;
}

double tpe_score(const TpeModel& model, const ConfigurationSpace& space,
                 const Configuration& config) {
  double score = 0.0;
  for (const auto& dim : space.dimensions()) {
    if (!config.has(dim.name)) continue;
    if (dim.kind == DimKind::categorical) {
      const auto& g = model.cat_good.at(dim.name);
      const auto& b = model.cat_bad.at(dim.name);
      auto it = std::find(dim.levels.begin(), dim.levels.end(), config.level(dim.name));
      if (it == dim.levels.end()) continue;
      const auto idx = static_cast<std::size_t>(it - dim.levels.begin());
      score += std::log(g.probs[idx]) - std::log(b.probs[idx]);
    } else {
      const auto& g = model.cont_good.at(dim.name);
      const auto& b = model.cont_bad.at(dim.name);
      if (g.empty() && b.empty()) continue;
      const double z = space.scaled(dim, config.real(dim.name));
      score += std::log(g.density(z)) - std::log(b.density(z));
    }
  }
  return score;
}

Configuration sample_from_good(const TpeModel& model, const ConfigurationSpace& space,
                               Rng& rng) {
  Configuration config;
  auto sample_cat = [&](const DimensionSpec& dim) {
    const auto& g = model.cat_good.at(dim.name);
    double u = rng.uniform();
    std::size_t pick = dim.levels.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < g.probs.size(); ++i) {
      acc += g.probs[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    config.set(dim.name, dim.levels[pick]);
  };
  for (const auto& dim : space.dimensions())
    if (dim.kind == DimKind::categorical && !space.is_conditional(dim.name)) sample_cat(dim);
  for (const auto& dim : space.dimensions())
    if (dim.kind == DimKind::categorical && space.is_conditional(dim.name) &&
        space.dimension_active(dim.name, config))
      sample_cat(dim);
  for (const auto& dim : space.dimensions()) {
    if (dim.kind != DimKind::continuous || !space.dimension_active(dim.name, config)) continue;
    const auto& g = model.cont_good.at(dim.name);
    double z;
    if (g.empty()) {
      z = rng.uniform();
    } else {
      const double center = g.points[rng.below(g.points.size())];
      z = center + g.bandwidth * rng.normal();
      z = std::max(0.0, std::min(1.0, z));  // truncate at bounds
    }
    config.set(dim.name, space.unscaled(dim, z));
  }
  return config;
}

}  // namespace

PolicyContext build_context(const History& history, const ConfigurationSpace& space,
                            int leaderboard_k, int recent_window, int failure_window,
                            const std::vector<DiversityRule>& budget) {
  PolicyContext ctx;
  ctx.leaderboard_k = leaderboard_k;
  ctx.diversity_budget = budget;

  std::vector<const ExperimentRecord*> completed = history.completed();
  std::stable_sort(completed.begin(), completed.end(),
                   [](const ExperimentRecord* a, const ExperimentRecord* b) {
                     if (*a->ap != *b->ap) return *a->ap > *b->ap;
                     if (a->end_tick != b->end_tick) return a->end_tick < b->end_tick;
                     return a->id < b->id;
                   });
  const auto cats = space.categorical_dimensions();
  std::size_t backbone_pos = cats.size(), encoder_pos = cats.size();
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (cats[i]->name == "backbone") backbone_pos = i;
    if (cats[i]->name == "encoder") encoder_pos = i;
  }
  for (std::size_t i = 0; i < completed.size() && i < static_cast<std::size_t>(leaderboard_k);
       ++i) {
    const auto* r = completed[i];
    LeaderboardEntry e;
    e.rank = static_cast<int>(i + 1);
    e.ap = *r->ap;
    e.cell = cell_of(space, r->config);
    if (backbone_pos < cats.size()) e.backbone = e.cell.levels[backbone_pos];
    if (encoder_pos < cats.size()) e.encoder = e.cell.levels[encoder_pos];
    e.loss_summary = loss_summary_of(space, r->config);
    e.id = r->id;
    e.end_tick = r->end_tick;
    ctx.leaderboard.push_back(std::move(e));
  }

  // Trailing window over executed records (completion order).
  std::vector<const ExperimentRecord*> executed;
  for (const auto& r : history.records)
    if (record_executed(r)) executed.push_back(&r);
  const std::size_t w = std::min<std::size_t>(executed.size(),
                                              static_cast<std::size_t>(recent_window));
  for (const auto* d : cats) ctx.recent_distribution[d->name];
  for (std::size_t i = executed.size() - w; i < executed.size(); ++i) {
    for (const auto* d : cats) {
      if (executed[i]->config.has(d->name))
        ctx.recent_distribution[d->name][executed[i]->config.level(d->name)] += 1;
    }
  }

  for (auto it = history.records.rbegin(); it != history.records.rend(); ++it) {
    if (ctx.failure_summaries.size() >= static_cast<std::size_t>(failure_window)) break;
    if (it->status != RecordStatus::failed && it->status != RecordStatus::abandoned) continue;
    PolicyContext::FailureSummary fs;
    fs.id = it->id;
    fs.category = it->failure_category.value_or(FailureCategory::missing_file);
    auto violations = validate(space, it->config);
    if (violations.empty()) fs.cell = cell_of(space, it->config);
    ctx.failure_summaries.push_back(std::move(fs));
    ctx.banned.push_back(fingerprint(space, it->config));
  }
  return ctx;
}

std::optional<std::string> modal_level(const PolicyContext& context,
                                       const std::vector<Proposal>& proposals,
                                       const std::string& dimension) {
  auto best_of = [](const std::map<std::string, int>& counts) -> std::optional<std::string> {
    std::optional<std::string> best;
    int best_count = 0;
    for (const auto& [level, count] : counts) {
      if (count > best_count) {
        best = level;
        best_count = count;
      }
    }
    return best;
  };
  auto it = context.recent_distribution.find(dimension);
  if (it != context.recent_distribution.end()) {
    if (auto m = best_of(it->second)) return m;
  }
  std::map<std::string, int> counts;
  for (const auto& p : proposals)
    if (p.config.has(dimension) &&
        std::holds_alternative<std::string>(p.config.assignments.at(dimension)))
      counts[p.config.level(dimension)] += 1;
  return best_of(counts);
}

Proposal propose_random(const ConfigurationSpace& space, Rng& rng) {
  Proposal p;
  p.config = sample_uniform(space, rng);
  p.source = Source::random;
  p.priority = Priority::medium;
  return p;
}

Proposal propose_random_excluding(const ConfigurationSpace& space, Rng& rng,
                                  const std::string& dimension, const std::string& exclude) {
  const auto& dim = space.at(dimension);
  std::vector<std::string> allowed;
  for (const auto& level : dim.levels)
    if (level != exclude) allowed.push_back(level);
  Proposal p = propose_random(space, rng);
  if (!allowed.empty()) p.config.set(dimension, allowed[rng.below(allowed.size())]);
  return p;
}

Proposal propose_tpe(const std::vector<ExperimentRecord>& history,
                     const ConfigurationSpace& space, const TpeParams& params, Rng& rng) {
  std::vector<const ExperimentRecord*> completed;
  for (const auto& r : history)
    if (r.status == RecordStatus::completed && r.ap) completed.push_back(&r);

  if (completed.size() < static_cast<std::size_t>(params.min_history)) {
    Proposal p = propose_random(space, rng);
    p.source = Source::tpe;
    p.rationale = "tpe fallback (history below min_history)";
    return p;
  }

  const TpeModel model = build_tpe_model(completed, space, params);
  Proposal best;
  double best_score = -1e300;
  for (int i = 0; i < params.n_candidates; ++i) {
    Configuration candidate = sample_from_good(model, space, rng);
    const double score = tpe_score(model, space, candidate);
    if (score > best_score) {
      best_score = score;
      best.config = std::move(candidate);
    }
  }
  best.source = Source::tpe;
  best.priority = Priority::medium;
  return best;
}

PoolRandomSampler::PoolRandomSampler(const std::vector<ExperimentRecord>& pool,
                                     bool without_replacement)
    : pool_(&pool), without_replacement_(without_replacement) {
  // Abandoned entries never executed, so there is no outcome to replay.
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].status != RecordStatus::abandoned) remaining_.push_back(i);
}

Proposal PoolRandomSampler::next(Rng& rng) {
  if (remaining_.empty()) throw DataError("pool exhausted");
  const std::size_t pick = static_cast<std::size_t>(rng.below(remaining_.size()));
  const std::size_t index = remaining_[pick];
  if (without_replacement_) remaining_.erase(remaining_.begin() + static_cast<long>(pick));
  Proposal p;
  p.config = (*pool_)[index].config;
  p.source = Source::random;
  p.rationale = "pool replay of record " + std::to_string((*pool_)[index].id);
  return p;
}

PoolOracleSampler::PoolOracleSampler(const std::vector<ExperimentRecord>& pool) : pool_(&pool) {
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].status == RecordStatus::completed && pool[i].ap) order_.push_back(i);
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    if (*pool[a].ap != *pool[b].ap) return *pool[a].ap > *pool[b].ap;
    return a < b;  // ties by earliest record
  });
}

Proposal PoolOracleSampler::next() {
  if (pos_ >= order_.size()) throw DataError("pool exhausted");
  const auto& r = (*pool_)[order_[pos_++]];
  Proposal p;
  p.config = r.config;
  p.source = Source::oracle_policy;
  p.rationale = "oracle pick of record " + std::to_string(r.id);
  return p;
}

PoolTpeSampler::PoolTpeSampler(const std::vector<ExperimentRecord>& pool,
                               const ConfigurationSpace& space, TpeParams params)
    : pool_(&pool), space_(&space), params_(params), used_(pool.size(), false) {
  // Mask out abandoned entries; they carry no replayable outcome.
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].status == RecordStatus::abandoned) {
      used_[i] = true;
      ++used_count_;
    }
}

Proposal PoolTpeSampler::next(const std::vector<ExperimentRecord>& revealed, Rng& rng) {
  if (exhausted()) throw DataError("pool exhausted");
  std::vector<std::size_t> unused;
  for (std::size_t i = 0; i < used_.size(); ++i)
    if (!used_[i]) unused.push_back(i);

  std::vector<const ExperimentRecord*> completed;
  for (const auto& r : revealed)
    if (r.status == RecordStatus::completed && r.ap) completed.push_back(&r);

  std::size_t chosen;
  if (completed.size() < static_cast<std::size_t>(params_.min_history)) {
    chosen = unused[rng.below(unused.size())];
  } else {
    const TpeModel model = build_tpe_model(completed, *space_, params_);
    // Score a bounded random subset of the remaining entries.
    const std::size_t budget =
        std::min<std::size_t>(unused.size(), std::max<std::size_t>(params_.n_candidates, 64));
    rng.shuffle(unused);
    chosen = unused[0];
    double best_score = -1e300;
    for (std::size_t i = 0; i < budget; ++i) {
      const double s = tpe_score(model, *space_, (*pool_)[unused[i]].config);
      if (s > best_score) {
        best_score = s;
        chosen = unused[i];
      }
    }
  }
  used_[chosen] = true;
  ++used_count_;
  Proposal p;
  p.config = (*pool_)[chosen].config;
  p.source = Source::tpe;
  p.rationale = "pool tpe pick of record " + std::to_string((*pool_)[chosen].id);
  return p;
}

std::string encode_context(const PolicyContext& context, const ConfigurationSpace& space,
                           int n_ideas) {
  std::ostringstream out;
  out << "## Current Leaderboard (Top " << context.leaderboard_k << ")\n";
  out << "| Rank | AP | Backbone | Encoder | Loss |\n";
  out << "|------|----|----------|---------|------|\n";
  char ap_buf[32];
  for (const auto& e : context.leaderboard) {
    std::snprintf(ap_buf, sizeof(ap_buf), "%.4f", e.ap);
    out << "| " << e.rank << " | " << ap_buf << " | "
        << (e.backbone.empty() ? e.cell.to_string() : e.backbone) << " | "
        << (e.encoder.empty() ? "-" : e.encoder) << " | "
        << (e.loss_summary.empty() ? "-" : e.loss_summary) << " |\n";
  }

  out << "\n## Recent Distribution\n";
  for (const auto& [dim, counts] : context.recent_distribution) {
    out << "- " << dim << ":";
    if (counts.empty()) {
      out << " (none)";
    } else {
      std::vector<std::pair<std::string, int>> ordered(counts.begin(), counts.end());
      std::stable_sort(ordered.begin(), ordered.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      for (const auto& [level, count] : ordered) out << " " << level << "=" << count;
    }
    out << "\n";
  }

  out << "\n## Failure Log (last " << context.failure_summaries.size() << ")\n";
  if (context.failure_summaries.empty()) out << "- (none)\n";
  for (const auto& f : context.failure_summaries)
    out << "- experiment " << f.id << ": " << to_string(f.category) << " in cell "
        << f.cell.to_string() << "\n";

  out << "\n## Diversity Budget\n";
  for (const auto& rule : context.diversity_budget) {
    auto modal = modal_level(context, {}, rule.dimension);
    if (modal)
      out << "- At least " << rule.min_non_modal << " idea"
          << (rule.min_non_modal == 1 ? "" : "s") << " must use a non-" << *modal << " "
          << rule.dimension << "\n";
    else
      out << "- Vary " << rule.dimension << " across ideas\n";
  }
  out << "- Banned configs: [";
  for (std::size_t i = 0; i < context.banned.size(); ++i) {
    if (i) out << "; ";
    out << context.banned[i].key();
  }
  if (context.banned.empty()) out << "none";
  out << "]\n";

  out << "\n## Configuration Schema\n";
  for (const auto& d : space.dimensions()) {
    out << "- " << d.name << ": ";
    if (d.kind == DimKind::categorical) {
      out << "one of ";
      for (std::size_t i = 0; i < d.levels.size(); ++i) {
        if (i) out << ", ";
        out << d.levels[i];
      }
    } else {
      out << "real in [" << format_short(d.low) << ", " << format_short(d.high) << "] ("
          << to_string(d.scale) << " scale)";
    }
    if (auto g = space.guard(d.name))
      out << " (active when " << g->first << "=" << g->second << ")";
    out << "\n";
  }

  out << "\n## Task\nPropose " << n_ideas
      << " ideas as YAML configurations. Required keys: idea_name, backbone, "
         "temporal_encoder, loss, learning_rate, batch_size, seq_len, epochs.\n";
  return out.str();
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Raw key/value pairs of one idea, in document order.
using RawIdea = std::vector<std::pair<std::string, std::string>>;

std::vector<RawIdea> split_raw_ideas(const std::string& document) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : document) {
    if (c == '\n') {
      lines.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  if (!current.empty()) lines.push_back(current);

  std::vector<RawIdea> ideas;
  RawIdea* active = nullptr;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::string line = lines[li];
    std::string t = trim(line);
    if (t.empty() || t.rfind("```", 0) == 0 || t[0] == '#') continue;
    bool starts_item = t.rfind("- ", 0) == 0 || t == "-";
    if (starts_item) {
      ideas.emplace_back();
      active = &ideas.back();
      t = trim(t.substr(1));
      if (t.empty()) continue;
    }
    if (!active) continue;
    const std::size_t colon = t.find(':');
    if (colon == std::string::npos) continue;
    std::string key = trim(t.substr(0, colon));
    std::string value = trim(t.substr(colon + 1));
    if (!value.empty() && value[0] == '"') {
      // Quoted scalar, possibly spanning lines; folded with single spaces.
      std::string acc = value.substr(1);
      while (acc.empty() || acc.back() != '"') {
        if (++li >= lines.size()) break;
        std::string cont = trim(lines[li]);
        if (!acc.empty() && !cont.empty()) acc += ' ';
        acc += cont;
      }
      if (!acc.empty() && acc.back() == '"') acc.pop_back();
      value = acc;
    } else {
      const std::size_t hash = value.find(" #");
      if (hash != std::string::npos) value = trim(value.substr(0, hash));
    }
    active->emplace_back(std::move(key), std::move(value));
  }
  return ideas;
}

std::optional<std::string> resolve_level(const DimensionSpec& dim, const std::string& raw) {
  for (const auto& level : dim.levels)
    if (level == raw) return level;
  const std::string low_raw = lower(raw);
  std::vector<std::string> candidates;
  for (const auto& level : dim.levels) {
    const std::string low_level = lower(level);
    if (low_level == low_raw) return level;
    if (low_raw.rfind(low_level, 0) == 0 || low_level.rfind(low_raw, 0) == 0)
      candidates.push_back(level);
  }
  if (candidates.size() == 1) return candidates[0];
  return std::nullopt;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end && *end == '\0';
}

}  // namespace

IdeaParseResult parse_ideas(const std::string& idea_document, const ConfigurationSpace& space) {
  IdeaParseResult result;
  const auto raw_ideas = split_raw_ideas(idea_document);
  if (raw_ideas.empty()) {
    result.rejections.push_back("no ideas found in document");
    return result;
  }

  static const char* kRequiredDims[] = {"backbone",   "encoder",    "loss", "learning_rate",
                                        "batch_size", "seq_len", "epochs"};

  for (std::size_t idea_index = 0; idea_index < raw_ideas.size(); ++idea_index) {
    const auto& raw = raw_ideas[idea_index];
    Proposal p;
    p.source = Source::llm;
    std::string reject;

    auto fail = [&](const std::string& why) {
      if (reject.empty())
        reject = "idea " + std::to_string(idea_index + 1) + ": " + why;
    };

    for (const auto& [raw_key, raw_value] : raw) {
      std::string key = raw_key;
      if (key == "temporal_encoder" && !space.find("temporal_encoder") && space.find("encoder"))
        key = "encoder";
      if (key == "idea_name") {
        p.idea_name = raw_value;
        continue;
      }
      if (key == "priority") {
        auto pr = priority_from(lower(raw_value));
        if (pr)
          p.priority = *pr;
        else
          fail("unknown priority '" + raw_value + "'");
        continue;
      }
      if (key == "rationale") {
        p.rationale = raw_value;
        continue;
      }
      const auto* dim = space.find(key);
      if (!dim) continue;  // unknown keys tolerated for forward compatibility
      if (dim->kind == DimKind::categorical) {
        auto level = resolve_level(*dim, raw_value);
        if (!level) {
          fail("unknown level '" + raw_value + "' for " + key);
          continue;
        }
        p.config.set(key, *level);
      } else {
        double v = 0.0;
        if (!parse_number(raw_value, v)) {
          fail("value for '" + key + "' is not numeric");
          continue;
        }
        p.config.set(key, v);
      }
    }

    if (p.idea_name.empty()) fail("missing required key 'idea_name'");
    for (const char* req : kRequiredDims) {
      if (!space.find(req)) continue;
      if (!space.dimension_active(req, p.config)) continue;
      if (!p.config.has(req)) fail(std::string("missing required key '") + req + "'");
    }

    if (reject.empty()) {
      // Unspecified optional dimensions get deterministic defaults.
      for (const auto& d : space.dimensions()) {
        if (p.config.has(d.name) || !space.dimension_active(d.name, p.config)) continue;
        if (d.kind == DimKind::categorical)
          p.config.set(d.name, d.levels.front());
        else
          p.config.set(d.name, space.unscaled(d, 0.5));
      }
      auto violations = validate(space, p.config);
      if (!violations.empty()) fail(violations.front());
    }

    if (reject.empty())
      result.proposals.push_back(std::move(p));
    else
      result.rejections.push_back(reject);
  }
  return result;
}

std::string render_ideas(const std::vector<Proposal>& proposals,
                         const ConfigurationSpace& space) {
  std::ostringstream out;
  int counter = 0;
  for (const auto& p : proposals) {
    ++counter;
    std::string name = p.idea_name.empty() ? "idea-" + std::to_string(counter) : p.idea_name;
    out << "- idea_name: \"" << name << "\"\n";
    for (const auto& d : space.dimensions()) {
      if (!p.config.has(d.name)) continue;
      std::string key = d.name;
      if (key == "encoder" && !space.find("temporal_encoder")) key = "temporal_encoder";
      out << "  " << key << ": ";
      if (d.kind == DimKind::categorical)
        out << p.config.level(d.name);
      else
        out << format_value(p.config.real(d.name));
      out << "\n";
    }
    out << "  priority: " << to_string(p.priority) << "\n";
    if (!p.rationale.empty()) out << "  rationale: \"" << p.rationale << "\"\n";
  }
  return out.str();
}

EndpointConfig endpoint_from_env() {
  EndpointConfig cfg;
  if (const char* url = std::getenv("SEARCHLAB_ENDPOINT")) cfg.url = url;
  if (const char* token = std::getenv("SEARCHLAB_TOKEN")) cfg.auth_token = token;
  return cfg;
}

LlmProposeResult propose_llm(const std::string& context, const EndpointConfig& endpoint,
                             const ConfigurationSpace& space, int n_ideas, Rng& rng) {
  LlmProposeResult result;

  auto fallback = [&](const std::string& why) {
    Proposal p = propose_random(space, rng);
    p.rationale = "random fallback: " + why;
    result.proposals = {std::move(p)};
    result.fallback_used = true;
  };

  if (endpoint.url.empty()) {
    result.transport_error = "no endpoint configured";
    fallback(result.transport_error);
    return result;
  }

  // Split scheme://host:port and path.
  std::string base = endpoint.url, path = "/";
  const std::size_t scheme = base.find("://");
  const std::size_t path_start =
      base.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start != std::string::npos) {
    path = base.substr(path_start);
    base = base.substr(0, path_start);
  }

  nlohmann::json request = {{"context", context},
                            {"schema", space.to_json_text()},
                            {"n_ideas", n_ideas}};
  const std::string body = request.dump();

  std::string response_text;
  bool ok = false;
  for (int attempt = 0; attempt <= endpoint.max_retries && !ok; ++attempt) {
    httplib::Client client(base);
    client.set_connection_timeout(0, endpoint.timeout_ms * 1000);
    client.set_read_timeout(endpoint.timeout_ms / 1000, (endpoint.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!endpoint.auth_token.empty())
      headers.emplace("Authorization", "Bearer " + endpoint.auth_token);
    auto res = client.Post(path, headers, body, "application/json");
    if (res && res->status == 200) {
      response_text = res->body;
      ok = true;
    } else {
      result.transport_error =
          res ? "endpoint returned status " + std::to_string(res->status)
              : "transport error: " + httplib::to_string(res.error());
    }
  }

  if (!ok) {
    fallback(result.transport_error);
    return result;
  }

  IdeaParseResult parsed = parse_ideas(response_text, space);
  result.rejections = parsed.rejections;
  if (parsed.proposals.empty()) {
    fallback("no valid ideas in endpoint response");
    return result;
  }
  result.proposals = std::move(parsed.proposals);
  return result;
}

std::vector<Proposal> expand_sweep(const Proposal& base, const SweepSpec& spec,
                                   const ConfigurationSpace& space) {
  if (spec.grid.empty()) return {};
  for (const auto& [dim, values] : spec.grid) {
    if (!space.find(dim)) throw Error("sweep dimension '" + dim + "' not in space");
    if (values.empty()) throw Error("sweep dimension '" + dim + "' has no values");
  }

  std::vector<Proposal> children;
  std::vector<std::size_t> idx(spec.grid.size(), 0);
  while (true) {
    Proposal child;
    child.config = base.config;
    for (std::size_t i = 0; i < spec.grid.size(); ++i)
      child.config.assignments[spec.grid[i].first] = spec.grid[i].second[idx[i]];
    auto violations = validate(space, child.config);
    if (!violations.empty())
      throw Error("sweep produced invalid configuration: " + violations.front());
    child.source = Source::sweep;
    child.priority = base.priority;
    child.parent_id = base.parent_id;
    child.rationale = "sweep variant of base";
    children.push_back(std::move(child));

    bool done = true;
    for (std::size_t i = spec.grid.size(); i-- > 0;) {
      if (++idx[i] < spec.grid[i].second.size()) {
        done = false;
        break;
      }
      idx[i] = 0;
    }
    if (done) break;
  }
  return children;
}

}  // namespace searchlab
