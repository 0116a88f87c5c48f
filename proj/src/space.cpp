#include "searchlab/space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace searchlab {

namespace {

constexpr int kFingerprintBuckets = 16;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

const char* to_string(Subspace s) {
  switch (s) {
    case Subspace::arch: return "arch";
    case Subspace::loss: return "loss";
    case Subspace::train: return "train";
    case Subspace::data: return "data";
  }
  return "?";
}

const char* to_string(Scale s) {
  return s == Scale::logarithmic ? "logarithmic" : "linear";
}

std::string to_display(const ConfigValue& v) {
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  return format_short(std::get<double>(v));
}

const std::string& Configuration::level(const std::string& dim) const {
  auto it = assignments.find(dim);
  if (it == assignments.end() || !std::holds_alternative<std::string>(it->second))
    throw Error("no categorical assignment for dimension '" + dim + "'");
  return std::get<std::string>(it->second);
}

double Configuration::real(const std::string& dim) const {
  auto it = assignments.find(dim);
  if (it == assignments.end() || !std::holds_alternative<double>(it->second))
    throw Error("no continuous assignment for dimension '" + dim + "'");
  return std::get<double>(it->second);
}

std::string CellId::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += '|';
    out += levels[i];
  }
  return out;
}

std::string Fingerprint::key() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ';';
    out += tokens[i];
  }
  return out;
}

double jaccard(const Fingerprint& a, const Fingerprint& b) {
  if (a.token_hashes.empty() && b.token_hashes.empty()) return 1.0;
  std::size_t i = 0, j = 0, both = 0;
  while (i < a.token_hashes.size() && j < b.token_hashes.size()) {
    if (a.token_hashes[i] == b.token_hashes[j]) {
      ++both;
      ++i;
      ++j;
    } else if (a.token_hashes[i] < b.token_hashes[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.token_hashes.size() + b.token_hashes.size() - both;
  return static_cast<double>(both) / static_cast<double>(uni);
}

ConfigurationSpace::ConfigurationSpace(std::vector<DimensionSpec> dims,
                                       std::vector<ConditionalRule> rules)
    : dims_(std::move(dims)), rules_(std::move(rules)) {
  build_index();
}

void ConfigurationSpace::build_index() {
  index_.clear();
  guard_of_.clear();
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (index_.count(d.name))
      throw SchemaError("duplicate dimension name '" + d.name + "'");
    if (d.kind == DimKind::categorical) {
      if (d.levels.empty())
        throw SchemaError("empty level list for dimension '" + d.name + "'");
      std::set<std::string> seen(d.levels.begin(), d.levels.end());
      if (seen.size() != d.levels.size())
        throw SchemaError("duplicate level in dimension '" + d.name + "'");
    } else {
      if (!(d.low < d.high))
        throw SchemaError("inverted bounds for dimension '" + d.name + "'");
      if (d.scale == Scale::logarithmic && d.low <= 0.0)
        throw SchemaError("logarithmic scale requires positive bounds for dimension '" +
                          d.name + "'");
    }
    index_[d.name] = i;
  }
  for (const auto& rule : rules_) {
    auto git = index_.find(rule.guard_dimension);
    if (git == index_.end())
      throw SchemaError("conditional rule references unknown dimension '" +
                        rule.guard_dimension + "'");
    const auto& gdim = dims_[git->second];
    if (gdim.kind != DimKind::categorical)
      throw SchemaError("conditional guard dimension '" + rule.guard_dimension +
                        "' must be categorical");
    if (std::find(gdim.levels.begin(), gdim.levels.end(), rule.guard_level) ==
        gdim.levels.end())
      throw SchemaError("conditional rule references unknown level '" + rule.guard_level +
                        "' of dimension '" + rule.guard_dimension + "'");
    for (const auto& target : rule.activates) {
      if (!index_.count(target))
        throw SchemaError("conditional rule activates unknown dimension '" + target + "'");
      if (target == rule.guard_dimension)
        throw SchemaError("conditional rule cannot activate its own guard '" + target + "'");
      if (guard_of_.count(target))
        throw SchemaError("dimension '" + target + "' activated by more than one rule");
      guard_of_[target] = {rule.guard_dimension, rule.guard_level};
    }
  }
  for (const auto& [dim, g] : guard_of_) {
    if (guard_of_.count(g.first))
      throw SchemaError("guard dimension '" + g.first + "' may not itself be conditional");
    (void)dim;
  }
}

const DimensionSpec* ConfigurationSpace::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &dims_[it->second];
}

const DimensionSpec& ConfigurationSpace::at(const std::string& name) const {
  const auto* d = find(name);
  if (!d) throw Error("unknown dimension '" + name + "'");
  return *d;
}

std::optional<std::pair<std::string, std::string>> ConfigurationSpace::guard(
    const std::string& name) const {
  auto it = guard_of_.find(name);
  if (it == guard_of_.end()) return std::nullopt;
  return it->second;
}

bool ConfigurationSpace::dimension_active(const std::string& name,
                                          const Configuration& config) const {
  auto it = guard_of_.find(name);
  if (it == guard_of_.end()) return true;
  const auto& [gdim, glevel] = it->second;
  return config.has(gdim) &&
         std::holds_alternative<std::string>(config.assignments.at(gdim)) &&
         config.level(gdim) == glevel;
}

std::vector<const DimensionSpec*> ConfigurationSpace::categorical_dimensions() const {
  std::vector<const DimensionSpec*> out;
  for (const auto& d : dims_)
    if (d.kind == DimKind::categorical) out.push_back(&d);
  return out;
}

std::vector<const DimensionSpec*> ConfigurationSpace::continuous_dimensions() const {
  std::vector<const DimensionSpec*> out;
  for (const auto& d : dims_)
    if (d.kind == DimKind::continuous) out.push_back(&d);
  return out;
}

double ConfigurationSpace::scaled(const DimensionSpec& dim, double x) const {
  if (dim.scale == Scale::logarithmic)
    return (std::log(x) - std::log(dim.low)) / (std::log(dim.high) - std::log(dim.low));
  return (x - dim.low) / (dim.high - dim.low);
}

double ConfigurationSpace::unscaled(const DimensionSpec& dim, double z) const {
  double x;
  if (dim.scale == Scale::logarithmic)
    x = std::exp(std::log(dim.low) + z * (std::log(dim.high) - std::log(dim.low)));
  else
    x = dim.low + z * (dim.high - dim.low);
  // exp/log round trips can land a hair outside the interval.
  return std::max(dim.low, std::min(dim.high, x));
}

ConfigurationSpace ConfigurationSpace::from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("space schema is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("dimensions") || !doc["dimensions"].is_array())
    throw SchemaError("space schema must be an object with a 'dimensions' array");

  std::vector<DimensionSpec> dims;
  for (const auto& jd : doc["dimensions"]) {
    DimensionSpec d;
    if (!jd.contains("name") || !jd["name"].is_string())
      throw SchemaError("dimension without a name");
    d.name = jd["name"].get<std::string>();
    const std::string kind = jd.value("kind", "categorical");
    if (kind == "categorical") {
      d.kind = DimKind::categorical;
      if (jd.contains("levels"))
        for (const auto& lv : jd["levels"]) {
          if (lv.is_string())
            d.levels.push_back(lv.get<std::string>());
          else
            d.levels.push_back(format_short(lv.get<double>()));
        }
    } else if (kind == "continuous") {
      d.kind = DimKind::continuous;
      if (!jd.contains("bounds") || !jd["bounds"].is_array() || jd["bounds"].size() != 2)
        throw SchemaError("continuous dimension '" + d.name + "' needs bounds [low, high]");
      d.low = jd["bounds"][0].get<double>();
      d.high = jd["bounds"][1].get<double>();
      const std::string scale = jd.value("scale", "linear");
      if (scale == "logarithmic" || scale == "log")
        d.scale = Scale::logarithmic;
      else if (scale == "linear")
        d.scale = Scale::linear;
      else
        throw SchemaError("unknown scale '" + scale + "' for dimension '" + d.name + "'");
    } else {
      throw SchemaError("unknown kind '" + kind + "' for dimension '" + d.name + "'");
    }
    const std::string sub = jd.value("subspace", "train");
    if (sub == "arch")
      d.subspace = Subspace::arch;
    else if (sub == "loss")
      d.subspace = Subspace::loss;
    else if (sub == "train")
      d.subspace = Subspace::train;
    else if (sub == "data")
      d.subspace = Subspace::data;
    else
      throw SchemaError("unknown subspace '" + sub + "' for dimension '" + d.name + "'");
    dims.push_back(std::move(d));
  }

  std::vector<ConditionalRule> rules;
  if (doc.contains("conditional_rules")) {
    for (const auto& jr : doc["conditional_rules"]) {
      ConditionalRule r;
      r.guard_dimension = jr.at("when").at("dimension").get<std::string>();
      r.guard_level = jr.at("when").at("level").get<std::string>();
      for (const auto& a : jr.at("activates")) r.activates.push_back(a.get<std::string>());
      rules.push_back(std::move(r));
    }
  }
  return ConfigurationSpace(std::move(dims), std::move(rules));
}

ConfigurationSpace ConfigurationSpace::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open space schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ConfigurationSpace::to_json_text() const {
  std::string out = "{\"dimensions\":[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    if (i) out += ',';
    out += "{\"name\":\"" + d.name + "\",";
    if (d.kind == DimKind::categorical) {
      out += "\"kind\":\"categorical\",\"levels\":[";
      for (std::size_t j = 0; j < d.levels.size(); ++j) {
        if (j) out += ',';
        out += '"' + d.levels[j] + '"';
      }
      out += "],";
    } else {
      out += "\"kind\":\"continuous\",\"bounds\":[" + format_real(d.low) + "," +
             format_real(d.high) + "],\"scale\":\"" + to_string(d.scale) + "\",";
    }
    out += std::string("\"subspace\":\"") + to_string(d.subspace) + "\"}";
  }
  out += "],\"conditional_rules\":[";
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    if (i) out += ',';
    out += "{\"when\":{\"dimension\":\"" + r.guard_dimension + "\",\"level\":\"" +
           r.guard_level + "\"},\"activates\":[";
    for (std::size_t j = 0; j < r.activates.size(); ++j) {
      if (j) out += ',';
      out += '"' + r.activates[j] + '"';
    }
    out += "]}";
  }
  out += "]}";
  return out;
}

std::uint64_t ConfigurationSpace::schema_hash() const {
  const std::string text = to_json_text();
  return fnv1a64(text.data(), text.size());
}

const std::string& ConfigurationSpace::default_space_text() {
  static const std::string text = R"json({
  "name": "default_space",
  "dimensions": [
    {"name": "backbone", "kind": "categorical", "subspace": "arch",
     "levels": ["vjepa2", "dinov3_b", "dinov3_l", "dinov2_b", "siglip2", "convnext"]},
    {"name": "encoder", "kind": "categorical", "subspace": "arch",
     "levels": ["zipformer", "retnet", "bimamba", "hybrid", "xlstm"]},
    {"name": "pooling", "kind": "categorical", "subspace": "arch",
     "levels": ["attention", "mean", "last", "max"]},
    {"name": "loss", "kind": "categorical", "subspace": "loss",
     "levels": ["focal", "bce", "label_smoothing"]},
    {"name": "batch_size", "kind": "categorical", "subspace": "train",
     "levels": ["16", "32", "64", "128"]},
    {"name": "scheduler", "kind": "categorical", "subspace": "train",
     "levels": ["cosine", "linear", "step"]},
    {"name": "seq_len", "kind": "categorical", "subspace": "train",
     "levels": ["10", "15", "20", "25", "30"]},
    {"name": "epochs", "kind": "categorical", "subspace": "train",
     "levels": ["5", "10", "15", "20", "30"]},
    {"name": "focal_gamma", "kind": "continuous", "subspace": "loss",
     "bounds": [0.5, 5.0], "scale": "linear"},
    {"name": "focal_alpha", "kind": "continuous", "subspace": "loss",
     "bounds": [0.1, 0.9], "scale": "linear"},
    {"name": "smoothing_epsilon", "kind": "continuous", "subspace": "loss",
     "bounds": [0.01, 0.3], "scale": "linear"},
    {"name": "learning_rate", "kind": "continuous", "subspace": "train",
     "bounds": [1e-5, 1e-2], "scale": "logarithmic"},
    {"name": "weight_decay", "kind": "continuous", "subspace": "train",
     "bounds": [1e-5, 0.1], "scale": "logarithmic"},
    {"name": "oversampling_ratio", "kind": "continuous", "subspace": "data",
     "bounds": [1.0, 10.0], "scale": "linear"},
    {"name": "mixup_alpha", "kind": "continuous", "subspace": "data",
     "bounds": [0.0, 0.4], "scale": "linear"},
    {"name": "feature_noise", "kind": "continuous", "subspace": "data",
     "bounds": [0.0, 0.1], "scale": "linear"}
  ],
  "conditional_rules": [
    {"when": {"dimension": "loss", "level": "focal"},
     "activates": ["focal_gamma", "focal_alpha"]},
    {"when": {"dimension": "loss", "level": "label_smoothing"},
     "activates": ["smoothing_epsilon"]}
  ]
}
)json";
  return text;
}

const ConfigurationSpace& ConfigurationSpace::default_space() {
  static const ConfigurationSpace space = from_json_text(default_space_text());
  return space;
}

ConfigurationSpace define_space(const std::string& schema_document) {
  return ConfigurationSpace::from_json_text(schema_document);
}

std::uint64_t discrete_cardinality(const ConfigurationSpace& space) {
  std::uint64_t product = 1;
  for (const auto* d : space.categorical_dimensions()) {
    const std::uint64_t n = d->levels.size();
    if (product > UINT64_MAX / n) throw SchemaError("discrete cardinality overflows");
    product *= n;
  }
  return product;
}

Configuration sample_uniform(const ConfigurationSpace& space, Rng& rng) {
  Configuration config;
  // Categorical dims first so conditional guards are resolved.
  for (const auto& d : space.dimensions()) {
    if (d.kind != DimKind::categorical) continue;
    if (!space.is_conditional(d.name)) {
      config.set(d.name, d.levels[rng.below(d.levels.size())]);
    }
  }
  for (const auto& d : space.dimensions()) {
    if (d.kind != DimKind::categorical || !space.is_conditional(d.name)) continue;
    if (space.dimension_active(d.name, config))
      config.set(d.name, d.levels[rng.below(d.levels.size())]);
  }
  for (const auto& d : space.dimensions()) {
    if (d.kind != DimKind::continuous) continue;
    if (!space.dimension_active(d.name, config)) continue;
    const double x = d.scale == Scale::logarithmic ? rng.log_uniform(d.low, d.high)
                                                   : rng.uniform(d.low, d.high);
    config.set(d.name, std::max(d.low, std::min(d.high, x)));
  }
  return config;
}

std::vector<std::string> validate(const ConfigurationSpace& space,
                                  const Configuration& config) {
  std::vector<std::string> violations;
  for (const auto& [name, value] : config.assignments) {
    const auto* d = space.find(name);
    if (!d) {
      violations.push_back("unknown dimension '" + name + "'");
      continue;
    }
    if (!space.dimension_active(name, config)) {
      violations.push_back("inactive dimension assigned: '" + name + "'");
      continue;
    }
    if (d->kind == DimKind::categorical) {
      if (!std::holds_alternative<std::string>(value)) {
        violations.push_back("dimension '" + name + "' expects a level name");
        continue;
      }
      const auto& level = std::get<std::string>(value);
      if (std::find(d->levels.begin(), d->levels.end(), level) == d->levels.end())
        violations.push_back("unknown level '" + level + "' for dimension '" + name + "'");
    } else {
      if (!std::holds_alternative<double>(value)) {
        violations.push_back("dimension '" + name + "' expects a real value");
        continue;
      }
      const double x = std::get<double>(value);
      if (!(x >= d->low && x <= d->high))
        violations.push_back("value " + format_short(x) + " out of bounds [" +
                             format_short(d->low) + ", " + format_short(d->high) +
                             "] for dimension '" + name + "'");
    }
  }
  for (const auto& d : space.dimensions()) {
    if (space.dimension_active(d.name, config) && !config.has(d.name))
      violations.push_back("missing assignment for dimension '" + d.name + "'");
  }
  return violations;
}

CellId cell_of(const ConfigurationSpace& space, const Configuration& config) {
  auto violations = validate(space, config);
  if (!violations.empty())
    throw Error("invalid configuration: " + violations.front());
  CellId cell;
  for (const auto* d : space.categorical_dimensions()) cell.levels.push_back(config.level(d->name));
  return cell;
}

Fingerprint fingerprint(const ConfigurationSpace& space, const Configuration& config) {
  Fingerprint fp;
  for (const auto& [name, value] : config.assignments) {
    const auto* d = space.find(name);
    if (!d) continue;
    std::string token;
    if (d->kind == DimKind::categorical) {
      token = name + "=" + std::get<std::string>(value);
    } else {
      const double z = space.scaled(*d, std::get<double>(value));
      int bucket = static_cast<int>(z * kFingerprintBuckets);
      bucket = std::max(0, std::min(kFingerprintBuckets - 1, bucket));
      token = name + "#" + std::to_string(bucket);
    }
    fp.tokens.push_back(std::move(token));
  }
  std::sort(fp.tokens.begin(), fp.tokens.end());
  fp.tokens.erase(std::unique(fp.tokens.begin(), fp.tokens.end()), fp.tokens.end());
  fp.token_hashes.reserve(fp.tokens.size());
  for (const auto& t : fp.tokens) fp.token_hashes.push_back(fnv1a64(t.data(), t.size()));
  std::sort(fp.token_hashes.begin(), fp.token_hashes.end());
  return fp;
}

std::vector<CellId> enumerate_cells(const ConfigurationSpace& space, std::uint64_t limit) {
  const auto cats = space.categorical_dimensions();
  const std::uint64_t total = discrete_cardinality(space);
  if (total > limit)
    throw Error("cell count " + std::to_string(total) + " exceeds enumeration limit " +
                std::to_string(limit));
  std::vector<CellId> cells;
  cells.reserve(total);
  std::vector<std::size_t> idx(cats.size(), 0);
  for (std::uint64_t n = 0; n < total; ++n) {
    CellId cell;
    cell.levels.reserve(cats.size());
    for (std::size_t i = 0; i < cats.size(); ++i) cell.levels.push_back(cats[i]->levels[idx[i]]);
    cells.push_back(std::move(cell));
    // Mixed-radix increment, last dimension fastest.
    for (std::size_t i = cats.size(); i-- > 0;) {
      if (++idx[i] < cats[i]->levels.size()) break;
      idx[i] = 0;
    }
  }
  return cells;
}

}  // namespace searchlab
