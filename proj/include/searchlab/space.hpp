#pragma once

// Structured configuration space: a product of categorical and continuous
// dimensions grouped into arch / loss / train / data subspaces, with
// conditional activation rules for loss-dependent hyperparameters.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "searchlab/errors.hpp"
#include "searchlab/rng.hpp"

namespace searchlab {

enum class DimKind { categorical, continuous };
enum class Scale { linear, logarithmic };
enum class Subspace { arch, loss, train, data };

const char* to_string(Subspace s);
const char* to_string(Scale s);

struct DimensionSpec {
  std::string name;
  DimKind kind = DimKind::categorical;
  std::vector<std::string> levels;  // categorical only
  double low = 0.0, high = 0.0;     // continuous only
  Scale scale = Scale::linear;      // continuous only
  Subspace subspace = Subspace::train;
};

// guard_dimension = guard_level activates the listed dimensions.
struct ConditionalRule {
  std::string guard_dimension;
  std::string guard_level;
  std::vector<std::string> activates;
};

using ConfigValue = std::variant<std::string, double>;

std::string to_display(const ConfigValue& v);

struct Configuration {
  std::map<std::string, ConfigValue> assignments;

  bool has(const std::string& dim) const { return assignments.count(dim) > 0; }
  const std::string& level(const std::string& dim) const;
  double real(const std::string& dim) const;
  void set(const std::string& dim, std::string level) { assignments[dim] = std::move(level); }
  void set(const std::string& dim, double value) { assignments[dim] = value; }

  bool operator==(const Configuration& other) const { return assignments == other.assignments; }
};

// Projection of a configuration onto all categorical dimensions, schema order.
struct CellId {
  std::vector<std::string> levels;

  bool operator==(const CellId&) const = default;
  bool operator<(const CellId& o) const { return levels < o.levels; }
  std::string to_string() const;
};

// Set representation used for deduplication: one token per categorical
// (dim=level) plus one per active continuous dim quantized into 16 buckets.
struct Fingerprint {
  std::vector<std::string> tokens;          // sorted, unique
  std::vector<std::uint64_t> token_hashes;  // sorted, parallel content

  bool operator==(const Fingerprint& o) const { return tokens == o.tokens; }
  std::string key() const;
};

double jaccard(const Fingerprint& a, const Fingerprint& b);

class ConfigurationSpace {
 public:
  ConfigurationSpace() = default;
  ConfigurationSpace(std::vector<DimensionSpec> dims, std::vector<ConditionalRule> rules);

  // Parses the space-schema document (JSON text). Throws SchemaError.
  static ConfigurationSpace from_json_text(const std::string& text);
  static ConfigurationSpace from_file(const std::string& path);

  // The shipped default space (6 backbones x 5 encoders x 4 poolings x ...).
  static const ConfigurationSpace& default_space();
  static const std::string& default_space_text();

  const std::vector<DimensionSpec>& dimensions() const { return dims_; }
  const std::vector<ConditionalRule>& conditional_rules() const { return rules_; }

  const DimensionSpec* find(const std::string& name) const;
  const DimensionSpec& at(const std::string& name) const;
  bool is_conditional(const std::string& name) const { return guard_of_.count(name) > 0; }
  // (guard dimension, guard level) for a conditional dimension.
  std::optional<std::pair<std::string, std::string>> guard(const std::string& name) const;
  bool dimension_active(const std::string& name, const Configuration& config) const;

  std::vector<const DimensionSpec*> categorical_dimensions() const;
  std::vector<const DimensionSpec*> continuous_dimensions() const;

  // Maps a continuous value into [0, 1] (log-space for logarithmic dims).
  double scaled(const DimensionSpec& dim, double x) const;
  double unscaled(const DimensionSpec& dim, double z) const;

  std::string to_json_text() const;  // canonical form, stable across runs
  std::uint64_t schema_hash() const;

 private:
  void build_index();

  std::vector<DimensionSpec> dims_;
  std::vector<ConditionalRule> rules_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::pair<std::string, std::string>> guard_of_;
};

// Operations. define_space is the schema entry point; the rest operate on a
// validated space.
ConfigurationSpace define_space(const std::string& schema_document);
std::uint64_t discrete_cardinality(const ConfigurationSpace& space);
Configuration sample_uniform(const ConfigurationSpace& space, Rng& rng);
std::vector<std::string> validate(const ConfigurationSpace& space, const Configuration& config);
CellId cell_of(const ConfigurationSpace& space, const Configuration& config);
Fingerprint fingerprint(const ConfigurationSpace& space, const Configuration& config);

// All discrete cells in canonical (schema) order. Throws if the cell count
// exceeds `limit`.
std::vector<CellId> enumerate_cells(const ConfigurationSpace& space, std::uint64_t limit = 1000000);

}  // namespace searchlab
