#pragma once

// Statistical toolkit over campaign histories: convergence model fits with
// AIC selection, permutation R^2 baselines, entropy / JSD / innovation
// dynamics, one-way / balanced / two-way ANOVA with permutation p-values,
// enrichment ratios, chi-square representativeness, rank correlation, simple
// regret, and jump detection. Natural logarithms throughout.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "searchlab/record.hpp"
#include "searchlab/rng.hpp"
#include "searchlab/space.hpp"

namespace searchlab {

struct BestPoint {
  std::int64_t n = 0;  // completed-experiment index, 1-based
  double ap_star = 0.0;
  std::int64_t record_id = 0;
};
using BestSeries = std::vector<BestPoint>;

// Records sorted into completion order (end_tick, then id). Campaign logs
// are stored in submit (id) order; time-indexed analyses re-sort first.
std::vector<const ExperimentRecord*> completion_order(
    const std::vector<ExperimentRecord>& records);

// Running maximum of ap over completed records in completion order.
BestSeries cumulative_best(const std::vector<ExperimentRecord>& records);

enum class ModelKind { power, exponential, logarithmic };
const char* to_string(ModelKind m);

struct FitResult {
  ModelKind model = ModelKind::power;
  double a = 0.0, b = 0.0, c = 0.0;
  double r2 = 0.0;
  bool r2_defined = true;  // false when the series has zero variance
  double aic = 0.0;
  double rss = 0.0;
  std::int64_t n = 0;
  bool converged = false;

  double predict(double n_index) const;
};

// Least squares fit of ap*(N). The a <= 1 bound is enforced for the power
// and exponential models. Throws AnalysisError for series shorter than
// min_length (permutation baselines fit very short series and pass 2).
FitResult fit_model(const BestSeries& series, ModelKind model, std::size_t min_length = 5);

// All three fits ranked by ascending AIC (2k + n ln(RSS/n), k = 3).
std::vector<FitResult> select_model_aic(const BestSeries& series);

struct PermutationR2 {
  double mean_r2 = 0.0;
  double sd_r2 = 0.0;
  double observed_r2 = 0.0;
  bool observed_defined = true;
  double percentile_of_observed = 0.0;  // in [0, 100]
  int n_permutations = 0;
  bool exhaustive = false;  // all n! orderings enumerated
};

// Shuffles completion order, recomputes the running maximum, refits the
// power model, and summarizes the R^2 distribution. Enumerates all
// orderings exhaustively when n! <= n_perm.
PermutationR2 permutation_r2_baseline(const std::vector<ExperimentRecord>& records,
                                      int n_perm, Rng& rng);

enum class Projection { total, arch, train };
const char* to_string(Projection p);

struct SeriesPoint {
  std::int64_t t = 0;
  double value = 0.0;
  bool defined = true;
};

struct DynamicsSeries {
  std::vector<SeriesPoint> points;
  int window = 0;
};

enum class EntropyMode { cumulative, windowed };

struct EntropyResult {
  DynamicsSeries series;
  double log_cell_count = 0.0;  // log K for the projection's support
  // Least-squares fit of H(t) = h0 + k log t.
  double h0 = 0.0, k_slope = 0.0, fit_r2 = 0.0;
  bool fit_defined = false;
};

EntropyResult entropy_series(const std::vector<ExperimentRecord>& records,
                             const ConfigurationSpace& space, Projection projection,
                             EntropyMode mode, int window);

// Jensen-Shannon divergence between two agents' windowed cell distributions;
// points where either agent is absent from the window are undefined.
DynamicsSeries jsd_series(const std::vector<ExperimentRecord>& records,
                          const ConfigurationSpace& space, const std::string& agent_a,
                          const std::string& agent_b, Projection projection, int window);

double jsd(const std::map<std::string, double>& p, const std::map<std::string, double>& q);

// Sliding-window mean of the innovation indicator over completed records.
DynamicsSeries innovation_series(const std::vector<ExperimentRecord>& records, int window);

struct InnovationDecay {
  double alpha = 0.0;  // decay exponent (rate ~ t^-alpha)
  double r2 = 0.0;
  int n_bins = 0;
  bool defined = false;
};

// Log-log least squares on geometrically binned innovation rates.
InnovationDecay fit_innovation_decay(const DynamicsSeries& series);

struct GroupStat {
  std::string label;
  std::int64_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance
};

struct AnovaResult {
  double f_stat = 0.0;
  double eta_sq = 0.0;
  double p_perm = 1.0;
  double ss_between = 0.0, ss_within = 0.0, ss_total = 0.0;
  std::int64_t df_between = 0, df_within = 0;
  std::vector<GroupStat> groups;
};

// One-way ANOVA over labeled values; groups below min_n are dropped.
// p-value by permutation of group labels: (1 + #{F_perm >= F}) / (1 + n_perm).
AnovaResult anova_oneway_values(const std::vector<std::pair<std::string, double>>& labeled,
                                std::int64_t min_n, int n_perm, Rng& rng);

// Groups completed records by the named categorical dimensions.
AnovaResult anova_oneway(const std::vector<ExperimentRecord>& records,
                         const ConfigurationSpace& space,
                         const std::vector<std::string>& group_dims, std::int64_t min_n,
                         int n_perm, Rng& rng);

// Seeded subsample without replacement to n_per_group, then one-way ANOVA.
AnovaResult anova_balanced(const std::vector<ExperimentRecord>& records,
                           const ConfigurationSpace& space,
                           const std::vector<std::string>& group_dims,
                           std::int64_t n_per_group, std::uint64_t seed, int n_perm);

struct TwoWayTerm {
  std::string name;
  double ss = 0.0;
  double eta_sq = 0.0;
  double f = 0.0;
  double p_perm = 1.0;
  std::int64_t df = 0;
};

struct TwoWayResult {
  TwoWayTerm factor_a, factor_b, interaction;
  double ss_residual = 0.0, ss_total = 0.0;
  std::int64_t df_residual = 0;
  bool confounded = false;  // some term inestimable on this design
};

// Sequential (Type-I) decomposition in order A, B, A x B.
TwoWayResult anova_twoway_values(
    const std::vector<std::tuple<std::string, std::string, double>>& data, int n_perm,
    Rng& rng);

TwoWayResult anova_twoway(const std::vector<ExperimentRecord>& records,
                          const ConfigurationSpace& space, const std::string& dim_a,
                          const std::string& dim_b, int n_perm, Rng& rng);

struct Enrichment {
  double ratio = 0.0;
  double top_fraction = 0.0;
  double base_fraction = 0.0;
  bool defined = true;  // false when the base rate is zero
};

using RecordPredicate = std::function<bool(const ExperimentRecord&)>;

Enrichment enrichment_ratio(const std::vector<ExperimentRecord>& records,
                            const RecordPredicate& predicate, std::int64_t top_k);

struct Chi2Result {
  double chi2 = 0.0;
  double cramers_v = 0.0;
  double p_perm = 1.0;
  std::int64_t df = 0;
};

// Chi-square of subset label counts against population-proportion
// expectations; permutation p by resampling equal-size subsets.
Chi2Result chi2_representativeness(const std::vector<std::string>& subset_labels,
                                   const std::vector<std::string>& population_labels,
                                   int n_perm, Rng& rng);

struct RankCorrelation {
  double rho = 0.0;
  bool defined = true;  // false when a column is constant
};

// Spearman rho with average-rank ties. Throws for fewer than 3 pairs.
RankCorrelation rank_correlation(const std::vector<std::pair<double, double>>& pairs);

// r_N = f_star - ap_star(N), parallel to the input series.
std::vector<double> simple_regret(const BestSeries& series, double f_star);

struct Jump {
  std::int64_t index = 0;  // series index n where the jump lands
  double magnitude = 0.0;
};

std::vector<Jump> detect_jumps(const BestSeries& series, double min_jump);

struct GroupMeanRow {
  std::vector<std::string> key;
  std::int64_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

// Per key-combination stats over completed records; combinations below
// min_n are omitted. Rows are sorted by key.
std::vector<GroupMeanRow> group_mean_table(const std::vector<ExperimentRecord>& records,
                                           const ConfigurationSpace& space,
                                           const std::vector<std::string>& keys,
                                           std::int64_t min_n);

// Cell label of a record under a projection (dims joined with '|').
std::string project_cell(const ExperimentRecord& record, const ConfigurationSpace& space,
                         Projection projection);

}  // namespace searchlab
