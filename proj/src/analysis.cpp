#include "searchlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

#include "searchlab/errors.hpp"

namespace searchlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Simple linear regression y = a + b x; returns (a, b, r2, defined).
struct LinFit {
  double a = 0.0, b = 0.0, r2 = 0.0;
  bool defined = false;
};

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  LinFit fit;
  const std::size_t n = x.size();
  if (n < 2) return fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx < 1e-300) return fit;
  fit.b = sxy / sxx;
  fit.a = my - fit.b * mx;
  fit.r2 = syy < 1e-300 ? 1.0 : 1.0 - (syy - fit.b * sxy) / syy;
  fit.defined = true;
  return fit;
}

}  // namespace

std::vector<const ExperimentRecord*> completion_order(
    const std::vector<ExperimentRecord>& records) {
  std::vector<const ExperimentRecord*> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(),
                   [](const ExperimentRecord* a, const ExperimentRecord* b) {
                     if (a->end_tick != b->end_tick) return a->end_tick < b->end_tick;
                     return a->id < b->id;
                   });
  return out;
}

BestSeries cumulative_best(const std::vector<ExperimentRecord>& records) {
  BestSeries series;
  double best = -kInf;
  std::int64_t n = 0;
  for (const auto* r : completion_order(records)) {
    if (r->status != RecordStatus::completed || !r->ap) continue;
    ++n;
    best = std::max(best, *r->ap);
    series.push_back({n, best, r->id});
  }
  return series;
}

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::power: return "power";
    case ModelKind::exponential: return "exponential";
    case ModelKind::logarithmic: return "logarithmic";
  }
  return "?";
}

double FitResult::predict(double n_index) const {
  switch (model) {
    case ModelKind::power: return a - b * std::pow(n_index, -c);
    case ModelKind::exponential: return a - b * std::exp(-c * n_index);
    case ModelKind::logarithmic: return a + b * std::log(n_index);
  }
  return 0.0;
}

namespace {

// Profiled least squares for y ~ a - b * u(c): for a fixed decay exponent c
// the model is linear in (a, b), so the search is one-dimensional in c.
struct ProfiledFit {
  double a = 0.0, b = 0.0, rss = kInf;
};

ProfiledFit profiled_ls(const std::vector<double>& u, const std::vector<double>& y) {
  const std::size_t n = u.size();
  double mu = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += u[i];
    my += y[i];
  }
  mu /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cuu = 0.0, cuy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cuu += (u[i] - mu) * (u[i] - mu);
    cuy += (u[i] - mu) * (y[i] - my);
  }
  ProfiledFit fit;
  if (cuu < 1e-300) {
    fit.a = my;
    fit.b = 0.0;
  } else {
    fit.b = -cuy / cuu;
    fit.a = my + fit.b * mu;
  }
  if (fit.a > 1.0) {
    // AP is bounded by 1; refit b with a pinned at the bound.
    fit.a = 1.0;
    double suu = 0.0, su1y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      suu += u[i] * u[i];
      su1y += u[i] * (1.0 - y[i]);
    }
    fit.b = suu < 1e-300 ? 0.0 : su1y / suu;
  }
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.a - fit.b * u[i]);
    rss += r * r;
  }
  fit.rss = rss;
  return fit;
}

std::vector<double> decay_terms(const std::vector<double>& n_index, double c, bool power) {
  std::vector<double> u(n_index.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = power ? std::pow(n_index[i], -c) : std::exp(-c * n_index[i]);
  return u;
}

FitResult fit_model_impl(const BestSeries& series, ModelKind model,
                         std::size_t min_length) {
  if (series.size() < min_length)
    throw AnalysisError("series too short for model fit (need at least " +
                        std::to_string(min_length) + " points)");
  const std::size_t n = series.size();
  std::vector<double> ns(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    ns[i] = static_cast<double>(series[i].n);
    ys[i] = series[i].ap_star;
  }
  double tss = 0.0;
  {
    const double my = mean_of(ys);
    for (double y : ys) tss += (y - my) * (y - my);
  }

  FitResult result;
  result.model = model;
  result.n = static_cast<std::int64_t>(n);

  if (model == ModelKind::logarithmic) {
    std::vector<double> lx(n);
    for (std::size_t i = 0; i < n; ++i) lx[i] = std::log(ns[i]);
    const LinFit lin = linear_fit(lx, ys);
    result.a = lin.a;
    result.b = lin.b;
    result.c = 0.0;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ys[i] - (lin.a + lin.b * lx[i]);
      rss += r * r;
    }
    result.rss = rss;
    result.converged = lin.defined || tss < 1e-12;
    if (!lin.defined) {
      result.a = mean_of(ys);
      result.b = 0.0;
      result.rss = tss;
      result.converged = true;
    }
  } else {
    const bool power = model == ModelKind::power;
    auto objective = [&](double c) { return profiled_ls(decay_terms(ns, c, power), ys); };

    // Deterministic multi-start: a log-spaced grid plus the canonical
    // starting exponents; the profile can be multimodal in c.
    std::vector<double> grid;
    const double lo = 1e-4, hi = 16.0;
    const int steps = 200;
    for (int i = 0; i <= steps; ++i)
      grid.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) *
                                                  static_cast<double>(i) / steps));
    for (double c : {0.05, 0.1, 0.3, 0.5, 1.0}) grid.push_back(c);
    std::sort(grid.begin(), grid.end());

    double best_c = grid.front();
    ProfiledFit best_fit = objective(best_c);
    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const ProfiledFit fit = objective(grid[i]);
      if (fit.rss < best_fit.rss) {
        best_fit = fit;
        best_c = grid[i];
        best_idx = i;
      }
    }
    // Golden-section refinement between the neighbors of the grid argmin.
    double a = std::log(grid[best_idx == 0 ? 0 : best_idx - 1]);
    double b = std::log(grid[std::min(grid.size() - 1, best_idx + 1)]);
    const double golden = 0.6180339887498949;
    double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
    double f1 = objective(std::exp(x1)).rss, f2 = objective(std::exp(x2)).rss;
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - golden * (b - a);
        f1 = objective(std::exp(x1)).rss;
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + golden * (b - a);
        f2 = objective(std::exp(x2)).rss;
      }
    }
    const double refined_c = std::exp(0.5 * (a + b));
    const ProfiledFit refined = objective(refined_c);
    if (refined.rss <= best_fit.rss) {
      best_fit = refined;
      best_c = refined_c;
    }
    result.a = best_fit.a;
    result.b = best_fit.b;
    result.c = best_c;
    result.rss = best_fit.rss;
    result.converged = std::isfinite(best_fit.rss) && best_c > 0.0;
  }

  if (tss < 1e-12) {
    // Zero variance up to accumulated rounding: R^2 is undefined.
    result.r2_defined = false;
    result.r2 = 0.0;
  } else {
    result.r2 = 1.0 - result.rss / tss;
  }
  result.aic = 2.0 * 3.0 + static_cast<double>(n) *
                               std::log(std::max(result.rss, 1e-300) / static_cast<double>(n));
  return result;
}

}  // namespace

FitResult fit_model(const BestSeries& series, ModelKind model, std::size_t min_length) {
  return fit_model_impl(series, model, std::max<std::size_t>(2, min_length));
}

std::vector<FitResult> select_model_aic(const BestSeries& series) {
  std::vector<FitResult> fits;
  for (ModelKind m : {ModelKind::power, ModelKind::exponential, ModelKind::logarithmic}) {
    FitResult fit = fit_model(series, m);
    if (!fit.converged) throw AnalysisError(std::string("fit did not converge: ") + to_string(m));
    fits.push_back(fit);
  }
  std::stable_sort(fits.begin(), fits.end(),
                   [](const FitResult& a, const FitResult& b) { return a.aic < b.aic; });
  return fits;
}

PermutationR2 permutation_r2_baseline(const std::vector<ExperimentRecord>& records,
                                      int n_perm, Rng& rng) {
  std::vector<double> values;
  for (const auto* r : completion_order(records))
    if (r->status == RecordStatus::completed && r->ap) values.push_back(*r->ap);
  const std::size_t n = values.size();
  if (n < 2) throw AnalysisError("permutation baseline needs at least 2 completed records");

  auto r2_of_order = [&](const std::vector<double>& ordered) -> std::optional<double> {
    BestSeries series;
    double best = -kInf;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      best = std::max(best, ordered[i]);
      series.push_back({static_cast<std::int64_t>(i + 1), best, 0});
    }
    const FitResult fit = fit_model_impl(series, ModelKind::power, 2);
    if (!fit.r2_defined) return std::nullopt;
    return fit.r2;
  };

  PermutationR2 out;
  const auto observed = r2_of_order(values);
  out.observed_defined = observed.has_value();
  out.observed_r2 = observed.value_or(0.0);

  // Exhaustive enumeration when all orderings fit in the permutation budget.
  double factorial = 1.0;
  for (std::size_t i = 2; i <= n; ++i) factorial *= static_cast<double>(i);
  const bool exhaustive = n <= 10 && factorial <= static_cast<double>(n_perm);

  std::vector<double> r2s;
  if (exhaustive) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> ordered(n);
    do {
      for (std::size_t i = 0; i < n; ++i) ordered[i] = values[idx[i]];
      if (auto r2 = r2_of_order(ordered)) r2s.push_back(*r2);
    } while (std::next_permutation(idx.begin(), idx.end()));
  } else {
    std::vector<double> ordered = values;
    for (int p = 0; p < n_perm; ++p) {
      rng.shuffle(ordered);
      if (auto r2 = r2_of_order(ordered)) r2s.push_back(*r2);
    }
  }
  out.exhaustive = exhaustive;
  out.n_permutations = static_cast<int>(r2s.size());
  out.mean_r2 = mean_of(r2s);
  out.sd_r2 = sample_sd(r2s);
  if (out.observed_defined && !r2s.empty()) {
    std::int64_t at_or_below = 0;
    for (double r2 : r2s)
      if (r2 <= out.observed_r2) ++at_or_below;
    out.percentile_of_observed =
        100.0 * static_cast<double>(at_or_below) / static_cast<double>(r2s.size());
  }
  return out;
}

const char* to_string(Projection p) {
  switch (p) {
    case Projection::total: return "total";
    case Projection::arch: return "arch";
    case Projection::train: return "train";
  }
  return "?";
}

namespace {

std::vector<const DimensionSpec*> projection_dims(const ConfigurationSpace& space,
                                                  Projection projection) {
  std::vector<const DimensionSpec*> dims;
  for (const auto* d : space.categorical_dimensions()) {
    if (projection == Projection::total ||
        (projection == Projection::arch && d->subspace == Subspace::arch) ||
        (projection == Projection::train && d->subspace == Subspace::train))
      dims.push_back(d);
  }
  return dims;
}

double entropy_of_counts(double n, double sum_klogk) {
  // H = -sum (k/n) log(k/n) = log n - (1/n) sum k log k
  return n <= 0.0 ? 0.0 : std::log(n) - sum_klogk / n;
}

double xlogx(double x) { return x <= 0.0 ? 0.0 : x * std::log(x); }

}  // namespace

std::string project_cell(const ExperimentRecord& record, const ConfigurationSpace& space,
                         Projection projection) {
  std::string label;
  for (const auto* d : projection_dims(space, projection)) {
    if (!label.empty()) label += '|';
    label += record.config.has(d->name) ? record.config.level(d->name) : "?";
  }
  return label;
}

EntropyResult entropy_series(const std::vector<ExperimentRecord>& records,
                             const ConfigurationSpace& space, Projection projection,
                             EntropyMode mode, int window) {
  EntropyResult out;
  out.series.window = mode == EntropyMode::windowed ? window : 0;
  double log_k = 0.0;
  for (const auto* d : projection_dims(space, projection))
    log_k += std::log(static_cast<double>(d->levels.size()));
  out.log_cell_count = log_k;

  std::map<std::string, std::int64_t> counts;
  double sum_klogk = 0.0;
  std::deque<std::string> window_cells;
  std::int64_t t = 0;
  std::vector<double> fit_x, fit_y;
  for (const auto* r : completion_order(records)) {
    ++t;
    const std::string cell = project_cell(*r, space, projection);
    auto& count = counts[cell];
    sum_klogk += xlogx(static_cast<double>(count + 1)) - xlogx(static_cast<double>(count));
    ++count;
    double h;
    bool defined = true;
    if (mode == EntropyMode::cumulative) {
      h = entropy_of_counts(static_cast<double>(t), sum_klogk);
    } else {
      window_cells.push_back(cell);
      if (window_cells.size() > static_cast<std::size_t>(window)) {
        const std::string& gone = window_cells.front();
        auto& old = counts[gone];
        sum_klogk += xlogx(static_cast<double>(old - 1)) - xlogx(static_cast<double>(old));
        --old;
        window_cells.pop_front();
      }
      defined = window_cells.size() == static_cast<std::size_t>(window);
      h = entropy_of_counts(static_cast<double>(window_cells.size()), sum_klogk);
    }
    out.series.points.push_back({t, h, defined});
    if (defined && t >= 1) {
      fit_x.push_back(std::log(static_cast<double>(t)));
      fit_y.push_back(h);
    }
  }

  const LinFit lin = linear_fit(fit_x, fit_y);
  out.h0 = lin.a;
  out.k_slope = lin.b;
  out.fit_r2 = lin.r2;
  out.fit_defined = lin.defined;
  return out;
}

double jsd(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  std::set<std::string> keys;
  for (const auto& [k, v] : p) keys.insert(k);
  for (const auto& [k, v] : q) keys.insert(k);
  double hp = 0.0, hq = 0.0, hm = 0.0;
  for (const auto& k : keys) {
    const double pv = p.count(k) ? p.at(k) : 0.0;
    const double qv = q.count(k) ? q.at(k) : 0.0;
    hp -= xlogx(pv);
    hq -= xlogx(qv);
    hm -= xlogx(0.5 * (pv + qv));
  }
  double d = hm - 0.5 * (hp + hq);
  return std::max(0.0, std::min(std::log(2.0), d));
}

DynamicsSeries jsd_series(const std::vector<ExperimentRecord>& records,
                          const ConfigurationSpace& space, const std::string& agent_a,
                          const std::string& agent_b, Projection projection, int window) {
  DynamicsSeries out;
  out.window = window;
  std::deque<std::pair<std::string, std::string>> recent;  // (agent, cell)
  std::map<std::string, std::int64_t> counts_a, counts_b;
  std::int64_t total_a = 0, total_b = 0;

  auto bump = [](std::map<std::string, std::int64_t>& counts, const std::string& cell,
                 std::int64_t delta) {
    counts[cell] += delta;
    if (counts[cell] == 0) counts.erase(cell);
  };

  std::int64_t t = 0;
  for (const auto* r : completion_order(records)) {
    ++t;
    const std::string cell = project_cell(*r, space, projection);
    recent.emplace_back(r->agent, cell);
    if (r->agent == agent_a) {
      bump(counts_a, cell, 1);
      ++total_a;
    } else if (r->agent == agent_b) {
      bump(counts_b, cell, 1);
      ++total_b;
    }
    if (recent.size() > static_cast<std::size_t>(window)) {
      const auto& [gone_agent, gone_cell] = recent.front();
      if (gone_agent == agent_a) {
        bump(counts_a, gone_cell, -1);
        --total_a;
      } else if (gone_agent == agent_b) {
        bump(counts_b, gone_cell, -1);
        --total_b;
      }
      recent.pop_front();
    }
    if (total_a == 0 || total_b == 0) {
      out.points.push_back({t, 0.0, false});
      continue;
    }
    std::map<std::string, double> pa, pb;
    for (const auto& [cell_label, count] : counts_a)
      pa[cell_label] = static_cast<double>(count) / static_cast<double>(total_a);
    for (const auto& [cell_label, count] : counts_b)
      pb[cell_label] = static_cast<double>(count) / static_cast<double>(total_b);
    out.points.push_back({t, jsd(pa, pb), true});
  }
  return out;
}

DynamicsSeries innovation_series(const std::vector<ExperimentRecord>& records, int window) {
  DynamicsSeries out;
  out.window = window;
  std::deque<int> recent;
  double best = -kInf;
  std::int64_t t = 0;
  std::int64_t window_sum = 0;
  for (const auto* r : completion_order(records)) {
    if (r->status != RecordStatus::completed || !r->ap) continue;
    ++t;
    const int innovation = *r->ap > best ? 1 : 0;
    best = std::max(best, *r->ap);
    recent.push_back(innovation);
    window_sum += innovation;
    if (recent.size() > static_cast<std::size_t>(window)) {
      window_sum -= recent.front();
      recent.pop_front();
    }
    const bool defined = recent.size() == static_cast<std::size_t>(window);
    out.points.push_back(
        {t, static_cast<double>(window_sum) / static_cast<double>(recent.size()), defined});
  }
  return out;
}

InnovationDecay fit_innovation_decay(const DynamicsSeries& series) {
  InnovationDecay out;
  std::vector<SeriesPoint> defined;
  for (const auto& p : series.points)
    if (p.defined) defined.push_back(p);
  if (defined.size() < 3) return out;

  // Geometric bins over t, slope from ln(rate) ~ ln(t).
  const double t0 = static_cast<double>(defined.front().t);
  const double ratio = 1.5;
  std::vector<double> bin_logx, bin_logy;
  std::size_t i = 0;
  double lo = t0;
  while (i < defined.size()) {
    const double hi = lo * ratio;
    double sum = 0.0;
    std::int64_t count = 0;
    double tsum = 0.0;
    while (i < defined.size() && static_cast<double>(defined[i].t) < hi) {
      sum += defined[i].value;
      tsum += static_cast<double>(defined[i].t);
      ++count;
      ++i;
    }
    if (count > 0 && sum > 0.0) {
      bin_logx.push_back(std::log(tsum / static_cast<double>(count)));
      bin_logy.push_back(std::log(sum / static_cast<double>(count)));
    }
    lo = hi;
  }
  out.n_bins = static_cast<int>(bin_logx.size());
  if (out.n_bins < 3) return out;
  const LinFit lin = linear_fit(bin_logx, bin_logy);
  if (!lin.defined) return out;
  out.alpha = -lin.b;
  out.r2 = lin.r2;
  out.defined = true;
  return out;
}

namespace {

struct GroupedValues {
  std::vector<std::string> labels;       // per group
  std::vector<std::vector<double>> values;
};

// F statistic of grouped values laid out as a flat vector with group sizes.
double f_statistic(const std::vector<double>& flat, const std::vector<std::int64_t>& sizes,
                   double* ssb_out = nullptr, double* ssw_out = nullptr,
                   double* sst_out = nullptr) {
  const double n = static_cast<double>(flat.size());
  const std::size_t g = sizes.size();
  double grand = 0.0;
  for (double v : flat) grand += v;
  grand /= n;
  double ssb = 0.0, ssw = 0.0;
  std::size_t pos = 0;
  for (std::size_t gi = 0; gi < g; ++gi) {
    double gm = 0.0;
    for (std::int64_t k = 0; k < sizes[gi]; ++k) gm += flat[pos + static_cast<std::size_t>(k)];
    gm /= static_cast<double>(sizes[gi]);
    ssb += static_cast<double>(sizes[gi]) * (gm - grand) * (gm - grand);
    for (std::int64_t k = 0; k < sizes[gi]; ++k) {
      const double d = flat[pos + static_cast<std::size_t>(k)] - gm;
      ssw += d * d;
    }
    pos += static_cast<std::size_t>(sizes[gi]);
  }
  if (ssb_out) *ssb_out = ssb;
  if (ssw_out) *ssw_out = ssw;
  if (sst_out) *sst_out = ssb + ssw;
  const double df_b = static_cast<double>(g) - 1.0;
  const double df_w = n - static_cast<double>(g);
  if (df_w <= 0.0 || ssw <= 0.0) return kInf;
  return (ssb / df_b) / (ssw / df_w);
}

}  // namespace

AnovaResult anova_oneway_values(const std::vector<std::pair<std::string, double>>& labeled,
                                std::int64_t min_n, int n_perm, Rng& rng) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& [label, value] : labeled) groups[label].push_back(value);
  for (auto it = groups.begin(); it != groups.end();)
    it = static_cast<std::int64_t>(it->second.size()) < min_n ? groups.erase(it) : ++it;
  if (groups.size() < 2) throw AnalysisError("fewer than 2 eligible groups");

  std::vector<double> flat;
  std::vector<std::int64_t> sizes;
  AnovaResult out;
  for (const auto& [label, values] : groups) {
    GroupStat gs;
    gs.label = label;
    gs.n = static_cast<std::int64_t>(values.size());
    gs.mean = mean_of(values);
    const double sd = sample_sd(values);
    gs.variance = sd * sd;
    out.groups.push_back(std::move(gs));
    sizes.push_back(static_cast<std::int64_t>(values.size()));
    flat.insert(flat.end(), values.begin(), values.end());
  }

  out.f_stat = f_statistic(flat, sizes, &out.ss_between, &out.ss_within, &out.ss_total);
  if (out.ss_total <= 0.0) throw AnalysisError("zero total variance");
  out.eta_sq = out.ss_between / out.ss_total;
  out.df_between = static_cast<std::int64_t>(sizes.size()) - 1;
  out.df_within = static_cast<std::int64_t>(flat.size()) - static_cast<std::int64_t>(sizes.size());

  std::int64_t exceed = 0;
  std::vector<double> shuffled = flat;
  for (int p = 0; p < n_perm; ++p) {
    rng.shuffle(shuffled);
    if (f_statistic(shuffled, sizes) >= out.f_stat) ++exceed;
  }
  out.p_perm = static_cast<double>(1 + exceed) / static_cast<double>(1 + n_perm);
  return out;
}

namespace {

std::optional<std::string> group_label_of(const ExperimentRecord& r,
                                          const std::vector<std::string>& dims) {
  std::string label;
  for (const auto& dim : dims) {
    if (!r.config.has(dim) ||
        !std::holds_alternative<std::string>(r.config.assignments.at(dim)))
      return std::nullopt;
    if (!label.empty()) label += '|';
    label += r.config.level(dim);
  }
  return label;
}

}  // namespace

AnovaResult anova_oneway(const std::vector<ExperimentRecord>& records,
                         const ConfigurationSpace& space,
                         const std::vector<std::string>& group_dims, std::int64_t min_n,
                         int n_perm, Rng& rng) {
  for (const auto& dim : group_dims) space.at(dim);
  std::vector<std::pair<std::string, double>> labeled;
  for (const auto& r : records) {
    if (r.status != RecordStatus::completed || !r.ap) continue;
    if (auto label = group_label_of(r, group_dims)) labeled.emplace_back(*label, *r.ap);
  }
  return anova_oneway_values(labeled, min_n, n_perm, rng);
}

AnovaResult anova_balanced(const std::vector<ExperimentRecord>& records,
                           const ConfigurationSpace& space,
                           const std::vector<std::string>& group_dims,
                           std::int64_t n_per_group, std::uint64_t seed, int n_perm) {
  for (const auto& dim : group_dims) space.at(dim);
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.status != RecordStatus::completed || !r.ap) continue;
    if (auto label = group_label_of(r, group_dims)) groups[*label].push_back(*r.ap);
  }
  std::vector<std::pair<std::string, double>> labeled;
  std::uint64_t group_index = 0;
  for (auto& [label, values] : groups) {
    ++group_index;
    if (static_cast<std::int64_t>(values.size()) < n_per_group) continue;  // ineligible
    Rng rng = Rng::stream(seed, group_index);
    // Partial Fisher-Yates: the first n_per_group entries are the subsample.
    for (std::int64_t i = 0; i < n_per_group; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(rng.below(values.size() - static_cast<std::size_t>(i)));
      std::swap(values[static_cast<std::size_t>(i)], values[j]);
      labeled.emplace_back(label, values[static_cast<std::size_t>(i)]);
    }
  }
  Rng perm_rng = Rng::stream(seed, 0x9e99);
  return anova_oneway_values(labeled, 1, n_perm, perm_rng);
}

namespace {

// Dense normal-equation solve (X'X b = X'y) with partial pivoting.
// Returns false when the system is singular.
bool solve_normal(std::vector<std::vector<double>> m, std::vector<double> v,
                  std::vector<double>& beta) {
  const std::size_t k = v.size();
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < k; ++row)
      if (std::fabs(m[row][col]) > std::fabs(m[pivot][col])) pivot = row;
    if (std::fabs(m[pivot][col]) < 1e-10) return false;
    std::swap(m[col], m[pivot]);
    std::swap(v[col], v[pivot]);
    for (std::size_t row = col + 1; row < k; ++row) {
      const double factor = m[row][col] / m[col][col];
      for (std::size_t c2 = col; c2 < k; ++c2) m[row][c2] -= factor * m[col][c2];
      v[row] -= factor * v[col];
    }
  }
  beta.assign(k, 0.0);
  for (std::size_t row = k; row-- > 0;) {
    double s = v[row];
    for (std::size_t c2 = row + 1; c2 < k; ++c2) s -= m[row][c2] * beta[c2];
    beta[row] = s / m[row][row];
  }
  return true;
}

struct TwoWayData {
  std::vector<std::size_t> level_a, level_b;  // per observation
  std::vector<double> y;
  std::size_t n_a = 0, n_b = 0;
};

struct TwoWaySs {
  double ss_a = 0.0, ss_b = 0.0, ss_ab = 0.0, rss_full = 0.0, sst = 0.0;
  std::int64_t df_a = 0, df_b = 0, df_ab = 0, df_resid = 0;
  bool confounded = false;
};

TwoWaySs sequential_ss(const TwoWayData& d, const std::vector<double>& y) {
  TwoWaySs out;
  const std::size_t n = y.size();
  const double grand = mean_of(y);
  for (double v : y) out.sst += (v - grand) * (v - grand);

  // RSS under A-only: within-A sum of squares.
  std::vector<double> sum_a(d.n_a, 0.0);
  std::vector<std::int64_t> cnt_a(d.n_a, 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum_a[d.level_a[i]] += y[i];
    cnt_a[d.level_a[i]] += 1;
  }
  double rss_a = 0.0;
  std::size_t levels_a_present = 0;
  for (std::size_t a = 0; a < d.n_a; ++a)
    if (cnt_a[a] > 0) ++levels_a_present;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = sum_a[d.level_a[i]] / static_cast<double>(cnt_a[d.level_a[i]]);
    rss_a += (y[i] - m) * (y[i] - m);
  }

  // RSS under the additive model via dummy regression.
  const std::size_t k = 1 + (d.n_a - 1) + (d.n_b - 1);
  std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
  std::vector<double> xty(k, 0.0);
  std::vector<double> row(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    row[0] = 1.0;
    if (d.level_a[i] > 0) row[d.level_a[i]] = 1.0;
    if (d.level_b[i] > 0) row[d.n_a - 1 + d.level_b[i]] = 1.0;
    for (std::size_t r1 = 0; r1 < k; ++r1) {
      if (row[r1] == 0.0) continue;
      xty[r1] += row[r1] * y[i];
      for (std::size_t c1 = 0; c1 < k; ++c1) xtx[r1][c1] += row[r1] * row[c1];
    }
  }
  std::vector<double> beta;
  double rss_ab_additive = 0.0;
  bool additive_ok = solve_normal(xtx, xty, beta);
  if (additive_ok) {
    for (std::size_t i = 0; i < n; ++i) {
      double pred = beta[0];
      if (d.level_a[i] > 0) pred += beta[d.level_a[i]];
      if (d.level_b[i] > 0) pred += beta[d.n_a - 1 + d.level_b[i]];
      rss_ab_additive += (y[i] - pred) * (y[i] - pred);
    }
  } else {
    out.confounded = true;
    rss_ab_additive = rss_a;
  }

  // Full (cell means) model.
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::int64_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    auto& cell = cells[{d.level_a[i], d.level_b[i]}];
    cell.first += y[i];
    cell.second += 1;
  }
  double rss_full = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cell = cells.at({d.level_a[i], d.level_b[i]});
    const double m = cell.first / static_cast<double>(cell.second);
    rss_full += (y[i] - m) * (y[i] - m);
  }

  std::size_t levels_b_present = 0;
  {
    std::vector<std::int64_t> cnt_b(d.n_b, 0);
    for (std::size_t i = 0; i < n; ++i) cnt_b[d.level_b[i]] += 1;
    for (std::size_t b = 0; b < d.n_b; ++b)
      if (cnt_b[b] > 0) ++levels_b_present;
  }

  out.ss_a = std::max(0.0, out.sst - rss_a);
  out.ss_b = std::max(0.0, rss_a - rss_ab_additive);
  out.ss_ab = std::max(0.0, rss_ab_additive - rss_full);
  out.rss_full = rss_full;
  out.df_a = static_cast<std::int64_t>(levels_a_present) - 1;
  out.df_b = static_cast<std::int64_t>(levels_b_present) - 1;
  out.df_ab = static_cast<std::int64_t>(cells.size()) - 1 - out.df_a - out.df_b;
  if (out.df_ab < 0) {
    out.df_ab = 0;
    out.confounded = true;
  }
  out.df_resid = static_cast<std::int64_t>(n) - static_cast<std::int64_t>(cells.size());
  return out;
}

double term_f(double ss, std::int64_t df, double rss, std::int64_t df_resid) {
  if (df <= 0) return 0.0;
  if (df_resid <= 0 || rss <= 0.0) return kInf;
  return (ss / static_cast<double>(df)) / (rss / static_cast<double>(df_resid));
}

}  // namespace

TwoWayResult anova_twoway_values(
    const std::vector<std::tuple<std::string, std::string, double>>& data, int n_perm,
    Rng& rng) {
  if (data.empty()) throw AnalysisError("empty two-way design");
  std::vector<std::string> la, lb;
  for (const auto& [a, b, y] : data) {
    la.push_back(a);
    lb.push_back(b);
  }
  std::sort(la.begin(), la.end());
  la.erase(std::unique(la.begin(), la.end()), la.end());
  std::sort(lb.begin(), lb.end());
  lb.erase(std::unique(lb.begin(), lb.end()), lb.end());
  if (la.size() < 2 || lb.size() < 2)
    throw AnalysisError("two-way ANOVA needs at least 2 levels per factor");

  TwoWayData d;
  d.n_a = la.size();
  d.n_b = lb.size();
  for (const auto& [a, b, y] : data) {
    d.level_a.push_back(static_cast<std::size_t>(
        std::lower_bound(la.begin(), la.end(), a) - la.begin()));
    d.level_b.push_back(static_cast<std::size_t>(
        std::lower_bound(lb.begin(), lb.end(), b) - lb.begin()));
    d.y.push_back(y);
  }

  const TwoWaySs ss = sequential_ss(d, d.y);
  if (ss.sst <= 0.0) throw AnalysisError("zero total variance");

  TwoWayResult out;
  out.confounded = ss.confounded;
  out.ss_total = ss.sst;
  out.ss_residual = ss.rss_full;
  out.df_residual = ss.df_resid;
  out.factor_a = {"A", ss.ss_a, ss.ss_a / ss.sst, term_f(ss.ss_a, ss.df_a, ss.rss_full, ss.df_resid), 1.0, ss.df_a};
  out.factor_b = {"B", ss.ss_b, ss.ss_b / ss.sst, term_f(ss.ss_b, ss.df_b, ss.rss_full, ss.df_resid), 1.0, ss.df_b};
  out.interaction = {"AxB", ss.ss_ab, ss.ss_ab / ss.sst,
                     term_f(ss.ss_ab, ss.df_ab, ss.rss_full, ss.df_resid), 1.0, ss.df_ab};

  std::int64_t exceed_a = 0, exceed_b = 0, exceed_ab = 0;
  std::vector<double> shuffled = d.y;
  for (int p = 0; p < n_perm; ++p) {
    rng.shuffle(shuffled);
    const TwoWaySs perm = sequential_ss(d, shuffled);
    if (term_f(perm.ss_a, perm.df_a, perm.rss_full, perm.df_resid) >= out.factor_a.f)
      ++exceed_a;
    if (term_f(perm.ss_b, perm.df_b, perm.rss_full, perm.df_resid) >= out.factor_b.f)
      ++exceed_b;
    if (term_f(perm.ss_ab, perm.df_ab, perm.rss_full, perm.df_resid) >= out.interaction.f)
      ++exceed_ab;
  }
  out.factor_a.p_perm = static_cast<double>(1 + exceed_a) / static_cast<double>(1 + n_perm);
  out.factor_b.p_perm = static_cast<double>(1 + exceed_b) / static_cast<double>(1 + n_perm);
  out.interaction.p_perm =
      static_cast<double>(1 + exceed_ab) / static_cast<double>(1 + n_perm);
  return out;
}

TwoWayResult anova_twoway(const std::vector<ExperimentRecord>& records,
                          const ConfigurationSpace& space, const std::string& dim_a,
                          const std::string& dim_b, int n_perm, Rng& rng) {
  space.at(dim_a);
  space.at(dim_b);
  std::vector<std::tuple<std::string, std::string, double>> data;
  for (const auto& r : records) {
    if (r.status != RecordStatus::completed || !r.ap) continue;
    if (!r.config.has(dim_a) || !r.config.has(dim_b)) continue;
    data.emplace_back(r.config.level(dim_a), r.config.level(dim_b), *r.ap);
  }
  TwoWayResult out = anova_twoway_values(data, n_perm, rng);
  out.factor_a.name = dim_a;
  out.factor_b.name = dim_b;
  out.interaction.name = dim_a + "x" + dim_b;
  return out;
}

Enrichment enrichment_ratio(const std::vector<ExperimentRecord>& records,
                            const RecordPredicate& predicate, std::int64_t top_k) {
  std::vector<const ExperimentRecord*> completed;
  for (const auto& r : records)
    if (r.status == RecordStatus::completed && r.ap) completed.push_back(&r);
  if (top_k > static_cast<std::int64_t>(completed.size()))
    throw AnalysisError("top_k exceeds the number of completed records");
  if (top_k <= 0) throw AnalysisError("top_k must be positive");

  std::stable_sort(completed.begin(), completed.end(),
                   [](const ExperimentRecord* a, const ExperimentRecord* b) {
                     if (*a->ap != *b->ap) return *a->ap > *b->ap;
                     if (a->end_tick != b->end_tick) return a->end_tick < b->end_tick;
                     return a->id < b->id;
                   });
  std::int64_t top_hits = 0, base_hits = 0;
  for (std::size_t i = 0; i < completed.size(); ++i) {
    const bool hit = predicate(*completed[i]);
    if (hit) ++base_hits;
    if (static_cast<std::int64_t>(i) < top_k && hit) ++top_hits;
  }
  Enrichment out;
  out.top_fraction = static_cast<double>(top_hits) / static_cast<double>(top_k);
  out.base_fraction =
      static_cast<double>(base_hits) / static_cast<double>(completed.size());
  if (out.base_fraction <= 0.0) {
    out.defined = false;
    return out;
  }
  out.ratio = out.top_fraction / out.base_fraction;
  return out;
}

Chi2Result chi2_representativeness(const std::vector<std::string>& subset_labels,
                                   const std::vector<std::string>& population_labels,
                                   int n_perm, Rng& rng) {
  if (subset_labels.empty()) throw AnalysisError("empty subset");
  std::map<std::string, std::int64_t> pop_counts;
  for (const auto& label : population_labels) pop_counts[label] += 1;
  if (pop_counts.size() < 2)
    throw AnalysisError("population needs at least 2 key levels");

  const double pop_n = static_cast<double>(population_labels.size());
  const double sub_n = static_cast<double>(subset_labels.size());

  auto chi2_of = [&](const std::vector<std::string>& subset) {
    std::map<std::string, std::int64_t> sub_counts;
    for (const auto& label : subset) sub_counts[label] += 1;
    double chi2 = 0.0;
    for (const auto& [label, pop_count] : pop_counts) {
      const double expected = sub_n * static_cast<double>(pop_count) / pop_n;
      const double observed =
          sub_counts.count(label) ? static_cast<double>(sub_counts.at(label)) : 0.0;
      chi2 += (observed - expected) * (observed - expected) / expected;
    }
    return chi2;
  };

  Chi2Result out;
  out.chi2 = chi2_of(subset_labels);
  out.df = static_cast<std::int64_t>(pop_counts.size()) - 1;
  // r x 2 table convention: V = sqrt(chi2 / (n * (min(r, 2) - 1))).
  out.cramers_v = std::sqrt(out.chi2 / sub_n);

  std::int64_t exceed = 0;
  std::vector<std::string> pool = population_labels;
  const auto k = static_cast<std::size_t>(sub_n);
  for (int p = 0; p < n_perm; ++p) {
    // Partial Fisher-Yates draw of an equal-size subset without replacement.
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    if (chi2_of(std::vector<std::string>(pool.begin(),
                                         pool.begin() + static_cast<long>(k))) >= out.chi2)
      ++exceed;
  }
  out.p_perm = static_cast<double>(1 + exceed) / static_cast<double>(1 + n_perm);
  return out;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

RankCorrelation rank_correlation(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw AnalysisError("rank correlation needs at least 3 pairs");
  std::vector<double> a, b;
  for (const auto& [x, y] : pairs) {
    a.push_back(x);
    b.push_back(y);
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = mean_of(ra), mb = mean_of(rb);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
    sab += (ra[i] - ma) * (rb[i] - mb);
  }
  RankCorrelation out;
  if (saa < 1e-300 || sbb < 1e-300) {
    out.defined = false;
    return out;
  }
  out.rho = sab / std::sqrt(saa * sbb);
  return out;
}

std::vector<double> simple_regret(const BestSeries& series, double f_star) {
  std::vector<double> regret;
  regret.reserve(series.size());
  for (const auto& p : series) regret.push_back(f_star - p.ap_star);
  return regret;
}

std::vector<Jump> detect_jumps(const BestSeries& series, double min_jump) {
  std::vector<Jump> jumps;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double delta = series[i].ap_star - series[i - 1].ap_star;
    if (delta >= min_jump) jumps.push_back({series[i].n, delta});
  }
  return jumps;
}

std::vector<GroupMeanRow> group_mean_table(const std::vector<ExperimentRecord>& records,
                                           const ConfigurationSpace& space,
                                           const std::vector<std::string>& keys,
                                           std::int64_t min_n) {
  for (const auto& dim : keys) space.at(dim);
  std::map<std::vector<std::string>, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.status != RecordStatus::completed || !r.ap) continue;
    std::vector<std::string> key;
    bool ok = true;
    for (const auto& dim : keys) {
      if (!r.config.has(dim)) {
        ok = false;
        break;
      }
      key.push_back(r.config.level(dim));
    }
    if (ok) groups[std::move(key)].push_back(*r.ap);
  }
  std::vector<GroupMeanRow> rows;
  for (const auto& [key, values] : groups) {
    if (static_cast<std::int64_t>(values.size()) < min_n) continue;
    GroupMeanRow row;
    row.key = key;
    row.n = static_cast<std::int64_t>(values.size());
    row.mean = mean_of(values);
    row.sd = sample_sd(values);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace searchlab
