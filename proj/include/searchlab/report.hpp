#pragma once

// Report emission: tabular text files, plot-data files, and minimal SVG
// line plots, all deterministic given an input log.

#include <string>
#include <vector>

#include "searchlab/analysis.hpp"
#include "searchlab/log.hpp"

namespace searchlab {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Minimal static vector plot: axes, ticks, one polyline per series.
std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series);

struct ReportOptions {
  int entropy_window = 100;
  int jsd_window = 100;
  int innovation_window = 100;
  double jump_threshold = 0.01;
  int heatmap_min_n = 1;
  std::string heatmap_row_dim = "backbone";
  std::string heatmap_col_dim = "encoder";
};

// Writes cumulative-best / entropy / JSD / innovation plot data (.tsv +
// .svg), a heatmap table, convergence fits, and a summary into out_dir.
// Returns the list of files written.
std::vector<std::string> emit_report(const std::vector<ExperimentRecord>& records,
                                     const ConfigurationSpace& space,
                                     const std::string& out_dir, const ReportOptions& options);

}  // namespace searchlab
