#include "searchlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace searchlab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content,
                std::vector<std::string>& written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report file '" + path + "'");
  out << content;
  written.push_back(path);
}

std::string series_tsv(const std::string& header, const DynamicsSeries& series,
                       const std::string& params_comment) {
  std::string out = "# " + params_comment + "\n" + header + "\n";
  for (const auto& p : series.points) {
    if (!p.defined) continue;
    out += std::to_string(p.t) + "\t" + fmt(p.value) + "\n";
  }
  return out;
}

PlotSeries to_plot(const std::string& name, const DynamicsSeries& series) {
  PlotSeries out;
  out.name = name;
  for (const auto& p : series.points)
    if (p.defined) out.points.emplace_back(static_cast<double>(p.t), p.value);
  return out;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series) {
  const double width = 640, height = 400;
  const double ml = 60, mr = 15, mt = 30, mb = 45;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\" "
         "font-family=\"sans-serif\">" << title << "</text>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    svg << "<text x=\"" << sx(fx) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(fx)
        << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << sy(fy) + 3
        << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(fy)
        << "</text>\n";
    svg << "<line x1=\"" << sx(fx) << "\" y1=\"" << mt + ph << "\" x2=\"" << sx(fx)
        << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"black\"/>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
      << "</text>\n";
  svg << "<text x=\"14\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 14 " << mt + ph / 2 << ")\">" << y_label << "</text>\n";

  int color = 0;
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"" << kColors[color % 5]
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.points) svg << fmt(sx(x)) << "," << fmt(sy(y)) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << ml + pw - 4 << "\" y=\"" << mt + 14 + 14 * color
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" fill=\""
        << kColors[color % 5] << "\">" << s.name << "</text>\n";
    ++color;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> emit_report(const std::vector<ExperimentRecord>& records,
                                     const ConfigurationSpace& space,
                                     const std::string& out_dir, const ReportOptions& opt) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  auto path = [&](const std::string& name) { return out_dir + "/" + name; };

  // Cumulative best.
  const BestSeries best = cumulative_best(records);
  {
    std::string tsv = "# cumulative best over completed records\nn\tap_star\n";
    PlotSeries ps{"ap*", {}};
    for (const auto& p : best) {
      tsv += std::to_string(p.n) + "\t" + fmt(p.ap_star) + "\n";
      ps.points.emplace_back(static_cast<double>(p.n), p.ap_star);
    }
    write_file(path("cumulative_best.tsv"), tsv, written);
    write_file(path("cumulative_best.svg"),
               svg_line_plot("Cumulative best AP", "completed experiments", "AP*", {ps}),
               written);
  }

  // Convergence fits.
  if (best.size() >= 5) {
    const auto fits = select_model_aic(best);
    std::string txt = "# convergence fits ranked by AIC\nmodel\ta\tb\tc\tr2\taic\n";
    for (const auto& f : fits)
      txt += std::string(to_string(f.model)) + "\t" + fmt(f.a) + "\t" + fmt(f.b) + "\t" +
             fmt(f.c) + "\t" + (f.r2_defined ? fmt(f.r2) : "undefined") + "\t" + fmt(f.aic) +
             "\n";
    write_file(path("convergence.tsv"), txt, written);
  }

  // Entropy series per projection.
  std::vector<ExperimentRecord> executed;
  for (const auto& r : records)
    if (r.status == RecordStatus::completed || r.status == RecordStatus::failed)
      executed.push_back(r);
  std::vector<PlotSeries> entropy_plots;
  for (Projection proj : {Projection::total, Projection::arch, Projection::train}) {
    const EntropyResult ent =
        entropy_series(executed, space, proj, EntropyMode::windowed, opt.entropy_window);
    const std::string name = std::string("entropy_") + to_string(proj);
    write_file(path(name + ".tsv"),
               series_tsv("t\tentropy", ent.series,
                          "windowed entropy, window=" + std::to_string(opt.entropy_window) +
                              ", projection=" + to_string(proj) +
                              ", logK=" + fmt(ent.log_cell_count)),
               written);
    entropy_plots.push_back(to_plot(to_string(proj), ent.series));
  }
  write_file(path("entropy.svg"),
             svg_line_plot("Configuration-space entropy (window " +
                               std::to_string(opt.entropy_window) + ")",
                           "experiment", "H (nats)", entropy_plots),
             written);

  // JSD between the two most prolific agents.
  {
    std::map<std::string, int> agent_counts;
    for (const auto& r : executed)
      if (!r.agent.empty() && r.agent != "unattributed" && r.agent != "system")
        agent_counts[r.agent] += 1;
    std::vector<std::pair<std::string, int>> agents(agent_counts.begin(), agent_counts.end());
    std::stable_sort(agents.begin(), agents.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (agents.size() >= 2) {
      const DynamicsSeries series = jsd_series(executed, space, agents[0].first,
                                               agents[1].first, Projection::arch,
                                               opt.jsd_window);
      write_file(path("jsd.tsv"),
                 series_tsv("t\tjsd", series,
                            "jsd window=" + std::to_string(opt.jsd_window) + ", agents=" +
                                agents[0].first + " vs " + agents[1].first +
                                ", projection=arch"),
                 written);
      write_file(path("jsd.svg"),
                 svg_line_plot("Agent specialization (JSD)", "experiment", "JSD (nats)",
                               {to_plot("jsd", series)}),
                 written);
    }
  }

  // Innovation rate.
  {
    const DynamicsSeries innovation = innovation_series(records, opt.innovation_window);
    write_file(path("innovation.tsv"),
               series_tsv("t\trate", innovation,
                          "innovation rate, window=" + std::to_string(opt.innovation_window)),
               written);
    write_file(path("innovation.svg"),
               svg_line_plot("Innovation rate", "completed experiment", "rate",
                             {to_plot("innovation", innovation)}),
               written);
  }

  // Heatmap grid over two categorical dims when present.
  if (space.find(opt.heatmap_row_dim) && space.find(opt.heatmap_col_dim)) {
    const auto rows = group_mean_table(records, space,
                                       {opt.heatmap_row_dim, opt.heatmap_col_dim},
                                       opt.heatmap_min_n);
    std::map<std::pair<std::string, std::string>, const GroupMeanRow*> grid;
    for (const auto& row : rows) grid[{row.key[0], row.key[1]}] = &row;
    std::string tsv = "# mean ap per " + opt.heatmap_row_dim + " x " + opt.heatmap_col_dim +
                      " (min_n=" + std::to_string(opt.heatmap_min_n) + ")\n";
    tsv += opt.heatmap_row_dim;
    for (const auto& col : space.at(opt.heatmap_col_dim).levels) tsv += "\t" + col;
    tsv += "\n";
    for (const auto& row_level : space.at(opt.heatmap_row_dim).levels) {
      tsv += row_level;
      for (const auto& col : space.at(opt.heatmap_col_dim).levels) {
        auto it = grid.find({row_level, col});
        tsv += "\t" + (it == grid.end() ? std::string("-") : fmt(it->second->mean));
      }
      tsv += "\n";
    }
    write_file(path("heatmap_" + opt.heatmap_row_dim + "_" + opt.heatmap_col_dim + ".tsv"),
               tsv, written);
  }

  // Summary.
  {
    std::int64_t completed = 0, failed = 0, abandoned = 0;
    for (const auto& r : records) {
      if (r.status == RecordStatus::completed) ++completed;
      if (r.status == RecordStatus::failed) ++failed;
      if (r.status == RecordStatus::abandoned) ++abandoned;
    }
    std::string txt = "records\t" + std::to_string(records.size()) + "\n";
    txt += "completed\t" + std::to_string(completed) + "\n";
    txt += "failed\t" + std::to_string(failed) + "\n";
    txt += "abandoned\t" + std::to_string(abandoned) + "\n";
    if (!best.empty()) txt += "best_ap\t" + fmt(best.back().ap_star) + "\n";
    const auto jumps = detect_jumps(best, opt.jump_threshold);
    txt += "jumps_ge_" + fmt(opt.jump_threshold) + "\t" + std::to_string(jumps.size()) + "\n";
    write_file(path("summary.txt"), txt, written);
  }
  return written;
}

}  // namespace searchlab
