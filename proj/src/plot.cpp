#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "beamsense/harness.hpp"
#include "beamsense/util.hpp"

namespace fs = std::filesystem;

namespace beamsense::harness {

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw std::runtime_error("csv column not found: " + name);
  }
};

CsvTable read_csv(const std::string& path) {
  CsvTable table;
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty csv: " + path);
  }
  table.header = split(trim(line), ',');
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    table.rows.push_back(split(t, ','));
  }
  return table;
}

struct SeriesPoint {
  double x = 0;
  double mean = 0;
  double std_dev = 0;
};

struct Series {
  std::string name;
  std::vector<SeriesPoint> points;
};

std::string g4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string plot_data_csv(const std::vector<Series>& series) {
  std::ostringstream out;
  out << "x,series,mean,std\n";
  for (const Series& s : series) {
    for (const SeriesPoint& p : s.points) {
      out << format_double(p.x) << ',' << s.name << ',' << format_double(p.mean) << ','
          << format_double(p.std_dev) << '\n';
    }
  }
  return out.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
  const double width = 720, height = 440;
  const double left = 70, right = 170, top = 40, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const Series& s : series) {
    for (const SeriesPoint& p : s.points) {
      const double lo = p.mean - p.std_dev;
      const double hi = p.mean + p.std_dev;
      if (first) {
        x_min = x_max = p.x;
        y_min = lo;
        y_max = hi;
        first = false;
      } else {
        x_min = std::min(x_min, p.x);
        x_max = std::max(x_max, p.x);
        y_min = std::min(y_min, lo);
        y_max = std::max(y_max, hi);
      }
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return top + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = x_min + (x_max - x_min) * i / 5.0;
    const double fy = y_min + (y_max - y_min) * i / 5.0;
    svg << "<line x1=\"" << g4(sx(fx)) << "\" y1=\"" << g4(top) << "\" x2=\"" << g4(sx(fx))
        << "\" y2=\"" << g4(top + plot_h) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<line x1=\"" << g4(left) << "\" y1=\"" << g4(sy(fy)) << "\" x2=\""
        << g4(left + plot_w) << "\" y2=\"" << g4(sy(fy)) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << g4(sx(fx)) << "\" y=\"" << g4(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << g4(fx) << "</text>\n";
    svg << "<text x=\"" << g4(left - 8) << "\" y=\"" << g4(sy(fy) + 4)
        << "\" text-anchor=\"end\">" << g4(fy) << "</text>\n";
  }
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  svg << "<text x=\"18\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << top + plot_h / 2 << ")\">"
      << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::ostringstream pts;
    for (const SeriesPoint& p : s.points) {
      pts << g4(sx(p.x)) << ',' << g4(sy(p.mean)) << ' ';
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
        << pts.str() << "\"/>\n";
    for (const SeriesPoint& p : s.points) {
      if (p.std_dev > 0) {
        svg << "<line x1=\"" << g4(sx(p.x)) << "\" y1=\"" << g4(sy(p.mean - p.std_dev))
            << "\" x2=\"" << g4(sx(p.x)) << "\" y2=\"" << g4(sy(p.mean + p.std_dev))
            << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
      }
    }
    const double ly = top + 14 + 16 * static_cast<double>(si);
    svg << "<line x1=\"" << g4(left + plot_w + 8) << "\" y1=\"" << g4(ly - 4) << "\" x2=\""
        << g4(left + plot_w + 28) << "\" y2=\"" << g4(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << g4(left + plot_w + 32) << "\" y=\"" << g4(ly) << "\">" << s.name
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

struct RunRow {
  ArmSpec spec;
  RunMetrics metrics;
};

std::vector<RunRow> load_runs(const std::string& runs_csv) {
  const CsvTable table = read_csv(runs_csv);
  const int c_budget = table.column("budget");
  const int c_v = table.column("v");
  const int c_policy = table.column("policy");
  const int c_age = table.column("age_limit");
  const int c_seed = table.column("seed");
  const int c_status = table.column("status");
  const int c_rate = table.column("sensing_rate");
  const int c_queue = table.column("mean_queue");
  const int c_top1 = table.column("top1");
  const int c_top3 = table.column("top3");
  const int c_loss = table.column("mean_loss");

  std::vector<RunRow> rows;
  for (const auto& cells : table.rows) {
    if (trim(cells.at(c_status)) != "ok") continue;
    RunRow row;
    row.spec.budget = parse_double(cells.at(c_budget), "runs.csv budget");
    row.spec.v_param = parse_double(cells.at(c_v), "runs.csv v");
    row.spec.policy = policies::parse_policy_kind(trim(cells.at(c_policy)));
    row.spec.age_limit = static_cast<int>(parse_int(cells.at(c_age), "runs.csv age_limit"));
    row.spec.seed = static_cast<std::uint64_t>(parse_int(cells.at(c_seed), "runs.csv seed"));
    row.metrics.sensing_rate = parse_double(cells.at(c_rate), "runs.csv sensing_rate");
    row.metrics.mean_queue = parse_double(cells.at(c_queue), "runs.csv mean_queue");
    row.metrics.top1 = parse_double(cells.at(c_top1), "runs.csv top1");
    row.metrics.top3 = parse_double(cells.at(c_top3), "runs.csv top3");
    row.metrics.mean_loss = parse_double(cells.at(c_loss), "runs.csv mean_loss");
    rows.push_back(row);
  }
  return rows;
}

// Aggregates f(row) over seeds for each (group label, x).
template <typename GroupFn, typename XFn, typename ValueFn>
std::vector<Series> aggregate_series(const std::vector<RunRow>& rows, GroupFn group_of,
                                     XFn x_of, ValueFn value_of) {
  std::map<std::string, std::map<double, std::pair<std::vector<double>, int>>> data;
  for (const RunRow& row : rows) {
    data[group_of(row)][x_of(row)].first.push_back(value_of(row));
  }
  std::vector<Series> out;
  for (const auto& [name, xmap] : data) {
    Series s;
    s.name = name;
    for (const auto& [x, bucket] : xmap) {
      const std::vector<double>& values = bucket.first;
      double mean = 0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double sd =
          values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      s.points.push_back({x, mean, sd});
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Single-run metrics.csv has the runs.csv schema minus the status column.
std::vector<RunRow> load_runs_from_metrics(const std::string& metrics_csv) {
  const CsvTable table = read_csv(metrics_csv);
  std::vector<RunRow> rows;
  for (const auto& cells : table.rows) {
    RunRow row;
    row.spec.budget = parse_double(cells.at(table.column("budget")), "metrics budget");
    row.spec.v_param = parse_double(cells.at(table.column("v")), "metrics v");
    row.spec.policy = policies::parse_policy_kind(trim(cells.at(table.column("policy"))));
    row.spec.age_limit =
        static_cast<int>(parse_int(cells.at(table.column("age_limit")), "metrics age_limit"));
    row.spec.seed =
        static_cast<std::uint64_t>(parse_int(cells.at(table.column("seed")), "metrics seed"));
    row.metrics.sensing_rate =
        parse_double(cells.at(table.column("sensing_rate")), "metrics sensing_rate");
    row.metrics.mean_queue =
        parse_double(cells.at(table.column("mean_queue")), "metrics mean_queue");
    row.metrics.top1 = parse_double(cells.at(table.column("top1")), "metrics top1");
    row.metrics.top3 = parse_double(cells.at(table.column("top3")), "metrics top3");
    row.metrics.mean_loss =
        parse_double(cells.at(table.column("mean_loss")), "metrics mean_loss");
    rows.push_back(row);
  }
  return rows;
}

std::vector<Series> trace_curves(const std::string& results_dir, const std::string& column,
                                 bool running_average) {
  std::vector<Series> out;
  std::vector<std::string> dirs;
  const std::string arms_dir = results_dir + "/arms";
  if (fs::exists(arms_dir)) {
    for (const auto& entry : fs::directory_iterator(arms_dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / "trace.csv")) {
        dirs.push_back(entry.path().string());
      }
    }
  }
  if (fs::exists(results_dir + "/trace.csv")) {
    dirs.push_back(results_dir);
  }
  std::sort(dirs.begin(), dirs.end());
  for (const std::string& dir : dirs) {
    const CsvTable table = read_csv(dir + "/trace.csv");
    const int col = table.column(column);
    Series s;
    s.name = fs::path(dir).filename().string();
    const std::size_t n = table.rows.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 400);
    double running = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double value = parse_double(table.rows[i].at(col), column);
      running += value;
      if (i % stride == 0 || i + 1 == n) {
        const double y = running_average ? running / static_cast<double>(i + 1) : value;
        s.points.push_back({static_cast<double>(i), y, 0.0});
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<std::string> emit_plots(const std::string& results_dir,
                                    const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  auto emit = [&](const std::string& stem, const std::string& title,
                  const std::string& x_label, const std::string& y_label,
                  const std::vector<Series>& series) {
    if (series.empty()) return;
    bool any_points = false;
    for (const Series& s : series) {
      if (!s.points.empty()) any_points = true;
    }
    if (!any_points) return;
    const std::string csv_path = out_dir + "/" + stem + ".csv";
    const std::string svg_path = out_dir + "/" + stem + ".svg";
    write_file(csv_path, plot_data_csv(series));
    write_file(svg_path, svg_line_chart(title, x_label, y_label, series));
    written.push_back(csv_path);
    written.push_back(svg_path);
  };

  std::vector<RunRow> rows;
  const std::string runs_csv = results_dir + "/runs.csv";
  if (fs::exists(runs_csv)) {
    rows = load_runs(runs_csv);
  } else if (fs::exists(results_dir + "/metrics.csv")) {
    rows = load_runs_from_metrics(results_dir + "/metrics.csv");
  }

  if (!rows.empty()) {
    auto policy_group = [](const RunRow& r) {
      return policies::to_string(r.spec.policy) + "_N" + std::to_string(r.spec.age_limit);
    };
    emit("fig_method_top1", "Top-1 accuracy vs sensing budget", "sensing budget alpha_max",
         "top-1 accuracy",
         aggregate_series(
             rows, policy_group, [](const RunRow& r) { return r.spec.budget; },
             [](const RunRow& r) { return r.metrics.top1; }));
    emit("fig_method_top3", "Top-3 accuracy vs sensing budget", "sensing budget alpha_max",
         "top-3 accuracy",
         aggregate_series(
             rows, policy_group, [](const RunRow& r) { return r.spec.budget; },
             [](const RunRow& r) { return r.metrics.top3; }));

    auto budget_group = [](const RunRow& r) {
      return policies::to_string(r.spec.policy) + "_b" + format_double(r.spec.budget);
    };
    emit("fig_age_limit_top1", "Top-1 accuracy vs age limit", "age limit N",
         "top-1 accuracy",
         aggregate_series(
             rows, budget_group,
             [](const RunRow& r) { return static_cast<double>(r.spec.age_limit); },
             [](const RunRow& r) { return r.metrics.top1; }));
    emit("fig_age_limit_top3", "Top-3 accuracy vs age limit", "age limit N",
         "top-3 accuracy",
         aggregate_series(
             rows, budget_group,
             [](const RunRow& r) { return static_cast<double>(r.spec.age_limit); },
             [](const RunRow& r) { return r.metrics.top3; }));
    emit("fig_measured_rate", "Achieved sensing rate vs budget", "sensing budget alpha_max",
         "empirical sensing rate",
         aggregate_series(
             rows, policy_group, [](const RunRow& r) { return r.spec.budget; },
             [](const RunRow& r) { return r.metrics.sensing_rate; }));
  }

  // Inference runtime per budget, from the timings file.
  const std::string timings_csv = results_dir + "/timings.csv";
  if (!rows.empty() && fs::exists(timings_csv)) {
    const CsvTable table = read_csv(timings_csv);
    const int c_arm = table.column("arm");
    const int c_stage = table.column("stage");
    const int c_seconds = table.column("seconds");
    std::map<std::string, double> inference_seconds;
    for (const auto& cells : table.rows) {
      if (trim(cells.at(c_stage)) == "inference") {
        inference_seconds[trim(cells.at(c_arm))] =
            parse_double(cells.at(c_seconds), "timings seconds");
      }
    }
    std::vector<RunRow> timed;
    for (RunRow row : rows) {
      auto it = inference_seconds.find(row.spec.name());
      if (it == inference_seconds.end()) continue;
      row.metrics.wall_time_seconds = it->second;
      timed.push_back(row);
    }
    emit("fig_runtime", "Inference runtime vs sensing budget", "sensing budget alpha_max",
         "inference wall time [s]",
         aggregate_series(
             timed,
             [](const RunRow& r) {
               return policies::to_string(r.spec.policy) + "_N" +
                      std::to_string(r.spec.age_limit);
             },
             [](const RunRow& r) { return r.spec.budget; },
             [](const RunRow& r) { return r.metrics.wall_time_seconds; }));
  }

  // Running sensing-rate and queue curves from saved traces.
  emit("fig_rate_convergence", "Running sensing rate", "slot", "running mean action",
       trace_curves(results_dir, "action", true));
  emit("fig_queue", "Running mean virtual queue", "slot", "running mean Q(t)",
       trace_curves(results_dir, "queue", true));

  if (written.empty()) {
    throw std::runtime_error("emit_plots: no plottable results in " + results_dir);
  }
  return written;
}

}  // namespace beamsense::harness
