#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "metacrowd/config.hpp"
#include "metacrowd/pipeline.hpp"

namespace metacrowd {

inline constexpr int kFormatVersion = 1;

inline const std::vector<std::string>& run_csv_columns() {
  static const std::vector<std::string> cols = {
      "method",       "consensus",      "seed",           "N",                "n",
      "k",            "theta",          "n_add",          "accuracy",         "budget_total",
      "budget_support", "budget_difficult", "beta_observed", "em_iterations", "converged",
      "wall_time_ms"};
  return cols;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

inline std::string csv_row(const RunResult& r) {
  using detail::fixed;
  std::ostringstream os;
  os << to_string(r.method) << ',' << to_string(r.consensus) << ',' << r.seed << ',' << r.N << ',' << r.n << ','
     << r.k << ',' << fixed(r.theta, 4) << ',' << r.n_add << ',' << fixed(r.accuracy, 6) << ',' << r.budget_total
     << ',' << r.budget_support << ',' << r.budget_difficult << ',' << fixed(r.beta_observed, 6) << ','
     << r.em_iterations << ',' << (r.converged ? "true" : "false") << ',' << fixed(r.wall_time_ms, 3);
  return os.str();
}

inline RunResult parse_csv_row(const std::string& line) {
  const auto f = detail::split(line, ',');
  if (f.size() != run_csv_columns().size()) throw StructuralError("result row has " + std::to_string(f.size()) + " fields");
  RunResult r;
  try {
    r.method = parse_method(f[0]);
    r.consensus = parse_consensus(f[1]);
    r.seed = std::stoull(f[2]);
    r.N = std::stoull(f[3]);
    r.n = std::stoull(f[4]);
    r.k = std::stoull(f[5]);
    r.theta = std::stod(f[6]);
    r.n_add = std::stoull(f[7]);
    r.accuracy = std::stod(f[8]);
    r.budget_total = std::stoull(f[9]);
    r.budget_support = std::stoull(f[10]);
    r.budget_difficult = std::stoull(f[11]);
    r.beta_observed = std::stod(f[12]);
    r.em_iterations = std::stoull(f[13]);
    r.converged = f[14] == "true";
    r.wall_time_ms = std::stod(f[15]);
  } catch (const std::invalid_argument&) {
    throw StructuralError("malformed result row: " + line);
  } catch (const std::out_of_range&) {
    throw StructuralError("malformed result row: " + line);
  }
  return r;
}

inline std::string runs_csv(std::span<const RunResult> results) {
  std::ostringstream os;
  const auto& cols = run_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : results) os << csv_row(r) << '\n';
  return os.str();
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Welford update, so identical inputs give exactly zero spread.
inline Summary summarize(std::span<const double> xs) {
  Summary s;
  double m2 = 0.0;
  std::size_t count = 0;
  for (double x : xs) {
    ++count;
    const double delta = x - s.mean;
    s.mean += delta / static_cast<double>(count);
    m2 += delta * (x - s.mean);
  }
  if (count) s.stddev = std::sqrt(std::max(0.0, m2) / static_cast<double>(count));
  return s;
}

struct AggregateRow {
  Method method;
  ConsensusKind consensus;
  double theta;
  std::size_t n_add;
  std::size_t runs = 0;
  Summary accuracy;
  Summary budget_total;
  Summary beta_observed;
  Summary em_iterations;
};

/// Groups by (method, consensus, theta, n_add); any sweep value is one of the
/// last two keys.
inline std::vector<AggregateRow> aggregate(std::span<const RunResult> results) {
  using Key = std::tuple<int, int, double, std::size_t>;
  std::map<Key, std::vector<const RunResult*>> groups;
  std::vector<Key> order;
  for (const auto& r : results) {
    const Key key{static_cast<int>(r.method), static_cast<int>(r.consensus), r.theta, r.n_add};
    auto& g = groups[key];
    if (g.empty()) order.push_back(key);
    g.push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const auto& key : order) {
    const auto& g = groups[key];
    AggregateRow row{g.front()->method, g.front()->consensus, g.front()->theta, g.front()->n_add};
    row.runs = g.size();
    std::vector<double> acc, budget, beta, iters;
    for (const auto* r : g) {
      acc.push_back(r->accuracy);
      budget.push_back(static_cast<double>(r->budget_total));
      beta.push_back(r->beta_observed);
      iters.push_back(static_cast<double>(r->em_iterations));
    }
    row.accuracy = summarize(acc);
    row.budget_total = summarize(budget);
    row.beta_observed = summarize(beta);
    row.em_iterations = summarize(iters);
    rows.push_back(row);
  }
  return rows;
}

inline std::string aggregate_csv(std::span<const AggregateRow> rows) {
  using detail::fixed;
  std::ostringstream os;
  os << "method,consensus,theta,n_add,runs,accuracy_mean,accuracy_std,budget_mean,budget_std,beta_mean,beta_std,"
        "em_iterations_mean\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << to_string(r.consensus) << ',' << fixed(r.theta, 4) << ',' << r.n_add << ','
       << r.runs << ',' << fixed(r.accuracy.mean, 6) << ',' << fixed(r.accuracy.stddev, 6) << ','
       << fixed(r.budget_total.mean, 3) << ',' << fixed(r.budget_total.stddev, 3) << ','
       << fixed(r.beta_observed.mean, 6) << ',' << fixed(r.beta_observed.stddev, 6) << ','
       << fixed(r.em_iterations.mean, 3) << '\n';
  }
  return os.str();
}

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Minimal SVG line chart: one polyline plus point markers per series.
inline std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                                 std::span<const PlotSeries> series) {
  constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 60;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmin > xmax) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">" << xv
       << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
       << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\" font-size=\"13\">"
     << x_label << "</text>\n";
  os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
     << (T + H - B) / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : series[s].points) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    for (auto [x, y] : series[s].points) {
      os << "<circle class=\"point\" cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (s + 1) << "\" font-size=\"12\" fill=\"" << color << "\">"
       << series[s].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Accuracy and budget series against the swept parameter, one series per
/// (method, consensus).
inline std::pair<std::vector<PlotSeries>, std::vector<PlotSeries>> sweep_series(std::span<const AggregateRow> rows,
                                                                                 SweepParameter parameter) {
  std::map<std::string, std::size_t> index;
  std::vector<PlotSeries> accuracy, budget;
  for (const auto& r : rows) {
    const std::string name = std::string(to_string(r.method)) + "/" + to_string(r.consensus);
    auto [it, fresh] = index.emplace(name, accuracy.size());
    if (fresh) {
      accuracy.push_back({name, {}});
      budget.push_back({name, {}});
    }
    const double x = parameter == SweepParameter::theta ? r.theta : static_cast<double>(r.n_add);
    accuracy[it->second].points.emplace_back(x, r.accuracy.mean);
    budget[it->second].points.emplace_back(x, r.budget_total.mean);
  }
  for (auto* group : {&accuracy, &budget}) {
    for (auto& s : *group) std::sort(s.points.begin(), s.points.end());
  }
  return {accuracy, budget};
}

/// Self-describing results file: format version, optional sweep parameter,
/// column list, then one "run = <csv row>" line per result.
inline std::string results_text(std::span<const RunResult> results, std::optional<SweepParameter> parameter) {
  std::ostringstream os;
  os << "# metacrowd results\n"
     << "format_version = " << kFormatVersion << "\n";
  if (parameter) os << "sweep.parameter = " << to_string(*parameter) << "\n";
  os << "columns = ";
  const auto& cols = run_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : results) os << "run = " << csv_row(r) << "\n";
  return os.str();
}

struct StoredResults {
  std::vector<RunResult> runs;
  std::optional<SweepParameter> sweep_parameter;
};

inline StoredResults parse_results_text(std::istream& in) {
  StoredResults out;
  std::string line;
  bool versioned = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw StructuralError("results file: expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "format_version") {
      if (value != std::to_string(kFormatVersion)) throw StructuralError("unsupported results format " + value);
      versioned = true;
    } else if (key == "sweep.parameter") {
      out.sweep_parameter = parse_sweep_parameter(value);
    } else if (key == "run") {
      out.runs.push_back(parse_csv_row(value));
    } else if (key != "columns") {
      throw StructuralError("results file: unknown key " + key);
    }
  }
  if (!versioned) throw StructuralError("results file has no format_version");
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

struct ReportFiles {
  std::filesystem::path runs;
  std::filesystem::path aggregate;
  std::filesystem::path results;
  std::vector<std::filesystem::path> plots;
};

/// Writes runs.csv, aggregate.csv, results.txt and, for sweeps, accuracy.svg
/// and budget.svg under `directory`.
inline ReportFiles emit_report(std::span<const RunResult> results, const std::filesystem::path& directory,
                               std::optional<SweepParameter> parameter = std::nullopt) {
  if (results.empty()) throw ConfigurationError("no results to report");
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());

  ReportFiles files{directory / "runs.csv", directory / "aggregate.csv", directory / "results.txt", {}};
  write_file(files.runs, runs_csv(results));
  const auto rows = aggregate(results);
  write_file(files.aggregate, aggregate_csv(rows));
  write_file(files.results, results_text(results, parameter));
  if (parameter) {
    const auto [accuracy, budget] = sweep_series(rows, *parameter);
    const std::string x = to_string(*parameter);
    files.plots.push_back(directory / "accuracy.svg");
    write_file(files.plots.back(), svg_line_plot("Accuracy vs " + x, x, "accuracy", accuracy));
    files.plots.push_back(directory / "budget.svg");
    write_file(files.plots.back(), svg_line_plot("Budget vs " + x, x, "crowd annotations", budget));
  }
  return files;
}

/// Project file: format version, the generating configuration, then one
/// "task = id,true_label,f1,...,fd" line per task.
inline std::string project_text(const Project& project, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# metacrowd project\n"
     << "format_version = " << kFormatVersion << "\n"
     << to_config_text(cfg) << "tasks = " << project.tasks.size() << "\n";
  os << std::setprecision(17);
  for (const auto& t : project.tasks) {
    os << "task = " << t.id << ',' << t.true_label.value();
    for (double f : t.features) os << ',' << f;
    os << '\n';
  }
  return os.str();
}

struct StoredProject {
  ExperimentConfig config;
  std::vector<Task> tasks;
};

inline StoredProject parse_project_text(std::istream& in) {
  StoredProject out;
  std::ostringstream config_lines;
  std::string line;
  bool versioned = false;
  std::optional<std::size_t> declared;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw StructuralError("project file: expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "format_version") {
      if (value != std::to_string(kFormatVersion)) throw StructuralError("unsupported project format " + value);
      versioned = true;
    } else if (key == "tasks") {
      declared = std::stoull(value);
    } else if (key == "task") {
      const auto f = detail::split(value, ',');
      if (f.size() < 2) throw StructuralError("project file: short task line");
      Task t;
      t.id = std::stoull(f[0]);
      t.true_label = Label(std::stoi(f[1]));
      for (std::size_t i = 2; i < f.size(); ++i) t.features.push_back(std::stod(f[i]));
      out.tasks.push_back(std::move(t));
    } else {
      config_lines << key << " = " << value << "\n";
    }
  }
  if (!versioned) throw StructuralError("project file has no format_version");
  out.config = parse_config_text(config_lines.str());
  if (declared && *declared != out.tasks.size()) throw StructuralError("project file task count mismatch");
  return out;
}

}  // namespace metacrowd
