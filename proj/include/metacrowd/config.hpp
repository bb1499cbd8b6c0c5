#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metacrowd/domain.hpp"

namespace metacrowd {

enum class Method { metacrowd, metacrowd_oc, metacrowd_om };
enum class ConsensusKind { mv, wmv_em };
enum class SweepParameter { theta, n_add };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::metacrowd:
      return "metacrowd";
    case Method::metacrowd_oc:
      return "metacrowd_oc";
    case Method::metacrowd_om:
      return "metacrowd_om";
  }
  return "?";
}

inline const char* to_string(ConsensusKind c) { return c == ConsensusKind::mv ? "mv" : "wmv_em"; }
inline const char* to_string(SweepParameter s) { return s == SweepParameter::theta ? "theta" : "n_add"; }

inline Method parse_method(std::string_view s) {
  if (s == "metacrowd") return Method::metacrowd;
  if (s == "metacrowd_oc") return Method::metacrowd_oc;
  if (s == "metacrowd_om") return Method::metacrowd_om;
  throw ConfigurationError("unknown method '" + std::string(s) + "'");
}

inline ConsensusKind parse_consensus(std::string_view s) {
  if (s == "mv") return ConsensusKind::mv;
  if (s == "wmv_em") return ConsensusKind::wmv_em;
  throw ConfigurationError("unknown consensus '" + std::string(s) + "'");
}

inline SweepParameter parse_sweep_parameter(std::string_view s) {
  if (s == "theta") return SweepParameter::theta;
  if (s == "n_add") return SweepParameter::n_add;
  throw ConfigurationError("unknown sweep parameter '" + std::string(s) + "'");
}

struct SweepSpec {
  SweepParameter parameter = SweepParameter::theta;
  std::vector<double> values;
};

struct ExperimentConfig {
  ProjectConfig project;
  double alpha = 10.0;
  double meta_diagonal = 0.6;
  double meta_correlation = 0.9;
  double meta_prior_blend = 0.45;
  Method method = Method::metacrowd;
  ConsensusKind consensus = ConsensusKind::wmv_em;
  std::size_t replications = 1;
  std::optional<SweepSpec> sweep;
  std::string output_path = "results";
  // Score support tasks (by their crowd-consensus label) alongside the query set.
  bool score_support = true;
  std::size_t max_em_iterations = 100;

  void validate() const {
    project.validate();
    if (replications < 1) throw ConfigurationError("replications must be at least 1");
    if (!(alpha > 0.0)) throw ConfigurationError("alpha must be positive");
    if (!(meta_correlation >= 0.0 && meta_correlation <= 1.0)) throw ConfigurationError("meta_correlation must lie in [0, 1]");
    if (!(meta_prior_blend >= 0.0 && meta_prior_blend <= 1.0)) throw ConfigurationError("meta_prior_blend must lie in [0, 1]");
    if (sweep) {
      if (sweep->values.empty()) throw ConfigurationError("sweep grid is empty");
      for (double v : sweep->values) {
        if (sweep->parameter == SweepParameter::theta && !(v >= 0.0 && v <= 1.0)) {
          throw ConfigurationError("theta sweep values must lie in [0, 1]");
        }
        if (sweep->parameter == SweepParameter::n_add && (!(v >= 0.0) || v != std::floor(v))) {
          throw ConfigurationError("n_add sweep values must be non-negative integers");
        }
      }
    }
  }
};

/// Keys accepted by config files and mirrored as CLI flags.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "N",       "n",           "k",          "d",           "sep",          "theta",        "n_add",
      "gamma",   "W_m",         "W_c",        "alpha",       "meta_diagonal", "proportions.spammer",
      "proportions.random",     "proportions.normal",       "proportions.expert",          "method",
      "consensus", "replications", "seed",    "sweep.parameter", "sweep.values", "output_path",
      "meta_correlation",       "meta_prior_blend",         "score_support",               "max_em_iterations",
  };
  return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigurationError("'" + key + "' expects a number, got '" + value + "'");
  }
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& value) {
  Int v{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigurationError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigurationError("'" + key + "' expects true/false, got '" + value + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

/// Applies one key = value setting. Unknown keys are rejected.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string value = trim(raw);
  auto& p = cfg.project;
  if (key == "N") {
    p.N = parse_integer<std::size_t>(key, value);
  } else if (key == "n") {
    p.n = parse_integer<std::size_t>(key, value);
  } else if (key == "k") {
    p.k = parse_integer<std::size_t>(key, value);
  } else if (key == "d") {
    p.d = parse_integer<std::size_t>(key, value);
  } else if (key == "sep") {
    p.sep = parse_double(key, value);
  } else if (key == "theta") {
    p.theta = parse_double(key, value);
  } else if (key == "n_add") {
    p.n_add = parse_integer<std::size_t>(key, value);
  } else if (key == "gamma") {
    p.gamma = parse_double(key, value);
  } else if (key == "W_m") {
    p.W_m = parse_integer<std::size_t>(key, value);
  } else if (key == "W_c") {
    p.W_c = parse_integer<std::size_t>(key, value);
  } else if (key == "seed") {
    p.seed = parse_integer<std::uint64_t>(key, value);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "meta_diagonal") {
    cfg.meta_diagonal = parse_double(key, value);
  } else if (key == "meta_correlation") {
    cfg.meta_correlation = parse_double(key, value);
  } else if (key == "meta_prior_blend") {
    cfg.meta_prior_blend = parse_double(key, value);
  } else if (key.rfind("proportions.", 0) == 0) {
    const std::string type = key.substr(std::string("proportions.").size());
    const double share = parse_double(key, value);
    bool found = false;
    for (WorkerType t : kWorkerTypes) {
      if (type == to_string(t)) {
        p.worker_proportions[t] = share;
        found = true;
      }
    }
    if (!found) throw ConfigurationError("unknown worker type '" + type + "'");
  } else if (key == "method") {
    cfg.method = parse_method(value);
  } else if (key == "consensus") {
    cfg.consensus = parse_consensus(value);
  } else if (key == "replications") {
    cfg.replications = parse_integer<std::size_t>(key, value);
  } else if (key == "sweep.parameter") {
    if (!cfg.sweep) cfg.sweep.emplace();
    cfg.sweep->parameter = parse_sweep_parameter(value);
  } else if (key == "sweep.values") {
    if (!cfg.sweep) cfg.sweep.emplace();
    cfg.sweep->values = parse_list(key, value);
  } else if (key == "output_path") {
    cfg.output_path = value;
  } else if (key == "score_support") {
    cfg.score_support = parse_bool(key, value);
  } else if (key == "max_em_iterations") {
    cfg.max_em_iterations = parse_integer<std::size_t>(key, value);
  } else {
    throw ConfigurationError("unknown configuration key '" + key + "'");
  }
}

/// Parses flat "key = value" text. '#' starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigurationError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_setting(cfg, detail::trim(body.substr(0, eq)), body.substr(eq + 1));
  }
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig cfg = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(cfg));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse_config(in, std::move(cfg));
}

/// Inverse of parse_config: every key, one per line.
inline std::string to_config_text(const ExperimentConfig& cfg) {
  using detail::format_double;
  const auto& p = cfg.project;
  std::ostringstream os;
  os << "N = " << p.N << "\n"
     << "n = " << p.n << "\n"
     << "k = " << p.k << "\n"
     << "d = " << p.d << "\n"
     << "sep = " << format_double(p.sep) << "\n"
     << "theta = " << format_double(p.theta) << "\n"
     << "n_add = " << p.n_add << "\n"
     << "gamma = " << format_double(p.gamma) << "\n"
     << "W_m = " << p.W_m << "\n"
     << "W_c = " << p.W_c << "\n"
     << "alpha = " << format_double(cfg.alpha) << "\n"
     << "meta_diagonal = " << format_double(cfg.meta_diagonal) << "\n"
     << "meta_correlation = " << format_double(cfg.meta_correlation) << "\n"
     << "meta_prior_blend = " << format_double(cfg.meta_prior_blend) << "\n";
  for (WorkerType t : kWorkerTypes) {
    const auto it = p.worker_proportions.find(t);
    os << "proportions." << to_string(t) << " = " << format_double(it == p.worker_proportions.end() ? 0.0 : it->second)
       << "\n";
  }
  os << "method = " << to_string(cfg.method) << "\n"
     << "consensus = " << to_string(cfg.consensus) << "\n"
     << "replications = " << cfg.replications << "\n"
     << "seed = " << p.seed << "\n";
  if (cfg.sweep) {
    os << "sweep.parameter = " << to_string(cfg.sweep->parameter) << "\n" << "sweep.values = ";
    for (std::size_t i = 0; i < cfg.sweep->values.size(); ++i) {
      os << (i ? "," : "") << format_double(cfg.sweep->values[i]);
    }
    os << "\n";
  }
  os << "output_path = " << cfg.output_path << "\n"
     << "score_support = " << (cfg.score_support ? "true" : "false") << "\n"
     << "max_em_iterations = " << cfg.max_em_iterations << "\n";
  return os.str();
}

}  // namespace metacrowd
