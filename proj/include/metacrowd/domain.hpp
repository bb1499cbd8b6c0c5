#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace metacrowd {

// Error hierarchy. Every failure raised by the library derives from Error so
// callers can catch one type at the boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or kind mismatch between values that must agree.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Invalid or incomplete configuration.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class InsufficientCandidatesError : public Error {
 public:
  using Error::Error;
};

class InsufficientAnnotationsError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

using TaskId = std::size_t;
using WorkerId = std::size_t;

/// A class label in [1, n]. Stored 1-based; index() gives the 0-based slot.
class Label {
 public:
  constexpr Label() = default;
  constexpr explicit Label(int value) : value_(value) {}

  static constexpr Label from_index(std::size_t index) { return Label(static_cast<int>(index) + 1); }

  constexpr int value() const { return value_; }
  constexpr std::size_t index() const { return static_cast<std::size_t>(value_ - 1); }

  friend constexpr bool operator==(Label, Label) = default;
  friend constexpr auto operator<=>(Label, Label) = default;

 private:
  int value_ = 1;
};

struct Task {
  TaskId id = 0;
  std::vector<double> features;
  // Simulator-only. Inference code never reads this.
  Label true_label;
};

enum class AnnotationKind { meta_probability, crowd_onehot, pad };

/// One worker's answer for one task: a probability vector (meta-worker),
/// a one-hot vector (crowd worker), or the all -1 pad that marks "not
/// annotated".
struct Annotation {
  std::vector<double> values;
  AnnotationKind kind = AnnotationKind::meta_probability;

  std::size_t size() const { return values.size(); }
  bool is_pad() const { return kind == AnnotationKind::pad; }

  static Annotation meta(std::vector<double> probabilities) {
    return {std::move(probabilities), AnnotationKind::meta_probability};
  }
  static Annotation onehot(Label label, std::size_t n) {
    std::vector<double> v(n, 0.0);
    v.at(label.index()) = 1.0;
    return {std::move(v), AnnotationKind::crowd_onehot};
  }
  static Annotation pad(std::size_t n) { return {std::vector<double>(n, -1.0), AnnotationKind::pad}; }
};

/// Argmax over a real vector; ties resolve to the lowest index.
inline Label argmax_label(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return Label::from_index(best);
}

inline bool validate_annotation(const Annotation& a, std::size_t n) {
  if (a.values.size() != n) {
    throw StructuralError("annotation length " + std::to_string(a.values.size()) + " does not match label space " +
                          std::to_string(n));
  }
  switch (a.kind) {
    case AnnotationKind::meta_probability: {
      double sum = 0.0;
      for (double v : a.values) {
        if (!(v >= 0.0)) return false;
        sum += v;
      }
      return std::abs(sum - 1.0) <= 1e-9;
    }
    case AnnotationKind::crowd_onehot: {
      std::size_t ones = 0;
      for (double v : a.values) {
        if (v == 1.0) {
          ++ones;
        } else if (v != 0.0) {
          return false;
        }
      }
      return ones == 1;
    }
    case AnnotationKind::pad:
      for (double v : a.values) {
        if (v != -1.0) return false;
      }
      return true;
  }
  return false;
}

/// Clip negatives, rescale to unit sum. Degenerate input maps to uniform.
inline Annotation normalize_annotation(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : out) {
    if (!(x > 0.0)) x = 0.0;
    sum += x;
  }
  if (sum <= 1e-12) {
    std::fill(out.begin(), out.end(), out.empty() ? 0.0 : 1.0 / static_cast<double>(out.size()));
  } else {
    for (double& x : out) x /= sum;
  }
  return Annotation::meta(std::move(out));
}

/// One worker's annotations, one row per task (rows indexed by position in
/// the task list the matrix was built over).
struct AnnotationMatrix {
  WorkerId worker_id = 0;
  std::vector<Annotation> rows;

  std::size_t size() const { return rows.size(); }
};

inline bool validate_matrix(const AnnotationMatrix& m, std::size_t n, bool allow_pad) {
  for (const auto& row : m.rows) {
    if (row.is_pad() && !allow_pad) return false;
    if (!validate_annotation(row, n)) return false;
  }
  return true;
}

enum class WorkerType { spammer, random, normal, expert };

inline const char* to_string(WorkerType t) {
  switch (t) {
    case WorkerType::spammer:
      return "spammer";
    case WorkerType::random:
      return "random";
    case WorkerType::normal:
      return "normal";
    case WorkerType::expert:
      return "expert";
  }
  return "?";
}

inline constexpr WorkerType kWorkerTypes[] = {WorkerType::spammer, WorkerType::random, WorkerType::normal,
                                              WorkerType::expert};

using WorkerProportions = std::map<WorkerType, double>;

/// Middle column of the worker setup table: 10/10/70/10, mean capacity 0.600.
inline WorkerProportions typical_proportions() {
  return {{WorkerType::spammer, 0.10}, {WorkerType::random, 0.10}, {WorkerType::normal, 0.70}, {WorkerType::expert, 0.10}};
}

/// Low-quality column: 10/20/60/10. Uniform draws within the bands give a mean
/// capacity of 0.5725; capacity_535_proportions() reaches 0.535 exactly.
inline WorkerProportions low_quality_proportions() {
  return {{WorkerType::spammer, 0.10}, {WorkerType::random, 0.20}, {WorkerType::normal, 0.60}, {WorkerType::expert, 0.10}};
}

/// 15/25/50/10, mean capacity exactly 0.535.
inline WorkerProportions capacity_535_proportions() {
  return {{WorkerType::spammer, 0.15}, {WorkerType::random, 0.25}, {WorkerType::normal, 0.50}, {WorkerType::expert, 0.10}};
}

/// High-quality column: 10/10/50/30, mean capacity 0.650.
inline WorkerProportions high_quality_proportions() {
  return {{WorkerType::spammer, 0.10}, {WorkerType::random, 0.10}, {WorkerType::normal, 0.50}, {WorkerType::expert, 0.30}};
}

struct ProjectConfig {
  std::size_t N = 3000;
  std::size_t n = 5;
  std::size_t k = 5;
  std::size_t d = 16;
  double sep = 8.0;
  double theta = 0.33;
  std::size_t n_add = 3;
  double gamma = 1.34;
  std::size_t W_m = 3;
  std::size_t W_c = 30;
  WorkerProportions worker_proportions = typical_proportions();
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 1) throw ConfigurationError("n must be at least 1");
    if (k < 1) throw ConfigurationError("k must be at least 1");
    if (d < 1) throw ConfigurationError("d must be at least 1");
    if (!(gamma >= 1.0)) throw ConfigurationError("gamma must be >= 1");
    // Endpoints are admitted so threshold sweeps can cover the closed interval.
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigurationError("theta must lie in [0, 1]");
    if (!(static_cast<double>(N) > gamma * static_cast<double>(n * k))) {
      throw ConfigurationError("N must exceed gamma * n * k");
    }
    double total = 0.0;
    for (const auto& [type, p] : worker_proportions) {
      if (p < 0.0) throw ConfigurationError(std::string("negative proportion for ") + to_string(type));
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigurationError("worker proportions must sum to 1");
  }
};

}  // namespace metacrowd
