#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "metacrowd/domain.hpp"

namespace metacrowd {

enum class Phase { support, difficult };

inline const char* to_string(Phase p) { return p == Phase::support ? "support" : "difficult"; }

struct LedgerEntry {
  Phase phase;
  TaskId task_id;
  WorkerId worker_id;
};

/// Append-only log of human (crowd) annotations. Meta annotations are free and
/// never recorded.
class BudgetLedger {
 public:
  void record(Phase phase, TaskId task_id, WorkerId worker_id) {
    entries_.push_back({phase, task_id, worker_id});
    (phase == Phase::support ? support_ : difficult_) += 1;
  }

  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::size_t support_count() const { return support_; }
  std::size_t difficult_count() const { return difficult_; }
  std::size_t total() const { return support_ + difficult_; }

 private:
  std::vector<LedgerEntry> entries_;
  std::size_t support_ = 0;
  std::size_t difficult_ = 0;
};

enum class BudgetMethod { metacrowd, metacrowd_oc, active, qasca };

struct BudgetParams {
  std::optional<double> N;
  std::optional<double> n;
  std::optional<double> k;
  std::optional<double> W_m;
  std::optional<double> W_c;
  std::optional<double> gamma;
  std::optional<double> beta;
};

namespace detail {
inline double require(const std::optional<double>& v, const char* name) {
  if (!v) throw ConfigurationError(std::string("closed-form budget needs parameter ") + name);
  return *v;
}
}  // namespace detail

/// Expected annotation count of each method, at full precision.
inline double estimate_closed_form(BudgetMethod method, const BudgetParams& p) {
  using detail::require;
  switch (method) {
    case BudgetMethod::metacrowd_oc:
      return require(p.N, "N") * require(p.W_m, "W_m");
    case BudgetMethod::qasca:
      return 3.0 * require(p.N, "N");
    case BudgetMethod::active:
      return (require(p.W_m, "W_m") + 2.0) / 3.0 * require(p.N, "N");
    case BudgetMethod::metacrowd: {
      const double support_tasks = require(p.gamma, "gamma") * require(p.n, "n") * require(p.k, "k");
      return support_tasks * require(p.W_c, "W_c") +
             (require(p.N, "N") - support_tasks) * require(p.beta, "beta") * require(p.W_m, "W_m");
    }
  }
  throw ConfigurationError("unknown budget method");
}

/// Whole annotations, rounded down (3971.5 displays as 3971).
inline long display_budget(double estimate) { return static_cast<long>(std::floor(estimate + 1e-9)); }

}  // namespace metacrowd
