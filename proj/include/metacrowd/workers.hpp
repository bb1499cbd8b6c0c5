#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "metacrowd/domain.hpp"
#include "metacrowd/random.hpp"

namespace metacrowd {

struct AccuracyBand {
  double floor;
  double ceiling;
};

inline AccuracyBand accuracy_band(WorkerType type) {
  switch (type) {
    case WorkerType::spammer:
      return {0.10, 0.25};
    case WorkerType::random:
      return {0.25, 0.50};
    case WorkerType::normal:
      return {0.50, 0.80};
    case WorkerType::expert:
      return {0.80, 1.00};
  }
  return {0.0, 1.0};
}

/// Expected pool capacity under uniform draws within each band.
inline double expected_capacity(const WorkerProportions& proportions) {
  double mean = 0.0;
  for (const auto& [type, p] : proportions) {
    const auto band = accuracy_band(type);
    mean += p * 0.5 * (band.floor + band.ceiling);
  }
  return mean;
}

struct CrowdWorker {
  WorkerId id = 0;
  WorkerType worker_type = WorkerType::normal;
  double true_accuracy = 0.0;  // simulator secret
  double estimated_accuracy = 0.0;
  bool eligible_for_difficult = false;
};

/// Worker types by largest-remainder rounding of proportions * count, then
/// accuracies uniform within each type's band.
inline std::vector<CrowdWorker> spawn_crowd_pool(const WorkerProportions& proportions, long count, std::uint64_t seed) {
  if (count <= 0) throw ConfigurationError("crowd pool size must be positive");
  double total = 0.0;
  for (const auto& [type, p] : proportions) total += p;
  if (std::abs(total - 1.0) > 1e-9) throw ConfigurationError("worker proportions must sum to 1");

  struct Share {
    WorkerType type;
    std::size_t whole;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (WorkerType type : kWorkerTypes) {
    const auto it = proportions.find(type);
    const double exact = (it == proportions.end() ? 0.0 : it->second) * static_cast<double>(count);
    // Guard against 0.7 * 30 = 20.999... style representation error.
    const double whole = std::floor(exact + 1e-9);
    shares.push_back({type, static_cast<std::size_t>(whole), exact - whole});
    assigned += static_cast<std::size_t>(whole);
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
  for (std::size_t i = 0; assigned < static_cast<std::size_t>(count); ++i, ++assigned) {
    ++shares[order[i % order.size()]].whole;
  }

  Rng rng = make_rng(seed, Stream::crowd_pool);
  std::vector<CrowdWorker> pool;
  pool.reserve(static_cast<std::size_t>(count));
  for (const auto& share : shares) {
    const auto band = accuracy_band(share.type);
    std::uniform_real_distribution<double> draw(band.floor, band.ceiling);
    for (std::size_t i = 0; i < share.whole; ++i) {
      CrowdWorker w;
      w.id = pool.size();
      w.worker_type = share.type;
      w.true_accuracy = draw(rng);
      pool.push_back(w);
    }
  }
  return pool;
}

/// Correct with probability mu*, otherwise a uniformly chosen wrong label.
inline Annotation simulate_crowd_annotation(const CrowdWorker& worker, const Task& task, std::size_t n, Rng& rng) {
  const double u = uniform01(rng);
  if (n == 1 || u < worker.true_accuracy) return Annotation::onehot(task.true_label, n);
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  std::size_t wrong = pick(rng);
  if (wrong >= task.true_label.index()) ++wrong;
  return Annotation::onehot(Label::from_index(wrong), n);
}

struct MetaWorker {
  WorkerId id = 0;
  std::string algorithm_name;
  Eigen::MatrixXd true_confusion;  // simulator secret, row-stochastic
  double sharpness = 10.0;
  // Gaussian-copula correlation of this worker's errors with the shared
  // per-task difficulty. 0 gives independent errors.
  double error_correlation = 0.9;
  // Weight of the confusion row in the Dirichlet base measure; the rest goes
  // to the one-hot of the label the worker settled on. 1 gives a plain
  // Dirichlet(alpha * row) annotator.
  double prior_blend = 0.45;
};

struct MetaWorkerOptions {
  double sharpness = 10.0;
  double error_correlation = 0.9;
  double prior_blend = 0.45;
};

inline std::vector<MetaWorker> spawn_meta_workers(std::size_t n, std::size_t count, double target_diagonal,
                                                  std::uint64_t seed, const MetaWorkerOptions& options = {}) {
  if (count < 1) throw ConfigurationError("at least one meta-worker is required");
  if (n < 1) throw ConfigurationError("label space must be non-empty");
  const double chance = 1.0 / static_cast<double>(n);
  if (n > 1 && !(target_diagonal > chance && target_diagonal <= 1.0)) {
    throw ConfigurationError("target diagonal must lie in (1/n, 1]");
  }
  // Jitter of +-0.05, narrowed so the draw stays inside (1/n, 1].
  const double half_width = std::max(0.0, std::min({0.05, 1.0 - target_diagonal, target_diagonal - chance}));

  static const char* kNames[] = {"MAML-like", "MN-like", "RN-like"};
  Rng rng = make_rng(seed, Stream::meta_spawn);
  std::vector<MetaWorker> workers;
  for (std::size_t w = 0; w < count; ++w) {
    MetaWorker mw;
    mw.id = w;
    mw.algorithm_name = w < 3 ? kNames[w] : "meta-" + std::to_string(w + 1);
    mw.sharpness = options.sharpness;
    mw.error_correlation = options.error_correlation;
    mw.prior_blend = options.prior_blend;
    mw.true_confusion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::uniform_real_distribution<double> jitter(-half_width, half_width);
    const std::vector<double> flat(n > 1 ? n - 1 : 0, 1.0);
    for (std::size_t p = 0; p < n; ++p) {
      const double diag = n == 1 ? 1.0 : std::clamp(target_diagonal + jitter(rng), 0.0, 1.0);
      const auto ip = static_cast<Eigen::Index>(p);
      mw.true_confusion(ip, ip) = diag;
      if (n == 1) continue;
      const auto off = sample_dirichlet(flat, rng);
      for (std::size_t q = 0, j = 0; q < n; ++q) {
        if (q == p) continue;
        mw.true_confusion(ip, static_cast<Eigen::Index>(q)) = (1.0 - diag) * off[j++];
      }
      mw.true_confusion.row(ip) /= mw.true_confusion.row(ip).sum();
    }
    workers.push_back(std::move(mw));
  }
  return workers;
}

/// Latent difficulty shared by every meta-worker looking at the same task.
/// A high latent pushes all workers toward the tail of their confusion row
/// at once, and the shared wrong-label order makes them drift toward the same
/// confusers.
struct TaskDifficulty {
  double latent = 0.0;
  std::vector<std::size_t> wrong_label_order;  // 0-based labels, true label excluded
};

inline TaskDifficulty draw_task_difficulty(const Task& task, std::size_t n, Rng& rng) {
  TaskDifficulty td;
  td.latent = standard_normal(rng);
  for (std::size_t q = 0; q < n; ++q) {
    if (q != task.true_label.index()) td.wrong_label_order.push_back(q);
  }
  std::shuffle(td.wrong_label_order.begin(), td.wrong_label_order.end(), rng);
  return td;
}

/// Probability-vector annotation. The worker first settles on a label q whose
/// marginal law is row p of its confusion matrix (p = true label), coupled to
/// the task's latent difficulty; the annotation is then
/// Dirichlet(alpha * ((1 - blend) e_q + blend * M_p) + 1e-3). Its expectation
/// is row p of the confusion matrix for every blend.
inline Annotation simulate_meta_annotation(const MetaWorker& worker, const Task& task, const TaskDifficulty& difficulty,
                                           Rng& rng) {
  const auto n = static_cast<std::size_t>(worker.true_confusion.cols());
  const auto p = static_cast<Eigen::Index>(task.true_label.index());
  const double rho = std::clamp(worker.error_correlation, 0.0, 1.0);
  const double eps = standard_normal(rng);
  const double u = normal_cdf(std::sqrt(rho) * difficulty.latent + std::sqrt(1.0 - rho) * eps);

  std::size_t chosen = static_cast<std::size_t>(p);
  double cumulative = worker.true_confusion(p, p);
  if (u > cumulative) {
    for (std::size_t q : difficulty.wrong_label_order) {
      chosen = q;
      cumulative += worker.true_confusion(p, static_cast<Eigen::Index>(q));
      if (u <= cumulative) break;
    }
  }

  const double blend = std::clamp(worker.prior_blend, 0.0, 1.0);
  std::vector<double> concentration(n);
  for (std::size_t q = 0; q < n; ++q) {
    const double base = blend * worker.true_confusion(p, static_cast<Eigen::Index>(q)) + (q == chosen ? 1.0 - blend : 0.0);
    concentration[q] = worker.sharpness * base + 1e-3;
  }
  const auto draw = sample_dirichlet(concentration, rng);
  return normalize_annotation(draw);
}

struct WorkerQuality {
  double estimated_accuracy = 0.0;
  bool eligible_for_difficult = false;
};

inline constexpr double kEligibilityCutoff = 0.5;

/// Accuracy on the golden tasks; eligible when it reaches the cutoff.
inline WorkerQuality estimate_worker_quality(std::span<const Label> answers, std::span<const Label> golden_labels) {
  if (golden_labels.empty()) throw EstimationError("no golden tasks to estimate worker quality from");
  if (answers.size() != golden_labels.size()) {
    throw StructuralError("worker must answer every golden task");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < answers.size(); ++i) correct += answers[i] == golden_labels[i] ? 1 : 0;
  WorkerQuality q;
  q.estimated_accuracy = static_cast<double>(correct) / static_cast<double>(golden_labels.size());
  q.eligible_for_difficult = q.estimated_accuracy >= kEligibilityCutoff;
  return q;
}

inline void apply_quality(CrowdWorker& worker, const WorkerQuality& quality) {
  worker.estimated_accuracy = quality.estimated_accuracy;
  worker.eligible_for_difficult = quality.eligible_for_difficult;
}

}  // namespace metacrowd
