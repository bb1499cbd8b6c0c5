#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "metacrowd/domain.hpp"

namespace metacrowd {

inline constexpr double kProbabilityFloor = 1e-10;

/// KL(P || Q) in bits. Terms with P(x) = 0 contribute nothing; both sides are
/// floored at 1e-10 inside the log ratio only.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw StructuralError("KL divergence of distributions with different lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    sum += p[i] * std::log2(std::max(p[i], kProbabilityFloor) / std::max(q[i], kProbabilityFloor));
  }
  return std::max(sum, 0.0);
}

/// Symmetric Jensen-Shannon divergence in bits, within [0, 1].
inline double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw StructuralError("JS divergence of distributions with different lengths");
  std::vector<double> mid(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) mid[i] = 0.5 * (p[i] + q[i]);
  return std::clamp(0.5 * (kl_divergence(p, mid) + kl_divergence(q, mid)), 0.0, 1.0);
}

/// Average JS divergence over all unordered pairs of the annotation set.
inline double mean_pairwise_js(std::span<const Annotation> annotations) {
  if (annotations.size() < 2) throw InsufficientAnnotationsError("pairwise divergence needs at least two annotations");
  const std::size_t len = annotations.front().size();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (annotations[i].size() != len) throw StructuralError("annotations of different lengths");
    for (std::size_t j = i + 1; j < annotations.size(); ++j) {
      sum += js_divergence(annotations[i].values, annotations[j].values);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

struct DivergenceReport {
  std::vector<double> scores;               // one per task, in input order
  std::vector<std::size_t> difficult_set;   // positions with score > theta, ascending
  double theta = 0.0;
};

/// Scores every task's meta annotations and flags those strictly above theta.
inline DivergenceReport route_difficult_tasks(std::span<const std::vector<Annotation>> meta_annotation_sets,
                                              double theta) {
  DivergenceReport report;
  report.theta = theta;
  if (meta_annotation_sets.empty()) return report;
  const std::size_t expected = meta_annotation_sets.front().size();
  report.scores.reserve(meta_annotation_sets.size());
  for (std::size_t i = 0; i < meta_annotation_sets.size(); ++i) {
    const auto& set = meta_annotation_sets[i];
    if (set.size() != expected) {
      throw StructuralError("task " + std::to_string(i) + " has " + std::to_string(set.size()) +
                            " meta annotations, expected " + std::to_string(expected));
    }
    const double score = mean_pairwise_js(set);
    report.scores.push_back(score);
    if (score > theta) report.difficult_set.push_back(i);
  }
  return report;
}

/// Replaces the difficult set with the `count` highest-scoring tasks (ties to
/// the lower position), for experiments that pin the routed fraction.
inline void pin_difficult_tasks(DivergenceReport& report, std::size_t count) {
  if (count > report.scores.size()) throw ConfigurationError("cannot pin more difficult tasks than scored tasks");
  std::vector<std::size_t> order(report.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.scores[a] > report.scores[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  report.difficult_set = std::move(order);
}

}  // namespace metacrowd
