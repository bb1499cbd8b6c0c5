#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "metacrowd/domain.hpp"

namespace metacrowd {

/// Psi plus the current consensus labels.
struct ConsensusState {
  std::vector<Eigen::MatrixXd> meta_confusions;
  std::vector<double> crowd_accuracies;
  std::vector<Label> labels;
  std::size_t iteration = 0;
};

/// Dense N x W x n tensor of corrected annotations. Pad slices stay zero.
class AnnotationTensor {
 public:
  AnnotationTensor(std::size_t tasks, std::size_t workers, std::size_t labels)
      : tasks_(tasks), workers_(workers), labels_(labels), data_(tasks * workers * labels, 0.0) {}

  std::size_t tasks() const { return tasks_; }
  std::size_t workers() const { return workers_; }
  std::size_t labels() const { return labels_; }

  std::span<double> slice(std::size_t task, std::size_t worker) {
    return {data_.data() + (task * workers_ + worker) * labels_, labels_};
  }
  std::span<const double> slice(std::size_t task, std::size_t worker) const {
    return {data_.data() + (task * workers_ + worker) * labels_, labels_};
  }

  void set(std::size_t task, std::size_t worker, std::span<const double> values) {
    if (values.size() != labels_) throw StructuralError("tensor slice length mismatch");
    std::copy(values.begin(), values.end(), slice(task, worker).begin());
  }

  void scale(double factor) {
    for (double& v : data_) v *= factor;
  }

 private:
  std::size_t tasks_;
  std::size_t workers_;
  std::size_t labels_;
  std::vector<double> data_;
};

/// Worker-probability transform of a crowd answer: the chosen bit becomes mu,
/// every other bit (1 - mu) / (n - 1). A pad becomes the zero vector.
inline std::vector<double> transform_crowd_annotation(const Annotation& a, double mu, std::size_t n) {
  if (a.size() != n) throw StructuralError("crowd annotation length does not match label space");
  if (a.kind == AnnotationKind::pad) return std::vector<double>(n, 0.0);
  if (a.kind != AnnotationKind::crowd_onehot) throw StructuralError("only one-hot or pad crowd annotations can be transformed");
  const double other = n > 1 ? (1.0 - mu) / static_cast<double>(n - 1) : 0.0;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.values[i] == 1.0 ? mu : other;
  return out;
}

inline constexpr double kCorrectionRidge = 1e-6;
inline constexpr double kMaxConditionNumber = 1e12;

/// Caches the ridge-regularized inverse of one confusion matrix so a whole
/// annotation matrix can be corrected with a single factorization.
class MetaCorrector {
 public:
  explicit MetaCorrector(const Eigen::MatrixXd& confusion) {
    if (confusion.rows() != confusion.cols()) throw StructuralError("confusion matrix must be square");
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(confusion);
    const auto& sv = svd.singularValues();
    const double smallest = sv.size() ? sv(sv.size() - 1) : 0.0;
    const double condition = smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
    singular_ = !(condition <= kMaxConditionNumber);
    if (!singular_) {
      const auto n = confusion.rows();
      inverse_ = (confusion + kCorrectionRidge * Eigen::MatrixXd::Identity(n, n)).inverse();
    }
  }

  bool singular() const { return singular_; }

  Annotation correct(const Annotation& a) const {
    if (singular_) return a;
    if (static_cast<Eigen::Index>(a.size()) != inverse_.rows()) throw StructuralError("annotation / confusion size mismatch");
    const Eigen::Map<const Eigen::RowVectorXd> row(a.values.data(), static_cast<Eigen::Index>(a.size()));
    const Eigen::RowVectorXd corrected = row * inverse_;
    return normalize_annotation(std::span<const double>(corrected.data(), static_cast<std::size_t>(corrected.size())));
  }

 private:
  Eigen::MatrixXd inverse_;
  bool singular_ = false;
};

struct MetaCorrection {
  Annotation annotation;
  bool fell_back = false;
};

/// a * (M + 1e-6 I)^-1, clipped and renormalized. When M itself has a
/// condition number above 1e12 the annotation is returned unchanged and the
/// fallback is reported.
inline MetaCorrection correct_meta_annotation(const Annotation& a, const Eigen::MatrixXd& confusion) {
  const MetaCorrector corrector(confusion);
  return {corrector.correct(a), corrector.singular()};
}

/// Per-task sum over workers, then argmax (lowest label on ties).
inline std::vector<Label> e_step(const AnnotationTensor& tensor) {
  std::vector<Label> labels;
  labels.reserve(tensor.tasks());
  std::vector<double> sums(tensor.labels());
  for (std::size_t i = 0; i < tensor.tasks(); ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < tensor.workers(); ++j) {
      const auto s = tensor.slice(i, j);
      for (std::size_t c = 0; c < sums.size(); ++c) sums[c] += s[c];
    }
    labels.push_back(argmax_label(sums));
  }
  return labels;
}

/// Non-pad rows whose argmax agrees with the consensus label.
inline std::size_t count_correct(const AnnotationMatrix& annotations, std::span<const Label> labels) {
  if (annotations.size() != labels.size()) throw StructuralError("annotation rows do not match label count");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& row = annotations.rows[i];
    if (row.is_pad()) continue;
    if (argmax_label(row.values) == labels[i]) ++correct;
  }
  return correct;
}

inline std::size_t count_annotated(const AnnotationMatrix& annotations) {
  return static_cast<std::size_t>(
      std::count_if(annotations.rows.begin(), annotations.rows.end(), [](const Annotation& a) { return !a.is_pad(); }));
}

/// Re-estimates every meta-worker's confusion matrix (argmax counts per
/// consensus class, uniform for empty classes) and every crowd worker's
/// accuracy (a worker with no annotations keeps its previous value).
inline ConsensusState m_step(std::span<const AnnotationMatrix> meta, std::span<const AnnotationMatrix> crowd,
                             std::span<const Label> labels, const ConsensusState& previous, std::size_t n) {
  ConsensusState next;
  next.labels.assign(labels.begin(), labels.end());
  next.iteration = previous.iteration + 1;

  const auto dim = static_cast<Eigen::Index>(n);
  std::vector<std::size_t> class_sizes(n, 0);
  for (Label y : labels) ++class_sizes.at(y.index());

  for (const auto& matrix : meta) {
    if (matrix.size() != labels.size()) throw StructuralError("meta annotation rows do not match label count");
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto& row = matrix.rows[i];
      if (row.is_pad()) continue;
      counts(static_cast<Eigen::Index>(labels[i].index()), static_cast<Eigen::Index>(argmax_label(row.values).index())) += 1.0;
    }
    for (Eigen::Index p = 0; p < dim; ++p) {
      const double total = counts.row(p).sum();
      if (total > 0.0) {
        counts.row(p) /= total;
      } else {
        counts.row(p).setConstant(1.0 / static_cast<double>(n));
      }
    }
    next.meta_confusions.push_back(std::move(counts));
  }

  next.crowd_accuracies.resize(crowd.size());
  for (std::size_t j = 0; j < crowd.size(); ++j) {
    const std::size_t annotated = count_annotated(crowd[j]);
    if (annotated == 0) {
      next.crowd_accuracies[j] = j < previous.crowd_accuracies.size() ? previous.crowd_accuracies[j] : 0.0;
    } else {
      next.crowd_accuracies[j] = static_cast<double>(count_correct(crowd[j], labels)) / static_cast<double>(annotated);
    }
  }
  return next;
}

/// Builds the corrected tensor: meta-workers first, then crowd workers.
inline AnnotationTensor assemble_tensor(std::span<const AnnotationMatrix> meta, std::span<const AnnotationMatrix> crowd,
                                        const ConsensusState& state, std::size_t tasks, std::size_t n,
                                        std::size_t* fallbacks = nullptr) {
  AnnotationTensor tensor(tasks, meta.size() + crowd.size(), n);
  for (std::size_t w = 0; w < meta.size(); ++w) {
    if (meta[w].size() != tasks) throw StructuralError("meta annotation matrix has the wrong number of rows");
    const MetaCorrector corrector(state.meta_confusions.at(w));
    if (corrector.singular() && fallbacks) *fallbacks += 1;
    for (std::size_t i = 0; i < tasks; ++i) {
      const auto& row = meta[w].rows[i];
      if (row.is_pad()) continue;
      tensor.set(i, w, corrector.correct(row).values);
    }
  }
  for (std::size_t j = 0; j < crowd.size(); ++j) {
    if (crowd[j].size() != tasks) throw StructuralError("crowd annotation matrix must be padded to every task");
    const double mu = state.crowd_accuracies.at(j);
    for (std::size_t i = 0; i < tasks; ++i) {
      const auto& row = crowd[j].rows[i];
      if (row.is_pad()) continue;
      tensor.set(i, meta.size() + j, transform_crowd_annotation(row, mu, n));
    }
  }
  return tensor;
}

struct EmOptions {
  std::size_t max_iter = 100;
  // Called after every M-step with the freshly updated state.
  std::function<void(const ConsensusState&)> observer;
};

struct EmResult {
  ConsensusState state;
  std::size_t iterations = 0;
  bool converged = false;
  // Number of (iteration, meta-worker) pairs whose confusion matrix was too
  // ill-conditioned to invert.
  std::size_t correction_fallbacks = 0;
  // Stopped on a revisited label vector (a limit cycle) rather than a fixed point.
  bool cycle_detected = false;

  const std::vector<Label>& labels() const { return state.labels; }
};

/// Alternates correction, E-step and M-step from identity confusions and the
/// supplied crowd accuracies until the label vector repeats. Hard assignments
/// can settle into a short cycle where a few tasks keep flipping; revisiting
/// any earlier label vector also stops the loop (converged, cycle_detected set)
/// and keeps the current labels.
inline EmResult run_em(std::span<const AnnotationMatrix> meta, std::span<const AnnotationMatrix> crowd,
                       std::span<const double> initial_mu, std::size_t n, const EmOptions& options = {}) {
  if (initial_mu.size() != crowd.size()) throw StructuralError("one initial accuracy per crowd worker is required");
  std::size_t tasks = 0;
  if (!meta.empty()) {
    tasks = meta.front().size();
  } else if (!crowd.empty()) {
    tasks = crowd.front().size();
  }

  EmResult result;
  auto& state = result.state;
  const auto dim = static_cast<Eigen::Index>(n);
  state.meta_confusions.assign(meta.size(), Eigen::MatrixXd::Identity(dim, dim));
  state.crowd_accuracies.assign(initial_mu.begin(), initial_mu.end());

  std::vector<std::vector<Label>> history;
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    const auto tensor = assemble_tensor(meta, crowd, state, tasks, n, &result.correction_fallbacks);
    auto labels = e_step(tensor);
    result.iterations = it;
    const bool fixed = !history.empty() && history.back() == labels;
    const bool cycle = std::find(history.begin(), history.end(), labels) != history.end();
    if (fixed || cycle) {
      result.converged = true;
      result.cycle_detected = !fixed;
      state.labels = std::move(labels);
      return result;
    }
    state = m_step(meta, crowd, labels, state, n);
    if (options.observer) options.observer(state);
    history.push_back(std::move(labels));
  }
  return result;
}

/// Unweighted plurality over the argmax of every non-pad annotation.
inline std::vector<Label> mv_consensus(std::span<const AnnotationMatrix> matrices, std::size_t n) {
  if (matrices.empty()) return {};
  const std::size_t tasks = matrices.front().size();
  std::vector<Label> labels;
  labels.reserve(tasks);
  std::vector<std::size_t> votes(n);
  for (std::size_t i = 0; i < tasks; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    std::size_t cast = 0;
    for (const auto& m : matrices) {
      if (m.size() != tasks) throw StructuralError("annotation matrices cover different task counts");
      const auto& row = m.rows[i];
      if (row.is_pad()) continue;
      ++votes.at(argmax_label(row.values).index());
      ++cast;
    }
    if (cast == 0) throw CoverageError("task " + std::to_string(i) + " has no annotations to vote on");
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c) {
      if (votes[c] > votes[best]) best = c;
    }
    labels.push_back(Label::from_index(best));
  }
  return labels;
}

}  // namespace metacrowd
