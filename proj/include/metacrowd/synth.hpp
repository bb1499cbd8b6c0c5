#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "metacrowd/domain.hpp"
#include "metacrowd/random.hpp"
#include "metacrowd/workers.hpp"

namespace metacrowd {

struct Project {
  ProjectConfig config;
  std::vector<Task> tasks;
  std::vector<std::vector<double>> class_centers;  // generator internals
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

/// Spherical Gaussian mixture: component c sits at distance sep from the
/// origin (along coordinate axis c when n <= d, a random direction
/// otherwise) with unit variance. Labels are balanced to within one.
inline Project generate_project(const ProjectConfig& config) {
  if (config.n < 1) throw ConfigurationError("n must be at least 1");
  if (config.d < 1) throw ConfigurationError("d must be at least 1");
  if (config.n > config.N) throw ConfigurationError("more classes than tasks");

  Rng rng = make_rng(config.seed, Stream::project);
  Project project;
  project.config = config;
  project.class_centers.assign(config.n, std::vector<double>(config.d, 0.0));
  for (std::size_t c = 0; c < config.n; ++c) {
    auto& center = project.class_centers[c];
    if (config.n <= config.d) {
      center[c] = config.sep;
    } else {
      double norm = 0.0;
      for (double& x : center) {
        x = standard_normal(rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
      for (double& x : center) x *= config.sep / norm;
    }
  }

  std::vector<std::size_t> labels(config.N);
  for (std::size_t i = 0; i < config.N; ++i) labels[i] = i % config.n;
  std::shuffle(labels.begin(), labels.end(), rng);

  project.tasks.resize(config.N);
  for (std::size_t i = 0; i < config.N; ++i) {
    Task& t = project.tasks[i];
    t.id = i;
    t.true_label = Label::from_index(labels[i]);
    t.features = project.class_centers[labels[i]];
    for (double& x : t.features) x += standard_normal(rng);
  }
  return project;
}

struct Clustering {
  std::vector<Label> assignment;  // task id -> cluster in [1, n]
  std::vector<std::vector<double>> centroids;
  std::size_t iterations = 0;
  double inertia = 0.0;
};

inline constexpr std::size_t kKMeansRestarts = 10;
inline constexpr std::size_t kKMeansMaxIterations = 100;

namespace detail {

inline std::size_t nearest_centroid(std::span<const double> x, const std::vector<std::vector<double>>& centroids,
                                    double* distance = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double dist = squared_distance(x, centroids[c]);
    if (dist < best) {
      best = dist;
      arg = c;
    }
  }
  if (distance) *distance = best;
  return arg;
}

/// Greedy k-means++ seeding: each new centre is the best (lowest potential)
/// of 2 + ln(k) D^2-sampled trials.
inline std::vector<std::vector<double>> kmeanspp_seed(const std::vector<Task>& tasks, std::size_t clusters, Rng& rng) {
  const std::size_t N = tasks.size();
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(clusters)));
  std::vector<std::vector<double>> centroids;
  std::uniform_int_distribution<std::size_t> first(0, N - 1);
  centroids.push_back(tasks[first(rng)].features);
  std::vector<double> nearest(N);
  for (std::size_t i = 0; i < N; ++i) nearest[i] = squared_distance(tasks[i].features, centroids.front());

  std::vector<double> candidate(N);
  while (centroids.size() < clusters) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t best_pick = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_nearest;
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t pick = N;
      if (total > 0.0) {
        double target = uniform01(rng) * total;
        for (std::size_t i = 0; i < N; ++i) {
          target -= nearest[i];
          if (target < 0.0 && nearest[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
      if (pick == N) {
        pick = static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin());
      }
      double potential = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        candidate[i] = std::min(nearest[i], squared_distance(tasks[i].features, tasks[pick].features));
        potential += candidate[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best_pick = pick;
        best_nearest = candidate;
      }
    }
    centroids.push_back(tasks[best_pick].features);
    nearest = std::move(best_nearest);
  }
  return centroids;
}

/// Lloyd iterations from the given centres until no centre moves 1e-6 or more.
inline Clustering lloyd(const std::vector<Task>& tasks, std::vector<std::vector<double>> centroids) {
  const std::size_t N = tasks.size();
  const std::size_t K = centroids.size();
  const std::size_t d = tasks.front().features.size();
  Clustering out;
  std::vector<std::size_t> member(N, 0);
  for (std::size_t iter = 0; iter < kKMeansMaxIterations; ++iter) {
    out.iterations = iter + 1;
    for (std::size_t i = 0; i < N; ++i) member[i] = nearest_centroid(tasks[i].features, centroids);
    std::vector<std::vector<double>> sums(K, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < N; ++i) {
      ++counts[member[i]];
      for (std::size_t j = 0; j < d; ++j) sums[member[i]][j] += tasks[i].features[j];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (double& x : sums[c]) x /= static_cast<double>(counts[c]);
      max_shift = std::max(max_shift, std::sqrt(squared_distance(sums[c], centroids[c])));
      centroids[c] = std::move(sums[c]);
    }
    if (max_shift < 1e-6) break;
  }
  out.assignment.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    double dist = 0.0;
    out.assignment.push_back(Label::from_index(nearest_centroid(tasks[i].features, centroids, &dist)));
    out.inertia += dist;
  }
  out.centroids = std::move(centroids);
  return out;
}

}  // namespace detail

/// k-means (Euclidean) with greedy k-means++ seeding, at most 100 Lloyd
/// iterations per start, best inertia over 10 seeded restarts.
inline Clustering cluster_tasks(const Project& project, std::size_t clusters, std::uint64_t seed) {
  const auto& tasks = project.tasks;
  if (tasks.empty()) throw DegenerateInputError("cannot cluster an empty project");
  if (clusters < 1) throw ConfigurationError("cluster count must be positive");
  {
    std::set<std::vector<double>> distinct;
    for (const auto& t : tasks) {
      distinct.insert(t.features);
      if (distinct.size() >= clusters) break;
    }
    if (distinct.size() < clusters) throw DegenerateInputError("fewer distinct points than clusters");
  }

  Rng rng = make_rng(seed, Stream::clustering);
  std::optional<Clustering> best;
  for (std::size_t restart = 0; restart < kKMeansRestarts; ++restart) {
    auto candidate = detail::lloyd(tasks, detail::kmeanspp_seed(tasks, clusters, rng));
    if (!best || candidate.inertia < best->inertia) best = std::move(candidate);
  }
  return std::move(*best);
}

inline Clustering cluster_tasks(const Project& project, std::uint64_t seed) {
  return cluster_tasks(project, project.config.n, seed);
}

inline std::size_t candidates_per_cluster(std::size_t k, double gamma) {
  // 1e-9 keeps exact products such as 1.4 * 5 from rounding up to the next integer.
  return static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(k) - 1e-9));
}

struct SupportCandidates {
  // per_cluster[c] lists task ids of cluster c+1, nearest to the centroid first.
  std::vector<std::vector<TaskId>> per_cluster;

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& c : per_cluster) t += c.size();
    return t;
  }

  /// Annotation order: every cluster's nearest task, then every cluster's
  /// second nearest, and so on.
  std::vector<TaskId> consumption_order() const {
    std::vector<TaskId> order;
    std::size_t depth = 0;
    for (const auto& c : per_cluster) depth = std::max(depth, c.size());
    for (std::size_t r = 0; r < depth; ++r) {
      for (const auto& c : per_cluster) {
        if (r < c.size()) order.push_back(c[r]);
      }
    }
    return order;
  }
};

inline SupportCandidates select_support_candidates(const Project& project, const Clustering& clustering, std::size_t k,
                                                   double gamma) {
  if (!(gamma >= 1.0)) throw ConfigurationError("gamma must be >= 1");
  const std::size_t per = candidates_per_cluster(k, gamma);
  const std::size_t clusters = clustering.centroids.size();
  std::vector<std::vector<std::pair<double, TaskId>>> members(clusters);
  for (const auto& t : project.tasks) {
    const std::size_t c = clustering.assignment.at(t.id).index();
    members[c].emplace_back(squared_distance(t.features, clustering.centroids[c]), t.id);
  }
  SupportCandidates out;
  out.per_cluster.resize(clusters);
  for (std::size_t c = 0; c < clusters; ++c) {
    auto& m = members[c];
    if (m.size() < per) {
      throw InsufficientCandidatesError("cluster " + std::to_string(c + 1) + " has " + std::to_string(m.size()) +
                                        " tasks, need " + std::to_string(per));
    }
    std::partial_sort(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(per), m.end());
    for (std::size_t r = 0; r < per; ++r) out.per_cluster[c].push_back(m[r].second);
  }
  return out;
}

struct SupportEntry {
  TaskId task_id = 0;
  Label label;
};

struct SupportSet {
  std::vector<SupportEntry> entries;
  std::size_t consumed_annotations = 0;
  // Every candidate that was sent to the crowd, in annotation order.
  std::vector<TaskId> annotated_tasks;
  // golden_answers[w][e] is pool worker w's label for entries[e].
  std::vector<std::vector<Label>> golden_answers;
  std::size_t annotators = 0;

  std::vector<Label> golden_labels() const {
    std::vector<Label> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.label);
    return out;
  }
};

/// Plurality vote over one-hot labels; ties break to the lowest label.
inline Label plurality(std::span<const Label> votes, std::size_t n) {
  std::vector<std::size_t> counts(n, 0);
  for (Label v : votes) ++counts.at(v.index());
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return Label::from_index(best);
}

/// Candidates go to the first W_c pool workers one at a time; a candidate's
/// plurality label is banked if that class still has room. Stops once every
/// class holds k entries.
inline SupportSet build_support_set(const Project& project, const SupportCandidates& candidates,
                                    std::span<const CrowdWorker> crowd_pool, std::size_t annotators, std::size_t k,
                                    std::uint64_t seed) {
  const std::size_t n = project.config.n;
  if (crowd_pool.size() < annotators) throw ConfigurationError("crowd pool smaller than W_c");
  if (annotators == 0) throw ConfigurationError("W_c must be positive");

  SupportSet out;
  out.annotators = annotators;
  out.golden_answers.assign(annotators, {});
  std::vector<std::size_t> banked(n, 0);
  std::size_t complete = 0;
  std::vector<Label> votes(annotators);

  for (TaskId id : candidates.consumption_order()) {
    if (complete == n) break;
    const Task& task = project.tasks.at(id);
    for (std::size_t w = 0; w < annotators; ++w) {
      Rng rng = make_rng(seed, Stream::support_annotation, {id, crowd_pool[w].id});
      votes[w] = argmax_label(simulate_crowd_annotation(crowd_pool[w], task, n, rng).values);
    }
    out.annotated_tasks.push_back(id);
    out.consumed_annotations += annotators;

    const Label consensus = plurality(votes, n);
    if (banked[consensus.index()] >= k) continue;  // class already full
    out.entries.push_back({id, consensus});
    for (std::size_t w = 0; w < annotators; ++w) out.golden_answers[w].push_back(votes[w]);
    if (++banked[consensus.index()] == k) ++complete;
  }
  if (complete < n) {
    throw InsufficientCandidatesError("support candidates exhausted before every class had " + std::to_string(k) +
                                      " entries; raise gamma");
  }
  return out;
}

}  // namespace metacrowd
