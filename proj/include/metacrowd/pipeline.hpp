#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <optional>
#include <thread>
#include <vector>

#include "metacrowd/budget.hpp"
#include "metacrowd/config.hpp"
#include "metacrowd/consensus.hpp"
#include "metacrowd/divergence.hpp"
#include "metacrowd/domain.hpp"
#include "metacrowd/random.hpp"
#include "metacrowd/synth.hpp"
#include "metacrowd/workers.hpp"

namespace metacrowd {

struct RunResult {
  Method method = Method::metacrowd;
  ConsensusKind consensus = ConsensusKind::wmv_em;
  std::uint64_t seed = 0;
  std::size_t N = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double theta = 0.0;
  std::size_t n_add = 0;
  double accuracy = 0.0;
  std::size_t budget_total = 0;
  std::size_t budget_support = 0;
  std::size_t budget_difficult = 0;
  // Fraction of query tasks that received extra crowd annotations.
  double beta_observed = 0.0;
  std::size_t em_iterations = 0;
  bool converged = true;
  double wall_time_ms = 0.0;
};

/// Everything a run produced, for tests and diagnostics.
struct PipelineTrace {
  RunResult result;
  Project project;
  std::optional<SupportSet> support;
  std::vector<CrowdWorker> crowd_pool;
  std::vector<MetaWorker> meta_workers;
  std::vector<TaskId> query_tasks;
  std::vector<AnnotationMatrix> meta_matrices;   // rows follow query_tasks
  std::vector<AnnotationMatrix> crowd_matrices;  // rows follow query_tasks (all tasks for OC)
  std::optional<DivergenceReport> divergence;    // positions index query_tasks
  std::vector<TaskId> routed_tasks;
  BudgetLedger ledger;
  std::optional<EmResult> em;
  std::vector<Label> final_labels;  // one per task id
};

/// Draws `count` distinct entries of `from` (partial Fisher-Yates).
inline std::vector<WorkerId> sample_without_replacement(std::span<const WorkerId> from, std::size_t count, Rng& rng) {
  if (count > from.size()) throw ConfigurationError("cannot draw more workers than available");
  std::vector<WorkerId> pool(from.begin(), from.end());
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

namespace detail {

inline MetaWorkerOptions meta_options(const ExperimentConfig& cfg) {
  return {cfg.alpha, cfg.meta_correlation, cfg.meta_prior_blend};
}

inline RunResult base_result(const ExperimentConfig& cfg) {
  RunResult r;
  r.method = cfg.method;
  r.consensus = cfg.consensus;
  r.seed = cfg.project.seed;
  r.N = cfg.project.N;
  r.n = cfg.project.n;
  r.k = cfg.project.k;
  r.theta = cfg.project.theta;
  r.n_add = cfg.project.n_add;
  return r;
}

inline std::vector<AnnotationMatrix> padded_matrices(std::size_t workers, std::size_t rows, std::size_t n) {
  std::vector<AnnotationMatrix> out(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    out[w].worker_id = w;
    out[w].rows.assign(rows, Annotation::pad(n));
  }
  return out;
}

inline void finish(PipelineTrace& trace, const ExperimentConfig& cfg, std::chrono::steady_clock::time_point start) {
  auto& r = trace.result;
  const auto& tasks = trace.project.tasks;
  std::size_t scored = 0;
  std::size_t correct = 0;
  std::vector<bool> in_support(tasks.size(), false);
  if (trace.support) {
    for (const auto& e : trace.support->entries) in_support[e.task_id] = true;
  }
  for (const auto& t : tasks) {
    if (in_support[t.id] && !cfg.score_support) continue;
    ++scored;
    if (trace.final_labels[t.id] == t.true_label) ++correct;
  }
  r.accuracy = scored ? static_cast<double>(correct) / static_cast<double>(scored) : 0.0;
  r.budget_support = trace.ledger.support_count();
  r.budget_difficult = trace.ledger.difficult_count();
  r.budget_total = trace.ledger.total();
  r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline PipelineTrace run_only_crowd(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto& pc = cfg.project;
  const std::size_t n = pc.n;
  PipelineTrace trace;
  trace.result = base_result(cfg);
  trace.project = generate_project(pc);
  trace.crowd_pool = spawn_crowd_pool(pc.worker_proportions, static_cast<long>(pc.W_c), pc.seed);
  if (pc.W_c < pc.W_m) throw ConfigurationError("crowd pool smaller than the per-task annotator count");

  const std::size_t N = trace.project.tasks.size();
  trace.query_tasks.resize(N);
  std::iota(trace.query_tasks.begin(), trace.query_tasks.end(), TaskId{0});
  trace.crowd_matrices = padded_matrices(trace.crowd_pool.size(), N, n);
  std::vector<WorkerId> everyone(trace.crowd_pool.size());
  std::iota(everyone.begin(), everyone.end(), WorkerId{0});
  for (const Task& task : trace.project.tasks) {
    Rng pick = make_rng(pc.seed, Stream::baseline_assignment, {task.id});
    for (WorkerId w : sample_without_replacement(everyone, pc.W_m, pick)) {
      Rng rng = make_rng(pc.seed, Stream::baseline_annotation, {task.id, w});
      trace.crowd_matrices[w].rows[task.id] = simulate_crowd_annotation(trace.crowd_pool[w], task, n, rng);
      trace.ledger.record(Phase::difficult, task.id, w);
    }
    trace.routed_tasks.push_back(task.id);
  }
  trace.result.beta_observed = N ? 1.0 : 0.0;

  const auto mv = mv_consensus(trace.crowd_matrices, n);
  if (cfg.consensus == ConsensusKind::mv) {
    trace.final_labels = mv;
  } else {
    // No golden tasks here, so crowd accuracies start from agreement with the
    // plurality labels.
    ConsensusState seed_state;
    seed_state.crowd_accuracies.assign(trace.crowd_pool.size(), 0.5);
    const auto initial = m_step({}, trace.crowd_matrices, mv, seed_state, n);
    EmOptions options;
    options.max_iter = cfg.max_em_iterations;
    trace.em = run_em({}, trace.crowd_matrices, initial.crowd_accuracies, n, options);
    trace.final_labels = trace.em->labels();
    trace.result.em_iterations = trace.em->iterations;
    trace.result.converged = trace.em->converged;
  }
  finish(trace, cfg, start);
  return trace;
}

}  // namespace detail

/// One end-to-end run. metacrowd and metacrowd_om follow the hybrid workflow
/// (metacrowd_om never routes); metacrowd_oc is the crowd-only baseline.
/// `pinned_difficult`, when set, routes exactly that many of the most divergent
/// query tasks instead of thresholding at theta.
inline PipelineTrace run_pipeline_traced(const ExperimentConfig& cfg,
                                         std::optional<std::size_t> pinned_difficult = std::nullopt) {
  cfg.validate();
  if (cfg.method == Method::metacrowd_oc) return detail::run_only_crowd(cfg);

  const auto start = std::chrono::steady_clock::now();
  const auto& pc = cfg.project;
  const std::size_t n = pc.n;
  const std::uint64_t seed = pc.seed;

  PipelineTrace trace;
  trace.result = detail::base_result(cfg);
  trace.project = generate_project(pc);

  // Support set: cluster, pick candidates near the centroids, crowd-annotate.
  const auto clustering = cluster_tasks(trace.project, seed);
  const auto candidates = select_support_candidates(trace.project, clustering, pc.k, pc.gamma);
  trace.crowd_pool = spawn_crowd_pool(pc.worker_proportions, static_cast<long>(pc.W_c), seed);
  trace.support = build_support_set(trace.project, candidates, trace.crowd_pool, pc.W_c, pc.k, seed);
  for (TaskId id : trace.support->annotated_tasks) {
    for (std::size_t w = 0; w < pc.W_c; ++w) trace.ledger.record(Phase::support, id, trace.crowd_pool[w].id);
  }
  const auto golden = trace.support->golden_labels();
  for (std::size_t w = 0; w < pc.W_c; ++w) {
    apply_quality(trace.crowd_pool[w], estimate_worker_quality(trace.support->golden_answers[w], golden));
  }

  trace.meta_workers = spawn_meta_workers(n, pc.W_m, cfg.meta_diagonal, seed, detail::meta_options(cfg));

  std::vector<bool> in_support(trace.project.tasks.size(), false);
  for (const auto& e : trace.support->entries) in_support[e.task_id] = true;
  for (const auto& t : trace.project.tasks) {
    if (!in_support[t.id]) trace.query_tasks.push_back(t.id);
  }
  const std::size_t Q = trace.query_tasks.size();

  // Meta annotations for the whole query set.
  trace.meta_matrices.resize(pc.W_m);
  for (std::size_t w = 0; w < pc.W_m; ++w) {
    trace.meta_matrices[w].worker_id = w;
    trace.meta_matrices[w].rows.reserve(Q);
  }
  std::vector<std::vector<Annotation>> meta_sets(Q);
  for (std::size_t qi = 0; qi < Q; ++qi) {
    const Task& task = trace.project.tasks[trace.query_tasks[qi]];
    Rng difficulty_rng = make_rng(seed, Stream::task_difficulty, {task.id});
    const auto difficulty = draw_task_difficulty(task, n, difficulty_rng);
    for (std::size_t w = 0; w < pc.W_m; ++w) {
      Rng rng = make_rng(seed, Stream::meta_annotation, {task.id, w});
      auto a = simulate_meta_annotation(trace.meta_workers[w], task, difficulty, rng);
      meta_sets[qi].push_back(a);
      trace.meta_matrices[w].rows.push_back(std::move(a));
    }
  }

  trace.crowd_matrices = detail::padded_matrices(pc.W_c, Q, n);
  for (std::size_t w = 0; w < pc.W_c; ++w) trace.crowd_matrices[w].worker_id = trace.crowd_pool[w].id;

  if (cfg.method == Method::metacrowd) {
    trace.divergence = route_difficult_tasks(meta_sets, pc.theta);
    if (pinned_difficult) pin_difficult_tasks(*trace.divergence, *pinned_difficult);
    std::vector<WorkerId> eligible;
    for (std::size_t w = 0; w < pc.W_c; ++w) {
      if (trace.crowd_pool[w].eligible_for_difficult) eligible.push_back(w);
    }
    if (pc.n_add > 0 && !trace.divergence->difficult_set.empty() && eligible.size() < pc.n_add) {
      throw ConfigurationError("only " + std::to_string(eligible.size()) + " eligible crowd workers for n_add = " +
                               std::to_string(pc.n_add));
    }
    if (pc.n_add > 0) {
      for (std::size_t qi : trace.divergence->difficult_set) {
        const Task& task = trace.project.tasks[trace.query_tasks[qi]];
        Rng pick = make_rng(seed, Stream::difficult_assignment, {task.id});
        for (WorkerId w : sample_without_replacement(eligible, pc.n_add, pick)) {
          Rng rng = make_rng(seed, Stream::difficult_annotation, {task.id, trace.crowd_pool[w].id});
          trace.crowd_matrices[w].rows[qi] = simulate_crowd_annotation(trace.crowd_pool[w], task, n, rng);
          trace.ledger.record(Phase::difficult, task.id, trace.crowd_pool[w].id);
        }
        trace.routed_tasks.push_back(task.id);
      }
    }
  }
  trace.result.beta_observed = Q ? static_cast<double>(trace.routed_tasks.size()) / static_cast<double>(Q) : 0.0;

  std::vector<Label> query_labels;
  if (cfg.consensus == ConsensusKind::wmv_em) {
    std::vector<double> initial_mu;
    for (std::size_t w = 0; w < pc.W_c; ++w) initial_mu.push_back(trace.crowd_pool[w].estimated_accuracy);
    EmOptions options;
    options.max_iter = cfg.max_em_iterations;
    trace.em = run_em(trace.meta_matrices, trace.crowd_matrices, initial_mu, n, options);
    query_labels = trace.em->labels();
    trace.result.em_iterations = trace.em->iterations;
    trace.result.converged = trace.em->converged;
  } else {
    std::vector<AnnotationMatrix> all(trace.meta_matrices);
    all.insert(all.end(), trace.crowd_matrices.begin(), trace.crowd_matrices.end());
    query_labels = mv_consensus(all, n);
  }

  trace.final_labels.assign(trace.project.tasks.size(), Label(1));
  for (const auto& e : trace.support->entries) trace.final_labels[e.task_id] = e.label;
  for (std::size_t qi = 0; qi < Q && qi < query_labels.size(); ++qi) {
    trace.final_labels[trace.query_tasks[qi]] = query_labels[qi];
  }
  detail::finish(trace, cfg, start);
  return trace;
}

inline RunResult run_pipeline(const ExperimentConfig& cfg) { return run_pipeline_traced(cfg).result; }

/// Same as run_pipeline with the method forced to one of the ablations.
inline RunResult run_baseline(ExperimentConfig cfg, Method method) {
  if (method == Method::metacrowd) throw ConfigurationError("run_baseline takes metacrowd_oc or metacrowd_om");
  cfg.method = method;
  return run_pipeline(cfg);
}

/// Replication r runs with seed + r, so every method and grid point sees the
/// same project and pool for a given replication.
inline ExperimentConfig replication_config(const ExperimentConfig& cfg, std::size_t replication) {
  ExperimentConfig out = cfg;
  out.project.seed = cfg.project.seed + replication;
  return out;
}

inline ExperimentConfig with_sweep_value(const ExperimentConfig& cfg, SweepParameter parameter, double value) {
  ExperimentConfig out = cfg;
  if (parameter == SweepParameter::theta) {
    out.project.theta = value;
  } else {
    out.project.n_add = static_cast<std::size_t>(std::llround(value));
  }
  return out;
}

/// Runs jobs on a bounded set of threads and returns results in job order.
template <typename Job>
std::vector<RunResult> run_parallel(const std::vector<Job>& jobs) {
  std::vector<RunResult> results(jobs.size());
  const std::size_t width = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t begin = 0; begin < jobs.size(); begin += width) {
    const std::size_t end = std::min(jobs.size(), begin + width);
    std::vector<std::future<RunResult>> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(std::async(std::launch::async, jobs[i]));
    for (std::size_t i = begin; i < end; ++i) results[i] = batch[i - begin].get();
  }
  return results;
}

/// One run per (replication, grid value), replication-major.
inline std::vector<RunResult> sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.sweep) throw ConfigurationError("sweep requested without a sweep specification");
  std::vector<std::function<RunResult()>> jobs;
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    for (double v : cfg.sweep->values) {
      const auto job_cfg = with_sweep_value(replication_config(cfg, r), cfg.sweep->parameter, v);
      jobs.emplace_back([job_cfg] { return run_pipeline(job_cfg); });
    }
  }
  return run_parallel(jobs);
}

/// All replications of a single configuration.
inline std::vector<RunResult> run_replications(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::function<RunResult()>> jobs;
  for (std::size_t r = 0; r < cfg.replications; ++r) {
    const auto job_cfg = replication_config(cfg, r);
    jobs.emplace_back([job_cfg] { return run_pipeline(job_cfg); });
  }
  return run_parallel(jobs);
}

}  // namespace metacrowd
