// Library use without the CLI: one run per method on a small project,
// then the routing detail from a traced run.

#include <iostream>

#include "metacrowd/metacrowd.hpp"

int main() {
  using namespace metacrowd;

  ExperimentConfig cfg;
  cfg.project.N = 1000;
  cfg.project.seed = 3;

  for (auto m : {Method::metacrowd, Method::metacrowd_oc, Method::metacrowd_om}) {
    auto c = cfg;
    c.method = m;
    const auto r = run_pipeline(c);
    std::cout << to_string(m) << ": accuracy " << r.accuracy << ", budget " << r.budget_total << " (support "
              << r.budget_support << ", difficult " << r.budget_difficult << ")\n";
  }

  const auto trace = run_pipeline_traced(cfg);
  std::cout << "routed " << trace.routed_tasks.size() << " tasks, beta " << trace.result.beta_observed << ", em "
            << trace.result.em_iterations << " iterations\n";

  // Same numbers through the report layer.
  std::cout << runs_csv(std::vector<RunResult>{trace.result});
}
