#pragma once

#include <string>

#include "din/ledger.hpp"
#include "din/metrics.hpp"
#include "din/scenario.hpp"

namespace din {
namespace orch {

struct RunResult {
  metrics::RunMetrics metrics;
  chain::Ledger ledger;
};

// Execute a scenario end to end: deploy, train over every round with
// secure aggregation and availability checks, seal the final model,
// run the commit-reveal evaluation, settle, slash. Deterministic per
// (scenario, seed): identical inputs give byte-identical transaction
// logs. Throws Error on protocol aborts.
RunResult run(const scen::Scenario& scenario);

// run, then write txlog.jsonl, the csv tables and summary.json under
// out_dir (created if missing).
RunResult run_to_dir(const scen::Scenario& scenario, const std::string& out_dir);

}  // namespace orch
}  // namespace din
