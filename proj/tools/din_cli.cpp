#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "din/ledger.hpp"
#include "din/metrics.hpp"
#include "din/orchestrator.hpp"
#include "din/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;  // bad scenario / bad input file
constexpr int kExitAbort = 3;    // protocol-level failure

int exit_code_for(din::ErrorCode code) {
  switch (code) {
    case din::ErrorCode::ScenarioInvalid:
    case din::ErrorCode::NotFound:
    case din::ErrorCode::IncompatibleRuns:
      return kExitInvalid;
    default:
      return kExitAbort;
  }
}

std::string summary_path(std::string arg) {
  if (std::filesystem::is_directory(arg)) arg += "/summary.json";
  return arg;
}

int do_run(const std::string& path, bool seed_set, std::uint64_t seed,
           const std::string& out_dir) {
  din::scen::Scenario scenario = din::scen::Scenario::from_file(path);
  if (seed_set) scenario.seed = seed;
  scenario.validate();

  din::orch::RunResult result = out_dir.empty()
                                    ? din::orch::run(scenario)
                                    : din::orch::run_to_dir(scenario, out_dir);
  const auto& m = result.metrics;

  std::printf("scenario %s  seed %" PRIu64 "  tag %s\n", m.scenario_name.c_str(), m.seed,
              din::scen::threat_tag_name(scenario.tag));
  std::printf("rounds completed %u (final round %u)\n", m.rounds_completed,
              scenario.signal_round + 1);
  for (const auto& r : m.rounds)
    std::printf("  round %2u  loss %.6f  control %.6f  registered %u  admitted %u"
                "  aborted %u  tax %lld\n",
                r.round, r.training_loss, r.control_score, r.updates_registered, r.admitted,
                r.aborted_subgroups, static_cast<long long>(r.tax_collected));
  std::printf("paid participants %lld  evaluators %lld  public goods %lld (pool %lld)\n",
              static_cast<long long>(m.paid_participants),
              static_cast<long long>(m.paid_evaluators),
              static_cast<long long>(m.public_goods_remainder),
              static_cast<long long>(m.reward_pool));
  std::printf("reveal mismatches %u  missing attestations %u  voided subgroups %u"
              "  slashed evaluators %u\n",
              m.reveal_mismatches, m.missing_attestations, m.voided_subgroups,
              m.slashed_evaluators);
  std::printf("final model %s\n", m.final_model.c_str());
  std::printf("state digest %s\n", m.final_state_digest.c_str());
  std::printf("conserved %s  wall clock %lld ms\n", m.conserved ? "yes" : "NO",
              static_cast<long long>(m.wall_clock_ms));
  if (!out_dir.empty())
    std::printf("wrote %s/{txlog.jsonl, round_metrics.csv, agents.csv, treasury.csv, "
                "summary.json}\n",
                out_dir.c_str());
  return m.conserved ? kExitOk : kExitAbort;
}

int do_compare(const std::string& a_path, const std::string& b_path,
               const std::string& out_file) {
  din::metrics::RunMetrics a = din::metrics::RunMetrics::from_file(summary_path(a_path));
  din::metrics::RunMetrics b = din::metrics::RunMetrics::from_file(summary_path(b_path));
  din::metrics::CompareReport report = din::metrics::compare(a, b);
  std::fputs(report.to_table().c_str(), stdout);
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) din::fail(din::ErrorCode::NotFound, "cannot write " + out_file);
    out << report.to_json().dump(2) << '\n';
    std::printf("wrote %s\n", out_file.c_str());
  }
  return kExitOk;
}

int do_replay(const std::string& txlog) {
  din::chain::Ledger replayed = din::chain::Ledger::replay_file(txlog);
  std::printf("replayed %" PRIu64 " transactions\n", replayed.height());
  std::printf("state digest %s\n", replayed.state_digest_hex().c_str());
  if (replayed.has_task())
    std::printf("task phase %s\n", din::chain::phase_name(replayed.task().phase));
  std::printf("conserved %s\n", replayed.conserved() ? "yes" : "NO");
  return replayed.conserved() ? kExitOk : kExitAbort;
}

int do_validate(const std::string& path) {
  din::scen::Scenario scenario = din::scen::Scenario::from_file(path);
  scenario.validate();
  std::printf("%s\n", scenario.to_json().dump(2).c_str());
  std::fprintf(stderr, "%s: valid\n", path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulator for blockchain-coordinated federated learning"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "execute a scenario end to end");
  run_cmd->add_option("scenario", scenario_path, "scenario json file")
      ->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed, "override the scenario seed");
  run_cmd->add_option("--out", out_dir, "directory for txlog, metrics tables and summary");

  std::string cmp_a, cmp_b, cmp_out;
  auto* cmp_cmd = app.add_subcommand("compare", "diff two run summaries over one population");
  cmp_cmd->add_option("a", cmp_a, "summary.json or run directory")->required();
  cmp_cmd->add_option("b", cmp_b, "summary.json or run directory")->required();
  cmp_cmd->add_option("--out", cmp_out, "also write the report as json");

  std::string txlog_path;
  auto* replay_cmd = app.add_subcommand("replay", "rebuild a transaction log, verifying digests");
  replay_cmd->add_option("txlog", txlog_path, "txlog.jsonl from a run")
      ->required();

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "check a scenario file and echo it");
  validate_cmd->add_option("scenario", validate_path, "scenario json file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return do_run(scenario_path, !seed_opt->empty(), seed, out_dir);
    if (cmp_cmd->parsed()) return do_compare(cmp_a, cmp_b, cmp_out);
    if (replay_cmd->parsed()) return do_replay(txlog_path);
    if (validate_cmd->parsed()) return do_validate(validate_path);
  } catch (const din::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", din::error_code_name(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitAbort;
  }
  return kExitInvalid;
}
