#include "din/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "din/adversary.hpp"
#include "din/auditing.hpp"
#include "din/content_store.hpp"
#include "din/secure_agg.hpp"

namespace din {
namespace orch {

namespace {

struct ReportPlan {
  std::uint32_t subgroup = 0;
  AgentId evaluator = 0;
  AgentId participant = 0;
  ScoreMicro truthful = 0;
  ScoreMicro reported = 0;
  std::string salt;
  audit::Attestation att;
  bool copycat = false;
};

std::string salt_for(const Rng& root, AgentId evaluator, AgentId participant) {
  Rng r = root.fork("salt", evaluator, participant);
  std::uint8_t bytes[16];
  for (int half = 0; half < 2; ++half) {
    std::uint64_t word = r.next_u64();
    for (int i = 0; i < 8; ++i) bytes[half * 8 + i] = static_cast<std::uint8_t>(word >> (8 * i));
  }
  return to_hex(bytes, sizeof(bytes));
}

double control_metric(const fl::ModelParams& model, const fl::ControlDataset& control,
                      audit::MetricKind metric) {
  if (metric == audit::MetricKind::accuracy)
    return fl::accuracy(model, control.rows, control.labels);
  double mse = fl::mean_squared_error(model, control.rows, control.labels);
  return 1.0 / (1.0 + mse);
}

}  // namespace

RunResult run(const scen::Scenario& scenario) {
  scenario.validate();
  auto started = std::chrono::steady_clock::now();

  const Rng root(scenario.seed);
  const FixedPointCodec codec;
  const std::uint32_t n_participants = scenario.population.participants;
  const std::uint32_t final_round = scenario.signal_round + 1;
  const AgentId owner = scenario.owner();
  const std::vector<AgentId> roster = scenario.participant_ids();
  const std::vector<AgentId> evaluator_ids = scenario.evaluator_ids();

  fl::Population population =
      fl::generate_population(scenario.population, root.fork("population"));
  fl::PrivateDataset pooled = fl::pool_datasets(population.participants);
  fl::PrivateDataset leak_data;
  leak_data.rows = population.control.rows;
  leak_data.labels = population.control.labels;

  ContentStore store(scenario.agent_count());
  {
    Reachability reach(scenario.agent_count());
    for (const auto& [a, b] : scenario.blocked_links) reach.block(a, b);
    store.set_reachability(std::move(reach));
    std::set<AgentId> dishonest;
    for (const auto& [agent, strategy] : scenario.adversary.participants)
      if (strategy != adv::ParticipantStrategy::honest) dishonest.insert(agent);
    store.set_dishonest(std::move(dishonest));
  }

  chain::Ledger ledger;
  metrics::RunMetrics run_metrics;
  run_metrics.scenario_name = scenario.name;
  run_metrics.seed = scenario.seed;
  run_metrics.participants = n_participants;
  run_metrics.evaluators = scenario.economics.evaluators;
  run_metrics.reward_pool = scenario.task.reward_pool;

  ledger.fund(owner, scenario.economics.initial_balance + scenario.task.reward_pool);
  for (AgentId p : roster) ledger.fund(p, scenario.economics.initial_balance);
  for (AgentId e : evaluator_ids) ledger.fund(e, scenario.economics.initial_balance);
  for (AgentId e : evaluator_ids)
    ledger.stake(e, scenario.economics.stake_value, scenario.economics.tax_rate);

  fl::ModelParams global;
  global.kind = scenario.population.kind;
  global.weights.assign(scenario.population.feature_dim + 1, 0.0);
  {
    ContentId genesis = store.put(global.serialize(codec), owner);
    ledger.deploy_task(owner, scenario.task, genesis.hex(), scenario.task.reward_pool, roster);
  }

  adv::TrainOptions train_opts{scenario.training.epochs, scenario.training.learning_rate};

  for (std::uint32_t r = 1; r <= final_round; ++r) {
    std::set<AgentId> offline = scenario.adversary.dropouts(r);
    store.set_offline(offline);

    Rng group_rng = root.fork("subgroups", r);
    auto partition = chain::form_subgroups(roster, scenario.task.k_min_subgroup, group_rng);
    ledger.begin_round(owner, r, partition);

    std::vector<secagg::SubgroupKeys> keys;
    keys.reserve(partition.size());
    for (std::uint32_t i = 0; i < partition.size(); ++i) {
      Rng key_rng = root.fork("pairkeys", r, i);
      keys.push_back(secagg::setup_subgroup_keys(partition[i], scenario.task.shamir_threshold,
                                                 key_rng));
    }
    std::map<AgentId, std::uint32_t> subgroup_of;
    for (std::uint32_t i = 0; i < partition.size(); ++i)
      for (AgentId m : partition[i]) subgroup_of[m] = i;

    // honest updates first: collusion copies need their source's result
    std::map<AgentId, fl::ModelParams> honest_update;
    for (AgentId p : roster) {
      if (offline.count(p)) continue;
      const fl::PrivateDataset& data =
          scenario.control_leak.count(p) ? leak_data : population.participants[p - 1];
      honest_update[p] = fl::local_train(global, data, train_opts.epochs,
                                         train_opts.learning_rate);
    }

    std::map<AgentId, fl::ModelParams> submitted;
    for (AgentId p : roster) {
      if (offline.count(p)) continue;
      auto strategy = scenario.adversary.participant_strategy(p);
      const fl::ModelParams* source = &honest_update.at(p);
      if (strategy == adv::ParticipantStrategy::colluding_share) {
        AgentId model_source = scenario.adversary.colluders.at(p);
        auto it = honest_update.find(model_source);
        if (it != honest_update.end()) source = &it->second;
      }
      const fl::PrivateDataset& data =
          scenario.control_leak.count(p) ? leak_data : population.participants[p - 1];
      fl::ModelParams model =
          adv::malicious_update(strategy, global, *source, data, train_opts, codec.range,
                                root.fork("adversary", r, p));
      submitted[p] = model;

      secagg::MaskedUpdate masked =
          secagg::mask_update(codec, model.weights, p, keys[subgroup_of[p]], r);
      ContentId cid = store.put(masked.serialize(), p);
      ledger.register_update(p, r, cid.hex());
      if (r == final_round) {
        ContentId eval_cid = store.put(model.serialize(codec), p);
        ledger.register_eval_model(p, eval_cid.hex());
      }
    }

    // availability: every registered member probes every registered blob
    for (std::uint32_t i = 0; i < partition.size(); ++i) {
      const auto& updates = ledger.task().round(r).updates;
      std::vector<AgentId> registered;
      for (AgentId m : partition[i])
        if (updates.count(m)) registered.push_back(m);
      std::map<AgentId, std::vector<AgentId>> loads;
      for (AgentId m : registered) {
        std::vector<AgentId>& list = loads[m];
        for (AgentId j : registered)
          if (store.can_get(ContentId::from_hex(updates.at(j)), m)) list.push_back(j);
      }
      ledger.check_availability(owner, r, i, loads);
    }

    // per-subgroup unmasking; non-admitted members count as dropouts
    std::vector<fl::WeightSum> parts;
    std::uint32_t admitted_total = 0;
    std::uint32_t disputes_this_round = 0;
    for (std::uint32_t i = 0; i < partition.size(); ++i) {
      const chain::SubgroupState& sg = ledger.task().round(r).subgroups[i];
      std::vector<AgentId> survivors = sg.admitted;
      std::vector<AgentId> dropped;
      for (AgentId m : sg.members)
        if (!std::binary_search(survivors.begin(), survivors.end(), m)) dropped.push_back(m);
      admitted_total += static_cast<std::uint32_t>(survivors.size());

      if (survivors.size() < scenario.task.shamir_threshold) {
        ledger.abort_subgroup(owner, r, i, "survivors below the recovery threshold");
        continue;
      }
      std::vector<secagg::MaskedUpdate> masked;
      for (AgentId m : survivors) {
        const auto& bytes = store.fetch_any(ContentId::from_hex(
            ledger.task().round(r).updates.at(m)));
        masked.push_back(secagg::MaskedUpdate::deserialize(bytes));
      }
      secagg::RecoveryShares shares =
          secagg::collect_recovery_shares(keys[i], survivors, dropped);
      fl::WeightSum part;
      try {
        secagg::SubgroupSum sum =
            secagg::unmask_aggregate(codec, masked, survivors, dropped, shares,
                                     scenario.task.shamir_threshold, r);
        part.sum = sum.sum;
        part.count = sum.count;
      } catch (const Error& e) {
        ledger.abort_subgroup(owner, r, i, e.what());
        continue;
      }

      if (scenario.training.verify_subgroup_mean) {
        // participants recompute the quantized sum from their own
        // plaintexts; a mismatch voids the subgroup for the round
        std::vector<double> expected(part.sum.size(), 0.0);
        for (AgentId m : survivors) {
          for (std::size_t d = 0; d < expected.size(); ++d)
            expected[d] += codec.decode(codec.encode(submitted.at(m).weights[d]));
        }
        bool ok = true;
        for (std::size_t d = 0; d < expected.size(); ++d)
          if (std::abs(expected[d] - part.sum[d]) > 1.0 / codec.scale) ok = false;
        if (!ok) {
          ++disputes_this_round;
          ledger.abort_subgroup(owner, r, i, "aggregate failed participant verification");
          continue;
        }
      }

      fl::AggregateBlob blob{r, part};
      ContentId cid = store.put(blob.serialize(codec), owner);
      ledger.record_subgroup_aggregate(owner, r, i, cid.hex(), part.count);
      parts.push_back(std::move(part));
    }

    fl::ModelParams next = global;
    if (!parts.empty()) next.weights = fl::master_aggregate(parts);
    ContentId global_cid = store.put(next.serialize(codec), owner);
    ledger.record_global_model(owner, r, global_cid.hex());
    global = next;

    metrics::RoundMetrics row;
    row.round = r;
    row.training_loss = fl::loss(global, pooled);
    row.control_score = control_metric(global, population.control, scenario.task.metric);
    row.updates_registered =
        static_cast<std::uint32_t>(ledger.task().round(r).updates.size());
    row.admitted = admitted_total;
    row.aborted_subgroups =
        static_cast<std::uint32_t>(ledger.task().round(r).aborted_subgroups.size());
    row.disputes = disputes_this_round;
    row.tax_collected = scenario.economics.tax_rate.num > 0
                            ? ledger.charge_tax(r, scenario.economics.tax_rate)
                            : 0;
    run_metrics.rounds.push_back(row);

    metrics::TreasuryRow treasury;
    treasury.epoch = r;
    treasury.public_goods = ledger.economics().public_goods_pool;
    treasury.total_balances = ledger.economics().total_balances();
    treasury.escrow = ledger.task().escrow;
    std::uint32_t active = 0;
    for (const auto& [id, nft] : ledger.economics().stakes)
      if (nft.active) ++active;
    treasury.active_stakes = active;
    run_metrics.treasury.push_back(treasury);

    if (r == scenario.signal_round) ledger.signal_final_round(owner);
  }
  store.set_offline({});

  // ---- evaluation ----
  audit::SecureEnvironment env(population.control, codec, &store,
                               root.fork("env").next_u64());
  const chain::RoundState& eval_round = ledger.task().round(final_round);
  {
    std::vector<std::size_t> sizes;
    for (const auto& sg : eval_round.subgroups) sizes.push_back(sg.members.size());
    std::vector<AgentId> staked = ledger.economics().eligible(evaluator_ids);
    Rng assign_rng = root.fork("assignment");
    auto assignment = chain::assign_evaluators(staked, sizes, scenario.task.evaluator_ratio,
                                               assign_rng);
    ledger.begin_evaluation(owner, env.control_digest().hex(), assignment);
  }

  auto scoreable_of = [&](const chain::SubgroupState& sg) {
    std::vector<AgentId> out;
    for (AgentId m : sg.admitted)
      if (ledger.task().eval_registry.count(m)) out.push_back(m);
    return out;
  };

  {
    std::map<AgentId, std::vector<AgentId>> assignments;
    std::set<AgentId> delivered;
    for (const auto& sg : eval_round.subgroups) {
      std::vector<AgentId> scoreable = scoreable_of(sg);
      for (AgentId e : sg.evaluators) assignments[e] = scoreable;
      for (AgentId m : scoreable) delivered.insert(m);
    }
    env.set_assignments(std::move(assignments));
    for (AgentId m : delivered)
      env.deliver_model(m, ContentId::from_hex(ledger.task().eval_registry.at(m)));
  }

  // benchmark inside the environment, then commit in deterministic order
  std::vector<ReportPlan> plans;
  for (std::uint32_t i = 0; i < eval_round.subgroups.size(); ++i) {
    const chain::SubgroupState& sg = eval_round.subgroups[i];
    std::vector<AgentId> scoreable = scoreable_of(sg);
    if (scoreable.empty()) {
      ledger.close_commits(owner, i);
      continue;
    }
    for (AgentId e : sg.evaluators) {
      adv::EvaluatorPlan plan = scenario.adversary.evaluator_plan(e);
      for (AgentId p : scoreable) {
        ReportPlan row;
        row.subgroup = i;
        row.evaluator = e;
        row.participant = p;
        row.att = env.benchmark(e, p, scenario.task.metric);
        row.truthful = row.att.claimed_score;
        row.reported = adv::reported_score(plan, p, row.truthful);
        row.salt = salt_for(root, e, p);
        row.copycat = plan.strategy == adv::EvaluatorStrategy::copycat;
        if (plan.strategy == adv::EvaluatorStrategy::false_attestation)
          row.att = adv::tampered_attestation(row.att, row.reported);
        plans.push_back(std::move(row));
      }
    }
  }
  for (const ReportPlan& plan : plans) {
    // a copycat has nothing to commit to yet; it binds a sentinel no
    // reveal can ever match and gambles on copying later
    ScoreMicro committed = plan.copycat ? -1 : plan.reported;
    ledger.commit_score(plan.evaluator, plan.participant,
                        chain::commitment_digest(committed, plan.salt));
  }

  auto count_result = [&](chain::RevealResult result) {
    if (result == chain::RevealResult::Mismatch) ++run_metrics.reveal_mismatches;
    if (result == chain::RevealResult::MissingAttestation) ++run_metrics.missing_attestations;
  };
  for (const ReportPlan& plan : plans) {
    if (plan.copycat) continue;
    count_result(ledger.reveal_score(plan.evaluator, plan.participant, plan.reported,
                                     plan.salt, plan.att, true));
  }
  for (const ReportPlan& plan : plans) {
    if (!plan.copycat) continue;
    ScoreMicro copied = plan.truthful;
    for (const auto& rec : eval_round.subgroups[plan.subgroup].reveals) {
      if (rec.participant == plan.participant) {
        copied = rec.score;
        break;
      }
    }
    count_result(ledger.reveal_score(plan.evaluator, plan.participant, copied, plan.salt,
                                     plan.att, true));
  }

  for (std::uint32_t i = 0; i < eval_round.subgroups.size(); ++i) {
    const chain::SubgroupState& sg = eval_round.subgroups[i];
    std::map<std::string, bool> verdicts;
    for (const auto& rec : sg.reveals) {
      bool ok = true;
      if (scenario.attestation_enforcement) {
        ok = env.verify(rec.attestation) && rec.attestation.claimed_score == rec.score &&
             rec.attestation.evaluator == rec.evaluator &&
             rec.attestation.participant == rec.participant &&
             rec.attestation.metric == scenario.task.metric;
      }
      verdicts[std::to_string(rec.evaluator) + ":" + std::to_string(rec.participant)] = ok;
    }
    ledger.verify_attestations(owner, i, verdicts);
    if (sg.voided) ++run_metrics.voided_subgroups;
  }

  ledger.settle(owner);

  std::map<AgentId, econ::Amount> slashed;
  for (AgentId e : ledger.task().slash_flagged) {
    if (!ledger.economics().has_active_stake(e)) continue;
    slashed[e] = ledger.slash(e, scenario.economics.slash_fraction);
    ++run_metrics.slashed_evaluators;
  }

  // ---- outcome rows ----
  const chain::TaskState& task = ledger.task();
  auto payout_of = [&](AgentId a) {
    auto it = task.payouts.find(a);
    return it == task.payouts.end() ? econ::Amount{0} : it->second;
  };
  {
    metrics::AgentOutcome row;
    row.agent = owner;
    row.role = "owner";
    row.strategy = "honest";
    row.final_balance = ledger.economics().balance_of(owner);
    run_metrics.agents.push_back(row);
  }
  for (AgentId p : roster) {
    metrics::AgentOutcome row;
    row.agent = p;
    row.role = "participant";
    row.strategy = adv::participant_strategy_name(scenario.adversary.participant_strategy(p));
    if (scenario.control_leak.count(p)) row.strategy += "+leak";
    auto it = task.participant_scores.find(p);
    if (it != task.participant_scores.end()) {
      row.scored = true;
      row.overall = it->second.overall;
      row.raw_overall = it->second.raw_overall;
      row.eliminated = it->second.eliminated;
      row.accepted_reports = it->second.accepted_reports;
    }
    row.payout = payout_of(p);
    row.final_balance = ledger.economics().balance_of(p);
    run_metrics.paid_participants += row.payout;
    run_metrics.agents.push_back(row);
  }
  for (AgentId e : evaluator_ids) {
    metrics::AgentOutcome row;
    row.agent = e;
    row.role = "evaluator";
    row.strategy =
        adv::evaluator_strategy_name(scenario.adversary.evaluator_plan(e).strategy);
    auto it = task.evaluator_scores.find(e);
    if (it != task.evaluator_scores.end()) {
      row.scored = true;
      row.overall = it->second;
    }
    row.payout = payout_of(e);
    row.final_balance = ledger.economics().balance_of(e);
    row.slash_flagged = task.slash_flagged.count(e) != 0;
    row.abstained = task.abstained.count(e) != 0;
    auto sl = slashed.find(e);
    if (sl != slashed.end()) row.slashed_amount = sl->second;
    run_metrics.paid_evaluators += row.payout;
    run_metrics.agents.push_back(row);
  }

  run_metrics.rounds_completed = final_round;
  run_metrics.public_goods_remainder = task.public_goods_remainder;
  run_metrics.final_model = ledger.final_model_cid(owner);
  run_metrics.final_state_digest = ledger.state_digest_hex();
  run_metrics.conserved = ledger.conserved();
  run_metrics.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - started)
                                  .count();

  return RunResult{std::move(run_metrics), std::move(ledger)};
}

RunResult run_to_dir(const scen::Scenario& scenario, const std::string& out_dir) {
  RunResult result = run(scenario);
  std::filesystem::create_directories(out_dir);
  result.ledger.export_log(out_dir + "/txlog.jsonl");
  metrics::write_csv_tables(result.metrics, out_dir);
  metrics::write_summary(result.metrics, out_dir + "/summary.json");
  return result;
}

}  // namespace orch
}  // namespace din
