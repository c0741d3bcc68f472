#include "evopt/refiner.hpp"

#include <cstdio>

#include "evopt/errors.hpp"

namespace evopt {

Refiner::Refiner(MutationProvider& provider, const CascadeEvaluator& evaluator,
                 PromptTemplate repair_template, Rng& rng)
    : provider_(provider),
      evaluator_(evaluator),
      repair_template_(std::move(repair_template)),
      rng_(rng) {}

RepairOutcome Refiner::reflect_repair(const RepairTask& task) {
  if (task.strategy != RepairTask::Strategy::kReflection) {
    throw EngineError(ErrorKind::kPrecondition, "reflect_repair requires the REFLECTION strategy");
  }
  if (task.attempts_remaining < 1) {
    throw EngineError(ErrorKind::kPrecondition, "reflect_repair requires at least one attempt");
  }

  const CascadeEvaluator correctness = evaluator_.correctness_only();
  const std::uint64_t sequence = repair_sequence_++;

  RepairOutcome outcome;
  outcome.final_diagnostics = task.diagnostics;
  std::string diagnostics = task.diagnostics;

  for (int attempt = 0; attempt < task.attempts_remaining; ++attempt) {
    ++outcome.provider_calls;
    std::string repaired_source;
    try {
      const std::string prompt =
          build_repair_prompt(task.candidate_source, diagnostics, repair_template_);
      const MutationResponse response = provider_.propose(prompt, rng_);
      repaired_source = apply_mutation(parse_evolve_block(task.candidate_source), response);
    } catch (const EngineError& error) {
      diagnostics = error.what();
      outcome.final_diagnostics = diagnostics;
      continue;  // a failed proposal consumes the attempt
    }

    char label[64];
    std::snprintf(label, sizeof(label), "reflect%04llu_a%02d",
                  static_cast<unsigned long long>(sequence), attempt);
    const EvaluationReport report = correctness.evaluate(repaired_source, label);
    if (report.passed_all_gates) {
      outcome.repaired = true;
      outcome.source = std::move(repaired_source);
      outcome.report = report;
      if (auto rate = report.unit_pass_rate()) outcome.best_pass_rate = *rate;
      return outcome;
    }
    diagnostics = report.failure_diagnostics();
    outcome.final_diagnostics = diagnostics;
    if (auto rate = report.unit_pass_rate()) {
      outcome.best_pass_rate = std::max(outcome.best_pass_rate, *rate);
    }
  }
  return outcome;
}

RepairOutcome Refiner::mcts_repair(const RepairTask& task, const MctsConfig& config) {
  if (task.strategy != RepairTask::Strategy::kMctsRepair) {
    throw EngineError(ErrorKind::kPrecondition, "mcts_repair requires the MCTS_REPAIR strategy");
  }
  if (!evaluator_.has_unit_test_stage()) {
    throw EngineError(ErrorKind::kConfig, "repair requires a unit-test stage");
  }

  const CascadeEvaluator correctness = evaluator_.correctness_only();
  const std::uint64_t sequence = repair_sequence_++;

  // Fix proposals come from the repair prompt rather than the optimization
  // prompt, so route expansion through a thin adapter provider.
  struct RepairPromptProvider : MutationProvider {
    MutationProvider& inner;
    const std::string& broken_source;
    const std::string& diagnostics;
    const PromptTemplate& tpl;
    RepairPromptProvider(MutationProvider& inner, const std::string& broken,
                         const std::string& diagnostics, const PromptTemplate& tpl)
        : inner(inner), broken_source(broken), diagnostics(diagnostics), tpl(tpl) {}
    MutationResponse propose(const std::string&, Rng& rng) override {
      return inner.propose(build_repair_prompt(broken_source, diagnostics, tpl), rng);
    }
    nlohmann::json state() const override { return inner.state(); }
  };
  RepairPromptProvider repair_provider(provider_, task.candidate_source, task.diagnostics,
                                       repair_template_);

  MctsEngine engine(config, repair_provider, correctness, PromptTemplate::default_optimize(), rng_);
  engine.set_reward_fn([](const EvaluationReport& report) {
    return report.unit_pass_rate().value_or(0.0);
  });
  engine.set_stop_reward(1.0);
  char prefix[48];
  std::snprintf(prefix, sizeof(prefix), "mctsrepair%04llu", static_cast<unsigned long long>(sequence));
  engine.set_sandbox_prefix(prefix);

  RepairOutcome outcome;
  outcome.final_diagnostics = task.diagnostics;

  if (config.max_iterations == 0) {
    // Empty budget: report the broken candidate's own pass rate and fail.
    const EvaluationReport report =
        correctness.evaluate(task.candidate_source, std::string(prefix) + "_root");
    outcome.best_pass_rate = report.unit_pass_rate().value_or(0.0);
    outcome.report = report;
    outcome.final_diagnostics = report.failure_diagnostics();
    return outcome;
  }

  const MctsResult result = engine.run(task.candidate_source);
  outcome.provider_calls = static_cast<int>(engine.provider_calls());
  outcome.best_pass_rate = std::max(result.best_reward, 0.0);

  const SearchTreeNode& best = engine.tree().node(result.best_node_id);
  outcome.report = best.report;
  if (result.target_reached && best.report && best.report->passed_all_gates) {
    outcome.repaired = true;
    outcome.source = best.program;
  } else if (best.report) {
    outcome.final_diagnostics = best.report->failure_diagnostics();
  }
  return outcome;
}

}  // namespace evopt
