// Tests for candidate repair: the bounded reflection loop and the MCTS
// repair search rewarded by unit-test pass rate.
#include <doctest.h>

#include "evopt/errors.hpp"
#include "evopt/refiner.hpp"
#include "support.hpp"

using namespace evopt;

namespace {

std::string broken_program() {
  return test::marked_program(test::marker_body("ok", "2/4", 0.8, 0.9, 0.6, "NEEDS-FIX"));
}

std::string broken_diagnostics() {
  return "stage unit: 2 of 4 unit tests passed; failing: test_case_3 test_case_4";
}

RepairTask reflection_task(int attempts = 3) {
  RepairTask task;
  task.candidate_source = broken_program();
  task.diagnostics = broken_diagnostics();
  task.attempts_remaining = attempts;
  task.strategy = RepairTask::Strategy::kReflection;
  return task;
}

}  // namespace

TEST_SUITE("refiner") {

TEST_CASE("reflection: a scripted fix lands on the first attempt") {
  const auto dir = test::fresh_temp_dir("refl_fix");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider({{{"Diagnostics:"},
                              {MutationResponse::Kind::kFullRewrite,
                               test::marker_body("ok", "4/4", 0.8, 0.9, 0.6), "restore tests"}}});
  Rng rng(1);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);

  const RepairOutcome outcome = refiner.reflect_repair(reflection_task());
  CHECK(outcome.repaired);
  CHECK(outcome.provider_calls == 1);
  REQUIRE(outcome.report.has_value());
  CHECK(outcome.report->passed_all_gates);
  CHECK(outcome.best_pass_rate == doctest::Approx(1.0));

  // The repaired candidate holds up under an independent re-evaluation of
  // the correctness stages.
  const auto recheck = evaluator.correctness_only().evaluate(outcome.source, "recheck");
  CHECK(recheck.passed_all_gates);
}

TEST_CASE("reflection: budget exhaustion after exactly N provider calls") {
  const auto dir = test::fresh_temp_dir("refl_fail");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider({{{},
                              {MutationResponse::Kind::kFullRewrite,
                               test::marker_body("ok", "1/4", 0.8, 0.9, 0.6), "still broken"}}});
  Rng rng(1);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);

  const RepairOutcome outcome = refiner.reflect_repair(reflection_task(3));
  CHECK_FALSE(outcome.repaired);
  CHECK(outcome.provider_calls == 3);
  CHECK(provider.call_index() == 3);
  CHECK(outcome.final_diagnostics.find("unit tests passed") != std::string::npos);
}

TEST_CASE("reflection: provider failures consume attempts") {
  const auto dir = test::fresh_temp_dir("refl_provider");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider(
      {{{"NEVER"}, {MutationResponse::Kind::kFullRewrite, "x\n", "unreachable"}}});
  Rng rng(1);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);
  const RepairOutcome outcome = refiner.reflect_repair(reflection_task(2));
  CHECK_FALSE(outcome.repaired);
  CHECK(outcome.provider_calls == 2);
}

TEST_CASE("reflection: repairs never touch bytes outside the block") {
  const auto dir = test::fresh_temp_dir("refl_frozen");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider({{{},
                              {MutationResponse::Kind::kFullRewrite,
                               test::marker_body("ok", "4/4", 0.8, 0.9, 0.6), "fix"}}});
  Rng rng(1);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);
  const RepairOutcome outcome = refiner.reflect_repair(reflection_task());
  REQUIRE(outcome.repaired);
  const EvolveBlock before = parse_evolve_block(broken_program());
  const EvolveBlock after = parse_evolve_block(outcome.source);
  CHECK(after.prefix == before.prefix);
  CHECK(after.suffix == before.suffix);
}

TEST_CASE("mcts repair: requires a unit-test stage") {
  const auto dir = test::fresh_temp_dir("mrep_nostage");
  std::vector<StageSpec> build_only{
      {"build", StageKind::kBuild, "evopt-marker-stage --kind build", 30.0, std::nullopt}};
  CascadeEvaluator evaluator(build_only, {}, std::make_shared<MarkerStageRunner>(), dir);
  ScriptedProvider provider({{{}, {MutationResponse::Kind::kFullRewrite, "x\n", ""}}});
  Rng rng(1);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);

  RepairTask task = reflection_task();
  task.strategy = RepairTask::Strategy::kMctsRepair;
  CHECK_THROWS_WITH_AS(refiner.mcts_repair(task, MctsConfig{}), "repair requires a unit-test stage",
                       EngineError);
}

TEST_CASE("mcts repair: zero budget reports the root pass rate and fails") {
  const auto dir = test::fresh_temp_dir("mrep_zero");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider({{{}, {MutationResponse::Kind::kFullRewrite, "x\n", ""}}});
  Rng rng(1);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);

  RepairTask task = reflection_task();
  task.strategy = RepairTask::Strategy::kMctsRepair;
  MctsConfig config;
  config.max_iterations = 0;
  const RepairOutcome outcome = refiner.mcts_repair(task, config);
  CHECK_FALSE(outcome.repaired);
  CHECK(outcome.best_pass_rate == doctest::Approx(0.5));  // 2 of 4 tests
  CHECK(outcome.provider_calls == 0);
}

TEST_CASE("mcts repair: a depth-1 scripted fix raises the pass rate to 1") {
  const auto dir = test::fresh_temp_dir("mrep_fix");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider({{{"Diagnostics:"},
                              {MutationResponse::Kind::kFullRewrite,
                               test::marker_body("ok", "4/4", 0.8, 0.9, 0.6), "repair"}}});
  Rng rng(11);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);

  RepairTask task = reflection_task();
  task.strategy = RepairTask::Strategy::kMctsRepair;
  MctsConfig config;
  config.expansion_k = 2;
  config.max_iterations = 6;
  config.exploitation_probability = 0.0;
  const RepairOutcome outcome = refiner.mcts_repair(task, config);

  CHECK(outcome.repaired);
  CHECK(outcome.best_pass_rate == doctest::Approx(1.0));
  REQUIRE(outcome.report.has_value());
  CHECK(outcome.report->unit_pass_rate() == doctest::Approx(1.0));
  CHECK(outcome.provider_calls <= static_cast<int>(config.max_iterations) * config.expansion_k);

  const EvolveBlock before = parse_evolve_block(broken_program());
  const EvolveBlock after = parse_evolve_block(outcome.source);
  CHECK(after.prefix == before.prefix);
  CHECK(after.suffix == before.suffix);
}

TEST_CASE("mcts repair: unfixable candidates report the best rate seen") {
  const auto dir = test::fresh_temp_dir("mrep_best");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider({{{},
                              {MutationResponse::Kind::kFullRewrite,
                               test::marker_body("ok", "3/4", 0.8, 0.9, 0.6), "partial fix"}}});
  Rng rng(5);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);

  RepairTask task = reflection_task();
  task.strategy = RepairTask::Strategy::kMctsRepair;
  MctsConfig config;
  config.expansion_k = 1;
  config.max_iterations = 4;
  const RepairOutcome outcome = refiner.mcts_repair(task, config);
  CHECK_FALSE(outcome.repaired);
  CHECK(outcome.best_pass_rate == doctest::Approx(0.75));
}

TEST_CASE("strategy preconditions are enforced") {
  const auto dir = test::fresh_temp_dir("refiner_strategy");
  auto evaluator = test::marker_evaluator(dir);
  ScriptedProvider provider({{{}, {MutationResponse::Kind::kFullRewrite, "x\n", ""}}});
  Rng rng(1);
  Refiner refiner(provider, evaluator, PromptTemplate::default_repair(), rng);

  RepairTask wrong = reflection_task();
  wrong.strategy = RepairTask::Strategy::kMctsRepair;
  CHECK_THROWS_AS(refiner.reflect_repair(wrong), EngineError);
  RepairTask zero = reflection_task(0);
  CHECK_THROWS_AS(refiner.reflect_repair(zero), EngineError);
}

}  // TEST_SUITE
