// Tests for the cascaded evaluation pipeline: gating, score aggregation, the
// stage-runner protocol, and subprocess execution.
#include <doctest.h>

#include <algorithm>

#include "evopt/errors.hpp"
#include "evopt/eval_cascade.hpp"
#include "evopt/rng.hpp"
#include "support.hpp"

using namespace evopt;

namespace {

std::vector<StageSpec> five_stages() { return test::marker_stages(); }

}  // namespace

TEST_SUITE("eval_cascade") {

TEST_CASE("fallback: mean of equal scores") {
  CHECK(combined_score_fallback({{"a", 1.0}, {"b", 1.0}}) == doctest::Approx(1.0));
}

TEST_CASE("fallback: arithmetic mean") {
  const double mean = combined_score_fallback({{"a", 0.2}, {"b", 0.4}, {"c", 0.6}});
  CHECK(mean == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("fallback: single entry is its own mean") {
  CHECK(combined_score_fallback({{"a", 0.37}}) == doctest::Approx(0.37));
}

TEST_CASE("fallback: empty map is a structured error") {
  CHECK_THROWS_AS(combined_score_fallback({}), EngineError);
}

TEST_CASE("fallback: permutation-invariant and bounded") {
  Rng rng(7);
  for (int round = 0; round < 50; ++round) {
    std::map<std::string, double> scores;
    const std::size_t n = 1 + rng.next_below(8);
    for (std::size_t i = 0; i < n; ++i) {
      scores["s" + std::to_string(i)] = rng.next_unit();
    }
    const double mean = combined_score_fallback(scores);
    CHECK(mean >= 0.0);
    CHECK(mean <= 1.0);
    // std::map iterates in key order regardless of insertion order, so
    // permutation invariance reduces to value invariance; re-check through a
    // reversed insertion sequence.
    std::map<std::string, double> reversed(scores.rbegin(), scores.rend());
    CHECK(combined_score_fallback(reversed) == doctest::Approx(mean).epsilon(1e-15));
  }
}

TEST_CASE("stage order: correctness before quality is enforced") {
  auto stages = five_stages();
  std::swap(stages[1], stages[2]);  // unit tests after performance
  CHECK_THROWS_AS(validate_stage_order(stages), EngineError);
  CHECK_THROWS_AS(validate_stage_order({}), EngineError);
  CHECK_NOTHROW(validate_stage_order(five_stages()));
}

TEST_CASE("protocol: valid stage json is honored") {
  StageSpec spec{"unit", StageKind::kUnitTest, "true", 5.0, std::nullopt};
  StageOutcome outcome;
  outcome.exit_code = 0;
  outcome.stdout_text =
      R"({"score": 0.5, "passed": false, "diagnostics": "2 tests failed", "tests_passed": 2, "tests_total": 4})";
  const StageResult result = interpret_stage_outcome(spec, outcome);
  CHECK(result.score == doctest::Approx(0.5));
  CHECK_FALSE(result.passed);
  CHECK(result.tests_passed == 2);
  CHECK(result.tests_total == 4);
}

TEST_CASE("protocol: nonzero exit maps to score 0") {
  StageSpec spec{"build", StageKind::kBuild, "false", 5.0, std::nullopt};
  StageOutcome outcome;
  outcome.exit_code = 3;
  const StageResult result = interpret_stage_outcome(spec, outcome);
  CHECK(result.score == 0.0);
  CHECK_FALSE(result.passed);
  CHECK(result.diagnostics.find("exited with code 3") != std::string::npos);
}

TEST_CASE("protocol: timeout and invalid json are failure classes") {
  StageSpec spec{"perf", StageKind::kPerformance, "sleep", 0.1, std::nullopt};
  StageOutcome timeout;
  timeout.timed_out = true;
  CHECK(interpret_stage_outcome(spec, timeout).diagnostics.find("timeout") != std::string::npos);

  StageOutcome garbage;
  garbage.exit_code = 0;
  garbage.stdout_text = "no json here";
  const StageResult result = interpret_stage_outcome(spec, garbage);
  CHECK(result.score == 0.0);
  CHECK(result.diagnostics.find("invalid result json") != std::string::npos);
}

TEST_CASE("protocol: stderr is appended to diagnostics") {
  StageSpec spec{"build", StageKind::kBuild, "true", 5.0, std::nullopt};
  StageOutcome outcome;
  outcome.exit_code = 0;
  outcome.stdout_text = R"({"score": 1.0, "passed": true, "diagnostics": "ok"})";
  outcome.stderr_text = "warning: deprecated API";
  const StageResult result = interpret_stage_outcome(spec, outcome);
  CHECK(result.diagnostics.find("ok") != std::string::npos);
  CHECK(result.diagnostics.find("deprecated") != std::string::npos);
}

TEST_CASE("protocol: per-stage gate threshold flips passed") {
  StageSpec spec{"judge", StageKind::kLlmJudge, "true", 5.0, 0.8};
  StageOutcome outcome;
  outcome.exit_code = 0;
  outcome.stdout_text = R"({"score": 0.7, "passed": true})";
  CHECK_FALSE(interpret_stage_outcome(spec, outcome).passed);
}

TEST_CASE("cascade: stage-1 score below tau1 rejects and skips the rest") {
  const auto dir = test::fresh_temp_dir("cascade_gate");
  auto runner = std::make_shared<test::RecordingStageRunner>(
      std::map<std::string, double>{{"build", 0.4}});
  CascadeEvaluator evaluator(five_stages(), {}, runner, dir);

  const EvaluationReport report = evaluator.evaluate("program", "case1");
  CHECK(report.rejected_at == "build");
  CHECK_FALSE(report.passed_all_gates);
  CHECK(runner->executed == std::vector<std::string>{"build"});
  CHECK(report.stage_results.size() == 1);
}

TEST_CASE("cascade: all-ones passes every gate with combined score 1") {
  const auto dir = test::fresh_temp_dir("cascade_ones");
  auto runner = std::make_shared<test::RecordingStageRunner>(std::map<std::string, double>{});
  CascadeEvaluator evaluator(five_stages(), {}, runner, dir);
  const EvaluationReport report = evaluator.evaluate("program", "case1");
  CHECK(report.passed_all_gates);
  CHECK_FALSE(report.rejected_at.has_value());
  CHECK(report.combined_score == doctest::Approx(1.0));
  CHECK(runner->executed.size() == 5);
}

TEST_CASE("cascade: judge weight alpha scales the combination") {
  // Scores (1.0, 1.0, 0.8, 0.6, judge 0.5) with equal component weights and
  // alpha = 0.1: weighted mean = (1 + 1 + 0.8 + 0.6 + 0.1*0.5) / 4.1.
  const auto dir = test::fresh_temp_dir("cascade_alpha");
  auto runner = std::make_shared<test::RecordingStageRunner>(std::map<std::string, double>{
      {"build", 1.0}, {"unit", 1.0}, {"perf", 0.8}, {"static", 0.6}, {"judge", 0.5}});
  CascadeConfig config;
  config.alpha_judge = 0.1;
  CascadeEvaluator evaluator(five_stages(), config, runner, dir);
  const EvaluationReport report = evaluator.evaluate("program", "case1");
  const double expected = (1.0 + 1.0 + 0.8 + 0.6 + 0.1 * 0.5) / 4.1;
  CHECK(report.combined_score == doctest::Approx(expected).epsilon(1e-12));
  CHECK(report.passed_all_gates);
}

TEST_CASE("cascade: alpha 0 ignores judge scores entirely") {
  const auto dir = test::fresh_temp_dir("cascade_alpha0");
  CascadeConfig config;
  config.alpha_judge = 0.0;

  auto low_judge = std::make_shared<test::RecordingStageRunner>(std::map<std::string, double>{
      {"build", 1.0}, {"unit", 0.9}, {"perf", 0.8}, {"static", 0.7}, {"judge", 0.1}});
  auto high_judge = std::make_shared<test::RecordingStageRunner>(std::map<std::string, double>{
      {"build", 1.0}, {"unit", 0.9}, {"perf", 0.8}, {"static", 0.7}, {"judge", 0.95}});

  const double with_low =
      CascadeEvaluator(five_stages(), config, low_judge, dir).evaluate("p", "a").combined_score;
  const double with_high =
      CascadeEvaluator(five_stages(), config, high_judge, dir).evaluate("p", "b").combined_score;
  CHECK(with_low == doctest::Approx(with_high).epsilon(1e-15));
  CHECK(with_low == doctest::Approx((1.0 + 0.9 + 0.8 + 0.7) / 4.0).epsilon(1e-12));
}

TEST_CASE("cascade: raising a tau can only shrink the eligible set") {
  const auto dir = test::fresh_temp_dir("cascade_mono");
  Rng rng(11);
  // A corpus of candidates with random per-stage scores; compare eligibility
  // between the default thresholds and a raised tau3.
  for (int round = 0; round < 30; ++round) {
    std::map<std::string, double> scores;
    for (const char* name : {"build", "unit", "perf", "static", "judge"}) {
      scores[name] = 0.5 + rng.next_unit() / 2.0;
    }
    auto runner = std::make_shared<test::RecordingStageRunner>(scores);
    CascadeConfig loose;
    CascadeConfig tight;
    tight.tau3 = 0.97;
    const bool eligible_loose = is_eligible(
        CascadeEvaluator(five_stages(), loose, runner, dir).evaluate("p", "loose"));
    const bool eligible_tight = is_eligible(
        CascadeEvaluator(five_stages(), tight, runner, dir).evaluate("p", "tight"));
    if (eligible_tight) CHECK(eligible_loose);
  }
}

TEST_CASE("cascade: deterministic stages make evaluate a pure function") {
  const auto dir = test::fresh_temp_dir("cascade_pure");
  auto runner = std::make_shared<test::RecordingStageRunner>(std::map<std::string, double>{
      {"perf", 0.77}});
  CascadeEvaluator evaluator(five_stages(), {}, runner, dir);
  const auto a = evaluator.evaluate("program", "case1").to_json();
  const auto b = evaluator.evaluate("program", "case1").to_json();
  CHECK(a == b);
}

TEST_CASE("eligibility: gate outcomes decide, the combined score does not") {
  EvaluationReport rejected;
  rejected.rejected_at = "build";
  rejected.passed_all_gates = false;
  CHECK_FALSE(is_eligible(rejected));

  EvaluationReport passed;
  passed.passed_all_gates = true;
  passed.combined_score = 0.6;
  CHECK(is_eligible(passed));
}

TEST_CASE("subprocess runner: stage protocol over /bin/sh") {
  const auto dir = test::fresh_temp_dir("cascade_sh");
  auto runner = std::make_shared<SubprocessStageRunner>(dir);

  StageSpec ok{"build", StageKind::kBuild,
               R"(echo '{"score": 0.9, "passed": true, "diagnostics": "built"}' # {candidate})",
               10.0, std::nullopt};
  const StageResult good = interpret_stage_outcome(ok, runner->run(ok, dir / "cand.txt"));
  CHECK(good.score == doctest::Approx(0.9));
  CHECK(good.passed);

  StageSpec crash{"build", StageKind::kBuild, "exit 3", 10.0, std::nullopt};
  const StageResult bad = interpret_stage_outcome(crash, runner->run(crash, dir / "cand.txt"));
  CHECK(bad.score == 0.0);
  CHECK_FALSE(bad.passed);

  StageSpec slow{"build", StageKind::kBuild, "sleep 5 # {candidate}", 0.2, std::nullopt};
  const StageResult timed = interpret_stage_outcome(slow, runner->run(slow, dir / "cand.txt"));
  CHECK(timed.diagnostics.find("timeout") != std::string::npos);
  CHECK_FALSE(timed.passed);
}

TEST_CASE("subprocess runner: candidate path substitution") {
  const auto dir = test::fresh_temp_dir("cascade_subst");
  test::write_file(dir / "cand.txt", "EVAL:perf=0.75");
  auto runner = std::make_shared<SubprocessStageRunner>(dir);
  StageSpec spec{"probe", StageKind::kBuild,
                 R"(grep -q 'EVAL:perf' {candidate} && echo '{"score": 1.0, "passed": true}')",
                 10.0, std::nullopt};
  const StageResult result = interpret_stage_outcome(spec, runner->run(spec, dir / "cand.txt"));
  CHECK(result.passed);
}

TEST_CASE("speedup normalization saturates at a 2x improvement") {
  CHECK(normalize_speedup_score(100.0, 100.0) == doctest::Approx(0.5));  // no change
  CHECK(normalize_speedup_score(100.0, 50.0) == doctest::Approx(1.0));   // halved
  CHECK(normalize_speedup_score(100.0, 25.0) == doctest::Approx(1.0));   // clipped
  CHECK(normalize_speedup_score(100.0, 200.0) == doctest::Approx(0.25)); // regression
  CHECK_THROWS_AS(normalize_speedup_score(100.0, 0.0), EngineError);
}

TEST_CASE("marker stages: directives drive each stage kind") {
  const std::string text =
      "code\n// EVAL:build=ok\n// EVAL:tests=3/4\n// EVAL:perf=0.66\n// EVAL:judge=0.42\n";
  CHECK(marker_stage_result(StageKind::kBuild, text).at("passed") == true);
  CHECK(marker_stage_result(StageKind::kBuild, "// EVAL:build=fail\n").at("score") == 0.0);

  const auto unit = marker_stage_result(StageKind::kUnitTest, text);
  CHECK(unit.at("score") == doctest::Approx(0.75));
  CHECK(unit.at("passed") == false);
  CHECK(unit.at("tests_passed") == 3);
  CHECK(unit.at("tests_total") == 4);
  CHECK(unit.at("diagnostics").get<std::string>().find("test_case_4") != std::string::npos);

  CHECK(marker_stage_result(StageKind::kPerformance, text).at("score") == doctest::Approx(0.66));
  CHECK(marker_stage_result(StageKind::kPerformance, "nothing").at("score") == doctest::Approx(0.5));
  CHECK(marker_stage_result(StageKind::kLlmJudge, text).at("score") == doctest::Approx(0.42));

  // Raw timings route through the speedup normalization.
  const auto timed = marker_stage_result(
      StageKind::kPerformance, "// EVAL:perf_baseline_ms=120\n// EVAL:perf_ms=80\n");
  CHECK(timed.at("score") == doctest::Approx(normalize_speedup_score(120.0, 80.0)));
}

TEST_CASE("report serialization: wall time is not persisted") {
  StageResult result;
  result.name = "build";
  result.score = 1.0;
  result.passed = true;
  result.wall_seconds = 1.234;
  CHECK(result.to_json().at("wall_seconds") == 0.0);
}

}  // TEST_SUITE
