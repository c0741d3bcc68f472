// evopt/eval_cascade.hpp - Cascaded candidate evaluation.
//
// Candidates run through an ordered list of stages (build, unit tests,
// performance, static checks, LLM review). Correctness stages come first;
// cumulative thresholds tau1..tau3 gate the running combined score after
// stages 1..3. A candidate failing any gate is rejected and later stages are
// skipped, their scores counting as 0 toward the final combined score.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace evopt {

enum class StageKind { kBuild, kUnitTest, kPerformance, kStaticAnalysis, kLlmJudge };

const char* to_string(StageKind kind) noexcept;
StageKind stage_kind_from_string(const std::string& name);

struct StageSpec {
  std::string name;
  StageKind kind = StageKind::kBuild;
  /// Shell command template. "{candidate}" expands to the candidate file
  /// path; without the placeholder the path is appended as a quoted argument.
  std::string command;
  double timeout_seconds = 120.0;
  std::optional<double> gate_threshold;  // per-stage minimum on its own score
};

struct StageResult {
  std::string name;
  double score = 0.0;  // in [0, 1]
  bool passed = false;
  std::string diagnostics;
  double wall_seconds = 0.0;  // transient; persisted as 0
  std::optional<std::uint64_t> tests_passed;
  std::optional<std::uint64_t> tests_total;

  nlohmann::json to_json() const;
  static StageResult from_json(const nlohmann::json& doc);
};

struct EvaluationReport {
  std::vector<StageResult> stage_results;
  double combined_score = 0.0;
  bool passed_all_gates = false;
  std::optional<std::string> rejected_at;

  /// Pass rate of the unit-test stage, if one ran and reported test counts.
  [[nodiscard]] std::optional<double> unit_pass_rate() const;
  [[nodiscard]] std::string failure_diagnostics() const;

  nlohmann::json to_json() const;
  static EvaluationReport from_json(const nlohmann::json& doc);
};

struct CascadeConfig {
  double tau1 = 0.5;
  double tau2 = 0.75;
  double tau3 = 0.9;
  double alpha_judge = 0.1;
  std::map<std::string, double> component_weights;  // default weight 1.0
  std::string candidate_filename = "candidate.txt";

  void validate() const;  // 0 <= tau1 <= tau2 <= tau3 <= 1, alpha in [0,1]
};

/// Database eligibility: the candidate passed every configured gate. The
/// combined score is fitness, not an extra gate.
bool is_eligible(const EvaluationReport& report);

/// Unweighted arithmetic mean of component scores; the fitness fallback when
/// no cascade combined score is available. Throws EngineError(kPrecondition)
/// on an empty map.
double combined_score_fallback(const std::map<std::string, double>& component_scores);

/// Normalization for performance stages reporting raw times: with
/// speedup = baseline / candidate, the score is min(1, speedup / 2), so a
/// candidate saturates the score once it halves the baseline time.
double normalize_speedup_score(double baseline_ms, double candidate_ms);

/// Correctness stages (build, unit tests) must precede quality stages.
/// Throws EngineError(kConfig) on violation or an empty list.
void validate_stage_order(const std::vector<StageSpec>& stages);

// ---------------------------------------------------------------------------
// Stage execution
// ---------------------------------------------------------------------------

/// Raw outcome of one stage command, before protocol interpretation.
struct StageOutcome {
  int exit_code = -1;
  bool timed_out = false;
  bool spawn_failed = false;
  std::string stdout_text;
  std::string stderr_text;
  double wall_seconds = 0.0;
};

class StageRunner {
 public:
  virtual ~StageRunner() = default;
  virtual StageOutcome run(const StageSpec& spec, const std::filesystem::path& candidate_path) = 0;
};

/// Runs the stage command through /bin/sh with the configured timeout.
class SubprocessStageRunner : public StageRunner {
 public:
  explicit SubprocessStageRunner(std::filesystem::path workdir = {});
  StageOutcome run(const StageSpec& spec, const std::filesystem::path& candidate_path) override;

 private:
  std::filesystem::path workdir_;
};

/// Interprets a stage outcome under the stage-runner protocol: the command
/// writes {"score", "passed", "diagnostics", "tests_passed"?, "tests_total"?}
/// to stdout; nonzero exit, timeout, or unparseable output maps to score 0.
StageResult interpret_stage_outcome(const StageSpec& spec, const StageOutcome& outcome);

class CascadeEvaluator {
 public:
  CascadeEvaluator(std::vector<StageSpec> stages, CascadeConfig config,
                   std::shared_ptr<StageRunner> runner, std::filesystem::path sandbox_root);

  /// Runs the cascade on one candidate. `label` names the per-evaluation
  /// sandbox directory, which must be stable across replays for byte-stable
  /// artifacts. Candidate-caused failures never throw.
  EvaluationReport evaluate(const std::string& candidate_source, const std::string& label) const;

  /// Same cascade restricted to build and unit-test stages (used by repair).
  [[nodiscard]] CascadeEvaluator correctness_only() const;

  [[nodiscard]] bool has_unit_test_stage() const;
  [[nodiscard]] const std::vector<StageSpec>& stages() const { return stages_; }
  [[nodiscard]] const CascadeConfig& config() const { return config_; }

 private:
  std::vector<StageSpec> stages_;
  CascadeConfig config_;
  std::shared_ptr<StageRunner> runner_;
  std::filesystem::path sandbox_root_;
};

}  // namespace evopt
