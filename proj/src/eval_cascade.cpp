#include "evopt/eval_cascade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "evopt/errors.hpp"
#include "evopt/subprocess.hpp"

namespace evopt {

const char* to_string(StageKind kind) noexcept {
  switch (kind) {
    case StageKind::kBuild: return "BUILD";
    case StageKind::kUnitTest: return "UNIT_TEST";
    case StageKind::kPerformance: return "PERFORMANCE";
    case StageKind::kStaticAnalysis: return "STATIC_ANALYSIS";
    case StageKind::kLlmJudge: return "LLM_JUDGE";
  }
  return "UNKNOWN";
}

StageKind stage_kind_from_string(const std::string& name) {
  if (name == "BUILD") return StageKind::kBuild;
  if (name == "UNIT_TEST") return StageKind::kUnitTest;
  if (name == "PERFORMANCE") return StageKind::kPerformance;
  if (name == "STATIC_ANALYSIS") return StageKind::kStaticAnalysis;
  if (name == "LLM_JUDGE") return StageKind::kLlmJudge;
  throw EngineError(ErrorKind::kConfig, "unknown stage kind: " + name);
}

nlohmann::json StageResult::to_json() const {
  nlohmann::json doc{{"name", name},
                     {"score", score},
                     {"passed", passed},
                     {"diagnostics", diagnostics},
                     {"wall_seconds", 0.0}};
  if (tests_passed) doc["tests_passed"] = *tests_passed;
  if (tests_total) doc["tests_total"] = *tests_total;
  return doc;
}

StageResult StageResult::from_json(const nlohmann::json& doc) {
  StageResult result;
  result.name = doc.at("name").get<std::string>();
  result.score = doc.at("score").get<double>();
  result.passed = doc.at("passed").get<bool>();
  result.diagnostics = doc.value("diagnostics", std::string{});
  if (doc.contains("tests_passed")) result.tests_passed = doc.at("tests_passed").get<std::uint64_t>();
  if (doc.contains("tests_total")) result.tests_total = doc.at("tests_total").get<std::uint64_t>();
  return result;
}

std::optional<double> EvaluationReport::unit_pass_rate() const {
  for (const auto& result : stage_results) {
    if (result.tests_passed && result.tests_total && *result.tests_total > 0) {
      return static_cast<double>(*result.tests_passed) / static_cast<double>(*result.tests_total);
    }
  }
  return std::nullopt;
}

std::string EvaluationReport::failure_diagnostics() const {
  if (!rejected_at) return {};
  for (const auto& result : stage_results) {
    if (result.name == *rejected_at) {
      return result.diagnostics.empty()
                 ? "rejected at stage " + result.name
                 : "stage " + result.name + ": " + result.diagnostics;
    }
  }
  return "rejected at stage " + *rejected_at;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& result : stage_results) stages.push_back(result.to_json());
  nlohmann::json doc{{"stage_results", stages},
                     {"combined_score", combined_score},
                     {"passed_all_gates", passed_all_gates}};
  if (rejected_at) doc["rejected_at"] = *rejected_at;
  return doc;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& doc) {
  EvaluationReport report;
  for (const auto& entry : doc.at("stage_results")) {
    report.stage_results.push_back(StageResult::from_json(entry));
  }
  report.combined_score = doc.at("combined_score").get<double>();
  report.passed_all_gates = doc.at("passed_all_gates").get<bool>();
  if (doc.contains("rejected_at")) report.rejected_at = doc.at("rejected_at").get<std::string>();
  return report;
}

void CascadeConfig::validate() const {
  if (!(0.0 <= tau1 && tau1 <= tau2 && tau2 <= tau3 && tau3 <= 1.0)) {
    throw EngineError(ErrorKind::kConfig, "cascade thresholds must satisfy 0 <= tau1 <= tau2 <= tau3 <= 1");
  }
  if (alpha_judge < 0.0 || alpha_judge > 1.0) {
    throw EngineError(ErrorKind::kConfig, "alpha_judge must lie in [0, 1]");
  }
  for (const auto& [name, weight] : component_weights) {
    if (weight < 0.0) {
      throw EngineError(ErrorKind::kConfig, "component weight for " + name + " must be >= 0");
    }
  }
}

bool is_eligible(const EvaluationReport& report) { return report.passed_all_gates; }

double combined_score_fallback(const std::map<std::string, double>& component_scores) {
  if (component_scores.empty()) {
    throw EngineError(ErrorKind::kPrecondition, "fallback score requires at least one component");
  }
  // Extended-precision accumulation keeps the mean faithful to the exact
  // rational value for small score sets.
  long double sum = 0.0L;
  for (const auto& [name, score] : component_scores) {
    if (score < 0.0 || score > 1.0) {
      throw EngineError(ErrorKind::kPrecondition, "component score " + name + " outside [0, 1]");
    }
    sum += score;
  }
  return static_cast<double>(sum / static_cast<long double>(component_scores.size()));
}

double normalize_speedup_score(double baseline_ms, double candidate_ms) {
  if (baseline_ms < 0.0 || candidate_ms <= 0.0) {
    throw EngineError(ErrorKind::kPrecondition,
                      "speedup normalization requires baseline >= 0 and candidate > 0");
  }
  const double speedup = baseline_ms / candidate_ms;
  return std::clamp(speedup / 2.0, 0.0, 1.0);
}

void validate_stage_order(const std::vector<StageSpec>& stages) {
  if (stages.empty()) {
    throw EngineError(ErrorKind::kConfig, "cascade requires at least one stage");
  }
  bool quality_seen = false;
  for (const auto& stage : stages) {
    const bool correctness = stage.kind == StageKind::kBuild || stage.kind == StageKind::kUnitTest;
    if (!correctness) {
      quality_seen = true;
    } else if (quality_seen) {
      throw EngineError(ErrorKind::kConfig,
                        "correctness stage " + stage.name + " must precede quality stages");
    }
    if (stage.gate_threshold && (*stage.gate_threshold < 0.0 || *stage.gate_threshold > 1.0)) {
      throw EngineError(ErrorKind::kConfig, "gate threshold for " + stage.name + " outside [0, 1]");
    }
  }
}

// ---------------------------------------------------------------------------
// Stage execution
// ---------------------------------------------------------------------------

SubprocessStageRunner::SubprocessStageRunner(std::filesystem::path workdir)
    : workdir_(std::move(workdir)) {}

StageOutcome SubprocessStageRunner::run(const StageSpec& spec,
                                        const std::filesystem::path& candidate_path) {
  std::string command = spec.command;
  const std::string quoted = "'" + candidate_path.string() + "'";
  const auto placeholder = command.find("{candidate}");
  if (placeholder != std::string::npos) {
    command.replace(placeholder, std::string("{candidate}").size(), quoted);
  } else {
    command += " " + quoted;
  }
  const ExecResult exec = run_command(command, workdir_, spec.timeout_seconds);
  StageOutcome outcome;
  outcome.exit_code = exec.exit_code;
  outcome.timed_out = exec.timed_out;
  outcome.spawn_failed = exec.spawn_failed;
  outcome.stdout_text = exec.stdout_text;
  outcome.stderr_text = exec.stderr_text;
  outcome.wall_seconds = exec.wall_seconds;
  return outcome;
}

StageResult interpret_stage_outcome(const StageSpec& spec, const StageOutcome& outcome) {
  StageResult result;
  result.name = spec.name;
  result.wall_seconds = outcome.wall_seconds;

  auto fail = [&](const std::string& why) {
    result.score = 0.0;
    result.passed = false;
    result.diagnostics = why;
  };

  if (outcome.spawn_failed) {
    fail("stage runner failure: could not spawn command");
  } else if (outcome.timed_out) {
    fail("timeout after " + std::to_string(spec.timeout_seconds) + " s");
  } else if (outcome.exit_code != 0) {
    fail("command exited with code " + std::to_string(outcome.exit_code));
  } else {
    nlohmann::json doc = nlohmann::json::parse(outcome.stdout_text, nullptr, false);
    if (doc.is_discarded()) {
      // Tolerate leading noise: retry on the last non-empty line.
      const auto end = outcome.stdout_text.find_last_not_of(" \t\r\n");
      const auto begin = outcome.stdout_text.rfind('\n', end == std::string::npos ? 0 : end);
      if (end != std::string::npos) {
        doc = nlohmann::json::parse(
            outcome.stdout_text.substr(begin == std::string::npos ? 0 : begin + 1, end + 1), nullptr,
            false);
      }
    }
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("score")) {
      fail("invalid result json on stage stdout");
    } else {
      result.score = std::clamp(doc.at("score").get<double>(), 0.0, 1.0);
      result.passed = doc.value("passed", true);
      result.diagnostics = doc.value("diagnostics", std::string{});
      if (doc.contains("tests_passed")) result.tests_passed = doc.at("tests_passed").get<std::uint64_t>();
      if (doc.contains("tests_total")) result.tests_total = doc.at("tests_total").get<std::uint64_t>();
    }
  }

  if (!outcome.stderr_text.empty()) {
    if (!result.diagnostics.empty()) result.diagnostics += "\n";
    result.diagnostics += outcome.stderr_text;
  }
  if (result.passed && spec.gate_threshold && result.score < *spec.gate_threshold) {
    result.passed = false;
    if (!result.diagnostics.empty()) result.diagnostics += "\n";
    result.diagnostics += "score below stage gate threshold";
  }
  return result;
}

// ---------------------------------------------------------------------------
// CascadeEvaluator
// ---------------------------------------------------------------------------

CascadeEvaluator::CascadeEvaluator(std::vector<StageSpec> stages, CascadeConfig config,
                                   std::shared_ptr<StageRunner> runner,
                                   std::filesystem::path sandbox_root)
    : stages_(std::move(stages)),
      config_(std::move(config)),
      runner_(std::move(runner)),
      sandbox_root_(std::move(sandbox_root)) {
  validate_stage_order(stages_);
  config_.validate();
}

namespace {

double stage_weight(const StageSpec& spec, const CascadeConfig& config) {
  double weight = 1.0;
  if (auto it = config.component_weights.find(spec.name); it != config.component_weights.end()) {
    weight = it->second;
  }
  if (spec.kind == StageKind::kLlmJudge) {
    weight *= config.alpha_judge;
  }
  return weight;
}

}  // namespace

EvaluationReport CascadeEvaluator::evaluate(const std::string& candidate_source,
                                            const std::string& label) const {
  const std::filesystem::path dir = sandbox_root_ / label;
  std::filesystem::create_directories(dir);
  const std::filesystem::path candidate_path = dir / config_.candidate_filename;
  {
    std::ofstream out(candidate_path, std::ios::binary | std::ios::trunc);
    out << candidate_source;
  }

  EvaluationReport report;
  double total_weight = 0.0;
  for (const auto& stage : stages_) total_weight += stage_weight(stage, config_);

  double running_weight = 0.0;
  double running_sum = 0.0;
  const std::array<double, 3> taus{config_.tau1, config_.tau2, config_.tau3};

  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const StageSpec& stage = stages_[i];
    const StageResult result = interpret_stage_outcome(stage, runner_->run(stage, candidate_path));
    report.stage_results.push_back(result);

    const double weight = stage_weight(stage, config_);
    running_weight += weight;
    running_sum += weight * result.score;

    if (!result.passed) {
      report.rejected_at = stage.name;
      break;
    }
    if (i < taus.size()) {
      const double running = running_weight > 0.0 ? running_sum / running_weight : 0.0;
      if (running < taus[i]) {
        report.rejected_at = stage.name;
        break;
      }
    }
  }

  // Skipped stages count as 0 toward the combined score.
  report.combined_score = total_weight > 0.0 ? running_sum / total_weight : 0.0;
  report.passed_all_gates = !report.rejected_at.has_value();
  return report;
}

CascadeEvaluator CascadeEvaluator::correctness_only() const {
  std::vector<StageSpec> correctness;
  for (const auto& stage : stages_) {
    if (stage.kind == StageKind::kBuild || stage.kind == StageKind::kUnitTest) {
      correctness.push_back(stage);
    }
  }
  if (correctness.empty()) {
    throw EngineError(ErrorKind::kConfig, "cascade has no correctness stages");
  }
  return CascadeEvaluator(std::move(correctness), config_, runner_, sandbox_root_ / "repair");
}

bool CascadeEvaluator::has_unit_test_stage() const {
  for (const auto& stage : stages_) {
    if (stage.kind == StageKind::kUnitTest) return true;
  }
  return false;
}

}  // namespace evopt
