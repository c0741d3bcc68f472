// tests/support.hpp - Shared helpers for the evopt test suites.
#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "evopt/eval_cascade.hpp"
#include "evopt/marker_stage.hpp"
#include "evopt/mutators.hpp"

namespace evopt::test {

inline std::filesystem::path fixture_dir() { return std::filesystem::path(EVOPT_FIXTURE_DIR); }

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("evopt_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

/// Standard five-stage marker cascade (commands unused by the in-process
/// runner but kept realistic).
inline std::vector<StageSpec> marker_stages() {
  return {
      {"build", StageKind::kBuild, "evopt-marker-stage --kind build", 30.0, std::nullopt},
      {"unit", StageKind::kUnitTest, "evopt-marker-stage --kind unit_test", 30.0, std::nullopt},
      {"perf", StageKind::kPerformance, "evopt-marker-stage --kind performance", 30.0,
       std::nullopt},
      {"static", StageKind::kStaticAnalysis, "evopt-marker-stage --kind static_analysis", 30.0,
       std::nullopt},
      {"judge", StageKind::kLlmJudge, "evopt-marker-stage --kind llm_judge", 30.0, std::nullopt},
  };
}

inline CascadeEvaluator marker_evaluator(const std::filesystem::path& sandbox,
                                         CascadeConfig config = {}) {
  return CascadeEvaluator(marker_stages(), std::move(config),
                          std::make_shared<MarkerStageRunner>(), sandbox);
}

/// A marked source file whose EVAL markers sit inside the writable block.
inline std::string marked_program(const std::string& eval_block_body) {
  return "// demo target file\n"
         "// EVOLVE-BLOCK-START\n" +
         eval_block_body +
         "// EVOLVE-BLOCK-END\n"
         "// trailing context\n";
}

/// Body text carrying the standard marker set.
inline std::string marker_body(const std::string& build, const std::string& tests, double perf,
                               double static_score, double judge,
                               const std::string& extra = {}) {
  std::ostringstream body;
  body << "int walk(int n) { return n; }\n";
  if (!extra.empty()) body << "// " << extra << "\n";
  body << "// EVAL:build=" << build << "\n";
  body << "// EVAL:tests=" << tests << "\n";
  body << "// EVAL:perf=" << perf << "\n";
  body << "// EVAL:static=" << static_score << "\n";
  body << "// EVAL:judge=" << judge << "\n";
  return body.str();
}

/// Stage runner that records every executed stage name; scores come from a
/// fixed per-stage table.
class RecordingStageRunner : public StageRunner {
 public:
  explicit RecordingStageRunner(std::map<std::string, double> scores)
      : scores_(std::move(scores)) {}

  StageOutcome run(const StageSpec& spec, const std::filesystem::path&) override {
    executed.push_back(spec.name);
    StageOutcome outcome;
    outcome.exit_code = 0;
    const double score = scores_.count(spec.name) ? scores_.at(spec.name) : 1.0;
    outcome.stdout_text = nlohmann::json{{"score", score},
                                         {"passed", passed_override.count(spec.name)
                                                        ? passed_override.at(spec.name)
                                                        : true},
                                         {"diagnostics", ""}}
                              .dump();
    return outcome;
  }

  std::vector<std::string> executed;
  std::map<std::string, bool> passed_override;

 private:
  std::map<std::string, double> scores_;
};

}  // namespace evopt::test
