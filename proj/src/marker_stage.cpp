#include "evopt/marker_stage.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace evopt {

namespace {

std::string find_marker(const std::string& text, const std::string& key) {
  const std::string needle = "EVAL:" + key + "=";
  const std::size_t pos = text.find(needle);
  if (pos == std::string::npos) return {};
  const std::size_t begin = pos + needle.size();
  std::size_t end = begin;
  while (end < text.size() && text[end] != '\n' && text[end] != '\r' && text[end] != ' ' &&
         text[end] != '\t') {
    ++end;
  }
  return text.substr(begin, end - begin);
}

double parse_score(const std::string& value, double fallback) {
  if (value.empty()) return fallback;
  try {
    return std::stod(value);
  } catch (...) {
    return fallback;
  }
}

}  // namespace

nlohmann::json marker_stage_result(StageKind kind, const std::string& candidate_text) {
  switch (kind) {
    case StageKind::kBuild: {
      const std::string value = find_marker(candidate_text, "build");
      const bool ok = value.empty() || value == "ok";
      return {{"score", ok ? 1.0 : 0.0},
              {"passed", ok},
              {"diagnostics", ok ? "" : "compile error: unresolved symbol in writable region"}};
    }
    case StageKind::kUnitTest: {
      const std::string value = find_marker(candidate_text, "tests");
      std::uint64_t passed = 1;
      std::uint64_t total = 1;
      if (!value.empty()) {
        unsigned long long m = 0;
        unsigned long long n = 0;
        if (std::sscanf(value.c_str(), "%llu/%llu", &m, &n) == 2 && n > 0) {
          passed = m;
          total = n;
        }
      }
      const bool all = passed == total;
      std::string diagnostics;
      if (!all) {
        diagnostics = std::to_string(passed) + " of " + std::to_string(total) +
                      " unit tests passed; failing:";
        for (std::uint64_t t = passed + 1; t <= total; ++t) {
          diagnostics += " test_case_" + std::to_string(t);
        }
      }
      return {{"score", static_cast<double>(passed) / static_cast<double>(total)},
              {"passed", all},
              {"diagnostics", diagnostics},
              {"tests_passed", passed},
              {"tests_total", total}};
    }
    case StageKind::kPerformance: {
      // Raw timing markers take priority and go through the speedup
      // normalization; otherwise the score is stated directly.
      const std::string candidate_ms = find_marker(candidate_text, "perf_ms");
      const std::string baseline_ms = find_marker(candidate_text, "perf_baseline_ms");
      double score;
      if (!candidate_ms.empty() && !baseline_ms.empty()) {
        score = normalize_speedup_score(parse_score(baseline_ms, 0.0),
                                        parse_score(candidate_ms, 1.0));
      } else {
        score = parse_score(find_marker(candidate_text, "perf"), 0.5);
      }
      char note[64];
      std::snprintf(note, sizeof(note), "benchmark score %.3f", score);
      return {{"score", score}, {"passed", true}, {"diagnostics", note}};
    }
    case StageKind::kStaticAnalysis: {
      const double score = parse_score(find_marker(candidate_text, "static"), 1.0);
      return {{"score", score}, {"passed", true}, {"diagnostics", ""}};
    }
    case StageKind::kLlmJudge: {
      const double score = parse_score(find_marker(candidate_text, "judge"), 0.8);
      return {{"score", score}, {"passed", true}, {"diagnostics", ""}};
    }
  }
  return {{"score", 0.0}, {"passed", false}, {"diagnostics", "unknown stage kind"}};
}

StageOutcome MarkerStageRunner::run(const StageSpec& spec,
                                    const std::filesystem::path& candidate_path) {
  StageOutcome outcome;
  std::ifstream in(candidate_path, std::ios::binary);
  if (!in) {
    outcome.exit_code = 1;
    outcome.stderr_text = "candidate file not readable: " + candidate_path.string();
    return outcome;
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  outcome.exit_code = 0;
  outcome.stdout_text = marker_stage_result(spec.kind, buffer.str()).dump();
  return outcome;
}

}  // namespace evopt
