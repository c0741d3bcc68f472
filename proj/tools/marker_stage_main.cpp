// evopt-marker-stage - offline evaluation stage for bundled demo pipelines.
//
// Usage: evopt-marker-stage --kind build|unit_test|performance|static_analysis|llm_judge FILE
//
// Reads EVAL markers from the candidate file and prints a stage-protocol
// result JSON on stdout. See evopt/marker_stage.hpp for the marker set.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "evopt/marker_stage.hpp"

int main(int argc, char** argv) {
  std::string kind_name;
  std::string file;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--kind" && i + 1 < argc) {
      kind_name = argv[++i];
    } else if (!arg.empty() && arg[0] != '-') {
      file = arg;
    } else {
      std::cerr << "unknown argument: " << arg << "\n";
      return 2;
    }
  }
  if (kind_name.empty() || file.empty()) {
    std::cerr << "usage: evopt-marker-stage --kind "
                 "build|unit_test|performance|static_analysis|llm_judge FILE\n";
    return 2;
  }

  evopt::StageKind kind;
  if (kind_name == "build") {
    kind = evopt::StageKind::kBuild;
  } else if (kind_name == "unit_test") {
    kind = evopt::StageKind::kUnitTest;
  } else if (kind_name == "performance") {
    kind = evopt::StageKind::kPerformance;
  } else if (kind_name == "static_analysis") {
    kind = evopt::StageKind::kStaticAnalysis;
  } else if (kind_name == "llm_judge") {
    kind = evopt::StageKind::kLlmJudge;
  } else {
    std::cerr << "unknown stage kind: " << kind_name << "\n";
    return 2;
  }

  std::ifstream in(file, std::ios::binary);
  if (!in) {
    std::cerr << "candidate file not readable: " << file << "\n";
    return 1;
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::cout << evopt::marker_stage_result(kind, buffer.str()).dump() << "\n";
  return 0;
}
