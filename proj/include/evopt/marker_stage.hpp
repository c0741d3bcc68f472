// evopt/marker_stage.hpp - Offline evaluation stages driven by EVAL markers.
//
// The bundled demo pipelines score candidates without any toolchain: the
// candidate text carries directives and each stage reads the one it owns.
//
//   EVAL:build=ok|fail      build stage (default ok)
//   EVAL:tests=M/N          unit-test stage (default 1/1); passes iff M == N
//   EVAL:perf=0.85          performance score in [0,1] (default 0.5)
//   EVAL:static=0.9         static-analysis score (default 1.0)
//   EVAL:judge=0.8          review score (default 0.8)
//
// The same logic backs the evopt-marker-stage command-line tool (for real
// subprocess cascades) and the in-process runner (for fast test suites).
#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "evopt/eval_cascade.hpp"

namespace evopt {

/// Stage-protocol result JSON for `kind` applied to `candidate_text`.
nlohmann::json marker_stage_result(StageKind kind, const std::string& candidate_text);

/// Runs marker stages in-process, bypassing subprocess spawn entirely. The
/// observable behavior matches `evopt-marker-stage` invoked per stage.
class MarkerStageRunner : public StageRunner {
 public:
  StageOutcome run(const StageSpec& spec, const std::filesystem::path& candidate_path) override;
};

}  // namespace evopt
