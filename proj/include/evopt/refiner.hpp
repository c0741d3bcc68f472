// evopt/refiner.hpp - Diagnostics-driven repair of invalid candidates.
//
// Two strategies: a bounded reflection loop (repair prompt -> fix -> re-run
// correctness stages) and an MCTS search over fixes whose reward is the
// unit-test pass rate.
#pragma once

#include <optional>
#include <string>

#include "evopt/eval_cascade.hpp"
#include "evopt/mcts_engine.hpp"
#include "evopt/mutators.hpp"
#include "evopt/rng.hpp"

namespace evopt {

struct RepairTask {
  enum class Strategy { kReflection, kMctsRepair };
  std::string candidate_source;  // full file, including the evolve block
  std::string diagnostics;       // compiler errors, failing test names
  int attempts_remaining = 3;
  Strategy strategy = Strategy::kReflection;
};

struct RepairOutcome {
  bool repaired = false;
  std::string source;                      // repaired program when successful
  std::optional<EvaluationReport> report;  // correctness report of the result
  std::string final_diagnostics;           // last failure seen
  int provider_calls = 0;
  double best_pass_rate = 0.0;  // MCTS repair: best unit-test pass rate seen
};

class Refiner {
 public:
  /// `evaluator` is the full cascade; repair internally re-runs only its
  /// correctness stages.
  Refiner(MutationProvider& provider, const CascadeEvaluator& evaluator,
          PromptTemplate repair_template, Rng& rng);

  /// Reflection loop: propose a fix from source + diagnostics, re-validate,
  /// repeat while attempts remain. Provider failures consume an attempt.
  RepairOutcome reflect_repair(const RepairTask& task);

  /// MCTS over fixes rooted at the broken candidate; reward is the fraction
  /// of unit tests passing. Returns on the first node with pass rate 1.0 or
  /// reports the best pass rate after max_iterations. Throws
  /// EngineError(kConfig) when no unit-test stage is configured.
  RepairOutcome mcts_repair(const RepairTask& task, const MctsConfig& config);

 private:
  MutationProvider& provider_;
  const CascadeEvaluator& evaluator_;
  PromptTemplate repair_template_;
  Rng& rng_;
  std::uint64_t repair_sequence_ = 0;  // keeps repair sandbox labels distinct
};

}  // namespace evopt
