// evopt/evo_engine.hpp - Main evolutionary optimization loop.
//
// Each iteration samples a parent, builds a context-aware prompt, asks the
// mutation provider for an edit, evaluates the child through the cascade,
// and inserts survivors into the island database. Migration and checkpoints
// fire on their configured intervals. Four engine modes reproduce the
// classic ablation ladder: no filter, filter only, enriched context plus
// island sampling, and full refinement.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evopt/eval_cascade.hpp"
#include "evopt/mcts_engine.hpp"
#include "evopt/mutators.hpp"
#include "evopt/program_db.hpp"
#include "evopt/refiner.hpp"
#include "evopt/rng.hpp"

namespace evopt {

enum class EngineMode { kOriginal, kOriginalValid, kImproved, kFinal };

EngineMode engine_mode_from_string(const std::string& name);
const char* to_string(EngineMode mode) noexcept;

/// What each mode enables.
struct ModeTraits {
  bool validity_filter = true;   // off only in kOriginal
  bool enriched_context = true;  // profile numbers, frozen context, feedback
  bool island_sampling = true;   // three-pool parent sampling
  bool refinement = false;       // repair invalid candidates before discarding
};

ModeTraits traits_for(EngineMode mode) noexcept;

struct EvolutionConfig {
  std::uint64_t max_iterations = 20;
  bool diff_mode = true;  // false refuses diff responses and expects rewrites
  std::uint64_t checkpoint_interval = 10;
  IslandConfig island;
  CascadeConfig cascade;
  std::uint64_t seed = 0;
  std::size_t archive_capacity = 20;
  std::size_t feedback_cap = 5;
  std::size_t inspiration_count = 3;
  int reflection_attempts = 3;
  MctsConfig repair_mcts{1.0, 0.5, 3, 8};

  void validate() const;
};

struct IterationRecord {
  enum class Outcome { kInserted, kRepaired, kFiltered, kProviderError };

  std::uint64_t iteration = 0;
  Outcome outcome = Outcome::kFiltered;
  std::optional<std::uint64_t> candidate_id;
  std::optional<double> score;  // combined score of the evaluated child
  bool valid = false;
  std::string detail;

  nlohmann::json to_json() const;
  static IterationRecord from_json(const nlohmann::json& doc);
};

const char* to_string(IterationRecord::Outcome outcome) noexcept;

struct RunSummary {
  std::uint64_t iterations_run = 0;
  /// Seed plus generated candidates that passed every gate. Migration
  /// copies never count.
  std::uint64_t valid_count = 0;
  std::uint64_t best_candidate_id = 0;
  double best_score = 0.0;
  /// Mean combined score over the valid candidates (seed included).
  double average_score = 0.0;
  /// Mean combined score over every evaluated child, valid or not; the
  /// population-quality metric reported by the ablation tables.
  double average_generated_score = 0.0;
  std::vector<IterationRecord> per_iteration_log;

  nlohmann::json to_json() const;
  static RunSummary from_json(const nlohmann::json& doc);
};

class EvolutionEngine {
 public:
  EvolutionEngine(EvolutionConfig config, EngineMode mode, MutationProvider& provider,
                  const CascadeEvaluator& evaluator, PromptTemplate optimize_template,
                  PromptTemplate repair_template);

  /// Target name, profile numbers, frozen context, and constraints used for
  /// every prompt. The writable region is always the parent's block body.
  void set_base_context(OptimizationContext context) { base_context_ = std::move(context); }
  /// Enables checkpoint writes on the configured interval (and at the end).
  void set_checkpoint_path(std::filesystem::path path) { checkpoint_path_ = std::move(path); }
  /// Receives each iteration record as it happens (structured logging).
  void set_iteration_sink(std::function<void(const IterationRecord&)> sink) {
    iteration_sink_ = std::move(sink);
  }

  /// Runs the full loop. Throws EngineError(kPrecondition) when the seed
  /// program fails its baseline evaluation.
  RunSummary run(const std::string& seed_source);

  /// Continues an interrupted run; the final state matches an uninterrupted
  /// run with the same seed and provider script.
  RunSummary resume(const std::filesystem::path& checkpoint_file);

  [[nodiscard]] const ProgramDatabase& database() const;
  [[nodiscard]] EngineMode mode() const { return mode_; }

 private:
  struct LoopState;
  RunSummary run_loop(LoopState& state);
  RunSummary make_summary(const LoopState& state) const;
  void write_engine_checkpoint(const LoopState& state) const;

  EvolutionConfig config_;
  EngineMode mode_;
  ModeTraits traits_;
  MutationProvider& provider_;
  const CascadeEvaluator& evaluator_;
  PromptTemplate optimize_template_;
  PromptTemplate baseline_template_;  // used when enriched context is off
  PromptTemplate repair_template_;
  OptimizationContext base_context_;
  std::filesystem::path checkpoint_path_;
  std::function<void(const IterationRecord&)> iteration_sink_;
  std::unique_ptr<ProgramDatabase> db_;
  Rng rng_;
};

}  // namespace evopt
