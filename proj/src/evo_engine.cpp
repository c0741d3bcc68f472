#include "evopt/evo_engine.hpp"

#include <algorithm>
#include <cstdio>

#include "evopt/errors.hpp"

namespace evopt {

EngineMode engine_mode_from_string(const std::string& name) {
  if (name == "original") return EngineMode::kOriginal;
  if (name == "original_valid") return EngineMode::kOriginalValid;
  if (name == "improved") return EngineMode::kImproved;
  if (name == "final") return EngineMode::kFinal;
  throw EngineError(ErrorKind::kConfig,
                    "unknown engine mode '" + name +
                        "' (expected original, original_valid, improved, or final)");
}

const char* to_string(EngineMode mode) noexcept {
  switch (mode) {
    case EngineMode::kOriginal: return "original";
    case EngineMode::kOriginalValid: return "original_valid";
    case EngineMode::kImproved: return "improved";
    case EngineMode::kFinal: return "final";
  }
  return "unknown";
}

ModeTraits traits_for(EngineMode mode) noexcept {
  switch (mode) {
    case EngineMode::kOriginal:
      return {false, false, false, false};
    case EngineMode::kOriginalValid:
      return {true, false, false, false};
    case EngineMode::kImproved:
      return {true, true, true, false};
    case EngineMode::kFinal:
      return {true, true, true, true};
  }
  return {};
}

void EvolutionConfig::validate() const {
  if (max_iterations < 1) {
    throw EngineError(ErrorKind::kConfig, "max_iterations must be >= 1");
  }
  if (checkpoint_interval < 1) {
    throw EngineError(ErrorKind::kConfig, "checkpoint_interval must be >= 1");
  }
  if (reflection_attempts < 0) {
    throw EngineError(ErrorKind::kConfig, "reflection_attempts must be >= 0");
  }
  island.validate();
  cascade.validate();
  repair_mcts.validate();
}

const char* to_string(IterationRecord::Outcome outcome) noexcept {
  switch (outcome) {
    case IterationRecord::Outcome::kInserted: return "INSERTED";
    case IterationRecord::Outcome::kRepaired: return "REPAIRED";
    case IterationRecord::Outcome::kFiltered: return "FILTERED";
    case IterationRecord::Outcome::kProviderError: return "PROVIDER_ERROR";
  }
  return "UNKNOWN";
}

namespace {

IterationRecord::Outcome outcome_from_string(const std::string& name) {
  if (name == "INSERTED") return IterationRecord::Outcome::kInserted;
  if (name == "REPAIRED") return IterationRecord::Outcome::kRepaired;
  if (name == "FILTERED") return IterationRecord::Outcome::kFiltered;
  if (name == "PROVIDER_ERROR") return IterationRecord::Outcome::kProviderError;
  throw EngineError(ErrorKind::kCheckpoint, "unknown iteration outcome " + name);
}

}  // namespace

nlohmann::json IterationRecord::to_json() const {
  nlohmann::json doc{{"iteration", iteration},
                     {"outcome", evopt::to_string(outcome)},
                     {"valid", valid},
                     {"detail", detail}};
  if (candidate_id) doc["candidate_id"] = *candidate_id;
  if (score) doc["score"] = *score;
  return doc;
}

IterationRecord IterationRecord::from_json(const nlohmann::json& doc) {
  IterationRecord record;
  record.iteration = doc.at("iteration").get<std::uint64_t>();
  record.outcome = outcome_from_string(doc.at("outcome").get<std::string>());
  record.valid = doc.at("valid").get<bool>();
  record.detail = doc.value("detail", std::string{});
  if (doc.contains("candidate_id")) record.candidate_id = doc.at("candidate_id").get<std::uint64_t>();
  if (doc.contains("score")) record.score = doc.at("score").get<double>();
  return record;
}

nlohmann::json RunSummary::to_json() const {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& record : per_iteration_log) log.push_back(record.to_json());
  return nlohmann::json{{"iterations_run", iterations_run},
                        {"valid_count", valid_count},
                        {"best_candidate_id", best_candidate_id},
                        {"best_score", best_score},
                        {"average_score", average_score},
                        {"average_generated_score", average_generated_score},
                        {"per_iteration_log", log}};
}

RunSummary RunSummary::from_json(const nlohmann::json& doc) {
  RunSummary summary;
  summary.iterations_run = doc.at("iterations_run").get<std::uint64_t>();
  summary.valid_count = doc.at("valid_count").get<std::uint64_t>();
  summary.best_candidate_id = doc.at("best_candidate_id").get<std::uint64_t>();
  summary.best_score = doc.at("best_score").get<double>();
  summary.average_score = doc.at("average_score").get<double>();
  summary.average_generated_score = doc.at("average_generated_score").get<double>();
  for (const auto& entry : doc.at("per_iteration_log")) {
    summary.per_iteration_log.push_back(IterationRecord::from_json(entry));
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct EvolutionEngine::LoopState {
  std::uint64_t next_iteration = 1;
  std::uint64_t generated_count = 0;  // round-robin sequence for inserted candidates
  std::vector<FeedbackEntry> failure_log;
  std::vector<IterationRecord> records;
};

EvolutionEngine::EvolutionEngine(EvolutionConfig config, EngineMode mode,
                                 MutationProvider& provider, const CascadeEvaluator& evaluator,
                                 PromptTemplate optimize_template, PromptTemplate repair_template)
    : config_(std::move(config)),
      mode_(mode),
      traits_(traits_for(mode)),
      provider_(provider),
      evaluator_(evaluator),
      optimize_template_(std::move(optimize_template)),
      baseline_template_(PromptTemplate::default_baseline()),
      repair_template_(std::move(repair_template)),
      rng_(config_.seed) {
  config_.validate();
}

const ProgramDatabase& EvolutionEngine::database() const {
  if (!db_) {
    throw EngineError(ErrorKind::kState, "no run in progress; call run() or resume() first");
  }
  return *db_;
}

RunSummary EvolutionEngine::run(const std::string& seed_source) {
  parse_evolve_block(seed_source);  // surfaces marker errors before any evaluation

  IslandConfig island = config_.island;
  if (!traits_.island_sampling) {
    island.p_elite = 0.0;
    island.p_island = 0.0;
  }
  db_ = std::make_unique<ProgramDatabase>(island, config_.archive_capacity,
                                          traits_.validity_filter);
  rng_.reseed(config_.seed);

  const EvaluationReport baseline = evaluator_.evaluate(seed_source, "seed");
  if (!is_eligible(baseline)) {
    throw EngineError(ErrorKind::kPrecondition,
                      "baseline invalid: seed program failed evaluation (" +
                          baseline.failure_diagnostics() + ")");
  }

  LoopState state;
  Candidate seed;
  seed.source = seed_source;
  seed.island = db_->assign_island(state.generated_count);
  seed.generation = 0;
  seed.report = baseline;
  seed.valid = true;
  seed.change_summary = "seed program";
  db_->insert(std::move(seed));
  state.generated_count += 1;

  return run_loop(state);
}

RunSummary EvolutionEngine::resume(const std::filesystem::path& checkpoint_file) {
  CheckpointContents contents = read_checkpoint(checkpoint_file);
  const nlohmann::json& engine = contents.engine_state;
  if (engine.value("mode", std::string{}) != to_string(mode_) ||
      engine.value("seed", std::uint64_t{0}) != config_.seed) {
    throw EngineError(ErrorKind::kCheckpoint,
                      "checkpoint was written by a run with a different mode or seed");
  }

  db_ = std::make_unique<ProgramDatabase>(std::move(contents.database));
  rng_.restore_state(contents.rng_state);
  provider_.restore_state(engine.value("provider", nlohmann::json::object()));

  LoopState state;
  state.next_iteration = engine.at("next_iteration").get<std::uint64_t>();
  state.generated_count = engine.at("generated_count").get<std::uint64_t>();
  for (const auto& entry : engine.at("failure_log")) {
    FeedbackEntry failure;
    failure.kind = FeedbackEntry::Kind::kFailure;
    failure.summary = entry.at("summary").get<std::string>();
    failure.iteration = entry.at("iteration").get<std::uint64_t>();
    state.failure_log.push_back(std::move(failure));
  }
  for (const auto& entry : engine.at("per_iteration_log")) {
    state.records.push_back(IterationRecord::from_json(entry));
  }
  return run_loop(state);
}

namespace {

std::string short_detail(const std::string& text, std::size_t limit = 160) {
  std::string out = text;
  for (char& c : out) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  if (out.size() > limit) {
    out.resize(limit);
    out += "...";
  }
  return out;
}

}  // namespace

RunSummary EvolutionEngine::run_loop(LoopState& state) {
  Refiner refiner(provider_, evaluator_, repair_template_, rng_);

  for (std::uint64_t iteration = state.next_iteration; iteration <= config_.max_iterations;
       ++iteration) {
    state.next_iteration = iteration + 1;
    IterationRecord record;
    record.iteration = iteration;
    bool provider_failed = false;

    // Parent selection: the improved modes use three-pool island sampling,
    // the baselines draw uniformly over the whole population.
    const int child_island = db_->assign_island(state.generated_count);
    const SampleResult parent = traits_.island_sampling
                                    ? db_->sample_parent(rng_, child_island)
                                    : db_->sample_uniform(rng_);

    // Prompt context: writable region from the parent, inspirations from the
    // archive, then the most recent failures.
    OptimizationContext context = base_context_;
    context.enriched = traits_.enriched_context;
    EvolveBlock parent_block = parse_evolve_block(parent.candidate->source);
    context.writable_code = parent_block.body;
    context.feedback.clear();
    for (const FeedbackEntry& failure : state.failure_log) {
      context.feedback.push_back(failure);
    }
    const auto archive = db_->archive_entries();
    for (std::size_t i = 0; i < std::min(config_.inspiration_count, archive.size()); ++i) {
      FeedbackEntry inspiration;
      inspiration.kind = FeedbackEntry::Kind::kImprovement;
      inspiration.summary = archive[i]->change_summary;
      inspiration.score = archive[i]->fitness();
      inspiration.iteration = archive[i]->generation;
      context.feedback.push_back(std::move(inspiration));
    }

    // Proposal and application.
    std::string child_source;
    std::string change_summary;
    std::string failure_diagnostics;
    bool have_child = false;
    try {
      const PromptTemplate& tpl =
          traits_.enriched_context ? optimize_template_ : baseline_template_;
      const std::string prompt = build_prompt(context, tpl, config_.feedback_cap);
      const MutationResponse response = provider_.propose(prompt, rng_);
      if (!config_.diff_mode && response.kind == MutationResponse::Kind::kDiff) {
        throw EngineError(ErrorKind::kMutation,
                          "diff response received while diff mode is disabled");
      }
      child_source = apply_mutation(parent_block, response);
      change_summary = response.rationale.empty()
                           ? (response.kind == MutationResponse::Kind::kDiff ? "applied diff"
                                                                             : "full rewrite")
                           : response.rationale;
      have_child = true;
    } catch (const EngineError& error) {
      if (error.kind() == ErrorKind::kProvider) {
        record.outcome = IterationRecord::Outcome::kProviderError;
        record.detail = short_detail(error.what());
        provider_failed = true;
      } else {
        failure_diagnostics = error.what();
      }
    }

    if (!provider_failed) {
      // Evaluation, with refinement as the final mode's safety net.
      std::optional<EvaluationReport> report;
      bool repaired = false;
      if (have_child) {
        char label[32];
        std::snprintf(label, sizeof(label), "iter%05llu",
                      static_cast<unsigned long long>(iteration));
        report = evaluator_.evaluate(child_source, label);
        if (!is_eligible(*report)) {
          failure_diagnostics = report->failure_diagnostics();
        }
      }
      if (traits_.refinement && (!report || !is_eligible(*report))) {
        RepairTask task;
        task.candidate_source = have_child ? child_source : parent.candidate->source;
        task.diagnostics = failure_diagnostics;
        task.attempts_remaining = config_.reflection_attempts;
        RepairOutcome outcome;
        if (config_.reflection_attempts > 0) {
          outcome = refiner.reflect_repair(task);
        }
        if (!outcome.repaired && evaluator_.has_unit_test_stage()) {
          task.strategy = RepairTask::Strategy::kMctsRepair;
          outcome = refiner.mcts_repair(task, config_.repair_mcts);
        }
        if (outcome.repaired) {
          child_source = outcome.source;
          change_summary = "repaired: " + (change_summary.empty() ? "candidate" : change_summary);
          char label[32];
          std::snprintf(label, sizeof(label), "iter%05llu_r",
                        static_cast<unsigned long long>(iteration));
          report = evaluator_.evaluate(child_source, label);
          have_child = true;
          repaired = is_eligible(*report);
          if (!repaired) failure_diagnostics = report->failure_diagnostics();
        }
      }

      const bool eligible = report && is_eligible(*report);
      if (report) {
        record.score = report->combined_score;
      }
      record.valid = eligible;

      if (have_child && (eligible || !traits_.validity_filter)) {
        Candidate child;
        child.source = child_source;
        child.parent_id = parent.candidate->id;
        child.island = child_island;
        child.generation = iteration;
        child.report = report;
        child.valid = eligible;
        child.change_summary = change_summary;
        const Candidate& stored = db_->insert(std::move(child));
        state.generated_count += 1;
        record.candidate_id = stored.id;
        record.outcome = repaired ? IterationRecord::Outcome::kRepaired
                                  : IterationRecord::Outcome::kInserted;
        record.detail = short_detail(change_summary);
      } else {
        record.outcome = IterationRecord::Outcome::kFiltered;
        record.detail = short_detail(failure_diagnostics.empty() ? "rejected by code filters"
                                                                 : failure_diagnostics);
      }
      if (!eligible && !failure_diagnostics.empty()) {
        FeedbackEntry failure;
        failure.kind = FeedbackEntry::Kind::kFailure;
        failure.summary = short_detail(failure_diagnostics);
        failure.iteration = iteration;
        state.failure_log.push_back(std::move(failure));
        if (state.failure_log.size() > config_.feedback_cap) {
          state.failure_log.erase(state.failure_log.begin(),
                                  state.failure_log.end() - config_.feedback_cap);
        }
      }
    }

    state.records.push_back(record);
    if (iteration_sink_) iteration_sink_(record);

    if (iteration % config_.island.migration_interval == 0) {
      db_->migrate();
    }
    if (!checkpoint_path_.empty() && iteration % config_.checkpoint_interval == 0) {
      write_engine_checkpoint(state);
    }
  }

  if (!checkpoint_path_.empty()) {
    write_engine_checkpoint(state);
  }
  return make_summary(state);
}

RunSummary EvolutionEngine::make_summary(const LoopState& state) const {
  RunSummary summary;
  summary.iterations_run = state.records.size();
  summary.per_iteration_log = state.records;

  double valid_sum = 0.0;
  std::uint64_t valid_count = 0;
  for (const Candidate* candidate : db_->all_candidates()) {
    if (candidate->valid && !candidate->migrated_from) {
      ++valid_count;
      valid_sum += candidate->fitness();
    }
  }
  summary.valid_count = valid_count;
  summary.average_score = valid_count > 0 ? valid_sum / static_cast<double>(valid_count) : 0.0;

  double generated_sum = 0.0;
  std::uint64_t generated_scored = 0;
  for (const IterationRecord& record : state.records) {
    if (record.score) {
      generated_sum += *record.score;
      ++generated_scored;
    }
  }
  summary.average_generated_score =
      generated_scored > 0 ? generated_sum / static_cast<double>(generated_scored) : 0.0;

  if (const Candidate* best = db_->best()) {
    summary.best_candidate_id = best->id;
    summary.best_score = best->fitness();
  }
  return summary;
}

void EvolutionEngine::write_engine_checkpoint(const LoopState& state) const {
  nlohmann::json failures = nlohmann::json::array();
  for (const FeedbackEntry& failure : state.failure_log) {
    failures.push_back({{"summary", failure.summary}, {"iteration", failure.iteration}});
  }
  nlohmann::json log = nlohmann::json::array();
  for (const IterationRecord& record : state.records) log.push_back(record.to_json());

  nlohmann::json engine{{"mode", to_string(mode_)},
                        {"seed", config_.seed},
                        {"next_iteration", state.next_iteration},
                        {"generated_count", state.generated_count},
                        {"failure_log", failures},
                        {"per_iteration_log", log},
                        {"provider", provider_.state()}};
  write_checkpoint(checkpoint_path_, *db_, rng_, engine);
}

}  // namespace evopt
