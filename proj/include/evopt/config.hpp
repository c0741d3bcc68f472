// evopt/config.hpp - Engine configuration file loading and validation.
//
// One JSON document configures an entire run: input paths, selection
// thresholds, evolution and MCTS parameters, the cascade stage list, the
// mutation provider, and the ablation mode. Relative paths resolve against
// the config file's directory.
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evopt/component_graph.hpp"
#include "evopt/eval_cascade.hpp"
#include "evopt/evo_engine.hpp"
#include "evopt/mcts_engine.hpp"
#include "evopt/mutators.hpp"

namespace evopt {

struct ProviderConfig {
  enum class Type { kScripted, kLlm };
  Type type = Type::kScripted;
  std::filesystem::path fixture;  // scripted mutation fixture file
  std::vector<LlmEndpoint> endpoints;
  int retries = 2;
  double request_timeout_seconds = 120.0;
};

enum class SearchStrategy { kEvolution, kMcts };

struct EngineConfig {
  std::filesystem::path call_graph;
  std::filesystem::path profile;
  SelectionThresholds selection;
  std::string target;  // component the optimize command is aimed at
  EvolutionConfig evolution;
  MctsConfig mcts;
  std::vector<StageSpec> stages;
  ProviderConfig provider;
  std::filesystem::path prompt_template_path;  // empty selects the built-in
  std::filesystem::path repair_template_path;
  EngineMode mode = EngineMode::kFinal;
  SearchStrategy search = SearchStrategy::kEvolution;
  std::filesystem::path output_dir = "out";

  /// Command-line overrides applied after parsing.
  struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> iterations;
    std::optional<std::string> mode;
    std::optional<std::filesystem::path> output_dir;
  };

  /// Parses and validates. Referenced files must exist; stage ordering is
  /// checked here, so a misordered cascade never reaches the evaluator.
  static EngineConfig load(const std::filesystem::path& path, const Overrides& overrides = {});

  [[nodiscard]] std::unique_ptr<MutationProvider> make_provider() const;
  [[nodiscard]] PromptTemplate optimize_template() const;
  [[nodiscard]] PromptTemplate repair_template() const;
};

}  // namespace evopt
