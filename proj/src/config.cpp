#include "evopt/config.hpp"

#include <fstream>

#include "evopt/errors.hpp"

namespace evopt {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  const std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

void require_exists(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw EngineError(ErrorKind::kConfig,
                      std::string(what) + " does not exist: " + path.string());
  }
}

IslandConfig parse_island(const nlohmann::json& doc) {
  IslandConfig island;
  island.island_count = doc.value("island_count", island.island_count);
  island.migration_interval = doc.value("migration_interval", island.migration_interval);
  island.migration_fraction = doc.value("migration_fraction", island.migration_fraction);
  island.p_elite = doc.value("p_elite", island.p_elite);
  island.p_island = doc.value("p_island", island.p_island);
  return island;
}

MctsConfig parse_mcts(const nlohmann::json& doc, const MctsConfig& defaults) {
  MctsConfig mcts = defaults;
  mcts.exploration_c = doc.value("exploration_c", mcts.exploration_c);
  mcts.exploitation_probability =
      doc.value("exploitation_probability", mcts.exploitation_probability);
  mcts.expansion_k = doc.value("expansion_k", mcts.expansion_k);
  mcts.max_iterations = doc.value("max_iterations", mcts.max_iterations);
  return mcts;
}

}  // namespace

EngineConfig EngineConfig::load(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) {
    throw EngineError(ErrorKind::kConfig, "config file not readable: " + path.string());
  }
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw EngineError(ErrorKind::kConfig, "config file is not valid JSON: " + path.string());
  }
  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");

  EngineConfig config;
  if (doc.contains("call_graph")) {
    config.call_graph = resolve(base, doc.at("call_graph").get<std::string>());
    require_exists(config.call_graph, "call-graph file");
  }
  if (doc.contains("profile")) {
    config.profile = resolve(base, doc.at("profile").get<std::string>());
    require_exists(config.profile, "profile file");
  }
  if (doc.contains("selection")) {
    const auto& selection = doc.at("selection");
    config.selection.tau_time_ms = selection.value("tau_time_ms", 0.0);
    config.selection.tau_freq = selection.value("tau_freq", std::uint64_t{0});
    if (config.selection.tau_time_ms < 0.0) {
      throw EngineError(ErrorKind::kConfig, "selection.tau_time_ms must be >= 0");
    }
  }
  config.target = doc.value("target", std::string{});

  if (doc.contains("evolution")) {
    const auto& evolution = doc.at("evolution");
    config.evolution.max_iterations =
        evolution.value("max_iterations", config.evolution.max_iterations);
    config.evolution.diff_mode = evolution.value("diff_mode", config.evolution.diff_mode);
    config.evolution.checkpoint_interval =
        evolution.value("checkpoint_interval", config.evolution.checkpoint_interval);
    config.evolution.seed = evolution.value("seed", config.evolution.seed);
    config.evolution.archive_capacity =
        evolution.value("archive_capacity", config.evolution.archive_capacity);
    config.evolution.feedback_cap = evolution.value("feedback_cap", config.evolution.feedback_cap);
    config.evolution.inspiration_count =
        evolution.value("inspiration_count", config.evolution.inspiration_count);
    config.evolution.reflection_attempts =
        evolution.value("reflection_attempts", config.evolution.reflection_attempts);
    if (evolution.contains("island")) {
      config.evolution.island = parse_island(evolution.at("island"));
    }
    if (evolution.contains("repair_mcts")) {
      config.evolution.repair_mcts =
          parse_mcts(evolution.at("repair_mcts"), config.evolution.repair_mcts);
    }
  }
  if (doc.contains("mcts")) {
    config.mcts = parse_mcts(doc.at("mcts"), config.mcts);
  }

  if (doc.contains("cascade")) {
    const auto& cascade = doc.at("cascade");
    config.evolution.cascade.tau1 = cascade.value("tau1", config.evolution.cascade.tau1);
    config.evolution.cascade.tau2 = cascade.value("tau2", config.evolution.cascade.tau2);
    config.evolution.cascade.tau3 = cascade.value("tau3", config.evolution.cascade.tau3);
    config.evolution.cascade.alpha_judge =
        cascade.value("alpha_judge", config.evolution.cascade.alpha_judge);
    config.evolution.cascade.candidate_filename =
        cascade.value("candidate_filename", config.evolution.cascade.candidate_filename);
    if (cascade.contains("component_weights")) {
      for (const auto& [name, weight] : cascade.at("component_weights").items()) {
        config.evolution.cascade.component_weights[name] = weight.get<double>();
      }
    }
    for (const auto& entry : cascade.value("stages", nlohmann::json::array())) {
      StageSpec stage;
      stage.name = entry.at("name").get<std::string>();
      stage.kind = stage_kind_from_string(entry.at("kind").get<std::string>());
      stage.command = entry.at("command").get<std::string>();
      stage.timeout_seconds = entry.value("timeout_seconds", 120.0);
      if (entry.contains("gate_threshold") && !entry.at("gate_threshold").is_null()) {
        stage.gate_threshold = entry.at("gate_threshold").get<double>();
      }
      config.stages.push_back(std::move(stage));
    }
  }

  if (doc.contains("provider")) {
    const auto& provider = doc.at("provider");
    const std::string type = provider.value("type", "scripted");
    if (type == "scripted") {
      config.provider.type = ProviderConfig::Type::kScripted;
      config.provider.fixture = resolve(base, provider.at("fixture").get<std::string>());
      require_exists(config.provider.fixture, "scripted mutation fixture");
    } else if (type == "llm") {
      config.provider.type = ProviderConfig::Type::kLlm;
      config.provider.retries = provider.value("retries", config.provider.retries);
      config.provider.request_timeout_seconds =
          provider.value("request_timeout_seconds", config.provider.request_timeout_seconds);
      for (const auto& entry : provider.value("endpoints", nlohmann::json::array())) {
        LlmEndpoint endpoint;
        endpoint.base_url = entry.at("base_url").get<std::string>();
        endpoint.path = entry.value("path", endpoint.path);
        endpoint.model = entry.value("model", std::string{});
        endpoint.auth_env = entry.value("auth_env", std::string{});
        endpoint.temperature = entry.value("temperature", endpoint.temperature);
        endpoint.max_tokens = entry.value("max_tokens", endpoint.max_tokens);
        endpoint.weight = entry.value("weight", endpoint.weight);
        config.provider.endpoints.push_back(std::move(endpoint));
      }
      if (config.provider.endpoints.empty()) {
        throw EngineError(ErrorKind::kConfig, "llm provider requires at least one endpoint");
      }
    } else {
      throw EngineError(ErrorKind::kConfig, "provider type must be \"scripted\" or \"llm\"");
    }
  }

  if (doc.contains("prompt_template")) {
    config.prompt_template_path = resolve(base, doc.at("prompt_template").get<std::string>());
    require_exists(config.prompt_template_path, "prompt template");
  }
  if (doc.contains("repair_template")) {
    config.repair_template_path = resolve(base, doc.at("repair_template").get<std::string>());
    require_exists(config.repair_template_path, "repair template");
  }

  config.mode = engine_mode_from_string(doc.value("mode", std::string("final")));
  const std::string search = doc.value("search", std::string("evolution"));
  if (search == "evolution") {
    config.search = SearchStrategy::kEvolution;
  } else if (search == "mcts") {
    config.search = SearchStrategy::kMcts;
  } else {
    throw EngineError(ErrorKind::kConfig, "search must be \"evolution\" or \"mcts\"");
  }
  // Outputs land relative to the working directory, keeping bundled configs
  // read-only relocatable.
  config.output_dir = doc.value("output_dir", std::string("out"));

  if (overrides.seed) config.evolution.seed = *overrides.seed;
  if (overrides.iterations) {
    config.evolution.max_iterations = *overrides.iterations;
    config.mcts.max_iterations = *overrides.iterations;
  }
  if (overrides.mode) config.mode = engine_mode_from_string(*overrides.mode);
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;

  config.evolution.validate();
  config.mcts.validate();
  if (!config.stages.empty()) {
    validate_stage_order(config.stages);
  }
  return config;
}

std::unique_ptr<MutationProvider> EngineConfig::make_provider() const {
  if (provider.type == ProviderConfig::Type::kScripted) {
    return std::make_unique<ScriptedProvider>(ScriptedProvider::from_file(provider.fixture));
  }
  return std::make_unique<LlmProvider>(provider.endpoints, provider.retries,
                                       provider.request_timeout_seconds);
}

PromptTemplate EngineConfig::optimize_template() const {
  return prompt_template_path.empty() ? PromptTemplate::default_optimize()
                                      : PromptTemplate::from_file(prompt_template_path);
}

PromptTemplate EngineConfig::repair_template() const {
  return repair_template_path.empty() ? PromptTemplate::default_repair()
                                      : PromptTemplate::from_file(repair_template_path);
}

}  // namespace evopt
