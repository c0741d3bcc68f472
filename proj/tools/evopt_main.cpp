// evopt - profile-guided evolutionary code optimization engine.
//
// Commands:
//   analyze   build the weighted component graph and emit the target report
//   optimize  run evolutionary or MCTS search over one marked source file
//   report    summarize run artifacts (single run or mode comparison)
#include <unistd.h>

#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "evopt/config.hpp"
#include "evopt/errors.hpp"
#include "evopt/evo_engine.hpp"
#include "evopt/marker_stage.hpp"
#include "evopt/mcts_engine.hpp"

namespace {

using namespace evopt;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBaseline = 3;
constexpr int kExitInput = 4;
constexpr int kExitProvider = 5;

int exit_code_for(const EngineError& error) {
  switch (error.kind()) {
    case ErrorKind::kConfig: return kExitConfig;
    case ErrorKind::kPrecondition: return kExitBaseline;
    case ErrorKind::kProvider: return kExitProvider;
    default: return kExitInput;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw EngineError(ErrorKind::kInput, "file not readable: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw EngineError(ErrorKind::kInput, "file not writable: " + path.string());
  }
  out << content;
}

std::filesystem::path executable_dir() {
  char buffer[4096];
  const ssize_t n = ::readlink("/proc/self/exe", buffer, sizeof(buffer) - 1);
  if (n <= 0) return std::filesystem::current_path();
  buffer[n] = '\0';
  return std::filesystem::path(buffer).parent_path();
}

/// "{exe_dir}" in stage commands expands to the directory holding this
/// binary, so bundled configs can call the sibling evopt-marker-stage tool.
std::vector<StageSpec> expand_stage_commands(std::vector<StageSpec> stages) {
  const std::string exe_dir = executable_dir().string();
  for (StageSpec& stage : stages) {
    std::size_t pos;
    while ((pos = stage.command.find("{exe_dir}")) != std::string::npos) {
      stage.command.replace(pos, std::string("{exe_dir}").size(), exe_dir);
    }
  }
  return stages;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

int cmd_analyze(const EngineConfig& config) {
  if (config.call_graph.empty() || config.profile.empty()) {
    throw EngineError(ErrorKind::kConfig, "analyze requires call_graph and profile paths");
  }
  WeightedComponentGraph graph = load_call_graph(config.call_graph);
  for (const std::string& warning : graph.enrich_with_profile(load_profile(config.profile))) {
    std::cerr << "warning: " << warning << "\n";
  }
  const nlohmann::json report = target_report(graph, config.selection);
  const std::filesystem::path out = std::filesystem::absolute(config.output_dir) / "targets.json";
  write_file(out, report.dump(2) + "\n");

  std::cout << "targets above thresholds (tau_time=" << config.selection.tau_time_ms
            << " ms, tau_freq=" << config.selection.tau_freq << "):\n";
  if (report.empty()) {
    std::cout << "  (none)\n";
  }
  for (const auto& entry : report) {
    std::cout << "  " << entry.at("target").get<std::string>()
              << "  time=" << entry.at("exec_time_ms").get<double>() << " ms"
              << "  calls=" << entry.at("call_count").get<std::uint64_t>()
              << "  frozen=" << entry.at("frozen").size() << "\n";
  }
  std::cout << "report written to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

OptimizationContext make_base_context(const EngineConfig& config, const EvolveBlock& block) {
  OptimizationContext context;
  context.target_name = config.target.empty() ? "writable region" : config.target;
  context.writable_code = block.body;
  const std::string around = block.prefix + block.suffix;
  if (around.find_first_not_of(" \t\r\n") != std::string::npos) {
    context.frozen_context = around;
  }
  if (!config.target.empty() && !config.profile.empty()) {
    for (const ProfileRecord& record : load_profile(config.profile)) {
      if (record.component != config.target) continue;
      context.profile.exec_time_ms += record.exec_time_ms;
      context.profile.call_count += record.call_count;
      for (const auto& [key, value] : record.annotations) {
        context.annotations.emplace_back(key, value);
      }
    }
  }
  return context;
}

RunSummary run_mcts_search(const EngineConfig& config, MutationProvider& provider,
                           const CascadeEvaluator& evaluator, const std::string& seed_source,
                           const OptimizationContext& context,
                           const std::filesystem::path& out_dir) {
  const EvaluationReport baseline = evaluator.evaluate(seed_source, "seed");
  if (!is_eligible(baseline)) {
    throw EngineError(ErrorKind::kPrecondition,
                      "baseline invalid: seed program failed evaluation (" +
                          baseline.failure_diagnostics() + ")");
  }

  Rng rng(config.evolution.seed);
  ProgramDatabase db(config.evolution.island, config.evolution.archive_capacity, true);
  MctsEngine engine(config.mcts, provider, evaluator, config.optimize_template(), rng);
  engine.set_base_context(context);
  engine.set_database(&db);
  const MctsResult result = engine.run(seed_source);

  write_file(out_dir / "tree.json", engine.tree().to_json().dump(2) + "\n");
  write_checkpoint(out_dir / "checkpoint.json", db, rng,
                   {{"mode", to_string(config.mode)},
                    {"seed", config.evolution.seed},
                    {"search", "mcts"},
                    {"iterations_run", result.iterations_run}});

  RunSummary summary;
  summary.iterations_run = result.iterations_run;
  for (const RolloutEvent& event : engine.rollout_log()) {
    const SearchTreeNode& node = engine.tree().node(event.node_id);
    IterationRecord record;
    record.iteration = event.iteration;
    record.valid = node.report && node.report->passed_all_gates;
    record.outcome =
        record.valid ? IterationRecord::Outcome::kInserted : IterationRecord::Outcome::kFiltered;
    if (node.report) record.score = node.report->combined_score;
    record.detail = node.change_summary;
    summary.per_iteration_log.push_back(std::move(record));
  }
  double valid_sum = 0.0;
  for (const Candidate* candidate : db.all_candidates()) {
    if (candidate->valid && !candidate->migrated_from) {
      ++summary.valid_count;
      valid_sum += candidate->fitness();
    }
  }
  summary.average_score =
      summary.valid_count > 0 ? valid_sum / static_cast<double>(summary.valid_count) : 0.0;
  double generated_sum = 0.0;
  std::uint64_t generated = 0;
  for (const IterationRecord& record : summary.per_iteration_log) {
    if (record.score) {
      generated_sum += *record.score;
      ++generated;
    }
  }
  summary.average_generated_score =
      generated > 0 ? generated_sum / static_cast<double>(generated) : 0.0;
  if (const Candidate* best = db.best()) {
    summary.best_candidate_id = best->id;
    summary.best_score = best->fitness();
    write_file(out_dir / "best_program.txt", best->source);
  }
  return summary;
}

void validate_templates(const EngineConfig& config) {
  OptimizationContext probe;
  probe.target_name = "probe";
  probe.writable_code = "probe\n";
  build_prompt(probe, config.optimize_template());
  build_repair_prompt("probe", "probe", config.repair_template());
}

int cmd_optimize(const EngineConfig& config, const std::filesystem::path& target_source,
                 bool resume) {
  if (config.stages.empty()) {
    throw EngineError(ErrorKind::kConfig, "optimize requires cascade stages in the config");
  }
  validate_templates(config);
  const std::string seed_source = read_file(target_source);
  const EvolveBlock block = parse_evolve_block(seed_source);

  // Stage commands run with the output directory as cwd; keep every emitted
  // path absolute so relative --out values behave.
  const std::filesystem::path out_dir = std::filesystem::absolute(config.output_dir);
  std::filesystem::create_directories(out_dir);
  auto runner = std::make_shared<SubprocessStageRunner>(out_dir);
  CascadeEvaluator evaluator(expand_stage_commands(config.stages), config.evolution.cascade,
                             runner, out_dir / "eval");
  std::unique_ptr<MutationProvider> provider = config.make_provider();
  const OptimizationContext context = make_base_context(config, block);

  RunSummary summary;
  if (config.search == SearchStrategy::kMcts) {
    if (resume) {
      throw EngineError(ErrorKind::kConfig, "resume is only supported for evolution runs");
    }
    summary = run_mcts_search(config, *provider, evaluator, seed_source, context, out_dir);
  } else {
    EvolutionEngine engine(config.evolution, config.mode, *provider, evaluator,
                           config.optimize_template(), config.repair_template());
    engine.set_base_context(context);
    engine.set_checkpoint_path(out_dir / "checkpoint.json");

    std::ofstream log(out_dir / "iterations.jsonl",
                      resume ? std::ios::app : std::ios::trunc);
    engine.set_iteration_sink([&log](const IterationRecord& record) {
      log << record.to_json().dump() << "\n";
      log.flush();
      std::cout << "[" << record.iteration << "] " << to_string(record.outcome);
      if (record.score) std::cout << " score=" << *record.score;
      if (record.candidate_id) std::cout << " id=" << *record.candidate_id;
      std::cout << "\n";
    });

    summary = resume ? engine.resume(out_dir / "checkpoint.json") : engine.run(seed_source);
    if (const Candidate* best = engine.database().best()) {
      std::filesystem::path best_path = out_dir / "best_program.txt";
      if (target_source.has_extension()) best_path.replace_extension(target_source.extension());
      write_file(best_path, best->source);
    }
  }

  nlohmann::json doc = summary.to_json();
  doc["mode"] = to_string(config.mode);
  doc["seed"] = config.evolution.seed;
  doc["search"] = config.search == SearchStrategy::kMcts ? "mcts" : "evolution";
  write_file(out_dir / "run_summary.json", doc.dump(2) + "\n");

  std::cout << "run complete: " << summary.iterations_run << " iterations, "
            << summary.valid_count << " valid candidates, best score " << summary.best_score
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const std::vector<std::filesystem::path>& run_dirs,
               const std::filesystem::path& csv_path, bool json_output) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& dir : run_dirs) {
    const std::filesystem::path summary_path = dir / "run_summary.json";
    if (!std::filesystem::exists(summary_path)) {
      throw EngineError(ErrorKind::kState, "run artifacts not found: " + summary_path.string());
    }
    nlohmann::json doc = nlohmann::json::parse(read_file(summary_path), nullptr, false);
    if (doc.is_discarded()) {
      throw EngineError(ErrorKind::kInput, "run summary is not valid JSON: " + summary_path.string());
    }
    const RunSummary summary = RunSummary::from_json(doc);
    rows.push_back({{"run", dir.string()},
                    {"mode", doc.value("mode", std::string("?"))},
                    {"seed", doc.value("seed", std::uint64_t{0})},
                    {"iterations", summary.iterations_run},
                    {"valid_count", summary.valid_count},
                    {"average_kpi", summary.average_generated_score},
                    {"best_kpi", summary.best_score}});
  }

  if (json_output) {
    std::cout << rows.dump(2) << "\n";
  } else {
    std::cout << "run  mode  seed  valid  avg_kpi  best_kpi\n";
    for (const auto& row : rows) {
      char line[512];
      std::snprintf(line, sizeof(line), "%s  %s  %llu  %llu/%llu  %.6f  %.6f\n",
                    row.at("run").get<std::string>().c_str(),
                    row.at("mode").get<std::string>().c_str(),
                    static_cast<unsigned long long>(row.at("seed").get<std::uint64_t>()),
                    static_cast<unsigned long long>(row.at("valid_count").get<std::uint64_t>()),
                    static_cast<unsigned long long>(row.at("iterations").get<std::uint64_t>()),
                    row.at("average_kpi").get<double>(), row.at("best_kpi").get<double>());
      std::cout << line;
    }
  }

  if (!csv_path.empty()) {
    std::string csv = "run,mode,seed,iterations,valid_count,average_kpi,best_kpi\n";
    for (const auto& row : rows) {
      char line[512];
      std::snprintf(line, sizeof(line), "%s,%s,%llu,%llu,%llu,%.9f,%.9f\n",
                    row.at("run").get<std::string>().c_str(),
                    row.at("mode").get<std::string>().c_str(),
                    static_cast<unsigned long long>(row.at("seed").get<std::uint64_t>()),
                    static_cast<unsigned long long>(row.at("iterations").get<std::uint64_t>()),
                    static_cast<unsigned long long>(row.at("valid_count").get<std::uint64_t>()),
                    row.at("average_kpi").get<double>(), row.at("best_kpi").get<double>());
      csv += line;
    }
    write_file(csv_path, csv);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evopt - profile-guided evolutionary code optimization engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::string target_source;
  std::string out_override;
  std::string mode_override;
  std::uint64_t seed_override = 0;
  std::uint64_t iterations_override = 0;
  bool resume = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "engine config file")->required();
    cmd->add_option("--out", out_override, "output directory override");
    cmd->add_option("--seed", seed_override, "random seed override");
    cmd->add_option("--mode", mode_override,
                    "engine mode override (original|original_valid|improved|final)");
    cmd->add_option("--iterations", iterations_override, "iteration budget override");
  };

  CLI::App* analyze = app.add_subcommand("analyze", "select optimization targets from profiles");
  add_common(analyze);

  CLI::App* optimize = app.add_subcommand("optimize", "evolve one marked source file");
  add_common(optimize);
  optimize->add_option("target_source", target_source, "source file with one EVOLVE-BLOCK")
      ->required();
  optimize->add_flag("--resume", resume, "continue from the checkpoint in the output directory");

  std::vector<std::string> run_dirs;
  std::string csv_path;
  bool json_output = false;
  CLI::App* report = app.add_subcommand("report", "summarize run artifacts");
  report->add_option("runs", run_dirs, "run output directories")->required();
  report->add_option("--csv", csv_path, "also write a CSV table");
  report->add_flag("--json", json_output, "machine-readable output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      return cmd_report(dirs, csv_path, json_output);
    }

    EngineConfig::Overrides overrides;
    for (const CLI::App* cmd : {analyze, optimize}) {
      if (!cmd->parsed()) continue;
      if (cmd->count("--seed") > 0) overrides.seed = seed_override;
      if (cmd->count("--iterations") > 0) overrides.iterations = iterations_override;
      if (cmd->count("--mode") > 0) overrides.mode = mode_override;
      if (cmd->count("--out") > 0) overrides.output_dir = out_override;
    }
    const EngineConfig config = EngineConfig::load(config_path, overrides);

    if (analyze->parsed()) {
      return cmd_analyze(config);
    }
    return cmd_optimize(config, target_source, resume);
  } catch (const EngineError& error) {
    std::cerr << "error (" << to_string(error.kind()) << "): " << error.what() << "\n";
    return exit_code_for(error);
  } catch (const std::exception& error) {
    std::cerr << "internal error: " << error.what() << "\n";
    return kExitInternal;
  }
}
