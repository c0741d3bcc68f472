// evopt/mcts_engine.hpp - UCB-guided tree search over candidate programs.
//
// Each node holds one program variant. Selection either exploits the best
// mean reward seen so far or walks the tree by UCB; expansion asks the
// mutation provider for k children; rollouts run the evaluation cascade and
// the reward backpropagates to the root.
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evopt/eval_cascade.hpp"
#include "evopt/mutators.hpp"
#include "evopt/program_db.hpp"
#include "evopt/rng.hpp"

namespace evopt {

struct SearchTreeNode {
  std::uint64_t id = 0;
  std::string program;
  double cumulative_reward = 0.0;   // V(n)
  std::uint64_t visit_count = 0;    // N(n)
  std::optional<std::uint64_t> parent;
  std::vector<std::uint64_t> children;
  std::optional<EvaluationReport> report;  // attached by the first rollout
  std::optional<double> reward;            // reward of that rollout
  bool expansion_failed = false;
  bool db_inserted = false;
  std::string change_summary;
};

struct MctsConfig {
  double exploration_c = 1.0;
  double exploitation_probability = 0.5;
  int expansion_k = 3;
  std::uint64_t max_iterations = 20;

  void validate() const;
};

/// UCB score: mean reward plus the exploration bonus
/// c * sqrt(ln(parent visits) / visits). Unvisited nodes score +infinity so
/// they are taken before any visited sibling. Throws
/// EngineError(kPrecondition) on negative inputs or parent_visits < 1.
double ucb_score(const SearchTreeNode& node, std::uint64_t parent_visits, double c);

class SearchTree {
 public:
  explicit SearchTree(std::string root_program);

  SearchTreeNode& root() { return *nodes_.front(); }
  [[nodiscard]] const SearchTreeNode& root() const { return *nodes_.front(); }
  SearchTreeNode& node(std::uint64_t id);
  [[nodiscard]] const SearchTreeNode& node(std::uint64_t id) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  SearchTreeNode& add_child(SearchTreeNode& parent, std::string program,
                            std::string change_summary);

  [[nodiscard]] nlohmann::json to_json() const;

 private:
  std::vector<std::unique_ptr<SearchTreeNode>> nodes_;
};

struct RolloutEvent {
  std::uint64_t iteration = 0;
  std::uint64_t node_id = 0;
  double reward = 0.0;
};

struct MctsResult {
  std::uint64_t iterations_run = 0;
  std::uint64_t rollouts = 0;
  std::uint64_t best_node_id = 0;
  double best_reward = 0.0;
  bool target_reached = false;  // repair mode: a node hit reward 1.0
};

class MctsEngine {
 public:
  /// Reward of one evaluated program; the default is the combined score for
  /// gate-passing candidates and 0 otherwise. Repair mode swaps in the
  /// unit-test pass rate.
  using RewardFn = std::function<double(const EvaluationReport&)>;

  MctsEngine(MctsConfig config, MutationProvider& provider, const CascadeEvaluator& evaluator,
             PromptTemplate prompt_template, Rng& rng);

  /// Builds prompts through this context (profile numbers, constraints);
  /// the writable region always comes from the node being expanded.
  void set_base_context(OptimizationContext context) { base_context_ = std::move(context); }
  /// Eligible rollout programs are forwarded here when set.
  void set_database(ProgramDatabase* db) { database_ = db; }
  void set_reward_fn(RewardFn fn) { reward_fn_ = std::move(fn); }
  /// Reward at which the search stops early (repair mode uses 1.0).
  void set_stop_reward(double reward) { stop_reward_ = reward; }
  void set_sandbox_prefix(std::string prefix) { sandbox_prefix_ = std::move(prefix); }

  /// Runs max_iterations of select / expand-or-rollout / backpropagate.
  MctsResult run(const std::string& seed_program);

  // Search primitives, exposed for direct exercise.
  SearchTreeNode& select_node();
  std::vector<SearchTreeNode*> expand(SearchTreeNode& node);
  double rollout(SearchTreeNode& node);
  void backpropagate(SearchTreeNode& node, double reward);

  [[nodiscard]] SearchTree& tree();
  [[nodiscard]] const std::vector<RolloutEvent>& rollout_log() const { return rollout_log_; }
  [[nodiscard]] std::uint64_t provider_calls() const { return provider_calls_; }

 private:
  double evaluate_node(SearchTreeNode& node);

  MctsConfig config_;
  MutationProvider& provider_;
  const CascadeEvaluator& evaluator_;
  PromptTemplate prompt_template_;
  Rng& rng_;
  OptimizationContext base_context_;
  ProgramDatabase* database_ = nullptr;
  RewardFn reward_fn_;
  double stop_reward_ = std::numeric_limits<double>::infinity();
  std::string sandbox_prefix_ = "mcts";
  std::unique_ptr<SearchTree> tree_;
  std::vector<RolloutEvent> rollout_log_;
  std::uint64_t provider_calls_ = 0;
  std::uint64_t iteration_ = 0;
};

}  // namespace evopt
