#include "evopt/mcts_engine.hpp"

#include <algorithm>
#include <cmath>

#include "evopt/errors.hpp"

namespace evopt {

void MctsConfig::validate() const {
  if (exploration_c < 0.0) {
    throw EngineError(ErrorKind::kConfig, "exploration_c must be >= 0");
  }
  if (exploitation_probability < 0.0 || exploitation_probability > 1.0) {
    throw EngineError(ErrorKind::kConfig, "exploitation_probability must lie in [0, 1]");
  }
  if (expansion_k < 1) {
    throw EngineError(ErrorKind::kConfig, "expansion_k must be >= 1");
  }
}

double ucb_score(const SearchTreeNode& node, std::uint64_t parent_visits, double c) {
  if (parent_visits < 1) {
    throw EngineError(ErrorKind::kPrecondition, "ucb_score requires parent_visits >= 1");
  }
  if (c < 0.0 || node.cumulative_reward < 0.0) {
    throw EngineError(ErrorKind::kPrecondition, "ucb_score requires non-negative inputs");
  }
  if (node.visit_count == 0) {
    return std::numeric_limits<double>::infinity();
  }
  const double n = static_cast<double>(node.visit_count);
  const double mean = node.cumulative_reward / n;
  return mean + c * std::sqrt(std::log(static_cast<double>(parent_visits)) / n);
}

SearchTree::SearchTree(std::string root_program) {
  auto root = std::make_unique<SearchTreeNode>();
  root->id = 0;
  root->program = std::move(root_program);
  root->change_summary = "seed program";
  nodes_.push_back(std::move(root));
}

SearchTreeNode& SearchTree::node(std::uint64_t id) {
  if (id >= nodes_.size()) {
    throw EngineError(ErrorKind::kState, "unknown tree node " + std::to_string(id));
  }
  return *nodes_[id];
}

const SearchTreeNode& SearchTree::node(std::uint64_t id) const {
  if (id >= nodes_.size()) {
    throw EngineError(ErrorKind::kState, "unknown tree node " + std::to_string(id));
  }
  return *nodes_[id];
}

SearchTreeNode& SearchTree::add_child(SearchTreeNode& parent, std::string program,
                                      std::string change_summary) {
  auto child = std::make_unique<SearchTreeNode>();
  child->id = nodes_.size();
  child->program = std::move(program);
  child->parent = parent.id;
  child->change_summary = std::move(change_summary);
  parent.children.push_back(child->id);
  nodes_.push_back(std::move(child));
  return *nodes_.back();
}

nlohmann::json SearchTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& node : nodes_) {
    nlohmann::json entry{{"id", node->id},
                         {"cumulative_reward", node->cumulative_reward},
                         {"visit_count", node->visit_count},
                         {"children", node->children},
                         {"expansion_failed", node->expansion_failed},
                         {"change_summary", node->change_summary},
                         {"eligible", node->report && node->report->passed_all_gates}};
    if (node->parent) entry["parent"] = *node->parent;
    if (node->reward) entry["reward"] = *node->reward;
    nodes.push_back(std::move(entry));
  }
  return nlohmann::json{{"nodes", nodes}};
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

MctsEngine::MctsEngine(MctsConfig config, MutationProvider& provider,
                       const CascadeEvaluator& evaluator, PromptTemplate prompt_template,
                       Rng& rng)
    : config_(config),
      provider_(provider),
      evaluator_(evaluator),
      prompt_template_(std::move(prompt_template)),
      rng_(rng) {
  config_.validate();
  reward_fn_ = [](const EvaluationReport& report) {
    return report.passed_all_gates ? report.combined_score : 0.0;
  };
}

SearchTree& MctsEngine::tree() {
  if (!tree_) {
    throw EngineError(ErrorKind::kState, "search tree not initialized; call run() first");
  }
  return *tree_;
}

SearchTreeNode& MctsEngine::select_node() {
  SearchTree& tree = *tree_;
  const double draw = rng_.next_unit();
  if (draw < config_.exploitation_probability) {
    // Exploitation: the visited node with the highest mean reward, ties
    // broken toward the lowest id.
    SearchTreeNode* best = nullptr;
    double best_mean = -1.0;
    for (std::uint64_t id = 0; id < tree.size(); ++id) {
      SearchTreeNode& node = tree.node(id);
      if (node.visit_count == 0) continue;
      const double mean = node.cumulative_reward / static_cast<double>(node.visit_count);
      if (best == nullptr || mean > best_mean) {
        best = &node;
        best_mean = mean;
      }
    }
    if (best != nullptr) {
      return *best;
    }
    return tree.root();  // nothing visited yet
  }

  // Exploration: descend by per-level UCB argmax until a leaf or an
  // unvisited node.
  SearchTreeNode* current = &tree.root();
  while (current->visit_count > 0 && !current->children.empty()) {
    SearchTreeNode* next = nullptr;
    double next_score = -std::numeric_limits<double>::infinity();
    for (std::uint64_t child_id : current->children) {
      SearchTreeNode& child = tree.node(child_id);
      if (child.expansion_failed) continue;
      const double score = ucb_score(child, current->visit_count, config_.exploration_c);
      if (score > next_score) {
        next = &child;
        next_score = score;
      }
    }
    if (next == nullptr) break;  // all children are dead ends
    current = next;
    if (current->visit_count == 0) break;
  }
  return *current;
}

std::vector<SearchTreeNode*> MctsEngine::expand(SearchTreeNode& node) {
  if (node.visit_count < 1) {
    throw EngineError(ErrorKind::kPrecondition, "expand requires a visited node; roll out first");
  }
  const EvolveBlock block = parse_evolve_block(node.program);
  OptimizationContext context = base_context_;
  context.writable_code = block.body;

  std::vector<SearchTreeNode*> children;
  for (int i = 0; i < config_.expansion_k; ++i) {
    ++provider_calls_;
    try {
      const std::string prompt = build_prompt(context, prompt_template_);
      const MutationResponse response = provider_.propose(prompt, rng_);
      std::string program = apply_mutation(block, response);
      const std::string summary = response.rationale.empty()
                                      ? (response.kind == MutationResponse::Kind::kDiff
                                             ? "diff proposal"
                                             : "full rewrite proposal")
                                      : response.rationale;
      children.push_back(&tree_->add_child(node, std::move(program), summary));
    } catch (const EngineError&) {
      // Unparseable or inapplicable proposal: no child for this slot.
    }
  }
  if (children.empty()) {
    node.expansion_failed = true;
  }
  return children;
}

double MctsEngine::evaluate_node(SearchTreeNode& node) {
  char label[64];
  std::snprintf(label, sizeof(label), "%s_node%04llu", sandbox_prefix_.c_str(),
                static_cast<unsigned long long>(node.id));
  const EvaluationReport report = evaluator_.evaluate(node.program, label);
  const double reward = reward_fn_(report);
  node.report = report;
  node.reward = reward;
  return reward;
}

double MctsEngine::rollout(SearchTreeNode& node) {
  if (node.program.empty()) {
    throw EngineError(ErrorKind::kPrecondition, "rollout requires a non-empty program");
  }
  const double reward = node.report ? *node.reward : evaluate_node(node);
  rollout_log_.push_back({iteration_, node.id, reward});
  if (database_ != nullptr && node.report && node.report->passed_all_gates && !node.db_inserted) {
    Candidate candidate;
    candidate.source = node.program;
    candidate.island = database_->assign_island(database_->size());
    candidate.generation = iteration_;
    candidate.report = node.report;
    candidate.valid = true;
    candidate.change_summary = node.change_summary;
    database_->insert(std::move(candidate));
    node.db_inserted = true;
  }
  return reward;
}

void MctsEngine::backpropagate(SearchTreeNode& node, double reward) {
  SearchTreeNode* current = &node;
  while (true) {
    current->cumulative_reward += reward;
    current->visit_count += 1;
    if (!current->parent) break;
    current = &tree_->node(*current->parent);
  }
}

MctsResult MctsEngine::run(const std::string& seed_program) {
  tree_ = std::make_unique<SearchTree>(seed_program);
  rollout_log_.clear();
  iteration_ = 0;

  MctsResult result;
  for (std::uint64_t i = 1; i <= config_.max_iterations; ++i) {
    iteration_ = i;
    SearchTreeNode& selected = select_node();
    if (selected.visit_count < 1) {
      const double reward = rollout(selected);
      backpropagate(selected, reward);
      ++result.rollouts;
    } else {
      const auto children = expand(selected);
      if (children.empty()) {
        result.iterations_run = i;
        continue;  // expansion failed; selection will move elsewhere
      }
      SearchTreeNode& child = *children[rng_.next_below(children.size())];
      const double reward = rollout(child);
      backpropagate(child, reward);
      ++result.rollouts;
    }
    result.iterations_run = i;

    const RolloutEvent& last = rollout_log_.back();
    if (last.reward >= stop_reward_) {
      result.target_reached = true;
      break;
    }
  }

  // Best node by rolled-out reward, ties to the earliest id.
  double best = -1.0;
  for (const RolloutEvent& event : rollout_log_) {
    if (event.reward > best) {
      best = event.reward;
      result.best_node_id = event.node_id;
      result.best_reward = event.reward;
    }
  }
  return result;
}

}  // namespace evopt
