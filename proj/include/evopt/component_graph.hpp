// evopt/component_graph.hpp - Weighted component graph and target selection.
//
// The static call graph of a codebase becomes a weighted component graph once
// runtime profile records are folded in. Targets are components whose
// cumulative time or call frequency clears a threshold; each target is paired
// with its 1-hop frozen context for prompt assembly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace evopt {

/// Qualified component name, e.g. "pkg.Class.method". Unique within a graph.
using ComponentId = std::string;

struct WeightVector {
  double exec_time_ms = 0.0;
  std::uint64_t call_count = 0;

  bool operator==(const WeightVector&) const = default;
};

struct SelectionThresholds {
  double tau_time_ms = 0.0;
  std::uint64_t tau_freq = 0;
};

/// One record of a runtime profile: how long a component ran and how often it
/// was called within the profiling window. Repeated records for the same
/// component accumulate.
struct ProfileRecord {
  ComponentId component;
  double exec_time_ms = 0.0;
  std::uint64_t call_count = 0;
  std::map<std::string, std::string> annotations;
};

class WeightedComponentGraph {
 public:
  WeightedComponentGraph() = default;

  /// Builds the unweighted component graph. Every listed component gets a
  /// zero weight; edge (u, v) means u calls or references v.
  /// Throws EngineError(kGraph) naming the first edge endpoint that is not a
  /// listed component.
  static WeightedComponentGraph build(
      const std::vector<ComponentId>& components,
      const std::vector<std::pair<ComponentId, ComponentId>>& call_edges);

  /// Folds profile records into node weights. Entries for the same component
  /// sum; entries for components absent from the graph are skipped and
  /// reported back as warnings (profiles routinely contain library frames
  /// outside the analyzed codebase).
  std::vector<std::string> enrich_with_profile(const std::vector<ProfileRecord>& profile);

  [[nodiscard]] bool has_node(const ComponentId& id) const { return weights_.contains(id); }
  [[nodiscard]] const std::set<ComponentId>& nodes() const { return nodes_; }
  [[nodiscard]] const std::set<std::pair<ComponentId, ComponentId>>& edges() const { return edges_; }
  [[nodiscard]] const WeightVector& weight(const ComponentId& id) const;
  [[nodiscard]] const std::map<std::string, std::string>& annotations(const ComponentId& id) const;
  [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
  [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }

 private:
  std::set<ComponentId> nodes_;
  std::set<std::pair<ComponentId, ComponentId>> edges_;
  std::map<ComponentId, WeightVector> weights_;
  std::map<ComponentId, std::map<std::string, std::string>> annotations_;
};

/// Pruned prompt context for one optimization target: the writable target
/// plus its read-only 1-hop neighborhood.
struct ContextSubgraph {
  ComponentId target;
  std::set<ComponentId> frozen;
  std::set<std::pair<ComponentId, ComponentId>> edges;
  std::map<ComponentId, WeightVector> weights;
};

/// Components with exec_time >= tau_time or call_count >= tau_freq, ordered
/// by exec_time descending, then call_count descending, then name ascending.
std::vector<ComponentId> select_targets(const WeightedComponentGraph& graph,
                                        const SelectionThresholds& thresholds);

/// Frozen set = in- and out-neighbors of the target; edges are the induced
/// edges among {target} union frozen. Throws EngineError(kGraph) for an
/// unknown target.
ContextSubgraph prune_context(const WeightedComponentGraph& graph, const ComponentId& target);

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Call-graph file: {"components": [string], "edges": [[string, string]]}.
WeightedComponentGraph load_call_graph(const std::filesystem::path& path);

/// Profile file: JSON array of
/// {"component", "exec_time_ms", "call_count", "annotations"?} objects.
std::vector<ProfileRecord> load_profile(const std::filesystem::path& path);

/// Target report entry emitted by the analyze command.
nlohmann::json target_report(const WeightedComponentGraph& graph,
                             const SelectionThresholds& thresholds);

}  // namespace evopt
