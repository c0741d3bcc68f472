#include "evopt/component_graph.hpp"

#include <algorithm>
#include <fstream>

#include "evopt/errors.hpp"

namespace evopt {

WeightedComponentGraph WeightedComponentGraph::build(
    const std::vector<ComponentId>& components,
    const std::vector<std::pair<ComponentId, ComponentId>>& call_edges) {
  WeightedComponentGraph graph;
  for (const auto& id : components) {
    if (id.empty()) {
      throw EngineError(ErrorKind::kGraph, "component name must be non-empty");
    }
    graph.nodes_.insert(id);
    graph.weights_.emplace(id, WeightVector{});
  }
  for (const auto& [from, to] : call_edges) {
    if (!graph.has_node(from)) {
      throw EngineError(ErrorKind::kGraph, "unknown component " + from);
    }
    if (!graph.has_node(to)) {
      throw EngineError(ErrorKind::kGraph, "unknown component " + to);
    }
    graph.edges_.emplace(from, to);
  }
  return graph;
}

std::vector<std::string> WeightedComponentGraph::enrich_with_profile(
    const std::vector<ProfileRecord>& profile) {
  std::vector<std::string> warnings;
  for (const auto& record : profile) {
    auto it = weights_.find(record.component);
    if (it == weights_.end()) {
      warnings.push_back("profile entry for unknown component " + record.component + " skipped");
      continue;
    }
    if (record.exec_time_ms < 0.0) {
      throw EngineError(ErrorKind::kInput,
                        "negative exec_time_ms for component " + record.component);
    }
    it->second.exec_time_ms += record.exec_time_ms;
    it->second.call_count += record.call_count;
    for (const auto& [key, value] : record.annotations) {
      annotations_[record.component][key] = value;
    }
  }
  return warnings;
}

const WeightVector& WeightedComponentGraph::weight(const ComponentId& id) const {
  auto it = weights_.find(id);
  if (it == weights_.end()) {
    throw EngineError(ErrorKind::kGraph, "unknown component " + id);
  }
  return it->second;
}

const std::map<std::string, std::string>& WeightedComponentGraph::annotations(
    const ComponentId& id) const {
  static const std::map<std::string, std::string> kEmpty;
  auto it = annotations_.find(id);
  return it == annotations_.end() ? kEmpty : it->second;
}

std::vector<ComponentId> select_targets(const WeightedComponentGraph& graph,
                                        const SelectionThresholds& thresholds) {
  std::vector<ComponentId> targets;
  for (const auto& node : graph.nodes()) {
    const auto& w = graph.weight(node);
    if (w.exec_time_ms >= thresholds.tau_time_ms || w.call_count >= thresholds.tau_freq) {
      targets.push_back(node);
    }
  }
  std::sort(targets.begin(), targets.end(), [&](const ComponentId& a, const ComponentId& b) {
    const auto& wa = graph.weight(a);
    const auto& wb = graph.weight(b);
    if (wa.exec_time_ms != wb.exec_time_ms) return wa.exec_time_ms > wb.exec_time_ms;
    if (wa.call_count != wb.call_count) return wa.call_count > wb.call_count;
    return a < b;
  });
  return targets;
}

ContextSubgraph prune_context(const WeightedComponentGraph& graph, const ComponentId& target) {
  if (!graph.has_node(target)) {
    throw EngineError(ErrorKind::kGraph, "unknown component " + target);
  }
  ContextSubgraph context;
  context.target = target;
  for (const auto& [from, to] : graph.edges()) {
    if (from == target && to != target) context.frozen.insert(to);
    if (to == target && from != target) context.frozen.insert(from);
  }
  auto in_scope = [&](const ComponentId& id) {
    return id == target || context.frozen.contains(id);
  };
  for (const auto& edge : graph.edges()) {
    if (in_scope(edge.first) && in_scope(edge.second)) {
      context.edges.insert(edge);
    }
  }
  context.weights.emplace(target, graph.weight(target));
  for (const auto& id : context.frozen) {
    context.weights.emplace(id, graph.weight(id));
  }
  return context;
}

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) {
    throw EngineError(ErrorKind::kInput, std::string(what) + " file not readable: " + path.string());
  }
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw EngineError(ErrorKind::kInput, std::string(what) + " file is not valid JSON: " + path.string());
  }
  return doc;
}

}  // namespace

WeightedComponentGraph load_call_graph(const std::filesystem::path& path) {
  const nlohmann::json doc = parse_json_file(path, "call-graph");
  if (!doc.is_object() || !doc.contains("components") || !doc.contains("edges")) {
    throw EngineError(ErrorKind::kInput,
                      "call-graph file must be {\"components\": [...], \"edges\": [...]}: " + path.string());
  }
  std::vector<ComponentId> components;
  for (const auto& entry : doc.at("components")) {
    if (!entry.is_string()) {
      throw EngineError(ErrorKind::kInput, "call-graph component names must be strings: " + entry.dump());
    }
    components.push_back(entry.get<std::string>());
  }
  std::vector<std::pair<ComponentId, ComponentId>> edges;
  for (const auto& entry : doc.at("edges")) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_string()) {
      throw EngineError(ErrorKind::kInput, "call-graph edge must be a [from, to] pair: " + entry.dump());
    }
    edges.emplace_back(entry[0].get<std::string>(), entry[1].get<std::string>());
  }
  return WeightedComponentGraph::build(components, edges);
}

std::vector<ProfileRecord> load_profile(const std::filesystem::path& path) {
  const nlohmann::json doc = parse_json_file(path, "profile");
  if (!doc.is_array()) {
    throw EngineError(ErrorKind::kInput, "profile file must be a JSON array: " + path.string());
  }
  std::vector<ProfileRecord> records;
  for (const auto& entry : doc) {
    if (!entry.is_object() || !entry.contains("component")) {
      throw EngineError(ErrorKind::kInput, "profile record missing \"component\": " + entry.dump());
    }
    ProfileRecord record;
    record.component = entry.at("component").get<std::string>();
    record.exec_time_ms = entry.value("exec_time_ms", 0.0);
    record.call_count = entry.value("call_count", std::uint64_t{0});
    if (entry.contains("annotations")) {
      for (const auto& [key, value] : entry.at("annotations").items()) {
        record.annotations[key] = value.get<std::string>();
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

nlohmann::json target_report(const WeightedComponentGraph& graph,
                             const SelectionThresholds& thresholds) {
  nlohmann::json report = nlohmann::json::array();
  for (const auto& target : select_targets(graph, thresholds)) {
    const auto context = prune_context(graph, target);
    const auto& w = graph.weight(target);
    nlohmann::json frozen = nlohmann::json::array();
    for (const auto& id : context.frozen) frozen.push_back(id);
    report.push_back({{"target", target},
                      {"exec_time_ms", w.exec_time_ms},
                      {"call_count", w.call_count},
                      {"frozen", frozen}});
  }
  return report;
}

}  // namespace evopt
