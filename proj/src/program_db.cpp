#include "evopt/program_db.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "evopt/errors.hpp"

namespace evopt {

nlohmann::json Candidate::to_json() const {
  nlohmann::json doc{{"id", id},
                     {"source", source},
                     {"island", island},
                     {"generation", generation},
                     {"valid", valid},
                     {"change_summary", change_summary}};
  if (parent_id) doc["parent_id"] = *parent_id;
  if (report) doc["report"] = report->to_json();
  if (migrated_from) doc["migrated_from"] = *migrated_from;
  return doc;
}

Candidate Candidate::from_json(const nlohmann::json& doc) {
  Candidate candidate;
  candidate.id = doc.at("id").get<std::uint64_t>();
  candidate.source = doc.at("source").get<std::string>();
  candidate.island = doc.at("island").get<int>();
  candidate.generation = doc.at("generation").get<std::uint64_t>();
  candidate.valid = doc.at("valid").get<bool>();
  candidate.change_summary = doc.value("change_summary", std::string{});
  if (doc.contains("parent_id")) candidate.parent_id = doc.at("parent_id").get<std::uint64_t>();
  if (doc.contains("report")) candidate.report = EvaluationReport::from_json(doc.at("report"));
  if (doc.contains("migrated_from")) candidate.migrated_from = doc.at("migrated_from").get<std::uint64_t>();
  return candidate;
}

void IslandConfig::validate() const {
  if (island_count < 1) {
    throw EngineError(ErrorKind::kConfig, "island_count must be >= 1");
  }
  if (migration_interval < 1) {
    throw EngineError(ErrorKind::kConfig, "migration_interval must be >= 1");
  }
  if (!(migration_fraction > 0.0 && migration_fraction <= 1.0)) {
    throw EngineError(ErrorKind::kConfig, "migration_fraction must lie in (0, 1]");
  }
  if (p_elite < 0.0 || p_island < 0.0 || p_elite + p_island > 1.0) {
    throw EngineError(ErrorKind::kConfig, "sampling probabilities require p_elite + p_island <= 1");
  }
}

ProgramDatabase::ProgramDatabase(IslandConfig config, std::size_t archive_capacity,
                                 bool require_valid)
    : config_(config), archive_capacity_(archive_capacity), require_valid_(require_valid) {
  config_.validate();
  if (archive_capacity_ == 0) {
    throw EngineError(ErrorKind::kConfig, "archive capacity must be >= 1");
  }
}

const Candidate& ProgramDatabase::insert(Candidate candidate) {
  if (require_valid_ && !candidate.valid) {
    throw EngineError(ErrorKind::kPrecondition,
                      "refusing to insert invalid candidate (validity filter is on)");
  }
  if (candidate.valid && (!candidate.report || !candidate.report->passed_all_gates)) {
    throw EngineError(ErrorKind::kPrecondition,
                      "candidate marked valid without a fully passing report");
  }
  if (candidate.island < 0 || candidate.island >= config_.island_count) {
    throw EngineError(ErrorKind::kPrecondition,
                      "candidate island " + std::to_string(candidate.island) + " out of range");
  }
  candidate.id = next_id_++;
  candidates_.push_back(std::move(candidate));
  const Candidate& stored = candidates_.back();
  if (!stored.migrated_from) {
    maybe_archive(stored.id);
  }
  return stored;
}

void ProgramDatabase::maybe_archive(std::uint64_t id) {
  const Candidate& candidate = get(id);
  auto better = [&](std::uint64_t lhs, std::uint64_t rhs) {
    const Candidate& a = get(lhs);
    const Candidate& b = get(rhs);
    if (a.fitness() != b.fitness()) return a.fitness() > b.fitness();
    if (a.generation != b.generation) return a.generation < b.generation;
    return a.id < b.id;
  };
  if (archive_.size() >= archive_capacity_) {
    const std::uint64_t weakest = archive_.back();
    if (!(candidate.fitness() > get(weakest).fitness())) {
      return;
    }
    archive_.pop_back();
  }
  const auto at = std::upper_bound(archive_.begin(), archive_.end(), id, better);
  archive_.insert(at, id);
}

int ProgramDatabase::assign_island(std::uint64_t sequence_number) const {
  return static_cast<int>(sequence_number % static_cast<std::uint64_t>(config_.island_count));
}

SampleResult ProgramDatabase::sample_parent(Rng& rng, int current_island) const {
  if (candidates_.empty()) {
    throw EngineError(ErrorKind::kState, "cannot sample a parent from an empty database");
  }
  const double draw = rng.next_unit();
  SampleMode chosen;
  if (draw < config_.p_elite) {
    chosen = SampleMode::kElite;
  } else if (draw < config_.p_elite + config_.p_island) {
    chosen = SampleMode::kIsland;
  } else {
    chosen = SampleMode::kGlobal;
  }

  // Fall back through the fixed pool order elite -> island -> global; the
  // global pool is non-empty whenever the database is.
  constexpr SampleMode kOrder[] = {SampleMode::kElite, SampleMode::kIsland, SampleMode::kGlobal};
  std::size_t start = 0;
  while (kOrder[start] != chosen) ++start;

  for (std::size_t i = start; i < 3; ++i) {
    const SampleMode mode = kOrder[i];
    if (mode == SampleMode::kElite && !archive_.empty()) {
      const std::uint64_t id = archive_[rng.next_below(archive_.size())];
      return {&get(id), chosen, mode};
    }
    if (mode == SampleMode::kIsland) {
      const auto pool = island_population(current_island);
      if (!pool.empty()) {
        return {pool[rng.next_below(pool.size())], chosen, mode};
      }
    }
    if (mode == SampleMode::kGlobal) {
      return {&candidates_[rng.next_below(candidates_.size())], chosen, mode};
    }
  }
  throw EngineError(ErrorKind::kState, "cannot sample a parent from an empty database");
}

SampleResult ProgramDatabase::sample_uniform(Rng& rng) const {
  if (candidates_.empty()) {
    throw EngineError(ErrorKind::kState, "cannot sample a parent from an empty database");
  }
  return {&candidates_[rng.next_below(candidates_.size())], SampleMode::kGlobal,
          SampleMode::kGlobal};
}

MigrationRecord ProgramDatabase::migrate() {
  MigrationRecord record;
  const int k = config_.island_count;
  if (k == 1) {
    return record;  // degenerate ring: both neighbors are the island itself
  }

  // Snapshot the migrants first so copies inserted for island i never count
  // toward island i+1's population in the same migration.
  struct PendingCopy {
    std::uint64_t source_id;
    int to_island;
  };
  std::vector<PendingCopy> pending;
  for (int island = 0; island < k; ++island) {
    auto population = island_population(island);
    if (population.empty()) continue;
    std::sort(population.begin(), population.end(), [](const Candidate* a, const Candidate* b) {
      if (a->fitness() != b->fitness()) return a->fitness() > b->fitness();
      if (a->generation != b->generation) return a->generation < b->generation;
      return a->id < b->id;
    });
    const auto migrant_count = static_cast<std::size_t>(
        std::ceil(config_.migration_fraction * static_cast<double>(population.size())));
    std::set<int> neighbors{(island + k - 1) % k, (island + 1) % k};
    neighbors.erase(island);
    for (std::size_t i = 0; i < migrant_count && i < population.size(); ++i) {
      for (int neighbor : neighbors) {
        pending.push_back({population[i]->id, neighbor});
      }
    }
  }

  for (const PendingCopy& copy : pending) {
    Candidate migrant = get(copy.source_id);
    const int from_island = migrant.island;
    migrant.island = copy.to_island;
    migrant.migrated_from = copy.source_id;
    const Candidate& stored = insert(std::move(migrant));
    record.push_back({copy.source_id, stored.id, from_island, copy.to_island});
  }
  return record;
}

const Candidate& ProgramDatabase::get(std::uint64_t id) const {
  // Ids are dense and assigned in insertion order.
  if (id >= candidates_.size() || candidates_[id].id != id) {
    throw EngineError(ErrorKind::kState, "unknown candidate id " + std::to_string(id));
  }
  return candidates_[id];
}

const Candidate* ProgramDatabase::best() const {
  const Candidate* best = nullptr;
  for (const Candidate& candidate : candidates_) {
    if (!best || candidate.fitness() > best->fitness()) {
      best = &candidate;
    }
  }
  return best;
}

std::vector<const Candidate*> ProgramDatabase::archive_entries() const {
  std::vector<const Candidate*> entries;
  entries.reserve(archive_.size());
  for (std::uint64_t id : archive_) entries.push_back(&get(id));
  return entries;
}

std::vector<const Candidate*> ProgramDatabase::island_population(int island) const {
  std::vector<const Candidate*> population;
  for (const Candidate& candidate : candidates_) {
    if (candidate.island == island) population.push_back(&candidate);
  }
  return population;
}

std::vector<const Candidate*> ProgramDatabase::all_candidates() const {
  std::vector<const Candidate*> all;
  all.reserve(candidates_.size());
  for (const Candidate& candidate : candidates_) all.push_back(&candidate);
  return all;
}

nlohmann::json ProgramDatabase::to_json() const {
  nlohmann::json candidates = nlohmann::json::array();
  for (const Candidate& candidate : candidates_) candidates.push_back(candidate.to_json());
  return nlohmann::json{{"island", {{"island_count", config_.island_count},
                                    {"migration_interval", config_.migration_interval},
                                    {"migration_fraction", config_.migration_fraction},
                                    {"p_elite", config_.p_elite},
                                    {"p_island", config_.p_island}}},
                        {"archive_capacity", archive_capacity_},
                        {"require_valid", require_valid_},
                        {"candidates", candidates},
                        {"archive", archive_},
                        {"next_id", next_id_}};
}

ProgramDatabase ProgramDatabase::from_json(const nlohmann::json& doc) {
  IslandConfig config;
  const auto& island = doc.at("island");
  config.island_count = island.at("island_count").get<int>();
  config.migration_interval = island.at("migration_interval").get<std::uint64_t>();
  config.migration_fraction = island.at("migration_fraction").get<double>();
  config.p_elite = island.at("p_elite").get<double>();
  config.p_island = island.at("p_island").get<double>();

  ProgramDatabase db(config, doc.at("archive_capacity").get<std::size_t>(),
                     doc.at("require_valid").get<bool>());
  for (const auto& entry : doc.at("candidates")) {
    db.candidates_.push_back(Candidate::from_json(entry));
  }
  db.archive_ = doc.at("archive").get<std::vector<std::uint64_t>>();
  db.next_id_ = doc.at("next_id").get<std::uint64_t>();
  return db;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void write_checkpoint(const std::filesystem::path& path, const ProgramDatabase& db,
                      const Rng& rng, const nlohmann::json& engine_state) {
  nlohmann::json doc{{"format", "evopt-checkpoint"},
                     {"format_version", kCheckpointFormatVersion},
                     {"database", db.to_json()},
                     {"rng", rng.state_json()},
                     {"engine", engine_state}};
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw EngineError(ErrorKind::kInput, "checkpoint path not writable: " + path.string());
  }
  out << doc.dump(2) << "\n";
}

CheckpointContents read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw EngineError(ErrorKind::kCheckpoint, "checkpoint not readable: " + path.string());
  }
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  const std::string expects =
      " (expected format evopt-checkpoint version " + std::to_string(kCheckpointFormatVersion) + ")";
  if (doc.is_discarded() || !doc.is_object()) {
    throw EngineError(ErrorKind::kCheckpoint, "checkpoint corrupt: " + path.string() + expects);
  }
  if (doc.value("format", std::string{}) != "evopt-checkpoint" ||
      !doc.contains("format_version") || !doc.contains("database") || !doc.contains("rng")) {
    throw EngineError(ErrorKind::kCheckpoint, "checkpoint corrupt: " + path.string() + expects);
  }
  if (doc.at("format_version").get<int>() != kCheckpointFormatVersion) {
    throw EngineError(ErrorKind::kCheckpoint,
                      "checkpoint format version " + doc.at("format_version").dump() +
                          " not supported" + expects);
  }
  CheckpointContents contents{ProgramDatabase::from_json(doc.at("database")), doc.at("rng"),
                              doc.value("engine", nlohmann::json::object())};
  return contents;
}

}  // namespace evopt
