// evopt/program_db.hpp - Candidate storage across islands with elite archive.
//
// Candidates live on ring-connected islands; an elite archive tracks the best
// programs for parent sampling and prompt inspirations. All mutation goes
// through a single owner; checkpoints capture the full state plus the random
// source so a restored run replays bit-identically.
#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evopt/eval_cascade.hpp"
#include "evopt/rng.hpp"

namespace evopt {

struct Candidate {
  std::uint64_t id = 0;  // assigned by the database, monotonically increasing
  std::string source;
  std::optional<std::uint64_t> parent_id;
  int island = 0;
  std::uint64_t generation = 0;
  std::optional<EvaluationReport> report;
  bool valid = false;
  std::string change_summary;
  std::optional<std::uint64_t> migrated_from;  // provenance of migration copies

  [[nodiscard]] double fitness() const { return report ? report->combined_score : 0.0; }

  nlohmann::json to_json() const;
  static Candidate from_json(const nlohmann::json& doc);
};

struct IslandConfig {
  int island_count = 5;
  std::uint64_t migration_interval = 50;  // generations between migrations
  double migration_fraction = 0.10;       // top share copied to each neighbor
  double p_elite = 0.7;
  double p_island = 0.2;

  void validate() const;
};

enum class SampleMode { kElite, kIsland, kGlobal };

struct SampleResult {
  const Candidate* candidate = nullptr;
  SampleMode chosen = SampleMode::kGlobal;  // mode drawn from the probabilities
  SampleMode used = SampleMode::kGlobal;    // pool actually drawn from after fallback
};

struct MigrationCopy {
  std::uint64_t source_id = 0;
  std::uint64_t new_id = 0;
  int from_island = 0;
  int to_island = 0;
};

using MigrationRecord = std::vector<MigrationCopy>;

class ProgramDatabase {
 public:
  /// `require_valid` enforces the insertion filter; the baseline engine mode
  /// disables it to reproduce unfiltered population behavior.
  explicit ProgramDatabase(IslandConfig config, std::size_t archive_capacity = 20,
                           bool require_valid = true);

  /// Stores a candidate on its island, assigning the next id. The archive
  /// picks it up when it beats the current minimum or the archive has room.
  /// Throws EngineError(kPrecondition) for an invalid candidate while the
  /// validity filter is on.
  const Candidate& insert(Candidate candidate);

  /// Round-robin island assignment for the n-th generated candidate.
  [[nodiscard]] int assign_island(std::uint64_t sequence_number) const;

  /// Three-pool parent sampling: archive with p_elite, the current island
  /// with p_island, the whole population otherwise. An empty pool falls
  /// back to the next one in that fixed order. Throws EngineError(kState)
  /// when the database is empty.
  SampleResult sample_parent(Rng& rng, int current_island) const;

  /// Uniform draw over all candidates (the unimproved sampling strategy).
  SampleResult sample_uniform(Rng& rng) const;

  /// Copies each island's top ceil(migration_fraction * population) to both
  /// ring neighbors. Copies keep lineage and receive fresh ids; for a
  /// single-island ring this is a no-op.
  MigrationRecord migrate();

  [[nodiscard]] std::size_t size() const { return candidates_.size(); }
  [[nodiscard]] bool empty() const { return candidates_.empty(); }
  [[nodiscard]] const Candidate& get(std::uint64_t id) const;
  [[nodiscard]] const Candidate* best() const;  // highest fitness, ties lowest id
  [[nodiscard]] std::vector<const Candidate*> archive_entries() const;
  [[nodiscard]] std::vector<const Candidate*> island_population(int island) const;
  [[nodiscard]] std::vector<const Candidate*> all_candidates() const;
  [[nodiscard]] const IslandConfig& config() const { return config_; }
  [[nodiscard]] std::size_t archive_capacity() const { return archive_capacity_; }

  nlohmann::json to_json() const;
  static ProgramDatabase from_json(const nlohmann::json& doc);

 private:
  void maybe_archive(std::uint64_t id);

  IslandConfig config_;
  std::size_t archive_capacity_;
  bool require_valid_;
  std::deque<Candidate> candidates_;        // ordered by id; stable references
  std::vector<std::uint64_t> archive_;      // ids, fitness desc / generation asc / id asc
  std::uint64_t next_id_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;

/// Writes a self-describing checkpoint: database, random-source state, and an
/// arbitrary engine section.
void write_checkpoint(const std::filesystem::path& path, const ProgramDatabase& db,
                      const Rng& rng, const nlohmann::json& engine_state);

struct CheckpointContents {
  ProgramDatabase database;
  nlohmann::json rng_state;
  nlohmann::json engine_state;
};

/// Throws EngineError(kCheckpoint) naming the expected format version when
/// the file is corrupt, truncated, or from another version.
CheckpointContents read_checkpoint(const std::filesystem::path& path);

}  // namespace evopt
