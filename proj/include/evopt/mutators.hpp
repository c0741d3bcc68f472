// evopt/mutators.hpp - Candidate modification machinery.
//
// Covers the full proposal path: EVOLVE-BLOCK parsing, prompt assembly from
// the optimization context, mutation providers (chat-endpoint LLMs, weighted
// ensembles, scripted fixtures), and patch application. Only bytes inside
// the marked block are ever rewritten.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evopt/component_graph.hpp"
#include "evopt/rng.hpp"

namespace evopt {

inline constexpr const char* kEvolveBlockStart = "EVOLVE-BLOCK-START";
inline constexpr const char* kEvolveBlockEnd = "EVOLVE-BLOCK-END";

/// A source file split at its marker pair. Reassembly is byte-identical:
/// prefix + start marker line + body + end marker line + suffix.
struct EvolveBlock {
  std::string prefix;
  std::string start_marker_line;
  std::string body;
  std::string end_marker_line;
  std::string suffix;

  [[nodiscard]] std::string reassemble() const {
    return prefix + start_marker_line + body + end_marker_line + suffix;
  }
  [[nodiscard]] std::string with_body(const std::string& new_body) const {
    return prefix + start_marker_line + new_body + end_marker_line + suffix;
  }
};

/// Splits a file at its single EVOLVE-BLOCK marker pair.
/// Errors: no markers -> "no evolve block"; more than one pair -> "multiple
/// evolve blocks"; START without END or END before START -> "malformed
/// evolve block markers".
EvolveBlock parse_evolve_block(const std::string& source);

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

struct FeedbackEntry {
  enum class Kind { kImprovement, kFailure };
  Kind kind = Kind::kFailure;
  std::string summary;
  std::optional<double> score;  // improvements carry the achieved score
  std::uint64_t iteration = 0;
};

/// Everything the prompt builder needs for one proposal.
struct OptimizationContext {
  ComponentId target_name;
  std::string writable_code;   // non-empty; the evolve-block body
  std::string frozen_context;  // read-only surroundings
  WeightVector profile;
  std::vector<std::pair<std::string, std::string>> annotations;
  std::vector<FeedbackEntry> feedback;
  std::string constraints;
  std::string goal;  // objective statement; defaulted when empty
  /// false selects the minimal prompt shape: goal, writable code, and
  /// constraints only, with no profile, context, or feedback sections.
  bool enriched = true;
};

/// Template with {{slot}} placeholders. The required slots are goal,
/// target_name, cumulative_time, call_count, profile_annotations,
/// writable_code, read_only_context, evaluation_feedback, constraints.
class PromptTemplate {
 public:
  static PromptTemplate from_string(std::string text);
  static PromptTemplate from_file(const std::filesystem::path& path);

  /// The shipped default, mirroring the engine's documented prompt layout.
  static PromptTemplate default_optimize();
  /// Minimal shape used when enriched context is disabled: goal, writable
  /// code, and constraints only.
  static PromptTemplate default_baseline();
  /// Repair prompts require the slots source and diagnostics.
  static PromptTemplate default_repair();

  [[nodiscard]] std::string render(const std::map<std::string, std::string>& slots) const;
  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  explicit PromptTemplate(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

/// Fills every slot of the optimize template. Feedback renders at most
/// `feedback_cap` of the most recent entries, scored entries first in
/// descending score order, then unscored failures most recent first.
std::string build_prompt(const OptimizationContext& context, const PromptTemplate& tpl,
                         std::size_t feedback_cap = 5);

std::string build_repair_prompt(const std::string& source, const std::string& diagnostics,
                                const PromptTemplate& tpl);

// ---------------------------------------------------------------------------
// Mutation responses
// ---------------------------------------------------------------------------

struct DiffHunk {
  std::string search;
  std::string replace;
};

struct MutationResponse {
  enum class Kind { kDiff, kFullRewrite };
  Kind kind = Kind::kFullRewrite;
  std::string payload;    // raw diff text or the full replacement body
  std::string rationale;  // short model- or script-supplied description
};

/// Parses SEARCH/REPLACE blocks:
///   <<<<<<< SEARCH
///   ...
///   =======
///   ...
///   >>>>>>> REPLACE
/// Throws EngineError(kMutation) when no complete hunk is present.
std::vector<DiffHunk> parse_diff_hunks(const std::string& payload);

/// Classifies raw provider output: SEARCH/REPLACE hunks -> kDiff; otherwise
/// the first fenced code block -> kFullRewrite. Throws EngineError(kMutation)
/// carrying the raw text when neither is found.
MutationResponse parse_provider_output(const std::string& raw);

/// Applies a response to the block body. Diff hunks must each match exactly
/// once ("ambiguous or missing hunk" otherwise); rewrites replace the body
/// wholesale. Prefix and suffix bytes are untouched.
std::string apply_mutation(const EvolveBlock& block, const MutationResponse& response);

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

class MutationProvider {
 public:
  virtual ~MutationProvider() = default;

  /// Produces the next proposal for `prompt`. Throws EngineError(kProvider)
  /// after retries are exhausted and EngineError(kMutation) for output that
  /// cannot be classified.
  virtual MutationResponse propose(const std::string& prompt, Rng& rng) = 0;

  /// Provider-internal counters for checkpointing (call indices, cursors).
  [[nodiscard]] virtual nlohmann::json state() const { return nlohmann::json::object(); }
  virtual void restore_state(const nlohmann::json&) {}
};

/// Deterministic offline provider driven by a fixture file:
///   {"edits": [{"trigger": [..], "kind": "full"|"diff",
///               "payload": "...", "rationale": "..."}]}
/// Call k scans entries cyclically starting at k mod N and returns the first
/// whose trigger substrings all occur in the prompt. An empty trigger list
/// matches any prompt.
class ScriptedProvider : public MutationProvider {
 public:
  struct Edit {
    std::vector<std::string> trigger;
    MutationResponse response;
  };

  explicit ScriptedProvider(std::vector<Edit> edits);
  static ScriptedProvider from_file(const std::filesystem::path& path);
  static ScriptedProvider from_json(const nlohmann::json& doc);

  MutationResponse propose(const std::string& prompt, Rng& rng) override;
  [[nodiscard]] nlohmann::json state() const override;
  void restore_state(const nlohmann::json& state) override;

  [[nodiscard]] std::uint64_t call_index() const { return call_index_; }

 private:
  std::vector<Edit> edits_;
  std::uint64_t call_index_ = 0;
};

struct LlmEndpoint {
  std::string base_url;  // e.g. http://localhost:8080
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_env;  // environment variable holding the bearer token
  double temperature = 0.7;
  int max_tokens = 4096;
  double weight = 1.0;  // ensemble share
};

/// Chat-completion client. Multiple endpoints form an ensemble served by
/// weighted round-robin; each call retries its endpoint up to `retries`
/// times before failing the proposal.
class LlmProvider : public MutationProvider {
 public:
  LlmProvider(std::vector<LlmEndpoint> endpoints, int retries = 2,
              double request_timeout_seconds = 120.0);

  MutationResponse propose(const std::string& prompt, Rng& rng) override;
  [[nodiscard]] nlohmann::json state() const override;
  void restore_state(const nlohmann::json& state) override;

  /// Endpoint the next call will use (exposed for ensemble scheduling tests).
  [[nodiscard]] std::size_t next_endpoint_index() const;

 private:
  std::vector<LlmEndpoint> endpoints_;
  int retries_;
  double request_timeout_seconds_;
  std::uint64_t call_index_ = 0;
  std::vector<double> credit_;  // weighted round-robin balances
};

/// Extracts the assistant text from a chat-completion response body.
std::string extract_chat_content(const nlohmann::json& response_body);

}  // namespace evopt
