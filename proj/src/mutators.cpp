#include "evopt/mutators.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "evopt/errors.hpp"

namespace evopt {

// ---------------------------------------------------------------------------
// EVOLVE-BLOCK parsing
// ---------------------------------------------------------------------------

EvolveBlock parse_evolve_block(const std::string& source) {
  struct Line {
    std::size_t begin;
    std::size_t end;  // one past the terminating newline
  };
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < source.size()) {
    const std::size_t nl = source.find('\n', pos);
    const std::size_t end = (nl == std::string::npos) ? source.size() : nl + 1;
    lines.push_back({pos, end});
    pos = end;
  }

  int start_index = -1;
  int end_index = -1;
  int start_count = 0;
  int end_count = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line(source.data() + lines[i].begin, lines[i].end - lines[i].begin);
    if (line.find(kEvolveBlockStart) != std::string_view::npos) {
      ++start_count;
      if (start_index < 0) start_index = static_cast<int>(i);
    } else if (line.find(kEvolveBlockEnd) != std::string_view::npos) {
      ++end_count;
      if (end_index < 0) end_index = static_cast<int>(i);
    }
  }

  if (start_count == 0 && end_count == 0) {
    throw EngineError(ErrorKind::kMutation, "no evolve block");
  }
  if (start_count > 1 || end_count > 1) {
    throw EngineError(ErrorKind::kMutation, "multiple evolve blocks");
  }
  if (start_count != 1 || end_count != 1 || end_index <= start_index) {
    throw EngineError(ErrorKind::kMutation, "malformed markers");
  }

  const Line& start = lines[static_cast<std::size_t>(start_index)];
  const Line& end = lines[static_cast<std::size_t>(end_index)];
  EvolveBlock block;
  block.prefix = source.substr(0, start.begin);
  block.start_marker_line = source.substr(start.begin, start.end - start.begin);
  block.body = source.substr(start.end, end.begin - start.end);
  block.end_marker_line = source.substr(end.begin, end.end - end.begin);
  block.suffix = source.substr(end.end);
  return block;
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kDefaultGoal =
    "Improve runtime performance of the writable region without changing observable\n"
    "behavior. Keep public signatures, exception behavior, and existing tests intact.";

constexpr const char* kDefaultConstraints =
    "Do not touch the read-only context. Prefer small, maintainable edits. Do not\n"
    "introduce new dependencies. Respond with either SEARCH/REPLACE patch blocks or\n"
    "a full replacement of the writable region inside one fenced code block.";

constexpr const char* kDefaultOptimizeTemplate =
    "You are optimizing one writable code region inside a larger codebase.\n"
    "\n"
    "Goal:\n"
    "{{goal}}\n"
    "\n"
    "Runtime profile:\n"
    "- Target: {{target_name}}\n"
    "- Cumulative time: {{cumulative_time}}\n"
    "- Call count: {{call_count}}\n"
    "- Allocation/CPU notes: {{profile_annotations}}\n"
    "\n"
    "Writable code:\n"
    "{{writable_code}}\n"
    "\n"
    "Read-only context:\n"
    "{{read_only_context}}\n"
    "\n"
    "Evaluation feedback:\n"
    "{{evaluation_feedback}}\n"
    "\n"
    "Constraints:\n"
    "{{constraints}}\n";

constexpr const char* kDefaultBaselineTemplate =
    "You are improving one writable code region.\n"
    "\n"
    "Goal:\n"
    "{{goal}}\n"
    "\n"
    "Writable code:\n"
    "{{writable_code}}\n"
    "\n"
    "Constraints:\n"
    "{{constraints}}\n";

constexpr const char* kDefaultRepairTemplate =
    "The candidate program below failed validation. Repair it so the build and all\n"
    "unit tests pass while keeping the intended optimization where possible.\n"
    "\n"
    "Candidate source:\n"
    "{{source}}\n"
    "\n"
    "Diagnostics:\n"
    "{{diagnostics}}\n"
    "\n"
    "Respond with either SEARCH/REPLACE patch blocks for the writable region or a\n"
    "full replacement of the writable region inside one fenced code block.\n";

std::string format_milliseconds(double ms) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.3f ms", ms);
  return buffer;
}

}  // namespace

PromptTemplate PromptTemplate::from_string(std::string text) { return PromptTemplate(std::move(text)); }

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw EngineError(ErrorKind::kConfig, "prompt template not readable: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return PromptTemplate(buffer.str());
}

PromptTemplate PromptTemplate::default_optimize() { return PromptTemplate(kDefaultOptimizeTemplate); }

PromptTemplate PromptTemplate::default_baseline() { return PromptTemplate(kDefaultBaselineTemplate); }

PromptTemplate PromptTemplate::default_repair() { return PromptTemplate(kDefaultRepairTemplate); }

std::string PromptTemplate::render(const std::map<std::string, std::string>& slots) const {
  std::string out;
  out.reserve(text_.size());
  std::vector<bool> used(slots.size(), false);

  std::size_t pos = 0;
  while (pos < text_.size()) {
    const std::size_t open = text_.find("{{", pos);
    if (open == std::string::npos) {
      out.append(text_, pos, std::string::npos);
      break;
    }
    out.append(text_, pos, open - pos);
    const std::size_t close = text_.find("}}", open + 2);
    if (close == std::string::npos) {
      throw EngineError(ErrorKind::kConfig, "unterminated {{slot}} in prompt template");
    }
    const std::string name = text_.substr(open + 2, close - open - 2);
    const auto it = slots.find(name);
    if (it == slots.end()) {
      throw EngineError(ErrorKind::kConfig, "prompt template references unknown slot '" + name + "'");
    }
    used[static_cast<std::size_t>(std::distance(slots.begin(), it))] = true;
    out += it->second;
    pos = close + 2;
  }

  std::size_t index = 0;
  for (const auto& [name, value] : slots) {
    if (!used[index]) {
      throw EngineError(ErrorKind::kConfig, "prompt template is missing required slot '" + name + "'");
    }
    ++index;
  }
  return out;
}

std::string build_prompt(const OptimizationContext& context, const PromptTemplate& tpl,
                         std::size_t feedback_cap) {
  if (context.writable_code.empty()) {
    throw EngineError(ErrorKind::kPrecondition, "optimization context has empty writable code");
  }

  std::map<std::string, std::string> slots;
  slots["goal"] = context.goal.empty() ? kDefaultGoal : context.goal;
  slots["writable_code"] = context.writable_code;
  slots["constraints"] = context.constraints.empty() ? kDefaultConstraints : context.constraints;
  if (!context.enriched) {
    return tpl.render(slots);
  }

  slots["target_name"] = context.target_name.empty() ? "(unnamed)" : context.target_name;
  slots["cumulative_time"] = format_milliseconds(context.profile.exec_time_ms);
  slots["call_count"] = std::to_string(context.profile.call_count);
  if (context.annotations.empty()) {
    slots["profile_annotations"] = "none";
  } else {
    std::string notes;
    for (const auto& [key, value] : context.annotations) {
      if (!notes.empty()) notes += "; ";
      notes += key + "=" + value;
    }
    slots["profile_annotations"] = notes;
  }
  slots["read_only_context"] = context.frozen_context.empty() ? "none" : context.frozen_context;

  // Most recent entries are eligible; scored entries render first, best
  // score on top, then failures, most recent first.
  std::vector<const FeedbackEntry*> recent;
  const std::size_t take = std::min(feedback_cap, context.feedback.size());
  for (std::size_t i = context.feedback.size() - take; i < context.feedback.size(); ++i) {
    recent.push_back(&context.feedback[i]);
  }
  std::stable_sort(recent.begin(), recent.end(), [](const FeedbackEntry* a, const FeedbackEntry* b) {
    if (a->score.has_value() != b->score.has_value()) return a->score.has_value();
    if (a->score && b->score && *a->score != *b->score) return *a->score > *b->score;
    return a->iteration > b->iteration;
  });
  if (recent.empty()) {
    slots["evaluation_feedback"] = "none";
  } else {
    std::string feedback;
    for (const FeedbackEntry* entry : recent) {
      if (!feedback.empty()) feedback += "\n";
      char head[64];
      if (entry->score) {
        std::snprintf(head, sizeof(head), "- [score %.4f, iteration %llu] ", *entry->score,
                      static_cast<unsigned long long>(entry->iteration));
      } else {
        std::snprintf(head, sizeof(head), "- [failed, iteration %llu] ",
                      static_cast<unsigned long long>(entry->iteration));
      }
      feedback += head + entry->summary;
    }
    slots["evaluation_feedback"] = feedback;
  }

  return tpl.render(slots);
}

std::string build_repair_prompt(const std::string& source, const std::string& diagnostics,
                                const PromptTemplate& tpl) {
  return tpl.render({{"source", source},
                     {"diagnostics", diagnostics.empty() ? "none recorded" : diagnostics}});
}

// ---------------------------------------------------------------------------
// Response parsing and application
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kHunkSearch = "<<<<<<< SEARCH";
constexpr const char* kHunkSplit = "=======";
constexpr const char* kHunkReplace = ">>>>>>> REPLACE";

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += 1;
  }
  return count;
}

std::string trimmed(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::string summarize(const std::string& text, std::size_t limit = 200) {
  std::string out = trimmed(text);
  const auto nl = out.find('\n');
  if (nl != std::string::npos) out.resize(nl);
  if (out.size() > limit) {
    out.resize(limit);
    out += "...";
  }
  return out;
}

}  // namespace

std::vector<DiffHunk> parse_diff_hunks(const std::string& payload) {
  std::vector<DiffHunk> hunks;
  const std::vector<std::string> lines = split_lines(payload);
  std::size_t i = 0;
  while (i < lines.size()) {
    if (strip_cr(lines[i]).rfind(kHunkSearch, 0) != 0) {
      ++i;
      continue;
    }
    ++i;
    std::string search;
    while (i < lines.size() && strip_cr(lines[i]) != kHunkSplit) {
      search += strip_cr(lines[i]) + "\n";
      ++i;
    }
    if (i >= lines.size()) {
      throw EngineError(ErrorKind::kMutation, "diff hunk missing ======= separator");
    }
    ++i;
    std::string replace;
    bool closed = false;
    while (i < lines.size()) {
      if (strip_cr(lines[i]).rfind(kHunkReplace, 0) == 0) {
        closed = true;
        ++i;
        break;
      }
      replace += strip_cr(lines[i]) + "\n";
      ++i;
    }
    if (!closed) {
      throw EngineError(ErrorKind::kMutation, "diff hunk missing >>>>>>> REPLACE terminator");
    }
    if (search.empty()) {
      throw EngineError(ErrorKind::kMutation, "diff hunk has empty search text");
    }
    hunks.push_back({std::move(search), std::move(replace)});
  }
  if (hunks.empty()) {
    throw EngineError(ErrorKind::kMutation, "no diff hunks in payload");
  }
  return hunks;
}

MutationResponse parse_provider_output(const std::string& raw) {
  MutationResponse response;
  const std::size_t hunk_pos = raw.find(kHunkSearch);
  if (hunk_pos != std::string::npos) {
    response.kind = MutationResponse::Kind::kDiff;
    response.payload = raw.substr(hunk_pos);
    parse_diff_hunks(response.payload);  // validates the grammar up front
    response.rationale = summarize(raw.substr(0, hunk_pos));
    return response;
  }

  const std::size_t fence_open = raw.find("```");
  if (fence_open != std::string::npos) {
    const std::size_t content_start = raw.find('\n', fence_open);
    if (content_start != std::string::npos) {
      const std::size_t fence_close = raw.find("\n```", content_start);
      if (fence_close != std::string::npos) {
        response.kind = MutationResponse::Kind::kFullRewrite;
        response.payload = raw.substr(content_start + 1, fence_close - content_start);
        response.rationale = summarize(raw.substr(0, fence_open));
        return response;
      }
    }
  }

  throw EngineError(ErrorKind::kMutation,
                    "response contains neither diff hunks nor a fenced code block: " + summarize(raw, 400));
}

std::string apply_mutation(const EvolveBlock& block, const MutationResponse& response) {
  if (response.kind == MutationResponse::Kind::kFullRewrite) {
    std::string body = response.payload;
    if (!body.empty() && body.back() != '\n') body += '\n';
    return block.with_body(body);
  }

  std::string body = block.body;
  for (const DiffHunk& hunk : parse_diff_hunks(response.payload)) {
    const std::size_t matches = count_occurrences(body, hunk.search);
    if (matches != 1) {
      throw EngineError(ErrorKind::kMutation,
                        "ambiguous or missing hunk (" + std::to_string(matches) +
                            " matches for search text): " + summarize(hunk.search));
    }
    const std::size_t at = body.find(hunk.search);
    body.replace(at, hunk.search.size(), hunk.replace);
  }
  return block.with_body(body);
}

// ---------------------------------------------------------------------------
// Scripted provider
// ---------------------------------------------------------------------------

ScriptedProvider::ScriptedProvider(std::vector<Edit> edits) : edits_(std::move(edits)) {
  if (edits_.empty()) {
    throw EngineError(ErrorKind::kConfig, "scripted provider requires at least one edit");
  }
}

ScriptedProvider ScriptedProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw EngineError(ErrorKind::kConfig, "scripted mutation fixture not readable: " + path.string());
  }
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw EngineError(ErrorKind::kInput, "scripted mutation fixture is not valid JSON: " + path.string());
  }
  return from_json(doc);
}

ScriptedProvider ScriptedProvider::from_json(const nlohmann::json& doc) {
  std::vector<Edit> edits;
  for (const auto& entry : doc.at("edits")) {
    Edit edit;
    if (entry.contains("trigger")) {
      const auto& trigger = entry.at("trigger");
      if (trigger.is_string()) {
        if (!trigger.get<std::string>().empty()) edit.trigger.push_back(trigger.get<std::string>());
      } else {
        for (const auto& needle : trigger) edit.trigger.push_back(needle.get<std::string>());
      }
    }
    const std::string kind = entry.value("kind", "full");
    if (kind == "diff") {
      edit.response.kind = MutationResponse::Kind::kDiff;
    } else if (kind == "full") {
      edit.response.kind = MutationResponse::Kind::kFullRewrite;
    } else {
      throw EngineError(ErrorKind::kInput, "scripted edit kind must be \"full\" or \"diff\": " + kind);
    }
    edit.response.payload = entry.at("payload").get<std::string>();
    edit.response.rationale = entry.value("rationale", std::string{});
    edits.push_back(std::move(edit));
  }
  return ScriptedProvider(std::move(edits));
}

MutationResponse ScriptedProvider::propose(const std::string& prompt, Rng&) {
  const std::uint64_t call = call_index_++;
  const std::size_t n = edits_.size();
  for (std::size_t offset = 0; offset < n; ++offset) {
    const Edit& edit = edits_[(call + offset) % n];
    const bool matches = std::all_of(edit.trigger.begin(), edit.trigger.end(),
                                     [&](const std::string& needle) {
                                       return prompt.find(needle) != std::string::npos;
                                     });
    if (matches) {
      return edit.response;
    }
  }
  throw EngineError(ErrorKind::kProvider, "no scripted edit matches the prompt");
}

nlohmann::json ScriptedProvider::state() const { return {{"call_index", call_index_}}; }

void ScriptedProvider::restore_state(const nlohmann::json& state) {
  call_index_ = state.value("call_index", std::uint64_t{0});
}

// ---------------------------------------------------------------------------
// LLM provider
// ---------------------------------------------------------------------------

LlmProvider::LlmProvider(std::vector<LlmEndpoint> endpoints, int retries,
                         double request_timeout_seconds)
    : endpoints_(std::move(endpoints)),
      retries_(retries),
      request_timeout_seconds_(request_timeout_seconds) {
  if (endpoints_.empty()) {
    throw EngineError(ErrorKind::kConfig, "LLM provider requires at least one endpoint");
  }
  for (const auto& endpoint : endpoints_) {
    if (endpoint.weight <= 0.0) {
      throw EngineError(ErrorKind::kConfig, "LLM endpoint weight must be positive");
    }
  }
  credit_.assign(endpoints_.size(), 0.0);
}

std::size_t LlmProvider::next_endpoint_index() const {
  // Smooth weighted round-robin: the endpoint with the highest accumulated
  // credit serves next.
  std::size_t best = 0;
  double best_credit = credit_[0] + endpoints_[0].weight;
  for (std::size_t i = 1; i < endpoints_.size(); ++i) {
    const double candidate = credit_[i] + endpoints_[i].weight;
    if (candidate > best_credit) {
      best = i;
      best_credit = candidate;
    }
  }
  return best;
}

std::string extract_chat_content(const nlohmann::json& response_body) {
  if (response_body.contains("choices") && !response_body.at("choices").empty()) {
    const auto& choice = response_body.at("choices").at(0);
    if (choice.contains("message") && choice.at("message").contains("content")) {
      return choice.at("message").at("content").get<std::string>();
    }
    if (choice.contains("text")) {
      return choice.at("text").get<std::string>();
    }
  }
  throw EngineError(ErrorKind::kProvider, "chat response has no choices[0].message.content");
}

MutationResponse LlmProvider::propose(const std::string& prompt, Rng&) {
  ++call_index_;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < endpoints_.size(); ++i) {
    credit_[i] += endpoints_[i].weight;
    total_weight += endpoints_[i].weight;
  }
  std::size_t chosen = 0;
  for (std::size_t i = 1; i < endpoints_.size(); ++i) {
    if (credit_[i] > credit_[chosen]) chosen = i;
  }
  credit_[chosen] -= total_weight;
  const LlmEndpoint& endpoint = endpoints_[chosen];

  nlohmann::json request{{"model", endpoint.model},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                         {"temperature", endpoint.temperature},
                         {"max_tokens", endpoint.max_tokens}};
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(request_timeout_seconds_ * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<int>(request_timeout_seconds_ * 1000)));
    httplib::Headers headers{{"Content-Type", "application/json"}};
    if (!endpoint.auth_env.empty()) {
      if (const char* token = std::getenv(endpoint.auth_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
    }
    auto result = client.Post(endpoint.path, headers, body, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status != 200) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    nlohmann::json response = nlohmann::json::parse(result->body, nullptr, false);
    if (response.is_discarded()) {
      last_error = "response body is not valid JSON";
      continue;
    }
    return parse_provider_output(extract_chat_content(response));
  }
  throw EngineError(ErrorKind::kProvider,
                    "endpoint " + endpoint.base_url + " failed after " +
                        std::to_string(retries_ + 1) + " attempts: " + last_error);
}

nlohmann::json LlmProvider::state() const {
  return {{"call_index", call_index_}, {"credit", credit_}};
}

void LlmProvider::restore_state(const nlohmann::json& state) {
  call_index_ = state.value("call_index", std::uint64_t{0});
  if (state.contains("credit") && state.at("credit").size() == credit_.size()) {
    credit_ = state.at("credit").get<std::vector<double>>();
  }
}

}  // namespace evopt
