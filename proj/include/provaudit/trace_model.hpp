#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace provaudit {

/// One recorded tool call. Argument order is preserved as written by the producer.
struct ToolEvent {
  std::string session_id;
  std::int64_t index = 0;
  std::string tool_name;
  std::vector<std::pair<std::string, std::string>> args;
  std::string result;
  std::optional<std::string> timestamp;

  std::optional<std::string> arg(std::string_view name) const;
  /// All argument values, order-preserving, newline-joined.
  std::string joined_args() const;

  bool operator==(const ToolEvent&) const = default;
};

enum class EventKind { Source, Sink, MemoryWrite, MemoryRead, Other };

const char* event_kind_name(EventKind kind);
EventKind event_kind_from_name(std::string_view name);

/// An event can play several roles at once when a tool belongs to several
/// policy sets; classify() returns every applicable kind.
using KindSet = std::set<EventKind>;

/// Provenance marker binding content to the source event that produced it.
struct TaintLabel {
  std::string id;
  std::string source_session;
  std::int64_t source_index = 0;
  std::string origin_tool;
  double confidence = 1.0;
  std::optional<std::string> canary;

  bool operator==(const TaintLabel&) const = default;
};

struct ThresholdProfile {
  double string_match = 0.15;
  double implicit_string = 0.40;
  double semantic = 0.60;
  double rag_semantic = 0.85;
  double coverage = 0.10;
  double safe_semantic = 0.95;

  bool operator==(const ThresholdProfile&) const = default;
};

struct Policy {
  std::set<std::string> sources;
  std::set<std::string> sinks;
  std::set<std::string> memory_writes;
  std::set<std::string> memory_reads;
  std::set<std::string> trusted_sources;
  ThresholdProfile thresholds;
  int chunk_sentences = 3;
  /// Optional per-tool neutralization placeholder overrides.
  std::map<std::string, std::string> placeholders;

  /// Built-in policy: catalogue source/sink sets, empty memory and trusted
  /// sets, default thresholds.
  static Policy defaults();
  static const std::set<std::string>& default_sources();
  static const std::set<std::string>& default_sinks();

  /// Neutralization placeholder for a tool: explicit override first, then
  /// "No relevant information found." for retrieval-like tools (sources and
  /// memory reads), empty text otherwise.
  std::string placeholder_for(const std::string& tool_name) const;
};

KindSet classify_tool(const std::string& tool_name, const Policy& policy);
KindSet classify(const ToolEvent& event, const Policy& policy);

/// Parses a line-delimited JSON trace. Events come back grouped by session
/// (first-appearance order) and ordered by index within each session. Any
/// malformed line rejects the whole input.
std::vector<ToolEvent> parse_trace(std::istream& input);
std::vector<ToolEvent> parse_trace_text(const std::string& text);
std::vector<ToolEvent> parse_trace_file(const std::string& path);

std::string serialize_trace(const std::vector<ToolEvent>& events);

Policy parse_policy(const std::string& yaml_text);
Policy parse_policy_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace provaudit
