#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "provaudit/trace_model.hpp"

namespace provaudit {

/// Trace excerpt with exactly one event result swapped for a task-neutral
/// placeholder; everything else stays byte-identical.
struct NeutralizedContext {
  std::vector<ToolEvent> original_events;
  std::pair<std::string, std::int64_t> replaced_event;
  std::string placeholder_text;

  std::vector<ToolEvent> neutralized_events() const;
};

struct JudgeVerdict {
  bool would_call_anyway = true;
  double confidence = 1.0;
  std::string reasoning;

  bool operator==(const JudgeVerdict&) const = default;
};

struct JudgeRequest {
  std::string system;
  std::string user;
  // Metadata for scripted judges; transport judges ignore these.
  std::string sink_tool;
  std::string neutralized_label;
};

class Judge {
 public:
  Judge() = default;
  virtual ~Judge() = default;
  // The call counter is per-instance diagnostics and never travels.
  Judge(const Judge&) {}
  Judge(Judge&&) noexcept {}
  Judge& operator=(const Judge&) { return *this; }
  Judge& operator=(Judge&&) noexcept { return *this; }

  /// Raw model content in response to the request. Throws JudgeUnavailable.
  std::string ask(const JudgeRequest& request) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return respond(request);
  }
  long calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual std::string respond(const JudgeRequest& request) = 0;

 private:
  std::atomic<long> calls_{0};
};

/// File-backed mock keyed by "<sink_tool>|<label_id>". Values are verdict
/// objects (emitted as strict JSON) or raw content strings; unmatched keys
/// answer {would_call_anyway: true, confidence: 1.0}. Safe for concurrent
/// reads.
class ScriptedJudge final : public Judge {
 public:
  ScriptedJudge() = default;
  static ScriptedJudge from_file(const std::string& path);
  static ScriptedJudge from_json_text(const std::string& json_text);

 protected:
  std::string respond(const JudgeRequest& request) override;

 private:
  std::map<std::string, std::string> responses_;
};

struct HttpJudgeConfig {
  std::string endpoint;
  int timeout_ms = 30000;
};

/// POST {"system": ..., "user": ...} -> {"content": ...}.
class HttpJudge final : public Judge {
 public:
  explicit HttpJudge(HttpJudgeConfig config);

 protected:
  std::string respond(const JudgeRequest& request) override;

 private:
  HttpJudgeConfig config_;
  std::string host_;
  int port_ = 0;
  std::string path_;
};

/// Replaces the referenced event's result with the policy placeholder for its
/// tool. Throws EventNotInPrefix when the reference is not in the prefix.
NeutralizedContext build_neutralized_context(const std::vector<ToolEvent>& trace_prefix,
                                             const std::string& source_session,
                                             std::int64_t source_index, const Policy& policy);

std::string render_sink_args(const std::vector<std::pair<std::string, std::string>>& args);
std::string render_context_events(const std::vector<ToolEvent>& events);
std::string render_probe_prompt(const NeutralizedContext& context, const std::string& sink_tool,
                                const std::string& sink_args);

/// Strict single-object verdict parse; all three fields required, confidence
/// in [0, 1].
std::optional<JudgeVerdict> parse_verdict(const std::string& content);

/// Renders the two-context prompt, asks the judge, parses a strict-JSON
/// verdict; retries once on malformed output, then throws MalformedVerdict.
JudgeVerdict probe_sink(const NeutralizedContext& context, const std::string& sink_tool,
                        const std::string& sink_args, Judge& judge,
                        const std::string& neutralized_label = "");

/// Labels whose verdict says the sink would not fire without them, each with
/// the judge's confidence. Several causal labels are all reported.
std::vector<std::pair<std::string, double>> attribute(
    const std::vector<std::pair<std::string, JudgeVerdict>>& verdict_per_label);

}  // namespace provaudit
