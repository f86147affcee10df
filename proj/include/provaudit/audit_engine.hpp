#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "provaudit/causal_analyzer.hpp"
#include "provaudit/embedding.hpp"
#include "provaudit/explicit_tracker.hpp"
#include "provaudit/provenance_graph.hpp"
#include "provaudit/trace_model.hpp"

namespace provaudit {

enum class FlowClass {
  ExplicitCanary,
  ExplicitLcs,
  ExplicitSemantic,
  ExplicitCoverage,
  ImplicitControl
};

const char* flow_class_name(FlowClass flow_class);
FlowClass flow_class_for_tier(Tier tier);

struct SinkRef {
  std::string session;
  std::int64_t index = 0;
  std::string tool;

  bool operator==(const SinkRef&) const = default;
};

struct Finding {
  SinkRef sink;
  std::string source_label;
  FlowClass flow_class = FlowClass::ExplicitCanary;
  double confidence = 0.0;
  std::vector<std::string> provenance_path;
  std::optional<TierResult> tier_evidence;
  std::optional<JudgeVerdict> judge_evidence;
  /// Supporting lexical evidence for implicit findings: max lineage LCS ratio
  /// when it clears the implicit-string threshold.
  std::optional<double> implicit_string_evidence;
  bool degraded = false;
};

struct DegradedMarker {
  SinkRef sink;
  std::string label;
  std::string stage;  // "semantic" or "judge"
  std::string reason;
};

struct AuditStats {
  long events = 0;
  long sinks = 0;
  long probes = 0;
  long provider_calls = 0;
  long wall_ms = 0;
};

struct AuditReport {
  std::string trace_ref;
  std::vector<Finding> findings;
  std::vector<DegradedMarker> degraded;
  AuditStats stats;

  bool has_clean_findings() const;
};

struct AuditProviders {
  EmbeddingProvider* embeddings = nullptr;  // null degrades semantic tiers
  Judge* judge = nullptr;                   // null degrades causal probes
};

class Auditor {
 public:
  Auditor(Policy policy, AuditProviders providers);

  /// Replays the events into the graph and audits every sink against the
  /// lineage recovered so far. The graph may carry restored prior-session
  /// state; it accumulates this trace's nodes.
  AuditReport audit(const std::vector<ToolEvent>& events, ProvenanceGraph& graph,
                    const std::string& trace_ref = "");

  /// Single-trace convenience over a fresh graph.
  AuditReport audit_trace(const std::vector<ToolEvent>& events,
                          const std::string& trace_ref = "");

  const Policy& policy() const { return policy_; }

 private:
  Policy policy_;
  AuditProviders providers_;
};

std::string report_to_json(const AuditReport& report, bool include_wall_ms = true);
std::string report_to_markdown(const AuditReport& report);

/// One benchmark scenario: repeated runs of the same setup, each run an
/// ordered list of trace files replayed with snapshot handoff in between.
struct ScenarioRecord {
  std::string scenario_id;
  std::string family;
  bool expected_positive = false;
  std::vector<std::vector<std::string>> runs;
  std::optional<std::string> judge_script;
  /// Snapshot restored at the start of every run.
  std::optional<std::string> state_in;
  /// Ground-truth source event, for strict attribution scoring.
  std::optional<std::pair<std::string, std::int64_t>> expected_source;
};

struct ScenarioOutcome {
  std::string scenario_id;
  std::string family;
  bool expected_positive = false;
  bool detected = false;
  int positive_runs = 0;
  int total_runs = 0;
};

struct ScenarioOptions {
  bool strict_attribution = false;
  /// Fallback judge when a record carries no script (defaults to the empty
  /// scripted judge, which answers would_call_anyway for everything).
  Judge* default_judge = nullptr;
  EmbeddingProvider* embeddings = nullptr;
};

/// Audits every run and aggregates by strict majority vote: a run is positive
/// iff it yields at least one non-degraded finding.
ScenarioOutcome audit_scenario(const ScenarioRecord& record, const Policy& policy,
                               const ScenarioOptions& options);

/// Same, but also returns each run's reports (for inspection and tests).
ScenarioOutcome audit_scenario_collect(const ScenarioRecord& record, const Policy& policy,
                                       const ScenarioOptions& options,
                                       std::vector<std::vector<AuditReport>>* run_reports);

struct EvalSummary {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

EvalSummary evaluate(const std::vector<std::pair<bool, bool>>& expected_detected);

struct EvalResult {
  EvalSummary overall;
  std::map<std::string, EvalSummary> per_family;
  std::vector<ScenarioOutcome> scenarios;
};

/// Loads a scenario manifest (JSON array of records; paths relative to the
/// manifest location).
std::vector<ScenarioRecord> load_manifest(const std::string& manifest_path);

struct EvalOptions {
  bool strict_attribution = false;
  Judge* default_judge = nullptr;
  EmbeddingProvider* embeddings = nullptr;
  int jobs = 1;
};

EvalResult run_eval(const std::vector<ScenarioRecord>& records, const Policy& policy,
                    const EvalOptions& options);

std::string eval_to_json(const EvalResult& result);
std::string eval_to_markdown(const EvalResult& result);

/// "0.921"-style fixed three-decimal rendering; undefined renders as "--".
std::string metric_to_string(const std::optional<double>& value);
double round3(double value);

}  // namespace provaudit
