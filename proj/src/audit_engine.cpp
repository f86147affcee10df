#include "provaudit/audit_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <thread>

#include <json.hpp>

#include "provaudit/errors.hpp"

namespace provaudit {

namespace {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> sink_text_variants(const ToolEvent& event) {
  std::vector<std::string> variants;
  variants.push_back(event.joined_args());
  for (const auto& [name, value] : event.args) {
    if (std::find(variants.begin(), variants.end(), value) == variants.end()) {
      variants.push_back(value);
    }
  }
  return variants;
}

ordered_json tier_evidence_json(const TierResult& tier) {
  ordered_json out;
  out["kind"] = "tier";
  out["tier"] = tier_name(tier.tier);
  out["score"] = tier.score;
  out["threshold"] = tier.threshold_used;
  if (tier.matched_fragment) out["matched_fragment"] = *tier.matched_fragment;
  return out;
}

ordered_json judge_evidence_json(const Finding& finding) {
  ordered_json out;
  out["kind"] = "judge";
  out["would_call_anyway"] = finding.judge_evidence->would_call_anyway;
  out["confidence"] = finding.judge_evidence->confidence;
  out["reasoning"] = finding.judge_evidence->reasoning;
  if (finding.implicit_string_evidence) {
    out["string_evidence_ratio"] = *finding.implicit_string_evidence;
  }
  return out;
}

ordered_json sink_ref_json(const SinkRef& sink) {
  ordered_json out;
  out["session"] = sink.session;
  out["index"] = sink.index;
  out["tool"] = sink.tool;
  return out;
}

ordered_json finding_json(const Finding& finding) {
  ordered_json out;
  out["sink"] = sink_ref_json(finding.sink);
  out["source_label"] = finding.source_label;
  out["flow_class"] = flow_class_name(finding.flow_class);
  out["confidence"] = finding.confidence;
  out["provenance_path"] = finding.provenance_path;
  if (finding.tier_evidence) {
    out["evidence"] = tier_evidence_json(*finding.tier_evidence);
  } else if (finding.judge_evidence) {
    out["evidence"] = judge_evidence_json(finding);
  }
  out["degraded"] = finding.degraded;
  return out;
}

}  // namespace

const char* flow_class_name(FlowClass flow_class) {
  switch (flow_class) {
    case FlowClass::ExplicitCanary: return "explicit_canary";
    case FlowClass::ExplicitLcs: return "explicit_lcs";
    case FlowClass::ExplicitSemantic: return "explicit_semantic";
    case FlowClass::ExplicitCoverage: return "explicit_coverage";
    case FlowClass::ImplicitControl: return "implicit_control";
  }
  return "explicit_canary";
}

FlowClass flow_class_for_tier(Tier tier) {
  switch (tier) {
    case Tier::Canary: return FlowClass::ExplicitCanary;
    case Tier::Lcs: return FlowClass::ExplicitLcs;
    case Tier::Semantic: return FlowClass::ExplicitSemantic;
    case Tier::Coverage: return FlowClass::ExplicitCoverage;
    case Tier::None: break;
  }
  raise(ErrorCode::ParseError, "no flow class for a non-firing tier");
}

bool AuditReport::has_clean_findings() const {
  return std::any_of(findings.begin(), findings.end(),
                     [](const Finding& finding) { return !finding.degraded; });
}

Auditor::Auditor(Policy policy, AuditProviders providers)
    : policy_(std::move(policy)), providers_(providers) {}

AuditReport Auditor::audit_trace(const std::vector<ToolEvent>& events,
                                 const std::string& trace_ref) {
  ProvenanceGraph graph;
  return audit(events, graph, trace_ref);
}

AuditReport Auditor::audit(const std::vector<ToolEvent>& events, ProvenanceGraph& graph,
                           const std::string& trace_ref) {
  auto started = std::chrono::steady_clock::now();

  AuditReport report;
  report.trace_ref = trace_ref;
  report.stats.events = static_cast<long>(events.size());

  std::unique_ptr<CountingProvider> counting;
  std::unique_ptr<MemoizingProvider> memo;
  EmbeddingProvider* provider = nullptr;
  if (providers_.embeddings) {
    counting = std::make_unique<CountingProvider>(*providers_.embeddings);
    memo = std::make_unique<MemoizingProvider>(*counting);
    provider = memo.get();
  }

  std::map<std::string, const ToolEvent*> event_by_node;
  std::vector<ToolEvent> prefix;
  prefix.reserve(events.size());

  for (const ToolEvent& event : events) {
    KindSet kinds = classify(event, policy_);
    std::optional<std::string> canary;
    if (kinds.count(EventKind::Source)) canary = find_canary(event.result);

    std::string node_id = graph.record_event(event, kinds, std::move(canary));
    event_by_node[node_id] = &event;

    if (kinds.count(EventKind::MemoryRead)) {
      graph.rehydrate_on_read(node_id,
                              ProvenanceGraph::derive_record_key(event, EventKind::MemoryRead));
    }
    if (kinds.count(EventKind::MemoryWrite)) {
      graph.annotate_memory_write(
          node_id, ProvenanceGraph::derive_record_key(event, EventKind::MemoryWrite));
    }

    if (kinds.count(EventKind::Sink)) {
      ++report.stats.sinks;
      SinkRef sink_ref{event.session_id, event.index, event.tool_name};
      std::vector<std::string> variants = sink_text_variants(event);

      std::vector<LineageEntry> lineage = graph.lineage_for_sink(node_id);
      std::vector<Finding> explicit_findings;
      std::vector<const LineageEntry*> unresolved;
      bool semantic_degraded = false;

      for (const LineageEntry& entry : lineage) {
        auto intro_event = event_by_node.find(entry.intro_node);
        if (intro_event == event_by_node.end()) {
          report.degraded.push_back({sink_ref, entry.label.id, "semantic",
                                     "lineage content for node '" + entry.intro_node +
                                         "' is not part of this run"});
          semantic_degraded = true;
          continue;
        }
        const std::string& source_text = intro_event->second->result;

        CascadeFlags flags;
        flags.is_rag_lineage = entry.crossed_memory;
        flags.is_trusted_source = policy_.trusted_sources.count(entry.label.origin_tool) > 0;

        CascadeOutcome outcome = run_cascade(entry.label, source_text, variants, provider,
                                             policy_.thresholds, flags, policy_.chunk_sentences);
        if (outcome.degraded) {
          semantic_degraded = true;
          report.degraded.push_back({sink_ref, entry.label.id, "semantic",
                                     outcome.degraded_reason});
        }
        if (outcome.result.fired()) {
          Finding finding;
          finding.sink = sink_ref;
          finding.source_label = entry.label.id;
          finding.flow_class = flow_class_for_tier(outcome.result.tier);
          finding.confidence = outcome.result.score;
          finding.provenance_path = entry.path;
          finding.tier_evidence = outcome.result;
          explicit_findings.push_back(std::move(finding));
        } else {
          unresolved.push_back(&entry);
        }
      }

      if (!explicit_findings.empty()) {
        std::sort(explicit_findings.begin(), explicit_findings.end(),
                  [](const Finding& a, const Finding& b) {
                    if (a.confidence != b.confidence) return a.confidence > b.confidence;
                    return a.source_label < b.source_label;
                  });
        for (Finding& finding : explicit_findings) report.findings.push_back(std::move(finding));
      } else if (!lineage.empty() && unresolved.size() == lineage.size()) {
        // Sink-driven causal analysis: explicit evidence is absent for every
        // lineage label and at least one tainted lineage reaches this sink.
        if (!providers_.judge) {
          for (const LineageEntry* entry : unresolved) {
            report.degraded.push_back(
                {sink_ref, entry->label.id, "judge", "no judge configured for causal probes"});
          }
        } else {
          double max_string_ratio = 0.0;
          std::vector<std::pair<std::string, JudgeVerdict>> verdicts;
          std::map<std::string, const LineageEntry*> by_label;
          for (const LineageEntry* entry : unresolved) {
            by_label[entry->label.id] = entry;
            const std::string& source_text = event_by_node.at(entry->intro_node)->result;
            for (const std::string& variant : variants) {
              max_string_ratio =
                  std::max(max_string_ratio, lcs_ratio(strip_canaries(source_text), variant));
            }
            const ToolEvent& intro = *event_by_node.at(entry->intro_node);
            NeutralizedContext context =
                build_neutralized_context(prefix, intro.session_id, intro.index, policy_);
            ++report.stats.probes;
            try {
              JudgeVerdict verdict =
                  probe_sink(context, event.tool_name, render_sink_args(event.args),
                             *providers_.judge, entry->label.id);
              verdicts.emplace_back(entry->label.id, verdict);
            } catch (const Error& ex) {
              if (ex.code() != ErrorCode::JudgeUnavailable &&
                  ex.code() != ErrorCode::MalformedVerdict) {
                throw;
              }
              report.degraded.push_back({sink_ref, entry->label.id, "judge", ex.what()});
            }
          }

          std::vector<Finding> implicit_findings;
          for (const auto& [label_id, confidence] : attribute(verdicts)) {
            const LineageEntry* entry = by_label.at(label_id);
            Finding finding;
            finding.sink = sink_ref;
            finding.source_label = label_id;
            finding.flow_class = FlowClass::ImplicitControl;
            finding.confidence = confidence;
            finding.provenance_path = entry->path;
            for (const auto& [verdict_label, verdict] : verdicts) {
              if (verdict_label == label_id) finding.judge_evidence = verdict;
            }
            if (max_string_ratio >= policy_.thresholds.implicit_string) {
              finding.implicit_string_evidence = max_string_ratio;
            }
            finding.degraded = semantic_degraded;
            implicit_findings.push_back(std::move(finding));
          }
          std::sort(implicit_findings.begin(), implicit_findings.end(),
                    [](const Finding& a, const Finding& b) {
                      if (a.confidence != b.confidence) return a.confidence > b.confidence;
                      return a.source_label < b.source_label;
                    });
          for (Finding& finding : implicit_findings) report.findings.push_back(std::move(finding));
        }
      }
    }

    prefix.push_back(event);
  }

  if (counting) report.stats.provider_calls = counting->calls();
  report.stats.wall_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                               std::chrono::steady_clock::now() - started)
                                               .count());
  return report;
}

std::string report_to_json(const AuditReport& report, bool include_wall_ms) {
  ordered_json doc;
  doc["trace"] = report.trace_ref;
  ordered_json findings = ordered_json::array();
  for (const Finding& finding : report.findings) findings.push_back(finding_json(finding));
  doc["findings"] = std::move(findings);
  ordered_json degraded = ordered_json::array();
  for (const DegradedMarker& marker : report.degraded) {
    ordered_json entry;
    entry["sink"] = sink_ref_json(marker.sink);
    entry["label"] = marker.label;
    entry["stage"] = marker.stage;
    entry["reason"] = marker.reason;
    degraded.push_back(std::move(entry));
  }
  doc["degraded"] = std::move(degraded);
  ordered_json stats;
  stats["events"] = report.stats.events;
  stats["sinks"] = report.stats.sinks;
  stats["probes"] = report.stats.probes;
  stats["provider_calls"] = report.stats.provider_calls;
  stats["wall_ms"] = include_wall_ms ? report.stats.wall_ms : 0;
  doc["stats"] = std::move(stats);
  return doc.dump(2) + "\n";
}

std::string report_to_markdown(const AuditReport& report) {
  std::string out;
  out += "# Audit report\n\n";
  out += "Trace: `" + report.trace_ref + "`\n\n";
  if (report.findings.empty()) {
    out += "No findings.\n";
  } else {
    out += "| sink | label | class | confidence | degraded |\n";
    out += "|---|---|---|---|---|\n";
    for (const Finding& finding : report.findings) {
      char confidence[32];
      std::snprintf(confidence, sizeof(confidence), "%.3f", finding.confidence);
      out += "| " + finding.sink.session + ":" + std::to_string(finding.sink.index) + " " +
             finding.sink.tool + " | " + finding.source_label + " | " +
             flow_class_name(finding.flow_class) + " | " + confidence + " | " +
             (finding.degraded ? "yes" : "no") + " |\n";
    }
  }
  if (!report.degraded.empty()) {
    out += "\n## Degraded stages\n\n";
    for (const DegradedMarker& marker : report.degraded) {
      out += "- " + marker.sink.session + ":" + std::to_string(marker.sink.index) + " " +
             marker.sink.tool + " [" + marker.stage + "] " + marker.reason + "\n";
    }
  }
  out += "\nEvents: " + std::to_string(report.stats.events) +
         ", sinks: " + std::to_string(report.stats.sinks) +
         ", probes: " + std::to_string(report.stats.probes) +
         ", provider calls: " + std::to_string(report.stats.provider_calls) + "\n";
  return out;
}

namespace {

bool run_is_positive(const std::vector<AuditReport>& reports, const ScenarioRecord& record,
                     bool strict_attribution) {
  for (const AuditReport& report : reports) {
    for (const Finding& finding : report.findings) {
      if (finding.degraded) continue;
      if (strict_attribution && record.expected_source) {
        std::string want = ProvenanceGraph::node_id_for(record.expected_source->first,
                                                        record.expected_source->second);
        if (finding.provenance_path.empty() || finding.provenance_path.front() != want) continue;
      }
      return true;
    }
  }
  return false;
}

}  // namespace

ScenarioOutcome audit_scenario_collect(const ScenarioRecord& record, const Policy& policy,
                                       const ScenarioOptions& options,
                                       std::vector<std::vector<AuditReport>>* run_reports) {
  ScriptedJudge empty_judge;
  ScriptedJudge scripted;
  Judge* judge = options.default_judge ? options.default_judge : &empty_judge;
  if (record.judge_script) {
    scripted = ScriptedJudge::from_file(*record.judge_script);
    judge = &scripted;
  }

  Auditor auditor(policy, AuditProviders{options.embeddings, judge});

  ScenarioOutcome outcome;
  outcome.scenario_id = record.scenario_id;
  outcome.family = record.family;
  outcome.expected_positive = record.expected_positive;
  outcome.total_runs = static_cast<int>(record.runs.size());

  std::string seed_state;
  if (record.state_in) seed_state = read_file(*record.state_in);

  for (const std::vector<std::string>& run : record.runs) {
    std::vector<AuditReport> reports;
    ProvenanceGraph graph;
    if (!seed_state.empty()) graph = ProvenanceGraph::load_state(seed_state);
    for (std::size_t i = 0; i < run.size(); ++i) {
      if (i > 0) {
        // Cross-file handoff goes through the real snapshot bytes.
        graph = ProvenanceGraph::load_state(graph.save_state());
      }
      std::vector<ToolEvent> events = parse_trace_file(run[i]);
      reports.push_back(auditor.audit(events, graph, run[i]));
    }
    if (run_is_positive(reports, record, options.strict_attribution)) ++outcome.positive_runs;
    if (run_reports) run_reports->push_back(std::move(reports));
  }

  outcome.detected = 2 * outcome.positive_runs > outcome.total_runs;
  return outcome;
}

ScenarioOutcome audit_scenario(const ScenarioRecord& record, const Policy& policy,
                               const ScenarioOptions& options) {
  return audit_scenario_collect(record, policy, options, nullptr);
}

EvalSummary evaluate(const std::vector<std::pair<bool, bool>>& expected_detected) {
  EvalSummary summary;
  for (const auto& [expected, detected] : expected_detected) {
    if (expected && detected) ++summary.tp;
    if (!expected && detected) ++summary.fp;
    if (expected && !detected) ++summary.fn;
    if (!expected && !detected) ++summary.tn;
  }
  if (summary.tp + summary.fp > 0) {
    summary.precision =
        static_cast<double>(summary.tp) / static_cast<double>(summary.tp + summary.fp);
  }
  if (summary.tp + summary.fn > 0) {
    summary.recall =
        static_cast<double>(summary.tp) / static_cast<double>(summary.tp + summary.fn);
  }
  if (summary.precision && summary.recall && (*summary.precision + *summary.recall) > 0.0) {
    summary.f1 =
        2.0 * *summary.precision * *summary.recall / (*summary.precision + *summary.recall);
  }
  return summary;
}

std::vector<ScenarioRecord> load_manifest(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& relative) { return (base / relative).string(); };

  nlohmann::json doc = nlohmann::json::parse(read_file(manifest_path), nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    raise(ErrorCode::ParseError, "manifest must be a JSON array of scenario records");
  }

  std::vector<ScenarioRecord> records;
  for (const auto& entry : doc) {
    ScenarioRecord record;
    try {
      record.scenario_id = entry.at("scenario_id").get<std::string>();
      record.family = entry.at("family").get<std::string>();
      record.expected_positive = entry.at("expected_positive").get<bool>();
      for (const auto& run : entry.at("runs")) {
        std::vector<std::string> files;
        if (run.is_string()) {
          files.push_back(resolve(run.get<std::string>()));
        } else if (run.is_array()) {
          for (const auto& file : run) files.push_back(resolve(file.get<std::string>()));
        } else {
          throw std::runtime_error("run entries must be strings or arrays of strings");
        }
        if (files.empty()) throw std::runtime_error("run entry with no trace files");
        record.runs.push_back(std::move(files));
      }
      if (record.runs.empty()) throw std::runtime_error("scenario with no runs");
      if (entry.contains("judge_script")) {
        record.judge_script = resolve(entry.at("judge_script").get<std::string>());
      }
      if (entry.contains("state_in")) {
        record.state_in = resolve(entry.at("state_in").get<std::string>());
      }
      if (entry.contains("expected_source")) {
        record.expected_source = {entry.at("expected_source").at("session").get<std::string>(),
                                  entry.at("expected_source").at("index").get<std::int64_t>()};
      }
    } catch (const std::exception& ex) {
      raise(ErrorCode::ParseError, std::string("bad scenario record: ") + ex.what());
    }
    records.push_back(std::move(record));
  }
  return records;
}

EvalResult run_eval(const std::vector<ScenarioRecord>& records, const Policy& policy,
                    const EvalOptions& options) {
  std::vector<ScenarioOutcome> outcomes(records.size());

  int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      outcomes[i] = audit_scenario(
          records[i], policy,
          ScenarioOptions{options.strict_attribution, options.default_judge, options.embeddings});
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        while (true) {
          std::size_t i = next.fetch_add(1);
          if (i >= records.size()) break;
          outcomes[i] = audit_scenario(records[i], policy,
                                       ScenarioOptions{options.strict_attribution,
                                                       options.default_judge, options.embeddings});
        }
      });
    }
    for (std::thread& worker : workers) worker.join();
  }

  EvalResult result;
  result.scenarios = std::move(outcomes);

  std::vector<std::pair<bool, bool>> overall;
  std::map<std::string, std::vector<std::pair<bool, bool>>> families;
  for (const ScenarioOutcome& outcome : result.scenarios) {
    overall.emplace_back(outcome.expected_positive, outcome.detected);
    families[outcome.family].emplace_back(outcome.expected_positive, outcome.detected);
  }
  result.overall = evaluate(overall);
  for (const auto& [family, pairs] : families) result.per_family[family] = evaluate(pairs);
  return result;
}

double round3(double value) { return std::round(value * 1000.0) / 1000.0; }

std::string metric_to_string(const std::optional<double>& value) {
  if (!value) return "--";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f", *value);
  return buffer;
}

namespace {

ordered_json summary_json(const EvalSummary& summary) {
  ordered_json out;
  out["tp"] = summary.tp;
  out["fp"] = summary.fp;
  out["fn"] = summary.fn;
  out["tn"] = summary.tn;
  auto metric = [](const std::optional<double>& value) -> ordered_json {
    if (!value) return "--";
    return round3(*value);
  };
  out["precision"] = metric(summary.precision);
  out["recall"] = metric(summary.recall);
  out["f1"] = metric(summary.f1);
  return out;
}

}  // namespace

std::string eval_to_json(const EvalResult& result) {
  ordered_json doc;
  doc["summary"] = summary_json(result.overall);
  ordered_json families = ordered_json::object();
  for (const auto& [family, summary] : result.per_family) {
    families[family] = summary_json(summary);
  }
  doc["families"] = std::move(families);
  ordered_json scenarios = ordered_json::array();
  for (const ScenarioOutcome& outcome : result.scenarios) {
    ordered_json entry;
    entry["scenario_id"] = outcome.scenario_id;
    entry["family"] = outcome.family;
    entry["expected_positive"] = outcome.expected_positive;
    entry["detected"] = outcome.detected;
    entry["positive_runs"] = outcome.positive_runs;
    entry["total_runs"] = outcome.total_runs;
    scenarios.push_back(std::move(entry));
  }
  doc["scenarios"] = std::move(scenarios);
  return doc.dump(2) + "\n";
}

std::string eval_to_markdown(const EvalResult& result) {
  std::string out;
  out += "# Evaluation summary\n\n";
  out += "| scope | tp | fp | fn | tn | precision | recall | f1 |\n";
  out += "|---|---|---|---|---|---|---|---|\n";
  auto row = [&](const std::string& scope, const EvalSummary& summary) {
    out += "| " + scope + " | " + std::to_string(summary.tp) + " | " + std::to_string(summary.fp) +
           " | " + std::to_string(summary.fn) + " | " + std::to_string(summary.tn) + " | " +
           metric_to_string(summary.precision) + " | " + metric_to_string(summary.recall) + " | " +
           metric_to_string(summary.f1) + " |\n";
  };
  row("overall", result.overall);
  for (const auto& [family, summary] : result.per_family) row(family, summary);
  out += "\nScenarios: " + std::to_string(result.scenarios.size()) + "\n";
  return out;
}

}  // namespace provaudit
