#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "provaudit/audit_engine.hpp"
#include "provaudit/errors.hpp"
#include "provaudit/suite_generator.hpp"

namespace {

namespace fs = std::filesystem;
using namespace provaudit;

constexpr int kExitClean = 0;
constexpr int kExitError = 1;
constexpr int kExitFindings = 3;

struct ProviderFlags {
  std::string embeddings = "local";
  int embeddings_timeout_ms = 10000;
  std::string judge;
};

std::unique_ptr<EmbeddingProvider> make_embeddings(const ProviderFlags& flags) {
  if (flags.embeddings == "local") return std::make_unique<HashedBagProvider>();
  RemoteProviderConfig config;
  config.endpoint = flags.embeddings;
  config.timeout_ms = flags.embeddings_timeout_ms;
  return std::make_unique<RemoteEmbeddingProvider>(config);
}

std::unique_ptr<Judge> make_judge(const ProviderFlags& flags) {
  if (flags.judge.empty()) return nullptr;
  const std::string script_prefix = "script:";
  if (flags.judge.rfind(script_prefix, 0) == 0) {
    return std::make_unique<ScriptedJudge>(
        ScriptedJudge::from_file(flags.judge.substr(script_prefix.size())));
  }
  return std::make_unique<HttpJudge>(HttpJudgeConfig{flags.judge, 30000});
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_file(out_path, content);
  }
}

std::vector<std::string> trace_files_for(const std::string& trace_arg) {
  if (!fs::is_directory(trace_arg)) return {trace_arg};
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(trace_arg)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) raise(ErrorCode::IoError, "no .jsonl traces under '" + trace_arg + "'");
  return files;
}

int run_audit(const std::string& trace_arg, const std::string& policy_path,
              const std::string& state_in, const std::string& state_out,
              const ProviderFlags& flags, const std::string& report_format,
              const std::string& out_path) {
  Policy policy = policy_path.empty() ? Policy::defaults() : parse_policy_file(policy_path);
  auto embeddings = make_embeddings(flags);
  auto judge = make_judge(flags);
  Auditor auditor(policy, AuditProviders{embeddings.get(), judge.get()});

  std::vector<std::string> files = trace_files_for(trace_arg);
  if (!state_out.empty() && files.size() > 1) {
    raise(ErrorCode::IoError, "--state-out needs a single trace file, not a directory");
  }
  std::string state_bytes;
  if (!state_in.empty()) state_bytes = read_file(state_in);

  // Directory traces are independent executions: each starts from the
  // restored snapshot (if any), never from a sibling file's state.
  AuditReport combined;
  combined.trace_ref = trace_arg;
  for (const std::string& file : files) {
    ProvenanceGraph graph;
    if (!state_bytes.empty()) graph = ProvenanceGraph::load_state(state_bytes);
    AuditReport report = auditor.audit(parse_trace_file(file), graph, file);
    combined.findings.insert(combined.findings.end(), report.findings.begin(),
                             report.findings.end());
    combined.degraded.insert(combined.degraded.end(), report.degraded.begin(),
                             report.degraded.end());
    combined.stats.events += report.stats.events;
    combined.stats.sinks += report.stats.sinks;
    combined.stats.probes += report.stats.probes;
    combined.stats.provider_calls += report.stats.provider_calls;
    combined.stats.wall_ms += report.stats.wall_ms;
    if (!state_out.empty()) write_file(state_out, graph.save_state());
  }

  emit(report_format == "md" ? report_to_markdown(combined) : report_to_json(combined), out_path);
  return combined.findings.empty() ? kExitClean : kExitFindings;
}

int run_eval_command(const std::string& manifest_path, const std::string& policy_path,
                     const ProviderFlags& flags, bool strict, int jobs,
                     const std::string& report_format, const std::string& out_path) {
  Policy policy = policy_path.empty() ? Policy::defaults() : parse_policy_file(policy_path);
  auto embeddings = make_embeddings(flags);
  auto judge = make_judge(flags);

  EvalOptions options;
  options.strict_attribution = strict;
  options.default_judge = judge.get();
  options.embeddings = embeddings.get();
  options.jobs = jobs;

  EvalResult result = run_eval(load_manifest(manifest_path), policy, options);
  emit(report_format == "md" ? eval_to_markdown(result) : eval_to_json(result), out_path);
  return kExitClean;
}

int run_graph(const std::string& trace_arg, const std::string& policy_path,
              const std::string& export_path) {
  Policy policy = policy_path.empty() ? Policy::defaults() : parse_policy_file(policy_path);
  ProvenanceGraph graph;
  for (const std::string& file : trace_files_for(trace_arg)) {
    for (const ToolEvent& event : parse_trace_file(file)) {
      KindSet kinds = classify(event, policy);
      std::optional<std::string> canary;
      if (kinds.count(EventKind::Source)) canary = find_canary(event.result);
      std::string node_id = graph.record_event(event, kinds, std::move(canary));
      if (kinds.count(EventKind::MemoryRead)) {
        graph.rehydrate_on_read(node_id,
                                ProvenanceGraph::derive_record_key(event, EventKind::MemoryRead));
      }
      if (kinds.count(EventKind::MemoryWrite)) {
        graph.annotate_memory_write(
            node_id, ProvenanceGraph::derive_record_key(event, EventKind::MemoryWrite));
      }
    }
  }
  emit(graph.save_state() + "\n", export_path);
  return kExitClean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline provenance auditor for tool-using agent traces"};
  app.require_subcommand(1);

  ProviderFlags flags;
  std::string trace_arg;
  std::string policy_path;
  std::string state_in;
  std::string state_out;
  std::string report_format = "json";
  std::string out_path;
  std::string manifest_path;
  std::string export_path;
  std::string suite_out;
  bool strict = false;
  int jobs = 1;
  std::uint64_t seed = 0;

  CLI::App* audit = app.add_subcommand("audit", "Audit a trace file or directory");
  audit->add_option("--trace", trace_arg, "Trace file or directory of .jsonl files")->required();
  audit->add_option("--policy", policy_path, "Policy YAML (defaults to the built-in policy)");
  audit->add_option("--state-in", state_in, "State snapshot to restore before replay");
  audit->add_option("--state-out", state_out, "Write the final state snapshot here");
  audit->add_option("--judge", flags.judge, "Judge endpoint URL or script:<file>");
  audit->add_option("--embeddings", flags.embeddings, "'local' or an embedding endpoint URL");
  audit->add_option("--embeddings-timeout-ms", flags.embeddings_timeout_ms,
                    "Remote embedding timeout");
  audit->add_option("--report", report_format, "json or md")
      ->check(CLI::IsMember({"json", "md"}));
  audit->add_option("--out", out_path, "Write the report here instead of stdout");

  CLI::App* eval = app.add_subcommand("eval", "Score a scenario manifest");
  eval->add_option("--scenarios", manifest_path, "Scenario manifest JSON")->required();
  eval->add_option("--policy", policy_path, "Policy YAML")->required();
  eval->add_option("--judge", flags.judge, "Fallback judge URL or script:<file>");
  eval->add_option("--embeddings", flags.embeddings, "'local' or an embedding endpoint URL");
  eval->add_option("--embeddings-timeout-ms", flags.embeddings_timeout_ms,
                   "Remote embedding timeout");
  eval->add_option("--report", report_format, "json or md")->check(CLI::IsMember({"json", "md"}));
  eval->add_option("--out", out_path, "Write the summary here instead of stdout");
  eval->add_flag("--strict-attribution", strict,
                 "Require findings to name the scenario's ground-truth source");
  eval->add_option("--jobs", jobs, "Parallel scenario workers")->check(CLI::PositiveNumber);

  CLI::App* graph = app.add_subcommand("graph", "Build and export the provenance graph");
  graph->add_option("--trace", trace_arg, "Trace file or directory")->required();
  graph->add_option("--policy", policy_path, "Policy YAML");
  graph->add_option("--export", export_path, "Write the graph JSON here")->required();

  CLI::App* gen = app.add_subcommand("gen-suite", "Generate the synthetic scenario pack");
  gen->add_option("--seed", seed, "Generator seed")->required();
  gen->add_option("--out", suite_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(audit)) {
      return run_audit(trace_arg, policy_path, state_in, state_out, flags, report_format,
                       out_path);
    }
    if (app.got_subcommand(eval)) {
      return run_eval_command(manifest_path, policy_path, flags, strict, jobs, report_format,
                              out_path);
    }
    if (app.got_subcommand(graph)) {
      return run_graph(trace_arg, policy_path, export_path);
    }
    if (app.got_subcommand(gen)) {
      SuiteLayout layout = generate_mini_suite(seed, suite_out);
      std::cout << "wrote " << layout.scenario_count << " scenarios to " << suite_out << "\n";
      return kExitClean;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
