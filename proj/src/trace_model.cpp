#include "provaudit/trace_model.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "provaudit/errors.hpp"

namespace provaudit {

namespace {

using ordered_json = nlohmann::ordered_json;

const std::set<std::string> kDefaultSources = {
    // web search
    "tavily_search", "web_search", "web_search_tool", "SerperDevTool",
    // http / document retrieval
    "scrape_url", "document_search", "retrieve_document", "retrieve_documents",
    // memory / RAG
    "store_document", "store_in_memory", "memory_recall", "memory_retrieve",
    // mail
    "read_email",
    // trusted / internal
    "internal_kb_search", "internal_file_read", "internal_kb",
    // framework-specific search surfaces
    "search_docs", "knowledge_search", "search_tool", "research_search",
    // browser
    "web_browse", "browser_open", "browser_extract"};

const std::set<std::string> kDefaultSinks = {
    // code execution
    "execute_code", "execute_python", "execute_setup", "python_repl_tool", "PythonInterpreter",
    // http / external
    "http_exfil", "http_post", "data_archive_api", "webhook_post", "cloud_storage_upload",
    // email
    "send_email",
    // file write
    "write_report", "FileWriterTool",
    // workflow / business
    "calendar_create_event", "crm_update_lead", "git_push_changes", "ticket_create",
    "slack_post_message", "notebook_publish"};

constexpr const char* kRetrievalPlaceholder = "No relevant information found.";

double threshold_field(const YAML::Node& thresholds, const char* key, double fallback) {
  if (!thresholds[key]) return fallback;
  double value;
  try {
    value = thresholds[key].as<double>();
  } catch (const YAML::Exception&) {
    raise(ErrorCode::ParseError, std::string("threshold '") + key + "' is not a number");
  }
  if (value < 0.0 || value > 1.0) {
    raise(ErrorCode::InvalidThreshold,
          std::string(key) + " = " + std::to_string(value) + " is outside [0, 1]");
  }
  return value;
}

std::set<std::string> string_set_field(const YAML::Node& node, const char* key) {
  std::set<std::string> out;
  if (!node[key]) return out;
  const YAML::Node& seq = node[key];
  if (!seq.IsSequence()) {
    raise(ErrorCode::ParseError, std::string("'") + key + "' must be a sequence of tool names");
  }
  for (const auto& item : seq) {
    try {
      out.insert(item.as<std::string>());
    } catch (const YAML::Exception&) {
      raise(ErrorCode::ParseError, std::string("'") + key + "' entries must be scalars");
    }
  }
  return out;
}

}  // namespace

std::optional<std::string> ToolEvent::arg(std::string_view name) const {
  for (const auto& [key, value] : args) {
    if (key == name) return value;
  }
  return std::nullopt;
}

std::string ToolEvent::joined_args() const {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += args[i].second;
  }
  return out;
}

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::Source: return "source";
    case EventKind::Sink: return "sink";
    case EventKind::MemoryWrite: return "memory_write";
    case EventKind::MemoryRead: return "memory_read";
    case EventKind::Other: return "other";
  }
  return "other";
}

EventKind event_kind_from_name(std::string_view name) {
  if (name == "source") return EventKind::Source;
  if (name == "sink") return EventKind::Sink;
  if (name == "memory_write") return EventKind::MemoryWrite;
  if (name == "memory_read") return EventKind::MemoryRead;
  if (name == "other") return EventKind::Other;
  raise(ErrorCode::ParseError, "unknown event kind '" + std::string(name) + "'");
}

Policy Policy::defaults() {
  Policy policy;
  policy.sources = kDefaultSources;
  policy.sinks = kDefaultSinks;
  return policy;
}

const std::set<std::string>& Policy::default_sources() { return kDefaultSources; }
const std::set<std::string>& Policy::default_sinks() { return kDefaultSinks; }

std::string Policy::placeholder_for(const std::string& tool_name) const {
  auto it = placeholders.find(tool_name);
  if (it != placeholders.end()) return it->second;
  if (sources.count(tool_name) || memory_reads.count(tool_name)) return kRetrievalPlaceholder;
  return "";
}

KindSet classify_tool(const std::string& tool_name, const Policy& policy) {
  KindSet kinds;
  if (policy.sources.count(tool_name)) kinds.insert(EventKind::Source);
  if (policy.sinks.count(tool_name)) kinds.insert(EventKind::Sink);
  if (policy.memory_writes.count(tool_name)) kinds.insert(EventKind::MemoryWrite);
  if (policy.memory_reads.count(tool_name)) kinds.insert(EventKind::MemoryRead);
  if (kinds.empty()) kinds.insert(EventKind::Other);
  return kinds;
}

KindSet classify(const ToolEvent& event, const Policy& policy) {
  return classify_tool(event.tool_name, policy);
}

std::vector<ToolEvent> parse_trace(std::istream& input) {
  struct SessionBucket {
    std::vector<ToolEvent> events;
    std::set<std::int64_t> seen;
  };
  std::vector<std::string> session_order;
  std::map<std::string, SessionBucket> buckets;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(input, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    ordered_json record = ordered_json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      raise(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + " is not a JSON object");
    }

    ToolEvent event;
    try {
      event.session_id = record.at("session_id").get<std::string>();
      event.index = record.at("index").get<std::int64_t>();
      event.tool_name = record.at("tool_name").get<std::string>();
      const auto& args = record.at("args");
      if (!args.is_object()) throw std::runtime_error("args must be an object");
      for (const auto& [key, value] : args.items()) {
        if (!value.is_string()) throw std::runtime_error("argument values must be strings");
        event.args.emplace_back(key, value.get<std::string>());
      }
      event.result = record.at("result").get<std::string>();
      if (record.contains("timestamp") && !record.at("timestamp").is_null()) {
        event.timestamp = record.at("timestamp").get<std::string>();
      }
    } catch (const std::exception& ex) {
      raise(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (event.index < 0) {
      raise(ErrorCode::MalformedLine,
            "line " + std::to_string(line_no) + ": negative index " + std::to_string(event.index));
    }
    if (event.tool_name.empty()) {
      raise(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": empty tool_name");
    }

    auto [it, inserted] = buckets.try_emplace(event.session_id);
    if (inserted) session_order.push_back(event.session_id);
    if (!it->second.seen.insert(event.index).second) {
      raise(ErrorCode::DuplicateIndex,
            "session '" + event.session_id + "' index " + std::to_string(event.index));
    }
    it->second.events.push_back(std::move(event));
  }

  std::vector<ToolEvent> out;
  for (const auto& session : session_order) {
    auto& bucket = buckets.at(session);
    std::sort(bucket.events.begin(), bucket.events.end(),
              [](const ToolEvent& a, const ToolEvent& b) { return a.index < b.index; });
    std::int64_t expected = 0;
    for (auto& event : bucket.events) {
      if (event.index != expected) {
        raise(ErrorCode::GapInIndices, "session '" + session + "' expected index " +
                                           std::to_string(expected) + ", found " +
                                           std::to_string(event.index));
      }
      ++expected;
      out.push_back(std::move(event));
    }
  }
  return out;
}

std::vector<ToolEvent> parse_trace_text(const std::string& text) {
  std::istringstream stream(text);
  return parse_trace(stream);
}

std::vector<ToolEvent> parse_trace_file(const std::string& path) {
  std::ifstream stream(path);
  if (!stream) raise(ErrorCode::IoError, "cannot open trace file '" + path + "'");
  return parse_trace(stream);
}

std::string serialize_trace(const std::vector<ToolEvent>& events) {
  std::string out;
  for (const auto& event : events) {
    ordered_json record;
    record["session_id"] = event.session_id;
    record["index"] = event.index;
    record["tool_name"] = event.tool_name;
    ordered_json args = ordered_json::object();
    for (const auto& [key, value] : event.args) args[key] = value;
    record["args"] = std::move(args);
    record["result"] = event.result;
    if (event.timestamp) record["timestamp"] = *event.timestamp;
    out += record.dump();
    out.push_back('\n');
  }
  return out;
}

Policy parse_policy(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& ex) {
    raise(ErrorCode::ParseError, std::string("invalid policy YAML: ") + ex.what());
  }
  if (root.IsNull() || !root.IsDefined()) return Policy::defaults();
  if (!root.IsMap()) raise(ErrorCode::ParseError, "policy document must be a mapping");

  Policy policy = Policy::defaults();
  if (root["sources"]) policy.sources = string_set_field(root, "sources");
  if (root["sinks"]) policy.sinks = string_set_field(root, "sinks");
  policy.memory_writes = string_set_field(root, "memory_writes");
  policy.memory_reads = string_set_field(root, "memory_reads");
  policy.trusted_sources = string_set_field(root, "trusted_sources");

  if (root["thresholds"]) {
    const YAML::Node& thresholds = root["thresholds"];
    if (!thresholds.IsMap()) raise(ErrorCode::ParseError, "'thresholds' must be a mapping");
    ThresholdProfile defaults;
    policy.thresholds.string_match = threshold_field(thresholds, "string_match", defaults.string_match);
    policy.thresholds.implicit_string =
        threshold_field(thresholds, "implicit_string", defaults.implicit_string);
    policy.thresholds.semantic = threshold_field(thresholds, "semantic", defaults.semantic);
    policy.thresholds.rag_semantic =
        threshold_field(thresholds, "rag_semantic", defaults.rag_semantic);
    policy.thresholds.coverage = threshold_field(thresholds, "coverage", defaults.coverage);
    policy.thresholds.safe_semantic =
        threshold_field(thresholds, "safe_semantic", defaults.safe_semantic);
  }

  if (root["chunk_sentences"]) {
    int value;
    try {
      value = root["chunk_sentences"].as<int>();
    } catch (const YAML::Exception&) {
      raise(ErrorCode::ParseError, "'chunk_sentences' must be an integer");
    }
    if (value < 1) raise(ErrorCode::ParseError, "'chunk_sentences' must be positive");
    policy.chunk_sentences = value;
  }

  if (root["placeholders"]) {
    const YAML::Node& placeholders = root["placeholders"];
    if (!placeholders.IsMap()) raise(ErrorCode::ParseError, "'placeholders' must be a mapping");
    for (const auto& entry : placeholders) {
      try {
        policy.placeholders[entry.first.as<std::string>()] = entry.second.as<std::string>();
      } catch (const YAML::Exception&) {
        raise(ErrorCode::ParseError, "'placeholders' entries must map tool names to text");
      }
    }
  }
  return policy;
}

Policy parse_policy_file(const std::string& path) { return parse_policy(read_file(path)); }

std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) raise(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream out;
  out << stream.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream stream(path, std::ios::binary | std::ios::trunc);
  if (!stream) raise(ErrorCode::IoError, "cannot write '" + path + "'");
  stream << content;
  if (!stream) raise(ErrorCode::IoError, "short write to '" + path + "'");
}

}  // namespace provaudit
