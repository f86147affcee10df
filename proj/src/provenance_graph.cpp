#include "provaudit/provenance_graph.hpp"

#include <algorithm>
#include <deque>
#include <tuple>

#include <json.hpp>

#include "provaudit/errors.hpp"
#include "provaudit/text.hpp"

namespace provaudit {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string digest_event(const ToolEvent& event) {
  std::string material;
  for (const auto& [name, value] : event.args) {
    material += name;
    material.push_back('\x1f');
    material += value;
    material.push_back('\x1f');
  }
  material.push_back('\x1e');
  material += event.result;
  return fnv1a64_hex(material);
}

}  // namespace

bool GraphEdge::operator<(const GraphEdge& other) const {
  return std::tie(from_node, to_node, label_id, tier, confidence) <
         std::tie(other.from_node, other.to_node, other.label_id, other.tier, other.confidence);
}

std::string ProvenanceGraph::node_id_for(const std::string& session_id, std::int64_t index) {
  return session_id + ":" + std::to_string(index);
}

std::string ProvenanceGraph::derive_record_key(const ToolEvent& event, EventKind role) {
  if (auto explicit_key = event.arg("record_key")) return *explicit_key;
  if (role == EventKind::MemoryWrite) return "h:" + fnv1a64_hex(event.joined_args());
  return "h:" + fnv1a64_hex(event.result);
}

const GraphNode* ProvenanceGraph::find_node(const std::string& node_id) const {
  auto it = node_lookup_.find(node_id);
  return it == node_lookup_.end() ? nullptr : &nodes_[it->second];
}

const GraphNode& ProvenanceGraph::node(const std::string& node_id) const {
  const GraphNode* found = find_node(node_id);
  if (!found) raise(ErrorCode::UnknownNode, "no node '" + node_id + "'");
  return *found;
}

GraphNode& ProvenanceGraph::mutable_node(const std::string& node_id) {
  auto it = node_lookup_.find(node_id);
  if (it == node_lookup_.end()) raise(ErrorCode::UnknownNode, "no node '" + node_id + "'");
  return nodes_[it->second];
}

std::vector<const GraphNode*> ProvenanceGraph::nodes_in_order() const {
  std::vector<const GraphNode*> out;
  out.reserve(nodes_.size());
  for (const auto& node : nodes_) out.push_back(&node);
  return out;
}

void ProvenanceGraph::add_edge(GraphEdge edge) {
  if (!edge_index_.insert(edge).second) return;
  successors_[edge.from_node].insert(edge.to_node);
  predecessors_[edge.to_node].insert(edge.from_node);
  edges_.push_back(std::move(edge));
}

std::string ProvenanceGraph::record_event(const ToolEvent& event, const KindSet& kinds,
                                          std::optional<std::string> canary) {
  std::int64_t expected = 0;
  if (auto it = next_index_.find(event.session_id); it != next_index_.end()) {
    expected = it->second;
  }
  if (event.index != expected) {
    raise(ErrorCode::OutOfOrderEvent, "session '" + event.session_id + "' expected index " +
                                          std::to_string(expected) + ", got " +
                                          std::to_string(event.index));
  }

  GraphNode node;
  node.node_id = node_id_for(event.session_id, event.index);
  node.session_id = event.session_id;
  node.event_index = event.index;
  node.tool_name = event.tool_name;
  node.args_digest = digest_event(event);
  node.kinds = kinds;

  const bool is_source = kinds.count(EventKind::Source) > 0;
  if (is_source) {
    TaintLabel label;
    label.id = "L:" + node.node_id;
    label.source_session = event.session_id;
    label.source_index = event.index;
    label.origin_tool = event.tool_name;
    label.confidence = 1.0;
    label.canary = std::move(canary);
    node.taint_set.insert(label.id);
    node.introduced.insert(label.id);
    registry_.emplace(label.id, std::move(label));
  } else {
    // Context accumulation: every label seen earlier in the session reaches
    // this event.
    node.taint_set = session_taint_union_[event.session_id];
  }

  std::size_t position = nodes_.size();
  nodes_.push_back(std::move(node));
  const GraphNode& placed = nodes_[position];
  node_lookup_[placed.node_id] = position;

  for (std::size_t earlier : session_nodes_[event.session_id]) {
    const GraphNode& from = nodes_[earlier];
    for (const std::string& label_id : from.taint_set) {
      add_edge({from.node_id, placed.node_id, label_id, "lineage", 1.0});
    }
  }

  session_nodes_[event.session_id].push_back(position);
  next_index_[event.session_id] = event.index + 1;
  auto& session_union = session_taint_union_[event.session_id];
  session_union.insert(placed.taint_set.begin(), placed.taint_set.end());
  return placed.node_id;
}

std::set<std::string> ProvenanceGraph::annotate_memory_write(const std::string& node_id,
                                                             const std::string& record_key) {
  GraphNode& writer = mutable_node(node_id);
  if (!writer.kinds.count(EventKind::MemoryWrite)) {
    raise(ErrorCode::NotAMemoryWrite, "node '" + node_id + "' is not a memory write");
  }
  annotations_[record_key] = MemoryAnnotation{writer.taint_set, node_id};
  return writer.taint_set;
}

std::set<std::string> ProvenanceGraph::rehydrate_on_read(const std::string& node_id,
                                                         const std::string& record_key) {
  GraphNode& reader = mutable_node(node_id);
  if (!reader.kinds.count(EventKind::MemoryRead)) {
    raise(ErrorCode::NotAMemoryRead, "node '" + node_id + "' is not a memory read");
  }
  auto it = annotations_.find(record_key);
  if (it == annotations_.end()) return {};

  const MemoryAnnotation& annotation = it->second;
  for (const std::string& label_id : annotation.labels) {
    reader.taint_set.insert(label_id);
    reader.introduced.insert(label_id);
    double confidence = 1.0;
    if (auto label = registry_.find(label_id); label != registry_.end()) {
      confidence = label->second.confidence;
    }
    if (find_node(annotation.writer_node)) {
      add_edge({annotation.writer_node, reader.node_id, label_id, "rehydrate", confidence});
    }
  }
  session_taint_union_[reader.session_id].insert(annotation.labels.begin(),
                                                 annotation.labels.end());
  return annotation.labels;
}

std::vector<LineageEntry> ProvenanceGraph::lineage_for_sink(const std::string& sink_node_id) const {
  const GraphNode& sink = node(sink_node_id);
  if (!sink.kinds.count(EventKind::Sink)) {
    raise(ErrorCode::NotASink, "node '" + sink_node_id + "' is not a sink");
  }

  // Nodes with a directed path (>= 1 edge) into the sink.
  std::set<std::string> reaches_sink;
  {
    std::deque<std::string> frontier{sink_node_id};
    while (!frontier.empty()) {
      std::string current = frontier.front();
      frontier.pop_front();
      auto preds = predecessors_.find(current);
      if (preds == predecessors_.end()) continue;
      for (const std::string& pred : preds->second) {
        if (reaches_sink.insert(pred).second) frontier.push_back(pred);
      }
    }
  }

  auto chrono_order = [this](const std::string& lhs, const std::string& rhs) {
    const GraphNode& a = *find_node(lhs);
    const GraphNode& b = *find_node(rhs);
    return std::tie(a.session_id, a.event_index) < std::tie(b.session_id, b.event_index);
  };

  auto shortest_path = [&](const std::string& origin) {
    std::map<std::string, std::string> parent;
    std::deque<std::string> frontier{origin};
    std::set<std::string> visited{origin};
    while (!frontier.empty()) {
      std::string current = frontier.front();
      frontier.pop_front();
      if (current == sink_node_id) break;
      auto next = successors_.find(current);
      if (next == successors_.end()) continue;
      std::vector<std::string> ordered(next->second.begin(), next->second.end());
      std::sort(ordered.begin(), ordered.end(), chrono_order);
      for (const std::string& succ : ordered) {
        if (visited.insert(succ).second) {
          parent[succ] = current;
          frontier.push_back(succ);
        }
      }
    }
    std::vector<std::string> path;
    std::string cursor = sink_node_id;
    path.push_back(cursor);
    while (cursor != origin) {
      cursor = parent.at(cursor);
      path.push_back(cursor);
    }
    std::reverse(path.begin(), path.end());
    return path;
  };

  std::vector<const TaintLabel*> labels;
  for (const auto& [id, label] : registry_) labels.push_back(&label);
  std::sort(labels.begin(), labels.end(), [](const TaintLabel* a, const TaintLabel* b) {
    return std::tie(a->source_session, a->source_index, a->id) <
           std::tie(b->source_session, b->source_index, b->id);
  });

  std::vector<LineageEntry> entries;
  for (const TaintLabel* label : labels) {
    std::string origin = node_id_for(label->source_session, label->source_index);
    if (origin == sink_node_id) continue;
    if (!find_node(origin) || !reaches_sink.count(origin)) continue;

    LineageEntry entry;
    entry.label = *label;
    entry.path = shortest_path(origin);
    for (auto it = entry.path.rbegin(); it != entry.path.rend(); ++it) {
      if (find_node(*it)->introduced.count(label->id)) {
        entry.intro_node = *it;
        break;
      }
    }
    if (entry.intro_node.empty()) entry.intro_node = origin;
    entry.crossed_memory = entry.intro_node != origin;
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::string ProvenanceGraph::save_state() const {
  ordered_json doc;
  doc["version"] = kSnapshotVersion;

  std::vector<const GraphNode*> sorted_nodes;
  for (const auto& node : nodes_) sorted_nodes.push_back(&node);
  std::sort(sorted_nodes.begin(), sorted_nodes.end(), [](const GraphNode* a, const GraphNode* b) {
    return std::tie(a->session_id, a->event_index) < std::tie(b->session_id, b->event_index);
  });

  ordered_json nodes = ordered_json::array();
  for (const GraphNode* node : sorted_nodes) {
    ordered_json entry;
    entry["node_id"] = node->node_id;
    entry["session_id"] = node->session_id;
    entry["event_index"] = node->event_index;
    entry["tool_name"] = node->tool_name;
    entry["args_digest"] = node->args_digest;
    ordered_json kinds = ordered_json::array();
    for (EventKind kind : node->kinds) kinds.push_back(event_kind_name(kind));
    entry["kinds"] = std::move(kinds);
    entry["taint_set"] = node->taint_set;
    entry["introduced"] = node->introduced;
    nodes.push_back(std::move(entry));
  }
  doc["nodes"] = std::move(nodes);

  std::vector<GraphEdge> sorted_edges = edges_;
  std::sort(sorted_edges.begin(), sorted_edges.end());
  ordered_json edges = ordered_json::array();
  for (const GraphEdge& edge : sorted_edges) {
    ordered_json entry;
    entry["from_node"] = edge.from_node;
    entry["to_node"] = edge.to_node;
    entry["label_id"] = edge.label_id;
    entry["tier"] = edge.tier;
    entry["confidence"] = edge.confidence;
    edges.push_back(std::move(entry));
  }
  doc["edges"] = std::move(edges);

  ordered_json registry = ordered_json::array();
  for (const auto& [id, label] : registry_) {
    ordered_json entry;
    entry["id"] = label.id;
    entry["source_session"] = label.source_session;
    entry["source_index"] = label.source_index;
    entry["origin_tool"] = label.origin_tool;
    entry["confidence"] = label.confidence;
    if (label.canary) entry["canary"] = *label.canary;
    registry.push_back(std::move(entry));
  }
  doc["taint_registry"] = std::move(registry);

  ordered_json annotations = ordered_json::object();
  for (const auto& [key, annotation] : annotations_) {
    ordered_json entry;
    entry[kMemoryTaintKey] = annotation.labels;
    entry["writer_node"] = annotation.writer_node;
    annotations[key] = std::move(entry);
  }
  doc["memory_annotations"] = std::move(annotations);

  return doc.dump();
}

ProvenanceGraph ProvenanceGraph::load_state(const std::string& bytes) {
  ordered_json doc = ordered_json::parse(bytes, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    raise(ErrorCode::CorruptSnapshot, "snapshot is not a JSON object");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer() ||
      doc["version"].get<int>() != kSnapshotVersion) {
    raise(ErrorCode::VersionMismatch,
          "expected snapshot version " + std::to_string(kSnapshotVersion));
  }

  ProvenanceGraph graph;
  try {
    for (const auto& entry : doc.at("taint_registry")) {
      TaintLabel label;
      label.id = entry.at("id").get<std::string>();
      label.source_session = entry.at("source_session").get<std::string>();
      label.source_index = entry.at("source_index").get<std::int64_t>();
      label.origin_tool = entry.at("origin_tool").get<std::string>();
      label.confidence = entry.at("confidence").get<double>();
      if (entry.contains("canary")) label.canary = entry.at("canary").get<std::string>();
      if (!graph.registry_.emplace(label.id, label).second) {
        raise(ErrorCode::CorruptSnapshot, "duplicate label '" + label.id + "'");
      }
    }

    for (const auto& entry : doc.at("nodes")) {
      GraphNode node;
      node.node_id = entry.at("node_id").get<std::string>();
      node.session_id = entry.at("session_id").get<std::string>();
      node.event_index = entry.at("event_index").get<std::int64_t>();
      node.tool_name = entry.at("tool_name").get<std::string>();
      node.args_digest = entry.at("args_digest").get<std::string>();
      for (const auto& kind : entry.at("kinds")) {
        node.kinds.insert(event_kind_from_name(kind.get<std::string>()));
      }
      for (const auto& label : entry.at("taint_set")) {
        node.taint_set.insert(label.get<std::string>());
      }
      for (const auto& label : entry.at("introduced")) {
        node.introduced.insert(label.get<std::string>());
      }
      if (node.node_id != node_id_for(node.session_id, node.event_index)) {
        raise(ErrorCode::CorruptSnapshot, "node id '" + node.node_id + "' does not match event");
      }
      for (const std::string& label_id : node.taint_set) {
        if (!graph.registry_.count(label_id)) {
          raise(ErrorCode::CorruptSnapshot, "node '" + node.node_id +
                                                "' references unknown label '" + label_id + "'");
        }
      }
      for (const std::string& label_id : node.introduced) {
        if (!node.taint_set.count(label_id)) {
          raise(ErrorCode::CorruptSnapshot,
                "node '" + node.node_id + "' introduces label outside its taint set");
        }
      }
      if (graph.node_lookup_.count(node.node_id)) {
        raise(ErrorCode::CorruptSnapshot, "duplicate node '" + node.node_id + "'");
      }
      std::size_t position = graph.nodes_.size();
      graph.nodes_.push_back(std::move(node));
      const GraphNode& placed = graph.nodes_[position];
      graph.node_lookup_[placed.node_id] = position;
      graph.session_nodes_[placed.session_id].push_back(position);
      auto& next = graph.next_index_[placed.session_id];
      next = std::max(next, placed.event_index + 1);
      graph.session_taint_union_[placed.session_id].insert(placed.taint_set.begin(),
                                                           placed.taint_set.end());
    }

    for (const auto& entry : doc.at("edges")) {
      GraphEdge edge;
      edge.from_node = entry.at("from_node").get<std::string>();
      edge.to_node = entry.at("to_node").get<std::string>();
      edge.label_id = entry.at("label_id").get<std::string>();
      edge.tier = entry.at("tier").get<std::string>();
      edge.confidence = entry.at("confidence").get<double>();
      if (!graph.node_lookup_.count(edge.from_node) || !graph.node_lookup_.count(edge.to_node)) {
        raise(ErrorCode::CorruptSnapshot, "edge references unknown node");
      }
      if (!graph.registry_.count(edge.label_id)) {
        raise(ErrorCode::CorruptSnapshot, "edge references unknown label '" + edge.label_id + "'");
      }
      graph.add_edge(std::move(edge));
    }

    for (const auto& [key, value] : doc.at("memory_annotations").items()) {
      MemoryAnnotation annotation;
      for (const auto& label : value.at(kMemoryTaintKey)) {
        std::string label_id = label.get<std::string>();
        if (!graph.registry_.count(label_id)) {
          raise(ErrorCode::CorruptSnapshot,
                "annotation '" + key + "' references unknown label '" + label_id + "'");
        }
        annotation.labels.insert(std::move(label_id));
      }
      annotation.writer_node = value.at("writer_node").get<std::string>();
      if (!graph.node_lookup_.count(annotation.writer_node)) {
        raise(ErrorCode::CorruptSnapshot, "annotation '" + key + "' references unknown writer");
      }
      graph.annotations_[key] = std::move(annotation);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    raise(ErrorCode::CorruptSnapshot, ex.what());
  }
  return graph;
}

}  // namespace provaudit
