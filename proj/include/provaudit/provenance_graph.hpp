#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "provaudit/trace_model.hpp"

namespace provaudit {

/// Metadata key under which taint label ids attach to persisted memory
/// records.
inline constexpr const char* kMemoryTaintKey = "_nt_taint";
inline constexpr int kSnapshotVersion = 1;

struct GraphNode {
  std::string node_id;
  std::string session_id;
  std::int64_t event_index = 0;
  std::string tool_name;
  std::string args_digest;
  KindSet kinds;
  std::set<std::string> taint_set;
  /// Labels minted or rehydrated at this node (as opposed to inherited).
  std::set<std::string> introduced;
};

struct GraphEdge {
  std::string from_node;
  std::string to_node;
  std::string label_id;
  std::string tier;  // "lineage" or "rehydrate"
  double confidence = 1.0;

  bool operator<(const GraphEdge& other) const;
  bool operator==(const GraphEdge&) const = default;
};

struct MemoryAnnotation {
  std::set<std::string> labels;
  std::string writer_node;
};

struct LineageEntry {
  TaintLabel label;
  /// Witness path from the label's origin node to the sink (inclusive),
  /// shortest by hop count with deterministic tie-breaking.
  std::vector<std::string> path;
  /// Latest node on the path where the label was minted or rehydrated; the
  /// event behind it carries the freshest content for this lineage.
  std::string intro_node;
  /// True when the witness path re-enters through a memory-read rehydration.
  bool crossed_memory = false;
};

/// Directed provenance graph over tool-call events. Single writer per
/// instance; lineage queries are safe concurrently once writes stop.
class ProvenanceGraph {
 public:
  static std::string node_id_for(const std::string& session_id, std::int64_t index);

  /// Record-key derivation for memory events without an explicit
  /// `record_key` argument: writes hash the written argument values, reads
  /// hash the returned content, so rereads of identical content rehydrate.
  static std::string derive_record_key(const ToolEvent& event, EventKind role);

  /// Appends a node for the event. Source events mint a fresh label
  /// (confidence 1.0, optional recovered canary); every other kind inherits
  /// the labels seen earlier in the session. Lineage edges run from each
  /// earlier tainted node in the session to the new node.
  std::string record_event(const ToolEvent& event, const KindSet& kinds,
                           std::optional<std::string> canary = std::nullopt);

  /// Stores the node's taint set under the record key (last writer wins).
  std::set<std::string> annotate_memory_write(const std::string& node_id,
                                              const std::string& record_key);

  /// Restores annotated labels onto the reading node and returns them.
  /// Reading an unannotated key yields the empty set. Emits no finding.
  std::set<std::string> rehydrate_on_read(const std::string& node_id,
                                          const std::string& record_key);

  /// Every label with a directed path to the sink, with one witness path per
  /// label, ordered by origin (session, index).
  std::vector<LineageEntry> lineage_for_sink(const std::string& sink_node_id) const;

  std::string save_state() const;
  static ProvenanceGraph load_state(const std::string& bytes);

  const GraphNode* find_node(const std::string& node_id) const;
  const GraphNode& node(const std::string& node_id) const;
  std::vector<const GraphNode*> nodes_in_order() const;
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::map<std::string, TaintLabel>& taint_registry() const { return registry_; }
  const std::map<std::string, MemoryAnnotation>& memory_annotations() const {
    return annotations_;
  }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  GraphNode& mutable_node(const std::string& node_id);
  void add_edge(GraphEdge edge);

  std::vector<GraphNode> nodes_;  // insertion order
  std::map<std::string, std::size_t> node_lookup_;
  std::vector<GraphEdge> edges_;
  std::set<GraphEdge> edge_index_;
  std::map<std::string, TaintLabel> registry_;
  std::map<std::string, MemoryAnnotation> annotations_;
  std::map<std::string, std::vector<std::size_t>> session_nodes_;
  std::map<std::string, std::int64_t> next_index_;
  std::map<std::string, std::set<std::string>> session_taint_union_;
  // Adjacency over distinct (from, to) pairs, for path search.
  std::map<std::string, std::set<std::string>> successors_;
  std::map<std::string, std::set<std::string>> predecessors_;
};

}  // namespace provaudit
