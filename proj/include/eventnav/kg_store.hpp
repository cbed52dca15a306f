#pragma once
// Event knowledge graph.
//
// Nodes are deduplicated task texts (keyed by normalize_text). Edges record
// observed successions "subtask i is followed by subtask i+1" with an
// occurrence count. Coarse-task membership is kept as ordered sequence
// records, never as edges, so edge_count equals the number of distinct
// consecutive pairs.
//
// Graph file (one JSON object per line):
//   {"format":"vln-eventkg/1","record":"header"}
//   {"id":0,"kind":"coarse","norm_text":"...","record":"node","sources":["R2R"],"text":"..."}
//   {"from_id":1,"record":"edge","to_id":2,"weight":3}
//   {"coarse_id":0,"dataset":"R2R","record":"seq","record_id":"...","subtask_ids":[1,2]}

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace eventnav {

using NodeId = std::uint32_t;

enum class Dataset { alfred, r2r, reverie, custom };

std::string_view dataset_name(Dataset d) noexcept;
// Accepts "ALFRED", "R2R", "REVERIE", "custom" (case-insensitive).
std::optional<Dataset> parse_dataset(std::string_view s);

enum class NodeKind { coarse, subtask };

struct EventNode {
  NodeId id = 0;
  std::string text;
  std::string norm_text;
  NodeKind kind = NodeKind::subtask;
  std::set<Dataset> sources;

  friend bool operator==(const EventNode&, const EventNode&) = default;
};

struct SequentialEdge {
  NodeId from_id = 0;
  NodeId to_id = 0;
  std::uint64_t weight = 0;

  friend bool operator==(const SequentialEdge&, const SequentialEdge&) = default;
};

struct TaskSequence {
  std::string coarse_text;
  std::vector<std::string> subtasks;
  Dataset dataset = Dataset::custom;
  std::string record_id;

  friend bool operator==(const TaskSequence&, const TaskSequence&) = default;
};

// Provenance of one inserted TaskSequence, by node id.
struct SequenceRecord {
  NodeId coarse_id = 0;
  std::vector<NodeId> subtask_ids;
  Dataset dataset = Dataset::custom;
  std::string record_id;

  friend bool operator==(const SequenceRecord&, const SequenceRecord&) = default;
};

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t sequence_count = 0;
  std::map<Dataset, std::size_t> sequences_per_dataset;

  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

class EventGraph {
 public:
  const std::vector<EventNode>& nodes() const noexcept { return nodes_; }
  const std::vector<SequenceRecord>& sequences() const noexcept { return sequences_; }
  const EventNode& node(NodeId id) const;
  std::optional<NodeId> find(std::string_view text) const;

  // Out-edges of a node as (to_id, weight), keyed by to_id.
  const std::map<NodeId, std::uint64_t>& out_edges(NodeId id) const;
  std::size_t edge_count() const noexcept { return edge_count_; }
  std::uint64_t total_weight() const noexcept;
  std::vector<SequentialEdge> edges() const;

  // Sequence records whose coarse node is `coarse_id`, by index.
  const std::vector<std::size_t>& sequences_of(NodeId coarse_id) const;

  void insert(const TaskSequence& seq);

  friend bool operator==(const EventGraph& a, const EventGraph& b) {
    return a.nodes_ == b.nodes_ && a.out_ == b.out_ && a.sequences_ == b.sequences_;
  }

 private:
  friend EventGraph merge(const EventGraph&, const EventGraph&);
  friend EventGraph load_graph(const std::filesystem::path&);

  NodeId intern(std::string_view text, std::string norm, NodeKind kind, Dataset source);
  void add_edge_weight(NodeId from, NodeId to, std::uint64_t w);
  void push_record(SequenceRecord rec);

  std::vector<EventNode> nodes_;
  std::unordered_map<std::string, NodeId> by_norm_;
  std::vector<std::map<NodeId, std::uint64_t>> out_;
  std::vector<SequenceRecord> sequences_;
  std::unordered_map<NodeId, std::vector<std::size_t>> by_coarse_;
  std::size_t edge_count_ = 0;
};

// Throws EmptySequence / MalformedText before mutating the graph.
void insert_sequence(EventGraph& graph, const TaskSequence& seq);

// Union keyed by norm_text; edge weights summed; provenance concatenated
// (a's records first). Equal up to id relabeling to re-inserting all
// sequences of a then b into an empty graph.
EventGraph merge(const EventGraph& a, const EventGraph& b);

struct Successor {
  const EventNode* node = nullptr;
  std::uint64_t weight = 0;
};

// Out-edges sorted by weight desc, then id asc. Throws UnknownNode.
std::vector<Successor> successors(const EventGraph& graph, NodeId id);

// Opening subtasks of the sequences headed by a coarse node, counted and
// sorted like successors(). Empty for subtask nodes.
std::vector<Successor> sequence_starts(const EventGraph& graph, NodeId id);

GraphStats stats(const EventGraph& graph);

// TaskSequence reconstructed from a provenance record (surface texts).
TaskSequence to_task_sequence(const EventGraph& graph, const SequenceRecord& rec);

// Id-independent form: nodes keyed by norm_text, edges by text pairs,
// provenance by texts. Two graphs are equal up to id relabeling iff their
// canonical forms are equal.
struct CanonicalGraph {
  struct Node {
    std::string text;
    NodeKind kind;
    std::set<Dataset> sources;
    friend bool operator==(const Node&, const Node&) = default;
  };
  struct Sequence {
    std::string coarse;
    std::vector<std::string> subtasks;
    Dataset dataset;
    std::string record_id;
    friend bool operator==(const Sequence&, const Sequence&) = default;
  };
  std::map<std::string, Node> nodes;
  std::map<std::pair<std::string, std::string>, std::uint64_t> edges;
  std::vector<Sequence> sequences;

  friend bool operator==(const CanonicalGraph&, const CanonicalGraph&) = default;
};

CanonicalGraph canonical(const EventGraph& graph);

inline constexpr std::string_view kGraphFormat = "vln-eventkg/1";

void save_graph(const EventGraph& graph, const std::filesystem::path& path);
EventGraph load_graph(const std::filesystem::path& path);

// TaskSequence files: one JSON object per line with fields
// coarse_text, subtasks, dataset, record_id.
void save_sequences(const std::vector<TaskSequence>& seqs, const std::filesystem::path& path);
std::vector<TaskSequence> load_sequences(const std::filesystem::path& path);

}  // namespace eventnav
