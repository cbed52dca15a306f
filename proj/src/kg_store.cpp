#include "eventnav/kg_store.hpp"

#include <algorithm>
#include <numeric>

#include "eventnav/error.hpp"
#include "eventnav/text.hpp"
#include "jsonl.hpp"

namespace eventnav {

using detail::json;

std::string_view dataset_name(Dataset d) noexcept {
  switch (d) {
    case Dataset::alfred: return "ALFRED";
    case Dataset::r2r: return "R2R";
    case Dataset::reverie: return "REVERIE";
    case Dataset::custom: return "custom";
  }
  return "custom";
}

std::optional<Dataset> parse_dataset(std::string_view s) {
  const std::string l = to_lower(s);
  if (l == "alfred") return Dataset::alfred;
  if (l == "r2r") return Dataset::r2r;
  if (l == "reverie") return Dataset::reverie;
  if (l == "custom") return Dataset::custom;
  return std::nullopt;
}

namespace {

std::string_view kind_name(NodeKind k) { return k == NodeKind::coarse ? "coarse" : "subtask"; }

const std::vector<std::size_t> kNoSequences;
const std::map<NodeId, std::uint64_t> kNoEdges;

}  // namespace

const EventNode& EventGraph::node(NodeId id) const {
  if (id >= nodes_.size()) throw Error(Errc::unknown_node, "node " + std::to_string(id));
  return nodes_[id];
}

std::optional<NodeId> EventGraph::find(std::string_view text) const {
  auto it = by_norm_.find(normalize_text(text));
  if (it == by_norm_.end()) return std::nullopt;
  return it->second;
}

const std::map<NodeId, std::uint64_t>& EventGraph::out_edges(NodeId id) const {
  if (id >= nodes_.size()) throw Error(Errc::unknown_node, "node " + std::to_string(id));
  return id < out_.size() ? out_[id] : kNoEdges;
}

std::uint64_t EventGraph::total_weight() const noexcept {
  std::uint64_t total = 0;
  for (const auto& m : out_) {
    for (const auto& [to, w] : m) total += w;
  }
  return total;
}

std::vector<SequentialEdge> EventGraph::edges() const {
  std::vector<SequentialEdge> out;
  out.reserve(edge_count_);
  for (NodeId from = 0; from < out_.size(); ++from) {
    for (const auto& [to, w] : out_[from]) out.push_back({from, to, w});
  }
  return out;
}

const std::vector<std::size_t>& EventGraph::sequences_of(NodeId coarse_id) const {
  auto it = by_coarse_.find(coarse_id);
  return it == by_coarse_.end() ? kNoSequences : it->second;
}

NodeId EventGraph::intern(std::string_view text, std::string norm, NodeKind kind, Dataset source) {
  auto it = by_norm_.find(norm);
  if (it != by_norm_.end()) {
    EventNode& n = nodes_[it->second];
    // A text ever used as a subtask is a subtask node; edges require it.
    if (kind == NodeKind::subtask) n.kind = NodeKind::subtask;
    n.sources.insert(source);
    return n.id;
  }
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back({id, std::string(text), norm, kind, {source}});
  out_.emplace_back();
  by_norm_.emplace(std::move(norm), id);
  return id;
}

void EventGraph::add_edge_weight(NodeId from, NodeId to, std::uint64_t w) {
  auto [it, inserted] = out_[from].try_emplace(to, 0);
  if (inserted) ++edge_count_;
  it->second += w;
}

void EventGraph::push_record(SequenceRecord rec) {
  by_coarse_[rec.coarse_id].push_back(sequences_.size());
  sequences_.push_back(std::move(rec));
}

void EventGraph::insert(const TaskSequence& seq) {
  std::string coarse_norm = normalize_text(seq.coarse_text);
  if (coarse_norm.empty()) throw Error(Errc::malformed_text, "coarse task normalizes to empty");
  std::vector<std::string> norms;
  norms.reserve(seq.subtasks.size());
  std::size_t empty = 0;
  for (const auto& s : seq.subtasks) {
    norms.push_back(normalize_text(s));
    if (norms.back().empty()) ++empty;
  }
  if (norms.size() == empty) throw Error(Errc::empty_sequence, "record '" + seq.record_id + "'");
  if (empty > 0) throw Error(Errc::malformed_text, "subtask normalizes to empty in '" + seq.record_id + "'");

  SequenceRecord rec;
  rec.coarse_id = intern(seq.coarse_text, std::move(coarse_norm), NodeKind::coarse, seq.dataset);
  rec.dataset = seq.dataset;
  rec.record_id = seq.record_id;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    rec.subtask_ids.push_back(intern(seq.subtasks[i], std::move(norms[i]), NodeKind::subtask, seq.dataset));
  }
  for (std::size_t i = 0; i + 1 < rec.subtask_ids.size(); ++i) {
    add_edge_weight(rec.subtask_ids[i], rec.subtask_ids[i + 1], 1);
  }
  push_record(std::move(rec));
}

void insert_sequence(EventGraph& graph, const TaskSequence& seq) { graph.insert(seq); }

EventGraph merge(const EventGraph& a, const EventGraph& b) {
  EventGraph out = a;
  std::vector<NodeId> remap(b.nodes_.size());
  for (const EventNode& n : b.nodes_) {
    NodeId id = 0;
    for (Dataset d : n.sources) id = out.intern(n.text, n.norm_text, n.kind, d);
    if (n.sources.empty()) id = out.intern(n.text, n.norm_text, n.kind, Dataset::custom);
    remap[n.id] = id;
  }
  for (NodeId from = 0; from < b.out_.size(); ++from) {
    for (const auto& [to, w] : b.out_[from]) out.add_edge_weight(remap[from], remap[to], w);
  }
  for (const SequenceRecord& r : b.sequences_) {
    SequenceRecord m{remap[r.coarse_id], {}, r.dataset, r.record_id};
    for (NodeId s : r.subtask_ids) m.subtask_ids.push_back(remap[s]);
    out.push_record(std::move(m));
  }
  return out;
}

namespace {

std::vector<Successor> sorted_successors(const EventGraph& graph,
                                         const std::map<NodeId, std::uint64_t>& counts) {
  std::vector<Successor> out;
  out.reserve(counts.size());
  for (const auto& [to, w] : counts) out.push_back({&graph.node(to), w});
  std::stable_sort(out.begin(), out.end(),
                   [](const Successor& x, const Successor& y) { return x.weight > y.weight; });
  return out;
}

}  // namespace

std::vector<Successor> successors(const EventGraph& graph, NodeId id) {
  return sorted_successors(graph, graph.out_edges(id));
}

std::vector<Successor> sequence_starts(const EventGraph& graph, NodeId id) {
  graph.node(id);
  std::map<NodeId, std::uint64_t> counts;
  for (std::size_t idx : graph.sequences_of(id)) ++counts[graph.sequences()[idx].subtask_ids.front()];
  return sorted_successors(graph, counts);
}

GraphStats stats(const EventGraph& graph) {
  GraphStats s;
  s.node_count = graph.nodes().size();
  s.edge_count = graph.edge_count();
  s.sequence_count = graph.sequences().size();
  for (const auto& r : graph.sequences()) ++s.sequences_per_dataset[r.dataset];
  return s;
}

TaskSequence to_task_sequence(const EventGraph& graph, const SequenceRecord& rec) {
  TaskSequence seq;
  seq.coarse_text = graph.node(rec.coarse_id).text;
  for (NodeId id : rec.subtask_ids) seq.subtasks.push_back(graph.node(id).text);
  seq.dataset = rec.dataset;
  seq.record_id = rec.record_id;
  return seq;
}

CanonicalGraph canonical(const EventGraph& graph) {
  CanonicalGraph c;
  for (const auto& n : graph.nodes()) c.nodes[n.norm_text] = {n.text, n.kind, n.sources};
  for (const auto& e : graph.edges()) {
    c.edges[{graph.node(e.from_id).norm_text, graph.node(e.to_id).norm_text}] = e.weight;
  }
  for (const auto& r : graph.sequences()) {
    CanonicalGraph::Sequence s{graph.node(r.coarse_id).norm_text, {}, r.dataset, r.record_id};
    for (NodeId id : r.subtask_ids) s.subtasks.push_back(graph.node(id).norm_text);
    c.sequences.push_back(std::move(s));
  }
  return c;
}

void save_graph(const EventGraph& graph, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  detail::write_line(out, json{{"record", "header"}, {"format", kGraphFormat}});
  for (const auto& n : graph.nodes()) {
    json sources = json::array();
    for (Dataset d : n.sources) sources.push_back(dataset_name(d));
    detail::write_line(out, json{{"record", "node"},
                                 {"id", n.id},
                                 {"text", n.text},
                                 {"norm_text", n.norm_text},
                                 {"kind", kind_name(n.kind)},
                                 {"sources", sources}});
  }
  for (const auto& e : graph.edges()) {
    detail::write_line(out, json{{"record", "edge"}, {"from_id", e.from_id}, {"to_id", e.to_id}, {"weight", e.weight}});
  }
  for (const auto& r : graph.sequences()) {
    detail::write_line(out, json{{"record", "seq"},
                                 {"coarse_id", r.coarse_id},
                                 {"subtask_ids", r.subtask_ids},
                                 {"dataset", dataset_name(r.dataset)},
                                 {"record_id", r.record_id}});
  }
  detail::finish(out, path);
}

EventGraph load_graph(const std::filesystem::path& path) {
  EventGraph g;
  bool have_header = false;
  detail::for_each_record(path, [&](std::size_t ln, const json& j) {
    const auto kind = detail::field<std::string>(j, "record", ln);
    if (!have_header) {
      if (kind != "header") throw FormatError(ln, "expected header record");
      const auto fmt = detail::field<std::string>(j, "format", ln);
      if (fmt != kGraphFormat) throw FormatError(ln, "unsupported format '" + fmt + "'");
      have_header = true;
      return;
    }
    auto check_id = [&](std::uint64_t id, const char* what) {
      if (id >= g.nodes_.size()) {
        throw FormatError(ln, std::string("dangling ") + what + " id " + std::to_string(id));
      }
      return static_cast<NodeId>(id);
    };
    if (kind == "node") {
      const auto id = detail::field<std::uint64_t>(j, "id", ln);
      if (id != g.nodes_.size()) throw FormatError(ln, "node ids must be dense and ordered");
      EventNode n;
      n.id = static_cast<NodeId>(id);
      n.text = detail::field<std::string>(j, "text", ln);
      n.norm_text = detail::field<std::string>(j, "norm_text", ln);
      if (n.norm_text.empty() || n.norm_text != normalize_text(n.text)) {
        throw FormatError(ln, "norm_text does not match text");
      }
      if (g.by_norm_.count(n.norm_text)) throw FormatError(ln, "duplicate norm_text '" + n.norm_text + "'");
      const auto k = detail::field<std::string>(j, "kind", ln);
      if (k == "coarse") {
        n.kind = NodeKind::coarse;
      } else if (k == "subtask") {
        n.kind = NodeKind::subtask;
      } else {
        throw FormatError(ln, "unknown node kind '" + k + "'");
      }
      for (const auto& s : detail::field<std::vector<std::string>>(j, "sources", ln)) {
        auto d = parse_dataset(s);
        if (!d) throw FormatError(ln, "unknown dataset '" + s + "'");
        n.sources.insert(*d);
      }
      g.by_norm_.emplace(n.norm_text, n.id);
      g.nodes_.push_back(std::move(n));
      g.out_.emplace_back();
    } else if (kind == "edge") {
      const NodeId from = check_id(detail::field<std::uint64_t>(j, "from_id", ln), "edge");
      const NodeId to = check_id(detail::field<std::uint64_t>(j, "to_id", ln), "edge");
      const auto w = detail::field<std::uint64_t>(j, "weight", ln);
      if (w == 0) throw FormatError(ln, "edge weight must be positive");
      if (g.nodes_[from].kind != NodeKind::subtask || g.nodes_[to].kind != NodeKind::subtask) {
        throw FormatError(ln, "edge endpoints must be subtask nodes");
      }
      if (g.out_[from].count(to)) throw FormatError(ln, "duplicate edge");
      g.add_edge_weight(from, to, w);
    } else if (kind == "seq") {
      SequenceRecord r;
      r.coarse_id = check_id(detail::field<std::uint64_t>(j, "coarse_id", ln), "seq");
      for (auto id : detail::field<std::vector<std::uint64_t>>(j, "subtask_ids", ln)) {
        r.subtask_ids.push_back(check_id(id, "seq"));
      }
      if (r.subtask_ids.empty()) throw FormatError(ln, "empty subtask_ids");
      const auto ds = detail::field<std::string>(j, "dataset", ln);
      auto d = parse_dataset(ds);
      if (!d) throw FormatError(ln, "unknown dataset '" + ds + "'");
      r.dataset = *d;
      r.record_id = detail::field<std::string>(j, "record_id", ln);
      g.push_record(std::move(r));
    } else {
      throw FormatError(ln, "unknown record kind '" + kind + "'");
    }
  });
  if (!have_header) throw FormatError(1, "missing header record");
  return g;
}

void save_sequences(const std::vector<TaskSequence>& seqs, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  for (const auto& s : seqs) {
    detail::write_line(out, json{{"coarse_text", s.coarse_text},
                                 {"subtasks", s.subtasks},
                                 {"dataset", dataset_name(s.dataset)},
                                 {"record_id", s.record_id}});
  }
  detail::finish(out, path);
}

std::vector<TaskSequence> load_sequences(const std::filesystem::path& path) {
  std::vector<TaskSequence> seqs;
  detail::for_each_record(path, [&](std::size_t ln, const json& j) {
    TaskSequence s;
    s.coarse_text = detail::field<std::string>(j, "coarse_text", ln);
    s.subtasks = detail::field<std::vector<std::string>>(j, "subtasks", ln);
    const auto ds = detail::field<std::string>(j, "dataset", ln);
    auto d = parse_dataset(ds);
    if (!d) throw FormatError(ln, "unknown dataset '" + ds + "'");
    s.dataset = *d;
    s.record_id = detail::field<std::string>(j, "record_id", ln);
    seqs.push_back(std::move(s));
  });
  return seqs;
}

}  // namespace eventnav
