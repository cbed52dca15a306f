#include "eventnav/retrieval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "eventnav/backend.hpp"
#include "eventnav/error.hpp"
#include "eventnav/text.hpp"
#include "jsonl.hpp"

namespace eventnav {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string_view kind_name(IndexKind k) {
  return k == IndexKind::successors ? "successors" : "sequence_starts";
}

RetrievalIndex build_from(const EventGraph& graph, const Embedder& embedder, IndexKind kind,
                          const std::vector<NodeId>& ids) {
  RetrievalIndex index;
  index.kind = kind;
  index.embedder = embedder.identity();
  index.node_ids = ids;
  index.vectors.resize(static_cast<Eigen::Index>(ids.size()), embedder.dimension());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    index.vectors.row(static_cast<Eigen::Index>(i)) = embed(graph.node(ids[i]).text, embedder).transpose();
  }
  return index;
}

}  // namespace

Embedding embed(std::string_view text, const Embedder& embedder) {
  if (normalize_text(text).empty()) throw Error(Errc::empty_text, "cannot embed empty text");
  Embedding v = embedder.raw(text);
  if (v.size() != embedder.dimension()) throw Error(Errc::backend_error, "embedder returned wrong dimension");
  return unit_normalized(v);
}

HashingEmbedder::HashingEmbedder(Eigen::Index dimension, std::uint64_t seed) : dim_(dimension), seed_(seed) {
  if (dim_ < 1) throw std::invalid_argument("embedding dimension must be positive");
}

std::string HashingEmbedder::identity() const { return fmt::format("hash-bow/v1/dim={}/seed={}", dim_, seed_); }

Embedding HashingEmbedder::raw(std::string_view text) const {
  Embedding v = Embedding::Zero(dim_);
  const auto tokens = tokenize(normalize_text(text));
  const std::uint64_t basis = splitmix64(seed_);
  auto add = [&](const std::string& feature) {
    const std::uint64_t h = splitmix64(fnv1a64(feature) ^ basis);
    const auto slot = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    v(slot) += (h >> 63) ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add("u:" + tokens[i]);
    if (i + 1 < tokens.size()) add("b:" + tokens[i] + " " + tokens[i + 1]);
  }
  return v;
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::string api_key, std::string model,
                               Eigen::Index dimension, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      dim_(dimension),
      timeout_(timeout) {
  if (endpoint_.empty()) throw Error(Errc::config_error, "remote embedder requires an endpoint");
}

RemoteEmbedder RemoteEmbedder::from_env(std::string model, Eigen::Index dimension) {
  const char* url = std::getenv("EMBEDDER_URL");
  const char* key = std::getenv("EMBEDDER_KEY");
  return RemoteEmbedder(url ? url : "", key ? key : "", std::move(model), dimension);
}

Embedding RemoteEmbedder::raw(std::string_view text) const {
  const detail::json request{{"model", model_}, {"input", std::string(text)}};
  const auto body = post_json(endpoint_, api_key_, request.dump(), timeout_);
  auto reply = detail::json::parse(body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("embedding") || !reply["embedding"].is_array() ||
      !std::all_of(reply["embedding"].begin(), reply["embedding"].end(),
                   [](const detail::json& v) { return v.is_number(); })) {
    throw Error(Errc::backend_error, "malformed embedding reply");
  }
  const auto values = reply["embedding"].get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != dim_) {
    throw Error(Errc::backend_error, fmt::format("expected {} values, got {}", dim_, values.size()));
  }
  Embedding v = Eigen::Map<const Embedding>(values.data(), dim_);
  if (!v.allFinite()) throw Error(Errc::backend_error, "non-finite embedding value");
  return v;
}

RetrievalIndex build_index(const EventGraph& graph, const Embedder& embedder) {
  std::vector<NodeId> ids;
  for (const auto& n : graph.nodes()) {
    if (n.kind == NodeKind::subtask && !graph.out_edges(n.id).empty()) ids.push_back(n.id);
  }
  return build_from(graph, embedder, IndexKind::successors, ids);
}

RetrievalIndex build_start_index(const EventGraph& graph, const Embedder& embedder) {
  std::vector<NodeId> ids;
  for (const auto& n : graph.nodes()) {
    if (!graph.sequences_of(n.id).empty()) ids.push_back(n.id);
  }
  return build_from(graph, embedder, IndexKind::sequence_starts, ids);
}

Eigen::VectorXd similarities(const RetrievalIndex& index, const Embedding& query) {
  Eigen::VectorXd sims = index.vectors * query;
  return sims.unaryExpr([](double s) { return snap_similarity(s); });
}

std::vector<RetrievalHit> query(const RetrievalIndex& index, const EventGraph& graph, const Embedder& embedder,
                                std::string_view text, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (embedder.identity() != index.embedder) {
    throw Error(Errc::embedder_mismatch, "index built with '" + index.embedder + "', query uses '" +
                                             embedder.identity() + "'");
  }
  const Embedding q = embed(text, embedder);
  if (index.size() == 0) return {};
  const Eigen::VectorXd sims = similarities(index, q);

  std::vector<Eigen::Index> order(index.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (sims(a) != sims(b)) return sims(a) > sims(b);
                      return index.node_ids[static_cast<std::size_t>(a)] < index.node_ids[static_cast<std::size_t>(b)];
                    });

  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    const NodeId id = index.node_ids[static_cast<std::size_t>(order[i])];
    RetrievalHit h;
    h.node = &graph.node(id);
    h.similarity = sims(order[i]);
    h.successors = index.kind == IndexKind::successors ? successors(graph, id) : sequence_starts(graph, id);
    hits.push_back(std::move(h));
  }
  return hits;
}

std::string format_knowledge(const std::vector<RetrievalHit>& hits) {
  std::string out;
  for (std::size_t r = 0; r < hits.size(); ++r) {
    for (const auto& s : hits[r].successors) {
      out += fmt::format("[{}] {} -> {} (weight {})\n", r + 1, single_line(hits[r].node->text),
                         single_line(s.node->text), s.weight);
    }
  }
  if (out.empty()) out = std::string(kNoKnowledge) + "\n";
  return out;
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << fmt::format("# vln-eventkg-index/1 kind={} dim={} count={} embedder={}\n", kind_name(index.kind),
                     index.dimension(), index.size(), index.embedder);
  std::string line;
  for (std::size_t i = 0; i < index.size(); ++i) {
    line = std::to_string(index.node_ids[i]);
    for (Eigen::Index c = 0; c < index.dimension(); ++c) {
      line += fmt::format(" {:.16e}", index.vectors(static_cast<Eigen::Index>(i), c));
    }
    out << line << '\n';
  }
  detail::finish(out, path);
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw FormatError(1, "missing index header");
  const std::string prefix = "# vln-eventkg-index/1 ";
  if (header.rfind(prefix, 0) != 0) throw FormatError(1, "not a vln-eventkg-index/1 file");

  RetrievalIndex index;
  long long dim = -1;
  long long count = -1;
  std::string kind;
  std::istringstream hs(header.substr(prefix.size()));
  std::string tok;
  while (hs >> tok) {
    if (tok.rfind("kind=", 0) == 0) {
      kind = tok.substr(5);
    } else if (tok.rfind("dim=", 0) == 0) {
      dim = std::stoll(tok.substr(4));
    } else if (tok.rfind("count=", 0) == 0) {
      count = std::stoll(tok.substr(6));
    } else if (tok.rfind("embedder=", 0) == 0) {
      std::string rest;
      std::getline(hs, rest);
      index.embedder = tok.substr(9) + rest;
      break;
    }
  }
  if (kind == "successors") {
    index.kind = IndexKind::successors;
  } else if (kind == "sequence_starts") {
    index.kind = IndexKind::sequence_starts;
  } else {
    throw FormatError(1, "unknown index kind '" + kind + "'");
  }
  if (dim < 1 || count < 0 || index.embedder.empty()) throw FormatError(1, "incomplete index header");

  index.vectors.resize(count, dim);
  std::string line;
  for (long long row = 0; row < count; ++row) {
    const std::size_t ln = static_cast<std::size_t>(row) + 2;
    if (!std::getline(in, line)) throw FormatError(ln, "expected " + std::to_string(count) + " vectors");
    const char* p = line.c_str();
    char* end = nullptr;
    const unsigned long long id = std::strtoull(p, &end, 10);
    if (end == p) throw FormatError(ln, "missing node id");
    index.node_ids.push_back(static_cast<NodeId>(id));
    for (long long c = 0; c < dim; ++c) {
      p = end;
      const double v = std::strtod(p, &end);
      if (end == p) throw FormatError(ln, "expected " + std::to_string(dim) + " values");
      index.vectors(row, c) = v;
    }
    while (*end == ' ' || *end == '\r') ++end;
    if (*end != '\0') throw FormatError(ln, "trailing data");
  }
  return index;
}

}  // namespace eventnav
