#pragma once
// Exact top-k cosine retrieval over event-graph nodes.
//
// Two index flavours share the code path:
//   successors      - subtask nodes with at least one out-edge; a hit carries
//                     the node's successors.
//   sequence_starts - nodes heading at least one sequence record (coarse
//                     tasks); a hit carries the opening subtasks. Used for
//                     the first query of an episode, before any subtask ran.
//
// Index file:
//   # vln-eventkg-index/1 kind=<kind> dim=<d> count=<n> embedder=<identity>
//   <node_id> <v_1> ... <v_d>            (one line per vector, %.16e)

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eventnav/kg_store.hpp"

namespace eventnav {

using Embedding = Eigen::VectorXd;
using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr Eigen::Index kDefaultDimension = 256;

// Scales to unit norm; a zero (or non-finite-norm) vector maps to e_0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> unit_normalized(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = v;
  const Scalar n = out.norm();
  if (!(n > Scalar(0)) || !std::isfinite(n)) {
    out.setZero();
    if (out.size() > 0) out(0) = Scalar(1);
    return out;
  }
  return out / n;
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string identity() const = 0;
  virtual Eigen::Index dimension() const = 0;
  // Pre-normalization vector. Callers go through embed().
  virtual Embedding raw(std::string_view text) const = 0;
};

// Throws EmptyText when the text normalizes to empty.
Embedding embed(std::string_view text, const Embedder& embedder);

// Signed feature hashing of token unigrams and bigrams.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(Eigen::Index dimension = kDefaultDimension, std::uint64_t seed = 0);

  std::string identity() const override;
  Eigen::Index dimension() const override { return dim_; }
  Embedding raw(std::string_view text) const override;

 private:
  Eigen::Index dim_;
  std::uint64_t seed_;
};

// POST {"model": m, "input": text} -> {"embedding": [..]}; endpoint and key
// from EMBEDDER_URL / EMBEDDER_KEY unless given explicitly.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint, std::string api_key, std::string model, Eigen::Index dimension,
                 std::chrono::seconds timeout = std::chrono::seconds(30));
  static RemoteEmbedder from_env(std::string model, Eigen::Index dimension);

  std::string identity() const override { return "remote:" + model_; }
  Eigen::Index dimension() const override { return dim_; }
  Embedding raw(std::string_view text) const override;

 private:
  std::string endpoint_;
  std::string api_key_;
  std::string model_;
  Eigen::Index dim_;
  std::chrono::seconds timeout_;
};

enum class IndexKind { successors, sequence_starts };

struct RetrievalIndex {
  IndexKind kind = IndexKind::successors;
  std::string embedder;
  std::vector<NodeId> node_ids;
  EmbeddingMatrix vectors;  // row i embeds node_ids[i]

  Eigen::Index dimension() const { return vectors.cols(); }
  std::size_t size() const { return node_ids.size(); }

  friend bool operator==(const RetrievalIndex& a, const RetrievalIndex& b) {
    return a.kind == b.kind && a.embedder == b.embedder && a.node_ids == b.node_ids &&
           a.vectors.rows() == b.vectors.rows() && a.vectors.cols() == b.vectors.cols() &&
           a.vectors == b.vectors;
  }
};

RetrievalIndex build_index(const EventGraph& graph, const Embedder& embedder);
RetrievalIndex build_start_index(const EventGraph& graph, const Embedder& embedder);

struct RetrievalHit {
  const EventNode* node = nullptr;
  double similarity = 0.0;
  std::vector<Successor> successors;
};

// Similarities are snapped to this grid so cosines that are equal up to
// rounding compare equal and fall through to the node-id tie-break.
inline constexpr double kSimilarityResolution = 1e-9;
inline double snap_similarity(double s) { return std::round(s / kSimilarityResolution) * kSimilarityResolution; }

// Snapped cosine similarity of every indexed vector to `query` (a unit vector).
Eigen::VectorXd similarities(const RetrievalIndex& index, const Embedding& query);

// Top min(k, size) hits by similarity desc, node id asc. k must be >= 1.
std::vector<RetrievalHit> query(const RetrievalIndex& index, const EventGraph& graph, const Embedder& embedder,
                                std::string_view text, std::size_t k);

inline constexpr std::string_view kNoKnowledge = "no relevant knowledge found";

// "[rank] <similar> -> <successor> (weight w)", one line per pair.
std::string format_knowledge(const std::vector<RetrievalHit>& hits);

void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);

}  // namespace eventnav
