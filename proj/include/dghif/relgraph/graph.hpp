#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dghif/tensorcore/ops.hpp"

namespace dghif::graph {

enum class Direction { In, Out };

/// Ordered relation names; the index is the relation id.
class RelationSet {
 public:
  RelationSet();  // Follow, Comment, ShareRetweet, Mention
  explicit RelationSet(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  /// Throws DataError for an unknown name.
  std::size_t id(std::string_view name) const;
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

struct Interaction {
  std::size_t actor = 0;
  std::size_t relation = 0;
  std::size_t target = 0;
};

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Static multi-relational directed graph over users 0..N-1.
class HeteroGraph {
 public:
  HeteroGraph(std::size_t nodes, RelationSet relations, std::vector<std::vector<Edge>> edges);

  std::size_t nodes() const noexcept { return nodes_; }
  const RelationSet& relations() const noexcept { return relations_; }
  std::size_t relation_count() const noexcept { return relations_.size(); }
  /// Edges of relation r sorted by (src, dst).
  const std::vector<Edge>& edges(std::size_t r) const { return edges_.at(r); }
  std::size_t edge_count() const noexcept;

  /// Row i lists the neighbours j whose messages reach i under relation r:
  /// sources of edges into i for Direction::In, targets of edges out of i for
  /// Direction::Out.
  const tc::Csr& neighbors(std::size_t r, Direction dir = Direction::In) const;
  std::shared_ptr<const tc::Adjacency> aggregation(std::size_t r, Direction dir = Direction::In) const;

  /// True when any relation links i and j in either direction.
  bool linked(std::size_t i, std::size_t j) const;
  /// Distinct undirected linked pairs (i < j).
  const std::vector<Edge>& linked_pairs() const noexcept { return pairs_; }
  /// In + out edges over all relations.
  std::vector<std::size_t> degrees() const;

  /// Optional per-node features [N, d].
  tc::Tensor features;

 private:
  std::size_t nodes_;
  RelationSet relations_;
  std::vector<std::vector<Edge>> edges_;
  std::vector<std::shared_ptr<const tc::Adjacency>> in_, out_;
  std::unordered_set<std::size_t> pair_keys_;
  std::vector<Edge> pairs_;
};

struct BuildStats {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_collapsed = 0;
};

/// Self-interactions are dropped (with a warning) and repeated
/// (actor, relation, target) records collapse into one edge. Any id out of
/// range is a DataError naming the record.
HeteroGraph build_graph(std::size_t nodes, std::span<const Interaction> interactions,
                        const RelationSet& relations = RelationSet(), tc::Tensor node_features = {},
                        BuildStats* stats = nullptr);

/// `actor<TAB>relation_name<TAB>target` per line.
std::vector<Interaction> read_interactions(const std::filesystem::path& path, const RelationSet& relations);
void write_interactions(std::ostream& out, const HeteroGraph& graph);

/// CSV relation,direction,degree,count of per-relation degree histograms.
void write_degree_histogram(std::ostream& out, const HeteroGraph& graph);

}  // namespace dghif::graph
