#include "dghif/relgraph/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dghif/common/errors.hpp"

namespace dghif::graph {

RelationSet::RelationSet() : names_{"Follow", "Comment", "ShareRetweet", "Mention"} {}

RelationSet::RelationSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("relation set must not be empty");
  for (std::size_t i = 0; i < names_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (names_[i] == names_[j]) throw ConfigError("duplicate relation name '" + names_[i] + "'");
}

std::size_t RelationSet::id(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw DataError("unknown relation '" + std::string(name) + "'");
}

namespace {

std::size_t pair_key(std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return (i << 32) | j;
}

std::shared_ptr<const tc::Adjacency> make_adjacency(std::size_t nodes, const std::vector<Edge>& edges, bool incoming) {
  tc::Csr csr;
  csr.offsets.assign(nodes + 1, 0);
  for (const auto& e : edges) ++csr.offsets[(incoming ? e.dst : e.src) + 1];
  for (std::size_t i = 0; i < nodes; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.indices.resize(edges.size());
  std::vector<std::size_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  for (const auto& e : edges) csr.indices[cursor[incoming ? e.dst : e.src]++] = incoming ? e.src : e.dst;
  return tc::Adjacency::from_gather(std::move(csr), nodes);
}

}  // namespace

HeteroGraph::HeteroGraph(std::size_t nodes, RelationSet relations, std::vector<std::vector<Edge>> edges)
    : nodes_(nodes), relations_(std::move(relations)), edges_(std::move(edges)) {
  if (edges_.size() != relations_.size()) {
    throw DataError("graph: " + std::to_string(edges_.size()) + " edge lists for " +
                    std::to_string(relations_.size()) + " relations");
  }
  if (nodes_ >= (std::size_t{1} << 32)) throw DataError("graph: too many nodes");
  for (auto& list : edges_) {
    for (const auto& e : list) {
      if (e.src >= nodes_ || e.dst >= nodes_) throw DataError("graph: edge endpoint out of range");
      if (e.src == e.dst) throw DataError("graph: self-loop edge on node " + std::to_string(e.src));
    }
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    if (std::adjacent_find(list.begin(), list.end()) != list.end()) throw DataError("graph: duplicate edge");
    in_.push_back(make_adjacency(nodes_, list, true));
    out_.push_back(make_adjacency(nodes_, list, false));
    for (const auto& e : list) {
      if (pair_keys_.insert(pair_key(e.src, e.dst)).second) pairs_.push_back({std::min(e.src, e.dst), std::max(e.src, e.dst)});
    }
  }
  std::sort(pairs_.begin(), pairs_.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
}

std::size_t HeteroGraph::edge_count() const noexcept {
  std::size_t n = 0;
  for (const auto& list : edges_) n += list.size();
  return n;
}

const tc::Csr& HeteroGraph::neighbors(std::size_t r, Direction dir) const { return aggregation(r, dir)->gather; }

std::shared_ptr<const tc::Adjacency> HeteroGraph::aggregation(std::size_t r, Direction dir) const {
  return dir == Direction::In ? in_.at(r) : out_.at(r);
}

bool HeteroGraph::linked(std::size_t i, std::size_t j) const { return pair_keys_.count(pair_key(i, j)) > 0; }

std::vector<std::size_t> HeteroGraph::degrees() const {
  std::vector<std::size_t> deg(nodes_, 0);
  for (const auto& list : edges_) {
    for (const auto& e : list) {
      ++deg[e.src];
      ++deg[e.dst];
    }
  }
  return deg;
}

HeteroGraph build_graph(std::size_t nodes, std::span<const Interaction> interactions, const RelationSet& relations,
                        tc::Tensor node_features, BuildStats* stats) {
  BuildStats local;
  std::vector<std::vector<Edge>> edges(relations.size());
  for (std::size_t k = 0; k < interactions.size(); ++k) {
    const auto& rec = interactions[k];
    if (rec.actor >= nodes || rec.target >= nodes || rec.relation >= relations.size()) {
      throw DataError("interaction " + std::to_string(k) + " (" + std::to_string(rec.actor) + ", " +
                      std::to_string(rec.relation) + ", " + std::to_string(rec.target) + ") out of range for " +
                      std::to_string(nodes) + " nodes and " + std::to_string(relations.size()) + " relations");
    }
    if (rec.actor == rec.target) {
      ++local.self_loops_dropped;
      continue;
    }
    edges[rec.relation].push_back({rec.actor, rec.target});
  }
  for (auto& list : edges) {
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) {
      return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    const auto end = std::unique(list.begin(), list.end());
    local.duplicates_collapsed += static_cast<std::size_t>(list.end() - end);
    list.erase(end, list.end());
  }
  if (local.self_loops_dropped > 0) spdlog::warn("dropped {} self-interactions", local.self_loops_dropped);
  if (node_features.defined() && (node_features.rank() != 2 || node_features.dim(0) != nodes)) {
    throw ShapeError("build_graph: features " + tc::to_string(node_features.shape()) + " for " +
                     std::to_string(nodes) + " nodes");
  }
  HeteroGraph g(nodes, relations, std::move(edges));
  g.features = std::move(node_features);
  if (stats) *stats = local;
  return g;
}

std::vector<Interaction> read_interactions(const std::filesystem::path& path, const RelationSet& relations) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interactions file " + path.string());
  std::vector<Interaction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string actor, rel, target;
    if (!std::getline(fields, actor, '\t') || !std::getline(fields, rel, '\t') || !std::getline(fields, target)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected actor<TAB>relation<TAB>target");
    }
    try {
      out.push_back({std::stoul(actor), relations.id(rel), std::stoul(target)});
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad node id");
    }
  }
  return out;
}

void write_interactions(std::ostream& out, const HeteroGraph& graph) {
  for (std::size_t r = 0; r < graph.relation_count(); ++r)
    for (const auto& e : graph.edges(r)) out << e.src << '\t' << graph.relations().name(r) << '\t' << e.dst << '\n';
}

void write_degree_histogram(std::ostream& out, const HeteroGraph& graph) {
  out << "relation,direction,degree,count\n";
  for (std::size_t r = 0; r < graph.relation_count(); ++r) {
    for (auto dir : {Direction::In, Direction::Out}) {
      std::map<std::size_t, std::size_t> hist;
      const auto& csr = graph.neighbors(r, dir);
      for (std::size_t i = 0; i < csr.rows(); ++i) ++hist[csr.row_size(i)];
      for (const auto& [deg, count] : hist)
        out << graph.relations().name(r) << ',' << (dir == Direction::In ? "in" : "out") << ',' << deg << ','
            << count << '\n';
    }
  }
}

}  // namespace dghif::graph
