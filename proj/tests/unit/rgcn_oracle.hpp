#pragma once

// Brute-force relational convolution over (i, r, j) triples on plain arrays.

#include <cmath>
#include <vector>

#include "dghif/relgraph/rgcn.hpp"

namespace dghif::testing {

using Matrix = std::vector<std::vector<double>>;

inline Matrix to_matrix(const tc::Tensor& t) {
  Matrix m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t c = 0; c < t.dim(1); ++c) m[i][c] = t.at(i, c);
  return m;
}

inline Matrix oracle_rgcn_layer(const graph::HeteroGraph& g, const Matrix& v, const graph::RgcnParams& p,
                                std::size_t layer) {
  const auto& L = p.layers[layer];
  const std::size_t n = g.nodes();
  const std::size_t d_in = L.w_self.dim(0), d_out = L.w_self.dim(1);
  Matrix out(n, std::vector<double>(d_out, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pre(d_out, 0.0);
    for (std::size_t o = 0; o < d_out; ++o)
      for (std::size_t c = 0; c < d_in; ++c) pre[o] += v[i][c] * L.w_self.at(c, o);
    for (std::size_t r = 0; r < g.relation_count(); ++r) {
      // neighbours of i under r, found by scanning the raw edge list
      std::vector<std::size_t> nbrs;
      for (const auto& e : g.edges(r)) {
        if (p.config.direction == graph::Direction::In && e.dst == i) nbrs.push_back(e.src);
        if (p.config.direction == graph::Direction::Out && e.src == i) nbrs.push_back(e.dst);
      }
      if (nbrs.empty()) continue;
      double c_ir = 0.0;
      if (p.config.norm == graph::NormMode::Adaptive) {
        const double raw = p.eta_raw.at(r);
        const double eta = std::log1p(std::exp(raw));
        c_ir = std::max(eta * std::log(nbrs.size() + 1.0), 1e-3);
      } else {
        c_ir = std::sqrt(static_cast<double>(nbrs.size()));
      }
      const double w = p.omega.at(r);
      for (std::size_t j : nbrs)
        for (std::size_t o = 0; o < d_out; ++o)
          for (std::size_t c = 0; c < d_in; ++c) pre[o] += w * L.w_rel[r].at(c, o) * v[j][c] / c_ir;
    }
    for (std::size_t o = 0; o < d_out; ++o) {
      double act = pre[o];
      if (p.config.activation == graph::Activation::Tanh) act = std::tanh(act);
      if (p.config.activation == graph::Activation::Relu) act = std::max(act, 0.0);
      double res = 0.0;
      if (L.residual_proj.defined()) {
        for (std::size_t c = 0; c < d_in; ++c) res += v[i][c] * L.residual_proj.at(c, o);
      } else {
        res = v[i][o];
      }
      out[i][o] = act + res;
    }
  }
  return out;
}

/// Random graph with up to `max_nodes` nodes and `max_rel` relations.
inline graph::HeteroGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes, std::size_t max_rel) {
  std::uniform_int_distribution<std::size_t> nn(1, max_nodes), nr(1, max_rel);
  const std::size_t n = nn(rng), r = nr(rng);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < r; ++k) names.push_back("rel" + std::to_string(k));
  std::bernoulli_distribution keep(0.35);
  std::vector<graph::Interaction> inter;
  for (std::size_t rel = 0; rel < r; ++rel)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (a != b && keep(rng)) inter.push_back({a, rel, b});
  return graph::build_graph(n, inter, graph::RelationSet(names));
}

}  // namespace dghif::testing
