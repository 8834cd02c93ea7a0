#include "dghif/fusion/fusion.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "dghif/common/errors.hpp"
#include "dghif/tensorcore/ops.hpp"

namespace dghif::fusion {

using tc::Tensor;

FusionParams FusionParams::init(const FusionConfig& config, std::mt19937_64& rng) {
  if (config.dim == 0 || config.text_dim == 0 || config.graph_dim == 0) throw ConfigError("fusion: widths must be positive");
  if (!(config.gate_dropout >= 0.0 && config.gate_dropout < 1.0)) throw ConfigError("fusion: gate dropout must be in [0, 1)");
  const std::size_t d = config.dim;
  FusionParams p;
  p.config = config;
  p.ln_p_g = Tensor::full({config.text_dim}, 1.0, true);
  p.ln_p_b = Tensor::zeros({config.text_dim}, true);
  p.w_p = tc::xavier_uniform(config.text_dim, d, rng);
  p.b_p = Tensor::zeros({d}, true);
  p.ln_q_g = Tensor::full({config.graph_dim}, 1.0, true);
  p.ln_q_b = Tensor::zeros({config.graph_dim}, true);
  p.w_q = tc::xavier_uniform(config.graph_dim, d, rng);
  p.b_q = Tensor::zeros({d}, true);
  p.gate_w1 = tc::xavier_uniform(4 * d, d, rng);
  p.gate_b1 = Tensor::zeros({d}, true);
  p.gate_w2 = tc::xavier_uniform(d, d, rng);
  p.gate_b2 = Tensor::zeros({d}, true);
  return p;
}

tc::ParamList FusionParams::parameters() const {
  tc::ParamList out;
  const auto add = [&out](const char* name, const Tensor& t) { out.push_back({name, "fusion", t}); };
  if (config.mode != FusionMode::GraphOnly) {
    add("fusion.ln_p_g", ln_p_g);
    add("fusion.ln_p_b", ln_p_b);
    add("fusion.w_p", w_p);
    add("fusion.b_p", b_p);
  }
  if (config.mode != FusionMode::TextOnly) {
    add("fusion.ln_q_g", ln_q_g);
    add("fusion.ln_q_b", ln_q_b);
    add("fusion.w_q", w_q);
    add("fusion.b_q", b_q);
  }
  if (config.mode == FusionMode::Gated) {
    add("fusion.gate_w1", gate_w1);
    add("fusion.gate_b1", gate_b1);
    add("fusion.gate_w2", gate_w2);
    add("fusion.gate_b2", gate_b2);
  }
  return out;
}

Tensor project_text(const Tensor& h, const FusionParams& params) {
  return tc::silu(tc::add(tc::matmul(tc::layer_norm(h, params.ln_p_g, params.ln_p_b), params.w_p), params.b_p));
}

Tensor project_graph(const Tensor& v, const FusionParams& params) {
  return tc::silu(tc::add(tc::matmul(tc::layer_norm(v, params.ln_q_g, params.ln_q_b), params.w_q), params.b_q));
}

Views project_views(const Tensor& h, const Tensor& v, const FusionParams& params) {
  return {project_text(h, params), project_graph(v, params)};
}

InteractionFeatures interaction_features(const Tensor& p, const Tensor& q) {
  return {tc::mul(p, q), tc::sub(p, q)};
}

Tensor gate_logits(const Tensor& p, const Tensor& q, const InteractionFeatures& r, const FusionParams& params) {
  Tensor x = tc::concat_last({p, q, r.r_times, r.r_delta});
  Tensor hidden = tc::silu(tc::add(tc::matmul(x, params.gate_w1), params.gate_b1));
  return tc::add(tc::matmul(hidden, params.gate_w2), params.gate_b2);
}

Tensor compute_gate(const Tensor& p, const Tensor& q, const InteractionFeatures& r, const FusionParams& params,
                    bool train, std::mt19937_64& rng) {
  return tc::sigmoid(tc::dropout(gate_logits(p, q, r, params), params.config.gate_dropout, train, rng));
}

FusionOutput fuse(const Tensor& h, const Tensor& v, const FusionParams& params, bool train, std::mt19937_64& rng,
                  const std::vector<bool>& has_graph) {
  const FusionMode mode = params.config.mode;
  const std::size_t rows = h.defined() ? h.dim(0) : v.dim(0);
  std::vector<bool> present = has_graph.empty() ? std::vector<bool>(rows, v.defined()) : has_graph;
  if (present.size() != rows) throw ShapeError("fuse: has_graph length does not match batch");
  if (!v.defined()) present.assign(rows, false);
  if (v.defined() && v.dim(0) != rows) {
    throw ShapeError("fuse: text batch " + tc::to_string(h.shape()) + " vs graph batch " + tc::to_string(v.shape()));
  }
  const bool any_missing = std::find(present.begin(), present.end(), false) != present.end();

  FusionOutput out;
  out.bypassed.assign(rows, false);
  if (mode == FusionMode::GraphOnly) {
    if (any_missing) throw DataError("fuse: graph-only mode needs a graph view for every example");
    out.q = project_graph(v, params);
    out.z = out.q;
    return out;
  }
  out.p = project_text(h, params);
  if (mode == FusionMode::TextOnly) {
    out.z = out.p;
    return out;
  }
  for (std::size_t i = 0; i < rows; ++i) out.bypassed[i] = !present[i];
  if (!v.defined()) {
    out.z = mode == FusionMode::Concat ? tc::concat_last({out.p, Tensor::zeros(out.p.shape())}) : out.p;
    return out;
  }
  out.q = project_graph(v, params);
  if (mode == FusionMode::Concat) {
    const Tensor q = any_missing ? tc::where_rows(present, out.q, Tensor::zeros(out.q.shape())) : out.q;
    out.z = tc::concat_last({out.p, q});
    return out;
  }
  const InteractionFeatures r = interaction_features(out.p, out.q);
  out.g = compute_gate(out.p, out.q, r, params, train, rng);
  // z = g * p + (1 - g) * q  written as q + g * (p - q)
  Tensor mixed = tc::add(out.q, tc::mul(out.g, r.r_delta));
  out.z = any_missing ? tc::where_rows(present, mixed, out.p) : mixed;
  return out;
}

std::vector<double> gate_masses(const Tensor& g) {
  if (g.rank() != 2) throw ShapeError("gate_masses: expected [B, d], got " + tc::to_string(g.shape()));
  const std::size_t d = g.dim(1);
  std::vector<double> out(g.dim(0), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) out[i] += g.values()[i * d + c];
    out[i] /= static_cast<double>(d);
  }
  return out;
}

std::vector<CohortGateStats> gate_audit(std::span<const double> masses, std::span<const std::string> cohorts,
                                        double threshold) {
  if (masses.size() != cohorts.size()) throw ShapeError("gate_audit: masses and cohorts differ in length");
  std::vector<CohortGateStats> stats;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    auto it = std::find_if(stats.begin(), stats.end(), [&](const auto& s) { return s.cohort == cohorts[i]; });
    if (it == stats.end()) {
      stats.push_back({cohorts[i]});
      it = stats.end() - 1;
    }
    it->mean_gate += masses[i];
    it->frac_below += masses[i] < threshold ? 1.0 : 0.0;
    ++it->n;
  }
  for (auto& s : stats) {
    s.mean_gate /= static_cast<double>(s.n);
    s.frac_below /= static_cast<double>(s.n);
  }
  return stats;
}

void write_gate_audit(std::ostream& out, const std::vector<CohortGateStats>& stats) {
  out << "cohort,mean_gate,frac_below_threshold,n\n";
  char buf[128];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%zu", s.mean_gate, s.frac_below, s.n);
    out << s.cohort << ',' << buf << '\n';
  }
}

}  // namespace dghif::fusion
