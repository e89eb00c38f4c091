#include "ariign/relgraph.hpp"

#include <cmath>
#include <sstream>

#include "ariign/errors.hpp"

namespace ariign {

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::SameSpeakerPast: return "same-speaker-past";
    case Relation::SameSpeakerFuture: return "same-speaker-future";
    case Relation::OtherSpeakerPast: return "other-speaker-past";
    case Relation::OtherSpeakerFuture: return "other-speaker-future";
    case Relation::Self: return "self";
  }
  return "?";
}

SpeakerGraph build_graph(const Dialogue& dialogue, std::size_t window,
                         bool single_relation) {
  SpeakerGraph g;
  const std::size_t n = dialogue.utterances.size();
  g.num_nodes = n;
  for (std::size_t i = 0; i < n; ++i) {
    // In-edges j -> i for 0 < |i - j| <= W, then the self-loop.
    std::size_t lo = i > window ? i - window : 0;
    std::size_t hi = std::min(n - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j == i) continue;
      Relation rel;
      if (single_relation) {
        rel = Relation::SameSpeakerPast;
      } else {
        bool same = dialogue.utterances[i].speaker == dialogue.utterances[j].speaker;
        bool past = j < i;
        rel = same ? (past ? Relation::SameSpeakerPast : Relation::SameSpeakerFuture)
                   : (past ? Relation::OtherSpeakerPast : Relation::OtherSpeakerFuture);
      }
      g.edges.push_back({j, i, rel});
    }
    g.edges.push_back({i, i, Relation::Self});
  }
  return g;
}

GcnParams make_gcn(std::size_t d, std::size_t layers, bool single_relation, Rng& rng) {
  GcnParams p;
  p.layers = layers;
  auto init = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    return m;
  };
  p.attn_hidden = init(d, 2 * d);
  p.attn_out = init(1, d);
  int nrel = single_relation ? 1 : kNumCrossRelations;
  for (int r = 0; r < nrel; ++r) p.relation_w.push_back(init(d, d));
  p.self_w = init(d, d);
  return p;
}

GcnVars gcn_leaves(Tape& tape, const GcnParams& params) {
  GcnVars v;
  v.attn_hidden = tape.leaf(params.attn_hidden, true);
  v.attn_out = tape.leaf(params.attn_out, true);
  for (const Matrix& w : params.relation_w) v.relation_w.push_back(tape.leaf(w, true));
  v.self_w = tape.leaf(params.self_w, true);
  return v;
}

Var edge_attention(Tape& tape, const SpeakerGraph& graph, const GcnParams& params,
                   const GcnVars& vars, Var node_feats) {
  (void)params;
  if (!tape.value(node_feats).all_finite())
    throw NumericError("edge_attention: non-finite node features");
  std::vector<std::size_t> src, dst;
  src.reserve(graph.edges.size());
  dst.reserve(graph.edges.size());
  for (const GraphEdge& e : graph.edges) {
    src.push_back(e.src);
    dst.push_back(e.dst);
  }
  // eps_ij = W1( GELU( W2 [xi_i (+) xi_j] ) ), i = dst, j = src.
  Var xi = tape.gather_rows(node_feats, dst);
  Var xj = tape.gather_rows(node_feats, src);
  Var pair = tape.concat_cols({xi, xj});                  // E x 2d
  Var hidden = tape.gelu(tape.matmul_nt(pair, vars.attn_hidden));  // E x d
  Var scores = tape.matmul_nt(hidden, vars.attn_out);     // E x 1
  if (!tape.value(scores).all_finite())
    throw NumericError("edge_attention: non-finite attention score");
  return tape.segment_softmax(scores, dst);
}

Var gcn_forward(Tape& tape, const SpeakerGraph& graph, const GcnParams& params,
                const GcnVars& vars, Var node_feats, Var omega,
                SelfTermMode self_term) {
  if (params.layers < 1) throw ConfigError("gcn_forward: layers >= 1");
  const std::size_t n = graph.num_nodes;
  const std::size_t nrel = params.relation_w.size();

  // Per-edge bookkeeping, independent of the values on the tape.
  std::vector<std::vector<std::size_t>> rel_edges(nrel);  // indices into edges
  std::vector<std::size_t> self_edges;
  std::vector<std::vector<std::size_t>> indeg(nrel, std::vector<std::size_t>(n, 0));
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const GraphEdge& ge = graph.edges[e];
    if (ge.rel == Relation::Self) {
      self_edges.push_back(e);
    } else {
      std::size_t r = static_cast<std::size_t>(ge.rel) % nrel;
      rel_edges[r].push_back(e);
      ++indeg[r][ge.dst];
    }
  }
  // Self-term multiplicity per node.
  Matrix self_mult(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double mult = 0.0;
    for (std::size_t r = 0; r < nrel; ++r) {
      if (indeg[r][i] == 0) continue;
      mult += self_term == SelfTermMode::OncePerRelation
                  ? 1.0
                  : static_cast<double>(indeg[r][i]);
    }
    if (mult == 0.0) mult = 1.0;  // isolated node keeps its self message
    self_mult(i, 0) = mult;
  }

  Var psi = node_feats;
  for (std::size_t layer = 0; layer < params.layers; ++layer) {
    std::vector<Var> messages;
    for (std::size_t r = 0; r < nrel; ++r) {
      if (rel_edges[r].empty()) continue;
      std::vector<std::size_t> src, dst;
      Matrix norm(rel_edges[r].size(), 1);
      for (std::size_t k = 0; k < rel_edges[r].size(); ++k) {
        const GraphEdge& ge = graph.edges[rel_edges[r][k]];
        src.push_back(ge.src);
        dst.push_back(ge.dst);
        norm(k, 0) = 1.0 / static_cast<double>(indeg[r][ge.dst]);
      }
      Var w_r = tape.gather_rows(omega, rel_edges[r]);
      Var coef = tape.mask_mul(w_r, norm);
      Var h = tape.matmul_nt(psi, vars.relation_w[r]);  // W_theta1^r psi_j
      messages.push_back(tape.edge_aggregate(h, src, dst, coef, n));
    }
    {
      std::vector<std::size_t> src, dst;
      Matrix mult(self_edges.size(), 1);
      for (std::size_t k = 0; k < self_edges.size(); ++k) {
        const GraphEdge& ge = graph.edges[self_edges[k]];
        src.push_back(ge.src);
        dst.push_back(ge.dst);
        mult(k, 0) = self_mult(ge.dst, 0);
      }
      Var w_self = tape.gather_rows(omega, self_edges);
      Var coef = tape.mask_mul(w_self, mult);
      Var h = tape.matmul_nt(psi, vars.self_w);  // W_theta2 psi_i
      messages.push_back(tape.edge_aggregate(h, src, dst, coef, n));
    }
    Var agg = messages[0];
    for (std::size_t k = 1; k < messages.size(); ++k) agg = tape.add(agg, messages[k]);
    psi = tape.gelu(agg);
  }
  return psi;
}

Matrix gcn_apply(SpeakerGraph& graph, const GcnParams& params, const Matrix& feats,
                 SelfTermMode self_term) {
  Tape tape;
  GcnVars vars;
  vars.attn_hidden = tape.constant(params.attn_hidden);
  vars.attn_out = tape.constant(params.attn_out);
  for (const Matrix& w : params.relation_w) vars.relation_w.push_back(tape.constant(w));
  vars.self_w = tape.constant(params.self_w);
  Var x = tape.constant(feats);
  Var omega = edge_attention(tape, graph, params, vars, x);
  const Matrix& w = tape.value(omega);
  graph.weights.assign(w.data(), w.data() + w.size());
  graph.has_weights = true;
  Var out = gcn_forward(tape, graph, params, vars, x, omega, self_term);
  return tape.value(out);
}

std::string export_edge_list(const SpeakerGraph& graph) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const GraphEdge& ge = graph.edges[e];
    os << ge.src << ' ' << ge.dst << ' ' << relation_name(ge.rel) << ' ';
    if (graph.has_weights) os << graph.weights[e];
    else os << "nan";
    os << '\n';
  }
  return os.str();
}

}  // namespace ariign
