#pragma once

// Per-dialogue directed speaker-relation graph and the attention-weighted
// relational GCN. Edges connect utterances within a symmetric context
// window; relation types partition neighbors by speaker identity and
// temporal direction, plus a self-loop per node.

#include <cstdint>
#include <string>
#include <vector>

#include "ariign/autograd.hpp"
#include "ariign/corpus.hpp"
#include "ariign/matrix.hpp"
#include "ariign/rng.hpp"

namespace ariign {

enum class Relation : int {
  SameSpeakerPast = 0,
  SameSpeakerFuture = 1,
  OtherSpeakerPast = 2,
  OtherSpeakerFuture = 3,
  Self = 4,
};
inline constexpr int kNumCrossRelations = 4;

const char* relation_name(Relation r);

struct GraphEdge {
  std::size_t src = 0;  // in-neighbor j
  std::size_t dst = 0;  // center node i
  Relation rel = Relation::Self;
};

struct SpeakerGraph {
  std::size_t num_nodes = 0;
  std::vector<GraphEdge> edges;     // grouped by dst, self-loop last per node
  std::vector<double> weights;      // omega per edge, set by edge_attention
  bool has_weights = false;
};

// When single_relation is set every cross edge collapses onto one relation
// type (ablation of the relation set).
SpeakerGraph build_graph(const Dialogue& dialogue, std::size_t window,
                         bool single_relation = false);

struct GcnParams {
  Matrix attn_hidden;             // W_theta2-hat: d x 2d
  Matrix attn_out;                // W_theta1-hat: 1 x d
  std::vector<Matrix> relation_w; // one d x d matrix per cross relation
  Matrix self_w;                  // d x d
  std::size_t layers = 2;
};

enum class SelfTermMode {
  OncePerRelation,  // self contribution once per relation present at a node
  PerNeighbor,      // self contribution repeated per in-neighbor, unnormalized
};

GcnParams make_gcn(std::size_t d, std::size_t layers, bool single_relation, Rng& rng);

struct GcnVars {
  Var attn_hidden;
  Var attn_out;
  std::vector<Var> relation_w;
  Var self_w;
};

GcnVars gcn_leaves(Tape& tape, const GcnParams& params);

// Edge scores per the attention MLP, softmax-normalized over each node's
// incoming edges. Returns omega as an (E x 1) Var aligned with graph.edges.
Var edge_attention(Tape& tape, const SpeakerGraph& graph, const GcnParams& params,
                   const GcnVars& vars, Var node_feats);

// L rounds of relational aggregation with GELU; node_feats is (T x d).
Var gcn_forward(Tape& tape, const SpeakerGraph& graph, const GcnParams& params,
                const GcnVars& vars, Var node_feats, Var omega,
                SelfTermMode self_term = SelfTermMode::OncePerRelation);

// Convenience non-differentiating run that also fills graph.weights.
Matrix gcn_apply(SpeakerGraph& graph, const GcnParams& params, const Matrix& feats,
                 SelfTermMode self_term = SelfTermMode::OncePerRelation);

// Plain-text edge list "src dst relation weight", one edge per line.
std::string export_edge_list(const SpeakerGraph& graph);

}  // namespace ariign
