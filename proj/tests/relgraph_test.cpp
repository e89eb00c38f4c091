#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "ariign/errors.hpp"
#include "ariign/relgraph.hpp"
#include "ariign/rng.hpp"

using namespace ariign;

namespace {

Dialogue random_dialogue(Rng& rng, std::size_t n, std::size_t speakers) {
  Dialogue d;
  d.dialogue_id = "d";
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.utt_id = "u" + std::to_string(i);
    u.speaker = "P" + std::to_string(rng.below(speakers));
    u.label = 0;
    d.utterances.push_back(std::move(u));
  }
  return d;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

Relation expected_relation(const Dialogue& d, std::size_t j, std::size_t i) {
  bool same = d.utterances[i].speaker == d.utterances[j].speaker;
  bool past = j < i;
  return same ? (past ? Relation::SameSpeakerPast : Relation::SameSpeakerFuture)
              : (past ? Relation::OtherSpeakerPast : Relation::OtherSpeakerFuture);
}

// Independent naive forward of one GCN layer stack, node by node.
Matrix naive_gcn(const SpeakerGraph& g, const GcnParams& p, const Matrix& feats,
                 const std::vector<double>& omega, SelfTermMode mode) {
  std::size_t n = g.num_nodes, d = feats.cols(), nrel = p.relation_w.size();
  Matrix psi = feats;
  for (std::size_t layer = 0; layer < p.layers; ++layer) {
    Matrix next(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> acc(d, 0.0);
      // per-relation in-degree of node i
      std::map<std::size_t, std::size_t> indeg;
      for (std::size_t e = 0; e < g.edges.size(); ++e)
        if (g.edges[e].dst == i && g.edges[e].rel != Relation::Self)
          ++indeg[static_cast<std::size_t>(g.edges[e].rel) % nrel];
      double self_mult = 0.0;
      for (const auto& [r, cnt] : indeg)
        self_mult += mode == SelfTermMode::OncePerRelation ? 1.0
                                                           : static_cast<double>(cnt);
      if (self_mult == 0.0) self_mult = 1.0;

      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (g.edges[e].dst != i) continue;
        std::size_t j = g.edges[e].src;
        if (g.edges[e].rel == Relation::Self) {
          for (std::size_t c = 0; c < d; ++c) {
            double h = 0.0;
            for (std::size_t k = 0; k < d; ++k) h += p.self_w(c, k) * psi(j, k);
            acc[c] += omega[e] * self_mult * h;
          }
        } else {
          std::size_t r = static_cast<std::size_t>(g.edges[e].rel) % nrel;
          double norm = 1.0 / static_cast<double>(indeg[r]);
          for (std::size_t c = 0; c < d; ++c) {
            double h = 0.0;
            for (std::size_t k = 0; k < d; ++k) h += p.relation_w[r](c, k) * psi(j, k);
            acc[c] += omega[e] * norm * h;
          }
        }
      }
      for (std::size_t c = 0; c < d; ++c) next(i, c) = gelu_scalar(acc[c]);
    }
    psi = std::move(next);
  }
  return psi;
}

}  // namespace

TEST_CASE("edge sets match brute-force window enumeration") {
  Rng rng(1);
  const std::size_t W = 10;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng.below(40);
    Dialogue d = random_dialogue(rng, n, 1 + rng.below(4));
    SpeakerGraph g = build_graph(d, W);

    std::set<std::pair<std::size_t, std::size_t>> expect;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && (i > j ? i - j : j - i) <= W) expect.insert({j, i});

    std::size_t cross = 0, self = 0;
    std::size_t prev_dst = 0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const GraphEdge& ge = g.edges[e];
      CHECK(ge.dst >= prev_dst);  // grouped by destination
      prev_dst = ge.dst;
      if (ge.rel == Relation::Self) {
        CHECK(ge.src == ge.dst);
        ++self;
      } else {
        ++cross;
        CHECK(expect.count({ge.src, ge.dst}) == 1);
        CHECK(ge.rel == expected_relation(d, ge.src, ge.dst));
      }
    }
    CHECK(self == n);
    CHECK(cross == expect.size());
  }
}

TEST_CASE("single-relation collapse keeps the edge set") {
  Rng rng(2);
  Dialogue d = random_dialogue(rng, 12, 3);
  SpeakerGraph full = build_graph(d, 4, false);
  SpeakerGraph flat = build_graph(d, 4, true);
  REQUIRE(full.edges.size() == flat.edges.size());
  for (std::size_t e = 0; e < flat.edges.size(); ++e) {
    CHECK(flat.edges[e].src == full.edges[e].src);
    CHECK(flat.edges[e].dst == full.edges[e].dst);
    if (flat.edges[e].rel != Relation::Self)
      CHECK(flat.edges[e].rel == Relation::SameSpeakerPast);
  }
}

TEST_CASE("attention weights are a distribution over each in-neighborhood") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 1 + rng.below(40);
    Dialogue d = random_dialogue(rng, n, 2);
    SpeakerGraph g = build_graph(d, 10);
    GcnParams p = make_gcn(5, 1, false, rng);
    Matrix feats = random_matrix(rng, n, 5);
    gcn_apply(g, p, feats);
    REQUIRE(g.has_weights);
    std::vector<double> per_node(n, 0.0);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      CHECK(g.weights[e] >= 0.0);
      CHECK(g.weights[e] <= 1.0);
      per_node[g.edges[e].dst] += g.weights[e];
    }
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(per_node[i] - 1.0) < 1e-6);
  }
}

TEST_CASE("gcn_forward matches the naive per-node oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 1 + rng.below(14);
    std::size_t dd = 2 + rng.below(5);
    Dialogue d = random_dialogue(rng, n, 1 + rng.below(3));
    SpeakerGraph g = build_graph(d, 3);
    SelfTermMode mode = trial % 2 == 0 ? SelfTermMode::OncePerRelation
                                       : SelfTermMode::PerNeighbor;
    GcnParams p = make_gcn(dd, 2, false, rng);
    Matrix feats = random_matrix(rng, n, dd);
    Matrix out = gcn_apply(g, p, feats, mode);
    Matrix ref = naive_gcn(g, p, feats, g.weights, mode);
    CHECK(max_abs_diff(out, ref) < 1e-8);
  }
}

TEST_CASE("gcn output is invariant to renaming speakers consistently") {
  Rng rng(5);
  Dialogue d = random_dialogue(rng, 10, 2);
  Dialogue renamed = d;
  for (auto& u : renamed.utterances) u.speaker = u.speaker == "P0" ? "alice" : "bob";
  GcnParams p = make_gcn(4, 2, false, rng);
  Matrix feats = random_matrix(rng, 10, 4);
  SpeakerGraph g1 = build_graph(d, 5);
  SpeakerGraph g2 = build_graph(renamed, 5);
  CHECK(max_abs_diff(gcn_apply(g1, p, feats), gcn_apply(g2, p, feats)) == 0.0);
}

TEST_CASE("attention and aggregation gradients match finite differences") {
  Rng rng(6);
  Dialogue d = random_dialogue(rng, 6, 2);
  SpeakerGraph g = build_graph(d, 3);
  GcnParams p = make_gcn(3, 2, false, rng);
  Matrix feats = random_matrix(rng, 6, 3);

  auto loss_of = [&](const GcnParams& q, const Matrix& x) {
    SpeakerGraph gg = g;
    Matrix out = gcn_apply(gg, q, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) acc += out.data()[i] * out.data()[i];
    return acc / static_cast<double>(out.size());
  };

  Tape tape;
  GcnVars vars = gcn_leaves(tape, p);
  Var x = tape.leaf(feats, true);
  Var omega = edge_attention(tape, g, p, vars, x);
  Var out = gcn_forward(tape, g, p, vars, x, omega);
  Var loss = tape.mean_all(tape.square(out));
  tape.backward(loss);

  const double h = 1e-5;
  auto fd_check = [&](const Matrix& grad, auto mutate) {
    for (std::size_t i = 0; i < grad.size(); i += 2) {
      GcnParams plus = p, minus = p;
      Matrix xp = feats, xm = feats;
      mutate(plus, xp, i, h);
      mutate(minus, xm, i, -h);
      double fd = (loss_of(plus, xp) - loss_of(minus, xm)) / (2.0 * h);
      double denom = std::max({1.0, std::fabs(fd), std::fabs(grad.data()[i])});
      CHECK(std::fabs(fd - grad.data()[i]) / denom < 1e-5);
    }
  };
  fd_check(tape.grad(vars.attn_hidden), [](GcnParams& q, Matrix&, std::size_t i,
                                           double eps) { q.attn_hidden.data()[i] += eps; });
  fd_check(tape.grad(vars.attn_out), [](GcnParams& q, Matrix&, std::size_t i,
                                        double eps) { q.attn_out.data()[i] += eps; });
  fd_check(tape.grad(vars.relation_w[1]), [](GcnParams& q, Matrix&, std::size_t i,
                                             double eps) { q.relation_w[1].data()[i] += eps; });
  fd_check(tape.grad(vars.self_w), [](GcnParams& q, Matrix&, std::size_t i,
                                      double eps) { q.self_w.data()[i] += eps; });
  fd_check(tape.grad(x), [](GcnParams&, Matrix& xx, std::size_t i, double eps) {
    xx.data()[i] += eps;
  });
}

TEST_CASE("edge list export is one line per edge") {
  Rng rng(7);
  Dialogue d = random_dialogue(rng, 5, 2);
  SpeakerGraph g = build_graph(d, 2);
  std::string text = export_edge_list(g);
  std::size_t lines = 0;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    ++lines;
    std::stringstream ls(line);
    std::size_t src, dst;
    std::string rel, w;
    ls >> src >> dst >> rel >> w;
    CHECK(src < 5);
    CHECK(dst < 5);
    CHECK(w == "nan");  // no attention pass yet
  }
  CHECK(lines == g.edges.size());

  GcnParams p = make_gcn(3, 1, false, rng);
  gcn_apply(g, p, random_matrix(rng, 5, 3));
  std::string weighted = export_edge_list(g);
  CHECK(weighted.find("nan") == std::string::npos);
}

TEST_CASE("an isolated node keeps a unit self multiplier") {
  Dialogue d;
  d.dialogue_id = "solo";
  Utterance u;
  u.utt_id = "u0";
  u.speaker = "P0";
  d.utterances.push_back(u);
  SpeakerGraph g = build_graph(d, 10);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].rel == Relation::Self);
  Rng rng(8);
  GcnParams p = make_gcn(3, 2, false, rng);
  Matrix out = gcn_apply(g, p, random_matrix(rng, 1, 3));
  CHECK(out.all_finite());
}
