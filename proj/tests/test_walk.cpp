#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "walkforge/incremental.hpp"
#include "walkforge/synth.hpp"
#include "walkforge/walk.hpp"

using namespace walkforge;
using testutil::tx;

namespace {

MHConfig mh_cfg(unsigned h = 2, double alpha_min = 0.5, std::uint32_t l = 5) {
  MHConfig c;
  c.hops = h;
  c.alpha_min = alpha_min;
  c.walk_length = l;
  return c;
}

std::string serialize(const WalkCorpus& c) {
  std::ostringstream out;
  write_corpus(out, c);
  return out.str();
}

}  // namespace

TEST(UniformWalk, SinkAndForcedPath) {
  const auto g = ingest_edges(std::vector{tx("a", "b"), tx("b", "c")});
  Rng rng(1);
  EXPECT_EQ(uniform_walk(g, 2, 5, rng), Walk{2});
  EXPECT_EQ(uniform_walk(g, 0, 5, rng), (Walk{0, 1, 2}));
}

TEST(UniformWalk, StarLeavesWithinBinomialBound) {
  std::vector<RawTx> rows;
  const int leaves = 7;
  for (int i = 0; i < leaves; ++i) rows.push_back(tx("hub", "leaf" + std::to_string(i)));
  const auto g = ingest_edges(rows);
  const int trials = 100000;
  std::vector<int> hits(g.num_nodes(), 0);
  Rng rng(77);
  for (int t = 0; t < trials; ++t) {
    const auto w = uniform_walk(g, 0, 2, rng);
    ASSERT_EQ(w.size(), 2u);
    ++hits[w[1]];
  }
  const double p = 1.0 / leaves;
  const double sigma = std::sqrt(trials * p * (1 - p));
  for (NodeId u = 1; u < g.num_nodes(); ++u) EXPECT_NEAR(hits[u], trials * p, 3 * sigma);
}

TEST(MHAcceptance, SymmetricPairIsOne) {
  const auto g = ingest_edges(synth::bidirected_cycle({1.0, 1.0, 1.0, 1.0}));
  EXPECT_DOUBLE_EQ(mh_acceptance(g, 0, 2, mh_cfg()), 1.0);
}

TEST(MHAcceptance, ReciprocalProposalSubstitution) {
  // curr -> x -> v -> y -> curr, plus two extra senders into curr:
  // D_in(curr)+1 = 4, D_in(v)+1 = 2, both directions two hops.
  const auto g = ingest_edges(
      std::vector{tx("curr", "x"), tx("x", "v"), tx("v", "y"), tx("y", "curr"), tx("z1", "curr"), tx("z2", "curr")});
  const NodeId curr = g.id_of("curr"), v = g.id_of("v");
  MHConfig c = mh_cfg();
  c.target = StatKind::DIn;
  EXPECT_DOUBLE_EQ(mh_acceptance(g, curr, v, c), 0.5);
}

TEST(MHAcceptance, UnreachableReturnUsesNominalProbability) {
  const auto g = ingest_edges(
      std::vector{tx("curr", "x"), tx("x", "v"), tx("z1", "curr"), tx("z2", "curr"), tx("z3", "curr")});
  const NodeId curr = g.id_of("curr"), v = g.id_of("v");
  MHConfig c = mh_cfg();
  const double expect = (1.0 + 1.0) * 0.1 / ((3.0 + 1.0) * 0.5);
  EXPECT_DOUBLE_EQ(mh_acceptance(g, curr, v, c), expect);
  c.proposal = ProposalKind::ExpDecay;
  EXPECT_DOUBLE_EQ(mh_acceptance(g, curr, v, c), std::min(1.0, 2.0 * 0.1 / (4.0 * std::exp(-0.5 * 2))));
}

TEST(MHAcceptance, RejectsCandidateAtWrongDistance) {
  const auto g = ingest_edges(std::vector{tx("a", "b"), tx("b", "c")});
  EXPECT_THROW(mh_acceptance(g, 0, 1, mh_cfg(2)), PreconditionError);
}

TEST(MHAcceptance, BoundsAndOracleAgreement) {
  const auto g = ingest_edges(testutil::random_rows(40, 120, 13));
  const auto d = oracle::all_pairs_hops(g);
  for (StatKind k : {StatKind::VIn, StatKind::VOut, StatKind::Freq, StatKind::DIn, StatKind::DOut})
    for (ProposalKind q : {ProposalKind::Reciprocal, ProposalKind::ExpDecay}) {
      MHConfig c = mh_cfg(2);
      c.target = k;
      c.proposal = q;
      MHSampler s(g, c);
      for (NodeId u = 0; u < g.num_nodes(); ++u)
        for (NodeId v : s.frontier(u)) {
          const double a = s.acceptance(u, v);
          ASSERT_GE(a, 0.0);
          ASSERT_LE(a, 1.0);
          EXPECT_NEAR(a, oracle::acceptance(g, d, u, v, c), 1e-12);
        }
    }
}

TEST(MHWalk, FullAcceptanceIsPureLeapChain) {
  const auto g = ingest_edges(testutil::random_rows(60, 200, 17));
  MHConfig c = mh_cfg(2, 1.0, 8);
  Rng rng(5);
  std::size_t accepted = 0, proposals = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    MHSampler s(g, c);
    Walk w{u};
    s.extend(w, c.walk_length - 1, rng);
    proposals += s.draws();
    accepted += w.size() - 1;
  }
  EXPECT_EQ(accepted, proposals);
}

TEST(MHWalk, SinkEndsWalkEarly) {
  const auto g = ingest_edges(std::vector{tx("a", "b")});
  Rng rng(3);
  const auto w = mh_walk(g, 0, mh_cfg(1, 0.5, 5), rng);
  EXPECT_EQ(w, (Walk{0, 1}));
}

TEST(MHWalk, LeapValidityAndStepBound) {
  const auto g = ingest_edges(testutil::random_rows(80, 260, 23));
  const auto d = oracle::all_pairs_hops(g);
  for (unsigned h : {1u, 2u, 3u}) {
    MHConfig c = mh_cfg(h, 0.2, 6);
    MHSampler s(g, c);
    Rng rng(h);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      const auto before = s.draws();
      Walk w{u};
      s.extend(w, c.walk_length - 1, rng);
      EXPECT_LE(s.draws() - before, c.walk_length - 1);
      for (std::size_t i = 1; i < w.size(); ++i) ASSERT_EQ(d[w[i - 1]][w[i]], static_cast<int>(h));
    }
  }
}

TEST(MHWalk, ExpansionPathStaysOnExactFrontier) {
  const auto g = ingest_edges(testutil::random_rows(200, 1600, 29));
  const auto d = oracle::all_pairs_hops(g);
  MHConfig c = mh_cfg(2, 0.5, 6);
  c.frontier_cap = 4;
  MHSampler s(g, c);
  Rng rng(9);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    Walk w{u};
    s.extend(w, c.walk_length - 1, rng);
    for (std::size_t i = 1; i < w.size(); ++i) ASSERT_EQ(d[w[i - 1]][w[i]], 2);
  }
}

TEST(MHWalk, OneStepFrequenciesMatchExactMatrix) {
  const auto g = ingest_edges(synth::strongly_connected(6, 0.3, 4));
  MHConfig c = mh_cfg(1, 0.0);
  c.target = StatKind::VIn;
  const auto P = oracle::mh_matrix(g, c);
  MHSampler s(g, c);
  Rng rng(11);
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<double>> counts(n, std::vector<double>(n, 0.0));
  std::vector<double> visits(n, 0.0);
  NodeId x = 0;
  for (int t = 0; t < 300000; ++t) {
    const NodeId y = s.step(x, rng);
    ASSERT_NE(y, kNoNode);
    counts[x][y] += 1;
    visits[x] += 1;
    x = y;
  }
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = 0; v < n; ++v) EXPECT_NEAR(counts[u][v] / visits[u], P[u][v], 0.01) << u << "->" << v;
}

TEST(Corpus, CardinalityAndIndex) {
  const auto g = ingest_edges(std::vector{tx("a", "b"), tx("b", "c")});
  MHConfig c;
  c.num_walks = 2;
  const auto corpus = generate_corpus(g, c, WalkMode::Uniform);
  EXPECT_EQ(corpus.size(), 6u);
  for (NodeId u = 0; u < 3; ++u) EXPECT_FALSE(corpus.index.walks_containing(u).empty());
  EXPECT_EQ(corpus.walks[4], Walk{2});
}

TEST(Corpus, IndexEqualsRebuildAndEveryNodeOriginatesN) {
  const auto g = ingest_edges(testutil::random_rows(500, 1500, 31));
  for (WalkMode mode : {WalkMode::Uniform, WalkMode::MH}) {
    MHConfig c;
    c.num_walks = 3;
    const auto corpus = generate_corpus(g, c, mode);
    std::vector<std::size_t> origins(g.num_nodes(), 0);
    for (const auto& w : corpus.walks) ++origins[w.front()];
    for (auto k : origins) EXPECT_EQ(k, 3u);
    // Oracle: linear scan membership.
    for (NodeId u = 0; u < g.num_nodes(); u += 7) {
      std::vector<std::uint32_t> expect;
      for (std::uint32_t i = 0; i < corpus.walks.size(); ++i)
        if (std::find(corpus.walks[i].begin(), corpus.walks[i].end(), u) != corpus.walks[i].end())
          expect.push_back(i);
      const auto got = corpus.index.walks_containing(u);
      EXPECT_TRUE(std::ranges::equal(got, expect));
    }
  }
}

TEST(Corpus, DeterministicAndThreadIndependent) {
  const auto g = ingest_edges(testutil::random_rows(300, 900, 37));
  for (WalkMode mode : {WalkMode::Uniform, WalkMode::MH}) {
    MHConfig c;
    c.seed = 99;
    const auto a = serialize(generate_corpus(g, c, mode, 1));
    EXPECT_EQ(a, serialize(generate_corpus(g, c, mode, 1)));
    EXPECT_EQ(a, serialize(generate_corpus(g, c, mode, 4)));
    c.seed = 100;
    EXPECT_NE(a, serialize(generate_corpus(g, c, mode, 1)));
  }
}

TEST(Corpus, FileRoundTrip) {
  const auto g = ingest_edges(testutil::random_rows(50, 150, 41));
  for (WalkMode mode : {WalkMode::Uniform, WalkMode::MH}) {
    MHConfig c;
    c.num_walks = 2;
    c.target = StatKind::VOut;
    c.proposal = ProposalKind::ExpDecay;
    const auto corpus = generate_corpus(g, c, mode);
    const auto text = serialize(corpus);
    std::istringstream in(text);
    const auto back = read_corpus(in);
    EXPECT_EQ(back.walks, corpus.walks);
    EXPECT_EQ(back.mode, mode);
    EXPECT_TRUE(same_sampler(back, corpus.config, corpus.mode));
    EXPECT_EQ(serialize(back), text);
  }
  std::istringstream bad("WALKFORGE-WALKS v1 graph_version=0 n=1 l=3 mode=uniform\n0 1\n0 x\n");
  try {
    read_corpus(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Resume, FullPrefixUnchangedAndForcedPath) {
  const auto g = ingest_edges(std::vector{tx("a", "b"), tx("b", "c")});
  MHConfig c;
  c.walk_length = 3;
  Rng rng(1);
  EXPECT_EQ(resume_walk(g, Walk{0, 1, 2}, c, WalkMode::Uniform, rng), (Walk{0, 1, 2}));
  EXPECT_EQ(resume_walk(g, Walk{0}, c, WalkMode::Uniform, rng), (Walk{0, 1, 2}));
  EXPECT_THROW(resume_walk(g, Walk{}, c, WalkMode::Uniform, rng), PreconditionError);
}

TEST(Resume, SuffixDistributionMatchesFreshWalks) {
  const auto g = ingest_edges(synth::strongly_connected(5, 0.35, 8));
  for (WalkMode mode : {WalkMode::Uniform, WalkMode::MH}) {
    MHConfig c;
    c.walk_length = 5;
    c.hops = 1;
    const NodeId x = 2;
    std::map<Walk, std::size_t> resumed, fresh;
    Rng rng(mode == WalkMode::MH ? 3 : 4);
    for (int i = 0; i < 10000; ++i) {
      Walk r = resume_walk(g, Walk{0, x}, c, mode, rng);
      ++resumed[Walk(r.begin() + 1, r.end())];
      MHConfig short_cfg = c;
      short_cfg.walk_length = c.walk_length - 1;
      ++fresh[resume_walk(g, Walk{x}, short_cfg, mode, rng)];
    }
    EXPECT_GE(fresh.size(), 5u);
    EXPECT_GT(oracle::chi2_two_sample_p(resumed, fresh), 0.001) << to_string(mode);
  }
}

TEST(DefactoLength, Examples) {
  WalkCorpus c;
  c.walks = {Walk{0, 1, 2, 3, 4}, Walk{1, 2, 3, 4, 0}};
  EXPECT_DOUBLE_EQ(mean_defacto_length(c), 5.0);
  c.walks = {Walk{0}, Walk{1, 2, 3, 4, 0}};
  EXPECT_DOUBLE_EQ(mean_defacto_length(c), 3.0);
  c.walks.clear();
  EXPECT_THROW(mean_defacto_length(c), PreconditionError);
}

TEST(MHConfig, Validation) {
  MHConfig c;
  c.walk_length = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MHConfig{};
  c.nominal_return = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MHConfig{};
  c.alpha_min = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}
