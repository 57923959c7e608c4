#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "test_util.hpp"
#include "walkforge/incremental.hpp"
#include "walkforge/synth.hpp"

using namespace walkforge;
using testutil::tx;

namespace {

std::string serialize(const WalkCorpus& c) {
  std::ostringstream out;
  write_corpus(out, c);
  return out.str();
}

MHConfig small_cfg(std::uint32_t n = 4) {
  MHConfig c;
  c.num_walks = n;
  c.walk_length = 5;
  c.seed = 7;
  return c;
}

bool contains_any(const Walk& w, const std::vector<NodeId>& nodes) {
  return std::ranges::any_of(w, [&](NodeId u) { return std::ranges::find(nodes, u) != nodes.end(); });
}

}  // namespace

TEST(Plan, EmptyDeltaGivesEmptyPlan) {
  const auto g = ingest_edges(std::vector{tx("a", "b"), tx("b", "c")});
  const auto corpus = generate_corpus(g, small_cfg(), WalkMode::Uniform);
  const auto [next, d] = apply_batch(g, std::vector<RawTx>{});
  EXPECT_TRUE(plan_update(corpus, d).empty());
}

TEST(Plan, IndexLookup) {
  WalkCorpus c;
  c.walks = {Walk{1, 2}, Walk{0}, Walk{2}, Walk{0, 1}};
  c.index = NodeIndex::build(c.walks, 3);
  GraphDelta d;
  d.affected_nodes = {1};
  const auto p = plan_update(c, d);
  EXPECT_EQ(p.affected_walks, (std::vector<std::uint32_t>{0, 3}));
}

TEST(Plan, VersionMismatch) {
  WalkCorpus c;
  c.graph_version = 2;
  GraphDelta d;
  d.from_version = 1;
  EXPECT_THROW(plan_update(c, d), StateError);
}

TEST(Plan, MatchesLinearScanOnEvolvingGraph) {
  const auto series = segment_schedule(testutil::random_rows(200, 700, 51), 0.5, 0.1);
  auto corpus = generate_corpus(series.graphs[0], small_cfg(), WalkMode::Uniform);
  for (std::size_t k = 0; k < series.deltas.size(); ++k) {
    const auto& d = series.deltas[k];
    const auto plan = plan_update(corpus, d);
    std::vector<std::uint32_t> expect;
    for (std::uint32_t i = 0; i < corpus.walks.size(); ++i)
      if (contains_any(corpus.walks[i], d.affected_nodes)) expect.push_back(i);
    EXPECT_EQ(plan.affected_walks, expect);
    EXPECT_EQ(plan.new_nodes, d.new_nodes);
    for (NodeId u : plan.new_nodes) EXPECT_EQ(std::ranges::count(plan.affected_nodes, u), 0);
    corpus = unbiased_update(std::move(corpus), series.graphs[k + 1], d, small_cfg(), WalkMode::Uniform);
  }
}

TEST(Trim, Examples) {
  const std::vector<NodeId> b{1};
  EXPECT_EQ(trim_walk(Walk{0, 1, 2, 1}, b), (Walk{0, 1}));
  EXPECT_EQ(trim_walk(Walk{1, 2}, b), Walk{1});
  const std::vector<NodeId> d{3};
  EXPECT_EQ(trim_walk(Walk{0, 2, 3}, d), (Walk{0, 2, 3}));
  EXPECT_THROW(trim_walk(Walk{0, 2}, d), PreconditionError);
}

TEST(Unbiased, EmptyDeltaOnlyBumpsVersion) {
  const auto g = ingest_edges(testutil::random_rows(30, 80, 3));
  const auto corpus = generate_corpus(g, small_cfg(), WalkMode::Uniform);
  const auto [next, d] = apply_batch(g, std::vector<RawTx>{});
  const auto updated = unbiased_update(corpus, next, d, small_cfg(), WalkMode::Uniform);
  EXPECT_EQ(updated.walks, corpus.walks);
  EXPECT_EQ(updated.graph_version, 1u);
}

TEST(Unbiased, IsolatedNewNodeGainsLengthOneWalks) {
  const auto g = ingest_edges(std::vector{tx("a", "b"), tx("b", "c")});
  const auto corpus = generate_corpus(g, small_cfg(3), WalkMode::Uniform);
  GraphDelta d;
  d.from_version = 0;
  d.to_version = 1;
  d.new_nodes = {3};
  d.new_addresses = {"z"};
  const auto next = apply_delta(g, d);
  const auto updated = unbiased_update(corpus, next, d, small_cfg(3), WalkMode::Uniform);
  ASSERT_EQ(updated.size(), corpus.size() + 3);
  for (std::size_t i = corpus.size(); i < updated.size(); ++i) EXPECT_EQ(updated.walks[i], Walk{3});
  EXPECT_EQ(updated.index.walks_containing(3).size(), 3u);
}

TEST(Unbiased, PropertiesOnEvolvingGraph) {
  for (WalkMode mode : {WalkMode::Uniform, WalkMode::MH}) {
    const auto series = segment_schedule(testutil::random_rows(150, 600, 57), 0.5, 0.1);
    const auto cfg = small_cfg();
    auto corpus = generate_corpus(series.graphs[0], cfg, mode);
    for (std::size_t k = 0; k < series.deltas.size(); ++k) {
      const auto& d = series.deltas[k];
      const auto& g_next = series.graphs[k + 1];
      const auto plan = plan_update(corpus, d);
      UpdateReport rep;
      const auto updated = unbiased_update(corpus, g_next, d, cfg, mode, &rep);
      ASSERT_EQ(updated.size(), corpus.size() + cfg.num_walks * d.new_nodes.size());
      EXPECT_EQ(updated.graph_version, g_next.version());
      for (std::uint32_t i = 0; i < corpus.size(); ++i) {
        const auto& before = corpus.walks[i];
        const auto& after = updated.walks[i];
        if (!std::ranges::binary_search(plan.affected_walks, i)) {
          EXPECT_EQ(after, before);
          continue;
        }
        const Walk prefix = trim_walk(before, d.affected_nodes);
        ASSERT_GE(after.size(), prefix.size());
        EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), after.begin()));
        EXPECT_LE(after.size(), cfg.walk_length);
      }
      EXPECT_TRUE(updated.index == NodeIndex::build(updated.walks, g_next.num_nodes()));
      EXPECT_LE(rep.draws, (plan.affected_walks.size() + cfg.num_walks * d.new_nodes.size()) * (cfg.walk_length - 1));
      EXPECT_EQ(rep.affected_walks, plan.affected_walks.size());
      EXPECT_EQ(rep.walks_after, updated.size());
      corpus = updated;
    }
  }
}

TEST(Unbiased, ResumedUniformWalksFollowEdgesOfNewGraph) {
  const auto series = segment_schedule(testutil::random_rows(100, 400, 61), 0.5, 0.25);
  auto corpus = generate_corpus(series.graphs[0], small_cfg(), WalkMode::Uniform);
  for (std::size_t k = 0; k < series.deltas.size(); ++k)
    corpus = unbiased_update(std::move(corpus), series.graphs[k + 1], series.deltas[k], small_cfg(),
                             WalkMode::Uniform);
  const auto& g = series.graphs.back();
  for (const auto& w : corpus.walks) {
    for (std::size_t i = 1; i < w.size(); ++i) {
      ASSERT_NE(g.find_edge(w[i - 1], w[i]), nullptr);
    }
    if (w.size() < 5) {
      EXPECT_EQ(g.out_degree(w.back()), 0u);
    }
  }
}

TEST(Unbiased, ModeMismatchIsRejected) {
  const auto series = segment_schedule(testutil::random_rows(40, 120, 7), 0.5, 0.5);
  const auto corpus = generate_corpus(series.graphs[0], small_cfg(), WalkMode::Uniform);
  EXPECT_THROW(unbiased_update(corpus, series.graphs[1], series.deltas[0], small_cfg(), WalkMode::MH),
               ModeMismatchError);
  auto other = small_cfg();
  other.walk_length = 6;
  EXPECT_THROW(naive_update(corpus, series.graphs[1], series.deltas[0], other, WalkMode::Uniform), ModeMismatchError);
  const auto mh = generate_corpus(series.graphs[0], small_cfg(), WalkMode::MH);
  auto h3 = small_cfg();
  h3.hops = 3;
  EXPECT_THROW(unbiased_update(mh, series.graphs[1], series.deltas[0], h3, WalkMode::MH), ModeMismatchError);
}

TEST(Unbiased, WrongSuccessorGraphIsRejected) {
  const auto series = segment_schedule(testutil::random_rows(40, 120, 7), 0.5, 0.25);
  const auto corpus = generate_corpus(series.graphs[0], small_cfg(), WalkMode::Uniform);
  EXPECT_THROW(unbiased_update(corpus, series.graphs[2], series.deltas[0], small_cfg(), WalkMode::Uniform),
               StateError);
  EXPECT_THROW(unbiased_update(corpus, series.graphs[2], series.deltas[1], small_cfg(), WalkMode::Uniform),
               StateError);
}

TEST(Naive, ExistingNodesOnlyLeavesWalksUnchanged) {
  const auto g = ingest_edges(std::vector{tx("a", "b", 1, 1), tx("b", "c", 1, 1)});
  const auto corpus = generate_corpus(g, small_cfg(), WalkMode::Uniform);
  const auto [next, d] = apply_batch(g, std::vector{tx("c", "a", 1, 2)});
  const auto updated = naive_update(corpus, next, d, small_cfg(), WalkMode::Uniform);
  EXPECT_EQ(updated.walks, corpus.walks);
  EXPECT_EQ(updated.graph_version, 1u);
}

TEST(Naive, NewNodeGetsExactlyNWalks) {
  const auto g = ingest_edges(std::vector{tx("a", "b", 1, 1), tx("b", "c", 1, 1)});
  const auto corpus = generate_corpus(g, small_cfg(), WalkMode::Uniform);
  const auto [next, d] = apply_batch(g, std::vector{tx("c", "z", 1, 2)});
  const auto updated = naive_update(corpus, next, d, small_cfg(), WalkMode::Uniform);
  ASSERT_EQ(updated.size(), corpus.size() + 4);
  EXPECT_TRUE(std::equal(corpus.walks.begin(), corpus.walks.end(), updated.walks.begin()));
  for (std::size_t i = corpus.size(); i < updated.size(); ++i) EXPECT_EQ(updated.walks[i].front(), 3u);
}

TEST(Scratch, AliasOfGenerateCorpus) {
  const auto series = segment_schedule(testutil::random_rows(60, 200, 9), 0.5, 0.5);
  const auto cfg = small_cfg();
  const auto corpus = generate_corpus(series.graphs[0], cfg, WalkMode::MH);
  UpdateReport rep;
  const auto fresh =
      update_corpus(UpdateStrategy::Scratch, corpus, series.graphs[1], series.deltas[0], cfg, WalkMode::MH, &rep);
  EXPECT_EQ(serialize(fresh), serialize(generate_corpus(series.graphs[1], cfg, WalkMode::MH)));
  EXPECT_EQ(serialize(from_scratch(series.graphs[1], cfg, WalkMode::MH)), serialize(fresh));
  EXPECT_EQ(rep.strategy, UpdateStrategy::Scratch);
  EXPECT_EQ(rep.draws, fresh.draws);
}

TEST(Strategy, ParseNames) {
  EXPECT_EQ(parse_update_strategy("naive"), UpdateStrategy::Naive);
  EXPECT_EQ(to_string(UpdateStrategy::Unbiased), "unbiased");
  EXPECT_THROW(parse_update_strategy("lazy"), ConfigError);
}
