// Copyright 2026 The Prelude Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prelude/ctl.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <random>

#include "prelude/errors.hpp"
#include "test_util.hpp"

namespace prelude {
namespace {

using F = TwoSdxFixture;
constexpr AsId kW = 6;

TernaryRule flow(std::string_view literal) { return encode(parse_flow_spec(literal)); }

Network fixture_network(Backend backend = Backend::kGmw) {
  const auto f = two_sdx_fixture();
  NetworkOptions o;
  o.backend = backend;
  return Network(f.topo, {{F::kPrefix, F::kZ}}, o);
}

// The fixture plus W, a second provider of Z and customer of M. M still
// prefers (M B Z) because B has the lower id.
Topology with_w(bool keep_b_m) {
  auto t = two_sdx_fixture().topo;
  t.graph.add_customer_provider(F::kZ, kW);
  t.graph.add_customer_provider(kW, F::kM);
  if (!keep_b_m) t.graph.remove_edge(F::kB, F::kM);
  return t;
}

bool oracle_loops(const Network& n) {
  for (const auto& [prefix, rib] : n.ribs()) {
    if (!forwarding_oracle(n.topology().graph, rib, n.active_policies(), prefix).empty()) return true;
  }
  return false;
}

class TwoSdxSequence : public ::testing::TestWithParam<Backend> {};

TEST_P(TwoSdxSequence, SecondRuleClosesLoop) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network(GetParam());
  EXPECT_TRUE(n.handle_install(f.r_b).accepted());
  const Verdict v = n.handle_install(f.r_n);
  EXPECT_FALSE(v.accepted());
  EXPECT_EQ(v.reason, Reason::kLoopDetected);
  EXPECT_EQ(v.closing_sdx, std::optional<SdxId>(F::kSdx1));
  EXPECT_EQ(to_string(v), "reject:loop_detected@sdx1");
  EXPECT_FALSE(n.is_active(f.r_n.id));
  EXPECT_FALSE(oracle_loops(n));
}

TEST_P(TwoSdxSequence, ReverseOrderClosesAtOtherSdx) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network(GetParam());
  EXPECT_TRUE(n.handle_install(f.r_n).accepted());
  const Verdict v = n.handle_install(f.r_b);
  EXPECT_EQ(v.reason, Reason::kLoopDetected);
  EXPECT_EQ(v.closing_sdx, std::optional<SdxId>(F::kSdx2));
}

TEST_P(TwoSdxSequence, DisjointPortsAccepted) {
  auto f = two_sdx_fixture();
  f.r_n.rule = flow("proto=tcp,dst_port=22");
  Network n = fixture_network(GetParam());
  EXPECT_TRUE(n.handle_install(f.r_b).accepted());
  EXPECT_TRUE(n.handle_install(f.r_n).accepted());
  EXPECT_FALSE(oracle_loops(n));
}

INSTANTIATE_TEST_SUITE_P(Backends, TwoSdxSequence, ::testing::Values(Backend::kGmw, Backend::kYao),
                         [](const auto& info) { return to_string(info.param); });

TEST(InstallTest, RemoveThenRetryAccepts) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network();
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  ASSERT_FALSE(n.handle_install(f.r_n).accepted());
  const RemoveResult r = n.handle_remove(F::kSdx1, f.r_b.id);
  EXPECT_TRUE(r.found);
  EXPECT_TRUE(n.handle_install(f.r_n).accepted());
  EXPECT_TRUE(forwarding_oracle(n.topology().graph, n.rib(F::kPrefix), n.active_policies(), F::kPrefix).empty());
}

TEST(InstallTest, RemovedRuleIsInvisible) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network();
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  EXPECT_EQ(n.table(F::kSdx1).count(F::kPrefix), 1u);
  n.handle_remove(F::kSdx1, f.r_b.id);
  EXPECT_EQ(n.table(F::kSdx1).count(F::kPrefix), 0u);
  EXPECT_TRUE(oracle_query(n.table(F::kSdx1), f.r_n.rule, F::kPrefix).hops.empty());
  EXPECT_FALSE(n.is_active(f.r_b.id));
}

TEST(InstallTest, UnknownRemoveIsLoggedNoOp) {
  Network n = fixture_network();
  const RemoveResult r = n.handle_remove(F::kSdx1, 99);
  EXPECT_FALSE(r.found);
  ASSERT_FALSE(n.log().empty());
  EXPECT_EQ(n.log().back().kind, "remove_unknown");
}

TEST(InstallTest, NotificationFanOutMatchesSubscribers) {
  auto f = two_sdx_fixture();
  f.r_n.rule = flow("proto=tcp,dst_port=22");
  Network n = fixture_network();
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  ASSERT_TRUE(n.handle_install(f.r_n).accepted());
  // r_N's exploration consulted B at SDX 1.
  const std::size_t subs = n.subscriber_count(F::kSdx1, F::kPrefix, F::kB);
  EXPECT_EQ(subs, 1u);
  const std::size_t frames = n.control_frames();
  const RemoveResult r = n.handle_remove(F::kSdx1, f.r_b.id);
  EXPECT_EQ(r.notified, subs);
  EXPECT_EQ(n.control_frames(), frames + subs);
  ASSERT_EQ(r.reverified.size(), 1u);
  EXPECT_EQ(r.reverified[0].first, f.r_n.id);
  EXPECT_TRUE(r.reverified[0].second.accepted());
}

TEST(InstallTest, RejectsMalformedPolicy) {
  auto f = two_sdx_fixture();
  Network n = fixture_network();
  f.r_b.deflect_to = F::kZ;
  EXPECT_THROW(n.handle_install(f.r_b), InvalidInput);
  EXPECT_THROW(n.handle_install(two_sdx_fixture().r_b, 0), InvalidInput);
}

TEST(InstallTest, BudgetExhaustionRejects) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network();
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  const Verdict v1 = n.check(f.r_n, 1);
  EXPECT_EQ(v1.reason, Reason::kBudgetExhausted);
  EXPECT_EQ(n.check(f.r_n, 2).reason, Reason::kLoopDetected);
  EXPECT_EQ(n.check(f.r_n).max_chain, 2u);
  EXPECT_FALSE(n.is_active(f.r_n.id));
}

TEST(InstallTest, QueryFailureRejects) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network();
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  n.set_unreachable({F::kSdx1});
  auto r_n = f.r_n;
  r_n.rule = flow("proto=tcp,dst_port=22");
  const Verdict v = n.handle_install(r_n);
  EXPECT_EQ(v.reason, Reason::kQueryFailed);
  EXPECT_FALSE(n.is_active(r_n.id));
  n.set_unreachable({});
  EXPECT_TRUE(n.handle_install(r_n).accepted());
}

TEST(BgpUpdateTest, PathChangeRemovesLoopPossibility) {
  const auto f = two_sdx_fixture();
  Network n(with_w(true), {{F::kPrefix, F::kZ}});
  ASSERT_EQ(n.rib(F::kPrefix).route(F::kM)->path, (std::vector<AsId>{F::kM, F::kB, F::kZ}));
  ASSERT_TRUE(n.handle_install(f.r_n).accepted());
  EXPECT_EQ(n.handle_install(f.r_b).reason, Reason::kLoopDetected);
  const auto verdicts = n.handle_bgp_update({BgpChange::Kind::kRemoveEdge, {F::kB, F::kM, EdgeKind::kCustomerProvider}});
  ASSERT_EQ(n.rib(F::kPrefix).route(F::kM)->path, (std::vector<AsId>{F::kM, kW, F::kZ}));
  ASSERT_EQ(verdicts.size(), 1u);
  EXPECT_EQ(verdicts[0].first, f.r_n.id);
  EXPECT_TRUE(verdicts[0].second.accepted());
  EXPECT_TRUE(n.handle_install(f.r_b).accepted());
  EXPECT_FALSE(oracle_loops(n));
}

TEST(BgpUpdateTest, NewLoopDeactivatesRule) {
  const auto f = two_sdx_fixture();
  Network n(with_w(false), {{F::kPrefix, F::kZ}});
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  ASSERT_TRUE(n.handle_install(f.r_n).accepted());
  EXPECT_FALSE(oracle_loops(n));
  const auto verdicts = n.handle_bgp_update({BgpChange::Kind::kAddEdge, {F::kB, F::kM, EdgeKind::kCustomerProvider}});
  // r_N fails; its retraction then notifies r_B, which still passes.
  ASSERT_EQ(verdicts.size(), 2u);
  EXPECT_EQ(verdicts[0].first, f.r_n.id);
  EXPECT_EQ(verdicts[0].second.reason, Reason::kLoopDetected);
  EXPECT_EQ(verdicts[1].first, f.r_b.id);
  EXPECT_TRUE(verdicts[1].second.accepted());
  EXPECT_FALSE(n.is_active(f.r_n.id));
  EXPECT_TRUE(n.is_active(f.r_b.id));
  EXPECT_FALSE(oracle_loops(n));
  const bool logged = std::any_of(n.log().begin(), n.log().end(), [&](const Event& e) {
    return e.kind == "deactivate" && e.rule == f.r_n.id;
  });
  EXPECT_TRUE(logged);
}

TEST(BgpUpdateTest, UnrelatedUpdateReverifiesNothing) {
  const auto f = two_sdx_fixture();
  Network n(with_w(true), {{F::kPrefix, F::kZ}});
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  EXPECT_TRUE(n.handle_bgp_update({BgpChange::Kind::kAddEdge, {F::kA, kW, EdgeKind::kPeer}}).empty());
}

TEST(BgpUpdateTest, CyclicHierarchyRejected) {
  Network n = fixture_network();
  EXPECT_THROW(n.handle_bgp_update({BgpChange::Kind::kAddEdge, {F::kA, F::kZ, EdgeKind::kCustomerProvider}}),
               InvalidInput);
  EXPECT_FALSE(n.topology().graph.relation(F::kA, F::kZ));
}

TEST(SidrTest, DisjointRulesStillRejected) {
  auto f = two_sdx_fixture();
  f.r_n.rule = flow("proto=tcp,dst_port=22");
  Network n = fixture_network();
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  EXPECT_TRUE(n.check(f.r_n).accepted());
  const Verdict s = n.sidr_check(f.r_n);
  EXPECT_EQ(s.reason, Reason::kLoopDetected);
}

TEST(SidrTest, GenuineLoopRejected) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network();
  ASSERT_TRUE(n.handle_install(f.r_b).accepted());
  EXPECT_FALSE(n.sidr_check(f.r_n).accepted());
}

TEST(PerfectKnowledgeTest, TwoSdx) {
  const auto f = two_sdx_fixture();
  EXPECT_EQ(perfect_knowledge_check(f.rib, {f.r_b}, f.r_n, kUnbounded).reason, Reason::kLoopDetected);
  EXPECT_EQ(perfect_knowledge_check(f.rib, {f.r_b}, f.r_n, 1).reason, Reason::kBudgetExhausted);
  EXPECT_TRUE(perfect_knowledge_check(f.rib, {}, f.r_n, 1).accepted());
  auto ssh = f.r_n;
  ssh.rule = flow("proto=tcp,dst_port=22");
  EXPECT_TRUE(perfect_knowledge_check(f.rib, {f.r_b}, ssh, kUnbounded).accepted());
  // B's earlier rule for all TCP shadows nothing of r_N, but an earlier
  // catch-all rule of N itself makes r_N inert.
  auto catch_all = f.r_n;
  catch_all.id = 9;
  catch_all.rule = flow("proto=tcp");
  catch_all.deflect_to = F::kM;
  EXPECT_EQ(perfect_knowledge_check(f.rib, {f.r_b}, catch_all, kUnbounded).reason, Reason::kLoopDetected);
  EXPECT_TRUE(perfect_knowledge_check(f.rib, {f.r_b, catch_all}, f.r_n, kUnbounded).accepted());
}

TEST(PrivacyTest, LogsCarryNoRuleBits) {
  const auto f = two_sdx_fixture();
  Network n = fixture_network();
  n.handle_install(f.r_b);
  n.handle_install(f.r_n);
  n.handle_remove(F::kSdx1, f.r_b.id);
  n.handle_install(f.r_n);
  const std::string bits_b = f.r_b.rule.to_string();
  const std::string pattern_b = f.r_b.rule.pattern().to_string();
  std::size_t served = 0;
  for (const Event& e : n.log()) {
    const std::string line = e.to_line();
    EXPECT_EQ(line.find(bits_b), std::string::npos);
    EXPECT_EQ(line.find(pattern_b), std::string::npos);
    if (e.kind == "serve_query") {
      ++served;
      EXPECT_FALSE(e.rule);  // holders learn prefix and k only
      EXPECT_TRUE(e.k);
      EXPECT_TRUE(e.verdict.empty());
      EXPECT_TRUE(e.detail.empty());
    }
    // Rule ids only ever appear at the SDX where that rule lives.
    if (e.rule && e.kind != "remove_unknown") {
      const SdxId home = *e.rule == f.r_b.id ? F::kSdx1 : F::kSdx2;
      EXPECT_EQ(e.sdx, home) << line;
    }
  }
  EXPECT_GT(served, 0u);
}

struct RandomCase {
  Topology topo;
  std::map<PrefixId, AsId> origins;
  std::vector<DeflectionPolicy> policies;
};

RandomCase random_case(std::uint64_t seed, std::size_t n_as = 50) {
  TopologyParams tp;
  tp.n_as = n_as;
  tp.n_sdx = 6;
  tp.sdx_min_members = 4;
  tp.sdx_max_members = 12;
  tp.seed = seed;
  RandomCase c;
  c.topo = generate_topology(tp);
  c.origins = choose_prefixes(c.topo.graph, 5, seed);
  PolicyParams pp;
  pp.seed = seed;
  pp.port_min = 1;
  pp.port_max = 6;
  c.policies = generate_policies(c.topo, compute_all_routes(c.topo.graph, c.origins), pp).policies;
  std::mt19937_64 rng(seed);
  std::shuffle(c.policies.begin(), c.policies.end(), rng);
  return c;
}

TEST(EngineTest, PlaintextAndSmpcAgree) {
  std::size_t rejected = 0;
  for (std::uint64_t seed : {1u, 2u}) {
    const RandomCase c = random_case(seed);
    NetworkOptions a;
    a.engine = QueryEngine::kPlaintext;
    NetworkOptions b;
    b.engine = QueryEngine::kSmpc;
    b.backend = seed == 1 ? Backend::kYao : Backend::kGmw;
    Network na(c.topo, c.origins, a);
    Network nb(c.topo, c.origins, b);
    for (const auto& p : c.policies) {
      const Verdict va = na.handle_install(p, 3);
      const Verdict vb = nb.handle_install(p, 3);
      ASSERT_EQ(to_string(va), to_string(vb)) << to_string(p);
      rejected += va.accepted() ? 0 : 1;
    }
    EXPECT_EQ(na.active_policies(), nb.active_policies());
    const auto served = std::count_if(nb.log().begin(), nb.log().end(),
                                      [](const Event& e) { return e.kind == "serve_query"; });
    EXPECT_GT(served, 0);
    std::printf("seed %llu: %zu policies, %ld secure queries\n", static_cast<unsigned long long>(seed),
                c.policies.size(), static_cast<long>(served));
  }
  EXPECT_GT(rejected, 0u);
}

// Over a common reference state: oracle loops => Prelude rejects => SIDR
// rejects, and Prelude rejections shrink as the threshold grows.
TEST(PropertyTest, ContainmentAndMonotonicity) {
  const std::vector<std::size_t> thresholds{1, 2, 3, 4, 6, 8, kUnbounded};
  std::size_t loops = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const RandomCase c = random_case(seed);
    NetworkOptions o;
    o.engine = QueryEngine::kPlaintext;
    Network n(c.topo, c.origins, o);
    for (const auto& p : c.policies) {
      const RibState& rib = n.rib(p.prefix);
      const bool unsafe = !loops_with(n.topology().graph, rib, n.active_policies(), p).empty();
      const auto pre = n.check_thresholds(p, thresholds);
      const auto sidr = n.sidr_check_thresholds(p, thresholds);
      for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (unsafe) ASSERT_FALSE(pre[i].accepted()) << to_string(p);
        if (!pre[i].accepted()) ASSERT_FALSE(sidr[i].accepted()) << to_string(p);
        if (i > 0 && !pre[i].accepted()) ASSERT_FALSE(pre[i - 1].accepted());
        const Verdict pk = perfect_knowledge_check(rib, n.active_policies(), p, thresholds[i]);
        if (!pk.accepted()) ASSERT_FALSE(pre[i].accepted()) << "perfect knowledge rejected what Prelude accepts";
      }
      EXPECT_EQ(perfect_knowledge_check(rib, n.active_policies(), p, kUnbounded).accepted(), !unsafe);
      if (unsafe) {
        ++loops;
      } else {
        n.admit(p);
      }
    }
  }
  EXPECT_GT(loops, 0u);
}

TEST(PropertyTest, ChurnKeepsNetworkLoopFree) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const RandomCase c = random_case(seed + 20, 40);
    NetworkOptions o;
    o.engine = QueryEngine::kPlaintext;
    Network n(c.topo, c.origins, o);
    std::mt19937_64 rng(seed);
    std::vector<Edge> removed;
    std::size_t next = 0;
    for (int step = 0; step < 150; ++step) {
      const int kind = static_cast<int>(rng() % 10);
      if (kind < 6 && next < c.policies.size()) {
        const auto& p = c.policies[next++];
        try {
          n.handle_install(p, 1 + rng() % 6);
        } catch (const InvalidInput&) {
          // No longer a valid deflection after earlier updates.
        }
      } else if (kind < 8) {
        const auto active = n.active_policies();
        if (!active.empty()) {
          const auto& p = active[rng() % active.size()];
          n.handle_remove(p.sdx, p.id);
        }
      } else if (!removed.empty() && rng() % 2 == 0) {
        const Edge e = removed.back();
        removed.pop_back();
        n.handle_bgp_update({BgpChange::Kind::kAddEdge, e});
      } else {
        const auto edges = n.topology().graph.edges();
        const Edge e = edges[rng() % edges.size()];
        removed.push_back(e);
        n.handle_bgp_update({BgpChange::Kind::kRemoveEdge, e});
      }
      ASSERT_FALSE(oracle_loops(n)) << "seed " << seed << " step " << step;
    }
  }
}

// Two SDXes, width-8 rules drawn from the full ternary lattice on four bits.
TEST(TwoSdxExactnessTest, WidthEightPairsMatchOracle) {
  const auto cores = testing::all_rules(4);
  std::mt19937_64 rng(11);
  const auto f = two_sdx_fixture();
  std::size_t loops = 0;
  for (int i = 0; i < 300; ++i) {
    const TernaryRule a = testing::random_rule(rng, 8, 0.4);
    const TernaryRule b = testing::random_rule(rng, 8, 0.4);
    auto r_b = f.r_b;
    auto r_n = f.r_n;
    r_b.rule = a;
    r_n.rule = b;
    Network n = fixture_network(i % 2 ? Backend::kYao : Backend::kGmw);
    ASSERT_TRUE(n.handle_install(r_b).accepted());
    const bool loop = !forwarding_oracle(f.topo.graph, f.rib, {r_b, r_n}, F::kPrefix).empty();
    EXPECT_EQ(!n.handle_install(r_n).accepted(), loop) << a.to_string() << " " << b.to_string();
    loops += loop;
  }
  EXPECT_GT(loops, 0u);
  EXPECT_LT(loops, 300u);
}

}  // namespace
}  // namespace prelude
