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

#include "prelude/smpc.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <thread>

#include "prelude/errors.hpp"
#include "test_util.hpp"

namespace prelude {
namespace {

using testing::random_bits;
using testing::random_rule;

BooleanCircuit random_circuit(std::mt19937_64& rng) {
  CircuitBuilder b;
  std::vector<WireId> wires;
  for (int party : {kParty0, kParty1}) {
    const auto in = b.add_input(party, "in", 1 + rng() % 16);
    wires.insert(wires.end(), in.begin(), in.end());
  }
  const int n_gates = 1 + static_cast<int>(rng() % 60);
  for (int i = 0; i < n_gates; ++i) {
    const WireId x = wires[rng() % wires.size()];
    const WireId y = wires[rng() % wires.size()];
    switch (rng() % 3) {
      case 0: wires.push_back(b.add_and(x, y)); break;
      case 1: wires.push_back(b.add_xor(x, y)); break;
      default: wires.push_back(b.add_not(x)); break;
    }
  }
  const int n_out = 1 + static_cast<int>(rng() % 8);
  for (int i = 0; i < n_out; ++i) b.mark_output(wires[rng() % wires.size()]);
  b.mark_output(wires.back());
  return std::move(b).build();
}

PartyInputs random_inputs(const BooleanCircuit& c, std::mt19937_64& rng) {
  return {random_bits(rng, c.num_inputs(kParty0)), random_bits(rng, c.num_inputs(kParty1))};
}

BitVector run(const BooleanCircuit& c, const PartyInputs& in, Backend backend, std::uint64_t seed = 1) {
  LocalRunOptions opt;
  opt.backend = backend;
  opt.seed = seed;
  return run_local(c, in, opt).output;
}

TernaryRule http_rule() { return encode(parse_flow_spec("proto=tcp,dst_port=80")); }

TEST(Shares, NonceExamples) {
  auto [a, b] = share_with_nonce(BitVector::from_string("0000"), BitVector::from_string("1010"));
  EXPECT_EQ(a.bits.to_string(), "1010");
  EXPECT_EQ(b.bits.to_string(), "1010");
  auto [c, d] = share_with_nonce(BitVector::from_string("1111"), BitVector::from_string("0000"));
  EXPECT_EQ(c.bits.to_string(), "0000");
  EXPECT_EQ(d.bits.to_string(), "1111");
  EXPECT_EQ(reconstruct(a, b).to_string(), "0000");
  EXPECT_EQ(reconstruct(c, d).to_string(), "1111");
  auto [e, f] = share_with_nonce(BitVector::from_string("0110"), BitVector::from_string("0101"));
  EXPECT_EQ(reconstruct(e, f).to_string(), "0110");
}

TEST(Shares, RoundTripRandom) {
  Prg prg(42);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const BitVector v = random_bits(rng, 1 + rng() % 200);
    const auto [a, b] = share(v, prg);
    EXPECT_EQ(reconstruct(a, b), v);
  }
  EXPECT_THROW(reconstruct(BitShares{BitVector(3)}, BitShares{BitVector(4)}), ProtocolError);
}

TEST(Prg, DeterministicAndSeedSensitive) {
  Prg a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
  EXPECT_EQ(Prg::derive({1, 2}), Prg::derive({1, 2}));
  EXPECT_NE(Prg::derive({1, 2}), Prg::derive({2, 1}));
}

TEST(Prg, PermutationIsBijection) {
  Prg p(3);
  for (std::size_t n : {0u, 1u, 2u, 17u, 500u}) {
    auto perm = p.permutation(n);
    std::set<std::size_t> seen(perm.begin(), perm.end());
    EXPECT_EQ(seen.size(), n);
    if (n) EXPECT_EQ(*seen.rbegin(), n - 1);
  }
}

TEST(Framing, EncodeDecode) {
  const Frame f{MsgKind::kAndOpening, {1, 2, 3}};
  const auto bytes = encode_frame(f);
  ASSERT_EQ(bytes.size(), 8u);
  EXPECT_EQ(bytes[3], 4);  // kind byte + 3 payload bytes
  EXPECT_EQ(bytes[4], 2);
  const Frame g = decode_frame(bytes);
  EXPECT_EQ(g.kind, f.kind);
  EXPECT_EQ(g.payload, f.payload);
}

TEST(Framing, RejectsMalformed) {
  EXPECT_THROW(decode_frame(std::vector<std::uint8_t>{0, 0, 0}), ProtocolError);
  EXPECT_THROW(decode_frame(std::vector<std::uint8_t>{0, 0, 0, 1, 99}), ProtocolError);
  EXPECT_THROW(decode_frame(std::vector<std::uint8_t>{0, 0, 0, 3, 1, 0}), ProtocolError);
  EXPECT_THROW(decode_frame(std::vector<std::uint8_t>{0, 0, 0, 0, 1}), ProtocolError);
}

TEST(Channels, LoopbackDelayAndClose) {
  auto [a, b] = make_loopback_pair(std::chrono::milliseconds(20));
  const auto start = std::chrono::steady_clock::now();
  a->send({MsgKind::kLabels, {9}});
  const Frame f = b->recv();
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(20));
  EXPECT_EQ(f.payload, std::vector<std::uint8_t>{9});
  a->close();
  EXPECT_THROW(b->recv(), SessionAborted);
  EXPECT_THROW(b->send({MsgKind::kLabels, {}}), SessionAborted);
}

TEST(Channels, TcpRoundTrip) {
  TcpListener listener(0);
  std::unique_ptr<Channel> server;
  std::thread t([&] { server = listener.accept(); });
  auto client = tcp_connect("127.0.0.1", listener.port());
  t.join();
  std::vector<std::uint8_t> big(100000);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<std::uint8_t>(i * 7);
  client->send({MsgKind::kGarbledTables, big});
  const Frame f = server->recv();
  EXPECT_EQ(f.kind, MsgKind::kGarbledTables);
  EXPECT_EQ(f.payload, big);
  server->send({MsgKind::kOutputShare, {1}});
  EXPECT_EQ(client->recv().payload, std::vector<std::uint8_t>{1});
  server->close();
  EXPECT_THROW(client->recv(), SessionAborted);
}

TEST(Channels, GmwOverTcp) {
  std::mt19937_64 rng(5);
  const BooleanCircuit c = build_distinct_pair(16);
  const TernaryRule a = random_rule(rng, 16), b = random_rule(rng, 16);
  TcpListener listener(0);
  const TrustedDealer dealer(99);
  std::optional<BitVector> out0;
  std::thread holder([&] {
    auto ch = listener.accept();
    SessionChannel s(*ch);
    Prg prg(2);
    gmw_execute(c, kParty1, rule_input_bits(b), s, dealer.issue(kParty1, 1, c.and_count(), 0), prg, Reveal::kParty0);
  });
  auto ch = tcp_connect("127.0.0.1", listener.port());
  SessionChannel s(*ch);
  Prg prg(1);
  out0 = gmw_execute(c, kParty0, rule_input_bits(a), s, dealer.issue(kParty0, 1, c.and_count(), 0), prg,
                     Reveal::kParty0);
  holder.join();
  ASSERT_TRUE(out0);
  EXPECT_EQ(out0->get(0), !overlaps(a, b));
}

TEST(Dealer, TriplesSatisfyInvariant) {
  Prg prg(11);
  const auto m = dealer_gen(10000, 0, prg);
  EXPECT_EQ((m[0].a ^ m[1].a) & (m[0].b ^ m[1].b), m[0].c ^ m[1].c);
  EXPECT_EQ(m[0].triples(), 10000u);
}

TEST(Dealer, LabelTransfersConsistent) {
  Prg prg(12);
  const auto m = dealer_gen(0, 64, prg, kParty1);
  ASSERT_EQ(m[1].sender_pads.size(), 64u);
  ASSERT_EQ(m[0].chosen_pads.size(), 64u);
  for (std::size_t i = 0; i < 64; ++i) {
    const auto& [k0, k1] = m[1].sender_pads[i];
    EXPECT_EQ(m[0].chosen_pads[i], m[0].choice[i] ? k1 : k0);
  }
  EXPECT_TRUE(m[1].chosen_pads.empty());
}

TEST(Dealer, DeterministicAndSerializable) {
  const TrustedDealer d(5);
  const PartySetup a = d.issue(kParty0, 77, 300, 20);
  const PartySetup b = d.issue(kParty0, 77, 300, 20);
  EXPECT_EQ(serialize(a), serialize(b));
  EXPECT_NE(serialize(a), serialize(d.issue(kParty0, 78, 300, 20)));
  const PartySetup c = deserialize_setup(serialize(d.issue(kParty1, 77, 300, 20)));
  EXPECT_EQ(serialize(c), serialize(d.issue(kParty1, 77, 300, 20)));
  const PartySetup empty = d.issue(kParty0, 1, 0, 0);
  EXPECT_EQ(empty.triples(), 0u);
  EXPECT_EQ(empty.transfers(), 0u);
}

TEST(Gmw, XorOnlyCircuitNeedsNoTriples) {
  CircuitBuilder b;
  const WireId x = b.add_input(kParty0, "x", 1)[0];
  const WireId y = b.add_input(kParty1, "y", 1)[0];
  b.mark_output(b.add_not(b.add_xor(x, y)));
  const BooleanCircuit c = std::move(b).build();
  for (int u = 0; u < 2; ++u) {
    for (int v = 0; v < 2; ++v) {
      const PartyInputs in{BitVector::from_uint(u, 1), BitVector::from_uint(v, 1)};
      EXPECT_EQ(run(c, in, Backend::kGmw).get(0), !(u ^ v));
    }
  }
}

TEST(Gmw, UnderprovisionedTriplesRejected) {
  const BooleanCircuit c = build_distinct_pair(4);
  auto [c0, c1] = make_loopback_pair();
  SessionChannel s0(*c0), s1(*c1);
  const TrustedDealer dealer(1);
  std::thread t([&] {
    Prg prg(2);
    GmwSession s(c, kParty1, s1, dealer.issue(kParty1, 1, 3, 0), prg);
    s.setup();
  });
  Prg prg(1);
  GmwSession s(c, kParty0, s0, dealer.issue(kParty0, 1, 3, 0), prg);
  s.setup();
  t.join();
  EXPECT_THROW(s.evaluate(BitVector(8)), SetupUnderprovisioned);
}

TEST(Gmw, ClosedChannelAborts) {
  const BooleanCircuit c = build_distinct_pair(4);
  auto [c0, c1] = make_loopback_pair();
  SessionChannel s0(*c0);
  c1->close();
  Prg prg(1);
  GmwSession s(c, kParty0, s0, TrustedDealer(1).issue(kParty0, 1, c.and_count(), 0), prg);
  EXPECT_THROW(s.setup(), SessionAborted);
}

TEST(Backends, TwoSdxRulesOverlap) {
  const BooleanCircuit c = build_distinct_pair(104);
  const PartyInputs in{rule_input_bits(http_rule()), rule_input_bits(http_rule())};
  EXPECT_FALSE(run(c, in, Backend::kGmw).get(0));
  EXPECT_FALSE(run(c, in, Backend::kYao).get(0));
}

TEST(Backends, AllZeroInputsMatchPlaintext) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) {
    const BooleanCircuit c = random_circuit(rng);
    const PartyInputs in{BitVector(c.num_inputs(kParty0)), BitVector(c.num_inputs(kParty1))};
    const BitVector expected = evaluate_plaintext(c, in);
    EXPECT_EQ(run(c, in, Backend::kGmw), expected);
    EXPECT_EQ(run(c, in, Backend::kYao), expected);
  }
}

TEST(Backends, RandomCircuitsDifferential) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const BooleanCircuit c = random_circuit(rng);
    const PartyInputs in = random_inputs(c, rng);
    const BitVector expected = evaluate_plaintext(c, in);
    ASSERT_EQ(run(c, in, Backend::kGmw, i), expected) << c.dump();
    ASSERT_EQ(run(c, in, Backend::kYao, i), expected) << c.dump();
  }
}

TEST(Yao, SingleNotGate) {
  CircuitBuilder b;
  const WireId x = b.add_input(kParty0, "x", 1)[0];
  b.add_input(kParty1, "unused", 0);
  b.mark_output(b.add_not(x));
  const BooleanCircuit c = std::move(b).build();
  EXPECT_FALSE(run(c, {BitVector::from_uint(1, 1), BitVector()}, Backend::kYao).get(0));
  EXPECT_TRUE(run(c, {BitVector::from_uint(0, 1), BitVector()}, Backend::kYao).get(0));
}

TEST(Yao, BatchQueryK50MatchesOracle) {
  std::mt19937_64 rng(8);
  const CircuitLayout layout{50, 104, 48};
  const BooleanCircuit c = build_batch_query(layout);
  const TernaryRule q = random_rule(rng, 104, 0.05);
  BitVector holder;
  std::multiset<std::uint64_t> expected;
  for (int i = 0; i < 50; ++i) {
    const TernaryRule r = random_rule(rng, 104, 0.05);
    const std::uint64_t id = i + 1;
    holder.append(rule_input_bits(r));
    holder.append(BitVector::from_uint(id, 48));
    expected.insert(overlaps(q, r) ? id : 0xFFFFFFFFFFFFULL);
  }
  holder.append(BitVector::from_uint(0xFFFFFFFFFFFFULL, 48));
  for (Backend backend : {Backend::kYao, Backend::kGmw}) {
    const BitVector out = run(c, {rule_input_bits(q), holder}, backend);
    std::multiset<std::uint64_t> got;
    for (int i = 0; i < 50; ++i) got.insert(out.get_field(48 * i, 48));
    EXPECT_EQ(got, expected);
  }
  EXPECT_GT(expected.count(0xFFFFFFFFFFFFULL), 0u);
  EXPECT_LT(expected.count(0xFFFFFFFFFFFFULL), 50u);
}

TEST(Yao, TamperedTablesFailIntegrity) {
  const BooleanCircuit c = build_distinct_pair(8);
  auto [c0, c1] = make_loopback_pair();
  const TrustedDealer dealer(3);
  const std::size_t n = c.num_inputs(kParty0);
  // Forward the garbler's frames with every garbled row corrupted.
  auto [m0, m1] = make_loopback_pair();
  std::thread garbler([&] {
    SessionChannel s(*c1);
    Prg prg(9);
    YaoGarbler g(c, kParty1, s, dealer.issue(kParty1, 1, 0, n), prg);
    try {
      g.setup();
      g.evaluate(BitVector(c.num_inputs(kParty1)), false);
    } catch (const SessionAborted&) {
    }
  });
  std::thread relay([&] {
    try {
      Frame tables = c0->recv();
      for (std::size_t row = 0; row < 4 * c.and_count(); ++row) tables.payload[4 + 16 * row] ^= 0x01;
      m1->send(tables);
      c0->send(m1->recv());
      m1->send(c0->recv());
    } catch (const SessionAborted&) {
    }
  });
  SessionChannel s(*m0);
  YaoEvaluator e(c, kParty0, s, dealer.issue(kParty0, 1, 0, n));
  bool failed = false;
  try {
    e.setup();
    e.evaluate(BitVector(n), false);
  } catch (const ProtocolError&) {
    failed = true;
  }
  c0->close();
  m0->close();
  relay.join();
  garbler.join();
  EXPECT_TRUE(failed);
}

TEST(Yao, OutputHashMismatchIsProtocolError) {
  // Garbled tables for one circuit fed to an evaluator of a circuit with the
  // same shape but different gate ids cannot decode.
  CircuitBuilder b1;
  const auto x1 = b1.add_input(kParty0, "x", 1);
  const auto y1 = b1.add_input(kParty1, "y", 1);
  b1.mark_output(b1.add_and(x1[0], y1[0]));
  const BooleanCircuit garbled = std::move(b1).build();
  CircuitBuilder b2;
  const auto x2 = b2.add_input(kParty0, "x", 1);
  const auto y2 = b2.add_input(kParty1, "y", 1);
  const WireId t = b2.add_xor(x2[0], y2[0]);
  b2.mark_output(b2.add_and(x2[0], y2[0]));
  (void)t;
  const BooleanCircuit evaluated = std::move(b2).build();
  auto [c0, c1] = make_loopback_pair();
  const TrustedDealer dealer(4);
  std::thread garbler([&] {
    SessionChannel s(*c1);
    Prg prg(1);
    YaoGarbler g(garbled, kParty1, s, dealer.issue(kParty1, 1, 0, 1), prg);
    try {
      g.setup();
      g.evaluate(BitVector::from_uint(1, 1), false);
    } catch (const SessionAborted&) {
    }
  });
  SessionChannel s(*c0);
  YaoEvaluator e(evaluated, kParty0, s, dealer.issue(kParty0, 1, 0, 1));
  e.setup();
  EXPECT_THROW(e.evaluate(BitVector::from_uint(1, 1), false), ProtocolError);
  c0->close();
  garbler.join();
}

TEST(Rounds, GmwIsDepthPlusOne) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 40; ++i) {
    const BooleanCircuit c = random_circuit(rng);
    LocalRunOptions opt;
    opt.seed = i;
    const auto r = run_local(c, random_inputs(c, rng), opt);
    EXPECT_EQ(r.transcripts[0].online_rounds(), c.and_depth() + 1);
    EXPECT_EQ(r.transcripts[1].online_rounds(), c.and_depth() + 1);
  }
  for (std::uint32_t k : {1u, 5u}) {
    const BooleanCircuit c = build_batch_query({k, 104, 48});
    const auto r = run_local(c, {BitVector(c.num_inputs(0)), BitVector(c.num_inputs(1))}, {});
    EXPECT_EQ(r.transcripts[0].online_rounds(), 11u);
  }
}

TEST(Rounds, YaoIsConstant) {
  for (std::uint32_t k : {1u, 2u, 20u}) {
    const BooleanCircuit c = build_batch_query({k, 104, 48});
    LocalRunOptions opt;
    opt.backend = Backend::kYao;
    const PartyInputs in{BitVector(c.num_inputs(0)), BitVector(c.num_inputs(1))};
    EXPECT_EQ(run_local(c, in, opt).transcripts[0].online_rounds(), kYaoOnlineRounds);
    opt.reveal = Reveal::kBoth;
    EXPECT_EQ(run_local(c, in, opt).transcripts[1].online_rounds(), kYaoOnlineRounds + 1);
  }
}

TEST(Rounds, SetupOnlineSeparation) {
  const BooleanCircuit c = build_batch_query({4, 16, 48});
  for (Backend backend : {Backend::kGmw, Backend::kYao}) {
    LocalRunOptions opt;
    opt.backend = backend;
    const auto r = run_local(c, {BitVector(c.num_inputs(0)), BitVector(c.num_inputs(1))}, opt);
    for (const auto& t : r.transcripts) {
      EXPECT_EQ(t.count(Phase::kOnline, MsgKind::kSetupTriples), 0u);
      EXPECT_EQ(t.count(Phase::kSetup, MsgKind::kSetupTriples), 1u);
      EXPECT_EQ(t.count(Phase::kOnline, MsgKind::kGarbledTables), 0u);
    }
  }
}

TEST(Rounds, DelayBoundsWallTime) {
  const BooleanCircuit c = build_distinct_pair(8);
  LocalRunOptions opt;
  opt.one_way_delay = std::chrono::milliseconds(30);
  opt.backend = Backend::kYao;
  const PartyInputs in{BitVector(16), BitVector(16)};
  EXPECT_GE(run_local(c, in, opt).online_time, std::chrono::milliseconds(60));
  opt.backend = Backend::kGmw;
  EXPECT_GE(run_local(c, in, opt).online_time, std::chrono::milliseconds(30) * (c.and_depth() + 1));
}

TEST(Determinism, EqualSeedsGiveIdenticalTranscripts) {
  std::mt19937_64 rng(10);
  const BooleanCircuit c = build_batch_query({3, 8, 48});
  const PartyInputs in = random_inputs(c, rng);
  for (Backend backend : {Backend::kGmw, Backend::kYao}) {
    LocalRunOptions opt;
    opt.backend = backend;
    opt.seed = 1234;
    const auto a = run_local(c, in, opt);
    const auto b = run_local(c, in, opt);
    EXPECT_EQ(a.transcripts[0].digest(), b.transcripts[0].digest());
    EXPECT_EQ(a.transcripts[1].digest(), b.transcripts[1].digest());
    opt.seed = 1235;
    EXPECT_NE(run_local(c, in, opt).transcripts[0].digest(), a.transcripts[0].digest());
  }
}

// Frequency of ones among the querier-visible bits.
std::pair<std::size_t, std::size_t> querier_view_bits(const BooleanCircuit& c, const BitVector& query,
                                                      const BitVector& holder, int runs, std::uint64_t seed0) {
  std::size_t ones = 0, total = 0;
  for (int i = 0; i < runs; ++i) {
    LocalRunOptions opt;
    opt.keep_payloads = true;
    opt.seed = seed0 + i;
    const auto r = run_local(c, {query, holder}, opt);
    for (const auto& payload : r.transcripts[0].received_payloads()) {
      for (std::uint8_t byte : payload) {
        ones += static_cast<std::size_t>(__builtin_popcount(byte));
        total += 8;
      }
    }
  }
  return {ones, total};
}

TEST(Privacy, QuerierViewIsUniformForDifferentHolders) {
  // Every AND layer and the output of this layout are whole bytes, so no
  // padding bits enter the count.
  const CircuitLayout layout{8, 8, 48};
  const BooleanCircuit c = build_batch_query(layout);
  std::mt19937_64 rng(77);
  const BitVector query = rule_input_bits(random_rule(rng, 8));
  std::array<BitVector, 2> holders;
  for (auto& h : holders) {
    for (int i = 0; i < 8; ++i) {
      h.append(rule_input_bits(random_rule(rng, 8)));
      h.append(BitVector::from_uint(rng() % 1000, 48));
    }
    h.append(BitVector::from_uint(0xFFFFFFFFFFFFULL, 48));
  }
  std::array<std::pair<std::size_t, std::size_t>, 2> counts;
  for (int h = 0; h < 2; ++h) counts[h] = querier_view_bits(c, query, holders[h], 70, 1000 * (h + 1));
  const double kCritical = 6.635;  // chi-squared, 1 dof, alpha 0.01
  for (const auto& [ones, total] : counts) {
    ASSERT_GE(total, 100000u);
    const double expected = total / 2.0;
    const double zeros = static_cast<double>(total - ones);
    const double chi2 = (ones - expected) * (ones - expected) / expected + (zeros - expected) * (zeros - expected) / expected;
    EXPECT_LT(chi2, kCritical) << ones << "/" << total;
  }
  // Two-sample 2x2 contingency test between the two holder rule sets.
  const double o[2][2] = {{double(counts[0].first), double(counts[0].second - counts[0].first)},
                          {double(counts[1].first), double(counts[1].second - counts[1].first)}};
  const double n = o[0][0] + o[0][1] + o[1][0] + o[1][1];
  double chi2 = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double e = (o[i][0] + o[i][1]) * (o[0][j] + o[1][j]) / n;
      chi2 += (o[i][j] - e) * (o[i][j] - e) / e;
    }
  }
  EXPECT_LT(chi2, kCritical);
}

}  // namespace
}  // namespace prelude
