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

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prelude/channel.hpp"
#include "prelude/circuits.hpp"
#include "prelude/prg.hpp"

namespace prelude {

/// One party's XOR share of a bit vector.
struct BitShares {
  BitVector bits;
};

/// (nonce, value XOR nonce).
std::pair<BitShares, BitShares> share(const BitVector& value, Prg& rng);
std::pair<BitShares, BitShares> share_with_nonce(const BitVector& value, const BitVector& nonce);
/// Throws ProtocolError on length mismatch.
BitVector reconstruct(const BitShares& a, const BitShares& b);

// --- Trusted dealer --------------------------------------------------------

/// Correlated randomness handed to one party before a session. Triples are
/// stored column-wise: triple i is (a[i], b[i], c[i]). Label transfers are a
/// random OT: the sender holds two pads, the receiver a choice bit and the
/// matching pad.
struct PartySetup {
  int party = kParty0;
  BitVector a, b, c;
  std::vector<std::pair<Block, Block>> sender_pads;
  BitVector choice;
  std::vector<Block> chosen_pads;

  std::size_t triples() const { return a.size(); }
  std::size_t transfers() const { return std::max(sender_pads.size(), chosen_pads.size()); }
};

std::vector<std::uint8_t> serialize(const PartySetup& setup);
PartySetup deserialize_setup(std::span<const std::uint8_t> bytes);

std::array<PartySetup, 2> dealer_gen(std::size_t n_triples, std::size_t n_label_transfers, Prg& rng,
                                     int ot_sender = kParty1);

/// Issues material per (session nonce, party) from a root seed, so each party
/// can fetch its own half without the other half ever leaving the dealer.
class TrustedDealer {
 public:
  explicit TrustedDealer(std::uint64_t seed) : seed_(seed) {}
  PartySetup issue(int party, std::uint64_t nonce, std::size_t n_triples, std::size_t n_label_transfers,
                   int ot_sender = kParty1) const;

 private:
  std::uint64_t seed_;
};

// --- Engines ---------------------------------------------------------------

enum class Backend : std::uint8_t { kGmw = 0, kYao = 1 };
const char* to_string(Backend backend);
Backend parse_backend(const std::string& name);

enum class Reveal : std::uint8_t { kParty0, kParty1, kBoth };

/// GMW over XOR shares with Beaver triples. One AND layer costs one
/// simultaneous exchange; XOR and NOT are local.
class GmwSession {
 public:
  GmwSession(const BooleanCircuit& circuit, int party, SessionChannel& channel, PartySetup material, Prg& rng);

  /// Accounts the dealer material and exchanges input-pad seeds.
  void setup();
  /// Online phase: returns this party's shares of the outputs.
  BitShares evaluate(const BitVector& my_inputs);
  /// One extra round. Returns the output at each receiving party.
  std::optional<BitVector> reveal(const BitShares& outputs, Reveal to);

 private:
  const BooleanCircuit& circuit_;
  int party_;
  SessionChannel& channel_;
  PartySetup material_;
  Prg& rng_;
  Block my_seed_{};
  Block peer_seed_{};
  bool setup_done_ = false;
};

/// Convenience: setup, evaluate and reveal in one call.
std::optional<BitVector> gmw_execute(const BooleanCircuit& circuit, int party, const BitVector& my_inputs,
                                     SessionChannel& channel, PartySetup material, Prg& rng, Reveal to);

/// Free-XOR, point-and-permute garbler. Tables are sent during setup.
class YaoGarbler {
 public:
  YaoGarbler(const BooleanCircuit& circuit, int party, SessionChannel& channel, PartySetup material, Prg& rng);

  void setup();
  /// Returns the output if `learn_output`, which costs one extra round.
  std::optional<BitVector> evaluate(const BitVector& my_inputs, bool learn_output);

 private:
  const BooleanCircuit& circuit_;
  int party_;
  SessionChannel& channel_;
  PartySetup material_;
  Prg& rng_;
  Block delta_{};
  std::vector<Block> zero_labels_;
  bool setup_done_ = false;
};

class YaoEvaluator {
 public:
  YaoEvaluator(const BooleanCircuit& circuit, int party, SessionChannel& channel, PartySetup material);

  void setup();
  /// Online phase: two rounds, three if `share_output`.
  BitVector evaluate(const BitVector& my_inputs, bool share_output);

 private:
  const BooleanCircuit& circuit_;
  int party_;
  SessionChannel& channel_;
  PartySetup material_;
  std::vector<Block> tables_;
  std::vector<std::pair<Block, Block>> output_hashes_;
  bool setup_done_ = false;
};

/// Online rounds of each backend for a circuit, as the engines implement them.
std::uint32_t expected_online_rounds(Backend backend, const BooleanCircuit& circuit, Reveal to);
inline constexpr std::uint32_t kYaoOnlineRounds = 2;

// --- In-process two-party runs ----------------------------------------------

struct LocalRunOptions {
  Backend backend = Backend::kGmw;
  std::chrono::microseconds one_way_delay{0};
  std::uint64_t seed = 1;
  bool keep_payloads = false;
  Reveal reveal = Reveal::kParty0;
};

struct LocalRunResult {
  BitVector output;
  std::array<Transcript, 2> transcripts;
  std::chrono::nanoseconds online_time{0};
};

/// Runs both parties on two threads over a loopback pair. Party 0 is the
/// evaluator under Yao.
LocalRunResult run_local(const BooleanCircuit& circuit, const PartyInputs& inputs, const LocalRunOptions& options);

}  // namespace prelude
