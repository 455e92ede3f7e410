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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prelude/rulespace.hpp"

namespace prelude {

using WireId = std::uint32_t;

enum class GateKind : std::uint8_t { kAnd, kXor, kNot };

struct Gate {
  GateKind kind;
  WireId in0;
  WireId in1;  // unused for kNot
  WireId out;
};

/// Party 0 queries, party 1 holds rules. Generic circuits use the same ids.
inline constexpr int kParty0 = 0;
inline constexpr int kParty1 = 1;

struct InputGroup {
  int party;
  std::string label;
  WireId first;
  std::uint32_t count;
};

/// Gate-level DAG over AND/XOR/NOT. Gates are stored in topological order and
/// every gate output is a fresh wire, so in0/in1 < out always holds.
class BooleanCircuit {
 public:
  std::uint32_t num_wires() const { return num_wires_; }
  const std::vector<Gate>& gates() const { return gates_; }
  const std::vector<InputGroup>& input_groups() const { return input_groups_; }
  const std::vector<WireId>& outputs() const { return outputs_; }

  /// Input wires of one party, in group order.
  std::vector<WireId> input_wires(int party) const;
  std::size_t num_inputs(int party) const;

  std::size_t and_count() const;
  std::size_t xor_count() const;
  std::size_t not_count() const;
  /// Longest chain of AND gates through the circuit.
  std::uint32_t and_depth() const;
  /// AND-depth of every wire; inputs are 0, XOR/NOT inherit the max of inputs.
  std::vector<std::uint32_t> wire_and_levels() const;

  /// One line per item, e.g. `AND w3 <- w1 w2`.
  std::string dump() const;

 private:
  friend class CircuitBuilder;

  std::uint32_t num_wires_ = 0;
  std::vector<Gate> gates_;
  std::vector<InputGroup> input_groups_;
  std::vector<WireId> outputs_;
  std::vector<bool> is_input_;
};

class CircuitBuilder {
 public:
  std::vector<WireId> add_input(int party, std::string label, std::uint32_t count);

  WireId add_and(WireId a, WireId b);
  WireId add_xor(WireId a, WireId b);
  WireId add_not(WireId a);
  /// De Morgan: NOT(AND(NOT a, NOT b)). One AND, three NOT.
  WireId add_or(WireId a, WireId b);
  /// Balanced OR reduction, depth ceil(log2(n)) in ANDs.
  WireId add_or_tree(std::span<const WireId> wires);
  /// select ? if_one : if_zero, as if_zero XOR (select AND (if_zero XOR if_one)).
  WireId add_mux(WireId select, WireId if_zero, WireId if_one);

  void mark_output(WireId w);

  const BooleanCircuit& peek() const { return circuit_; }
  BooleanCircuit build() &&;

 private:
  void check_wire(WireId w) const;
  WireId add_gate(GateKind kind, WireId a, WireId b);

  BooleanCircuit circuit_;
};

/// Ties a built distinct-match circuit to its query shape.
struct CircuitLayout {
  std::uint32_t k = 1;          // remote rules compared in parallel
  std::uint32_t width = 104;    // rule bit-width
  std::uint32_t id_width = 48;  // next-hop identifier width

  void validate() const;
  friend bool operator==(const CircuitLayout&, const CircuitLayout&) = default;
};

/// Masked XOR of one bit position: 1 iff both rules care and disagree.
WireId build_bit_distinct(CircuitBuilder& builder, WireId m1, WireId p1, WireId m2, WireId p2);

/// Single-output circuit: 1 iff the two rules are distinct. Party 0 supplies
/// (mask, pattern), party 1 supplies (mask, pattern).
BooleanCircuit build_distinct_pair(std::uint32_t width);

/// Party 0 supplies one (mask, pattern). Party 1 supplies k (mask, pattern, id)
/// triples followed by the dummy id. Output i is rule i's id if it overlaps
/// the query, else the dummy; outputs are k * id_width bits in rule order.
BooleanCircuit build_batch_query(const CircuitLayout& layout);

/// Each party's input bits in the order of its input groups.
using PartyInputs = std::array<BitVector, 2>;

BitVector evaluate_plaintext(const BooleanCircuit& circuit, const PartyInputs& inputs);

/// Input vectors for the distinct-match circuits.
BitVector rule_input_bits(const TernaryRule& rule);

}  // namespace prelude
