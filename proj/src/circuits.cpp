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

#include "prelude/circuits.hpp"

#include <algorithm>
#include <sstream>

#include "prelude/errors.hpp"

namespace prelude {

std::vector<WireId> BooleanCircuit::input_wires(int party) const {
  std::vector<WireId> out;
  for (const auto& group : input_groups_) {
    if (group.party != party) continue;
    for (std::uint32_t i = 0; i < group.count; ++i) out.push_back(group.first + i);
  }
  return out;
}

std::size_t BooleanCircuit::num_inputs(int party) const {
  std::size_t n = 0;
  for (const auto& group : input_groups_) {
    if (group.party == party) n += group.count;
  }
  return n;
}

std::size_t BooleanCircuit::and_count() const {
  return static_cast<std::size_t>(
      std::count_if(gates_.begin(), gates_.end(), [](const Gate& g) { return g.kind == GateKind::kAnd; }));
}

std::size_t BooleanCircuit::xor_count() const {
  return static_cast<std::size_t>(
      std::count_if(gates_.begin(), gates_.end(), [](const Gate& g) { return g.kind == GateKind::kXor; }));
}

std::size_t BooleanCircuit::not_count() const {
  return static_cast<std::size_t>(
      std::count_if(gates_.begin(), gates_.end(), [](const Gate& g) { return g.kind == GateKind::kNot; }));
}

std::vector<std::uint32_t> BooleanCircuit::wire_and_levels() const {
  std::vector<std::uint32_t> level(num_wires_, 0);
  for (const Gate& g : gates_) {
    switch (g.kind) {
      case GateKind::kAnd:
        level[g.out] = std::max(level[g.in0], level[g.in1]) + 1;
        break;
      case GateKind::kXor:
        level[g.out] = std::max(level[g.in0], level[g.in1]);
        break;
      case GateKind::kNot:
        level[g.out] = level[g.in0];
        break;
    }
  }
  return level;
}

std::uint32_t BooleanCircuit::and_depth() const {
  const auto level = wire_and_levels();
  std::uint32_t depth = 0;
  for (std::uint32_t l : level) depth = std::max(depth, l);
  return depth;
}

std::string BooleanCircuit::dump() const {
  std::ostringstream out;
  for (const auto& group : input_groups_) {
    out << "INPUT p" << group.party << ' ' << group.label;
    for (std::uint32_t i = 0; i < group.count; ++i) out << " w" << group.first + i;
    out << '\n';
  }
  for (const Gate& g : gates_) {
    switch (g.kind) {
      case GateKind::kAnd:
        out << "AND w" << g.out << " <- w" << g.in0 << " w" << g.in1 << '\n';
        break;
      case GateKind::kXor:
        out << "XOR w" << g.out << " <- w" << g.in0 << " w" << g.in1 << '\n';
        break;
      case GateKind::kNot:
        out << "NOT w" << g.out << " <- w" << g.in0 << '\n';
        break;
    }
  }
  out << "OUTPUT";
  for (WireId w : outputs_) out << " w" << w;
  out << '\n';
  return out.str();
}

// --- CircuitBuilder --------------------------------------------------------

std::vector<WireId> CircuitBuilder::add_input(int party, std::string label, std::uint32_t count) {
  if (party != kParty0 && party != kParty1) throw ConstructionError("input party must be 0 or 1");
  std::vector<WireId> wires(count);
  const WireId first = circuit_.num_wires_;
  for (std::uint32_t i = 0; i < count; ++i) wires[i] = first + i;
  circuit_.num_wires_ += count;
  circuit_.is_input_.resize(circuit_.num_wires_, true);
  circuit_.input_groups_.push_back({party, std::move(label), first, count});
  return wires;
}

void CircuitBuilder::check_wire(WireId w) const {
  if (w >= circuit_.num_wires_) throw ConstructionError("unknown wire w" + std::to_string(w));
}

WireId CircuitBuilder::add_gate(GateKind kind, WireId a, WireId b) {
  check_wire(a);
  if (kind != GateKind::kNot) check_wire(b);
  const WireId out = circuit_.num_wires_++;
  circuit_.is_input_.push_back(false);
  circuit_.gates_.push_back({kind, a, kind == GateKind::kNot ? a : b, out});
  return out;
}

WireId CircuitBuilder::add_and(WireId a, WireId b) { return add_gate(GateKind::kAnd, a, b); }
WireId CircuitBuilder::add_xor(WireId a, WireId b) { return add_gate(GateKind::kXor, a, b); }
WireId CircuitBuilder::add_not(WireId a) { return add_gate(GateKind::kNot, a, a); }

WireId CircuitBuilder::add_or(WireId a, WireId b) {
  return add_not(add_and(add_not(a), add_not(b)));
}

WireId CircuitBuilder::add_or_tree(std::span<const WireId> wires) {
  if (wires.empty()) throw ConstructionError("OR over zero wires");
  std::vector<WireId> layer(wires.begin(), wires.end());
  while (layer.size() > 1) {
    std::vector<WireId> next;
    next.reserve((layer.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < layer.size(); i += 2) next.push_back(add_or(layer[i], layer[i + 1]));
    if (layer.size() % 2 == 1) next.push_back(layer.back());
    layer = std::move(next);
  }
  return layer.front();
}

WireId CircuitBuilder::add_mux(WireId select, WireId if_zero, WireId if_one) {
  return add_xor(if_zero, add_and(select, add_xor(if_zero, if_one)));
}

void CircuitBuilder::mark_output(WireId w) {
  check_wire(w);
  circuit_.outputs_.push_back(w);
}

BooleanCircuit CircuitBuilder::build() && { return std::move(circuit_); }

// --- Distinct-match circuits -----------------------------------------------

void CircuitLayout::validate() const {
  if (k == 0) throw ConstructionError("layout needs at least one remote rule");
  if (width == 0) throw ConstructionError("layout needs a positive rule width");
  if (id_width == 0 || id_width > 64) throw ConstructionError("id width must be in 1..64");
}

WireId build_bit_distinct(CircuitBuilder& builder, WireId m1, WireId p1, WireId m2, WireId p2) {
  const WireId both_care = builder.add_and(m1, m2);
  const WireId differ = builder.add_xor(p1, p2);
  return builder.add_and(both_care, differ);
}

namespace {

WireId build_rule_distinct(CircuitBuilder& builder, std::span<const WireId> m1, std::span<const WireId> p1,
                           std::span<const WireId> m2, std::span<const WireId> p2) {
  std::vector<WireId> per_bit(m1.size());
  for (std::size_t i = 0; i < m1.size(); ++i) per_bit[i] = build_bit_distinct(builder, m1[i], p1[i], m2[i], p2[i]);
  return builder.add_or_tree(per_bit);
}

}  // namespace

BooleanCircuit build_distinct_pair(std::uint32_t width) {
  if (width == 0) throw ConstructionError("zero-width rules");
  CircuitBuilder b;
  const auto m0 = b.add_input(kParty0, "mask", width);
  const auto p0 = b.add_input(kParty0, "pattern", width);
  const auto m1 = b.add_input(kParty1, "mask", width);
  const auto p1 = b.add_input(kParty1, "pattern", width);
  b.mark_output(build_rule_distinct(b, m0, p0, m1, p1));
  return std::move(b).build();
}

BooleanCircuit build_batch_query(const CircuitLayout& layout) {
  layout.validate();
  CircuitBuilder b;
  const auto qm = b.add_input(kParty0, "query.mask", layout.width);
  const auto qp = b.add_input(kParty0, "query.pattern", layout.width);
  struct RuleWires {
    std::vector<WireId> mask, pattern, id;
  };
  std::vector<RuleWires> rules(layout.k);
  for (std::uint32_t i = 0; i < layout.k; ++i) {
    const std::string prefix = "rule[" + std::to_string(i) + "].";
    rules[i].mask = b.add_input(kParty1, prefix + "mask", layout.width);
    rules[i].pattern = b.add_input(kParty1, prefix + "pattern", layout.width);
    rules[i].id = b.add_input(kParty1, prefix + "id", layout.id_width);
  }
  const auto dummy = b.add_input(kParty1, "dummy", layout.id_width);

  for (const auto& rule : rules) {
    const WireId distinct = build_rule_distinct(b, qm, qp, rule.mask, rule.pattern);
    for (std::uint32_t j = 0; j < layout.id_width; ++j) b.mark_output(b.add_mux(distinct, rule.id[j], dummy[j]));
  }
  return std::move(b).build();
}

BitVector evaluate_plaintext(const BooleanCircuit& circuit, const PartyInputs& inputs) {
  std::vector<std::uint8_t> value(circuit.num_wires(), 0);
  for (int party : {kParty0, kParty1}) {
    const auto wires = circuit.input_wires(party);
    if (inputs[party].size() != wires.size()) {
      throw EvaluationError("party " + std::to_string(party) + " supplied " +
                            std::to_string(inputs[party].size()) + " input bits, circuit needs " +
                            std::to_string(wires.size()));
    }
    for (std::size_t i = 0; i < wires.size(); ++i) value[wires[i]] = inputs[party].get(i);
  }
  for (const Gate& g : circuit.gates()) {
    switch (g.kind) {
      case GateKind::kAnd:
        value[g.out] = value[g.in0] & value[g.in1];
        break;
      case GateKind::kXor:
        value[g.out] = value[g.in0] ^ value[g.in1];
        break;
      case GateKind::kNot:
        value[g.out] = value[g.in0] ^ 1U;
        break;
    }
  }
  BitVector out(circuit.outputs().size());
  for (std::size_t i = 0; i < circuit.outputs().size(); ++i) out.set(i, value[circuit.outputs()[i]]);
  return out;
}

BitVector rule_input_bits(const TernaryRule& rule) {
  BitVector bits = rule.mask();
  bits.append(rule.pattern());
  return bits;
}

}  // namespace prelude
