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

#include <openssl/evp.h>

#include <exception>
#include <thread>

#include "prelude/errors.hpp"

namespace prelude {

std::pair<BitShares, BitShares> share_with_nonce(const BitVector& value, const BitVector& nonce) {
  if (value.size() != nonce.size()) throw ProtocolError("nonce length differs from value length");
  return {BitShares{nonce}, BitShares{value ^ nonce}};
}

std::pair<BitShares, BitShares> share(const BitVector& value, Prg& rng) {
  return share_with_nonce(value, rng.bits(value.size()));
}

BitVector reconstruct(const BitShares& a, const BitShares& b) {
  if (a.bits.size() != b.bits.size()) throw ProtocolError("share lengths differ");
  return a.bits ^ b.bits;
}

// --- Dealer ----------------------------------------------------------------

namespace {

void write_bits(ByteWriter& w, const BitVector& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  w.bytes(v.to_bytes());
}

BitVector read_bits(ByteReader& r) {
  const std::uint32_t n = r.u32();
  return BitVector::from_bytes(r.bytes((n + 7) / 8), n);
}

void write_block(ByteWriter& w, const Block& b) {
  std::uint8_t buf[16];
  b.store(buf);
  w.bytes(buf);
}

Block read_block(ByteReader& r) { return Block::load(r.bytes(16).data()); }

}  // namespace

std::vector<std::uint8_t> serialize(const PartySetup& setup) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(setup.party));
  write_bits(w, setup.a);
  write_bits(w, setup.b);
  write_bits(w, setup.c);
  w.u32(static_cast<std::uint32_t>(setup.sender_pads.size()));
  for (const auto& [k0, k1] : setup.sender_pads) {
    write_block(w, k0);
    write_block(w, k1);
  }
  write_bits(w, setup.choice);
  w.u32(static_cast<std::uint32_t>(setup.chosen_pads.size()));
  for (const auto& k : setup.chosen_pads) write_block(w, k);
  return w.take();
}

PartySetup deserialize_setup(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  PartySetup s;
  s.party = r.u8();
  s.a = read_bits(r);
  s.b = read_bits(r);
  s.c = read_bits(r);
  s.sender_pads.resize(r.u32());
  for (auto& [k0, k1] : s.sender_pads) {
    k0 = read_block(r);
    k1 = read_block(r);
  }
  s.choice = read_bits(r);
  s.chosen_pads.resize(r.u32());
  for (auto& k : s.chosen_pads) k = read_block(r);
  r.expect_end();
  if (s.a.size() != s.b.size() || s.a.size() != s.c.size()) throw ProtocolError("ragged triple material");
  return s;
}

std::array<PartySetup, 2> dealer_gen(std::size_t n_triples, std::size_t n_label_transfers, Prg& rng,
                                     int ot_sender) {
  std::array<PartySetup, 2> out;
  out[0].party = kParty0;
  out[1].party = kParty1;
  const BitVector a0 = rng.bits(n_triples), a1 = rng.bits(n_triples);
  const BitVector b0 = rng.bits(n_triples), b1 = rng.bits(n_triples);
  const BitVector c0 = rng.bits(n_triples);
  out[0].a = a0;
  out[0].b = b0;
  out[0].c = c0;
  out[1].a = a1;
  out[1].b = b1;
  out[1].c = ((a0 ^ a1) & (b0 ^ b1)) ^ c0;

  PartySetup& sender = out[ot_sender];
  PartySetup& receiver = out[1 - ot_sender];
  receiver.choice = BitVector(n_label_transfers);
  for (std::size_t i = 0; i < n_label_transfers; ++i) {
    const Block k0 = rng.block();
    const Block k1 = rng.block();
    const bool r = rng.bit();
    sender.sender_pads.emplace_back(k0, k1);
    receiver.choice.set(i, r);
    receiver.chosen_pads.push_back(r ? k1 : k0);
  }
  return out;
}

PartySetup TrustedDealer::issue(int party, std::uint64_t nonce, std::size_t n_triples, std::size_t n_label_transfers,
                                int ot_sender) const {
  Prg rng(Prg::derive({seed_, nonce, n_triples, n_label_transfers, static_cast<std::uint64_t>(ot_sender)}));
  auto both = dealer_gen(n_triples, n_label_transfers, rng, ot_sender);
  return std::move(both[party]);
}

const char* to_string(Backend backend) { return backend == Backend::kGmw ? "gmw" : "yao"; }

Backend parse_backend(const std::string& name) {
  if (name == "gmw" || name == "GMW") return Backend::kGmw;
  if (name == "yao" || name == "YAO") return Backend::kYao;
  throw InvalidInput("unknown backend: " + name);
}

std::uint32_t expected_online_rounds(Backend backend, const BooleanCircuit& circuit, Reveal to) {
  if (backend == Backend::kGmw) return circuit.and_depth() + 1;
  return to == Reveal::kParty0 ? kYaoOnlineRounds : kYaoOnlineRounds + 1;
}

// --- GMW -------------------------------------------------------------------

namespace {

void check_party(int party) {
  if (party != kParty0 && party != kParty1) throw InvalidInput("party must be 0 or 1");
}

void check_inputs(const BooleanCircuit& circuit, int party, const BitVector& inputs) {
  const std::size_t need = circuit.num_inputs(party);
  if (inputs.size() != need) {
    throw EvaluationError("party " + std::to_string(party) + " supplied " + std::to_string(inputs.size()) +
                          " input bits, circuit needs " + std::to_string(need));
  }
}

std::vector<std::uint8_t> block_bytes(const Block& b) {
  std::vector<std::uint8_t> out(16);
  b.store(out.data());
  return out;
}

/// Gates bucketed by AND level: ANDs of level L run in one round, then the
/// free gates of level L in topological order.
struct LayerSchedule {
  std::vector<std::vector<std::uint32_t>> ands;
  std::vector<std::vector<std::uint32_t>> frees;
};

LayerSchedule schedule(const BooleanCircuit& circuit) {
  const auto level = circuit.wire_and_levels();
  const std::uint32_t depth = circuit.and_depth();
  LayerSchedule s;
  s.ands.resize(depth + 1);
  s.frees.resize(depth + 1);
  const auto& gates = circuit.gates();
  for (std::uint32_t i = 0; i < gates.size(); ++i) {
    auto& bucket = gates[i].kind == GateKind::kAnd ? s.ands : s.frees;
    bucket[level[gates[i].out]].push_back(i);
  }
  return s;
}

}  // namespace

GmwSession::GmwSession(const BooleanCircuit& circuit, int party, SessionChannel& channel, PartySetup material,
                       Prg& rng)
    : circuit_(circuit), party_(party), channel_(channel), material_(std::move(material)), rng_(rng) {
  check_party(party);
}

void GmwSession::setup() {
  channel_.set_phase(Phase::kSetup);
  channel_.record_dealer(serialize(material_));
  channel_.begin_round();
  my_seed_ = rng_.block();
  channel_.send(MsgKind::kInputShare, block_bytes(my_seed_));
  const auto peer = channel_.recv(MsgKind::kInputShare);
  if (peer.size() != 16) throw ProtocolError("input pad seed must be 16 bytes");
  peer_seed_ = Block::load(peer.data());
  setup_done_ = true;
}

BitShares GmwSession::evaluate(const BitVector& my_inputs) {
  if (!setup_done_) setup();
  check_inputs(circuit_, party_, my_inputs);
  if (material_.triples() < circuit_.and_count()) {
    throw SetupUnderprovisioned("circuit needs " + std::to_string(circuit_.and_count()) + " triples, have " +
                                std::to_string(material_.triples()));
  }
  channel_.set_phase(Phase::kOnline);

  std::vector<std::uint8_t> v(circuit_.num_wires(), 0);
  {
    const auto mine = circuit_.input_wires(party_);
    const auto theirs = circuit_.input_wires(1 - party_);
    Prg my_pad(my_seed_);
    Prg peer_pad(peer_seed_);
    const BitVector pad_mine = my_pad.bits(mine.size());
    const BitVector pad_theirs = peer_pad.bits(theirs.size());
    for (std::size_t i = 0; i < mine.size(); ++i) v[mine[i]] = my_inputs[i] ^ pad_mine[i];
    for (std::size_t i = 0; i < theirs.size(); ++i) v[theirs[i]] = pad_theirs[i];
  }

  const auto& gates = circuit_.gates();
  const LayerSchedule layers = schedule(circuit_);
  std::size_t next_triple = 0;
  for (std::size_t level = 0; level < layers.ands.size(); ++level) {
    const auto& ands = layers.ands[level];
    if (!ands.empty()) {
      channel_.begin_round();
      const std::size_t n = ands.size();
      BitVector opening(2 * n);
      for (std::size_t j = 0; j < n; ++j) {
        const Gate& g = gates[ands[j]];
        opening.set(j, v[g.in0] ^ material_.a[next_triple + j]);
        opening.set(n + j, v[g.in1] ^ material_.b[next_triple + j]);
      }
      channel_.send(MsgKind::kAndOpening, opening.to_bytes());
      const auto peer_bytes = channel_.recv(MsgKind::kAndOpening);
      if (peer_bytes.size() != (2 * n + 7) / 8) throw ProtocolError("AND opening has wrong length");
      const BitVector opened = opening ^ BitVector::from_bytes(peer_bytes, 2 * n);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t t = next_triple + j;
        const bool d = opened[j];
        const bool e = opened[n + j];
        bool z = material_.c[t] ^ (d & material_.b[t]) ^ (e & material_.a[t]);
        if (party_ == kParty0) z ^= d & e;
        v[gates[ands[j]].out] = z;
      }
      next_triple += n;
    }
    for (std::uint32_t gi : layers.frees[level]) {
      const Gate& g = gates[gi];
      if (g.kind == GateKind::kXor) {
        v[g.out] = v[g.in0] ^ v[g.in1];
      } else {
        v[g.out] = v[g.in0] ^ (party_ == kParty0 ? 1 : 0);
      }
    }
  }

  BitShares out{BitVector(circuit_.outputs().size())};
  for (std::size_t i = 0; i < circuit_.outputs().size(); ++i) out.bits.set(i, v[circuit_.outputs()[i]]);
  return out;
}

std::optional<BitVector> GmwSession::reveal(const BitShares& outputs, Reveal to) {
  channel_.set_phase(Phase::kOnline);
  channel_.begin_round();
  const bool i_send = to == Reveal::kBoth || (to == Reveal::kParty0 ? party_ == kParty1 : party_ == kParty0);
  const bool i_learn = to == Reveal::kBoth || (to == Reveal::kParty0 ? party_ == kParty0 : party_ == kParty1);
  if (i_send) channel_.send(MsgKind::kOutputShare, outputs.bits.to_bytes());
  if (!i_learn) return std::nullopt;
  const auto peer = channel_.recv(MsgKind::kOutputShare);
  const std::size_t n = outputs.bits.size();
  if (peer.size() != (n + 7) / 8) throw ProtocolError("output share has wrong length");
  return reconstruct(outputs, BitShares{BitVector::from_bytes(peer, n)});
}

std::optional<BitVector> gmw_execute(const BooleanCircuit& circuit, int party, const BitVector& my_inputs,
                                     SessionChannel& channel, PartySetup material, Prg& rng, Reveal to) {
  GmwSession session(circuit, party, channel, std::move(material), rng);
  session.setup();
  const BitShares out = session.evaluate(my_inputs);
  return session.reveal(out, to);
}

// --- Garbling primitives ---------------------------------------------------

namespace {

Block dbl(const Block& x) {
  const std::uint64_t carry = x.hi >> 63;
  Block out{x.lo << 1, (x.hi << 1) | (x.lo >> 63)};
  if (carry) out.lo ^= 0x87;
  return out;
}

/// Fixed-key AES used as a correlation-robust hash: H(K) = AES(K) XOR K.
class FixedKeyHash {
 public:
  FixedKeyHash() : ctx_(EVP_CIPHER_CTX_new()) {
    static const std::uint8_t kKey[16] = {0x61, 0x7e, 0x8d, 0xa2, 0xa0, 0x51, 0x1e, 0x96,
                                          0x5e, 0x41, 0xc2, 0x9b, 0x15, 0x3f, 0xc7, 0x7a};
    if (ctx_ == nullptr || EVP_EncryptInit_ex(ctx_, EVP_aes_128_ecb(), nullptr, kKey, nullptr) != 1) {
      throw std::runtime_error("AES init failed");
    }
    EVP_CIPHER_CTX_set_padding(ctx_, 0);
  }
  ~FixedKeyHash() { EVP_CIPHER_CTX_free(ctx_); }
  FixedKeyHash(const FixedKeyHash&) = delete;
  FixedKeyHash& operator=(const FixedKeyHash&) = delete;

  /// In place: keys[i] <- AES(keys[i]) ^ keys[i].
  void apply(Block* keys, std::size_t n) {
    buf_in_.resize(16 * n);
    buf_out_.resize(16 * n);
    for (std::size_t i = 0; i < n; ++i) keys[i].store(buf_in_.data() + 16 * i);
    int len = 0;
    if (EVP_EncryptUpdate(ctx_, buf_out_.data(), &len, buf_in_.data(), static_cast<int>(16 * n)) != 1) {
      throw std::runtime_error("AES failed");
    }
    for (std::size_t i = 0; i < n; ++i) keys[i] ^= Block::load(buf_out_.data() + 16 * i);
  }

  static Block gate_key(const Block& a, const Block& b, std::uint64_t gate) {
    return dbl(a) ^ dbl(dbl(b)) ^ Block{gate, 0};
  }
  static Block output_key(const Block& label, std::uint64_t index) {
    return dbl(label) ^ Block{index, 0x8000000000000000ULL};
  }

 private:
  EVP_CIPHER_CTX* ctx_;
  std::vector<std::uint8_t> buf_in_;
  std::vector<std::uint8_t> buf_out_;
};

}  // namespace

// --- Yao garbler -----------------------------------------------------------

YaoGarbler::YaoGarbler(const BooleanCircuit& circuit, int party, SessionChannel& channel, PartySetup material,
                       Prg& rng)
    : circuit_(circuit), party_(party), channel_(channel), material_(std::move(material)), rng_(rng) {
  check_party(party);
}

void YaoGarbler::setup() {
  channel_.set_phase(Phase::kSetup);
  channel_.record_dealer(serialize(material_));
  const std::size_t n_eval = circuit_.num_inputs(1 - party_);
  if (material_.sender_pads.size() < n_eval) {
    throw SetupUnderprovisioned("circuit needs " + std::to_string(n_eval) + " label transfers, have " +
                                std::to_string(material_.sender_pads.size()));
  }

  delta_ = rng_.block();
  delta_.lo |= 1;
  zero_labels_.assign(circuit_.num_wires(), Block{});
  for (const auto& group : circuit_.input_groups()) {
    for (std::uint32_t i = 0; i < group.count; ++i) zero_labels_[group.first + i] = rng_.block();
  }

  FixedKeyHash hash;
  ByteWriter tables;
  tables.u32(static_cast<std::uint32_t>(circuit_.and_count()));
  const auto& gates = circuit_.gates();
  for (std::uint32_t gi = 0; gi < gates.size(); ++gi) {
    const Gate& g = gates[gi];
    switch (g.kind) {
      case GateKind::kXor:
        zero_labels_[g.out] = zero_labels_[g.in0] ^ zero_labels_[g.in1];
        break;
      case GateKind::kNot:
        zero_labels_[g.out] = zero_labels_[g.in0] ^ delta_;
        break;
      case GateKind::kAnd: {
        const Block out0 = rng_.block();
        zero_labels_[g.out] = out0;
        Block keys[4];
        Block rows[4];
        for (int va = 0; va < 2; ++va) {
          for (int vb = 0; vb < 2; ++vb) {
            const Block la = va ? zero_labels_[g.in0] ^ delta_ : zero_labels_[g.in0];
            const Block lb = vb ? zero_labels_[g.in1] ^ delta_ : zero_labels_[g.in1];
            keys[2 * va + vb] = FixedKeyHash::gate_key(la, lb, gi);
          }
        }
        hash.apply(keys, 4);
        for (int va = 0; va < 2; ++va) {
          for (int vb = 0; vb < 2; ++vb) {
            const Block la = va ? zero_labels_[g.in0] ^ delta_ : zero_labels_[g.in0];
            const Block lb = vb ? zero_labels_[g.in1] ^ delta_ : zero_labels_[g.in1];
            const int row = 2 * la.lsb() + lb.lsb();
            rows[row] = keys[2 * va + vb] ^ ((va & vb) ? out0 ^ delta_ : out0);
          }
        }
        for (const Block& r : rows) write_block(tables, r);
        break;
      }
    }
  }
  const auto& outputs = circuit_.outputs();
  tables.u32(static_cast<std::uint32_t>(outputs.size()));
  std::vector<Block> keys(2 * outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    keys[2 * i] = FixedKeyHash::output_key(zero_labels_[outputs[i]], i);
    keys[2 * i + 1] = FixedKeyHash::output_key(zero_labels_[outputs[i]] ^ delta_, i);
  }
  hash.apply(keys.data(), keys.size());
  for (const Block& k : keys) write_block(tables, k);

  channel_.begin_round();
  channel_.send(MsgKind::kGarbledTables, tables.take());
  setup_done_ = true;
}

std::optional<BitVector> YaoGarbler::evaluate(const BitVector& my_inputs, bool learn_output) {
  if (!setup_done_) setup();
  check_inputs(circuit_, party_, my_inputs);
  channel_.set_phase(Phase::kOnline);

  const auto mine = circuit_.input_wires(party_);
  const auto theirs = circuit_.input_wires(1 - party_);

  channel_.begin_round();
  const auto e_bytes = channel_.recv(MsgKind::kInputShare);
  if (e_bytes.size() != (theirs.size() + 7) / 8) throw ProtocolError("correction bits have wrong length");
  const BitVector e = BitVector::from_bytes(e_bytes, theirs.size());

  channel_.begin_round();
  ByteWriter labels;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    const Block z = zero_labels_[mine[i]];
    write_block(labels, my_inputs[i] ? z ^ delta_ : z);
  }
  for (std::size_t j = 0; j < theirs.size(); ++j) {
    const Block l0 = zero_labels_[theirs[j]];
    const Block l1 = l0 ^ delta_;
    const auto& [k0, k1] = material_.sender_pads[j];
    write_block(labels, l0 ^ (e[j] ? k1 : k0));
    write_block(labels, l1 ^ (e[j] ? k0 : k1));
  }
  channel_.send(MsgKind::kLabels, labels.take());

  if (!learn_output) return std::nullopt;
  channel_.begin_round();
  const auto out_bytes = channel_.recv(MsgKind::kOutputShare);
  const std::size_t n = circuit_.outputs().size();
  if (out_bytes.size() != (n + 7) / 8) throw ProtocolError("output message has wrong length");
  return BitVector::from_bytes(out_bytes, n);
}

// --- Yao evaluator ---------------------------------------------------------

YaoEvaluator::YaoEvaluator(const BooleanCircuit& circuit, int party, SessionChannel& channel, PartySetup material)
    : circuit_(circuit), party_(party), channel_(channel), material_(std::move(material)) {
  check_party(party);
}

void YaoEvaluator::setup() {
  channel_.set_phase(Phase::kSetup);
  channel_.record_dealer(serialize(material_));
  channel_.begin_round();
  const auto payload = channel_.recv(MsgKind::kGarbledTables);
  ByteReader r(payload);
  const std::uint32_t n_and = r.u32();
  if (n_and != circuit_.and_count()) throw ProtocolError("garbled table count does not match circuit");
  tables_.resize(4 * std::size_t{n_and});
  for (auto& b : tables_) b = read_block(r);
  const std::uint32_t n_out = r.u32();
  if (n_out != circuit_.outputs().size()) throw ProtocolError("output decoding count does not match circuit");
  output_hashes_.resize(n_out);
  for (auto& [h0, h1] : output_hashes_) {
    h0 = read_block(r);
    h1 = read_block(r);
  }
  r.expect_end();
  setup_done_ = true;
}

BitVector YaoEvaluator::evaluate(const BitVector& my_inputs, bool share_output) {
  if (!setup_done_) setup();
  check_inputs(circuit_, party_, my_inputs);
  const auto mine = circuit_.input_wires(party_);
  const auto theirs = circuit_.input_wires(1 - party_);
  if (material_.chosen_pads.size() < mine.size()) {
    throw SetupUnderprovisioned("circuit needs " + std::to_string(mine.size()) + " label transfers, have " +
                                std::to_string(material_.chosen_pads.size()));
  }
  channel_.set_phase(Phase::kOnline);

  channel_.begin_round();
  BitVector e(mine.size());
  for (std::size_t j = 0; j < mine.size(); ++j) e.set(j, my_inputs[j] ^ material_.choice[j]);
  channel_.send(MsgKind::kInputShare, e.to_bytes());

  channel_.begin_round();
  const auto payload = channel_.recv(MsgKind::kLabels);
  ByteReader r(payload);
  std::vector<Block> label(circuit_.num_wires());
  for (WireId w : theirs) label[w] = read_block(r);
  for (std::size_t j = 0; j < mine.size(); ++j) {
    const Block m0 = read_block(r);
    const Block m1 = read_block(r);
    label[mine[j]] = (my_inputs[j] ? m1 : m0) ^ material_.chosen_pads[j];
  }
  r.expect_end();

  FixedKeyHash hash;
  std::size_t and_index = 0;
  const auto& gates = circuit_.gates();
  for (std::uint32_t gi = 0; gi < gates.size(); ++gi) {
    const Gate& g = gates[gi];
    switch (g.kind) {
      case GateKind::kXor:
        label[g.out] = label[g.in0] ^ label[g.in1];
        break;
      case GateKind::kNot:
        label[g.out] = label[g.in0];
        break;
      case GateKind::kAnd: {
        const Block la = label[g.in0];
        const Block lb = label[g.in1];
        Block key = FixedKeyHash::gate_key(la, lb, gi);
        hash.apply(&key, 1);
        label[g.out] = key ^ tables_[4 * and_index + 2 * la.lsb() + lb.lsb()];
        ++and_index;
        break;
      }
    }
  }

  const auto& outputs = circuit_.outputs();
  std::vector<Block> keys(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) keys[i] = FixedKeyHash::output_key(label[outputs[i]], i);
  hash.apply(keys.data(), keys.size());
  BitVector out(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (keys[i] == output_hashes_[i].first) {
      out.set(i, false);
    } else if (keys[i] == output_hashes_[i].second) {
      out.set(i, true);
    } else {
      throw ProtocolError("output label " + std::to_string(i) + " failed integrity check");
    }
  }

  if (share_output) {
    channel_.begin_round();
    channel_.send(MsgKind::kOutputShare, out.to_bytes());
  }
  return out;
}

// --- Local runs ------------------------------------------------------------

LocalRunResult run_local(const BooleanCircuit& circuit, const PartyInputs& inputs, const LocalRunOptions& options) {
  auto [ch0, ch1] = make_loopback_pair(options.one_way_delay);
  std::array<Channel*, 2> raw{ch0.get(), ch1.get()};
  std::array<SessionChannel, 2> sessions{SessionChannel(*ch0, options.keep_payloads),
                                         SessionChannel(*ch1, options.keep_payloads)};
  const TrustedDealer dealer(Prg::derive({options.seed, 0xdea1e7}).lo);
  const bool gmw = options.backend == Backend::kGmw;
  const std::size_t n_triples = gmw ? circuit.and_count() : 0;
  const std::size_t n_transfers = gmw ? 0 : circuit.num_inputs(kParty0);

  LocalRunResult result;
  std::array<std::exception_ptr, 2> errors;
  std::array<std::optional<BitVector>, 2> outputs;
  auto run_party = [&](int party) {
    try {
      Prg rng(Prg::derive({options.seed, static_cast<std::uint64_t>(party)}));
      PartySetup material = dealer.issue(party, options.seed, n_triples, n_transfers);
      auto& ch = sessions[party];
      std::optional<BitVector> out;
      std::chrono::steady_clock::time_point start;
      if (gmw) {
        GmwSession s(circuit, party, ch, std::move(material), rng);
        s.setup();
        start = std::chrono::steady_clock::now();
        out = s.reveal(s.evaluate(inputs[party]), options.reveal);
      } else if (party == kParty0) {
        YaoEvaluator s(circuit, party, ch, std::move(material));
        s.setup();
        start = std::chrono::steady_clock::now();
        out = s.evaluate(inputs[party], options.reveal != Reveal::kParty0);
      } else {
        YaoGarbler s(circuit, party, ch, std::move(material), rng);
        s.setup();
        start = std::chrono::steady_clock::now();
        out = s.evaluate(inputs[party], options.reveal != Reveal::kParty0);
      }
      if (party == kParty0) {
        result.online_time = std::chrono::steady_clock::now() - start;
      }
      outputs[party] = std::move(out);
    } catch (...) {
      errors[party] = std::current_exception();
      raw[party]->close();
    }
  };
  std::thread peer(run_party, kParty1);
  run_party(kParty0);
  peer.join();
  // A failing party closes the channel, so its peer sees SessionAborted;
  // report the original failure.
  for (int pass = 0; pass < 2; ++pass) {
    for (auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const SessionAborted&) {
        if (pass == 1) throw;
      }
    }
  }
  const int learner = options.reveal == Reveal::kParty1 && gmw ? kParty1 : kParty0;
  if (!outputs[learner]) throw ProtocolError("receiving party produced no output");
  result.output = *outputs[learner];
  result.transcripts = {sessions[0].transcript(), sessions[1].transcript()};
  return result;
}

}  // namespace prelude
