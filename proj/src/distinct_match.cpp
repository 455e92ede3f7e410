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

#include "prelude/distinct_match.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "prelude/errors.hpp"

namespace prelude {

std::string to_string(const NextHopId& hop) {
  if (hop.is_dummy()) return "dummy";
  return "(sdx" + std::to_string(hop.sdx) + ",AS" + std::to_string(hop.as) + ")";
}

// --- RuleTable -------------------------------------------------------------

bool RuleTable::register_entry(const RuleEntry& entry) {
  if (entry.next_hop.is_dummy()) throw InvalidInput("the dummy hop cannot be registered");
  std::unique_lock lock(mu_);
  if (index_.count(entry.id)) return false;
  index_.emplace(entry.id, entry.prefix);
  by_prefix_[entry.prefix].push_back(entry);
  return true;
}

bool RuleTable::deregister(RuleId id) {
  std::unique_lock lock(mu_);
  const auto it = index_.find(id);
  if (it == index_.end()) return false;
  auto& list = by_prefix_[it->second];
  list.erase(std::remove_if(list.begin(), list.end(), [&](const RuleEntry& e) { return e.id == id; }), list.end());
  if (list.empty()) by_prefix_.erase(it->second);
  index_.erase(it);
  return true;
}

std::optional<RuleEntry> RuleTable::find(RuleId id) const {
  std::shared_lock lock(mu_);
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  for (const auto& e : by_prefix_.at(it->second)) {
    if (e.id == id) return e;
  }
  return std::nullopt;
}

std::vector<RuleEntry> RuleTable::entries(PrefixId prefix, std::optional<AsId> owner) const {
  std::shared_lock lock(mu_);
  std::vector<RuleEntry> out;
  const auto it = by_prefix_.find(prefix);
  if (it == by_prefix_.end()) return out;
  for (const auto& e : it->second) {
    if (!owner || e.owner == *owner) out.push_back(e);
  }
  return out;
}

std::size_t RuleTable::count(PrefixId prefix, std::optional<AsId> owner) const {
  std::shared_lock lock(mu_);
  const auto it = by_prefix_.find(prefix);
  if (it == by_prefix_.end()) return 0;
  if (!owner) return it->second.size();
  return static_cast<std::size_t>(
      std::count_if(it->second.begin(), it->second.end(), [&](const RuleEntry& e) { return e.owner == *owner; }));
}

std::size_t RuleTable::size() const {
  std::shared_lock lock(mu_);
  return index_.size();
}

// --- Envelope --------------------------------------------------------------

std::vector<std::uint8_t> encode(const QueryEnvelope& envelope) {
  ByteWriter w;
  w.u32(envelope.prefix);
  w.u8(envelope.owner ? 1 : 0);
  w.u32(envelope.owner.value_or(0));
  w.u8(static_cast<std::uint8_t>(envelope.backend));
  w.u64(envelope.nonce);
  w.u32(envelope.width);
  w.u32(envelope.id_width);
  return w.take();
}

QueryEnvelope decode_envelope(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  QueryEnvelope e;
  e.prefix = r.u32();
  const bool has_owner = r.u8() != 0;
  const AsId owner = r.u32();
  if (has_owner) e.owner = owner;
  const std::uint8_t backend = r.u8();
  if (backend > 1) throw ProtocolError("unknown backend tag");
  e.backend = static_cast<Backend>(backend);
  e.nonce = r.u64();
  e.width = r.u32();
  e.id_width = r.u32();
  r.expect_end();
  return e;
}

namespace {

enum class QueryStatus : std::uint8_t { kOk = 0, kLayoutMismatch = 1 };

std::vector<std::uint8_t> encode_result(QueryStatus status, std::uint32_t k) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(status));
  w.u32(k);
  return w.take();
}

std::size_t triples_for(Backend backend, const BooleanCircuit& c) {
  return backend == Backend::kGmw ? c.and_count() : 0;
}

std::size_t transfers_for(Backend backend, const BooleanCircuit& c) {
  return backend == Backend::kYao ? c.num_inputs(kParty0) : 0;
}

}  // namespace

// --- Holder ----------------------------------------------------------------

HolderView serve_query(Channel& channel, const RuleTable& table, const TrustedDealer& dealer,
                       std::uint64_t holder_seed) {
  SessionChannel ch(channel);
  ch.set_phase(Phase::kSetup);
  ch.begin_round();
  const QueryEnvelope env = decode_envelope(ch.recv(MsgKind::kVerifyQuery));
  const std::vector<RuleEntry> entries = table.entries(env.prefix, env.owner);

  HolderView view;
  view.prefix = env.prefix;
  view.owner = env.owner;
  const bool layout_ok = env.id_width == kHopIdWidth && env.width > 0 &&
                         std::all_of(entries.begin(), entries.end(),
                                     [&](const RuleEntry& e) { return e.rule.width() == env.width; });
  view.k = layout_ok ? static_cast<std::uint32_t>(entries.size()) : 0;
  ch.send(MsgKind::kVerifyResult, encode_result(layout_ok ? QueryStatus::kOk : QueryStatus::kLayoutMismatch, view.k));
  if (view.k == 0) {
    view.transcript = ch.transcript();
    return view;
  }

  // Fresh order per query so output positions carry no index information.
  Prg shuffle(Prg::derive({holder_seed, env.nonce, 0x5407}));
  const auto perm = shuffle.permutation(entries.size());
  BitVector inputs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const RuleEntry& e = entries[perm[i]];
    inputs.append(rule_input_bits(e.rule));
    inputs.append(BitVector::from_uint(e.next_hop.encode(), kHopIdWidth));
  }
  inputs.append(BitVector::from_uint(kDummyHop.encode(), kHopIdWidth));

  const BooleanCircuit circuit = build_batch_query({view.k, env.width, kHopIdWidth});
  PartySetup material = dealer.issue(kParty1, env.nonce, triples_for(env.backend, circuit),
                                     transfers_for(env.backend, circuit));
  Prg rng(Prg::derive({holder_seed, env.nonce, 1}));
  if (env.backend == Backend::kGmw) {
    gmw_execute(circuit, kParty1, inputs, ch, std::move(material), rng, Reveal::kParty0);
  } else {
    YaoGarbler garbler(circuit, kParty1, ch, std::move(material), rng);
    garbler.setup();
    garbler.evaluate(inputs, false);
  }
  view.transcript = ch.transcript();
  return view;
}

// --- Querier ---------------------------------------------------------------

namespace detail {

QueryTrace query_with_trace(Channel& channel, const TernaryRule& local, PrefixId prefix, std::optional<AsId> owner,
                            const TrustedDealer& dealer, const QueryOptions& options) {
  SessionChannel ch(channel);
  try {
    QueryEnvelope env;
    env.prefix = prefix;
    env.owner = owner;
    env.backend = options.backend;
    env.nonce = options.nonce;
    env.width = static_cast<std::uint32_t>(local.width());
    ch.set_phase(Phase::kSetup);
    ch.begin_round();
    ch.send(MsgKind::kVerifyQuery, encode(env));
    const auto reply = ch.recv(MsgKind::kVerifyResult);
    ByteReader r(reply);
    const auto status = static_cast<QueryStatus>(r.u8());
    const std::uint32_t k = r.u32();
    r.expect_end();
    if (status != QueryStatus::kOk) throw QueryAborted("holder rejected the query layout");

    QueryTrace trace;
    trace.k = k;
    if (k == 0) {
      trace.transcript = ch.transcript();
      return trace;
    }
    const BooleanCircuit circuit = build_batch_query({k, env.width, kHopIdWidth});
    PartySetup material = dealer.issue(kParty0, env.nonce, triples_for(env.backend, circuit),
                                       transfers_for(env.backend, circuit));
    const BitVector inputs = rule_input_bits(local);
    BitVector out;
    if (env.backend == Backend::kGmw) {
      Prg rng(Prg::derive({options.querier_seed, env.nonce, 0}));
      out = *gmw_execute(circuit, kParty0, inputs, ch, std::move(material), rng, Reveal::kParty0);
    } else {
      YaoEvaluator evaluator(circuit, kParty0, ch, std::move(material));
      evaluator.setup();
      out = evaluator.evaluate(inputs, false);
    }
    trace.raw.reserve(k);
    for (std::uint32_t i = 0; i < k; ++i) {
      trace.raw.push_back(NextHopId::decode(out.get_field(std::size_t{kHopIdWidth} * i, kHopIdWidth)));
    }
    if (const auto start = ch.online_start()) trace.online_time = std::chrono::steady_clock::now() - *start;
    trace.transcript = ch.transcript();
    return trace;
  } catch (const QueryAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw QueryAborted(std::string("query failed: ") + e.what());
  }
}

}  // namespace detail

namespace {

QueryResult collapse(const std::vector<NextHopId>& raw) {
  QueryResult result;
  for (const auto& hop : raw) {
    if (!hop.is_dummy()) result.hops.insert(hop);
  }
  return result;
}

}  // namespace

QueryResult query(Channel& channel, const TernaryRule& local, PrefixId prefix, std::optional<AsId> owner,
                  const TrustedDealer& dealer, const QueryOptions& options) {
  return collapse(detail::query_with_trace(channel, local, prefix, owner, dealer, options).raw);
}

QueryResult oracle_query(const RuleTable& table, const TernaryRule& local, PrefixId prefix,
                         std::optional<AsId> owner) {
  QueryResult result;
  for (const auto& e : table.entries(prefix, owner)) {
    if (overlaps(local, e.rule)) result.hops.insert(e.next_hop);
  }
  return result;
}

namespace detail {

std::pair<InProcessQuery, QueryTrace> query_in_process_with_trace(
    const RuleTable& remote, const TernaryRule& local, PrefixId prefix, std::optional<AsId> owner,
    const TrustedDealer& dealer, const QueryOptions& options, std::uint64_t holder_seed,
    std::chrono::microseconds one_way_delay) {
  auto [querier_end, holder_end] = make_loopback_pair(one_way_delay);
  HolderView view;
  std::exception_ptr holder_error;
  std::thread holder([&, ch = holder_end.get()] {
    try {
      view = serve_query(*ch, remote, dealer, holder_seed);
    } catch (...) {
      holder_error = std::current_exception();
      ch->close();
    }
  });
  QueryTrace trace;
  try {
    trace = query_with_trace(*querier_end, local, prefix, owner, dealer, options);
  } catch (...) {
    querier_end->close();
    holder.join();
    throw;
  }
  holder.join();
  if (holder_error) {
    try {
      std::rethrow_exception(holder_error);
    } catch (const std::exception& e) {
      throw QueryAborted(std::string("holder failed: ") + e.what());
    }
  }
  InProcessQuery out;
  out.result = collapse(trace.raw);
  out.k = trace.k;
  out.holder = std::move(view);
  out.querier_transcript = trace.transcript;
  return {std::move(out), std::move(trace)};
}

}  // namespace detail

InProcessQuery query_in_process(const RuleTable& remote, const TernaryRule& local, PrefixId prefix,
                                std::optional<AsId> owner, const TrustedDealer& dealer, const QueryOptions& options,
                                std::uint64_t holder_seed, std::chrono::microseconds one_way_delay) {
  return detail::query_in_process_with_trace(remote, local, prefix, owner, dealer, options, holder_seed,
                                             one_way_delay)
      .first;
}

}  // namespace prelude
