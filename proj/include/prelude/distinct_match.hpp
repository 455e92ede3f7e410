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

#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "prelude/channel.hpp"
#include "prelude/rulespace.hpp"
#include "prelude/smpc.hpp"
#include "prelude/types.hpp"

namespace prelude {

/// Where the next deflection happens: the SDX and the AS traffic is sent to.
struct NextHopId {
  SdxId sdx = 0;
  AsId as = 0;

  /// 48-bit circuit value: sdx in the top 16 bits, AS number below.
  std::uint64_t encode() const { return (std::uint64_t{sdx} << 32) | as; }
  static NextHopId decode(std::uint64_t value) {
    return {static_cast<SdxId>(value >> 32), static_cast<AsId>(value & 0xFFFFFFFFULL)};
  }
  bool is_dummy() const;

  friend auto operator<=>(const NextHopId&, const NextHopId&) = default;
};

inline constexpr NextHopId kDummyHop{0xFFFF, 0xFFFFFFFF};
inline bool NextHopId::is_dummy() const { return *this == kDummyHop; }
inline constexpr std::uint32_t kHopIdWidth = 48;

std::string to_string(const NextHopId& hop);

struct RuleEntry {
  RuleId id = 0;
  TernaryRule rule;
  NextHopId next_hop;
  AsId owner = 0;
  PrefixId prefix = 0;
};

struct QueryResult {
  std::set<NextHopId> hops;
  friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

/// One SDX's installed rules, partitioned by prefix. Readers share the lock;
/// registrations are serialized.
class RuleTable {
 public:
  /// False if an entry with the same id already exists (the call is a no-op).
  bool register_entry(const RuleEntry& entry);
  /// False if the id is unknown.
  bool deregister(RuleId id);

  std::optional<RuleEntry> find(RuleId id) const;
  /// Entries for a prefix in installation order, optionally one owner only.
  std::vector<RuleEntry> entries(PrefixId prefix, std::optional<AsId> owner = std::nullopt) const;
  std::size_t count(PrefixId prefix, std::optional<AsId> owner = std::nullopt) const;
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<PrefixId, std::vector<RuleEntry>> by_prefix_;
  std::map<RuleId, PrefixId> index_;
};

/// Clear metadata sent before any secure computation.
struct QueryEnvelope {
  PrefixId prefix = 0;
  std::optional<AsId> owner;
  Backend backend = Backend::kGmw;
  std::uint64_t nonce = 0;
  std::uint32_t width = FlowLayout::kWidth;
  std::uint32_t id_width = kHopIdWidth;
};

std::vector<std::uint8_t> encode(const QueryEnvelope& envelope);
QueryEnvelope decode_envelope(std::span<const std::uint8_t> bytes);

/// What the holder side observed for one query; used for privacy assertions.
struct HolderView {
  PrefixId prefix = 0;
  std::optional<AsId> owner;
  std::uint32_t k = 0;
  Transcript transcript;
};

/// Serves one query session on `channel` as party 1 (and Yao garbler).
HolderView serve_query(Channel& channel, const RuleTable& table, const TrustedDealer& dealer,
                       std::uint64_t holder_seed);

struct QueryOptions {
  Backend backend = Backend::kGmw;
  std::uint64_t nonce = 0;
  std::uint64_t querier_seed = 0;
};

/// Querier side as party 0. Session failures surface as QueryAborted.
QueryResult query(Channel& channel, const TernaryRule& local, PrefixId prefix, std::optional<AsId> owner,
                  const TrustedDealer& dealer, const QueryOptions& options);

namespace detail {

struct QueryTrace {
  std::uint32_t k = 0;
  std::vector<NextHopId> raw;  // reconstructed vector, dummies included
  Transcript transcript;
  /// Querier wall time from entering the online phase to the decoded output.
  std::chrono::nanoseconds online_time{0};
};

QueryTrace query_with_trace(Channel& channel, const TernaryRule& local, PrefixId prefix, std::optional<AsId> owner,
                            const TrustedDealer& dealer, const QueryOptions& options);

}  // namespace detail

/// Plaintext filter, map and dedupe over the holder's entries.
QueryResult oracle_query(const RuleTable& table, const TernaryRule& local, PrefixId prefix,
                         std::optional<AsId> owner = std::nullopt);

/// Both endpoints in one process: the holder runs on its own thread over a
/// loopback pair with the given one-way delay.
struct InProcessQuery {
  QueryResult result;
  std::uint32_t k = 0;
  HolderView holder;
  Transcript querier_transcript;
};

InProcessQuery query_in_process(const RuleTable& remote, const TernaryRule& local, PrefixId prefix,
                                std::optional<AsId> owner, const TrustedDealer& dealer, const QueryOptions& options,
                                std::uint64_t holder_seed,
                                std::chrono::microseconds one_way_delay = std::chrono::microseconds{0});

namespace detail {

/// As query_in_process, also returning the raw reconstructed vector.
std::pair<InProcessQuery, QueryTrace> query_in_process_with_trace(
    const RuleTable& remote, const TernaryRule& local, PrefixId prefix, std::optional<AsId> owner,
    const TrustedDealer& dealer, const QueryOptions& options, std::uint64_t holder_seed,
    std::chrono::microseconds one_way_delay = std::chrono::microseconds{0});

}  // namespace detail

}  // namespace prelude
