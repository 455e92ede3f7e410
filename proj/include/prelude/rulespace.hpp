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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prelude {

/// Fixed-length bit string packed into 64-bit words. Bit 0 is the first
/// (most significant) bit of the encoded header.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t size);

  /// Parses a string of '0'/'1' characters.
  static BitVector from_string(std::string_view bits);
  /// The low `width` bits of `value`, most significant first.
  static BitVector from_uint(std::uint64_t value, std::size_t width);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool get(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void set(std::size_t i, bool value) {
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (value) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }
  bool operator[](std::size_t i) const { return get(i); }

  /// Big-endian field access: bit `first` is the field's MSB.
  std::uint64_t get_field(std::size_t first, std::size_t width) const;
  void set_field(std::size_t first, std::size_t width, std::uint64_t value);

  void append(bool value);
  void append(const BitVector& other);
  BitVector slice(std::size_t first, std::size_t count) const;

  bool any() const;
  bool all() const;
  std::size_t count() const;

  BitVector& operator^=(const BitVector& other);
  BitVector& operator&=(const BitVector& other);
  BitVector& operator|=(const BitVector& other);
  friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }
  friend BitVector operator&(BitVector a, const BitVector& b) { return a &= b; }
  friend BitVector operator|(BitVector a, const BitVector& b) { return a |= b; }
  BitVector operator~() const;

  std::span<const std::uint64_t> words() const { return words_; }

  /// Packs bits into bytes, bit i at byte i/8, MSB first within the byte.
  std::vector<std::uint8_t> to_bytes() const;
  static BitVector from_bytes(std::span<const std::uint8_t> bytes, std::size_t size);

  std::string to_string() const;

  friend bool operator==(const BitVector& a, const BitVector& b) = default;
  friend std::strong_ordering operator<=>(const BitVector& a, const BitVector& b);

 private:
  void check_same_size(const BitVector& other) const;
  void clear_tail();

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

/// A header value tested against rules by the plaintext oracle.
struct Packet {
  BitVector bits;
};

/// Ternary match encoded as pattern + mask. Mask bit 1 means the rule cares
/// about that bit. The pattern is kept canonical: 0 wherever the mask is 0.
class TernaryRule {
 public:
  TernaryRule() = default;
  TernaryRule(BitVector pattern, BitVector mask);

  static TernaryRule wildcard(std::size_t width);
  /// Parses a literal over {'0','1','x'}.
  static TernaryRule from_string(std::string_view literal);

  std::size_t width() const { return pattern_.size(); }
  const BitVector& pattern() const { return pattern_; }
  const BitVector& mask() const { return mask_; }

  std::string to_string() const;

  friend bool operator==(const TernaryRule&, const TernaryRule&) = default;
  friend auto operator<=>(const TernaryRule&, const TernaryRule&) = default;

 private:
  BitVector pattern_;
  BitVector mask_;
};

/// True iff some packet matches both rules.
bool overlaps(const TernaryRule& a, const TernaryRule& b);
bool matches(const TernaryRule& rule, const Packet& packet);
/// The rule matching exactly the packets both rules match, if any.
std::optional<TernaryRule> intersect(const TernaryRule& a, const TernaryRule& b);
/// True iff every packet matching `inner` also matches `outer`.
bool contains(const TernaryRule& outer, const TernaryRule& inner);

// --- Flow-level rules ------------------------------------------------------

inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

/// Five-tuple match with per-field wildcards (nullopt).
struct FlowSpec {
  std::optional<std::uint32_t> src_ip;
  std::optional<std::uint32_t> dst_ip;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::optional<std::uint8_t> ip_proto;

  friend bool operator==(const FlowSpec&, const FlowSpec&) = default;
};

/// Bit layout of an encoded FlowSpec.
struct FlowLayout {
  static constexpr std::size_t kSrcIp = 0;
  static constexpr std::size_t kDstIp = 32;
  static constexpr std::size_t kSrcPort = 64;
  static constexpr std::size_t kDstPort = 80;
  static constexpr std::size_t kProto = 96;
  static constexpr std::size_t kWidth = 104;
};

void validate(const FlowSpec& spec);
TernaryRule encode(const FlowSpec& spec);
/// Inverse of encode. Rejects rules whose mask is not all-or-nothing per field.
FlowSpec decode(const TernaryRule& rule);

/// Parses `proto=tcp,dst_port=80` style literals. Keys: src_ip, dst_ip,
/// src_port, dst_port, proto (alias ip_proto). `*` or omission is wildcard.
FlowSpec parse_flow_spec(std::string_view literal);
std::string to_string(const FlowSpec& spec);

}  // namespace prelude
