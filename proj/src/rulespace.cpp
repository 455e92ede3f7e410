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

#include "prelude/rulespace.hpp"

#include <algorithm>
#include <arpa/inet.h>
#include <bit>
#include <charconv>
#include <limits>
#include <sstream>

#include "prelude/errors.hpp"

namespace prelude {

namespace {

std::size_t word_count(std::size_t bits) { return (bits + 63) / 64; }

}  // namespace

BitVector::BitVector(std::size_t size) : size_(size), words_(word_count(size), 0) {}

BitVector BitVector::from_string(std::string_view bits) {
  BitVector out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      out.set(i, true);
    } else if (bits[i] != '0') {
      throw InvalidInput("bit string may only contain 0 and 1");
    }
  }
  return out;
}

BitVector BitVector::from_uint(std::uint64_t value, std::size_t width) {
  BitVector out(width);
  out.set_field(0, width, value);
  return out;
}

std::uint64_t BitVector::get_field(std::size_t first, std::size_t width) const {
  if (width > 64 || first + width > size_) throw InvalidInput("field out of range");
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < width; ++i) value = (value << 1) | static_cast<std::uint64_t>(get(first + i));
  return value;
}

void BitVector::set_field(std::size_t first, std::size_t width, std::uint64_t value) {
  if (width > 64 || first + width > size_) throw InvalidInput("field out of range");
  for (std::size_t i = 0; i < width; ++i) set(first + i, (value >> (width - 1 - i)) & 1U);
}

void BitVector::append(bool value) {
  if (size_ % 64 == 0) words_.push_back(0);
  ++size_;
  set(size_ - 1, value);
}

void BitVector::append(const BitVector& other) {
  words_.reserve(word_count(size_ + other.size_));
  for (std::size_t i = 0; i < other.size_; ++i) append(other.get(i));
}

BitVector BitVector::slice(std::size_t first, std::size_t count) const {
  if (first + count > size_) throw InvalidInput("slice out of range");
  BitVector out(count);
  for (std::size_t i = 0; i < count; ++i) out.set(i, get(first + i));
  return out;
}

bool BitVector::any() const {
  return std::any_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w != 0; });
}

bool BitVector::all() const { return count() == size_; }

std::size_t BitVector::count() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

void BitVector::check_same_size(const BitVector& other) const {
  if (size_ != other.size_) throw InvalidInput("bit vector length mismatch");
}

void BitVector::clear_tail() {
  if (size_ % 64 != 0) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
}

BitVector& BitVector::operator^=(const BitVector& other) {
  check_same_size(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
  return *this;
}

BitVector& BitVector::operator&=(const BitVector& other) {
  check_same_size(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  return *this;
}

BitVector& BitVector::operator|=(const BitVector& other) {
  check_same_size(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

BitVector BitVector::operator~() const {
  BitVector out = *this;
  for (auto& w : out.words_) w = ~w;
  out.clear_tail();
  return out;
}

std::vector<std::uint8_t> BitVector::to_bytes() const {
  std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
  for (std::size_t i = 0; i < size_; ++i) {
    if (get(i)) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return out;
}

BitVector BitVector::from_bytes(std::span<const std::uint8_t> bytes, std::size_t size) {
  if (bytes.size() * 8 < size) throw InvalidInput("not enough bytes for bit vector");
  BitVector out(size);
  for (std::size_t i = 0; i < size; ++i) out.set(i, (bytes[i / 8] >> (7 - i % 8)) & 1U);
  return out;
}

std::string BitVector::to_string() const {
  std::string out(size_, '0');
  for (std::size_t i = 0; i < size_; ++i) {
    if (get(i)) out[i] = '1';
  }
  return out;
}

std::strong_ordering operator<=>(const BitVector& a, const BitVector& b) {
  if (auto c = a.size_ <=> b.size_; c != 0) return c;
  return std::lexicographical_compare_three_way(a.words_.begin(), a.words_.end(), b.words_.begin(),
                                                b.words_.end());
}

// --- TernaryRule -----------------------------------------------------------

TernaryRule::TernaryRule(BitVector pattern, BitVector mask)
    : pattern_(std::move(pattern)), mask_(std::move(mask)) {
  if (pattern_.size() != mask_.size()) throw InvalidInput("pattern and mask widths differ");
  pattern_ &= mask_;
}

TernaryRule TernaryRule::wildcard(std::size_t width) {
  return TernaryRule(BitVector(width), BitVector(width));
}

TernaryRule TernaryRule::from_string(std::string_view literal) {
  BitVector pattern(literal.size());
  BitVector mask(literal.size());
  for (std::size_t i = 0; i < literal.size(); ++i) {
    switch (literal[i]) {
      case '1':
        pattern.set(i, true);
        [[fallthrough]];
      case '0':
        mask.set(i, true);
        break;
      case 'x':
      case 'X':
      case '*':
        break;
      default:
        throw InvalidInput("ternary literal may only contain 0, 1 and x");
    }
  }
  return TernaryRule(std::move(pattern), std::move(mask));
}

std::string TernaryRule::to_string() const {
  std::string out(width(), 'x');
  for (std::size_t i = 0; i < width(); ++i) {
    if (mask_.get(i)) out[i] = pattern_.get(i) ? '1' : '0';
  }
  return out;
}

bool overlaps(const TernaryRule& a, const TernaryRule& b) {
  if (a.width() != b.width()) throw InvalidInput("rule widths differ");
  const auto am = a.mask().words();
  const auto bm = b.mask().words();
  const auto ap = a.pattern().words();
  const auto bp = b.pattern().words();
  for (std::size_t i = 0; i < am.size(); ++i) {
    if ((am[i] & bm[i] & (ap[i] ^ bp[i])) != 0) return false;
  }
  return true;
}

bool matches(const TernaryRule& rule, const Packet& packet) {
  if (rule.width() != packet.bits.size()) throw InvalidInput("packet width differs from rule width");
  const auto m = rule.mask().words();
  const auto p = rule.pattern().words();
  const auto x = packet.bits.words();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if ((m[i] & (p[i] ^ x[i])) != 0) return false;
  }
  return true;
}

std::optional<TernaryRule> intersect(const TernaryRule& a, const TernaryRule& b) {
  if (!overlaps(a, b)) return std::nullopt;
  return TernaryRule(a.pattern() | b.pattern(), a.mask() | b.mask());
}

bool contains(const TernaryRule& outer, const TernaryRule& inner) {
  if (outer.width() != inner.width()) throw InvalidInput("rule widths differ");
  // Every bit outer cares about, inner must care about with the same value.
  if ((outer.mask() & ~inner.mask()).any()) return false;
  return !((outer.pattern() ^ inner.pattern()) & outer.mask()).any();
}

// --- FlowSpec --------------------------------------------------------------

void validate(const FlowSpec& spec) {
  const bool has_ports = spec.src_port.has_value() || spec.dst_port.has_value();
  if (has_ports && spec.ip_proto && *spec.ip_proto != kProtoTcp && *spec.ip_proto != kProtoUdp) {
    throw InvalidInput("ports require ip_proto tcp, udp or wildcard");
  }
}

TernaryRule encode(const FlowSpec& spec) {
  validate(spec);
  BitVector pattern(FlowLayout::kWidth);
  BitVector mask(FlowLayout::kWidth);
  auto put = [&](std::size_t first, std::size_t width, const auto& field) {
    if (!field) return;
    pattern.set_field(first, width, *field);
    mask.set_field(first, width, ~std::uint64_t{0} >> (64 - width));
  };
  put(FlowLayout::kSrcIp, 32, spec.src_ip);
  put(FlowLayout::kDstIp, 32, spec.dst_ip);
  put(FlowLayout::kSrcPort, 16, spec.src_port);
  put(FlowLayout::kDstPort, 16, spec.dst_port);
  put(FlowLayout::kProto, 8, spec.ip_proto);
  return TernaryRule(std::move(pattern), std::move(mask));
}

FlowSpec decode(const TernaryRule& rule) {
  if (rule.width() != FlowLayout::kWidth) throw InvalidInput("flow rules are 104 bits wide");
  FlowSpec spec;
  auto take = [&](std::size_t first, std::size_t width, auto& field) {
    const std::uint64_t m = rule.mask().get_field(first, width);
    if (m == 0) return;
    if (m != (~std::uint64_t{0} >> (64 - width))) throw InvalidInput("field is partially masked");
    using T = typename std::remove_reference_t<decltype(field)>::value_type;
    field = static_cast<T>(rule.pattern().get_field(first, width));
  };
  take(FlowLayout::kSrcIp, 32, spec.src_ip);
  take(FlowLayout::kDstIp, 32, spec.dst_ip);
  take(FlowLayout::kSrcPort, 16, spec.src_port);
  take(FlowLayout::kDstPort, 16, spec.dst_port);
  take(FlowLayout::kProto, 8, spec.ip_proto);
  return spec;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value > std::numeric_limits<T>::max()) {
    throw InvalidInput("bad value for " + std::string(key) + ": " + std::string(text));
  }
  return static_cast<T>(value);
}

std::uint32_t parse_ipv4(std::string_view text) {
  in_addr addr{};
  const std::string s(text);
  if (inet_pton(AF_INET, s.c_str(), &addr) != 1) throw InvalidInput("bad IPv4 address: " + s);
  return ntohl(addr.s_addr);
}

std::string format_ipv4(std::uint32_t ip) {
  return std::to_string(ip >> 24) + "." + std::to_string((ip >> 16) & 0xFF) + "." +
         std::to_string((ip >> 8) & 0xFF) + "." + std::to_string(ip & 0xFF);
}

}  // namespace

FlowSpec parse_flow_spec(std::string_view literal) {
  FlowSpec spec;
  literal = trim(literal);
  if (literal == "*") return spec;
  while (!literal.empty()) {
    const auto comma = literal.find(',');
    const std::string_view item = trim(literal.substr(0, comma));
    literal = comma == std::string_view::npos ? std::string_view{} : literal.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw InvalidInput("expected key=value, got " + std::string(item));
    const std::string_view key = trim(item.substr(0, eq));
    const std::string_view value = trim(item.substr(eq + 1));
    const bool wild = value == "*";
    if (key == "src_ip") {
      spec.src_ip = wild ? std::nullopt : std::optional(parse_ipv4(value));
    } else if (key == "dst_ip") {
      spec.dst_ip = wild ? std::nullopt : std::optional(parse_ipv4(value));
    } else if (key == "src_port") {
      spec.src_port = wild ? std::nullopt : std::optional(parse_number<std::uint16_t>(value, key));
    } else if (key == "dst_port") {
      spec.dst_port = wild ? std::nullopt : std::optional(parse_number<std::uint16_t>(value, key));
    } else if (key == "proto" || key == "ip_proto") {
      if (wild) {
        spec.ip_proto.reset();
      } else if (value == "tcp") {
        spec.ip_proto = kProtoTcp;
      } else if (value == "udp") {
        spec.ip_proto = kProtoUdp;
      } else if (value == "icmp") {
        spec.ip_proto = 1;
      } else {
        spec.ip_proto = parse_number<std::uint8_t>(value, key);
      }
    } else {
      throw InvalidInput("unknown rule key: " + std::string(key));
    }
  }
  validate(spec);
  return spec;
}

std::string to_string(const FlowSpec& spec) {
  std::ostringstream out;
  const char* sep = "";
  auto emit = [&](const char* key, const std::string& value) {
    out << sep << key << '=' << value;
    sep = ",";
  };
  if (spec.ip_proto) {
    emit("proto", *spec.ip_proto == kProtoTcp   ? "tcp"
                  : *spec.ip_proto == kProtoUdp ? "udp"
                                                : std::to_string(*spec.ip_proto));
  }
  if (spec.src_ip) emit("src_ip", format_ipv4(*spec.src_ip));
  if (spec.dst_ip) emit("dst_ip", format_ipv4(*spec.dst_ip));
  if (spec.src_port) emit("src_port", std::to_string(*spec.src_port));
  if (spec.dst_port) emit("dst_port", std::to_string(*spec.dst_port));
  if (sep[0] == '\0') return "*";
  return out.str();
}

}  // namespace prelude
