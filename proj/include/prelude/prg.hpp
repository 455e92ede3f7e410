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
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "prelude/rulespace.hpp"

namespace prelude {

/// 128-bit value used for PRG seeds and garbled wire labels.
struct Block {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  bool lsb() const { return lo & 1U; }
  Block& operator^=(const Block& o) {
    lo ^= o.lo;
    hi ^= o.hi;
    return *this;
  }
  friend Block operator^(Block a, const Block& b) { return a ^= b; }
  friend bool operator==(const Block&, const Block&) = default;

  void store(std::uint8_t* out) const;
  static Block load(const std::uint8_t* in);
};

/// AES-128-CTR keystream generator. Satisfies UniformRandomBitGenerator.
class Prg {
 public:
  using result_type = std::uint64_t;

  explicit Prg(Block seed);
  explicit Prg(std::uint64_t seed) : Prg(Block{seed, 0x5eed5eed5eed5eedULL}) {}
  ~Prg();
  Prg(Prg&&) noexcept;
  Prg& operator=(Prg&&) noexcept;
  Prg(const Prg&) = delete;
  Prg& operator=(const Prg&) = delete;

  /// Seed derived by hashing a label path, e.g. {root, nonce, party}.
  static Block derive(std::initializer_list<std::uint64_t> path);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  Block block();
  bool bit();
  BitVector bits(std::size_t n);
  void fill(std::span<std::uint8_t> out);
  /// Uniform in [0, bound) by rejection sampling.
  std::uint64_t uniform(std::uint64_t bound);
  /// Uniform permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  void refill();

  struct Cipher;
  std::unique_ptr<Cipher> cipher_;
  std::array<std::uint8_t, 4096> buffer_{};
  std::size_t pos_ = 4096;
};

}  // namespace prelude
