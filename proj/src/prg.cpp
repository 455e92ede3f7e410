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

#include "prelude/prg.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>

namespace prelude {

void Block::store(std::uint8_t* out) const {
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<std::uint8_t>(lo >> (8 * i));
    out[8 + i] = static_cast<std::uint8_t>(hi >> (8 * i));
  }
}

Block Block::load(const std::uint8_t* in) {
  Block b;
  for (int i = 0; i < 8; ++i) {
    b.lo |= std::uint64_t{in[i]} << (8 * i);
    b.hi |= std::uint64_t{in[8 + i]} << (8 * i);
  }
  return b;
}

struct Prg::Cipher {
  EVP_CIPHER_CTX* ctx = nullptr;
  ~Cipher() { EVP_CIPHER_CTX_free(ctx); }
};

Prg::Prg(Block seed) : cipher_(std::make_unique<Cipher>()) {
  std::uint8_t key[16];
  seed.store(key);
  const std::uint8_t iv[16] = {};
  cipher_->ctx = EVP_CIPHER_CTX_new();
  if (cipher_->ctx == nullptr || EVP_EncryptInit_ex(cipher_->ctx, EVP_aes_128_ctr(), nullptr, key, iv) != 1) {
    throw std::runtime_error("AES-CTR init failed");
  }
}

Prg::~Prg() = default;
Prg::Prg(Prg&&) noexcept = default;
Prg& Prg::operator=(Prg&&) noexcept = default;

Block Prg::derive(std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint8_t> msg;
  msg.reserve(path.size() * 8);
  for (std::uint64_t v : path) {
    for (int i = 0; i < 8; ++i) msg.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::uint8_t digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(msg.data(), msg.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return Block::load(digest);
}

void Prg::refill() {
  std::uint8_t zeros[sizeof(buffer_)] = {};
  int out_len = 0;
  if (EVP_EncryptUpdate(cipher_->ctx, buffer_.data(), &out_len, zeros, static_cast<int>(sizeof(zeros))) != 1) {
    throw std::runtime_error("AES-CTR keystream failed");
  }
  pos_ = 0;
}

void Prg::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    const std::size_t n = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

std::uint64_t Prg::next_u64() {
  std::uint8_t b[8];
  fill(b);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

Block Prg::block() {
  std::uint8_t b[16];
  fill(b);
  return Block::load(b);
}

bool Prg::bit() { return next_u64() & 1U; }

BitVector Prg::bits(std::size_t n) {
  std::vector<std::uint8_t> bytes((n + 7) / 8);
  fill(bytes);
  return BitVector::from_bytes(bytes, n);
}

std::uint64_t Prg::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform bound must be positive");
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

std::vector<std::size_t> Prg::permutation(std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform(i)]);
  return perm;
}

}  // namespace prelude
