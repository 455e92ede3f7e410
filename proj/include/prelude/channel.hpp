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
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace prelude {

enum class MsgKind : std::uint8_t {
  kInputShare = 1,
  kAndOpening = 2,
  kGarbledTables = 3,
  kLabels = 4,
  kOutputShare = 5,
  kSetupTriples = 6,
  kVerifyQuery = 16,
  kVerifyResult = 17,
  kSubscribe = 18,
  kNotifyChange = 19,
};

const char* to_string(MsgKind kind);

struct Frame {
  MsgKind kind;
  std::vector<std::uint8_t> payload;
};

/// Wire form: u32 big-endian length (kind byte + payload), u8 kind, payload.
std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// Decodes exactly one frame occupying all of `bytes`.
Frame decode_frame(std::span<const std::uint8_t> bytes);
inline constexpr std::size_t kFrameHeaderBytes = 5;
inline constexpr std::uint32_t kMaxFrameLength = 1u << 30;

/// Bidirectional, ordered, reliable frame transport between two endpoints.
/// send/recv throw SessionAborted once either side has closed.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Frame& frame) = 0;
  virtual Frame recv() = 0;
  virtual void close() = 0;
};

/// In-process pair. Every frame is encoded to bytes and delivered no earlier
/// than `one_way_delay` after it was sent.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_loopback_pair(
    std::chrono::microseconds one_way_delay = std::chrono::microseconds{0});

class TcpListener {
 public:
  /// Binds 127.0.0.1:port; port 0 picks a free port.
  explicit TcpListener(std::uint16_t port = 0);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<Channel> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port);

// --- Session accounting ----------------------------------------------------

enum class Phase : std::uint8_t { kSetup, kOnline };
enum class Direction : std::uint8_t { kSent, kReceived, kFromDealer };

struct TranscriptEntry {
  Direction direction;
  MsgKind kind;
  std::size_t bytes;  // full frame size on the wire
  std::uint32_t round;
  Phase phase;
};

class Transcript {
 public:
  explicit Transcript(bool keep_payloads = false) : keep_payloads_(keep_payloads) {}

  void record(Direction direction, const Frame& frame, std::uint32_t round, Phase phase);

  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  /// Distinct round indices carrying at least one online message.
  std::uint32_t online_rounds() const;
  std::size_t bytes(Phase phase) const;
  std::size_t bytes(Phase phase, Direction direction) const;
  std::size_t count(Phase phase, MsgKind kind) const;
  /// FNV-1a over direction, kind, round, phase and payload of every entry.
  std::uint64_t digest() const { return digest_; }

  /// Payloads of received frames, in order (only if payloads are kept).
  const std::vector<std::vector<std::uint8_t>>& received_payloads() const { return received_; }
  const std::vector<MsgKind>& received_kinds() const { return received_kinds_; }

 private:
  bool keep_payloads_;
  std::vector<TranscriptEntry> entries_;
  std::uint64_t digest_ = 0xcbf29ce484222325ULL;
  std::vector<std::vector<std::uint8_t>> received_;
  std::vector<MsgKind> received_kinds_;
};

/// A Channel plus phase/round bookkeeping for one protocol session.
class SessionChannel {
 public:
  explicit SessionChannel(Channel& channel, bool keep_payloads = false)
      : channel_(&channel), transcript_(keep_payloads) {}

  void set_phase(Phase phase);
  Phase phase() const { return phase_; }
  /// Starts the next communication round within the current phase.
  void begin_round() { ++round_; }

  void send(MsgKind kind, std::vector<std::uint8_t> payload);
  /// Receives the next frame; throws ProtocolError if its kind differs.
  std::vector<std::uint8_t> recv(MsgKind expected);
  /// Accounts material that arrived from the dealer out of band.
  void record_dealer(const std::vector<std::uint8_t>& payload);

  const Transcript& transcript() const { return transcript_; }
  /// When the session first entered the online phase.
  std::optional<std::chrono::steady_clock::time_point> online_start() const { return online_start_; }

 private:
  Channel* channel_;
  Transcript transcript_;
  Phase phase_ = Phase::kSetup;
  std::optional<std::chrono::steady_clock::time_point> online_start_;
  std::uint32_t round_ = 0;
};

// --- Byte helpers shared by the wire codecs --------------------------------

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str(const std::string& s);
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

/// Throws ProtocolError on truncated input.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string str();
  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const;

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace prelude
