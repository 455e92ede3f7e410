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

#include "prelude/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include "prelude/errors.hpp"

namespace prelude {

const char* to_string(MsgKind kind) {
  switch (kind) {
    case MsgKind::kInputShare: return "INPUT_SHARE";
    case MsgKind::kAndOpening: return "AND_OPENING";
    case MsgKind::kGarbledTables: return "GARBLED_TABLES";
    case MsgKind::kLabels: return "LABELS";
    case MsgKind::kOutputShare: return "OUTPUT_SHARE";
    case MsgKind::kSetupTriples: return "SETUP_TRIPLES";
    case MsgKind::kVerifyQuery: return "VERIFY_QUERY";
    case MsgKind::kVerifyResult: return "VERIFY_RESULT";
    case MsgKind::kSubscribe: return "SUBSCRIBE";
    case MsgKind::kNotifyChange: return "NOTIFY_CHANGE";
  }
  return "UNKNOWN";
}

namespace {

bool known_kind(std::uint8_t k) {
  return (k >= 1 && k <= 6) || (k >= 16 && k <= 19);
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  const std::size_t length = frame.payload.size() + 1;
  if (length > kMaxFrameLength) throw InvalidInput("frame too large");
  std::vector<std::uint8_t> out;
  out.reserve(4 + length);
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(length >> shift));
  out.push_back(static_cast<std::uint8_t>(frame.kind));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw ProtocolError("short frame");
  std::uint32_t length = 0;
  for (int i = 0; i < 4; ++i) length = (length << 8) | bytes[i];
  if (length == 0 || length > kMaxFrameLength) throw ProtocolError("bad frame length");
  if (bytes.size() != 4 + std::size_t{length}) throw ProtocolError("frame length does not match buffer");
  if (!known_kind(bytes[4])) throw ProtocolError("unknown message kind " + std::to_string(bytes[4]));
  return Frame{static_cast<MsgKind>(bytes[4]), std::vector<std::uint8_t>(bytes.begin() + 5, bytes.end())};
}

// --- Loopback --------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::pair<Clock::time_point, std::vector<std::uint8_t>>> queue;
  bool closed = false;
};

class LoopbackChannel final : public Channel {
 public:
  LoopbackChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out, std::chrono::microseconds delay)
      : in_(std::move(in)), out_(std::move(out)), delay_(delay) {}
  ~LoopbackChannel() override { close(); }

  void send(const Frame& frame) override {
    auto bytes = encode_frame(frame);
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw SessionAborted("channel closed");
    out_->queue.emplace_back(Clock::now() + delay_, std::move(bytes));
    out_->cv.notify_all();
  }

  Frame recv() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->queue.empty() || in_->closed; });
    if (in_->queue.empty()) throw SessionAborted("channel closed");
    auto [deliver_at, bytes] = std::move(in_->queue.front());
    in_->queue.pop_front();
    lock.unlock();
    std::this_thread::sleep_until(deliver_at);
    return decode_frame(bytes);
  }

  void close() override {
    for (auto* pipe : {in_.get(), out_.get()}) {
      std::lock_guard lock(pipe->mu);
      pipe->closed = true;
      pipe->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
  std::chrono::microseconds delay_;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_loopback_pair(
    std::chrono::microseconds one_way_delay) {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<LoopbackChannel>(b_to_a, a_to_b, one_way_delay),
          std::make_unique<LoopbackChannel>(a_to_b, b_to_a, one_way_delay)};
}

// --- TCP -------------------------------------------------------------------

namespace {

class TcpChannel final : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpChannel() override { close(); }

  void send(const Frame& frame) override {
    const auto bytes = encode_frame(frame);
    std::lock_guard lock(send_mu_);
    std::size_t done = 0;
    while (done < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw SessionAborted("tcp send failed");
      done += static_cast<std::size_t>(n);
    }
  }

  Frame recv() override {
    std::vector<std::uint8_t> buf(4);
    read_exact(buf.data(), 4);
    std::uint32_t length = 0;
    for (int i = 0; i < 4; ++i) length = (length << 8) | buf[i];
    if (length == 0 || length > kMaxFrameLength) throw ProtocolError("bad frame length");
    buf.resize(4 + std::size_t{length});
    read_exact(buf.data() + 4, length);
    return decode_frame(buf);
  }

  void close() override {
    const int fd = fd_;
    if (fd >= 0) {
      fd_ = -1;
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
  }

 private:
  void read_exact(std::uint8_t* out, std::size_t n) {
    std::size_t done = 0;
    while (done < n) {
      const ssize_t r = ::recv(fd_, out + done, n - done, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) throw SessionAborted("tcp connection closed");
      done += static_cast<std::size_t>(r);
    }
  }

  int fd_;
  std::mutex send_mu_;
};

}  // namespace

TcpListener::TcpListener(std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 16) != 0) {
    ::close(fd_);
    throw std::runtime_error("bind/listen failed: " + std::string(std::strerror(errno)));
  }
  socklen_t len = sizeof(addr);
  getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> TcpListener::accept() {
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw SessionAborted("accept failed");
  return std::make_unique<TcpChannel>(fd);
}

std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr) {
    throw SessionAborted("cannot resolve " + host);
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd < 0 ? -1 : ::connect(fd, res->ai_addr, res->ai_addrlen);
  freeaddrinfo(res);
  if (rc != 0) {
    if (fd >= 0) ::close(fd);
    throw SessionAborted("cannot connect to " + host + ":" + std::to_string(port));
  }
  return std::make_unique<TcpChannel>(fd);
}

// --- Transcript ------------------------------------------------------------

void Transcript::record(Direction direction, const Frame& frame, std::uint32_t round, Phase phase) {
  entries_.push_back({direction, frame.kind, frame.payload.size() + kFrameHeaderBytes, round, phase});
  auto mix = [this](std::uint8_t b) {
    digest_ ^= b;
    digest_ *= 0x100000001b3ULL;
  };
  mix(static_cast<std::uint8_t>(direction));
  mix(static_cast<std::uint8_t>(frame.kind));
  mix(static_cast<std::uint8_t>(phase));
  for (int s = 0; s < 32; s += 8) mix(static_cast<std::uint8_t>(round >> s));
  for (std::uint8_t b : frame.payload) mix(b);
  if (keep_payloads_ && direction == Direction::kReceived) {
    received_.push_back(frame.payload);
    received_kinds_.push_back(frame.kind);
  }
}

std::uint32_t Transcript::online_rounds() const {
  std::set<std::uint32_t> rounds;
  for (const auto& e : entries_) {
    if (e.phase == Phase::kOnline && e.direction != Direction::kFromDealer) rounds.insert(e.round);
  }
  return static_cast<std::uint32_t>(rounds.size());
}

std::size_t Transcript::bytes(Phase phase) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.phase == phase) n += e.bytes;
  }
  return n;
}

std::size_t Transcript::bytes(Phase phase, Direction direction) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.phase == phase && e.direction == direction) n += e.bytes;
  }
  return n;
}

std::size_t Transcript::count(Phase phase, MsgKind kind) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.phase == phase && e.kind == kind) ++n;
  }
  return n;
}

// --- SessionChannel --------------------------------------------------------

void SessionChannel::set_phase(Phase phase) {
  if (phase != phase_) {
    phase_ = phase;
    round_ = 0;
  }
  if (phase == Phase::kOnline && !online_start_) online_start_ = std::chrono::steady_clock::now();
}

void SessionChannel::send(MsgKind kind, std::vector<std::uint8_t> payload) {
  Frame frame{kind, std::move(payload)};
  transcript_.record(Direction::kSent, frame, round_, phase_);
  channel_->send(frame);
}

std::vector<std::uint8_t> SessionChannel::recv(MsgKind expected) {
  Frame frame = channel_->recv();
  transcript_.record(Direction::kReceived, frame, round_, phase_);
  if (frame.kind != expected) {
    throw ProtocolError(std::string("expected ") + to_string(expected) + ", got " + to_string(frame.kind));
  }
  return std::move(frame.payload);
}

void SessionChannel::record_dealer(const std::vector<std::uint8_t>& payload) {
  // Dealer material is always provisioned ahead of the online phase.
  transcript_.record(Direction::kFromDealer, Frame{MsgKind::kSetupTriples, payload}, 0, Phase::kSetup);
}

// --- Byte helpers ----------------------------------------------------------

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v >> 8));
  u8(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) u8(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) u8(static_cast<std::uint8_t>(v >> s));
}

void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::uint8_t ByteReader::u8() { return bytes(1)[0]; }

std::uint16_t ByteReader::u16() {
  const auto b = bytes(2);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v = 0;
  for (std::uint8_t b : bytes(4)) v = (v << 8) | b;
  return v;
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v = 0;
  for (std::uint8_t b : bytes(8)) v = (v << 8) | b;
  return v;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  if (n > remaining()) throw ProtocolError("truncated payload");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  const auto b = bytes(n);
  return std::string(b.begin(), b.end());
}

void ByteReader::expect_end() const {
  if (remaining() != 0) throw ProtocolError("trailing bytes in payload");
}

}  // namespace prelude
