#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <string>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/transport.hpp"

namespace bnnswarm::protocol {

namespace {

// Fragment header: [u32 magic][u32 sender][u32 seq][u16 index][u16 count]
constexpr std::uint32_t kFragMagic = 0x464e4e42;  // "BNNF"
constexpr std::size_t kFragHeader = 16;
constexpr std::size_t kFragPayload = 60000;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::string errno_text() { return std::strerror(errno); }

}  // namespace

UdpTransport::UdpTransport(NodeId self, std::uint16_t bind_port, std::vector<UdpPeer> neighbors,
                           std::chrono::milliseconds timeout)
    : self_(self), neighbors_(std::move(neighbors)), timeout_(timeout) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw TransportError("socket(): " + errno_text());
  int buf = 8 << 20;
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof buf);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &buf, sizeof buf);
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout_.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout_.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(bind_port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const auto msg = errno_text();
    ::close(fd_);
    throw TransportError("bind to port " + std::to_string(bind_port) + ": " + msg);
  }
}

UdpTransport::~UdpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpTransport::send(const Message& msg) {
  const auto frame = encode_message(msg);
  const std::size_t count = std::max<std::size_t>(1, (frame.size() + kFragPayload - 1) / kFragPayload);
  if (count > 0xffff) throw TransportError("frame too large to fragment");
  const std::uint32_t seq = next_seq_++;
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::vector<std::uint8_t> dgram;
    le::put_u32(dgram, kFragMagic);
    le::put_u32(dgram, self_);
    le::put_u32(dgram, seq);
    put_u16(dgram, static_cast<std::uint16_t>(idx));
    put_u16(dgram, static_cast<std::uint16_t>(count));
    const std::size_t begin = idx * kFragPayload;
    const std::size_t end = std::min(frame.size(), begin + kFragPayload);
    dgram.insert(dgram.end(), frame.begin() + static_cast<std::ptrdiff_t>(begin),
                 frame.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& peer : neighbors_) {
      sockaddr_in to{};
      to.sin_family = AF_INET;
      to.sin_port = htons(peer.port);
      if (::inet_pton(AF_INET, peer.host.c_str(), &to.sin_addr) != 1)
        throw TransportError("bad peer address " + peer.host);
      if (::sendto(fd_, dgram.data(), dgram.size(), 0, reinterpret_cast<sockaddr*>(&to), sizeof to) < 0)
        throw TransportError("sendto " + peer.host + ":" + std::to_string(peer.port) + ": " + errno_text());
    }
  }
}

Message UdpTransport::receive() {
  std::vector<std::uint8_t> buf(kFragHeader + kFragPayload + 64);
  for (;;) {
    const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK)
        throw TransportError("node " + std::to_string(self_) + " timed out waiting for a datagram");
      throw TransportError("recv: " + errno_text());
    }
    const auto len = static_cast<std::size_t>(n);
    if (len < kFragHeader || le::get_u32(buf, 0) != kFragMagic) continue;  // not ours
    const NodeId sender = le::get_u32(buf, 4);
    const std::uint32_t seq = le::get_u32(buf, 8);
    const std::uint16_t idx = get_u16(buf.data() + 12);
    const std::uint16_t count = get_u16(buf.data() + 14);
    if (count == 0 || idx >= count) continue;

    auto& part = partial_[{sender, seq}];
    if (part.count == 0) {
      part.count = count;
      part.parts.resize(count);
    }
    if (part.count != count || !part.parts[idx].empty()) continue;
    part.parts[idx].assign(buf.begin() + kFragHeader, buf.begin() + static_cast<std::ptrdiff_t>(len));
    if (++part.received < part.count) continue;

    std::vector<std::uint8_t> frame;
    for (auto& p : part.parts) frame.insert(frame.end(), p.begin(), p.end());
    partial_.erase({sender, seq});
    return decode_message(frame);
  }
}

}  // namespace bnnswarm::protocol
