// SPDX-License-Identifier: Apache-2.0
//
// Classic 48-byte SNTP exchange. The client stamps its transmit time, the
// server echoes it into the originate field and adds its own receive and
// transmit timestamps. Round-trip delay is measured on the monotonic clock.

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "hbsca/timeauth.hpp"

namespace hbsca {

namespace {

// Seconds between the NTP era (1900) and the POSIX era (1970).
constexpr std::uint64_t kNtpEpochOffset = 2208988800ull;

std::uint64_t to_ntp64(std::uint64_t posix_ms) {
  const std::uint64_t sec = posix_ms / 1000 + kNtpEpochOffset;
  const std::uint64_t frac = ((posix_ms % 1000) << 32) / 1000;
  return sec << 32 | frac;
}

std::uint64_t from_ntp64(std::uint64_t ts) {
  const std::uint64_t sec = (ts >> 32) - kNtpEpochOffset;
  const std::uint64_t ms = ((ts & 0xffffffffull) * 1000) >> 32;
  return sec * 1000 + ms;
}

void put_ts(Bytes& out, std::size_t offset, std::uint64_t ntp64) {
  for (int i = 0; i < 8; ++i) {
    out[offset + i] = static_cast<std::uint8_t>(ntp64 >> (56 - 8 * i));
  }
}

std::uint64_t get_ts(BytesView in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v = v << 8 | in[offset + i];
  }
  return v;
}

}  // namespace

Bytes sntp_client_request(std::uint64_t transmit_posix_ms) {
  Bytes packet(kSntpPacketBytes, 0);
  packet[0] = 0x23;  // LI 0, VN 4, mode 3 (client)
  put_ts(packet, 40, to_ntp64(transmit_posix_ms));
  return packet;
}

Bytes sntp_server_reply(const SntpReply& reply) {
  Bytes packet(kSntpPacketBytes, 0);
  packet[0] = 0x24;  // LI 0, VN 4, mode 4 (server)
  packet[1] = reply.stratum;
  put_ts(packet, 24, to_ntp64(reply.originate_posix_ms));
  put_ts(packet, 32, to_ntp64(reply.receive_posix_ms));
  put_ts(packet, 40, to_ntp64(reply.transmit_posix_ms));
  return packet;
}

std::optional<SntpReply> sntp_parse_reply(BytesView packet,
                                          std::string* error) {
  auto fail = [&](const char* why) -> std::optional<SntpReply> {
    if (error) {
      *error = why;
    }
    return std::nullopt;
  };
  if (packet.size() < kSntpPacketBytes) {
    return fail("short packet");
  }
  const int version = (packet[0] >> 3) & 0x07;
  const int mode = packet[0] & 0x07;
  if (version < 3 || version > 4) {
    return fail("unsupported NTP version");
  }
  if (mode != 4) {
    return fail("not a server reply");
  }
  const std::uint64_t transmit = get_ts(packet, 40);
  if (transmit == 0) {
    return fail("empty transmit timestamp");
  }
  SntpReply reply;
  reply.stratum = packet[1];
  reply.originate_posix_ms = from_ntp64(get_ts(packet, 24));
  reply.receive_posix_ms = from_ntp64(get_ts(packet, 32));
  reply.transmit_posix_ms = from_ntp64(transmit);
  return reply;
}

UdpSntpClient::UdpSntpClient(std::string host, std::uint16_t port,
                             std::uint32_t timeout_ms)
    : host_(std::move(host)), port_(port), timeout_ms_(timeout_ms) {}

std::string UdpSntpClient::id() const {
  return host_ + ":" + std::to_string(port_);
}

NtpSample UdpSntpClient::query(ClockSource& clock) {
  NtpSample sample;
  sample.server = id();

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints,
                  &res) != 0 ||
      res == nullptr) {
    sample.error = "cannot resolve " + host_;
    return sample;
  }

  const int fd = ::socket(res->ai_family, SOCK_DGRAM, 0);
  if (fd < 0) {
    freeaddrinfo(res);
    sample.error = "cannot open UDP socket";
    return sample;
  }

  const std::uint64_t sent_mono = clock.monotonic_ms();
  const Bytes request = sntp_client_request(clock.wall_ms());
  const bool sent = ::sendto(fd, request.data(), request.size(), 0,
                             res->ai_addr, res->ai_addrlen) ==
                    static_cast<ssize_t>(request.size());
  freeaddrinfo(res);
  if (!sent) {
    ::close(fd);
    sample.error = "send failed";
    return sample;
  }

  pollfd pfd{fd, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, static_cast<int>(timeout_ms_));
  if (ready <= 0) {
    ::close(fd);
    sample.error = "timeout";
    return sample;
  }

  Bytes packet(kSntpPacketBytes);
  const ssize_t n = ::recv(fd, packet.data(), packet.size(), 0);
  ::close(fd);
  if (n < static_cast<ssize_t>(kSntpPacketBytes)) {
    sample.error = "short reply";
    return sample;
  }

  std::string err;
  const auto reply = sntp_parse_reply(packet, &err);
  if (!reply) {
    sample.error = err;
    return sample;
  }

  sample.round_trip_ms = clock.monotonic_ms() - sent_mono;
  sample.reported_ms = reply->transmit_posix_ms + sample.round_trip_ms / 2;
  return sample;
}

}  // namespace hbsca
