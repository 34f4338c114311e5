// SPDX-License-Identifier: Apache-2.0
//
// Trusted-time acquisition: a pluggable clock pair (wall + monotonic), SNTP
// sampling, three-server majority consensus, and the relative-timer versus
// absolute-timestamp cross-check performed before every issuance.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hbsca/bytes.hpp"

namespace hbsca {

struct ClockSource {
  virtual ~ClockSource() = default;
  virtual std::uint64_t wall_ms() = 0;       // POSIX milliseconds
  virtual std::uint64_t monotonic_ms() = 0;  // never decreases in-process
};

class SystemClock final : public ClockSource {
 public:
  std::uint64_t wall_ms() override;
  std::uint64_t monotonic_ms() override;
};

struct TimeConfig {
  std::uint32_t agreement_window_ms = 1000;
  std::uint32_t minor_adjust_ms = 5000;
  std::uint32_t skew_tolerance_ms = 60000;
  std::uint32_t query_timeout_ms = 2000;
  std::size_t server_count = 3;
};

struct NtpSample {
  std::string server;
  std::uint64_t reported_ms = 0;     // server time adjusted by half the RTT
  std::uint64_t round_trip_ms = 0;
  std::optional<std::string> error;  // timeout, malformed packet, ...
};

enum class TimeStatus { trusted, adjusted, no_consensus, unavailable };
std::string_view to_string(TimeStatus status);

struct TimeVerdict {
  TimeStatus status = TimeStatus::unavailable;
  std::uint64_t consensus_ms = 0;
  std::int64_t applied_offset_ms = 0;  // consensus - local
  std::optional<std::string> alert;
};

/// Majority vote over exactly cfg.server_count samples. Two samples agree
/// when their reported times differ by at most the agreement window; the
/// consensus value comes from the agreeing sample with the smallest delay.
TimeVerdict consensus(std::span<const NtpSample> samples,
                      std::uint64_t local_ms, const TimeConfig& cfg = {});

struct CrossCheckResult {
  bool ok = false;
  std::string anomaly;  // which check failed and by how much
};

/// Compares the elapsed relative timer against its expected interval and the
/// wall clock against the precomputed next-issuance timestamp.
CrossCheckResult cross_check(std::uint64_t relative_elapsed_ms,
                             std::uint64_t expected_interval_ms,
                             std::uint64_t absolute_now_ms,
                             std::uint64_t expected_absolute_ms,
                             std::uint64_t skew_tolerance_ms = 60000);

/// One time source (real or simulated) queried per consensus round.
struct TimeSource {
  virtual ~TimeSource() = default;
  virtual NtpSample query(ClockSource& clock) = 0;
  virtual std::string id() const = 0;
};

std::vector<NtpSample> query_all(
    std::span<const std::unique_ptr<TimeSource>> sources, ClockSource& clock);

// --- SNTP wire format (48-byte packets, version 4 semantics) ---

inline constexpr std::size_t kSntpPacketBytes = 48;

Bytes sntp_client_request(std::uint64_t transmit_posix_ms);

struct SntpReply {
  std::uint64_t originate_posix_ms = 0;  // echo of the client transmit time
  std::uint64_t receive_posix_ms = 0;
  std::uint64_t transmit_posix_ms = 0;
  std::uint8_t stratum = 1;
};

Bytes sntp_server_reply(const SntpReply& reply);
std::optional<SntpReply> sntp_parse_reply(BytesView packet,
                                          std::string* error = nullptr);

/// Plain SNTP over UDP. Deployments that need authenticated time plug an
/// authenticated TimeSource in instead; the consensus layer is agnostic.
class UdpSntpClient final : public TimeSource {
 public:
  UdpSntpClient(std::string host, std::uint16_t port,
                std::uint32_t timeout_ms = 2000);
  NtpSample query(ClockSource& clock) override;
  std::string id() const override;

 private:
  std::string host_;
  std::uint16_t port_;
  std::uint32_t timeout_ms_;
};

}  // namespace hbsca
