// SPDX-License-Identifier: Apache-2.0

#include "hbsca/timeauth.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <sstream>

#include "hbsca/errors.hpp"

namespace hbsca {

std::uint64_t SystemClock::wall_ms() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
}

std::uint64_t SystemClock::monotonic_ms() {
  static const auto start = std::chrono::steady_clock::now();
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start)
          .count());
}

std::string_view to_string(TimeStatus status) {
  switch (status) {
    case TimeStatus::trusted: return "trusted";
    case TimeStatus::adjusted: return "adjusted";
    case TimeStatus::no_consensus: return "no-consensus";
    case TimeStatus::unavailable: return "unavailable";
  }
  return "?";
}

TimeVerdict consensus(std::span<const NtpSample> samples,
                      std::uint64_t local_ms, const TimeConfig& cfg) {
  if (samples.size() != cfg.server_count) {
    throw ParamError("consensus expects exactly " +
                     std::to_string(cfg.server_count) + " samples");
  }

  std::vector<const NtpSample*> valid;
  for (const auto& s : samples) {
    if (!s.error) {
      valid.push_back(&s);
    }
  }

  TimeVerdict verdict;
  if (valid.empty()) {
    verdict.status = TimeStatus::unavailable;
    verdict.alert = "all time sources failed";
    return verdict;
  }

  // Majority of the configured servers, not just of the reachable ones.
  const std::size_t majority = cfg.server_count / 2 + 1;

  auto agrees = [&](const NtpSample* a, const NtpSample* b) {
    const std::uint64_t d = a->reported_ms > b->reported_ms
                                ? a->reported_ms - b->reported_ms
                                : b->reported_ms - a->reported_ms;
    return d <= cfg.agreement_window_ms;
  };

  // Pick the sample whose agreement cluster is largest; ties resolve toward
  // the smallest (delay, server) pair so the result is order independent.
  const NtpSample* chosen = nullptr;
  std::size_t chosen_cluster = 0;
  for (const NtpSample* candidate : valid) {
    std::size_t cluster = 0;
    const NtpSample* best = nullptr;
    for (const NtpSample* other : valid) {
      if (agrees(candidate, other)) {
        ++cluster;
        if (!best || other->round_trip_ms < best->round_trip_ms ||
            (other->round_trip_ms == best->round_trip_ms &&
             other->server < best->server)) {
          best = other;
        }
      }
    }
    if (cluster > chosen_cluster ||
        (cluster == chosen_cluster && chosen &&
         (best->round_trip_ms < chosen->round_trip_ms ||
          (best->round_trip_ms == chosen->round_trip_ms &&
           best->server < chosen->server)))) {
      chosen_cluster = cluster;
      chosen = best;
    }
  }

  if (chosen_cluster < majority) {
    verdict.status = TimeStatus::no_consensus;
    std::ostringstream msg;
    msg << "no majority among time sources:";
    for (const NtpSample* s : valid) {
      msg << ' ' << s->server << '='
          << static_cast<std::int64_t>(s->reported_ms) -
                 static_cast<std::int64_t>(local_ms)
          << "ms";
    }
    verdict.alert = msg.str();
    return verdict;
  }

  verdict.consensus_ms = chosen->reported_ms;
  verdict.applied_offset_ms = static_cast<std::int64_t>(chosen->reported_ms) -
                              static_cast<std::int64_t>(local_ms);
  if (std::llabs(verdict.applied_offset_ms) <= cfg.minor_adjust_ms) {
    verdict.status = TimeStatus::trusted;
  } else {
    verdict.status = TimeStatus::adjusted;
    std::ostringstream msg;
    msg << "consensus time differs from system clock by "
        << verdict.applied_offset_ms << " ms";
    verdict.alert = msg.str();
  }
  return verdict;
}

CrossCheckResult cross_check(std::uint64_t relative_elapsed_ms,
                             std::uint64_t expected_interval_ms,
                             std::uint64_t absolute_now_ms,
                             std::uint64_t expected_absolute_ms,
                             std::uint64_t skew_tolerance_ms) {
  CrossCheckResult result;
  std::ostringstream anomaly;

  const std::int64_t rel_delta =
      static_cast<std::int64_t>(relative_elapsed_ms) -
      static_cast<std::int64_t>(expected_interval_ms);
  const std::int64_t abs_delta =
      static_cast<std::int64_t>(absolute_now_ms) -
      static_cast<std::int64_t>(expected_absolute_ms);

  bool ok = true;
  if (std::llabs(abs_delta) > static_cast<std::int64_t>(skew_tolerance_ms)) {
    ok = false;
    anomaly << "absolute " << (abs_delta > 0 ? "ahead " : "behind ")
            << std::llabs(abs_delta) / 1000 << " s";
  }
  if (std::llabs(rel_delta) > static_cast<std::int64_t>(skew_tolerance_ms)) {
    if (!ok) {
      anomaly << "; ";
    }
    ok = false;
    anomaly << "relative timer off by " << rel_delta << " ms";
  }
  result.ok = ok;
  result.anomaly = anomaly.str();
  return result;
}

std::vector<NtpSample> query_all(
    std::span<const std::unique_ptr<TimeSource>> sources, ClockSource& clock) {
  std::vector<NtpSample> samples;
  samples.reserve(sources.size());
  for (const auto& src : sources) {
    samples.push_back(src->query(clock));
  }
  return samples;
}

}  // namespace hbsca
