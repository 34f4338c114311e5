// SPDX-License-Identifier: Apache-2.0
//
// Deterministic single-process simulation: a virtual clock that separates
// true time from the (possibly manipulated) system clock, simulated NTP
// servers, and a restartable engine instance over real persisted files.
// Crash injection reopens the same files in a fresh instance; rollback
// restores an earlier copy of the key state file.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hbsca/engine.hpp"
#include "hbsca/timeauth.hpp"
#include "hbsca/verifier.hpp"

namespace hbsca {

class VirtualClock final : public ClockSource {
 public:
  VirtualClock() = default;
  explicit VirtualClock(std::uint64_t wall_start_ms)
      : true_ms_(wall_start_ms) {}

  std::uint64_t wall_ms() override {
    return static_cast<std::uint64_t>(
        static_cast<std::int64_t>(true_ms_) + manipulation_ms_);
  }
  std::uint64_t monotonic_ms() override { return monotonic_ms_; }

  std::uint64_t wall_s() { return wall_ms() / 1000; }
  std::uint64_t true_ms() const { return true_ms_; }

  /// Moves true time and the monotonic clock forward; the wall clock drifts
  /// additionally by the configured slew rate.
  void advance_ms(std::uint64_t ms);
  void jump_wall_s(std::int64_t delta_s);
  void set_wall_s(std::uint64_t t_s);
  void clear_manipulation() { manipulation_ms_ = 0; }
  void set_slew(double ms_per_s) { slew_ms_per_s_ = ms_per_s; }

 private:
  std::uint64_t true_ms_ = 0;
  std::uint64_t monotonic_ms_ = 0;
  std::int64_t manipulation_ms_ = 0;
  double slew_ms_per_s_ = 0.0;
  double slew_accum_ms_ = 0.0;
};

struct SimNtpServer {
  std::string id;
  std::uint64_t delay_ms = 10;
  std::int64_t fault_offset_ms = 0;
  bool silent = false;
};

struct SimConfig {
  std::uint32_t tree_height = 4;
  std::uint16_t validity_minutes = 240;
  std::uint16_t overlap_minutes = 2;
  Bytes keygen_entropy;  // 96 bytes; a fixed default keeps runs reproducible
  std::vector<std::uint64_t> server_delays_ms = {10, 20, 30};
  TimeConfig time{};
  std::uint32_t dummy_threshold = 10;
};

/// One CA device plus a responder peer, driven entirely by script steps.
class SimWorld {
 public:
  SimWorld(std::filesystem::path workdir, SimConfig config);

  void setup(std::uint64_t now_s);
  void advance_s(std::uint64_t seconds);
  void deliver_tick();
  void slew(double rate_ms_per_s, std::uint64_t duration_s);

  void crash_restart(std::uint64_t downtime_s);
  void stop_engine();
  void start_engine();
  bool engine_running() const;

  void snapshot_state(const std::string& name);
  void rollback_state(const std::string& name);

  void ntp_fault(std::size_t server, std::int64_t offset_s);
  void ntp_silent(std::size_t server);
  void ntp_clear(std::size_t server);
  /// true: servers report true time (independent infrastructure);
  /// false is the attacker-coherent mode where they follow the system clock.
  void ntp_follow_true(bool follow_true) { ntp_follow_true_ = follow_true; }

  void apply_admin(const AdminDecision& decision);
  void force_schedule_update(std::optional<std::uint16_t> validity_minutes);

  void set_auto_deliver(bool on) { auto_deliver_ = on; }
  void deliver_pending_schedules();

  void mark_leaf(const std::string& tag);
  VerifyResult verify_leaf_tagged(const std::string& tag);

  VirtualClock& clock() { return clock_; }
  const std::optional<TimeVerdict>& last_verdict() const { return verdict_; }
  const std::optional<RecoveryPlan>& last_plan() const { return plan_; }
  const std::vector<EngineEvent>& events() const;
  Phase phase() const;
  std::uint32_t remaining_signatures() const;
  /// (process lifetime, index) for every signature across restarts.
  const std::vector<std::pair<int, std::uint32_t>>& signed_indices() const {
    return signed_log_;
  }

  const std::filesystem::path& workdir() const { return workdir_; }
  const Bytes& ca_der() const { return ca_der_; }
  const std::vector<Bytes>& schedules() const { return schedule_files_; }

 private:
  TimeVerdict make_verdict();
  void register_schedule(Bytes encoded);
  void attach_store_observer();
  void persist_outcome(const TickOutcome& outcome);

  std::filesystem::path workdir_;
  SimConfig config_;
  VirtualClock clock_;
  std::vector<SimNtpServer> servers_;
  bool ntp_follow_true_ = true;

  std::unique_ptr<KeyStore> store_;
  std::unique_ptr<EventLog> log_;
  std::unique_ptr<Engine> engine_;
  int lifetime_ = 0;

  Bytes ca_der_;
  std::vector<Bytes> schedule_files_;
  std::size_t delivered_schedules_ = 0;
  bool auto_deliver_ = true;
  std::optional<TrustStore> responder_;

  std::optional<TimeVerdict> verdict_;
  std::optional<RecoveryPlan> plan_;
  std::map<std::string, Bytes> tagged_leaves_;
  Bytes last_leaf_der_;
  std::map<std::string, Bytes> state_snapshots_;
  std::vector<std::pair<int, std::uint32_t>> signed_log_;
};

}  // namespace hbsca
