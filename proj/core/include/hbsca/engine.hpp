// SPDX-License-Identifier: Apache-2.0
//
// The CA state machine. Setup consumes indices 0 (self-signed CA
// certificate), 1 (initial schedule) and 2 (first leaf); from then on every
// tick either issues the next leaf in its scheduled slot or halts with an
// alert for the administrator. Nothing is ever signed while the time source,
// the relative timer, the schedule and the key state disagree.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hbsca/bytes.hpp"
#include "hbsca/certkit.hpp"
#include "hbsca/eventlog.hpp"
#include "hbsca/keystore.hpp"
#include "hbsca/schedule.hpp"
#include "hbsca/timeauth.hpp"

namespace hbsca {

enum class Phase { running, halted_awaiting_admin, exhausted };
std::string_view to_string(Phase phase);

struct EngineConfig {
  std::uint16_t validity_minutes = 240;
  IssuancePolicy policy{};
  std::uint32_t dummy_threshold = 10;  // larger gaps get a schedule update
  TimeConfig time{};
  LeafProfile profile{};
  std::uint64_t ca_lifetime_seconds = std::uint64_t{30} * 365 * 24 * 3600;
  /// The toy tree height (h = 4) is for simulator runs only; production
  /// heights are 10, 16 and 20.
  bool allow_test_params = false;
  const ClassicalSuite* suite = &ecdsa_p256_sha256();
};

struct LastIssued {
  std::uint32_t index = 0;
  std::uint64_t not_before = 0;
  std::uint64_t not_after = 0;
};

struct RecoveryPlan {
  enum class Action { resume, dummy_sign, schedule_update, halt, exhausted };
  Action action = Action::halt;
  std::uint32_t dummy_count = 0;  // for dummy_sign: 1..dummy_threshold
  std::string rationale;
};
std::string_view to_string(RecoveryPlan::Action action);

struct AdminDecision {
  enum class Kind { accept_time, correct_time, execute_plan };
  Kind kind = Kind::execute_plan;
  std::uint64_t time = 0;  // POSIX seconds, for the *_time kinds
};

struct SetupArtifacts {
  Bytes ca_der;
  Schedule schedule;
  Bytes leaf_der;
  ClassicalKeyPair leaf_keys;
};

struct TickOutcome {
  enum class Action { none, issued, halted };
  Action action = Action::none;
  std::optional<std::uint32_t> index;
  Bytes leaf_der;               // set when action == issued
  ClassicalKeyPair leaf_keys;   // fresh suite keypair for the new leaf
  std::string anomaly;          // set when action == halted
};

class Engine {
 public:
  Engine(KeyStore& store, EventLog& log, EngineConfig config);

  /// One-time initialization on a fresh store. Refused once any index is
  /// consumed.
  SetupArtifacts setup(std::uint64_t now, std::uint64_t monotonic_ms = 0);

  /// Restart path: adopt the persisted artifacts and replay the event log.
  /// A halt in the log stays sticky until an admin clears it.
  void adopt(Schedule newest_schedule, Bytes ca_der);

  /// Post-boot consistency check (the relative timer is lost on reboot).
  /// Emits halted + admin_alert events when the states disagree.
  struct StartOutcome {
    bool ok = false;
    std::string anomaly;
  };
  StartOutcome start(std::uint64_t now, std::uint64_t monotonic_ms,
                     const TimeVerdict& verdict);

  TickOutcome tick(std::uint64_t now, std::uint64_t monotonic_ms,
                   const TimeVerdict& verdict);

  /// Computes the catch-up action for an admin-confirmed time. Pure.
  RecoveryPlan plan_recovery(std::uint64_t trusted_now) const;

  struct AdminOutcome {
    Phase phase = Phase::halted_awaiting_admin;
    RecoveryPlan plan;
    Bytes new_schedule;  // set when the plan updated the schedule
  };
  AdminOutcome apply_admin(const AdminDecision& decision, std::uint64_t now,
                           std::uint64_t monotonic_ms);

  /// Re-anchors the schedule at the given trusted time on explicit admin
  /// request, outside of plan execution (e.g. to change the validity time).
  Schedule force_schedule_update(std::uint64_t trusted_now,
                                 std::uint16_t new_validity_minutes,
                                 std::uint64_t monotonic_ms);

  Phase phase() const { return phase_; }
  const Schedule& schedule() const;
  const Bytes& ca_der() const { return ca_der_; }
  std::optional<LastIssued> last_issued() const { return last_issued_; }
  const EngineConfig& config() const { return config_; }

  /// Monotonic instant of the next issuance wakeup, when armed.
  std::optional<std::uint64_t> next_wakeup_monotonic_ms() const;
  /// Wall-clock issue instant of the next due index (slot start minus the
  /// overlap lead).
  std::optional<std::uint64_t> next_issue_instant() const;

 private:
  struct RelativeTimer {
    std::uint64_t armed_monotonic_ms = 0;
    std::uint64_t interval_ms = 0;
    std::uint64_t expected_absolute_ms = 0;
  };

  void emit(EventKind kind, std::uint64_t at,
            std::map<std::string, std::string> detail);
  void halt(std::uint64_t now, const std::string& anomaly);
  void arm_timer(std::uint64_t now, std::uint64_t monotonic_ms);
  std::uint64_t issue_instant(std::uint32_t index) const;
  std::uint32_t next_due() const;
  TickOutcome issue(std::uint32_t index, std::uint64_t now,
                    std::uint64_t monotonic_ms);
  bool execute_plan(const RecoveryPlan& plan, std::uint64_t now,
                    std::uint64_t monotonic_ms, AdminOutcome& outcome);

  KeyStore& store_;
  EventLog& log_;
  EngineConfig config_;
  Phase phase_ = Phase::running;
  std::optional<Schedule> schedule_;
  Bytes ca_der_;
  std::optional<LastIssued> last_issued_;
  std::optional<RelativeTimer> timer_;
  std::optional<std::uint64_t> trusted_now_;  // latest admin-confirmed time
};

}  // namespace hbsca
