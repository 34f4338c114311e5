// SPDX-License-Identifier: Apache-2.0

#include "hbsca/engine.hpp"

#include <sstream>

#include "hbsca/errors.hpp"

namespace hbsca {

namespace {

std::uint64_t detail_u64(const std::map<std::string, std::string>& detail,
                         const std::string& key) {
  const auto it = detail.find(key);
  if (it == detail.end()) {
    throw FormatError("event record is missing field " + key);
  }
  return std::stoull(it->second);
}

Bytes dummy_message(std::uint32_t index) {
  Bytes msg = to_bytes("DUMMY");
  put_u32(msg, index);
  return msg;
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::running: return "running";
    case Phase::halted_awaiting_admin: return "halted_awaiting_admin";
    case Phase::exhausted: return "exhausted";
  }
  return "?";
}

std::string_view to_string(RecoveryPlan::Action action) {
  switch (action) {
    case RecoveryPlan::Action::resume: return "resume";
    case RecoveryPlan::Action::dummy_sign: return "dummy_sign";
    case RecoveryPlan::Action::schedule_update: return "schedule_update";
    case RecoveryPlan::Action::halt: return "halt";
    case RecoveryPlan::Action::exhausted: return "exhausted";
  }
  return "?";
}

Engine::Engine(KeyStore& store, EventLog& log, EngineConfig config)
    : store_(store), log_(log), config_(std::move(config)) {
  if (!config_.allow_test_params && store_.params().tree_height < 10) {
    throw ParamError(
        "toy tree heights are for simulation only; the CA requires h >= 10");
  }
}

const Schedule& Engine::schedule() const {
  if (!schedule_) {
    throw StateError("engine has no schedule; run setup or adopt one");
  }
  return *schedule_;
}

void Engine::emit(EventKind kind, std::uint64_t at,
                  std::map<std::string, std::string> detail) {
  log_.append(EngineEvent{kind, at, std::move(detail)});
}

void Engine::halt(std::uint64_t now, const std::string& anomaly) {
  phase_ = Phase::halted_awaiting_admin;
  timer_.reset();
  emit(EventKind::halted, now, {{"anomaly", anomaly}});
  emit(EventKind::admin_alert, now, {{"anomaly", anomaly}});
}

std::uint64_t Engine::issue_instant(std::uint32_t index) const {
  const std::uint64_t slot =
      issue_time_for_index(schedule(), config_.policy, index);
  const std::uint64_t lead =
      std::uint64_t{config_.policy.overlap_minutes} * 60;
  return slot > lead ? slot - lead : 0;
}

std::uint32_t Engine::next_due() const { return store_.next_index(); }

void Engine::arm_timer(std::uint64_t now, std::uint64_t monotonic_ms) {
  timer_.reset();
  const std::uint32_t due = next_due();
  if (due >= schedule().max_index) {
    return;  // nothing left to schedule
  }
  const std::uint64_t instant = issue_instant(due);
  RelativeTimer t;
  t.armed_monotonic_ms = monotonic_ms;
  t.interval_ms = instant > now ? (instant - now) * 1000 : 0;
  t.expected_absolute_ms = instant * 1000;
  timer_ = t;
}

std::optional<std::uint64_t> Engine::next_wakeup_monotonic_ms() const {
  if (phase_ != Phase::running || !timer_) {
    return std::nullopt;
  }
  return timer_->armed_monotonic_ms + timer_->interval_ms;
}

std::optional<std::uint64_t> Engine::next_issue_instant() const {
  if (phase_ != Phase::running || !schedule_ ||
      next_due() >= schedule_->max_index) {
    return std::nullopt;
  }
  return issue_instant(next_due());
}

SetupArtifacts Engine::setup(std::uint64_t now, std::uint64_t monotonic_ms) {
  if (store_.next_index() != 0) {
    throw StateError("key store is not fresh; setup already consumed indices");
  }
  if (!log_.events().empty()) {
    throw StateError("event log is not empty; refusing a second setup");
  }

  SetupArtifacts artifacts;

  // Index 0 signs the CA itself.
  Certificate ca = make_ca_template(store_.public_key(), config_.profile.issuer_cn,
                                    config_.profile.san_dns, now,
                                    config_.ca_lifetime_seconds);
  const std::uint32_t ca_index = store_.reserve_index();
  ca.xmss_signature =
      store_.sign_with_reserved(ca_index, encode_tbs(ca)).encode();
  ca_der_ = encode_cert(ca);
  artifacts.ca_der = ca_der_;

  // Index 1 signs the schedule; leaf slots start at index 2.
  schedule_ =
      make_schedule(store_, now, config_.validity_minutes, config_.policy);
  artifacts.schedule = *schedule_;

  emit(EventKind::setup_complete, now,
       {{"ca_index", std::to_string(ca_index)},
        {"schedule_index", std::to_string(schedule_->signing_index())},
        {"start_index", std::to_string(schedule_->start_index)},
        {"validity_minutes", std::to_string(schedule_->validity_minutes)}});

  // Index 2 signs the first leaf certificate.
  TickOutcome first = issue(store_.next_index(), now, monotonic_ms);
  if (first.action != TickOutcome::Action::issued) {
    throw StateError("setup failed to issue the first leaf: " +
                     first.anomaly);
  }
  artifacts.leaf_der = std::move(first.leaf_der);
  artifacts.leaf_keys = std::move(first.leaf_keys);
  phase_ = Phase::running;
  return artifacts;
}

void Engine::adopt(Schedule newest_schedule, Bytes ca_der) {
  schedule_ = std::move(newest_schedule);
  ca_der_ = std::move(ca_der);
  phase_ = Phase::running;
  last_issued_.reset();
  timer_.reset();

  bool saw_setup = false;
  for (const EngineEvent& e : log_.events()) {
    switch (e.kind) {
      case EventKind::setup_complete:
        saw_setup = true;
        break;
      case EventKind::issued:
        last_issued_ = LastIssued{
            static_cast<std::uint32_t>(detail_u64(e.detail, "index")),
            detail_u64(e.detail, "not_before"),
            detail_u64(e.detail, "not_after")};
        break;
      case EventKind::halted:
        phase_ = Phase::halted_awaiting_admin;
        break;
      case EventKind::resumed:
        phase_ = Phase::running;
        break;
      case EventKind::exhausted:
        phase_ = Phase::exhausted;
        break;
      case EventKind::admin_alert:
      case EventKind::dummy_signed:
      case EventKind::schedule_updated:
        break;
    }
  }
  if (!saw_setup) {
    throw StateError("event log has no setup record; nothing to adopt");
  }
}

Engine::StartOutcome Engine::start(std::uint64_t now,
                                   std::uint64_t monotonic_ms,
                                   const TimeVerdict& verdict) {
  if (phase_ == Phase::halted_awaiting_admin) {
    // Sticky: a reboot must not clear an unresolved anomaly.
    emit(EventKind::admin_alert, now,
         {{"anomaly", "halted before restart; awaiting administrator"}});
    return {false, "halted before restart"};
  }
  if (phase_ == Phase::exhausted) {
    return {false, "key exhausted"};
  }
  if (!last_issued_) {
    throw StateError("start requires a completed setup");
  }

  if (verdict.status != TimeStatus::trusted) {
    std::string anomaly = "time source not trusted after restart (" +
                          std::string(to_string(verdict.status)) + ")";
    if (verdict.alert) {
      anomaly += ": " + *verdict.alert;
    }
    halt(now, anomaly);
    return {false, anomaly};
  }

  const std::uint32_t last = last_issued_->index;
  const std::uint32_t next = store_.next_index();

  if (next <= last) {
    std::ostringstream msg;
    msg << "key state rollback detected: next index " << next
        << " does not follow last issued certificate " << last;
    halt(now, msg.str());
    return {false, msg.str()};
  }
  if (next > last + 2) {
    std::ostringstream msg;
    msg << "key state skipped ahead: next index " << next
        << " but last issued certificate is " << last;
    halt(now, msg.str());
    return {false, msg.str()};
  }

  const auto exp = index_for_time(schedule(), config_.policy, now);
  if (!exp) {
    const std::string msg =
        now < schedule().creation_date
            ? "system time precedes the schedule after restart"
            : "system time is past the end of the schedule";
    halt(now, msg);
    return {false, msg};
  }
  if (*exp > last + 1) {
    std::ostringstream msg;
    msg << "downtime detected: index " << next << " is " << (*exp - next)
        << " slots behind the schedule (current slot index " << *exp << ")";
    halt(now, msg.str());
    return {false, msg.str()};
  }
  if (last > *exp + 1) {
    std::ostringstream msg;
    msg << "index ahead of the schedule: last issued " << last
        << " but the current slot index is " << *exp;
    halt(now, msg.str());
    return {false, msg.str()};
  }

  arm_timer(now, monotonic_ms);
  return {true, ""};
}

TickOutcome Engine::tick(std::uint64_t now, std::uint64_t monotonic_ms,
                         const TimeVerdict& verdict) {
  TickOutcome out;
  if (phase_ != Phase::running) {
    return out;
  }
  const Schedule& sched = schedule();
  const std::uint32_t due = next_due();
  const std::uint32_t last = last_issued_ ? last_issued_->index : 0;
  const auto exp = index_for_time(sched, config_.policy, now);

  // Index/schedule relation, included in every anomaly report.
  std::string relation;
  if (exp && *exp > due) {
    std::ostringstream r;
    r << "index " << due << " is " << (*exp - due)
      << " slots behind the schedule (current slot index " << *exp << ")";
    relation = r.str();
  } else if (exp && last > *exp + 1) {
    std::ostringstream r;
    r << "index " << last << " is ahead of the schedule (current slot index "
      << *exp << ")";
    relation = r.str();
  }
  auto with_relation = [&](std::string anomaly) {
    if (!relation.empty()) {
      anomaly += "; " + relation;
    }
    return anomaly;
  };

  if (verdict.status != TimeStatus::trusted) {
    std::string anomaly =
        "time source not trusted (" + std::string(to_string(verdict.status)) +
        ")";
    if (verdict.alert) {
      anomaly += ": " + *verdict.alert;
    }
    out.action = TickOutcome::Action::halted;
    out.anomaly = with_relation(std::move(anomaly));
    halt(now, out.anomaly);
    return out;
  }

  // Relative timer versus absolute clock, once the timer has fired.
  if (timer_ && monotonic_ms - timer_->armed_monotonic_ms >=
                    timer_->interval_ms) {
    const auto check = cross_check(
        monotonic_ms - timer_->armed_monotonic_ms, timer_->interval_ms,
        now * 1000, timer_->expected_absolute_ms,
        config_.time.skew_tolerance_ms);
    if (!check.ok) {
      out.action = TickOutcome::Action::halted;
      out.anomaly = with_relation("timer cross-check failed: " + check.anomaly);
      halt(now, out.anomaly);
      return out;
    }
  }

  if (last_issued_ && store_.next_index() <= last_issued_->index) {
    out.action = TickOutcome::Action::halted;
    out.anomaly = "key state rollback detected: next index " +
                  std::to_string(store_.next_index()) +
                  " does not follow last issued certificate " +
                  std::to_string(last_issued_->index);
    halt(now, out.anomaly);
    return out;
  }

  if (!exp) {
    if (due >= sched.max_index) {
      emit(EventKind::exhausted, now,
           {{"next_index", std::to_string(due)},
            {"max_index", std::to_string(sched.max_index)}});
      phase_ = Phase::exhausted;
      out.action = TickOutcome::Action::halted;
      out.anomaly = "schedule exhausted";
      return out;
    }
    out.action = TickOutcome::Action::halted;
    out.anomaly = now < sched.creation_date
                      ? "system time precedes the schedule"
                      : "system time is past the end of the schedule";
    halt(now, out.anomaly);
    return out;
  }

  if (*exp > due || last > *exp + 1) {
    out.action = TickOutcome::Action::halted;
    out.anomaly = with_relation("schedule/index mismatch");
    halt(now, out.anomaly);
    return out;
  }

  if (due >= sched.max_index) {
    emit(EventKind::exhausted, now,
         {{"next_index", std::to_string(due)},
          {"max_index", std::to_string(sched.max_index)}});
    phase_ = Phase::exhausted;
    out.action = TickOutcome::Action::halted;
    out.anomaly = "schedule exhausted";
    return out;
  }

  if (due <= *exp + 1 && now >= issue_instant(due)) {
    return issue(due, now, monotonic_ms);
  }
  return out;  // nothing due yet
}

TickOutcome Engine::issue(std::uint32_t index, std::uint64_t now,
                          std::uint64_t monotonic_ms) {
  TickOutcome out;
  ClassicalKeyPair keys = config_.suite->keygen();

  const std::uint32_t reserved = store_.reserve_index();
  if (reserved != index) {
    // The reservation is wasted by design; nothing was signed with it.
    out.action = TickOutcome::Action::halted;
    out.anomaly = "keystore reserved index " + std::to_string(reserved) +
                  " but the schedule expects " + std::to_string(index);
    halt(now, out.anomaly);
    return out;
  }

  auto result = issue_leaf(store_, schedule(), config_.policy, index,
                           keys.public_key, now, config_.profile);
  if (std::holds_alternative<IndexMismatch>(result)) {
    out.action = TickOutcome::Action::halted;
    out.anomaly = std::get<IndexMismatch>(result).detail;
    halt(now, out.anomaly);
    return out;
  }

  const Certificate& cert = std::get<Certificate>(result);
  last_issued_ =
      LastIssued{index, cert.not_before, cert.not_after};
  emit(EventKind::issued, now,
       {{"index", std::to_string(index)},
        {"not_before", std::to_string(cert.not_before)},
        {"not_after", std::to_string(cert.not_after)}});
  arm_timer(now, monotonic_ms);

  out.action = TickOutcome::Action::issued;
  out.index = index;
  out.leaf_der = encode_cert(cert);
  out.leaf_keys = std::move(keys);
  // The previous leaf's classical secret is the caller's to destroy; the
  // engine hands out only the fresh pair.
  return out;
}

RecoveryPlan Engine::plan_recovery(std::uint64_t trusted_now) const {
  RecoveryPlan plan;
  const Schedule& sched = schedule();
  const std::uint32_t actual = store_.next_index();
  const std::uint32_t last = last_issued_ ? last_issued_->index : 0;

  if (store_.remaining_signatures() == 0 || actual >= sched.max_index) {
    plan.action = RecoveryPlan::Action::exhausted;
    plan.rationale = "no usable indices remain";
    return plan;
  }
  if (last_issued_ && actual <= last) {
    plan.action = RecoveryPlan::Action::halt;
    plan.rationale =
        "key state rollback: restore the latest state file before resuming";
    return plan;
  }

  const auto exp = index_for_time(sched, config_.policy, trusted_now);
  if (!exp) {
    plan.action = RecoveryPlan::Action::halt;
    plan.rationale =
        trusted_now < sched.creation_date
            ? "trusted time precedes the schedule; update the schedule "
              "manually"
            : "trusted time is past the end of the schedule";
    return plan;
  }

  if (actual >= *exp && actual <= *exp + 2) {
    plan.action = RecoveryPlan::Action::resume;
    plan.rationale = actual == *exp + 2
                         ? "a crash wasted one index; its slot is skipped"
                         : "index and schedule agree";
    return plan;
  }
  if (actual < *exp) {
    const std::uint32_t gap = *exp - actual;
    if (gap <= config_.dummy_threshold) {
      plan.action = RecoveryPlan::Action::dummy_sign;
      plan.dummy_count = gap;
      plan.rationale = "index lags the schedule by " + std::to_string(gap) +
                       " slots; dummy signatures catch up";
    } else {
      plan.action = RecoveryPlan::Action::schedule_update;
      plan.rationale = "gap of " + std::to_string(gap) +
                       " slots exceeds the dummy threshold of " +
                       std::to_string(config_.dummy_threshold) +
                       "; a schedule update wastes only one signature";
    }
    return plan;
  }

  plan.action = RecoveryPlan::Action::schedule_update;
  plan.rationale =
      "index ran ahead of the schedule; prematurely generated certificates "
      "may exist and must be invalidated by a schedule update";
  return plan;
}

bool Engine::execute_plan(const RecoveryPlan& plan, std::uint64_t now,
                          std::uint64_t monotonic_ms, AdminOutcome& outcome) {
  switch (plan.action) {
    case RecoveryPlan::Action::resume:
      phase_ = Phase::running;
      emit(EventKind::resumed, now,
           {{"plan", std::string(to_string(plan.action))},
            {"next_index", std::to_string(store_.next_index())}});
      arm_timer(now, monotonic_ms);
      return true;

    case RecoveryPlan::Action::dummy_sign: {
      for (std::uint32_t i = 0; i < plan.dummy_count; ++i) {
        const std::uint32_t index = store_.reserve_index();
        store_.sign_with_reserved(index, dummy_message(index));
        emit(EventKind::dummy_signed, now,
             {{"index", std::to_string(index)}});
      }
      phase_ = Phase::running;
      emit(EventKind::resumed, now,
           {{"plan", std::string(to_string(plan.action))},
            {"dummy_count", std::to_string(plan.dummy_count)},
            {"next_index", std::to_string(store_.next_index())}});
      arm_timer(now, monotonic_ms);
      return true;
    }

    case RecoveryPlan::Action::schedule_update: {
      const Schedule next = update_schedule(
          store_, schedule(), now, schedule().validity_minutes,
          config_.policy);
      schedule_ = next;
      emit(EventKind::schedule_updated, now,
           {{"creation_date", std::to_string(next.creation_date)},
            {"start_index", std::to_string(next.start_index)},
            {"signing_index", std::to_string(next.signing_index())},
            {"validity_minutes", std::to_string(next.validity_minutes)}});
      outcome.new_schedule = next.encode();
      phase_ = Phase::running;
      emit(EventKind::resumed, now,
           {{"plan", std::string(to_string(plan.action))},
            {"next_index", std::to_string(store_.next_index())}});
      arm_timer(now, monotonic_ms);
      return true;
    }

    case RecoveryPlan::Action::halt:
      emit(EventKind::admin_alert, now,
           {{"anomaly", "decision does not resolve the anomaly: " +
                            plan.rationale}});
      return false;

    case RecoveryPlan::Action::exhausted:
      phase_ = Phase::exhausted;
      emit(EventKind::exhausted, now,
           {{"next_index", std::to_string(store_.next_index())}});
      return false;
  }
  return false;
}

Engine::AdminOutcome Engine::apply_admin(const AdminDecision& decision,
                                         std::uint64_t now,
                                         std::uint64_t monotonic_ms) {
  if (phase_ == Phase::running) {
    throw StateError("no pending anomaly; admin decisions apply when halted");
  }
  AdminOutcome outcome;
  if (phase_ == Phase::exhausted) {
    outcome.phase = phase_;
    outcome.plan.action = RecoveryPlan::Action::exhausted;
    outcome.plan.rationale = "key exhausted";
    emit(EventKind::exhausted, now,
         {{"next_index", std::to_string(store_.next_index())}});
    return outcome;
  }

  const char* kind_name = decision.kind == AdminDecision::Kind::accept_time
                              ? "accept_time"
                              : decision.kind == AdminDecision::Kind::correct_time
                                    ? "correct_time"
                                    : "execute_plan";
  if (decision.kind != AdminDecision::Kind::execute_plan) {
    trusted_now_ = decision.time;
  }
  if (!trusted_now_) {
    emit(EventKind::admin_alert, now,
         {{"anomaly", "execute_plan without a confirmed trusted time"}});
    outcome.phase = phase_;
    outcome.plan.action = RecoveryPlan::Action::halt;
    outcome.plan.rationale = "no trusted time";
    return outcome;
  }

  outcome.plan = plan_recovery(*trusted_now_);
  // Decisions are part of the audit trail whether or not they succeed.
  emit(EventKind::admin_alert, now,
       {{"decision", kind_name},
        {"trusted_time", std::to_string(*trusted_now_)},
        {"plan", std::string(to_string(outcome.plan.action))},
        {"rationale", outcome.plan.rationale}});
  execute_plan(outcome.plan, *trusted_now_, monotonic_ms, outcome);
  outcome.phase = phase_;
  return outcome;
}

Schedule Engine::force_schedule_update(std::uint64_t trusted_now,
                                       std::uint16_t new_validity_minutes,
                                       std::uint64_t monotonic_ms) {
  const Schedule next = update_schedule(store_, schedule(), trusted_now,
                                        new_validity_minutes, config_.policy);
  schedule_ = next;
  emit(EventKind::schedule_updated, trusted_now,
       {{"creation_date", std::to_string(next.creation_date)},
        {"start_index", std::to_string(next.start_index)},
        {"signing_index", std::to_string(next.signing_index())},
        {"validity_minutes", std::to_string(next.validity_minutes)}});
  if (phase_ == Phase::halted_awaiting_admin) {
    trusted_now_ = trusted_now;
    const RecoveryPlan plan = plan_recovery(trusted_now);
    if (plan.action == RecoveryPlan::Action::resume) {
      phase_ = Phase::running;
      emit(EventKind::resumed, trusted_now,
           {{"plan", "schedule_update"},
            {"next_index", std::to_string(store_.next_index())}});
    }
  }
  if (phase_ == Phase::running) {
    arm_timer(trusted_now, monotonic_ms);
  }
  return next;
}

}  // namespace hbsca
