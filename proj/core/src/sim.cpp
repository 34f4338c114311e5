// SPDX-License-Identifier: Apache-2.0

#include "hbsca/sim.hpp"

#include <cmath>
#include <fstream>

#include "hbsca/errors.hpp"

namespace hbsca {

void VirtualClock::advance_ms(std::uint64_t ms) {
  monotonic_ms_ += ms;
  true_ms_ += ms;
  if (slew_ms_per_s_ != 0.0) {
    slew_accum_ms_ += slew_ms_per_s_ * static_cast<double>(ms) / 1000.0;
    const double whole = std::trunc(slew_accum_ms_);
    manipulation_ms_ += static_cast<std::int64_t>(whole);
    slew_accum_ms_ -= whole;
  }
}

void VirtualClock::jump_wall_s(std::int64_t delta_s) {
  manipulation_ms_ += delta_s * 1000;
}

void VirtualClock::set_wall_s(std::uint64_t t_s) {
  manipulation_ms_ = static_cast<std::int64_t>(t_s * 1000) -
                     static_cast<std::int64_t>(true_ms_);
}

namespace {

const Bytes& default_entropy() {
  static const Bytes entropy(XmssParams::keygen_entropy_bytes, 0x5c);
  return entropy;
}

void write_file(const std::filesystem::path& path, BytesView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  return Bytes(std::istreambuf_iterator<char>(in),
               std::istreambuf_iterator<char>());
}

}  // namespace

SimWorld::SimWorld(std::filesystem::path workdir, SimConfig config)
    : workdir_(std::move(workdir)), config_(std::move(config)) {
  std::filesystem::create_directories(workdir_);
  if (config_.keygen_entropy.empty()) {
    config_.keygen_entropy = default_entropy();
  }
  for (std::size_t i = 0; i < config_.server_delays_ms.size(); ++i) {
    servers_.push_back(SimNtpServer{"ntp" + std::to_string(i),
                                    config_.server_delays_ms[i], 0, false});
  }
  config_.time.server_count = servers_.size();
}

TimeVerdict SimWorld::make_verdict() {
  std::vector<NtpSample> samples;
  const std::uint64_t base =
      ntp_follow_true_ ? clock_.true_ms() : clock_.wall_ms();
  for (const SimNtpServer& s : servers_) {
    NtpSample sample;
    sample.server = s.id;
    if (s.silent) {
      sample.error = "timeout";
    } else {
      sample.reported_ms = static_cast<std::uint64_t>(
          static_cast<std::int64_t>(base) + s.fault_offset_ms);
      sample.round_trip_ms = s.delay_ms;
    }
    samples.push_back(std::move(sample));
  }
  return consensus(samples, clock_.wall_ms(), config_.time);
}

void SimWorld::attach_store_observer() {
  store_->set_sign_observer([this](std::uint32_t index) {
    signed_log_.emplace_back(lifetime_, index);
  });
}

void SimWorld::register_schedule(Bytes encoded) {
  const Schedule s = Schedule::decode(encoded);
  write_file(workdir_ / ("schedule_" + std::to_string(s.signing_index()) +
                         ".sched"),
             encoded);
  schedule_files_.push_back(std::move(encoded));
  if (auto_deliver_) {
    deliver_pending_schedules();
  }
}

void SimWorld::deliver_pending_schedules() {
  if (!responder_) {
    return;
  }
  while (delivered_schedules_ < schedule_files_.size()) {
    ingest_schedule(*responder_, schedule_files_[delivered_schedules_]);
    ++delivered_schedules_;
  }
}

void SimWorld::setup(std::uint64_t now_s) {
  if (engine_) {
    throw StateError("setup already ran in this simulation");
  }
  clock_ = VirtualClock(now_s * 1000);

  const auto params = XmssParams::from_height(config_.tree_height);
  auto pair = xmss_keygen(params, config_.keygen_entropy);
  store_ = std::make_unique<KeyStore>(
      KeyStore::create(workdir_ / "ca.xks", std::move(pair)));
  ++lifetime_;
  attach_store_observer();
  log_ = std::make_unique<EventLog>(EventLog::open(workdir_ / "events.log"));

  EngineConfig config;
  config.validity_minutes = config_.validity_minutes;
  config.policy.overlap_minutes = config_.overlap_minutes;
  config.dummy_threshold = config_.dummy_threshold;
  config.time = config_.time;
  config.allow_test_params = true;
  engine_ = std::make_unique<Engine>(*store_, *log_, config);

  SetupArtifacts artifacts =
      engine_->setup(now_s, clock_.monotonic_ms());
  ca_der_ = artifacts.ca_der;
  write_file(workdir_ / "ca.der", ca_der_);
  write_file(workdir_ / "leaf_2.der", artifacts.leaf_der);
  last_leaf_der_ = artifacts.leaf_der;

  responder_ = make_trust_store(ca_der_,
                                IssuancePolicy{config_.overlap_minutes});
  register_schedule(artifacts.schedule.encode());
}

void SimWorld::persist_outcome(const TickOutcome& outcome) {
  if (outcome.action != TickOutcome::Action::issued) {
    return;
  }
  last_leaf_der_ = outcome.leaf_der;
  write_file(workdir_ /
                 ("leaf_" + std::to_string(*outcome.index) + ".der"),
             outcome.leaf_der);
  // Rotation destroys the previous classical secret.
  write_file(workdir_ / "current_leaf.key", outcome.leaf_keys.secret_key);
  write_file(workdir_ / "current_leaf.der", outcome.leaf_der);
}

void SimWorld::deliver_tick() {
  if (!engine_) {
    throw StateError("no engine is running");
  }
  verdict_ = make_verdict();
  const TickOutcome outcome =
      engine_->tick(clock_.wall_s(), clock_.monotonic_ms(), *verdict_);
  persist_outcome(outcome);
}

void SimWorld::advance_s(std::uint64_t seconds) {
  const std::uint64_t target = clock_.monotonic_ms() + seconds * 1000;
  int guard = 0;
  while (engine_) {
    const auto wakeup = engine_->next_wakeup_monotonic_ms();
    if (!wakeup || *wakeup > target) {
      break;
    }
    if (*wakeup > clock_.monotonic_ms()) {
      clock_.advance_ms(*wakeup - clock_.monotonic_ms());
    }
    deliver_tick();
    if (++guard > 100000) {
      throw StateError("issuance loop failed to make progress");
    }
  }
  if (target > clock_.monotonic_ms()) {
    clock_.advance_ms(target - clock_.monotonic_ms());
  }
}

void SimWorld::slew(double rate_ms_per_s, std::uint64_t duration_s) {
  clock_.set_slew(rate_ms_per_s);
  advance_s(duration_s);
  clock_.set_slew(0.0);
}

void SimWorld::stop_engine() {
  engine_.reset();
  log_.reset();
  store_.reset();  // releases the advisory lock
}

void SimWorld::start_engine() {
  if (engine_) {
    throw StateError("engine already running");
  }
  if (schedule_files_.empty()) {
    throw StateError("cannot start before setup");
  }
  store_ = std::make_unique<KeyStore>(KeyStore::open(workdir_ / "ca.xks"));
  ++lifetime_;
  attach_store_observer();
  log_ = std::make_unique<EventLog>(EventLog::open(workdir_ / "events.log"));

  EngineConfig config;
  config.validity_minutes = config_.validity_minutes;
  config.policy.overlap_minutes = config_.overlap_minutes;
  config.dummy_threshold = config_.dummy_threshold;
  config.time = config_.time;
  config.allow_test_params = true;
  engine_ = std::make_unique<Engine>(*store_, *log_, config);
  engine_->adopt(Schedule::decode(schedule_files_.back()), ca_der_);

  verdict_ = make_verdict();
  engine_->start(clock_.wall_s(), clock_.monotonic_ms(), *verdict_);
}

void SimWorld::crash_restart(std::uint64_t downtime_s) {
  stop_engine();
  clock_.advance_ms(downtime_s * 1000);
  start_engine();
}

bool SimWorld::engine_running() const {
  return engine_ && engine_->phase() == Phase::running;
}

void SimWorld::snapshot_state(const std::string& name) {
  state_snapshots_[name] = read_file(workdir_ / "ca.xks");
}

void SimWorld::rollback_state(const std::string& name) {
  const auto it = state_snapshots_.find(name);
  if (it == state_snapshots_.end()) {
    throw StateError("unknown state snapshot: " + name);
  }
  if (engine_) {
    throw StateError("stop the engine before rolling back the state file");
  }
  write_file(workdir_ / "ca.xks", it->second);
}

void SimWorld::ntp_fault(std::size_t server, std::int64_t offset_s) {
  servers_.at(server).fault_offset_ms = offset_s * 1000;
  servers_.at(server).silent = false;
}

void SimWorld::ntp_silent(std::size_t server) {
  servers_.at(server).silent = true;
}

void SimWorld::ntp_clear(std::size_t server) {
  servers_.at(server).fault_offset_ms = 0;
  servers_.at(server).silent = false;
}

void SimWorld::apply_admin(const AdminDecision& decision) {
  if (!engine_) {
    throw StateError("no engine is running");
  }
  auto outcome = engine_->apply_admin(decision, clock_.wall_s(),
                                      clock_.monotonic_ms());
  plan_ = outcome.plan;
  if (!outcome.new_schedule.empty()) {
    register_schedule(std::move(outcome.new_schedule));
  }
}

void SimWorld::force_schedule_update(
    std::optional<std::uint16_t> validity_minutes) {
  if (!engine_) {
    throw StateError("no engine is running");
  }
  const std::uint16_t validity =
      validity_minutes.value_or(engine_->schedule().validity_minutes);
  const Schedule next = engine_->force_schedule_update(
      clock_.wall_s(), validity, clock_.monotonic_ms());
  register_schedule(next.encode());
}

void SimWorld::mark_leaf(const std::string& tag) {
  if (last_leaf_der_.empty()) {
    throw StateError("no leaf issued yet");
  }
  tagged_leaves_[tag] = last_leaf_der_;
}

VerifyResult SimWorld::verify_leaf_tagged(const std::string& tag) {
  if (!responder_) {
    throw StateError("responder trust store not initialized");
  }
  const Bytes* der = nullptr;
  if (tag == "last") {
    der = &last_leaf_der_;
  } else {
    const auto it = tagged_leaves_.find(tag);
    if (it == tagged_leaves_.end()) {
      throw StateError("unknown leaf tag: " + tag);
    }
    der = &it->second;
  }
  return verify_leaf(*responder_, *der, clock_.wall_s());
}

const std::vector<EngineEvent>& SimWorld::events() const {
  static const std::vector<EngineEvent> empty;
  return log_ ? log_->events() : empty;
}

Phase SimWorld::phase() const {
  if (!engine_) {
    throw StateError("no engine is running");
  }
  return engine_->phase();
}

std::uint32_t SimWorld::remaining_signatures() const {
  if (!store_) {
    throw StateError("no key store is open");
  }
  return store_->remaining_signatures();
}

}  // namespace hbsca
