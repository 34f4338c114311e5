// SPDX-License-Identifier: Apache-2.0

#include "hbsca/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "hbsca/errors.hpp"

namespace hbsca {

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) {
      fields.emplace_back(line.substr(start, i - start));
    }
  }
  return fields;
}

struct OpSpec {
  std::size_t min_args;
  std::size_t max_args;
};

const std::map<std::string, OpSpec>& op_table() {
  static const std::map<std::string, OpSpec> table = {
      {"height", {1, 1}},        {"validity", {1, 1}},
      {"overlap", {1, 1}},       {"servers", {1, 8}},
      {"seed", {1, 1}},          {"setup", {1, 1}},
      {"advance", {1, 1}},       {"tick", {0, 0}},
      {"jump", {1, 1}},          {"set_clock", {1, 1}},
      {"slew", {2, 2}},          {"ntp_follow", {1, 1}},
      {"ntp_fault", {2, 3}},     {"ntp_clear", {1, 1}},
      {"crash_restart", {1, 1}}, {"stop_engine", {0, 0}},
      {"start_engine", {0, 0}},  {"snapshot", {1, 1}},
      {"rollback", {1, 1}},      {"admin", {1, 2}},
      {"schedule_update", {0, 1}},
      {"deliver_schedules", {1, 1}},
      {"deliver_now", {0, 0}},   {"mark", {1, 1}},
      {"verify", {1, 1}},        {"expect", {1, 16}},
  };
  return table;
}

}  // namespace

Scenario Scenario::parse(const std::string& name, std::string_view text) {
  Scenario s;
  s.name = name;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    auto fields = split_fields(line);
    if (fields.empty()) {
      continue;
    }
    ScenarioStep step;
    step.line = line_no;
    step.op = fields[0];
    step.args.assign(fields.begin() + 1, fields.end());
    step.raw.assign(line.begin(), line.end());
    while (!step.raw.empty() && step.raw.back() == ' ') {
      step.raw.pop_back();
    }
    const auto spec = op_table().find(step.op);
    if (spec == op_table().end()) {
      throw FormatError("scenario " + name + " line " +
                        std::to_string(line_no) + ": unknown step '" +
                        step.op + "'");
    }
    if (step.args.size() < spec->second.min_args ||
        step.args.size() > spec->second.max_args) {
      throw FormatError("scenario " + name + " line " +
                        std::to_string(line_no) + ": wrong argument count");
    }
    s.steps.push_back(std::move(step));
  }
  return s;
}

Scenario Scenario::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw IoError("cannot open scenario " + file.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(file.stem().string(), buf.str());
}

std::string ScenarioReport::text() const {
  std::ostringstream out;
  out << "scenario " << name << "\n";
  for (const auto& line : lines) {
    out << line << "\n";
  }
  out << "checks " << checks << " failures " << failures << "\n";
  out << "result " << (passed ? "PASS" : "FAIL") << "\n";
  return out.str();
}

SignatureAudit audit_signed_indices(
    const std::vector<std::pair<int, std::uint32_t>>& signed_indices) {
  SignatureAudit audit;
  audit.total = signed_indices.size();
  std::set<std::uint32_t> seen;
  for (const auto& [lifetime, index] : signed_indices) {
    if (!seen.insert(index).second) {
      audit.duplicates.push_back(index);
    }
  }
  return audit;
}

namespace {

// Executes a parsed scenario. Expectations read the event log through a
// cursor that only moves forward, so scripted expectations match events in
// order.
class Runner {
 public:
  Runner(const Scenario& scenario, std::filesystem::path workdir)
      : scenario_(scenario), workdir_(std::move(workdir)) {}

  ScenarioReport run() {
    report_.name = scenario_.name;
    for (const ScenarioStep& step : scenario_.steps) {
      report_.lines.push_back("L" + std::to_string(step.line) + " " +
                              step.raw);
      execute(step);
    }
    finish_audit();
    report_.passed = report_.failures == 0;
    return std::move(report_);
  }

 private:
  SimWorld& world() {
    if (!world_) {
      throw FormatError("scenario step requires a prior setup");
    }
    return *world_;
  }

  std::uint64_t parse_time(const std::string& token) {
    if (token == "now") {
      return world().clock().wall_s();
    }
    if (token == "true") {
      return world().clock().true_ms() / 1000;
    }
    if (token[0] == '+' || token[0] == '-') {
      const std::int64_t delta = std::stoll(token);
      return static_cast<std::uint64_t>(
          static_cast<std::int64_t>(world().clock().wall_s()) + delta);
    }
    return std::stoull(token);
  }

  void check(bool ok, const std::string& what) {
    ++report_.checks;
    if (ok) {
      report_.lines.push_back("  PASS " + what);
    } else {
      ++report_.failures;
      report_.lines.push_back("  FAIL " + what);
    }
  }

  void execute(const ScenarioStep& step) {
    const auto& a = step.args;
    if (step.op == "height") {
      config_.tree_height = static_cast<std::uint32_t>(std::stoul(a[0]));
    } else if (step.op == "validity") {
      config_.validity_minutes = static_cast<std::uint16_t>(std::stoul(a[0]));
    } else if (step.op == "overlap") {
      config_.overlap_minutes = static_cast<std::uint16_t>(std::stoul(a[0]));
    } else if (step.op == "servers") {
      config_.server_delays_ms.clear();
      for (const auto& d : a) {
        config_.server_delays_ms.push_back(std::stoull(d));
      }
    } else if (step.op == "seed") {
      config_.keygen_entropy = from_hex(a[0]);
    } else if (step.op == "setup") {
      world_.emplace(workdir_, config_);
      world_->setup(std::stoull(a[0]));
    } else if (step.op == "advance") {
      world().advance_s(std::stoull(a[0]));
    } else if (step.op == "tick") {
      world().deliver_tick();
    } else if (step.op == "jump") {
      world().clock().jump_wall_s(std::stoll(a[0]));
    } else if (step.op == "set_clock") {
      if (a[0] == "true") {
        world().clock().clear_manipulation();
      } else {
        world().clock().set_wall_s(parse_time(a[0]));
      }
    } else if (step.op == "slew") {
      world().slew(std::stod(a[0]), std::stoull(a[1]));
    } else if (step.op == "ntp_follow") {
      world().ntp_follow_true(a[0] == "true");
    } else if (step.op == "ntp_fault") {
      const std::size_t idx = std::stoul(a[0]);
      if (a[1] == "silent") {
        world().ntp_silent(idx);
      } else if (a[1] == "offset" && a.size() == 3) {
        world().ntp_fault(idx, std::stoll(a[2]));
      } else {
        throw FormatError("ntp_fault expects 'offset <s>' or 'silent'");
      }
    } else if (step.op == "ntp_clear") {
      world().ntp_clear(std::stoul(a[0]));
    } else if (step.op == "crash_restart") {
      world().crash_restart(std::stoull(a[0]));
    } else if (step.op == "stop_engine") {
      world().stop_engine();
    } else if (step.op == "start_engine") {
      world().start_engine();
    } else if (step.op == "snapshot") {
      world().snapshot_state(a[0]);
    } else if (step.op == "rollback") {
      world().rollback_state(a[0]);
    } else if (step.op == "admin") {
      AdminDecision decision;
      if (a[0] == "accept_time") {
        decision.kind = AdminDecision::Kind::accept_time;
        decision.time = parse_time(a.at(1));
      } else if (a[0] == "correct_time") {
        decision.kind = AdminDecision::Kind::correct_time;
        decision.time = parse_time(a.at(1));
        // Correcting the time also fixes the system clock.
        world().clock().set_wall_s(decision.time);
      } else if (a[0] == "execute_plan") {
        decision.kind = AdminDecision::Kind::execute_plan;
      } else {
        throw FormatError("unknown admin decision " + a[0]);
      }
      world().apply_admin(decision);
    } else if (step.op == "schedule_update") {
      std::optional<std::uint16_t> validity;
      if (!a.empty()) {
        validity = static_cast<std::uint16_t>(std::stoul(a[0]));
      }
      world().force_schedule_update(validity);
    } else if (step.op == "deliver_schedules") {
      world().set_auto_deliver(a[0] == "on");
    } else if (step.op == "deliver_now") {
      world().deliver_pending_schedules();
    } else if (step.op == "mark") {
      world().mark_leaf(a[0]);
    } else if (step.op == "verify") {
      last_verify_ = world().verify_leaf_tagged(a[0]);
    } else if (step.op == "expect") {
      expectation(step);
    }
  }

  struct EventPattern {
    EventKind kind;
    std::map<std::string, std::string> exact;
    std::string contains;
  };

  EventPattern parse_pattern(const ScenarioStep& step, std::size_t from) {
    const auto kind = event_kind_from_string(step.args.at(from));
    if (!kind) {
      throw FormatError("unknown event kind " + step.args.at(from));
    }
    EventPattern p{*kind, {}, {}};
    for (std::size_t i = from + 1; i < step.args.size(); ++i) {
      const std::string& arg = step.args[i];
      const std::size_t eq = arg.find('=');
      if (eq == std::string::npos) {
        throw FormatError("expected key=value in expect, got " + arg);
      }
      const std::string key = arg.substr(0, eq);
      std::string value = arg.substr(eq + 1);
      if (key == "contains") {
        // The substring runs to the end of the line.
        for (std::size_t j = i + 1; j < step.args.size(); ++j) {
          value += " " + step.args[j];
        }
        p.contains = value;
        break;
      }
      p.exact[key] = value;
    }
    return p;
  }

  static bool matches(const EngineEvent& e, const EventPattern& p) {
    if (e.kind != p.kind) {
      return false;
    }
    for (const auto& [k, v] : p.exact) {
      const auto it = e.detail.find(k);
      if (it == e.detail.end() || it->second != v) {
        return false;
      }
    }
    if (!p.contains.empty()) {
      bool found = false;
      for (const auto& [k, v] : e.detail) {
        if (v.find(p.contains) != std::string::npos) {
          found = true;
          break;
        }
      }
      if (!found) {
        return false;
      }
    }
    return true;
  }

  void expectation(const ScenarioStep& step) {
    const auto& a = step.args;
    const std::string& what = a[0];
    if (what == "event" || what == "no_event") {
      const EventPattern p = parse_pattern(step, 1);
      const auto& events = world().events();
      std::size_t found = events.size();
      for (std::size_t i = event_cursor_; i < events.size(); ++i) {
        if (matches(events[i], p)) {
          found = i;
          break;
        }
      }
      if (what == "event") {
        const bool ok = found < events.size();
        if (ok) {
          event_cursor_ = found + 1;
        }
        check(ok, step.raw);
      } else {
        check(found == events.size(), step.raw);
      }
    } else if (what == "verdict") {
      const auto& v = world().last_verdict();
      check(v && to_string(v->status) == a.at(1), step.raw);
    } else if (what == "plan") {
      const auto& p = world().last_plan();
      bool ok = p && to_string(p->action) == a.at(1);
      if (ok && a.size() > 2) {
        ok = p->dummy_count == std::stoul(a[2]);
      }
      check(ok, step.raw);
    } else if (what == "phase") {
      check(to_string(world().phase()) == a.at(1), step.raw);
    } else if (what == "verifier") {
      check(last_verify_ && to_string(last_verify_->status) == a.at(1),
            step.raw);
    } else if (what == "remaining") {
      check(world().remaining_signatures() == std::stoul(a.at(1)), step.raw);
    } else {
      throw FormatError("unknown expectation " + what);
    }
  }

  void finish_audit() {
    if (!world_) {
      return;
    }
    const SignatureAudit audit =
        audit_signed_indices(world_->signed_indices());
    report_.signed_indices = world_->signed_indices();
    std::ostringstream line;
    line << "audit signatures=" << audit.total
         << " duplicates=" << audit.duplicates.size();
    report_.lines.push_back(line.str());
    ++report_.checks;
    if (!audit.clean()) {
      ++report_.failures;
      report_.lines.push_back("  FAIL duplicate XMSS indices signed");
    } else {
      report_.lines.push_back("  PASS no XMSS index signed twice");
    }
  }

  const Scenario& scenario_;
  std::filesystem::path workdir_;
  SimConfig config_;
  std::optional<SimWorld> world_;
  std::optional<VerifyResult> last_verify_;
  std::size_t event_cursor_ = 0;
  ScenarioReport report_;
};

}  // namespace

ScenarioReport run_scenario(const Scenario& scenario,
                            const std::filesystem::path& workdir) {
  Runner runner(scenario, workdir);
  return runner.run();
}

const std::map<std::string, std::string>& builtin_scenarios() {
  static const std::map<std::string, std::string> scenarios = {
      {"ops-forward-jump", R"(# clock jumps two days ahead during operations
height 10
validity 240
servers 10 20 30
ntp_follow wall
setup 1751720001
advance 28560
expect event issued index=3
expect event issued index=4
jump +172800
advance 14280
expect event halted
expect event admin_alert contains=behind
expect event admin_alert contains=absolute ahead 172800 s
expect phase halted_awaiting_admin
admin correct_time true
expect event resumed
expect phase running
advance 14280
expect event issued index=5
)"},
      {"ops-backward-jump", R"(# clock set back one day during operations
height 10
validity 240
servers 10 20 30
ntp_follow wall
setup 1751720001
advance 28560
expect event issued index=4
jump -86400
advance 14280
expect event halted
expect event admin_alert contains=absolute behind 86400 s
admin correct_time true
expect event resumed
advance 14280
expect event issued index=5
)"},
      {"ntp-single-liar", R"(# one lying server per round is always outvoted
height 4
validity 240
servers 10 20 30
setup 1751720001
ntp_fault 0 offset 600
advance 14280
expect event issued index=3
expect verdict trusted
ntp_clear 0
ntp_fault 1 offset -600
advance 14280
expect event issued index=4
expect verdict trusted
ntp_clear 1
ntp_fault 2 offset 2592000
advance 14280
expect event issued index=5
expect verdict trusted
expect no_event halted
)"},
      {"ntp-no-consensus", R"(# two diverging servers block issuance
height 4
validity 240
servers 10 20 30
setup 1751720001
ntp_fault 1 offset 600
ntp_fault 2 offset -600
advance 14280
expect event halted
expect verdict no-consensus
expect no_event issued index=3
ntp_clear 1
ntp_clear 2
admin correct_time now
expect event resumed
advance 100
expect event issued index=3
)"},
      {"downtime-catchup-3", R"(# short downtime: three dummy signatures catch up
height 4
validity 240
servers 10 20 30
setup 1751720001
advance 14280
expect event issued index=3
crash_restart 60000
expect event halted
expect event admin_alert contains=behind
admin correct_time now
expect plan dummy_sign 3
expect event dummy_signed index=4
expect event dummy_signed index=5
expect event dummy_signed index=6
expect event resumed
tick
expect event issued index=7
)"},
      {"downtime-catchup-11", R"(# long downtime: gap of 11 exceeds the dummy threshold
height 4
validity 240
servers 10 20 30
setup 1751720001
advance 14280
expect event issued index=3
crash_restart 171720
expect event halted
admin correct_time now
expect plan schedule_update
expect event schedule_updated start_index=5
expect event resumed
tick
expect event issued index=5
)"},
      {"rollback", R"(# restored key state file is detected before any signature
height 4
validity 240
servers 10 20 30
setup 1751720001
advance 14280
expect event issued index=3
snapshot early
advance 28560
expect event issued index=5
stop_engine
rollback early
start_engine
expect event halted
expect event admin_alert contains=rollback
expect phase halted_awaiting_admin
admin correct_time now
expect plan halt
expect phase halted_awaiting_admin
expect no_event issued index=6
)"},
      {"forward-accepted", R"(# admin accepts a forward jump; premature leaves are later rejected
height 10
validity 240
servers 10 20 30
ntp_follow wall
setup 1751720001
advance 14280
expect event issued index=3
jump +172800
advance 14280
expect event halted
admin accept_time now
expect plan schedule_update
expect event schedule_updated
expect event resumed
tick
expect event issued index=5
mark premature
advance 14280
expect event issued index=6
set_clock true
tick
expect event halted
admin correct_time true
expect plan halt
schedule_update
expect event schedule_updated
expect event resumed
tick
expect event issued index=8
deliver_now
advance 172800
verify premature
expect verifier schedule-mismatch
)"},
      {"exhaustion", R"(# a toy tree runs out of one-time keys
height 4
validity 240
servers 10 20 30
setup 1751720001
advance 185640
expect event issued index=15
tick
expect event exhausted
expect phase exhausted
expect remaining 0
)"},
      {"drift-slew", R"(# slow clock drift is caught by NTP consensus
height 4
validity 240
servers 10 20 30
setup 1751720001
advance 14280
expect event issued index=3
slew 0.5 14280
expect event halted
expect event admin_alert contains=consensus time differs
admin correct_time true
expect event resumed
advance 14280
expect event issued index=4
)"},
  };
  return scenarios;
}

}  // namespace hbsca
