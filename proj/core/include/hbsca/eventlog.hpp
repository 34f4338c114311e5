// SPDX-License-Identifier: Apache-2.0
//
// Append-only engine audit log. Records are length-prefixed (u32, big-endian)
// JSON objects with stable key order, so a replayed run reproduces the log
// byte for byte. Replay of the log alone reconstructs the engine phase.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hbsca/bytes.hpp"

namespace hbsca {

enum class EventKind {
  setup_complete,
  issued,
  halted,
  admin_alert,
  dummy_signed,
  schedule_updated,
  resumed,
  exhausted,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct EngineEvent {
  EventKind kind = EventKind::admin_alert;
  std::uint64_t at = 0;  // POSIX seconds
  std::map<std::string, std::string> detail;

  Bytes encode() const;
  static EngineEvent decode(BytesView record);
};

class EventLog {
 public:
  /// Opens (or creates) the log and replays existing records.
  static EventLog open(const std::filesystem::path& file);

  /// Durable append: the record is flushed before this returns.
  void append(const EngineEvent& event);

  const std::vector<EngineEvent>& events() const { return events_; }
  const std::filesystem::path& file() const { return file_; }

 private:
  std::filesystem::path file_;
  std::vector<EngineEvent> events_;
};

}  // namespace hbsca
