// SPDX-License-Identifier: Apache-2.0

#include "hbsca/eventlog.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hbsca/errors.hpp"

namespace hbsca {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::setup_complete: return "setup_complete";
    case EventKind::issued: return "issued";
    case EventKind::halted: return "halted";
    case EventKind::admin_alert: return "admin_alert";
    case EventKind::dummy_signed: return "dummy_signed";
    case EventKind::schedule_updated: return "schedule_updated";
    case EventKind::resumed: return "resumed";
    case EventKind::exhausted: return "exhausted";
  }
  return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
  for (EventKind k :
       {EventKind::setup_complete, EventKind::issued, EventKind::halted,
        EventKind::admin_alert, EventKind::dummy_signed,
        EventKind::schedule_updated, EventKind::resumed,
        EventKind::exhausted}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  return std::nullopt;
}

Bytes EngineEvent::encode() const {
  nlohmann::json j;
  j["kind"] = std::string(to_string(kind));
  j["at"] = at;
  j["detail"] = detail;  // std::map keeps keys sorted, dump is deterministic
  const std::string text = j.dump();
  return Bytes(text.begin(), text.end());
}

EngineEvent EngineEvent::decode(BytesView record) {
  const auto j = nlohmann::json::parse(record.begin(), record.end(), nullptr,
                                       false);
  if (j.is_discarded()) {
    throw FormatError("event record is not valid JSON");
  }
  EngineEvent e;
  const auto kind = event_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) {
    throw FormatError("unknown event kind");
  }
  e.kind = *kind;
  e.at = j.at("at").get<std::uint64_t>();
  e.detail = j.at("detail").get<std::map<std::string, std::string>>();
  return e;
}

EventLog EventLog::open(const std::filesystem::path& file) {
  EventLog log;
  log.file_ = file;
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    // New log; the first append creates the file.
    return log;
  }
  Bytes raw((std::istreambuf_iterator<char>(in)),
            std::istreambuf_iterator<char>());
  std::size_t off = 0;
  while (off < raw.size()) {
    if (off + 4 > raw.size()) {
      throw FormatError("truncated event record length", off);
    }
    const std::uint32_t len = load_u32(raw, off);
    off += 4;
    if (off + len > raw.size()) {
      throw FormatError("truncated event record", off);
    }
    log.events_.push_back(
        EngineEvent::decode(BytesView(raw).subspan(off, len)));
    off += len;
  }
  return log;
}

void EventLog::append(const EngineEvent& event) {
  const Bytes body = event.encode();
  Bytes record;
  record.reserve(body.size() + 4);
  put_u32(record, static_cast<std::uint32_t>(body.size()));
  record.insert(record.end(), body.begin(), body.end());

  const int fd =
      ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0600);
  if (fd < 0) {
    throw IoError("cannot open event log: " +
                  std::string(std::strerror(errno)));
  }
  std::size_t off = 0;
  while (off < record.size()) {
    const ssize_t n = ::write(fd, record.data() + off, record.size() - off);
    if (n < 0) {
      ::close(fd);
      throw IoError("event log write failed");
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  events_.push_back(event);
}

}  // namespace hbsca
