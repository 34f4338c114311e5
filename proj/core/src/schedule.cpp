// SPDX-License-Identifier: Apache-2.0

#include "hbsca/schedule.hpp"

#include <sstream>

#include "hbsca/errors.hpp"

namespace hbsca {

std::uint32_t IssuancePolicy::issue_interval_seconds(
    std::uint16_t validity_minutes) const {
  if (validity_minutes <= overlap_minutes) {
    throw ParamError("validity time must exceed the overlap window");
  }
  return static_cast<std::uint32_t>(validity_minutes - overlap_minutes) * 60;
}

XmssParams Schedule::params() const {
  auto p = XmssParams::from_signature_size(signature.encode().size());
  if (!p) {
    throw ParamError("schedule signature has no matching parameter set");
  }
  return *p;
}

Bytes Schedule::header() const {
  Bytes out;
  out.reserve(header_bytes);
  put_u64(out, creation_date);
  put_u16(out, validity_minutes);
  put_u32(out, start_index);
  put_u32(out, max_index);
  return out;
}

Bytes Schedule::encode() const {
  Bytes out = header();
  const Bytes sig = signature.encode();
  out.insert(out.end(), sig.begin(), sig.end());
  return out;
}

Schedule Schedule::decode(BytesView bytes) {
  if (bytes.size() < header_bytes) {
    throw FormatError("schedule shorter than its 18-byte header",
                      bytes.size());
  }
  const auto params =
      XmssParams::from_signature_size(bytes.size() - header_bytes);
  if (!params) {
    throw FormatError("schedule signature length matches no parameter set",
                      header_bytes);
  }
  Schedule s;
  s.creation_date = load_u64(bytes, 0);
  s.validity_minutes = load_u16(bytes, 8);
  s.start_index = load_u32(bytes, 10);
  s.max_index = load_u32(bytes, 14);
  if (s.validity_minutes == 0) {
    throw FormatError("schedule validity time is zero", 8);
  }
  if (s.start_index >= s.max_index) {
    throw FormatError("schedule start index not below max index", 10);
  }
  if (s.max_index > params->leaf_count()) {
    throw FormatError("schedule max index exceeds tree capacity", 14);
  }
  s.signature = XmssSignature::decode(bytes.subspan(header_bytes), *params);
  if (s.start_index == 0 || s.signature.index != s.start_index - 1) {
    throw FormatError("schedule must be signed with start_index - 1", 18);
  }
  return s;
}

std::optional<std::uint32_t> index_for_time(const Schedule& s,
                                            const IssuancePolicy& policy,
                                            std::uint64_t t) {
  if (t < s.creation_date) {
    return std::nullopt;
  }
  const std::uint64_t interval =
      policy.issue_interval_seconds(s.validity_minutes);
  const std::uint64_t offset = (t - s.creation_date) / interval;
  const std::uint64_t index = s.start_index + offset;
  if (index >= s.max_index) {
    return std::nullopt;
  }
  return static_cast<std::uint32_t>(index);
}

std::uint64_t issue_time_for_index(const Schedule& s,
                                   const IssuancePolicy& policy,
                                   std::uint32_t index) {
  if (index < s.start_index || index >= s.max_index) {
    throw RangeError("index " + std::to_string(index) +
                     " outside schedule range [" +
                     std::to_string(s.start_index) + ", " +
                     std::to_string(s.max_index) + ")");
  }
  const std::uint64_t interval =
      policy.issue_interval_seconds(s.validity_minutes);
  return s.creation_date + (index - s.start_index) * interval;
}

std::uint64_t schedule_end_time(const Schedule& s,
                                const IssuancePolicy& policy) {
  const std::uint64_t interval =
      policy.issue_interval_seconds(s.validity_minutes);
  return issue_time_for_index(s, policy, s.max_index - 1) + interval;
}

Schedule make_schedule(KeyStore& store, std::uint64_t now,
                       std::uint16_t validity_minutes,
                       const IssuancePolicy& policy) {
  policy.issue_interval_seconds(validity_minutes);  // validate early
  const std::uint32_t signing_index = store.reserve_index();
  Schedule s;
  s.creation_date = now;
  s.validity_minutes = validity_minutes;
  s.start_index = signing_index + 1;
  s.max_index = store.params().leaf_count();
  s.signature = store.sign_with_reserved(signing_index, s.header());
  return s;
}

Schedule update_schedule(KeyStore& store, const Schedule& old,
                         std::uint64_t now, std::uint16_t new_validity_minutes,
                         const IssuancePolicy& policy) {
  Schedule next = make_schedule(store, now, new_validity_minutes, policy);
  if (next.signing_index() <= old.signing_index()) {
    // Impossible through the keystore's monotone counter; kept as a guard.
    throw StateError("updated schedule does not supersede the previous one");
  }
  return next;
}

double lifetime_years(std::uint32_t certificate_count,
                      std::uint32_t validity_minutes) {
  const double hours =
      static_cast<double>(certificate_count) * validity_minutes / 60.0;
  return hours / (24.0 * 365.0);
}

std::string format_schedule(const Schedule& s) {
  std::ostringstream out;
  out << "Creation Date  " << s.creation_date << " (time_t)\n"
      << "Validity Time  " << s.validity_minutes << " min\n"
      << "Current Index  " << s.start_index << "\n"
      << "Max Index      " << s.max_index << "\n"
      << "Signature      " << s.signature.encode().size()
      << " bytes, XMSS index " << s.signature.index << "\n";
  return out.str();
}

}  // namespace hbsca
