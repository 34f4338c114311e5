// SPDX-License-Identifier: Apache-2.0
//
// The signed schedule binds wall-clock issuance slots to XMSS indices:
// slot(i) = creation_date + (i - start_index) * issue_interval. Issuance
// happens every (validity - overlap) minutes while each certificate is valid
// for the full validity span, so consecutive certificates overlap by exactly
// the overlap window.

#pragma once

#include <cstdint>
#include <optional>

#include "hbsca/bytes.hpp"
#include "hbsca/keystore.hpp"
#include "hbsca/xmss.hpp"

namespace hbsca {

/// Issuance cadence shared out-of-band with peers. The schedule file itself
/// carries only the validity time.
struct IssuancePolicy {
  std::uint16_t overlap_minutes = 2;

  std::uint32_t issue_interval_seconds(std::uint16_t validity_minutes) const;
};

struct Schedule {
  static constexpr std::size_t header_bytes = 18;

  std::uint64_t creation_date = 0;      // POSIX seconds
  std::uint16_t validity_minutes = 0;   // leaf certificate lifetime
  std::uint32_t start_index = 0;        // "Current Index": first leaf slot
  std::uint32_t max_index = 0;          // exclusive bound on usable indices
  XmssSignature signature;              // over the 18-byte header

  XmssParams params() const;
  std::uint32_t signing_index() const { return signature.index; }

  Bytes header() const;
  Bytes encode() const;
  /// Parses and validates header invariants; the parameter set is inferred
  /// from the signature length. Signature verification is the verifier's job.
  static Schedule decode(BytesView bytes);
};

/// Index whose slot contains `t`, or nullopt when t is before the schedule
/// or past the last slot.
std::optional<std::uint32_t> index_for_time(const Schedule& s,
                                            const IssuancePolicy& policy,
                                            std::uint64_t t);

/// Start of index's slot. Inverse of index_for_time on slot starts.
/// Throws RangeError outside [start_index, max_index).
std::uint64_t issue_time_for_index(const Schedule& s,
                                   const IssuancePolicy& policy,
                                   std::uint32_t index);

/// First instant no longer covered by any slot.
std::uint64_t schedule_end_time(const Schedule& s,
                                const IssuancePolicy& policy);

/// Signs a fresh schedule anchored at `now` with the next available index i;
/// usable leaf slots then begin at i + 1.
Schedule make_schedule(KeyStore& store, std::uint64_t now,
                       std::uint16_t validity_minutes,
                       const IssuancePolicy& policy);

/// Re-anchors after an anomaly or to change the validity time. The previous
/// schedule is superseded; peers must receive the new file.
Schedule update_schedule(KeyStore& store, const Schedule& old,
                         std::uint64_t now, std::uint16_t new_validity_minutes,
                         const IssuancePolicy& policy);

/// Nominal total lifespan in 365-day years when every certificate runs its
/// full validity time.
double lifetime_years(std::uint32_t certificate_count,
                      std::uint32_t validity_minutes);

/// Text rendering of one schedule record, one field per line.
std::string format_schedule(const Schedule& s);

}  // namespace hbsca
