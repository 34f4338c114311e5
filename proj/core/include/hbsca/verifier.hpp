// SPDX-License-Identifier: Apache-2.0
//
// Peer-side validation: chain of trust back to the XMSS CA, schedule
// conformance of the leaf's index, validity windows, and handshake signature
// checks. Verification never touches a system clock; `now` is always passed
// in.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hbsca/bytes.hpp"
#include "hbsca/certkit.hpp"
#include "hbsca/schedule.hpp"
#include "hbsca/xmss.hpp"

namespace hbsca {

struct TrustStore {
  ParsedCertificate ca;
  XmssPublicKey ca_key;
  IssuancePolicy policy;
  /// Verified schedules ordered by signing index; the newest is
  /// authoritative wherever spans overlap, superseded ones remain for
  /// validating historical leaves.
  std::vector<Schedule> schedules;
};

/// Parses and self-verifies the CA certificate (signed with index 0 under
/// its own key). Throws FormatError / Error on inconsistent input.
TrustStore make_trust_store(BytesView ca_der, IssuancePolicy policy = {});

enum class IngestResult {
  accepted,
  rejected_format,
  rejected_signature,
  rejected_stale,  // signing index does not exceed the stored ones
};
std::string_view to_string(IngestResult result);

IngestResult ingest_schedule(TrustStore& ts, BytesView schedule_bytes);

enum class VerifyStatus {
  accept,
  parse_error,
  bad_signature,
  not_yet_valid,
  expired,
  schedule_mismatch,
  no_schedule,
  wrong_key_type,
};
std::string_view to_string(VerifyStatus status);

struct VerifyResult {
  VerifyStatus status = VerifyStatus::parse_error;
  std::string reason;

  bool ok() const { return status == VerifyStatus::accept; }
};

VerifyResult verify_leaf(const TrustStore& ts, BytesView leaf_der,
                         std::uint64_t now);

VerifyResult verify_peer_auth(const TrustStore& ts, BytesView leaf_der,
                              BytesView transcript, BytesView classical_sig,
                              std::uint64_t now);

}  // namespace hbsca
