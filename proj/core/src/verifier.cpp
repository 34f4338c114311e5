// SPDX-License-Identifier: Apache-2.0

#include "hbsca/verifier.hpp"

#include <algorithm>

#include "hbsca/errors.hpp"

namespace hbsca {

std::string_view to_string(IngestResult result) {
  switch (result) {
    case IngestResult::accepted: return "accepted";
    case IngestResult::rejected_format: return "rejected-format";
    case IngestResult::rejected_signature: return "rejected-signature";
    case IngestResult::rejected_stale: return "rejected-stale";
  }
  return "?";
}

std::string_view to_string(VerifyStatus status) {
  switch (status) {
    case VerifyStatus::accept: return "accept";
    case VerifyStatus::parse_error: return "parse-error";
    case VerifyStatus::bad_signature: return "bad-signature";
    case VerifyStatus::not_yet_valid: return "not-yet-valid";
    case VerifyStatus::expired: return "expired";
    case VerifyStatus::schedule_mismatch: return "schedule-mismatch";
    case VerifyStatus::no_schedule: return "no-schedule";
    case VerifyStatus::wrong_key_type: return "wrong-key-type";
  }
  return "?";
}

TrustStore make_trust_store(BytesView ca_der, IssuancePolicy policy) {
  TrustStore ts;
  ts.policy = policy;
  ts.ca = parse_cert(ca_der);
  if (ts.ca.cert.spki_kind != SpkiKind::xmss) {
    throw FormatError("CA certificate does not carry an XMSS key");
  }
  ts.ca_key = XmssPublicKey::decode(ts.ca.cert.spki_key);
  if (ts.ca.cert.xmss_index() != 0) {
    throw FormatError("CA certificate must be self-signed with index 0");
  }
  if (!xmss_verify(ts.ca_key, ts.ca.tbs, ts.ca.cert.xmss_signature)) {
    throw Error("CA certificate self-signature does not verify");
  }
  return ts;
}

IngestResult ingest_schedule(TrustStore& ts, BytesView schedule_bytes) {
  Schedule s;
  try {
    s = Schedule::decode(schedule_bytes);
  } catch (const FormatError&) {
    return IngestResult::rejected_format;
  }
  if (!xmss_verify(ts.ca_key, s.header(), s.signature.encode())) {
    return IngestResult::rejected_signature;
  }
  if (!ts.schedules.empty() &&
      s.signing_index() <= ts.schedules.back().signing_index()) {
    return IngestResult::rejected_stale;  // replayed or out of order
  }
  ts.schedules.push_back(std::move(s));
  return IngestResult::accepted;
}

namespace {

/// The schedule governing a leaf: the newest one whose span covers the
/// leaf's notBefore. Newer schedules supersede older ones wherever their
/// spans overlap, which is what invalidates prematurely issued leaves after
/// a re-anchoring update. Leaves older than every later schedule fall back
/// to the one with the largest signing index below their own.
const Schedule* governing_schedule(const TrustStore& ts,
                                   std::uint64_t not_before,
                                   std::uint32_t leaf_index) {
  const Schedule* covering = nullptr;
  for (const Schedule& s : ts.schedules) {
    if (not_before >= s.creation_date &&
        not_before < schedule_end_time(s, ts.policy)) {
      covering = &s;  // schedules are stored in signing order
    }
  }
  if (covering) {
    return covering;
  }
  const Schedule* below = nullptr;
  for (const Schedule& s : ts.schedules) {
    if (s.signing_index() < leaf_index) {
      below = &s;
    }
  }
  return below;
}

}  // namespace

VerifyResult verify_leaf(const TrustStore& ts, BytesView leaf_der,
                         std::uint64_t now) {
  if (ts.schedules.empty()) {
    return {VerifyStatus::no_schedule, "trust store holds no schedule"};
  }

  std::string err;
  std::size_t pos = 0;
  const auto parsed = try_parse_cert(leaf_der, &err, &pos);
  if (!parsed) {
    return {VerifyStatus::parse_error,
            err + " at byte " + std::to_string(pos)};
  }
  const Certificate& leaf = parsed->cert;
  if (leaf.spki_kind != SpkiKind::ecdsa_p256) {
    return {VerifyStatus::wrong_key_type,
            "leaf does not carry a classical key"};
  }

  if (!xmss_verify(ts.ca_key, parsed->tbs, leaf.xmss_signature)) {
    return {VerifyStatus::bad_signature,
            "XMSS signature does not verify under the CA key"};
  }

  if (now < leaf.not_before) {
    return {VerifyStatus::not_yet_valid,
            "certificate becomes valid at " +
                std::to_string(leaf.not_before)};
  }
  if (now > leaf.not_after) {
    return {VerifyStatus::expired,
            "certificate expired at " + std::to_string(leaf.not_after)};
  }

  const std::uint32_t index = leaf.xmss_index();
  const Schedule* sched = governing_schedule(ts, leaf.not_before, index);
  if (!sched) {
    return {VerifyStatus::schedule_mismatch,
            "no schedule covers the certificate's validity start"};
  }
  const auto expected = index_for_time(*sched, ts.policy, leaf.not_before);
  if (!expected || *expected != index) {
    return {VerifyStatus::schedule_mismatch,
            "certificate index " + std::to_string(index) +
                " does not match the schedule slot for its validity start"};
  }
  return {VerifyStatus::accept, ""};
}

VerifyResult verify_peer_auth(const TrustStore& ts, BytesView leaf_der,
                              BytesView transcript, BytesView classical_sig,
                              std::uint64_t now) {
  VerifyResult leaf_result = verify_leaf(ts, leaf_der, now);
  if (!leaf_result.ok()) {
    return leaf_result;
  }
  const auto parsed = try_parse_cert(leaf_der);
  if (!ecdsa_p256_sha256().verify(parsed->cert.spki_key, transcript,
                                  classical_sig)) {
    return {VerifyStatus::bad_signature,
            "handshake signature does not verify under the leaf key"};
  }
  return {VerifyStatus::accept, ""};
}

}  // namespace hbsca
