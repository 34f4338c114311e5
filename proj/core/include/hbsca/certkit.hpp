// SPDX-License-Identifier: Apache-2.0
//
// Certificate profile: X.509-shaped DER with a fixed field order. Leaves
// carry an ECDSA P-256 key and are XMSS-signed by the CA; the CA certificate
// carries the 68-byte XMSS public key and signs itself with index 0. The
// inner TBS algorithm field names the leaf's own suite while the outer
// algorithm identifier is always the XMSS OID.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "hbsca/bytes.hpp"
#include "hbsca/keystore.hpp"
#include "hbsca/schedule.hpp"

namespace hbsca {

inline constexpr std::string_view kXmssAlgorithmOid = "1.3.6.1.5.5.7.6.34";

struct ClassicalKeyPair {
  Bytes public_key;  // uncompressed P-256 point, 65 bytes
  Bytes secret_key;  // 32-byte scalar
};

/// A pluggable classical signature suite; exactly one ships today.
struct ClassicalSuite {
  std::string id;
  std::function<ClassicalKeyPair()> keygen;
  std::function<Bytes(BytesView secret, BytesView message)> sign;
  std::function<bool(BytesView public_key, BytesView message, BytesView sig)>
      verify;
};

const ClassicalSuite& ecdsa_p256_sha256();

enum class SpkiKind { ecdsa_p256, xmss };

struct Certificate {
  std::uint64_t serial = 0;  // equals the XMSS index, a redundant cross-check
  std::string issuer_cn;
  std::string subject_cn;
  std::uint64_t not_before = 0;
  std::uint64_t not_after = 0;
  SpkiKind spki_kind = SpkiKind::ecdsa_p256;
  Bytes spki_key;
  std::string san_dns;
  Bytes xmss_signature;  // raw signature bytes; empty until signed

  /// Leaf index embedded in the first four signature bytes.
  std::uint32_t xmss_index() const;
};

Bytes encode_tbs(const Certificate& cert);
Bytes encode_cert(const Certificate& cert);

struct ParsedCertificate {
  Certificate cert;
  Bytes tbs;  // exact TBS bytes the XMSS signature covers
};

/// Strict parse of the modeled profile. Throws FormatError with the byte
/// position of the first offence; unknown OIDs are offences.
ParsedCertificate parse_cert(BytesView der_bytes);

/// Total variant for untrusted input.
std::optional<ParsedCertificate> try_parse_cert(BytesView der_bytes,
                                                std::string* error = nullptr,
                                                std::size_t* position = nullptr);

struct LeafProfile {
  std::string issuer_cn = "ExampleCA";
  std::string subject_cn = "ECDSACrt";
  std::string san_dns = "example.com";
};

/// CA certificate body (unsigned): self-issued, serial 0, XMSS key inside.
Certificate make_ca_template(const XmssPublicKey& key,
                             const std::string& common_name,
                             const std::string& san_dns, std::uint64_t now,
                             std::uint64_t lifetime_seconds);

struct IndexMismatch {
  std::uint32_t requested = 0;
  std::string detail;
};

/// Builds and signs the leaf for `index`. The certificate becomes valid at
/// its scheduled slot even when signed up to one overlap window early; any
/// index/time disagreement is reported instead of signed.
std::variant<Certificate, IndexMismatch> issue_leaf(
    KeyStore& store, const Schedule& schedule, const IssuancePolicy& policy,
    std::uint32_t index, BytesView classical_public_key, std::uint64_t now,
    const LeafProfile& profile = {});

Bytes authenticate_handshake(const ClassicalSuite& suite, BytesView leaf_secret,
                             BytesView transcript);

enum class HandshakeVerdict { accept, expired, not_yet_valid, bad_signature };
std::string_view to_string(HandshakeVerdict verdict);

HandshakeVerdict verify_handshake(const ClassicalSuite& suite,
                                  const Certificate& leaf, BytesView transcript,
                                  BytesView signature, std::uint64_t now);

/// Tabular rendering: field, value, encoded size per row.
std::string format_cert(const ParsedCertificate& parsed);

}  // namespace hbsca
