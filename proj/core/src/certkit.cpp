// SPDX-License-Identifier: Apache-2.0

#include "hbsca/certkit.hpp"

#include <sstream>

#include "hbsca/der.hpp"
#include "hbsca/errors.hpp"

namespace hbsca {

namespace {

constexpr std::string_view kOidCommonName = "2.5.4.3";
constexpr std::string_view kOidEcdsaWithSha256 = "1.2.840.10045.4.3.2";
constexpr std::string_view kOidEcPublicKey = "1.2.840.10045.2.1";
constexpr std::string_view kOidPrime256v1 = "1.2.840.10045.3.1.7";
constexpr std::string_view kOidSubjectAltName = "2.5.29.17";

constexpr std::size_t kP256PointBytes = 65;

Bytes name_rdn(const std::string& cn) {
  const Bytes attr = der::sequence(
      {der::oid(kOidCommonName), der::printable_string(cn)});
  return der::sequence({der::set({attr})});
}

Bytes inner_algorithm(SpkiKind kind) {
  // Mirrors the emitted layout: the TBS names the subject's own suite, the
  // outer identifier carries the XMSS OID.
  if (kind == SpkiKind::ecdsa_p256) {
    return der::sequence({der::oid(kOidEcdsaWithSha256)});
  }
  return der::sequence({der::oid(kXmssAlgorithmOid)});
}

Bytes spki(const Certificate& cert) {
  Bytes alg;
  if (cert.spki_kind == SpkiKind::ecdsa_p256) {
    alg = der::sequence({der::oid(kOidEcPublicKey), der::oid(kOidPrime256v1)});
  } else {
    alg = der::sequence({der::oid(kXmssAlgorithmOid)});
  }
  return der::sequence({alg, der::bit_string(cert.spki_key)});
}

Bytes san_extension(const std::string& dns) {
  const Bytes general_name = der::context_primitive(
      2, BytesView(reinterpret_cast<const std::uint8_t*>(dns.data()),
                   dns.size()));
  const Bytes general_names = der::sequence({general_name});
  return der::sequence(
      {der::oid(kOidSubjectAltName), der::octet_string(general_names)});
}

std::string cn_of(const der::Tlv& name_tlv) {
  der::Reader name(name_tlv.content, name_tlv.position + name_tlv.total_size -
                                         name_tlv.content.size());
  const auto set = name.expect(der::kSet, "RDN SET");
  name.finish("name");
  der::Reader rdn(set.content, set.position + set.total_size -
                                   set.content.size());
  const auto attr = rdn.expect(der::kSequence, "attribute");
  rdn.finish("RDN");
  der::Reader kv(attr.content, attr.position + attr.total_size -
                                   attr.content.size());
  const auto type = kv.expect(der::kOid, "attribute type");
  if (der::parse_oid(type) != kOidCommonName) {
    throw FormatError("unsupported name attribute", type.position);
  }
  const auto value = kv.expect(der::kPrintableString, "common name");
  kv.finish("attribute");
  return der::parse_printable_string(value);
}

der::Reader content_reader(const der::Tlv& tlv) {
  return der::Reader(tlv.content, tlv.position + tlv.total_size -
                                      tlv.content.size());
}

}  // namespace

std::uint32_t Certificate::xmss_index() const {
  if (xmss_signature.size() < 4) {
    throw StateError("certificate has no XMSS signature");
  }
  return load_u32(xmss_signature, 0);
}

Bytes encode_tbs(const Certificate& cert) {
  const Bytes version = der::context(0, der::integer(2));  // X.509 v3
  const Bytes serial = der::integer(cert.serial);
  const Bytes algorithm = inner_algorithm(cert.spki_kind);
  const Bytes issuer = name_rdn(cert.issuer_cn);
  const Bytes validity =
      der::sequence({der::generalized_time(cert.not_before),
                     der::generalized_time(cert.not_after)});
  const Bytes subject = name_rdn(cert.subject_cn);
  const Bytes key_info = spki(cert);
  const Bytes extensions =
      der::context(3, der::sequence({san_extension(cert.san_dns)}));
  return der::sequence({version, serial, algorithm, issuer, validity, subject,
                        key_info, extensions});
}

Bytes encode_cert(const Certificate& cert) {
  if (cert.xmss_signature.empty()) {
    throw StateError("cannot encode an unsigned certificate");
  }
  return der::sequence({encode_tbs(cert),
                        der::sequence({der::oid(kXmssAlgorithmOid)}),
                        der::bit_string(cert.xmss_signature)});
}

ParsedCertificate parse_cert(BytesView der_bytes) {
  der::Reader top(der_bytes);
  const auto outer = top.expect(der::kSequence, "certificate SEQUENCE");
  top.finish("certificate");

  auto body = content_reader(outer);
  const auto tbs = body.expect(der::kSequence, "TBS SEQUENCE");
  const auto sig_alg = body.expect(der::kSequence, "signature algorithm");
  const auto sig_bits = body.expect(der::kBitString, "signature BIT STRING");
  body.finish("certificate body");

  {
    auto alg = content_reader(sig_alg);
    const auto alg_oid = alg.expect(der::kOid, "algorithm OID");
    alg.finish("signature algorithm");
    if (der::parse_oid(alg_oid) != kXmssAlgorithmOid) {
      throw FormatError("unknown outer signature algorithm",
                        alg_oid.position);
    }
  }

  ParsedCertificate out;
  out.tbs.assign(der_bytes.begin() + tbs.position,
                 der_bytes.begin() + tbs.position + tbs.total_size);

  auto fields = content_reader(tbs);
  const auto version = fields.next();
  if (version.tag != 0xa0) {
    throw FormatError("expected [0] version", version.position);
  }
  {
    auto v = content_reader(version);
    const auto vint = v.expect(der::kInteger, "version INTEGER");
    v.finish("version");
    if (der::parse_integer_u64(vint) != 2) {
      throw FormatError("only X.509 v3 is supported", vint.position);
    }
  }

  Certificate& cert = out.cert;
  cert.serial = der::parse_integer_u64(
      fields.expect(der::kInteger, "serial number"));

  const auto inner_alg = fields.expect(der::kSequence, "TBS algorithm");
  std::string inner_oid;
  {
    auto alg = content_reader(inner_alg);
    inner_oid = der::parse_oid(alg.expect(der::kOid, "TBS algorithm OID"));
    alg.finish("TBS algorithm");
    if (inner_oid != kOidEcdsaWithSha256 && inner_oid != kXmssAlgorithmOid) {
      throw FormatError("unknown TBS signature algorithm", inner_alg.position);
    }
  }

  cert.issuer_cn = cn_of(fields.expect(der::kSequence, "issuer"));

  {
    const auto validity = fields.expect(der::kSequence, "validity");
    auto v = content_reader(validity);
    cert.not_before = der::parse_generalized_time(
        v.expect(der::kGeneralizedTime, "notBefore"));
    cert.not_after = der::parse_generalized_time(
        v.expect(der::kGeneralizedTime, "notAfter"));
    v.finish("validity");
    if (cert.not_after < cert.not_before) {
      throw FormatError("notAfter precedes notBefore", validity.position);
    }
  }

  cert.subject_cn = cn_of(fields.expect(der::kSequence, "subject"));

  {
    const auto key_info = fields.expect(der::kSequence, "SPKI");
    auto k = content_reader(key_info);
    const auto alg = k.expect(der::kSequence, "SPKI algorithm");
    auto a = content_reader(alg);
    const std::string key_oid = der::parse_oid(a.expect(der::kOid, "key OID"));
    if (key_oid == kOidEcPublicKey) {
      const auto curve = a.expect(der::kOid, "curve OID");
      if (der::parse_oid(curve) != kOidPrime256v1) {
        throw FormatError("unsupported curve", curve.position);
      }
      cert.spki_kind = SpkiKind::ecdsa_p256;
    } else if (key_oid == kXmssAlgorithmOid) {
      cert.spki_kind = SpkiKind::xmss;
    } else {
      throw FormatError("unknown subject key algorithm", alg.position);
    }
    a.finish("SPKI algorithm");
    const auto key_bits = k.expect(der::kBitString, "subject key");
    k.finish("SPKI");
    const BytesView key = der::parse_bit_string(key_bits);
    if (cert.spki_kind == SpkiKind::ecdsa_p256) {
      if (key.size() != kP256PointBytes || key[0] != 0x04) {
        throw FormatError("subject key is not an uncompressed P-256 point",
                          key_bits.position);
      }
    } else if (key.size() != XmssParams::public_key_bytes) {
      throw FormatError("subject key is not a 68-byte XMSS key",
                        key_bits.position);
    }
    cert.spki_key.assign(key.begin(), key.end());
  }

  // The suite named in the TBS must match the subject key type.
  if ((cert.spki_kind == SpkiKind::ecdsa_p256) !=
      (inner_oid == kOidEcdsaWithSha256)) {
    throw FormatError("TBS algorithm does not match subject key",
                      inner_alg.position);
  }

  {
    const auto extensions = fields.next();
    if (extensions.tag != 0xa3) {
      throw FormatError("expected [3] extensions", extensions.position);
    }
    auto e = content_reader(extensions);
    const auto list = e.expect(der::kSequence, "extension list");
    e.finish("extensions");
    auto items = content_reader(list);
    const auto ext = items.expect(der::kSequence, "extension");
    items.finish("extension list");
    auto x = content_reader(ext);
    const auto ext_oid = x.expect(der::kOid, "extension OID");
    if (der::parse_oid(ext_oid) != kOidSubjectAltName) {
      throw FormatError("unknown extension", ext_oid.position);
    }
    const auto value = x.expect(der::kOctetString, "extension value");
    x.finish("extension");
    der::Reader names(value.content, value.position + value.total_size -
                                         value.content.size());
    const auto general_names = names.expect(der::kSequence, "GeneralNames");
    names.finish("extension value");
    auto g = content_reader(general_names);
    const auto dns = g.next();
    if (dns.tag != 0x82) {
      throw FormatError("expected dNSName", dns.position);
    }
    g.finish("GeneralNames");
    cert.san_dns.assign(dns.content.begin(), dns.content.end());
  }
  fields.finish("TBS");

  const BytesView sig = der::parse_bit_string(sig_bits);
  if (!XmssParams::from_signature_size(sig.size())) {
    throw FormatError("signature length matches no XMSS parameter set",
                      sig_bits.position);
  }
  cert.xmss_signature.assign(sig.begin(), sig.end());
  if (cert.serial != cert.xmss_index()) {
    throw FormatError("serial number does not equal the XMSS index",
                      sig_bits.position);
  }
  return out;
}

std::optional<ParsedCertificate> try_parse_cert(BytesView der_bytes,
                                                std::string* error,
                                                std::size_t* position) {
  try {
    return parse_cert(der_bytes);
  } catch (const FormatError& e) {
    if (error) *error = e.what();
    if (position) *position = e.position;
    return std::nullopt;
  }
}

Certificate make_ca_template(const XmssPublicKey& key,
                             const std::string& common_name,
                             const std::string& san_dns, std::uint64_t now,
                             std::uint64_t lifetime_seconds) {
  Certificate cert;
  cert.serial = 0;  // self-signed with index 0
  cert.issuer_cn = common_name;
  cert.subject_cn = common_name;
  cert.not_before = now;
  cert.not_after = now + lifetime_seconds;
  cert.spki_kind = SpkiKind::xmss;
  cert.spki_key = key.encode();
  cert.san_dns = san_dns;
  return cert;
}

std::variant<Certificate, IndexMismatch> issue_leaf(
    KeyStore& store, const Schedule& schedule, const IssuancePolicy& policy,
    std::uint32_t index, BytesView classical_public_key, std::uint64_t now,
    const LeafProfile& profile) {
  if (index < schedule.start_index || index >= schedule.max_index) {
    return IndexMismatch{index, "index outside the schedule range"};
  }
  const std::uint64_t slot = issue_time_for_index(schedule, policy, index);
  const auto current = index_for_time(schedule, policy, now);
  const std::uint64_t overlap_s =
      static_cast<std::uint64_t>(policy.overlap_minutes) * 60;
  const bool in_slot = current && *current == index;
  const bool in_lead = slot > now && slot - now <= overlap_s;
  if (!in_slot && !in_lead) {
    std::ostringstream detail;
    detail << "index " << index << " is scheduled at " << slot
           << " but the time is " << now;
    return IndexMismatch{index, detail.str()};
  }

  Certificate cert;
  cert.serial = index;
  cert.issuer_cn = profile.issuer_cn;
  cert.subject_cn = profile.subject_cn;
  cert.san_dns = profile.san_dns;
  cert.not_before = slot;  // valid from the scheduled slot, even if early
  cert.not_after = slot + std::uint64_t{schedule.validity_minutes} * 60;
  cert.spki_kind = SpkiKind::ecdsa_p256;
  cert.spki_key.assign(classical_public_key.begin(),
                       classical_public_key.end());
  cert.xmss_signature =
      store.sign_with_reserved(index, encode_tbs(cert)).encode();
  return cert;
}

Bytes authenticate_handshake(const ClassicalSuite& suite,
                             BytesView leaf_secret, BytesView transcript) {
  return suite.sign(leaf_secret, transcript);
}

std::string_view to_string(HandshakeVerdict verdict) {
  switch (verdict) {
    case HandshakeVerdict::accept: return "accept";
    case HandshakeVerdict::expired: return "expired";
    case HandshakeVerdict::not_yet_valid: return "not-yet-valid";
    case HandshakeVerdict::bad_signature: return "bad-signature";
  }
  return "?";
}

HandshakeVerdict verify_handshake(const ClassicalSuite& suite,
                                  const Certificate& leaf, BytesView transcript,
                                  BytesView signature, std::uint64_t now) {
  if (now > leaf.not_after) {
    return HandshakeVerdict::expired;
  }
  if (now < leaf.not_before) {
    return HandshakeVerdict::not_yet_valid;
  }
  if (!suite.verify(leaf.spki_key, transcript, signature)) {
    return HandshakeVerdict::bad_signature;
  }
  return HandshakeVerdict::accept;
}

std::string format_cert(const ParsedCertificate& parsed) {
  const Certificate& c = parsed.cert;

  // Recover encoded sizes by re-encoding the individual fields.
  const Bytes serial = der::integer(c.serial);
  const Bytes algorithm = inner_algorithm(c.spki_kind);
  const Bytes issuer_attr = der::sequence(
      {der::oid(kOidCommonName), der::printable_string(c.issuer_cn)});
  const Bytes subject_attr = der::sequence(
      {der::oid(kOidCommonName), der::printable_string(c.subject_cn)});
  const Bytes key_bits = der::bit_string(c.spki_key);
  const Bytes san = san_extension(c.san_dns);
  const Bytes outer_alg = der::sequence({der::oid(kXmssAlgorithmOid)});
  const Bytes sig_bits = der::bit_string(c.xmss_signature);

  auto time_text = [](std::uint64_t t) {
    const Bytes enc = der::generalized_time(t);
    std::string s(enc.begin() + 2, enc.end() - 1);
    return s.substr(0, 4) + "-" + s.substr(4, 2) + "-" + s.substr(6, 2) + " " +
           s.substr(8, 2) + ":" + s.substr(10, 2) + ":" + s.substr(12, 2);
  };

  std::ostringstream out;
  auto row = [&](const std::string& field, const std::string& value,
                 std::size_t size) {
    out << field;
    for (std::size_t i = field.size(); i < 26; ++i) out << ' ';
    out << value;
    for (std::size_t i = value.size(); i < 36; ++i) out << ' ';
    out << size << "\n";
  };
  row("Certificate Field", "Value", 0);
  row("Version", "3", 3);
  row("Serial Number", std::to_string(c.serial), serial.size());
  row("Signature Algorithm",
      c.spki_kind == SpkiKind::ecdsa_p256 ? "ecdsaWithSHA256"
                                          : std::string(kXmssAlgorithmOid),
      algorithm.size() - 2);
  row("Issuer", "CN=" + c.issuer_cn, issuer_attr.size());
  row("Validity", "Not Before: " + time_text(c.not_before), 15);
  row("", "Not After:  " + time_text(c.not_after), 15);
  row("Subject", "CN=" + c.subject_cn, subject_attr.size());
  if (c.spki_kind == SpkiKind::ecdsa_p256) {
    row("Subject Public Key Info:", "Algorithm: Elliptic Curve", 7);
    row("", "Key Parameters: secp256r1", 8);
  } else {
    row("Subject Public Key Info:", "Algorithm: " +
        std::string(kXmssAlgorithmOid), 8);
  }
  row("", "Public Key: [BIT STRING]", key_bits.size() - 2);
  row("Extensions", "X509v3 Subject Alternative Name:", san.size());
  row("", "  DNS: " + c.san_dns, c.san_dns.size() + 2);
  row("Algorithm ID", std::string(kXmssAlgorithmOid), outer_alg.size());
  row("Signature", "[BIT STRING]", sig_bits.size() - 2);
  return out.str();
}

}  // namespace hbsca
