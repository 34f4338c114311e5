// SPDX-License-Identifier: Apache-2.0

#include "hbsca/handshake.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "hbsca/certkit.hpp"
#include "hbsca/errors.hpp"
#include "hbsca/verifier.hpp"

namespace hbsca {

namespace {

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  return Bytes(std::istreambuf_iterator<char>(in),
               std::istreambuf_iterator<char>());
}

TrustStore responder_trust_store(const std::filesystem::path& dir) {
  TrustStore ts = make_trust_store(read_file(dir / "ca.der"));
  std::vector<Schedule> schedules;
  std::vector<Bytes> raw;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".sched") {
      raw.push_back(read_file(entry.path()));
    }
  }
  std::sort(raw.begin(), raw.end(),
            [](const Bytes& a, const Bytes& b) {
              return Schedule::decode(a).signing_index() <
                     Schedule::decode(b).signing_index();
            });
  for (const Bytes& bytes : raw) {
    ingest_schedule(ts, bytes);
  }
  return ts;
}

}  // namespace

std::string HandshakeReport::text() const {
  std::ostringstream out;
  out << "handshake rounds " << rounds << ", accepted " << accepted << "\n";
  out << "bytes on wire per authentication: leaf certificate "
      << leaf_der_bytes << " (carries one " << xmss_signature_bytes
      << "-byte XMSS signature) + classical signature ~"
      << static_cast<int>(avg_classical_sig_bytes + 0.5) << "\n";
  out << "signing every handshake with the hash-based key instead would "
         "add "
      << xmss_signature_bytes << " bytes per round and consume one one-time "
      << "key each\n";
  if (!first_failure.empty()) {
    out << "first failure: " << first_failure << "\n";
  }
  return out.str();
}

HandshakeReport run_loopback_handshake(
    const std::filesystem::path& initiator_dir,
    const std::filesystem::path& responder_dir, int n_rounds,
    std::uint64_t now_s, std::uint64_t transcript_seed) {
  const Bytes leaf_der = read_file(initiator_dir / "current_leaf.der");
  const Bytes leaf_key = read_file(initiator_dir / "current_leaf.key");
  const TrustStore ts = responder_trust_store(responder_dir);
  const ClassicalSuite& suite = ecdsa_p256_sha256();

  HandshakeReport report;
  report.rounds = n_rounds;
  report.leaf_der_bytes = leaf_der.size();
  report.xmss_signature_bytes =
      parse_cert(leaf_der).cert.xmss_signature.size();

  std::mt19937_64 rng(transcript_seed);
  std::size_t sig_bytes_total = 0;
  for (int round = 0; round < n_rounds; ++round) {
    Bytes transcript(64);
    for (auto& b : transcript) {
      b = static_cast<std::uint8_t>(rng());
    }
    const Bytes sig = authenticate_handshake(suite, leaf_key, transcript);
    sig_bytes_total += sig.size();
    const VerifyResult result =
        verify_peer_auth(ts, leaf_der, transcript, sig, now_s);
    if (result.ok()) {
      ++report.accepted;
    } else if (report.first_failure.empty()) {
      report.first_failure =
          std::string(to_string(result.status)) + ": " + result.reason;
    }
  }
  if (n_rounds > 0) {
    report.avg_classical_sig_bytes =
        static_cast<double>(sig_bytes_total) / n_rounds;
  }
  return report;
}

}  // namespace hbsca
