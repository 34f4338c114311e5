// SPDX-License-Identifier: Apache-2.0
//
// Two-peer loopback authentication demo. The initiator signs random
// transcripts with its current leaf key; the responder validates the full
// chain (CA, newest schedule, leaf, classical signature) per round and the
// report totals the bytes a real peer would see per authentication.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace hbsca {

struct HandshakeReport {
  int rounds = 0;
  int accepted = 0;
  std::size_t leaf_der_bytes = 0;
  std::size_t xmss_signature_bytes = 0;
  double avg_classical_sig_bytes = 0.0;
  std::string first_failure;  // reason of the first rejected round, if any

  bool all_accepted() const { return accepted == rounds; }
  std::string text() const;
};

/// `initiator_dir` needs current_leaf.der and current_leaf.key;
/// `responder_dir` needs ca.der and the schedule files it has received.
HandshakeReport run_loopback_handshake(
    const std::filesystem::path& initiator_dir,
    const std::filesystem::path& responder_dir, int n_rounds,
    std::uint64_t now_s, std::uint64_t transcript_seed = 1);

}  // namespace hbsca
