// SPDX-License-Identifier: Apache-2.0
//
// XMSS (RFC 8391) over SHA-256: WOTS+ one-time signatures compressed through
// an L-tree under a Merkle tree. Key generation, signing and verification are
// pure functions; single-use index discipline is the keystore's job, the
// index is always supplied by the caller here.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "hbsca/bytes.hpp"

namespace hbsca {

struct XmssParams {
  std::uint32_t tree_height = 0;  // h: number of tree levels above the leaves
  std::uint32_t oid = 0;          // RFC 8391 numeric identifier

  static constexpr std::uint32_t hash_bytes = 32;  // n
  static constexpr std::uint32_t winternitz = 16;  // w
  static constexpr std::uint32_t wots_len = 67;    // len1 (64) + len2 (3)
  static constexpr std::size_t public_key_bytes = 68;
  static constexpr std::size_t keygen_entropy_bytes = 96;

  /// Supported heights: 10, 16, 20 (XMSS-SHA2_h_256) plus the toy height 4
  /// used by the simulator and exhaustive sweeps. Throws ParamError.
  static XmssParams from_height(std::uint32_t h);
  static std::optional<XmssParams> from_oid(std::uint32_t oid);
  /// Maps a serialized signature length back to its parameter set.
  static std::optional<XmssParams> from_signature_size(std::size_t bytes);

  std::uint32_t leaf_count() const { return std::uint32_t{1} << tree_height; }
  std::size_t signature_bytes() const {
    return 4 + hash_bytes + wots_len * hash_bytes + tree_height * hash_bytes;
  }
  std::size_t node_count() const { return (std::size_t{2} << tree_height) - 1; }

  bool operator==(const XmssParams&) const = default;
};

struct XmssPublicKey {
  std::uint32_t oid = 0;
  Hash256 root{};
  Hash256 pub_seed{};

  XmssParams params() const;
  Bytes encode() const;  // oid(4) || root(32) || pub_seed(32)
  static XmssPublicKey decode(BytesView bytes);
};

/// Every node of the Merkle tree, stored level by level from the leaves up.
/// 2^(h+1) - 1 hashes; about 4 MiB at h = 16.
class NodeCache {
 public:
  NodeCache() = default;
  NodeCache(std::uint32_t tree_height, std::vector<Hash256> nodes);

  const Hash256& node(std::uint32_t level, std::uint32_t index) const;
  Hash256& node(std::uint32_t level, std::uint32_t index);
  const Hash256& root() const { return node(height_, 0); }
  std::uint32_t height() const { return height_; }
  const std::vector<Hash256>& flat() const { return nodes_; }

  static NodeCache allocate(std::uint32_t tree_height);

 private:
  std::uint32_t height_ = 0;
  std::vector<Hash256> nodes_;
};

struct XmssSecret {
  XmssParams params;
  Hash256 sk_seed{};
  Hash256 sk_prf{};
  Hash256 pub_seed{};
  Hash256 root{};
  NodeCache cache;

  /// Recomputes every internal node from its children and compares. Slow on
  /// big trees; meant for load-time validation and tests.
  bool cache_consistent() const;
};

struct XmssSignature {
  std::uint32_t index = 0;
  Hash256 randomizer{};
  std::vector<Hash256> wots_sig;   // wots_len chains
  std::vector<Hash256> auth_path;  // h sibling nodes

  Bytes encode() const;  // index(4) || r || wots_sig || auth_path, big-endian
  static XmssSignature decode(BytesView bytes, const XmssParams& params);
};

struct XmssKeyPair {
  XmssPublicKey public_key;
  XmssSecret secret;
};

/// Deterministic key generation from 96 bytes of entropy
/// (sk_seed || sk_prf || pub_seed). `threads` 0 picks the hardware count.
XmssKeyPair xmss_keygen(const XmssParams& params, BytesView entropy,
                        unsigned threads = 0);

/// Signs with the given leaf. The caller guarantees single use of `index`.
XmssSignature xmss_sign(const XmssSecret& secret, std::uint32_t index,
                        BytesView message);

/// Total on arbitrary bytes: malformed input is a reject, never a throw.
bool xmss_verify(const XmssPublicKey& pk, BytesView message,
                 BytesView signature);

/// WOTS+ public key of leaf `index` compressed through the L-tree. Exposed so
/// key generation internals can be cross-checked leaf by leaf.
Hash256 xmss_leaf_hash(const XmssSecret& secret, std::uint32_t index);

}  // namespace hbsca
