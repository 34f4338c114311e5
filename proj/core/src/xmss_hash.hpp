// SPDX-License-Identifier: Apache-2.0
//
// Internal hash layer for XMSS over SHA-256: hash addresses, the keyed
// primitives F / H / H_msg / PRF, and randomized tree hashing. Hot paths run
// on raw SHA-256 compression calls with hand-built padding so the PRF costs a
// single block once its key prefix is absorbed into a reusable midstate.

#pragma once

#define OPENSSL_SUPPRESS_DEPRECATED 1

#include <openssl/sha.h>

#include <cstdint>
#include <cstring>

#include "hbsca/bytes.hpp"

namespace hbsca::xmss_detail {

// Domain separation tags, each encoded as toByte(tag, 32).
inline constexpr std::uint8_t kTagF = 0;
inline constexpr std::uint8_t kTagH = 1;
inline constexpr std::uint8_t kTagHMsg = 2;
inline constexpr std::uint8_t kTagPrf = 3;

inline void extract_digest(const SHA256_CTX& ctx, std::uint8_t out[32]) {
  for (int i = 0; i < 8; ++i) {
    store_u32(out + 4 * i, ctx.h[i]);
  }
}

// Hash address (RFC 8391 section 2.5): eight big-endian words.
class Address {
 public:
  enum Type : std::uint32_t { ots = 0, ltree = 1, hash_tree = 2 };

  void set_type(Type t) {
    words_[3] = t;
    words_[4] = words_[5] = words_[6] = words_[7] = 0;
  }
  void set_ots_address(std::uint32_t v) { words_[4] = v; }
  void set_chain_address(std::uint32_t v) { words_[5] = v; }
  void set_hash_address(std::uint32_t v) { words_[6] = v; }
  void set_ltree_address(std::uint32_t v) { words_[4] = v; }
  void set_tree_height(std::uint32_t v) { words_[5] = v; }
  void set_tree_index(std::uint32_t v) { words_[6] = v; }
  void set_key_and_mask(std::uint32_t v) { words_[7] = v; }

  void serialize(std::uint8_t out[32]) const {
    for (int i = 0; i < 8; ++i) {
      store_u32(out + 4 * i, words_[i]);
    }
  }

 private:
  std::uint32_t words_[8] = {};
};

// Midstate of SHA-256 after absorbing toByte(tag, 32) || key, which is
// exactly one block. Keyed calls then cost one compression each.
struct KeyedMidstate {
  SHA256_CTX ctx;

  KeyedMidstate() = default;
  KeyedMidstate(std::uint8_t tag, const std::uint8_t key[32]) {
    SHA256_Init(&ctx);
    std::uint8_t block[64] = {};
    block[31] = tag;
    std::memcpy(block + 32, key, 32);
    SHA256_Transform(&ctx, block);
  }
};

// Finishes a keyed call whose message is exactly 32 bytes
// (total input 96 bytes, so one padded block remains).
inline void keyed_finish32(const KeyedMidstate& mid, const std::uint8_t m[32],
                           std::uint8_t out[32]) {
  SHA256_CTX ctx = mid.ctx;
  std::uint8_t block[64] = {};
  std::memcpy(block, m, 32);
  block[32] = 0x80;
  store_u64(block + 56, 96 * 8);
  SHA256_Transform(&ctx, block);
  extract_digest(ctx, out);
}

/// PRF(key, m) with a 32-byte input; `mid` carries the key.
inline void prf(const KeyedMidstate& mid, const std::uint8_t in[32],
                std::uint8_t out[32]) {
  keyed_finish32(mid, in, out);
}

inline void prf_addr(const KeyedMidstate& mid, const Address& addr,
                     std::uint8_t out[32]) {
  std::uint8_t ser[32];
  addr.serialize(ser);
  keyed_finish32(mid, ser, out);
}

/// F(key, m): toByte(0,32) || key(32) || m(32); two compressions.
inline void hash_f(const std::uint8_t key[32], const std::uint8_t m[32],
                   std::uint8_t out[32]) {
  SHA256_CTX ctx;
  SHA256_Init(&ctx);
  std::uint8_t block[64] = {};
  block[31] = kTagF;
  std::memcpy(block + 32, key, 32);
  SHA256_Transform(&ctx, block);
  std::memset(block, 0, 64);
  std::memcpy(block, m, 32);
  block[32] = 0x80;
  store_u64(block + 56, 96 * 8);
  SHA256_Transform(&ctx, block);
  extract_digest(ctx, out);
}

/// H(key, m): toByte(1,32) || key(32) || m(64); three compressions.
inline void hash_h(const std::uint8_t key[32], const std::uint8_t m[64],
                   std::uint8_t out[32]) {
  SHA256_CTX ctx;
  SHA256_Init(&ctx);
  std::uint8_t block[64] = {};
  block[31] = kTagH;
  std::memcpy(block + 32, key, 32);
  SHA256_Transform(&ctx, block);
  SHA256_Transform(&ctx, m);
  std::memset(block, 0, 64);
  block[0] = 0x80;
  store_u64(block + 56, 128 * 8);
  SHA256_Transform(&ctx, block);
  extract_digest(ctx, out);
}

/// H_msg over a variable-length message, keyed by r || root || toByte(idx, 32).
inline Hash256 hash_msg(const std::uint8_t r[32], const std::uint8_t root[32],
                        std::uint32_t index, BytesView message) {
  SHA256_CTX ctx;
  SHA256_Init(&ctx);
  std::uint8_t prefix[32] = {};
  prefix[31] = kTagHMsg;
  SHA256_Update(&ctx, prefix, 32);
  SHA256_Update(&ctx, r, 32);
  SHA256_Update(&ctx, root, 32);
  std::uint8_t idx_bytes[32] = {};
  store_u32(idx_bytes + 28, index);
  SHA256_Update(&ctx, idx_bytes, 32);
  SHA256_Update(&ctx, message.data(), message.size());
  Hash256 out;
  SHA256_Final(out.data(), &ctx);
  return out;
}

/// RAND_HASH: hashes two child nodes with a PRF-derived key and bitmasks.
inline void rand_hash(const KeyedMidstate& seed, Address& addr,
                      const std::uint8_t left[32],
                      const std::uint8_t right[32], std::uint8_t out[32]) {
  std::uint8_t key[32];
  std::uint8_t masked[64];
  addr.set_key_and_mask(0);
  prf_addr(seed, addr, key);
  std::uint8_t bm[32];
  addr.set_key_and_mask(1);
  prf_addr(seed, addr, bm);
  for (int i = 0; i < 32; ++i) {
    masked[i] = left[i] ^ bm[i];
  }
  addr.set_key_and_mask(2);
  prf_addr(seed, addr, bm);
  for (int i = 0; i < 32; ++i) {
    masked[32 + i] = right[i] ^ bm[i];
  }
  hash_h(key, masked, out);
}

}  // namespace hbsca::xmss_detail
