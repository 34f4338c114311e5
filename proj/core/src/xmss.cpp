// SPDX-License-Identifier: Apache-2.0

#include "hbsca/xmss.hpp"

#include <algorithm>
#include <cstring>
#include <future>
#include <thread>

#include "hbsca/errors.hpp"
#include "xmss_hash.hpp"

namespace hbsca {

namespace {

using xmss_detail::Address;
using xmss_detail::KeyedMidstate;

constexpr std::uint32_t kOidSha2_10_256 = 0x00000001;
constexpr std::uint32_t kOidSha2_16_256 = 0x00000002;
constexpr std::uint32_t kOidSha2_20_256 = 0x00000003;
// Private-use identifier for the toy height used by simulator runs and
// exhaustive sweeps; not part of the standard registry.
constexpr std::uint32_t kOidToy_4_256 = 0x7f000004;

constexpr std::uint32_t kWinternitz = XmssParams::winternitz;  // 16
constexpr std::uint32_t kLen1 = 64;
constexpr std::uint32_t kLen2 = 3;
constexpr std::uint32_t kLen = XmssParams::wots_len;  // 67

static_assert(kLen1 + kLen2 == kLen);

using WotsDigits = std::array<std::uint8_t, kLen>;

// Base-16 digits of the message hash plus the three checksum digits
// (RFC 8391 WOTS_sign/WOTS_pkFromSig preamble).
WotsDigits wots_digits(const Hash256& msg) {
  WotsDigits d{};
  std::uint32_t checksum = 0;
  for (std::uint32_t i = 0; i < 32; ++i) {
    d[2 * i] = msg[i] >> 4;
    d[2 * i + 1] = msg[i] & 0x0f;
  }
  for (std::uint32_t i = 0; i < kLen1; ++i) {
    checksum += kWinternitz - 1 - d[i];
  }
  checksum <<= 4;  // left-align len2 * lg(w) = 12 bits in two bytes
  d[kLen1] = static_cast<std::uint8_t>((checksum >> 8) >> 4);
  d[kLen1 + 1] = static_cast<std::uint8_t>((checksum >> 8) & 0x0f);
  d[kLen1 + 2] = static_cast<std::uint8_t>((checksum & 0xff) >> 4);
  return d;
}

// WOTS+ chain: applies `steps` rounds of F starting at position `start`.
void chain(std::uint8_t value[32], std::uint32_t start, std::uint32_t steps,
           const KeyedMidstate& pub_seed, Address& addr) {
  std::uint8_t key[32];
  std::uint8_t bm[32];
  for (std::uint32_t i = start; i < start + steps; ++i) {
    addr.set_hash_address(i);
    addr.set_key_and_mask(0);
    xmss_detail::prf_addr(pub_seed, addr, key);
    addr.set_key_and_mask(1);
    xmss_detail::prf_addr(pub_seed, addr, bm);
    for (int b = 0; b < 32; ++b) {
      value[b] ^= bm[b];
    }
    xmss_detail::hash_f(key, value, value);
  }
}

// Per-leaf WOTS+ secret elements: seed = PRF(sk_seed, OTS address), then
// sk[j] = PRF(seed, toByte(j, 32)).
std::vector<Hash256> wots_secret(const Hash256& sk_seed, std::uint32_t leaf) {
  Address addr;
  addr.set_type(Address::ots);
  addr.set_ots_address(leaf);
  KeyedMidstate sk_mid(xmss_detail::kTagPrf, sk_seed.data());
  Hash256 ots_seed;
  xmss_detail::prf_addr(sk_mid, addr, ots_seed.data());

  KeyedMidstate expand(xmss_detail::kTagPrf, ots_seed.data());
  std::vector<Hash256> sk(kLen);
  std::uint8_t counter[32] = {};
  for (std::uint32_t j = 0; j < kLen; ++j) {
    store_u32(counter + 28, j);
    xmss_detail::prf(expand, counter, sk[j].data());
  }
  return sk;
}

// Compresses the 67 WOTS+ chain ends into one leaf value.
Hash256 ltree(std::vector<Hash256>& pk, const KeyedMidstate& pub_seed,
              std::uint32_t leaf) {
  Address addr;
  addr.set_type(Address::ltree);
  addr.set_ltree_address(leaf);
  std::uint32_t n = kLen;
  std::uint32_t height = 0;
  while (n > 1) {
    addr.set_tree_height(height);
    for (std::uint32_t i = 0; i < n / 2; ++i) {
      addr.set_tree_index(i);
      xmss_detail::rand_hash(pub_seed, addr, pk[2 * i].data(),
                             pk[2 * i + 1].data(), pk[i].data());
    }
    if (n & 1) {
      pk[n / 2] = pk[n - 1];
    }
    n = (n + 1) / 2;
    ++height;
  }
  return pk[0];
}

Hash256 compute_leaf(const Hash256& sk_seed, const KeyedMidstate& pub_seed,
                     std::uint32_t leaf) {
  auto sk = wots_secret(sk_seed, leaf);
  Address addr;
  addr.set_type(Address::ots);
  addr.set_ots_address(leaf);
  for (std::uint32_t j = 0; j < kLen; ++j) {
    addr.set_chain_address(j);
    chain(sk[j].data(), 0, kWinternitz - 1, pub_seed, addr);
  }
  return ltree(sk, pub_seed, leaf);
}

void hash_children(const KeyedMidstate& pub_seed, std::uint32_t child_level,
                   std::uint32_t parent_index, const Hash256& left,
                   const Hash256& right, Hash256& out) {
  Address addr;
  addr.set_type(Address::hash_tree);
  addr.set_tree_height(child_level);
  addr.set_tree_index(parent_index);
  xmss_detail::rand_hash(pub_seed, addr, left.data(), right.data(),
                         out.data());
}

}  // namespace

XmssParams XmssParams::from_height(std::uint32_t h) {
  XmssParams p;
  p.tree_height = h;
  switch (h) {
    case 10: p.oid = kOidSha2_10_256; break;
    case 16: p.oid = kOidSha2_16_256; break;
    case 20: p.oid = kOidSha2_20_256; break;
    case 4: p.oid = kOidToy_4_256; break;
    default:
      throw ParamError("unsupported XMSS tree height " + std::to_string(h));
  }
  return p;
}

std::optional<XmssParams> XmssParams::from_oid(std::uint32_t oid) {
  switch (oid) {
    case kOidSha2_10_256: return from_height(10);
    case kOidSha2_16_256: return from_height(16);
    case kOidSha2_20_256: return from_height(20);
    case kOidToy_4_256: return from_height(4);
    default: return std::nullopt;
  }
}

std::optional<XmssParams> XmssParams::from_signature_size(std::size_t bytes) {
  for (std::uint32_t h : {4u, 10u, 16u, 20u}) {
    auto p = from_height(h);
    if (p.signature_bytes() == bytes) {
      return p;
    }
  }
  return std::nullopt;
}

XmssParams XmssPublicKey::params() const {
  auto p = XmssParams::from_oid(oid);
  if (!p) {
    throw ParamError("unknown XMSS oid");
  }
  return *p;
}

Bytes XmssPublicKey::encode() const {
  Bytes out;
  out.reserve(XmssParams::public_key_bytes);
  put_u32(out, oid);
  out.insert(out.end(), root.begin(), root.end());
  out.insert(out.end(), pub_seed.begin(), pub_seed.end());
  return out;
}

XmssPublicKey XmssPublicKey::decode(BytesView bytes) {
  if (bytes.size() != XmssParams::public_key_bytes) {
    throw FormatError("XMSS public key must be 68 bytes", bytes.size());
  }
  XmssPublicKey pk;
  pk.oid = load_u32(bytes, 0);
  if (!XmssParams::from_oid(pk.oid)) {
    throw FormatError("unknown XMSS parameter identifier", 0);
  }
  std::copy_n(bytes.begin() + 4, 32, pk.root.begin());
  std::copy_n(bytes.begin() + 36, 32, pk.pub_seed.begin());
  return pk;
}

NodeCache::NodeCache(std::uint32_t tree_height, std::vector<Hash256> nodes)
    : height_(tree_height), nodes_(std::move(nodes)) {
  if (nodes_.size() != (std::size_t{2} << height_) - 1) {
    throw ParamError("node cache size does not match tree height");
  }
}

NodeCache NodeCache::allocate(std::uint32_t tree_height) {
  NodeCache c;
  c.height_ = tree_height;
  c.nodes_.resize((std::size_t{2} << tree_height) - 1);
  return c;
}

// Levels are stored bottom-up: level 0 (2^h leaves) first.
const Hash256& NodeCache::node(std::uint32_t level, std::uint32_t index) const {
  return const_cast<NodeCache*>(this)->node(level, index);
}

Hash256& NodeCache::node(std::uint32_t level, std::uint32_t index) {
  const std::size_t level_size = std::size_t{1} << (height_ - level);
  const std::size_t offset =
      (std::size_t{2} << height_) - (level_size << 1);
  return nodes_.at(offset + index);
}

bool XmssSecret::cache_consistent() const {
  if (cache.height() != params.tree_height) {
    return false;
  }
  KeyedMidstate seed(xmss_detail::kTagPrf, pub_seed.data());
  for (std::uint32_t level = 0; level < params.tree_height; ++level) {
    const std::uint32_t parents = 1u << (params.tree_height - level - 1);
    for (std::uint32_t i = 0; i < parents; ++i) {
      Hash256 expect;
      hash_children(seed, level, i, cache.node(level, 2 * i),
                    cache.node(level, 2 * i + 1), expect);
      if (expect != cache.node(level + 1, i)) {
        return false;
      }
    }
  }
  return root == cache.root();
}

Bytes XmssSignature::encode() const {
  Bytes out;
  out.reserve(4 + 32 + wots_sig.size() * 32 + auth_path.size() * 32);
  put_u32(out, index);
  out.insert(out.end(), randomizer.begin(), randomizer.end());
  for (const auto& block : wots_sig) {
    out.insert(out.end(), block.begin(), block.end());
  }
  for (const auto& node : auth_path) {
    out.insert(out.end(), node.begin(), node.end());
  }
  return out;
}

XmssSignature XmssSignature::decode(BytesView bytes,
                                    const XmssParams& params) {
  if (bytes.size() != params.signature_bytes()) {
    throw FormatError("XMSS signature has wrong length", bytes.size());
  }
  XmssSignature sig;
  sig.index = load_u32(bytes, 0);
  if (sig.index >= params.leaf_count()) {
    throw FormatError("XMSS signature index out of range", 0);
  }
  std::size_t off = 4;
  std::copy_n(bytes.begin() + off, 32, sig.randomizer.begin());
  off += 32;
  sig.wots_sig.resize(kLen);
  for (auto& block : sig.wots_sig) {
    std::copy_n(bytes.begin() + off, 32, block.begin());
    off += 32;
  }
  sig.auth_path.resize(params.tree_height);
  for (auto& node : sig.auth_path) {
    std::copy_n(bytes.begin() + off, 32, node.begin());
    off += 32;
  }
  return sig;
}

Hash256 xmss_leaf_hash(const XmssSecret& secret, std::uint32_t index) {
  KeyedMidstate seed(xmss_detail::kTagPrf, secret.pub_seed.data());
  return compute_leaf(secret.sk_seed, seed, index);
}

XmssKeyPair xmss_keygen(const XmssParams& params, BytesView entropy,
                        unsigned threads) {
  if (!XmssParams::from_oid(params.oid) ||
      XmssParams::from_oid(params.oid)->tree_height != params.tree_height) {
    throw ParamError("invalid XMSS parameter set");
  }
  if (entropy.size() != XmssParams::keygen_entropy_bytes) {
    throw ParamError("keygen needs exactly 96 bytes of entropy");
  }

  XmssSecret secret;
  secret.params = params;
  std::copy_n(entropy.begin(), 32, secret.sk_seed.begin());
  std::copy_n(entropy.begin() + 32, 32, secret.sk_prf.begin());
  std::copy_n(entropy.begin() + 64, 32, secret.pub_seed.begin());
  secret.cache = NodeCache::allocate(params.tree_height);

  const std::uint32_t leaves = params.leaf_count();
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = std::min<unsigned>(threads, leaves);

  auto fill_range = [&](std::uint32_t begin, std::uint32_t end) {
    KeyedMidstate seed(xmss_detail::kTagPrf, secret.pub_seed.data());
    for (std::uint32_t i = begin; i < end; ++i) {
      secret.cache.node(0, i) = compute_leaf(secret.sk_seed, seed, i);
    }
  };
  if (threads <= 1) {
    fill_range(0, leaves);
  } else {
    std::vector<std::future<void>> work;
    const std::uint32_t chunk = (leaves + threads - 1) / threads;
    for (std::uint32_t begin = 0; begin < leaves; begin += chunk) {
      const std::uint32_t end = std::min(leaves, begin + chunk);
      work.push_back(
          std::async(std::launch::async, fill_range, begin, end));
    }
    for (auto& f : work) {
      f.get();
    }
  }

  KeyedMidstate seed(xmss_detail::kTagPrf, secret.pub_seed.data());
  for (std::uint32_t level = 0; level < params.tree_height; ++level) {
    const std::uint32_t parents = 1u << (params.tree_height - level - 1);
    for (std::uint32_t i = 0; i < parents; ++i) {
      hash_children(seed, level, i, secret.cache.node(level, 2 * i),
                    secret.cache.node(level, 2 * i + 1),
                    secret.cache.node(level + 1, i));
    }
  }
  secret.root = secret.cache.root();

  XmssPublicKey pk;
  pk.oid = params.oid;
  pk.root = secret.root;
  pk.pub_seed = secret.pub_seed;
  return XmssKeyPair{pk, std::move(secret)};
}

XmssSignature xmss_sign(const XmssSecret& secret, std::uint32_t index,
                        BytesView message) {
  const XmssParams& params = secret.params;
  if (index >= params.leaf_count()) {
    throw RangeError("XMSS index " + std::to_string(index) +
                     " out of range for h=" +
                     std::to_string(params.tree_height));
  }

  XmssSignature sig;
  sig.index = index;

  // Deterministic randomizer: r = PRF(sk_prf, toByte(index, 32)).
  KeyedMidstate prf_key(xmss_detail::kTagPrf, secret.sk_prf.data());
  std::uint8_t idx_bytes[32] = {};
  store_u32(idx_bytes + 28, index);
  xmss_detail::prf(prf_key, idx_bytes, sig.randomizer.data());

  const Hash256 digest = xmss_detail::hash_msg(
      sig.randomizer.data(), secret.root.data(), index, message);
  const WotsDigits digits = wots_digits(digest);

  KeyedMidstate seed(xmss_detail::kTagPrf, secret.pub_seed.data());
  auto sk = wots_secret(secret.sk_seed, index);
  Address addr;
  addr.set_type(Address::ots);
  addr.set_ots_address(index);
  sig.wots_sig.resize(kLen);
  for (std::uint32_t j = 0; j < kLen; ++j) {
    addr.set_chain_address(j);
    chain(sk[j].data(), 0, digits[j], seed, addr);
    sig.wots_sig[j] = sk[j];
  }

  sig.auth_path.resize(params.tree_height);
  for (std::uint32_t level = 0; level < params.tree_height; ++level) {
    const std::uint32_t sibling = (index >> level) ^ 1u;
    sig.auth_path[level] = secret.cache.node(level, sibling);
  }
  return sig;
}

bool xmss_verify(const XmssPublicKey& pk, BytesView message,
                 BytesView signature) {
  const auto params = XmssParams::from_oid(pk.oid);
  if (!params || signature.size() != params->signature_bytes()) {
    return false;
  }
  const std::uint32_t index = load_u32(signature, 0);
  if (index >= params->leaf_count()) {
    return false;
  }

  const std::uint8_t* r = signature.data() + 4;
  const Hash256 digest =
      xmss_detail::hash_msg(r, pk.root.data(), index, message);
  const WotsDigits digits = wots_digits(digest);

  KeyedMidstate seed(xmss_detail::kTagPrf, pk.pub_seed.data());

  // Recover the WOTS+ public key by completing each chain.
  std::vector<Hash256> wots_pk(kLen);
  Address addr;
  addr.set_type(Address::ots);
  addr.set_ots_address(index);
  const std::uint8_t* wots = signature.data() + 4 + 32;
  for (std::uint32_t j = 0; j < kLen; ++j) {
    std::memcpy(wots_pk[j].data(), wots + 32 * j, 32);
    addr.set_chain_address(j);
    chain(wots_pk[j].data(), digits[j], kWinternitz - 1 - digits[j], seed,
          addr);
  }
  Hash256 node = ltree(wots_pk, seed, index);

  // Walk the authentication path up to the root.
  const std::uint8_t* auth = wots + 32 * kLen;
  Address tree_addr;
  tree_addr.set_type(Address::hash_tree);
  for (std::uint32_t level = 0; level < params->tree_height; ++level) {
    tree_addr.set_tree_height(level);
    tree_addr.set_tree_index(index >> (level + 1));
    Hash256 parent;
    if ((index >> level) & 1u) {
      xmss_detail::rand_hash(seed, tree_addr, auth + 32 * level, node.data(),
                             parent.data());
    } else {
      xmss_detail::rand_hash(seed, tree_addr, node.data(), auth + 32 * level,
                             parent.data());
    }
    node = parent;
  }
  return node == pk.root;
}

}  // namespace hbsca
