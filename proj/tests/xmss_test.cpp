// SPDX-License-Identifier: Apache-2.0

#include <hbsca/xmss.hpp>

#include <random>

#include <doctest.h>
#include <hbsca/errors.hpp>

#include "test_util.hpp"
#include "xmss_hash.hpp"

using namespace hbsca;

namespace {

// Independent oracle: recomputes the Merkle root recursively from the leaf
// hashes, without touching the keygen tree-building path or the node cache.
Hash256 naive_subtree_root(const std::vector<Hash256>& leaves,
                           const Hash256& pub_seed, std::uint32_t level,
                           std::uint32_t index) {
  if (level == 0) {
    return leaves.at(index);
  }
  const Hash256 left =
      naive_subtree_root(leaves, pub_seed, level - 1, 2 * index);
  const Hash256 right =
      naive_subtree_root(leaves, pub_seed, level - 1, 2 * index + 1);
  xmss_detail::KeyedMidstate seed(xmss_detail::kTagPrf, pub_seed.data());
  xmss_detail::Address addr;
  addr.set_type(xmss_detail::Address::hash_tree);
  addr.set_tree_height(level - 1);
  addr.set_tree_index(index);
  Hash256 out;
  xmss_detail::rand_hash(seed, addr, left.data(), right.data(), out.data());
  return out;
}

}  // namespace

TEST_CASE("parameter sets and size law") {
  // Serialized sizes for the three production heights and the 68-byte key.
  CHECK(XmssParams::from_height(10).signature_bytes() == 2500);
  CHECK(XmssParams::from_height(16).signature_bytes() == 2692);
  CHECK(XmssParams::from_height(20).signature_bytes() == 2820);
  CHECK(XmssParams::public_key_bytes == 68);
  CHECK(XmssParams::from_height(16).leaf_count() == 65536);
  CHECK_THROWS_AS(XmssParams::from_height(12), ParamError);
  CHECK(XmssParams::from_signature_size(2692)->tree_height == 16);
  CHECK(!XmssParams::from_signature_size(2691));
}

TEST_CASE("keygen is deterministic and height 10 signatures measure 2500") {
  const auto params = XmssParams::from_height(10);
  const Bytes entropy = test::fixed_entropy();
  const auto pair = xmss_keygen(params, entropy);
  const auto again = xmss_keygen(params, entropy);
  CHECK(pair.public_key.encode() == again.public_key.encode());
  CHECK(pair.public_key.encode().size() == 68);

  const Bytes msg = to_bytes("determinism check");
  const auto sig = xmss_sign(pair.secret, 7, msg);
  const auto sig2 = xmss_sign(again.secret, 7, msg);
  CHECK(sig.encode() == sig2.encode());
  CHECK(sig.encode().size() == 2500);
  CHECK(xmss_verify(pair.public_key, msg, sig.encode()));
}

TEST_CASE("root matches a naive recursive treehash over the leaves") {
  const auto params = XmssParams::from_height(10);
  const auto pair = xmss_keygen(params, test::fixed_entropy(0x11));

  std::vector<Hash256> leaves(params.leaf_count());
  for (std::uint32_t i = 0; i < params.leaf_count(); ++i) {
    leaves[i] = xmss_leaf_hash(pair.secret, i);
  }
  const Hash256 root = naive_subtree_root(leaves, pair.secret.pub_seed,
                                          params.tree_height, 0);
  CHECK(root == pair.public_key.root);
}

TEST_CASE("node cache is internally consistent and detects corruption") {
  auto pair = xmss_keygen(XmssParams::from_height(4), test::fixed_entropy());
  CHECK(pair.secret.cache_consistent());
  pair.secret.cache.node(1, 3)[0] ^= 1;
  CHECK(!pair.secret.cache_consistent());
}

TEST_CASE("exhaustive sweep at toy height: every index round-trips") {
  const auto params = XmssParams::from_height(4);
  const auto pair = xmss_keygen(params, test::fixed_entropy(0x77));
  const Bytes msg = to_bytes("sweep");
  for (std::uint32_t i = 0; i < params.leaf_count(); ++i) {
    const auto sig = xmss_sign(pair.secret, i, msg);
    CHECK(sig.index == i);
    CHECK(xmss_verify(pair.public_key, msg, sig.encode()));
  }
  CHECK_THROWS_AS(xmss_sign(pair.secret, params.leaf_count(), msg),
                  RangeError);
}

TEST_CASE("any single bit flip invalidates the signature") {
  const auto pair =
      xmss_keygen(XmssParams::from_height(4), test::fixed_entropy(0x23));
  const Bytes msg = to_bytes("bit flip target");
  const Bytes sig = xmss_sign(pair.secret, 3, msg).encode();

  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> pick(0, sig.size() * 8 - 1);
  for (int trial = 0; trial < 100; ++trial) {
    Bytes mutated = sig;
    const std::size_t bit = pick(rng);
    mutated[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    CAPTURE(bit);
    CHECK(!xmss_verify(pair.public_key, msg, mutated));
  }
}

TEST_CASE("signatures do not transfer to a different message") {
  const auto pair =
      xmss_keygen(XmssParams::from_height(4), test::fixed_entropy(0x31));
  const Bytes sig = xmss_sign(pair.secret, 0, to_bytes("message A")).encode();
  CHECK(xmss_verify(pair.public_key, to_bytes("message A"), sig));
  CHECK(!xmss_verify(pair.public_key, to_bytes("message B"), sig));
}

TEST_CASE("random blobs never verify") {
  const auto pair =
      xmss_keygen(XmssParams::from_height(4), test::fixed_entropy(0x47));
  const Bytes msg = to_bytes("soundness");
  const std::size_t sig_size = pair.secret.params.signature_bytes();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    Bytes blob = test::random_blob(rng, sig_size);
    if (trial % 2 == 0) {
      // Force a plausible index so the full hash path runs.
      blob[0] = blob[1] = blob[2] = 0;
      blob[3] &= 0x0f;
    }
    CHECK(!xmss_verify(pair.public_key, msg, blob));
  }
}

TEST_CASE("verify is total on malformed input") {
  const auto pair =
      xmss_keygen(XmssParams::from_height(4), test::fixed_entropy(0x59));
  const Bytes msg = to_bytes("x");
  const Bytes sig = xmss_sign(pair.secret, 1, msg).encode();
  CHECK(!xmss_verify(pair.public_key, msg, BytesView(sig).first(10)));
  CHECK(!xmss_verify(pair.public_key, msg, Bytes{}));
  Bytes longer = sig;
  longer.push_back(0);
  CHECK(!xmss_verify(pair.public_key, msg, longer));
}

TEST_CASE("public key and signature codecs round-trip and reject bad input") {
  const auto params = XmssParams::from_height(4);
  const auto pair = xmss_keygen(params, test::fixed_entropy(0x63));
  const Bytes pk = pair.public_key.encode();
  const auto decoded = XmssPublicKey::decode(pk);
  CHECK(decoded.encode() == pk);
  CHECK_THROWS_AS(XmssPublicKey::decode(BytesView(pk).first(67)),
                  FormatError);

  const auto sig = xmss_sign(pair.secret, 2, to_bytes("codec"));
  const Bytes enc = sig.encode();
  const auto back = XmssSignature::decode(enc, params);
  CHECK(back.encode() == enc);
  CHECK(back.index == 2);
  CHECK_THROWS_AS(XmssSignature::decode(BytesView(enc).first(100), params),
                  FormatError);

  Bytes bad_index = enc;
  bad_index[0] = 0xff;  // index far beyond 2^4
  CHECK_THROWS_AS(XmssSignature::decode(bad_index, params), FormatError);
}

TEST_CASE("keygen validates entropy and auth paths come from the cache") {
  const auto params = XmssParams::from_height(4);
  CHECK_THROWS_AS(xmss_keygen(params, Bytes(95, 0)), ParamError);

  const auto pair = xmss_keygen(params, test::fixed_entropy(0x71));
  const auto sig = xmss_sign(pair.secret, 5, to_bytes("auth path"));
  for (std::uint32_t level = 0; level < params.tree_height; ++level) {
    const std::uint32_t sibling = (5u >> level) ^ 1u;
    CHECK(sig.auth_path[level] == pair.secret.cache.node(level, sibling));
  }
}
