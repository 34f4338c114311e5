// SPDX-License-Identifier: Apache-2.0

#include <hbsca/keystore.hpp>

#include <random>
#include <set>

#include <doctest.h>
#include <hbsca/errors.hpp>

#include "test_util.hpp"

using namespace hbsca;

namespace {

KeyStore fresh_store(const std::filesystem::path& file, std::uint32_t height,
                     std::uint8_t seed = 0x5c) {
  return KeyStore::create(
      file, xmss_keygen(XmssParams::from_height(height),
                        test::fixed_entropy(seed)));
}

}  // namespace

TEST_CASE("reservations hand out consecutive indices and persist them") {
  test::TempDir dir;
  const auto file = dir / "ca.xks";
  {
    auto store = fresh_store(file, 4);
    CHECK(store.next_index() == 0);
    CHECK(store.reserve_index() == 0);
    CHECK(store.reserve_index() == 1);
    CHECK(store.reserve_index() == 2);
    CHECK(store.next_index() == 3);
  }
  auto reopened = KeyStore::open(file);
  CHECK(reopened.next_index() == 3);
}

TEST_CASE("a crash between reserve and sign wastes exactly that index") {
  test::TempDir dir;
  const auto file = dir / "ca.xks";
  {
    auto store = fresh_store(file, 4);
    CHECK(store.reserve_index() == 0);
    // Crash: the handle dies without signing.
  }
  auto store = KeyStore::open(file);
  CHECK(store.reserve_index() == 1);  // 0 is never reissued
  CHECK_THROWS_AS(store.sign_with_reserved(0, to_bytes("late")),
                  DoubleSignError);
}

TEST_CASE("one index signs exactly once") {
  test::TempDir dir;
  auto store = fresh_store(dir / "ca.xks", 4);
  const std::uint32_t index = store.reserve_index();
  const auto sig = store.sign_with_reserved(index, to_bytes("m"));
  CHECK(sig.index == index);
  CHECK_THROWS_AS(store.sign_with_reserved(index, to_bytes("m")),
                  DoubleSignError);
  CHECK_THROWS_AS(store.sign_with_reserved(7, to_bytes("m")), StateError);
}

TEST_CASE("remaining signature count") {
  test::TempDir dir;
  auto store = fresh_store(dir / "ca.xks", 4);
  CHECK(store.remaining_signatures() == 16);
  store.sign_with_reserved(store.reserve_index(), to_bytes("ca"));
  store.sign_with_reserved(store.reserve_index(), to_bytes("schedule"));
  store.sign_with_reserved(store.reserve_index(), to_bytes("leaf"));
  CHECK(store.remaining_signatures() == 13);
}

TEST_CASE("exhaustion is permanent: reservation 17 of 16 fails") {
  test::TempDir dir;
  auto store = fresh_store(dir / "ca.xks", 4);
  for (std::uint32_t i = 0; i < 16; ++i) {
    CHECK(store.reserve_index() == i);
  }
  CHECK(store.remaining_signatures() == 0);
  CHECK_THROWS_AS(store.reserve_index(), KeyExhaustedError);
  CHECK_THROWS_AS(store.reserve_index(), KeyExhaustedError);
}

TEST_CASE("state file round-trips through save and load") {
  test::TempDir dir;
  const auto file = dir / "ca.xks";
  Bytes pk;
  {
    auto store = fresh_store(file, 4, 0x99);
    pk = store.public_key().encode();
    store.sign_with_reserved(store.reserve_index(), to_bytes("zero"));
  }
  auto store = KeyStore::open(file);
  CHECK(store.public_key().encode() == pk);
  CHECK(store.next_index() == 1);
  CHECK(store.params().tree_height == 4);
  // Signing still works after a reload and verifies under the same key.
  const auto index = store.reserve_index();
  const auto sig = store.sign_with_reserved(index, to_bytes("after reload"));
  CHECK(xmss_verify(store.public_key(), to_bytes("after reload"),
                    sig.encode()));
}

TEST_CASE("integrity tag failure is fatal on load") {
  test::TempDir dir;
  const auto file = dir / "ca.xks";
  { fresh_store(file, 4); }
  Bytes raw = test::read_file(file);
  raw[raw.size() / 2] ^= 0x01;
  test::write_file(file, raw);
  CHECK_THROWS_AS(KeyStore::open(file), FormatError);
}

TEST_CASE("a second opener is refused while the store is locked") {
  test::TempDir dir;
  const auto file = dir / "ca.xks";
  auto store = fresh_store(file, 4);
  CHECK_THROWS_AS(KeyStore::open(file), StateError);
}

TEST_CASE("at-rest cipher hook applies to the secret section") {
  test::TempDir dir;
  const auto file = dir / "ca.xks";
  KeyStoreCipher xor_cipher{
      [](BytesView in) {
        Bytes out(in.begin(), in.end());
        for (auto& b : out) b ^= 0xaa;
        return out;
      },
      [](BytesView in) {
        Bytes out(in.begin(), in.end());
        for (auto& b : out) b ^= 0xaa;
        return out;
      }};
  Bytes pk;
  {
    auto store = KeyStore::create(
        file,
        xmss_keygen(XmssParams::from_height(4), test::fixed_entropy(0x12)),
        xor_cipher);
    pk = store.public_key().encode();
  }
  CHECK_THROWS_AS(KeyStore::open(file), StateError);  // cipher required
  auto store = KeyStore::open(file, xor_cipher);
  CHECK(store.public_key().encode() == pk);
}

TEST_CASE("monotonicity holds under randomized reserve/sign/crash schedules") {
  test::TempDir dir;
  const auto file = dir / "ca.xks";
  {
    auto initial = fresh_store(file, 10, 0x21);
  }

  std::mt19937_64 rng(2024);
  std::set<std::uint32_t> signed_ever;
  std::vector<std::uint32_t> pending;

  auto store = std::make_unique<KeyStore>(KeyStore::open(file));
  int steps = 0;
  for (; steps < 1200; ++steps) {
    const int op = static_cast<int>(rng() % 10);
    if (op < 5) {  // reserve
      if (store->remaining_signatures() == 0) {
        break;
      }
      pending.push_back(store->reserve_index());
    } else if (op < 9) {  // sign a random pending index
      if (pending.empty()) {
        continue;
      }
      const std::size_t pick = rng() % pending.size();
      const std::uint32_t index = pending[pick];
      pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
      store->sign_with_reserved(index, to_bytes("step"));
      CHECK(signed_ever.insert(index).second);  // never signed before
    } else {  // crash and restart: pending reservations are lost
      store.reset();
      pending.clear();
      store = std::make_unique<KeyStore>(KeyStore::open(file));
    }
  }
  CHECK(steps > 1000);
  // Re-signing anything from history must be refused after a final restart.
  store.reset();
  store = std::make_unique<KeyStore>(KeyStore::open(file));
  for (std::uint32_t index : signed_ever) {
    CHECK_THROWS_AS(store->sign_with_reserved(index, to_bytes("again")),
                    StateError);
  }
}
