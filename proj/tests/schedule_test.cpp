// SPDX-License-Identifier: Apache-2.0

#include <hbsca/schedule.hpp>

#include <random>

#include <doctest.h>
#include <hbsca/errors.hpp>

#include "test_util.hpp"

using namespace hbsca;

namespace {

constexpr std::uint64_t kCreation = 1751720001;

// Brute-force oracle: walks the slots one by one instead of dividing.
std::optional<std::uint32_t> brute_force_index(const Schedule& s,
                                               const IssuancePolicy& policy,
                                               std::uint64_t t) {
  if (t < s.creation_date) {
    return std::nullopt;
  }
  const std::uint64_t interval =
      policy.issue_interval_seconds(s.validity_minutes);
  std::uint64_t slot_start = s.creation_date;
  for (std::uint32_t index = s.start_index; index < s.max_index; ++index) {
    if (t >= slot_start && t < slot_start + interval) {
      return index;
    }
    slot_start += interval;
  }
  return std::nullopt;
}

// Arithmetic-only schedule; the signature is irrelevant for slot math.
Schedule synthetic_schedule(std::uint32_t start, std::uint32_t max,
                            std::uint16_t validity) {
  Schedule s;
  s.creation_date = kCreation;
  s.validity_minutes = validity;
  s.start_index = start;
  s.max_index = max;
  s.signature.index = start - 1;
  return s;
}

// A real signed schedule from a toy store, mirroring setup: index 0 burned
// for the CA, index 1 signs the schedule.
struct SignedFixture {
  test::TempDir dir;
  KeyStore store;
  Schedule schedule;

  SignedFixture()
      : store(KeyStore::create(
            dir / "ca.xks",
            xmss_keygen(XmssParams::from_height(4), test::fixed_entropy()))),
        schedule(make_initial(store)) {}

  static Schedule make_initial(KeyStore& store) {
    store.sign_with_reserved(store.reserve_index(), to_bytes("ca"));
    return make_schedule(store, kCreation, 240, IssuancePolicy{});
  }
};

}  // namespace

TEST_CASE("issue interval is validity minus overlap") {
  IssuancePolicy policy;
  CHECK(policy.overlap_minutes == 2);
  CHECK(policy.issue_interval_seconds(240) == 238 * 60);
  CHECK_THROWS_AS(policy.issue_interval_seconds(2), ParamError);
  CHECK_THROWS_AS(policy.issue_interval_seconds(1), ParamError);
}

TEST_CASE("header is exactly 18 big-endian bytes") {
  const Schedule s = synthetic_schedule(2, 65536, 240);
  const Bytes header = s.header();
  REQUIRE(header.size() == Schedule::header_bytes);
  CHECK(load_u64(header, 0) == kCreation);
  CHECK(load_u16(header, 8) == 240);
  CHECK(load_u32(header, 10) == 2);
  CHECK(load_u32(header, 14) == 65536);
}

TEST_CASE("signed schedule encodes and round-trips") {
  SignedFixture fx;
  CHECK(fx.schedule.start_index == 2);
  CHECK(fx.schedule.signing_index() == 1);
  CHECK(fx.schedule.max_index == 16);

  const Bytes encoded = fx.schedule.encode();
  CHECK(encoded.size() ==
        Schedule::header_bytes +
            XmssParams::from_height(4).signature_bytes());
  const Schedule back = Schedule::decode(encoded);
  CHECK(back.encode() == encoded);
  CHECK(back.creation_date == kCreation);
  CHECK(back.validity_minutes == 240);
}

TEST_CASE("decode rejects malformed records") {
  SignedFixture fx;
  const Bytes encoded = fx.schedule.encode();

  CHECK_THROWS_AS(Schedule::decode(BytesView(encoded).first(17)),
                  FormatError);
  CHECK_THROWS_AS(Schedule::decode(BytesView(encoded).first(100)),
                  FormatError);

  Bytes swapped = encoded;  // start_index >= max_index
  store_u32(swapped.data() + 10, 20);
  CHECK_THROWS_AS(Schedule::decode(swapped), FormatError);

  Bytes wrong_signer = encoded;  // signature.index != start_index - 1
  store_u32(wrong_signer.data() + 10, 3);
  CHECK_THROWS_AS(Schedule::decode(wrong_signer), FormatError);
}

TEST_CASE("index_for_time matches the brute-force slot walk") {
  const Schedule s = synthetic_schedule(2, 16, 240);
  IssuancePolicy policy;

  CHECK(index_for_time(s, policy, kCreation) == 2);
  CHECK(index_for_time(s, policy, kCreation + 238 * 60) == 3);
  CHECK(!index_for_time(s, policy, kCreation - 1));

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::uint64_t t = kCreation - 10 + rng() % (20 * 14280);
    CAPTURE(t);
    CHECK(index_for_time(s, policy, t) == brute_force_index(s, policy, t));
  }
}

TEST_CASE("issue_time_for_index inverts index_for_time on slot starts") {
  const Schedule s = synthetic_schedule(2, 65536, 240);
  IssuancePolicy policy;

  CHECK(issue_time_for_index(s, policy, 2) == kCreation);
  CHECK_THROWS_AS(issue_time_for_index(s, policy, 1), RangeError);
  CHECK_THROWS_AS(issue_time_for_index(s, policy, 65536), RangeError);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t index =
        2 + static_cast<std::uint32_t>(rng() % (65536 - 2));
    CHECK(index_for_time(s, policy, issue_time_for_index(s, policy, index)) ==
          index);
  }
}

TEST_CASE("slot mapping is a bijection over the toy schedule") {
  const Schedule s = synthetic_schedule(2, 16, 240);
  IssuancePolicy policy;
  const std::uint64_t interval = policy.issue_interval_seconds(240);

  for (std::uint32_t index = 2; index < 16; ++index) {
    const std::uint64_t slot = issue_time_for_index(s, policy, index);
    // Both edges of the slot map back to it, nothing else does.
    CHECK(index_for_time(s, policy, slot) == index);
    CHECK(index_for_time(s, policy, slot + interval - 1) == index);
  }
  CHECK(!index_for_time(s, policy, schedule_end_time(s, policy)));
  CHECK(index_for_time(s, policy, schedule_end_time(s, policy) - 1) == 15);
}

TEST_CASE("any header mutation invalidates the schedule signature") {
  SignedFixture fx;
  const Bytes header = fx.schedule.header();
  const Bytes sig = fx.schedule.signature.encode();
  REQUIRE(xmss_verify(fx.store.public_key(), header, sig));
  for (std::size_t i = 0; i < header.size(); ++i) {
    Bytes mutated = header;
    mutated[i] ^= 0x01;
    CAPTURE(i);
    CHECK(!xmss_verify(fx.store.public_key(), mutated, sig));
  }
}

TEST_CASE("schedule update re-anchors at the next index") {
  SignedFixture fx;
  // Consume a few leaf indices after the initial schedule.
  for (int i = 0; i < 4; ++i) {
    fx.store.sign_with_reserved(fx.store.reserve_index(), to_bytes("leaf"));
  }
  const std::uint32_t next = fx.store.next_index();
  const Schedule updated = update_schedule(fx.store, fx.schedule,
                                           kCreation + 50000, 120,
                                           IssuancePolicy{});
  CHECK(updated.signing_index() == next);
  CHECK(updated.start_index == next + 1);
  CHECK(updated.creation_date == kCreation + 50000);
  CHECK(updated.validity_minutes == 120);
  CHECK(updated.max_index == 16);

  // The verifier side must always prefer the newest record.
  CHECK(updated.signing_index() > fx.schedule.signing_index());
}

TEST_CASE("update on an exhausted store reports exhaustion") {
  SignedFixture fx;
  while (fx.store.remaining_signatures() > 0) {
    fx.store.reserve_index();
  }
  CHECK_THROWS_AS(update_schedule(fx.store, fx.schedule, kCreation + 1000,
                                  240, IssuancePolicy{}),
                  KeyExhaustedError);
}

TEST_CASE("nominal lifetime arithmetic reproduces 29.925 years") {
  // 65535 certificates of four hours in 365-day years.
  CHECK(lifetime_years(65535, 240) == doctest::Approx(29.925).epsilon(0.0001));
  CHECK(lifetime_years(65535, 240) > 29.924);
  CHECK(lifetime_years(65535, 240) < 29.926);
}

TEST_CASE("schedule text form carries the paper's field layout") {
  const Schedule s = synthetic_schedule(2, 65536, 240);
  const std::string text = format_schedule(s);
  CHECK(text.find("Creation Date") != std::string::npos);
  CHECK(text.find("1751720001") != std::string::npos);
  CHECK(text.find("Validity Time") != std::string::npos);
  CHECK(text.find("Current Index") != std::string::npos);
  CHECK(text.find("Max Index") != std::string::npos);
  CHECK(text.find("65536") != std::string::npos);
}
