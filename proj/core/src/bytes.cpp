// SPDX-License-Identifier: Apache-2.0

#include "hbsca/bytes.hpp"

#define OPENSSL_SUPPRESS_DEPRECATED 1

#include <openssl/rand.h>
#include <openssl/sha.h>

#include <stdexcept>

#include "hbsca/errors.hpp"

namespace hbsca {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

namespace {
void check_range(BytesView in, std::size_t offset, std::size_t need) {
  if (offset + need > in.size()) {
    throw FormatError("integer field extends past end of input", offset);
  }
}
}  // namespace

std::uint16_t load_u16(BytesView in, std::size_t offset) {
  check_range(in, offset, 2);
  return static_cast<std::uint16_t>(in[offset] << 8 | in[offset + 1]);
}

std::uint32_t load_u32(BytesView in, std::size_t offset) {
  check_range(in, offset, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v = v << 8 | in[offset + i];
  }
  return v;
}

std::uint64_t load_u64(BytesView in, std::size_t offset) {
  check_range(in, offset, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v = v << 8 | in[offset + i];
  }
  return v;
}

void store_u32(std::uint8_t* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out[i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
  }
}

void store_u64(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  }
}

std::string to_hex(BytesView data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) {
    throw FormatError("hex string has odd length");
  }
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      throw FormatError("invalid hex digit", i);
    }
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

Bytes random_bytes(std::size_t count) {
  Bytes out(count);
  if (count > 0 && RAND_bytes(out.data(), static_cast<int>(count)) != 1) {
    throw Error("OS entropy source failed");
  }
  return out;
}

Hash256 sha256(BytesView data) {
  Hash256 out;
  SHA256(data.data(), data.size(), out.data());
  return out;
}

}  // namespace hbsca
