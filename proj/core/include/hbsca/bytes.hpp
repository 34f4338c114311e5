// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hbsca {

using Bytes = std::vector<std::uint8_t>;
using BytesView = std::span<const std::uint8_t>;
using Hash256 = std::array<std::uint8_t, 32>;

// Big-endian integer packing. All on-disk and on-wire integers in this
// project are network order.
void put_u16(Bytes& out, std::uint16_t v);
void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
std::uint16_t load_u16(BytesView in, std::size_t offset);
std::uint32_t load_u32(BytesView in, std::size_t offset);
std::uint64_t load_u64(BytesView in, std::size_t offset);
void store_u32(std::uint8_t* out, std::uint32_t v);
void store_u64(std::uint8_t* out, std::uint64_t v);

std::string to_hex(BytesView data);
Bytes from_hex(std::string_view hex);

/// Cryptographically secure OS entropy.
Bytes random_bytes(std::size_t count);

/// One-shot SHA-256.
Hash256 sha256(BytesView data);

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

}  // namespace hbsca
