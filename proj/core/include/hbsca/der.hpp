// SPDX-License-Identifier: Apache-2.0
//
// Just enough DER for the certificate profile this toolkit emits. Encoding is
// canonical (definite minimal lengths only) so equal values produce equal
// bytes; the reader rejects anything else.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "hbsca/bytes.hpp"

namespace hbsca::der {

inline constexpr std::uint8_t kInteger = 0x02;
inline constexpr std::uint8_t kBitString = 0x03;
inline constexpr std::uint8_t kOctetString = 0x04;
inline constexpr std::uint8_t kOid = 0x06;
inline constexpr std::uint8_t kPrintableString = 0x13;
inline constexpr std::uint8_t kGeneralizedTime = 0x18;
inline constexpr std::uint8_t kSequence = 0x30;
inline constexpr std::uint8_t kSet = 0x31;

Bytes tlv(std::uint8_t tag, BytesView content);
Bytes concat(std::initializer_list<BytesView> parts);

Bytes integer(std::uint64_t value);
Bytes oid(std::string_view dotted);
Bytes printable_string(std::string_view text);
Bytes octet_string(BytesView content);
Bytes bit_string(BytesView content);  // zero unused bits
Bytes generalized_time(std::uint64_t posix_seconds);  // YYYYMMDDHHMMSSZ
Bytes sequence(std::initializer_list<BytesView> children);
Bytes set(std::initializer_list<BytesView> children);
/// Context-specific constructed tag [n].
Bytes context(std::uint8_t number, BytesView content);
/// Context-specific primitive tag [n] (e.g. GeneralName dNSName).
Bytes context_primitive(std::uint8_t number, BytesView content);

struct Tlv {
  std::uint8_t tag = 0;
  BytesView content;
  std::size_t position = 0;    // absolute offset of the tag byte
  std::size_t total_size = 0;  // header + content
};

/// Sequential reader over one level of TLVs. Throws FormatError carrying the
/// absolute byte position of the offending field.
class Reader {
 public:
  explicit Reader(BytesView data, std::size_t base_position = 0);

  bool done() const { return offset_ >= data_.size(); }
  std::size_t position() const { return base_ + offset_; }

  Tlv next();
  Tlv expect(std::uint8_t tag, const char* what);
  /// All bytes consumed, or FormatError("trailing data").
  void finish(const char* what);

 private:
  BytesView data_;
  std::size_t offset_ = 0;
  std::size_t base_ = 0;
};

std::uint64_t parse_integer_u64(const Tlv& tlv);
std::string parse_oid(const Tlv& tlv);
std::string parse_printable_string(const Tlv& tlv);
std::uint64_t parse_generalized_time(const Tlv& tlv);
/// Content of a BIT STRING with zero unused bits.
BytesView parse_bit_string(const Tlv& tlv);

}  // namespace hbsca::der
