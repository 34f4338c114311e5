// SPDX-License-Identifier: Apache-2.0

#include "hbsca/der.hpp"

#include <cstdio>
#include <ctime>
#include <vector>

#include "hbsca/errors.hpp"

namespace hbsca::der {

namespace {

void append_length(Bytes& out, std::size_t len) {
  if (len < 0x80) {
    out.push_back(static_cast<std::uint8_t>(len));
    return;
  }
  Bytes digits;
  while (len > 0) {
    digits.push_back(static_cast<std::uint8_t>(len & 0xff));
    len >>= 8;
  }
  out.push_back(static_cast<std::uint8_t>(0x80 | digits.size()));
  out.insert(out.end(), digits.rbegin(), digits.rend());
}

}  // namespace

Bytes tlv(std::uint8_t tag, BytesView content) {
  Bytes out;
  out.reserve(content.size() + 4);
  out.push_back(tag);
  append_length(out, content.size());
  out.insert(out.end(), content.begin(), content.end());
  return out;
}

Bytes concat(std::initializer_list<BytesView> parts) {
  Bytes out;
  std::size_t total = 0;
  for (const auto& p : parts) {
    total += p.size();
  }
  out.reserve(total);
  for (const auto& p : parts) {
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Bytes integer(std::uint64_t value) {
  Bytes content;
  if (value == 0) {
    content.push_back(0);
  } else {
    Bytes digits;
    while (value > 0) {
      digits.push_back(static_cast<std::uint8_t>(value & 0xff));
      value >>= 8;
    }
    if (digits.back() & 0x80) {
      digits.push_back(0);  // keep it non-negative
    }
    content.assign(digits.rbegin(), digits.rend());
  }
  return tlv(kInteger, content);
}

Bytes oid(std::string_view dotted) {
  Bytes arcs_content;
  std::uint64_t arc = 0;
  std::vector<std::uint64_t> arcs;
  for (std::size_t i = 0; i <= dotted.size(); ++i) {
    if (i == dotted.size() || dotted[i] == '.') {
      arcs.push_back(arc);
      arc = 0;
    } else if (dotted[i] >= '0' && dotted[i] <= '9') {
      arc = arc * 10 + static_cast<std::uint64_t>(dotted[i] - '0');
    } else {
      throw FormatError("invalid character in OID string");
    }
  }
  if (arcs.size() < 2 || arcs[0] > 2 || (arcs[0] < 2 && arcs[1] >= 40)) {
    throw FormatError("invalid OID arcs");
  }
  auto push_base128 = [&](std::uint64_t v) {
    std::uint8_t tmp[10];
    int n = 0;
    do {
      tmp[n++] = static_cast<std::uint8_t>(v & 0x7f);
      v >>= 7;
    } while (v > 0);
    for (int i = n - 1; i >= 0; --i) {
      arcs_content.push_back(static_cast<std::uint8_t>(tmp[i] | (i ? 0x80 : 0)));
    }
  };
  push_base128(arcs[0] * 40 + arcs[1]);
  for (std::size_t i = 2; i < arcs.size(); ++i) {
    push_base128(arcs[i]);
  }
  return tlv(kOid, arcs_content);
}

Bytes printable_string(std::string_view text) {
  return tlv(kPrintableString,
             BytesView(reinterpret_cast<const std::uint8_t*>(text.data()),
                       text.size()));
}

Bytes octet_string(BytesView content) { return tlv(kOctetString, content); }

Bytes bit_string(BytesView content) {
  Bytes inner;
  inner.reserve(content.size() + 1);
  inner.push_back(0);  // unused bits
  inner.insert(inner.end(), content.begin(), content.end());
  return tlv(kBitString, inner);
}

Bytes generalized_time(std::uint64_t posix_seconds) {
  const time_t t = static_cast<time_t>(posix_seconds);
  tm parts{};
  gmtime_r(&t, &parts);
  char buf[20];
  const int n = std::snprintf(buf, sizeof(buf), "%04d%02d%02d%02d%02d%02dZ",
                              parts.tm_year + 1900, parts.tm_mon + 1,
                              parts.tm_mday, parts.tm_hour, parts.tm_min,
                              parts.tm_sec);
  return tlv(kGeneralizedTime,
             BytesView(reinterpret_cast<const std::uint8_t*>(buf),
                       static_cast<std::size_t>(n)));
}

Bytes sequence(std::initializer_list<BytesView> children) {
  return tlv(kSequence, concat(children));
}

Bytes set(std::initializer_list<BytesView> children) {
  return tlv(kSet, concat(children));
}

Bytes context(std::uint8_t number, BytesView content) {
  return tlv(static_cast<std::uint8_t>(0xa0 | number), content);
}

Bytes context_primitive(std::uint8_t number, BytesView content) {
  return tlv(static_cast<std::uint8_t>(0x80 | number), content);
}

Reader::Reader(BytesView data, std::size_t base_position)
    : data_(data), base_(base_position) {}

Tlv Reader::next() {
  if (done()) {
    throw FormatError("unexpected end of DER input", position());
  }
  Tlv out;
  out.position = position();
  out.tag = data_[offset_];
  std::size_t cursor = offset_ + 1;
  if (cursor >= data_.size()) {
    throw FormatError("missing length byte", position());
  }
  std::size_t len = data_[cursor++];
  if (len == 0x80) {
    throw FormatError("indefinite lengths are not DER", out.position);
  }
  if (len > 0x80) {
    const std::size_t len_bytes = len & 0x7f;
    if (len_bytes > 4) {
      throw FormatError("length field too large", out.position);
    }
    if (cursor + len_bytes > data_.size()) {
      throw FormatError("length field extends past input", out.position);
    }
    len = 0;
    for (std::size_t i = 0; i < len_bytes; ++i) {
      len = len << 8 | data_[cursor++];
    }
    if (len < 0x80 || (len >> (8 * (len_bytes - 1))) == 0) {
      throw FormatError("non-minimal length encoding", out.position);
    }
  }
  if (len > data_.size() - cursor) {
    throw FormatError("content extends past input", out.position);
  }
  out.content = data_.subspan(cursor, len);
  out.total_size = cursor + len - offset_;
  offset_ = cursor + len;
  return out;
}

Tlv Reader::expect(std::uint8_t tag, const char* what) {
  const std::size_t at = position();
  Tlv out = next();
  if (out.tag != tag) {
    throw FormatError(std::string("expected ") + what, at);
  }
  return out;
}

void Reader::finish(const char* what) {
  if (!done()) {
    throw FormatError(std::string("trailing data after ") + what, position());
  }
}

std::uint64_t parse_integer_u64(const Tlv& tlv) {
  if (tlv.content.empty() || tlv.content.size() > 9) {
    throw FormatError("integer size unsupported", tlv.position);
  }
  if (tlv.content[0] & 0x80) {
    throw FormatError("negative integer", tlv.position);
  }
  if (tlv.content.size() > 1 && tlv.content[0] == 0 &&
      !(tlv.content[1] & 0x80)) {
    throw FormatError("non-minimal integer encoding", tlv.position);
  }
  std::uint64_t v = 0;
  for (std::uint8_t b : tlv.content) {
    v = v << 8 | b;
  }
  return v;
}

std::string parse_oid(const Tlv& tlv) {
  if (tlv.content.empty()) {
    throw FormatError("empty OID", tlv.position);
  }
  std::string out;
  std::uint64_t arc = 0;
  bool first = true;
  std::size_t continuation = 0;
  for (std::uint8_t b : tlv.content) {
    arc = arc << 7 | (b & 0x7f);
    if (++continuation > 9) {
      throw FormatError("OID arc too large", tlv.position);
    }
    if (!(b & 0x80)) {
      if (first) {
        const std::uint64_t top = arc >= 80 ? 2 : arc / 40;
        out = std::to_string(top) + "." + std::to_string(arc - top * 40);
        first = false;
      } else {
        out += "." + std::to_string(arc);
      }
      arc = 0;
      continuation = 0;
    }
  }
  if (continuation != 0) {
    throw FormatError("truncated OID arc", tlv.position);
  }
  return out;
}

std::string parse_printable_string(const Tlv& tlv) {
  for (std::uint8_t b : tlv.content) {
    if (b < 0x20 || b > 0x7e) {
      throw FormatError("non-printable character in string", tlv.position);
    }
  }
  return std::string(tlv.content.begin(), tlv.content.end());
}

std::uint64_t parse_generalized_time(const Tlv& tlv) {
  if (tlv.content.size() != 15 || tlv.content[14] != 'Z') {
    throw FormatError("expected YYYYMMDDHHMMSSZ time", tlv.position);
  }
  int fields[6];
  const int widths[6] = {4, 2, 2, 2, 2, 2};
  std::size_t at = 0;
  for (int f = 0; f < 6; ++f) {
    int v = 0;
    for (int i = 0; i < widths[f]; ++i, ++at) {
      const std::uint8_t c = tlv.content[at];
      if (c < '0' || c > '9') {
        throw FormatError("non-digit in time", tlv.position);
      }
      v = v * 10 + (c - '0');
    }
    fields[f] = v;
  }
  tm parts{};
  parts.tm_year = fields[0] - 1900;
  parts.tm_mon = fields[1] - 1;
  parts.tm_mday = fields[2];
  parts.tm_hour = fields[3];
  parts.tm_min = fields[4];
  parts.tm_sec = fields[5];
  if (fields[1] < 1 || fields[1] > 12 || fields[2] < 1 || fields[2] > 31 ||
      fields[3] > 23 || fields[4] > 59 || fields[5] > 60) {
    throw FormatError("time component out of range", tlv.position);
  }
  const time_t t = timegm(&parts);
  if (t < 0) {
    throw FormatError("time before POSIX epoch", tlv.position);
  }
  return static_cast<std::uint64_t>(t);
}

BytesView parse_bit_string(const Tlv& tlv) {
  if (tlv.content.empty() || tlv.content[0] != 0) {
    throw FormatError("expected BIT STRING with zero unused bits",
                      tlv.position);
  }
  return tlv.content.subspan(1);
}

}  // namespace hbsca::der
