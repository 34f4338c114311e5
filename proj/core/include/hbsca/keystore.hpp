// SPDX-License-Identifier: Apache-2.0
//
// Owns the persistent XMSS private state. The one rule that matters: an index
// is durably marked used before any signature with it exists. A crash between
// the two wastes the index; it can never resurface.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>

#include "hbsca/bytes.hpp"
#include "hbsca/xmss.hpp"

namespace hbsca {

/// Optional at-rest transform applied to the secret section of the state
/// file. Key management is the caller's problem; identity when absent.
struct KeyStoreCipher {
  std::function<Bytes(BytesView)> encrypt;
  std::function<Bytes(BytesView)> decrypt;
};

class KeyStore {
 public:
  static constexpr std::string_view extension = ".xks";

  KeyStore(KeyStore&&) noexcept;
  KeyStore& operator=(KeyStore&&) noexcept;
  KeyStore(const KeyStore&) = delete;
  KeyStore& operator=(const KeyStore&) = delete;
  ~KeyStore();

  /// Creates a fresh store file. Refuses to overwrite an existing one.
  static KeyStore create(const std::filesystem::path& file, XmssKeyPair pair,
                         std::optional<KeyStoreCipher> cipher = {});

  /// Loads and integrity-checks an existing store. Takes an exclusive
  /// advisory lock; a second opener is refused while the first lives.
  static KeyStore open(const std::filesystem::path& file,
                       std::optional<KeyStoreCipher> cipher = {});

  /// Returns the next unused index after durably persisting the increment.
  /// Throws KeyExhaustedError once all 2^h indices are spent.
  std::uint32_t reserve_index();

  /// Signs with a previously reserved, not yet used index.
  /// Throws StateError for never-reserved indices and DoubleSignError for
  /// anything already consumed, including indices wasted by a crash.
  XmssSignature sign_with_reserved(std::uint32_t index, BytesView message);

  std::uint32_t next_index() const { return next_index_; }
  std::uint32_t remaining_signatures() const;
  const XmssParams& params() const { return secret_.params; }
  const XmssPublicKey& public_key() const { return public_key_; }
  const XmssSecret& secret() const { return secret_; }
  const std::filesystem::path& file() const { return file_; }

  /// Audit hook: invoked with the index of every signature actually emitted.
  void set_sign_observer(std::function<void(std::uint32_t)> observer);

 private:
  KeyStore() = default;

  void persist() const;
  void acquire_lock();
  void release_lock();

  std::filesystem::path file_;
  XmssSecret secret_;
  XmssPublicKey public_key_;
  std::uint32_t next_index_ = 0;
  std::set<std::uint32_t> pending_;  // reserved in this lifetime, not yet signed
  std::optional<KeyStoreCipher> cipher_;
  std::function<void(std::uint32_t)> sign_observer_;
  int lock_fd_ = -1;
};

}  // namespace hbsca
