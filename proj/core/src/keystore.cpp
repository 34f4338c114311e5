// SPDX-License-Identifier: Apache-2.0

#include "hbsca/keystore.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <utility>

#include "hbsca/errors.hpp"

namespace hbsca {

namespace {

constexpr std::uint8_t kMagic[4] = {'X', 'K', 'S', '1'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kFlagEncrypted = 0x01;

Bytes secret_blob(const XmssSecret& s) {
  Bytes blob;
  blob.reserve(128 + s.cache.flat().size() * 32);
  blob.insert(blob.end(), s.sk_seed.begin(), s.sk_seed.end());
  blob.insert(blob.end(), s.sk_prf.begin(), s.sk_prf.end());
  blob.insert(blob.end(), s.pub_seed.begin(), s.pub_seed.end());
  blob.insert(blob.end(), s.root.begin(), s.root.end());
  for (const auto& node : s.cache.flat()) {
    blob.insert(blob.end(), node.begin(), node.end());
  }
  return blob;
}

XmssSecret secret_from_blob(const XmssParams& params, BytesView blob) {
  const std::size_t expect = 128 + params.node_count() * 32;
  if (blob.size() != expect) {
    throw FormatError("key state secret section has wrong length",
                      blob.size());
  }
  XmssSecret s;
  s.params = params;
  std::copy_n(blob.begin(), 32, s.sk_seed.begin());
  std::copy_n(blob.begin() + 32, 32, s.sk_prf.begin());
  std::copy_n(blob.begin() + 64, 32, s.pub_seed.begin());
  std::copy_n(blob.begin() + 96, 32, s.root.begin());
  std::vector<Hash256> nodes(params.node_count());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::copy_n(blob.begin() + 128 + 32 * i, 32, nodes[i].begin());
  }
  s.cache = NodeCache(params.tree_height, std::move(nodes));
  if (s.root != s.cache.root()) {
    throw FormatError("key state root does not match node cache");
  }
  return s;
}

void write_file_durable(const std::filesystem::path& path, BytesView data) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) {
    throw IoError("cannot create " + tmp.string() + ": " +
                  std::strerror(errno));
  }
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      ::close(fd);
      ::unlink(tmp.c_str());
      throw IoError("write failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw IoError("fsync failed");
  }
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw IoError("rename failed: " + std::string(std::strerror(errno)));
  }
  // Make the rename itself durable.
  const std::filesystem::path dir =
      path.has_parent_path() ? path.parent_path() : ".";
  int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return Bytes(std::istreambuf_iterator<char>(in),
               std::istreambuf_iterator<char>());
}

std::filesystem::path lock_path(const std::filesystem::path& file) {
  return file.string() + ".lock";
}

}  // namespace

KeyStore::KeyStore(KeyStore&& other) noexcept { *this = std::move(other); }

KeyStore& KeyStore::operator=(KeyStore&& other) noexcept {
  if (this != &other) {
    release_lock();
    file_ = std::move(other.file_);
    secret_ = std::move(other.secret_);
    public_key_ = other.public_key_;
    next_index_ = other.next_index_;
    pending_ = std::move(other.pending_);
    cipher_ = std::move(other.cipher_);
    sign_observer_ = std::move(other.sign_observer_);
    lock_fd_ = std::exchange(other.lock_fd_, -1);
  }
  return *this;
}

KeyStore::~KeyStore() { release_lock(); }

void KeyStore::acquire_lock() {
  const auto lp = lock_path(file_);
  lock_fd_ = ::open(lp.c_str(), O_RDWR | O_CREAT, 0600);
  if (lock_fd_ < 0) {
    throw IoError("cannot open lock file " + lp.string());
  }
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw StateError("key state file " + file_.string() +
                     " is locked by another process");
  }
}

void KeyStore::release_lock() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
    lock_fd_ = -1;
  }
}

KeyStore KeyStore::create(const std::filesystem::path& file, XmssKeyPair pair,
                          std::optional<KeyStoreCipher> cipher) {
  if (std::filesystem::exists(file)) {
    throw IoError("refusing to overwrite existing key state " +
                  file.string());
  }
  KeyStore store;
  store.file_ = file;
  store.secret_ = std::move(pair.secret);
  store.public_key_ = pair.public_key;
  store.next_index_ = 0;
  store.cipher_ = std::move(cipher);
  store.acquire_lock();
  store.persist();
  return store;
}

KeyStore KeyStore::open(const std::filesystem::path& file,
                        std::optional<KeyStoreCipher> cipher) {
  KeyStore store;
  store.file_ = file;
  store.cipher_ = std::move(cipher);
  store.acquire_lock();

  Bytes raw;
  try {
    raw = read_file(file);
  } catch (...) {
    store.release_lock();
    throw;
  }
  if (raw.size() < 4 + 2 + 1 + 4 + 4 + 4 + 32 ||
      !std::equal(kMagic, kMagic + 4, raw.begin())) {
    throw FormatError("not a key state file");
  }
  if (load_u16(raw, 4) != kVersion) {
    throw FormatError("unsupported key state version", 4);
  }
  const std::uint8_t flags = raw[6];
  const auto params = XmssParams::from_oid(load_u32(raw, 7));
  if (!params) {
    throw FormatError("unknown parameter identifier in key state", 7);
  }
  store.next_index_ = load_u32(raw, 11);
  const std::uint32_t blob_len = load_u32(raw, 15);
  const std::size_t blob_off = 19;
  if (raw.size() != blob_off + blob_len + 32) {
    throw FormatError("key state file truncated", raw.size());
  }

  // Integrity tag covers everything written before it. A mismatch is fatal.
  const Hash256 tag = sha256(BytesView(raw).first(blob_off + blob_len));
  if (!std::equal(tag.begin(), tag.end(), raw.begin() + blob_off + blob_len)) {
    throw FormatError("key state integrity check failed");
  }

  Bytes blob(raw.begin() + blob_off, raw.begin() + blob_off + blob_len);
  if (flags & kFlagEncrypted) {
    if (!store.cipher_) {
      throw StateError("key state is encrypted and no cipher was supplied");
    }
    blob = store.cipher_->decrypt(blob);
  }
  store.secret_ = secret_from_blob(*params, blob);
  store.public_key_ = XmssPublicKey{params->oid, store.secret_.root,
                                    store.secret_.pub_seed};
  return store;
}

void KeyStore::persist() const {
  Bytes out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  out.push_back(cipher_ ? kFlagEncrypted : 0);
  put_u32(out, secret_.params.oid);
  put_u32(out, next_index_);
  Bytes blob = secret_blob(secret_);
  if (cipher_) {
    blob = cipher_->encrypt(blob);
  }
  put_u32(out, static_cast<std::uint32_t>(blob.size()));
  out.insert(out.end(), blob.begin(), blob.end());
  const Hash256 tag = sha256(out);
  out.insert(out.end(), tag.begin(), tag.end());
  write_file_durable(file_, out);
}

std::uint32_t KeyStore::reserve_index() {
  if (next_index_ >= secret_.params.leaf_count()) {
    throw KeyExhaustedError("all " +
                            std::to_string(secret_.params.leaf_count()) +
                            " one-time keys are spent");
  }
  const std::uint32_t reserved = next_index_;
  ++next_index_;
  try {
    persist();
  } catch (...) {
    // The reservation never happened: nothing was released to the caller.
    --next_index_;
    throw;
  }
  pending_.insert(reserved);
  return reserved;
}

XmssSignature KeyStore::sign_with_reserved(std::uint32_t index,
                                           BytesView message) {
  if (index >= next_index_) {
    throw StateError("index " + std::to_string(index) +
                     " was never reserved");
  }
  if (!pending_.contains(index)) {
    throw DoubleSignError("index " + std::to_string(index) +
                          " already consumed; refusing second signature");
  }
  XmssSignature sig = xmss_sign(secret_, index, message);
  pending_.erase(index);
  if (sign_observer_) {
    sign_observer_(index);
  }
  return sig;
}

std::uint32_t KeyStore::remaining_signatures() const {
  return secret_.params.leaf_count() - next_index_;
}

void KeyStore::set_sign_observer(std::function<void(std::uint32_t)> observer) {
  sign_observer_ = std::move(observer);
}

}  // namespace hbsca
