// SPDX-License-Identifier: Apache-2.0

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>

#include <memory>

#include "hbsca/certkit.hpp"
#include "hbsca/errors.hpp"

namespace hbsca {

namespace {

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct BnDeleter {
  void operator()(BIGNUM* p) const { BN_free(p); }
};
struct ParamBldDeleter {
  void operator()(OSSL_PARAM_BLD* p) const { OSSL_PARAM_BLD_free(p); }
};
struct ParamDeleter {
  void operator()(OSSL_PARAM* p) const { OSSL_PARAM_free(p); }
};

using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

PkeyPtr key_from_parts(BytesView public_point, BytesView secret_scalar) {
  std::unique_ptr<OSSL_PARAM_BLD, ParamBldDeleter> bld(OSSL_PARAM_BLD_new());
  std::unique_ptr<BIGNUM, BnDeleter> priv;
  if (!bld ||
      !OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME,
                                       "prime256v1", 0)) {
    throw Error("OpenSSL parameter build failed");
  }
  if (!public_point.empty() &&
      !OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY,
                                        public_point.data(),
                                        public_point.size())) {
    throw Error("OpenSSL parameter build failed");
  }
  if (!secret_scalar.empty()) {
    priv.reset(BN_bin2bn(secret_scalar.data(),
                         static_cast<int>(secret_scalar.size()), nullptr));
    if (!priv || !OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_PRIV_KEY,
                                         priv.get())) {
      throw Error("OpenSSL parameter build failed");
    }
  }
  std::unique_ptr<OSSL_PARAM, ParamDeleter> params(
      OSSL_PARAM_BLD_to_param(bld.get()));
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter> ctx(
      EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
  EVP_PKEY* raw = nullptr;
  const int selection =
      secret_scalar.empty() ? EVP_PKEY_PUBLIC_KEY : EVP_PKEY_KEYPAIR;
  if (!params || !ctx || EVP_PKEY_fromdata_init(ctx.get()) <= 0 ||
      EVP_PKEY_fromdata(ctx.get(), &raw, selection, params.get()) <= 0) {
    throw Error("cannot reconstruct P-256 key");
  }
  return PkeyPtr(raw);
}

ClassicalKeyPair p256_keygen() {
  PkeyPtr key(EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256"));
  if (!key) {
    throw Error("P-256 key generation failed");
  }

  ClassicalKeyPair out;
  std::size_t point_len = 0;
  if (!EVP_PKEY_get_octet_string_param(key.get(),
                                       OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY,
                                       nullptr, 0, &point_len)) {
    throw Error("cannot read public point size");
  }
  out.public_key.resize(point_len);
  if (!EVP_PKEY_get_octet_string_param(
          key.get(), OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY, out.public_key.data(),
          out.public_key.size(), &point_len)) {
    throw Error("cannot read public point");
  }
  out.public_key.resize(point_len);

  BIGNUM* priv_raw = nullptr;
  if (!EVP_PKEY_get_bn_param(key.get(), OSSL_PKEY_PARAM_PRIV_KEY, &priv_raw)) {
    throw Error("cannot read private scalar");
  }
  std::unique_ptr<BIGNUM, BnDeleter> priv(priv_raw);
  out.secret_key.resize(32);
  if (BN_bn2binpad(priv.get(), out.secret_key.data(), 32) != 32) {
    throw Error("unexpected private scalar size");
  }
  return out;
}

Bytes p256_sign(BytesView secret, BytesView message) {
  if (secret.size() != 32) {
    throw ParamError("P-256 secret must be a 32-byte scalar");
  }
  PkeyPtr key = key_from_parts({}, secret);
  std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr,
                                 key.get()) <= 0) {
    throw Error("ECDSA sign init failed");
  }
  std::size_t sig_len = 0;
  if (EVP_DigestSign(ctx.get(), nullptr, &sig_len, message.data(),
                     message.size()) <= 0) {
    throw Error("ECDSA sign sizing failed");
  }
  Bytes sig(sig_len);
  if (EVP_DigestSign(ctx.get(), sig.data(), &sig_len, message.data(),
                     message.size()) <= 0) {
    throw Error("ECDSA sign failed");
  }
  sig.resize(sig_len);
  return sig;
}

bool p256_verify(BytesView public_key, BytesView message, BytesView sig) {
  if (public_key.size() != 65 || public_key[0] != 0x04) {
    return false;
  }
  try {
    PkeyPtr key = key_from_parts(public_key, {});
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr,
                                     key.get()) <= 0) {
      return false;
    }
    return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), message.data(),
                            message.size()) == 1;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

const ClassicalSuite& ecdsa_p256_sha256() {
  static const ClassicalSuite suite{
      "ecdsa-p256-sha256",
      p256_keygen,
      p256_sign,
      p256_verify,
  };
  return suite;
}

}  // namespace hbsca
