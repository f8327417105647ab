#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "svdp/errors.hpp"

namespace svdp {

/// Incremental SHA-1, hex digest.
class Sha1 {
 public:
  Sha1() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha1(), nullptr) != 1) throw IoError("sha1: init failed");
  }

  Sha1& update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw IoError("sha1: update failed");
    return *this;
  }
  Sha1& update(const std::string& s) { return update(s.data(), s.size()); }
  Sha1& update(const std::vector<std::uint8_t>& v) { return update(v.data(), v.size()); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw IoError("sha1: final failed");
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

/// Git blob id: sha1("blob <size>\0" + content).
inline std::string git_blob_hash(const std::vector<std::uint8_t>& content) {
  Sha1 h;
  const std::string header = "blob " + std::to_string(content.size());
  h.update(header.data(), header.size() + 1);  // includes the terminating NUL
  h.update(content);
  return h.hex();
}

}  // namespace svdp
