#include "waytrain/media.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "waytrain/error.hpp"

namespace waytrain {

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    fail(ErrorCode::Integrity, "sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

void MediaLibrary::put(MediaAsset asset) {
  require(!asset.id.empty(), ErrorCode::Input, "media asset id must not be empty");
  const std::string id = asset.id;
  assets_.insert_or_assign(id, std::move(asset));
}

bool MediaLibrary::contains(std::string_view id) const { return assets_.find(id) != assets_.end(); }

const MediaAsset* MediaLibrary::find(std::string_view id) const {
  const auto it = assets_.find(id);
  return it == assets_.end() ? nullptr : &it->second;
}

const MediaAsset& MediaLibrary::get(std::string_view id) const {
  const auto* asset = find(id);
  if (asset == nullptr) fail(ErrorCode::NotFound, "media asset '" + std::string(id) + "'");
  return *asset;
}

std::vector<std::string> MediaLibrary::ids() const {
  std::vector<std::string> out;
  out.reserve(assets_.size());
  for (const auto& [id, _] : assets_) out.push_back(id);
  return out;
}

}  // namespace waytrain
