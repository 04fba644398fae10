#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace waytrain {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// Opaque media blob (photo, video, audio) addressed by id.
struct MediaAsset {
  std::string id;
  std::string bytes;

  std::string sha256() const { return sha256_hex(bytes); }
  friend bool operator==(const MediaAsset&, const MediaAsset&) = default;
};

class MediaLibrary {
public:
  void put(MediaAsset asset);
  bool contains(std::string_view id) const;
  /// Throws NotFound.
  const MediaAsset& get(std::string_view id) const;
  const MediaAsset* find(std::string_view id) const;
  std::vector<std::string> ids() const;

private:
  std::map<std::string, MediaAsset, std::less<>> assets_;
};

}  // namespace waytrain
