#include "vpagent/asset_store.hpp"

#include "vpagent/error.hpp"
#include "vpagent/util.hpp"

namespace vpa {

std::string AssetStore::image_ref(const Image& img) {
  std::string header = std::to_string(img.width()) + "x" + std::to_string(img.height()) + ":";
  std::vector<std::uint8_t> buf(header.begin(), header.end());
  buf.insert(buf.end(), img.bytes().begin(), img.bytes().end());
  return "assets/img/" + sha256_hex(buf).substr(0, 24) + ".png";
}

std::string AssetStore::document_ref(const std::string& contents) {
  std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(contents.data()), contents.size());
  return "assets/doc/" + sha256_hex(bytes).substr(0, 24) + ".json";
}

std::string MemoryAssetStore::put_image(const Image& img) {
  auto ref = image_ref(img);
  std::lock_guard lock(mu_);
  images_.try_emplace(ref, img);
  return ref;
}

Image MemoryAssetStore::get_image(std::string_view ref) const {
  std::lock_guard lock(mu_);
  auto it = images_.find(ref);
  if (it == images_.end()) throw Error(ErrorCode::AssetNotFound, std::string(ref));
  return it->second;
}

std::string MemoryAssetStore::put_document(const std::string& contents) {
  auto ref = document_ref(contents);
  std::lock_guard lock(mu_);
  documents_.try_emplace(ref, contents);
  return ref;
}

std::string MemoryAssetStore::get_document(std::string_view ref) const {
  std::lock_guard lock(mu_);
  auto it = documents_.find(ref);
  if (it == documents_.end()) throw Error(ErrorCode::AssetNotFound, std::string(ref));
  return it->second;
}

bool MemoryAssetStore::contains(std::string_view ref) const {
  std::lock_guard lock(mu_);
  return images_.find(ref) != images_.end() || documents_.find(ref) != documents_.end();
}

std::size_t MemoryAssetStore::size() const {
  std::lock_guard lock(mu_);
  return images_.size() + documents_.size();
}

DirectoryAssetStore::DirectoryAssetStore(std::filesystem::path root) : root_(std::move(root)) {}

std::string DirectoryAssetStore::put_image(const Image& img) {
  auto ref = image_ref(img);
  const auto path = root_ / ref;
  std::lock_guard lock(mu_);
  if (!std::filesystem::exists(path)) {
    // Write to a temp name first so a crash never leaves a truncated asset.
    const auto tmp = path.string() + ".tmp";
    write_image(tmp, img);
    std::filesystem::rename(tmp, path);
  }
  return ref;
}

Image DirectoryAssetStore::get_image(std::string_view ref) const {
  return read_image(root_ / std::string(ref));
}

std::string DirectoryAssetStore::put_document(const std::string& contents) {
  auto ref = document_ref(contents);
  const auto path = root_ / ref;
  std::lock_guard lock(mu_);
  if (!std::filesystem::exists(path)) {
    const auto tmp = path.string() + ".tmp";
    write_file(tmp, contents);
    std::filesystem::rename(tmp, path);
  }
  return ref;
}

std::string DirectoryAssetStore::get_document(std::string_view ref) const {
  const auto path = root_ / std::string(ref);
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::AssetNotFound, std::string(ref));
  return read_file(path);
}

bool DirectoryAssetStore::contains(std::string_view ref) const {
  return std::filesystem::exists(root_ / std::string(ref));
}

}  // namespace vpa
