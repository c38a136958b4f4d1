#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

#include "vpagent/image.hpp"

namespace vpa {

/// Content-addressed store for images and small text documents referenced
/// from message parts. References are relative paths ("assets/img/<hash>.png")
/// so records stay valid when a run directory moves. Thread-safe.
class AssetStore {
 public:
  virtual ~AssetStore() = default;

  virtual std::string put_image(const Image& img) = 0;
  /// Throws AssetNotFound.
  virtual Image get_image(std::string_view ref) const = 0;
  virtual std::string put_document(const std::string& contents) = 0;
  virtual std::string get_document(std::string_view ref) const = 0;
  virtual bool contains(std::string_view ref) const = 0;

 protected:
  static std::string image_ref(const Image& img);
  static std::string document_ref(const std::string& contents);
};

class MemoryAssetStore final : public AssetStore {
 public:
  std::string put_image(const Image& img) override;
  Image get_image(std::string_view ref) const override;
  std::string put_document(const std::string& contents) override;
  std::string get_document(std::string_view ref) const override;
  bool contains(std::string_view ref) const override;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Image, std::less<>> images_;
  std::map<std::string, std::string, std::less<>> documents_;
};

/// Persists assets under `root` (normally the run directory).
class DirectoryAssetStore final : public AssetStore {
 public:
  explicit DirectoryAssetStore(std::filesystem::path root);

  std::string put_image(const Image& img) override;
  Image get_image(std::string_view ref) const override;
  std::string put_document(const std::string& contents) override;
  std::string get_document(std::string_view ref) const override;
  bool contains(std::string_view ref) const override;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
};

}  // namespace vpa
