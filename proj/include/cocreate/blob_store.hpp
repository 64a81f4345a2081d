#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "cocreate/image.hpp"

namespace cocreate {

// Content-addressed byte storage: the reference of a blob is the SHA-256
// of its bytes, so storing the same bytes twice keeps one copy.
class BlobStore {
 public:
  virtual ~BlobStore() = default;
  virtual std::string put(const Bytes& bytes) = 0;
  virtual std::optional<Bytes> get(const std::string& ref) const = 0;
  virtual std::size_t size() const = 0;
};

class MemoryBlobStore final : public BlobStore {
 public:
  std::string put(const Bytes& bytes) override;
  std::optional<Bytes> get(const std::string& ref) const override;
  std::size_t size() const override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Bytes> blobs_;
};

// One "<sha256>.png" file per blob, written via a temp file and rename.
class FileBlobStore final : public BlobStore {
 public:
  explicit FileBlobStore(std::filesystem::path dir);
  std::string put(const Bytes& bytes) override;
  std::optional<Bytes> get(const std::string& ref) const override;
  std::size_t size() const override;
  std::filesystem::path path_for(const std::string& ref) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

}  // namespace cocreate
