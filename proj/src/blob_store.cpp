#include "cocreate/blob_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>

#include "cocreate/digest.hpp"
#include "cocreate/error.hpp"

namespace cocreate {

namespace {

bool is_hex_ref(const std::string& ref) {
  return ref.size() == 64 && ref.find_first_not_of("0123456789abcdef") == std::string::npos;
}

void write_durably(const std::filesystem::path& path, const Bytes& bytes) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot create " + path.string());
  std::size_t written = 0;
  while (written < bytes.size()) {
    const auto n = ::write(fd, bytes.data() + written, bytes.size() - written);
    if (n <= 0) {
      ::close(fd);
      throw StorageError("short write to " + path.string());
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw StorageError("fsync failed for " + path.string());
  }
  ::close(fd);
}

}  // namespace

std::string MemoryBlobStore::put(const Bytes& bytes) {
  auto ref = sha256_hex(bytes);
  std::lock_guard lock(mu_);
  blobs_.try_emplace(ref, bytes);
  return ref;
}

std::optional<Bytes> MemoryBlobStore::get(const std::string& ref) const {
  std::lock_guard lock(mu_);
  const auto it = blobs_.find(ref);
  if (it == blobs_.end()) return std::nullopt;
  return it->second;
}

std::size_t MemoryBlobStore::size() const {
  std::lock_guard lock(mu_);
  return blobs_.size();
}

FileBlobStore::FileBlobStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path FileBlobStore::path_for(const std::string& ref) const {
  return dir_ / (ref + ".png");
}

std::string FileBlobStore::put(const Bytes& bytes) {
  auto ref = sha256_hex(bytes);
  const auto target = path_for(ref);
  std::lock_guard lock(mu_);
  if (std::filesystem::exists(target)) return ref;
  const auto tmp = dir_ / (ref + ".tmp");
  write_durably(tmp, bytes);
  std::filesystem::rename(tmp, target);
  return ref;
}

std::optional<Bytes> FileBlobStore::get(const std::string& ref) const {
  if (!is_hex_ref(ref)) return std::nullopt;
  std::ifstream in(path_for(ref), std::ios::binary);
  if (!in) return std::nullopt;
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::size_t FileBlobStore::size() const {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".png") ++n;
  }
  return n;
}

}  // namespace cocreate
