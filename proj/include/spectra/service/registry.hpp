#pragma once

#include <algorithm>
#include <any>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "spectra/core/error.hpp"
#include "spectra/core/manifest.hpp"

namespace spectra::service {

class NotFoundError : public Error {
public:
  using Error::Error;
};

/// Datasets under a root directory, one sub-directory with a manifest.json each, plus a
/// cache of derived products keyed by the dataset fingerprint and a caller-supplied key.
class DatasetRegistry {
public:
  explicit DatasetRegistry(std::filesystem::path root, bool cache_enabled = true)
      : root_(std::move(root)), cache_enabled_(cache_enabled) {}

  /// Root from SPECTRA_DATA_DIR, falling back to ./data.
  static std::filesystem::path env_root() {
    const char* dir = std::getenv("SPECTRA_DATA_DIR");
    return dir && *dir ? std::filesystem::path(dir) : std::filesystem::path("data");
  }

  const std::filesystem::path& root() const { return root_; }
  bool cache_enabled() const { return cache_enabled_; }

  static bool valid_id(const std::string& id) {
    if (id.empty() || id.front() == '.') return false;
    for (char c : id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
  }

  /// Ids of every dataset, sorted.
  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    std::error_code ec;
    if (!std::filesystem::is_directory(root_, ec)) return out;
    for (const auto& e : std::filesystem::directory_iterator(root_, ec)) {
      const std::string id = e.path().filename().string();
      if (e.is_directory() && valid_id(id) && std::filesystem::exists(e.path() / "manifest.json")) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::filesystem::path manifest_path(const std::string& id) const {
    if (!valid_id(id)) throw NotFoundError("unknown dataset '" + id + "'");
    const auto p = root_ / id / "manifest.json";
    if (!std::filesystem::exists(p)) throw NotFoundError("unknown dataset '" + id + "'");
    return p;
  }

  Manifest manifest(const std::string& id) const { return read_manifest(manifest_path(id)); }

  /// Hash of the manifest bytes and the size and modification time of every referenced file.
  std::string fingerprint(const std::string& id) const {
    const auto path = manifest_path(id);
    std::string material = pfm::read_file(path);
    const Manifest m = read_manifest(path);
    for (const auto& f : m.files) {
      std::error_code ec;
      const auto p = m.root / f.path;
      material += "|" + f.path + ":" + std::to_string(std::filesystem::file_size(p, ec));
      const auto t = std::filesystem::last_write_time(p, ec);
      material += ":" + std::to_string(t.time_since_epoch().count());
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(material));
    return buf;
  }

  /// Returns the cached value for (id, key) or computes it. Concurrent callers asking for the
  /// same missing entry wait on a single computation. Entries computed for an older
  /// fingerprint of the dataset are dropped.
  template <class T>
  std::shared_ptr<const T> cached(const std::string& id, const std::string& key, const std::function<T()>& compute) {
    if (!cache_enabled_) return std::make_shared<const T>(compute());
    const std::string fp = fingerprint(id);
    std::promise<std::any> promise;
    std::shared_future<std::any> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto& slot = datasets_[id];
      if (slot.fingerprint != fp) {
        slot.fingerprint = fp;
        slot.entries.clear();
      }
      auto it = slot.entries.find(key);
      if (it == slot.entries.end()) {
        future = promise.get_future().share();
        slot.entries.emplace(key, future);
        owner = true;
      } else {
        future = it->second;
      }
    }
    if (owner) {
      try {
        promise.set_value(std::any(std::make_shared<const T>(compute())));
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        auto& slot = datasets_[id];
        if (slot.fingerprint == fp) slot.entries.erase(key);
      }
    }
    return std::any_cast<std::shared_ptr<const T>>(future.get());
  }

  std::size_t cache_size(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = datasets_.find(id);
    return it == datasets_.end() ? 0 : it->second.entries.size();
  }

private:
  struct Slot {
    std::string fingerprint;
    std::map<std::string, std::shared_future<std::any>> entries;
  };

  std::filesystem::path root_;
  bool cache_enabled_;
  mutable std::mutex mutex_;
  std::map<std::string, Slot> datasets_;
};

} // namespace spectra::service
