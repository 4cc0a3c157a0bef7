#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <jointrait/archive.hpp>

namespace jointrait::service {

/// Immutable archives keyed by id. `loading()` is true while a directory
/// scan is in progress; requests are answered with 503 meanwhile.
class ModelStore {
 public:
  /// Reads every *.jma under `dir` (sorted by file name). Unreadable files
  /// are recorded in errors() and skipped; a duplicate id keeps the first.
  void load_directory(const std::string& dir);
  /// False when the id is already present.
  bool add(std::shared_ptr<const PosteriorArchive> archive);

  void set_loading(bool loading) { loading_ = loading; }
  bool loading() const { return loading_; }

  std::shared_ptr<const PosteriorArchive> find(const std::string& id) const;
  std::vector<std::shared_ptr<const PosteriorArchive>> all() const;
  std::size_t size() const;
  std::vector<std::string> errors() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const PosteriorArchive>> models_;
  std::vector<std::string> errors_;
  std::atomic<bool> loading_{false};
};

}  // namespace jointrait::service
