#include "jointrait_service/model_store.hpp"

#include <algorithm>
#include <filesystem>

#include <jointrait/error.hpp>

namespace jointrait::service {

void ModelStore::load_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    std::lock_guard lock(mutex_);
    errors_.push_back("'" + dir + "' is not a directory");
    return;
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jma") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      auto archive = std::make_shared<const PosteriorArchive>(read_archive(f.string()));
      const std::string id = archive->id;
      if (!add(std::move(archive))) {
        std::lock_guard lock(mutex_);
        errors_.push_back(f.filename().string() + ": duplicate model id " + id + ", keeping the earlier file");
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      errors_.push_back(f.filename().string() + ": " + e.what());
    }
  }
}

bool ModelStore::add(std::shared_ptr<const PosteriorArchive> archive) {
  std::lock_guard lock(mutex_);
  const std::string id = archive->id;
  return models_.try_emplace(id, std::move(archive)).second;
}

std::shared_ptr<const PosteriorArchive> ModelStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = models_.find(id);
  return it == models_.end() ? nullptr : it->second;
}

std::vector<std::shared_ptr<const PosteriorArchive>> ModelStore::all() const {
  std::lock_guard lock(mutex_);
  std::vector<std::shared_ptr<const PosteriorArchive>> out;
  for (const auto& [id, a] : models_) out.push_back(a);
  return out;
}

std::size_t ModelStore::size() const {
  std::lock_guard lock(mutex_);
  return models_.size();
}

std::vector<std::string> ModelStore::errors() const {
  std::lock_guard lock(mutex_);
  return errors_;
}

}  // namespace jointrait::service
