#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflectrm/serialization.hpp"

namespace reflectrm::detail {

// Writes records in index order as soon as every earlier index is done. A
// sink without a path discards everything.
class OrderedSink {
 public:
  explicit OrderedSink(const std::optional<std::filesystem::path>& path) {
    if (path) writer_ = std::make_unique<JsonlWriter>(*path);
  }

  void submit(std::size_t index, std::vector<nlohmann::json> records) {
    if (!writer_) return;
    std::lock_guard lock(mu_);
    pending_.emplace(index, std::move(records));
    for (auto it = pending_.find(next_); it != pending_.end(); it = pending_.find(next_)) {
      for (const auto& r : it->second) writer_->write(r);
      pending_.erase(it);
      ++next_;
    }
  }

 private:
  std::unique_ptr<JsonlWriter> writer_;
  std::mutex mu_;
  std::map<std::size_t, std::vector<nlohmann::json>> pending_;
  std::size_t next_ = 0;
};

}  // namespace reflectrm::detail
