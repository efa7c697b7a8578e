#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "nsc/error.hpp"

namespace nsc {

/// Bijective name <-> dense id table for one kind of label.
class NameIndex {
 public:
  NameIndex() = default;
  explicit NameIndex(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (!ids_.emplace(names_[i], i).second) throw ConfigError("duplicate name '" + names_[i] + "'");
  }

  /// Sorted, de-duplicated names so the id assignment does not depend on
  /// record order.
  static NameIndex from_set(const std::set<std::string>& names) {
    return NameIndex(std::vector<std::string>(names.begin(), names.end()));
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t id) const { return names_.at(id); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t id(const std::string& name) const {
    auto r = find(name);
    if (!r) throw UnknownNameError(name);
    return *r;
  }

  friend bool operator==(const NameIndex& a, const NameIndex& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct Vocabulary {
  NameIndex symptoms;
  NameIndex diseases;

  std::size_t num_symptoms() const noexcept { return symptoms.size(); }
  std::size_t num_diseases() const noexcept { return diseases.size(); }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

}  // namespace nsc
