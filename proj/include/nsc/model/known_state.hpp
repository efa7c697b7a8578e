#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nsc/error.hpp"

namespace nsc {

/// What is known about the patient's symptoms so far: two multi-hot vectors
/// over the symptom vocabulary. A symptom is never in both.
class KnownState {
 public:
  KnownState() = default;
  explicit KnownState(std::size_t num_symptoms) : present_(num_symptoms, 0), absent_(num_symptoms, 0) {}

  std::size_t size() const noexcept { return present_.size(); }
  const std::vector<std::uint8_t>& present() const noexcept { return present_; }
  const std::vector<std::uint8_t>& absent() const noexcept { return absent_; }

  bool is_present(std::size_t id) const { return present_.at(id) != 0; }
  bool is_absent(std::size_t id) const { return absent_.at(id) != 0; }
  bool is_known(std::size_t id) const { return is_present(id) || is_absent(id); }

  /// Records an answer. Repeating the same answer is a no-op; contradicting
  /// an earlier one throws.
  void reveal(std::size_t id, bool present) {
    if (id >= size()) throw Error("symptom id " + std::to_string(id) + " out of range");
    if ((present && absent_[id]) || (!present && present_[id]))
      throw Error("symptom " + std::to_string(id) + " is already known with the opposite answer");
    (present ? present_ : absent_)[id] = 1;
  }

  std::size_t known_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += (present_[i] | absent_[i]);
    return n;
  }
  std::size_t unknown_count() const { return size() - known_count(); }

  friend bool operator==(const KnownState&, const KnownState&) = default;

 private:
  std::vector<std::uint8_t> present_;
  std::vector<std::uint8_t> absent_;
};

}  // namespace nsc
