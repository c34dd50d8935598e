#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dtnarrate {

// Yes/no importance per displayed feature, in display order.
class FeatureSelection {
 public:
  FeatureSelection() = default;
  explicit FeatureSelection(std::size_t n) : bits_(n, 0) {}
  explicit FeatureSelection(std::vector<std::uint8_t> bits);

  static FeatureSelection from_features(const std::vector<std::string>& displayed,
                                        const std::vector<std::string>& selected);

  std::size_t size() const { return bits_.size(); }
  bool test(std::size_t i) const { return bits_.at(i) != 0; }
  void set(std::size_t i, bool on = true) { bits_.at(i) = on ? 1 : 0; }
  std::size_t count() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool operator==(const FeatureSelection&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

}  // namespace dtnarrate
