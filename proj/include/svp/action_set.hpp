#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace svp {

inline constexpr std::size_t kMaxActions = 64;

/// A subset of the action space stored as a bitmask (bit a set <=> a in set).
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr explicit ActionSet(std::uint64_t bits) : bits_(bits) {}

  static constexpr ActionSet full(std::size_t action_count) {
    return ActionSet(action_count >= 64 ? ~std::uint64_t{0}
                                        : (std::uint64_t{1} << action_count) - 1);
  }
  static constexpr ActionSet single(std::size_t action) {
    return ActionSet(std::uint64_t{1} << action);
  }

  constexpr bool contains(std::size_t action) const { return (bits_ >> action) & 1U; }
  constexpr void insert(std::size_t action) { bits_ |= std::uint64_t{1} << action; }
  constexpr void erase(std::size_t action) { bits_ &= ~(std::uint64_t{1} << action); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool is_subset_of(ActionSet other) const { return (bits_ & ~other.bits_) == 0; }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    out.reserve(size());
    for (std::uint64_t rest = bits_; rest != 0; rest &= rest - 1) {
      out.push_back(static_cast<std::size_t>(std::countr_zero(rest)));
    }
    return out;
  }

  friend constexpr bool operator==(ActionSet, ActionSet) = default;

 private:
  std::uint64_t bits_ = 0;
};

}  // namespace svp
