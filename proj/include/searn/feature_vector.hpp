#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace searn {

// Sparse feature vector: sorted (index, value) pairs, unique indices, no
// stored zeros.  Built by accumulating raw emissions and then finalizing.
class FeatureVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  FeatureVector() = default;

  static FeatureVector from_entries(std::vector<Entry> raw) {
    FeatureVector f;
    std::sort(raw.begin(), raw.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    for (const Entry& e : raw) {
      if (!f.entries_.empty() && f.entries_.back().first == e.first)
        f.entries_.back().second += e.second;
      else
        f.entries_.push_back(e);
    }
    f.entries_.erase(std::remove_if(f.entries_.begin(), f.entries_.end(),
                                    [](const Entry& e) { return e.second == 0.0; }),
                     f.entries_.end());
    return f;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const FeatureVector& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Entry> entries_;
};

// FNV-1a, 64 bit.  All text features hash through this.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Hashed feature space with a lexical/structural index-range partition:
// lexical features land in [0, half), structural (prediction-dependent)
// features in [half, size).  The partition lets callers verify that a
// feature set is independent of past decisions by index range alone.
class FeatureHasher {
 public:
  explicit FeatureHasher(int bits = 20) : bits_(bits), half_(1u << (bits - 1)) {}

  int bits() const { return bits_; }
  std::uint32_t space_size() const { return 1u << bits_; }
  std::uint32_t structural_floor() const { return half_; }

  std::uint32_t lexical(std::string_view s) const {
    return static_cast<std::uint32_t>(fnv1a(s) % half_);
  }
  std::uint32_t structural(std::string_view s) const {
    return half_ + static_cast<std::uint32_t>(fnv1a(s) % half_);
  }

 private:
  int bits_;
  std::uint32_t half_;
};

}  // namespace searn
