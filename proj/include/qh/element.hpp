#ifndef QH_ELEMENT_HPP_
#define QH_ELEMENT_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace qh {

// Canonical payload of a group element. The meaning of the payload depends on
// the owning group:
//   free          data = letter codes (+g / -g), parts empty
//   abelian       data = coordinates (reduced modulo the moduli)
//   permutation   data = one-line image array, 0-based
//   table         data = {index}
//   extension     data = fiber coordinates, parts = {base element}
//   product       data empty, parts = components
// Equality is payload equality; the order is lexicographic on (data, parts).
class Element {
 public:
  using Scalar = std::int64_t;

  Element() = default;
  explicit Element(std::vector<Scalar> data) : data_(std::move(data)) {}
  Element(std::vector<Scalar> data, std::vector<Element> parts)
      : data_(std::move(data)), parts_(std::move(parts)) {}

  const std::vector<Scalar>& data() const noexcept { return data_; }
  const std::vector<Element>& parts() const noexcept { return parts_; }

  friend bool operator==(const Element& x, const Element& y) {
    return x.data_ == y.data_ && x.parts_ == y.parts_;
  }

  friend std::strong_ordering operator<=>(const Element& x, const Element& y) {
    if (auto c = x.data_ <=> y.data_; c != 0) {
      return c;
    }
    const std::size_t n = std::min(x.parts_.size(), y.parts_.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (auto c = x.parts_[i] <=> y.parts_[i]; c != 0) {
        return c;
      }
    }
    return x.parts_.size() <=> y.parts_.size();
  }

  std::size_t hash() const noexcept {
    std::size_t h = 0x9e3779b97f4a7c15ULL ^ data_.size();
    for (Scalar s : data_) {
      h ^= std::hash<Scalar>{}(s) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    for (const Element& p : parts_) {
      h ^= p.hash() + 0x517cc1b727220a95ULL + (h << 6) + (h >> 2);
    }
    return h;
  }

 private:
  std::vector<Scalar> data_;
  std::vector<Element> parts_;
};

struct ElementHash {
  std::size_t operator()(const Element& e) const noexcept { return e.hash(); }
};

}  // namespace qh

#endif  // QH_ELEMENT_HPP_
