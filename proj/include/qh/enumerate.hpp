#ifndef QH_ENUMERATE_HPP_
#define QH_ENUMERATE_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "qh/element.hpp"
#include "qh/error.hpp"
#include "qh/group.hpp"

namespace qh {

inline constexpr std::size_t kDefaultBallCap = 5'000'000;

// Ball of radius R about the identity in the word metric of the declared
// generators. Elements are ordered by BFS depth, then by payload.
struct Ball {
  int radius = 0;
  std::vector<Element> elements;
  std::vector<int> depth;

  std::size_t size() const noexcept { return elements.size(); }

  // Number of elements of depth <= r.
  std::size_t count_within(int r) const {
    return static_cast<std::size_t>(
        std::upper_bound(depth.begin(), depth.end(), r) - depth.begin());
  }
};

namespace detail {

// BFS layers until `radius` is reached or no new elements appear.
inline Ball bfs(const Group& g, int radius, std::size_t cap) {
  if (radius < 0) {
    throw InvalidArgument("ball radius must be non-negative");
  }
  Ball ball;
  ball.radius = radius;
  std::unordered_map<Element, int, ElementHash> seen;
  std::vector<Element> layer{g.identity()};
  for (int d = 0; !layer.empty(); ++d) {
    for (auto& e : layer) {
      seen.emplace(e, d);
      ball.elements.push_back(e);
      ball.depth.push_back(d);
    }
    if (ball.elements.size() > cap) {
      throw CapExceeded("ball enumeration exceeds cap " + std::to_string(cap));
    }
    if (d == radius) {
      break;
    }
    std::vector<Element> next;
    for (const auto& e : layer) {
      for (const auto& s : g.generators()) {
        Element y = g.multiply(e, s);
        if (seen.emplace(y, d + 1).second) {
          next.push_back(std::move(y));
        }
      }
    }
    std::sort(next.begin(), next.end());
    layer = std::move(next);
  }
  return ball;
}

}  // namespace detail

inline Ball enumerate_ball(const Group& g, int radius,
                           std::size_t cap = kDefaultBallCap) {
  return detail::bfs(g, radius, cap);
}

// All elements of a finite group in BFS order.
inline std::vector<Element> enumerate_all(const Group& g,
                                          std::size_t cap = kDefaultOrderCap) {
  if (!g.is_finite()) {
    throw InvalidArgument("enumerate_all needs a finite group, got " +
                          g.describe());
  }
  if (const auto* fin = g.as<FiniteGroupImpl>()) {
    if (fin->order() > cap) {
      throw CapExceeded("group order " + std::to_string(fin->order()) +
                        " exceeds cap " + std::to_string(cap));
    }
    return fin->elements();
  }
  Ball b = detail::bfs(g, std::numeric_limits<int>::max(), cap);
  return std::move(b.elements);
}

// 1 + 2r((2r-1)^R - 1)/(2r-2), or 2R+1 for rank 1.
inline std::int64_t free_ball_size(int rank, int radius) {
  if (rank == 1) {
    return 2 * static_cast<std::int64_t>(radius) + 1;
  }
  std::int64_t p = 1;
  for (int i = 0; i < radius; ++i) {
    p = checked::mul(p, 2 * rank - 1);
  }
  return 1 + checked::mul(2 * rank, p - 1) / (2 * rank - 2);
}

}  // namespace qh

#endif  // QH_ENUMERATE_HPP_
