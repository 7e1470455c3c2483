#ifndef QH_EXTENSION_HPP_
#define QH_EXTENSION_HPP_

// Validated construction of central extensions E_w.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qh/enumerate.hpp"
#include "qh/group.hpp"

namespace qh {

class CocycleError : public InvalidArgument {
 public:
  CocycleError(const std::string& what, std::vector<Element> witness)
      : InvalidArgument(what), witness_(std::move(witness)) {}
  const std::vector<Element>& witness() const noexcept { return witness_; }

 private:
  std::vector<Element> witness_;
};

struct CocycleCheck {
  bool normalized = true;
  bool identity_holds = true;
  std::size_t triples = 0;
  bool exhaustive = false;
  std::vector<Element> witness;  // failing pair or triple of base elements
};

// Sample used to validate a cocycle: the whole base when it is small and
// finite, otherwise the ball of radius 2.
inline std::vector<Element> cocycle_sample(const Group& base,
                                           std::size_t exhaustive_limit = 128) {
  if (base.is_finite()) {
    auto all = enumerate_all(base);
    if (all.size() <= exhaustive_limit) {
      return all;
    }
    all.resize(exhaustive_limit);
    return all;
  }
  return enumerate_ball(base, 2).elements;
}

// Checks w(1,c) = w(c,1) = 0 and
// w(c1,c2) + w(c1 c2, c3) = w(c2,c3) + w(c1, c2 c3) over sample^3.
inline CocycleCheck check_cocycle(const ExtensionGroup& e,
                                  const std::vector<Element>& sample) {
  CocycleCheck out;
  const Group& base = e.base();
  const Group& fib = e.fiber();
  const Element zero = fib.identity();
  out.exhaustive = base.is_finite() &&
                   sample.size() == enumerate_all(base).size();
  for (const auto& c : sample) {
    if (e.omega(base.identity(), c) != zero ||
        e.omega(c, base.identity()) != zero) {
      out.normalized = false;
      out.witness = {c};
      return out;
    }
  }
  for (const auto& c1 : sample) {
    for (const auto& c2 : sample) {
      const Element w12 = e.omega(c1, c2);
      const Element c12 = base.multiply(c1, c2);
      for (const auto& c3 : sample) {
        ++out.triples;
        Element lhs = fib.multiply(w12, e.omega(c12, c3));
        Element rhs = fib.multiply(e.omega(c2, c3),
                                   e.omega(c1, base.multiply(c2, c3)));
        if (lhs != rhs) {
          out.identity_holds = false;
          out.witness = {c1, c2, c3};
          return out;
        }
      }
    }
  }
  return out;
}

// Builds E_w and verifies that w is a normalized cocycle (exhaustively for
// finite bases up to 128 elements, on the radius-2 ball otherwise).
inline Group build_extension(std::vector<std::int64_t> fiber_moduli,
                             const Group& base, const Cocycle& cocycle,
                             nlohmann::json spec = nullptr) {
  auto impl = std::make_shared<ExtensionGroup>(std::move(fiber_moduli), base,
                                               cocycle, std::move(spec));
  CocycleCheck check = check_cocycle(*impl, cocycle_sample(base));
  if (!check.normalized) {
    throw CocycleError("cocycle is not normalized at c = " +
                           base.format(check.witness[0]),
                       check.witness);
  }
  if (!check.identity_holds) {
    throw CocycleError("cocycle identity fails at (" +
                           base.format(check.witness[0]) + ", " +
                           base.format(check.witness[1]) + ", " +
                           base.format(check.witness[2]) + ")",
                       check.witness);
  }
  return Group(std::move(impl));
}

// Integer Heisenberg group H_{2n} = E_w(Z, Z^{2n}) with w the standard
// symplectic form.
inline Group heisenberg_group(int n) {
  return build_extension({0}, free_abelian_group(static_cast<std::size_t>(2 * n)),
                         Cocycle::symplectic(n),
                         nlohmann::json{{"kind", "heisenberg"}, {"n", n}});
}

// E_w(A, Z/n) with the carry cocycle w(i, j) = [i + j >= n].
inline Group carry_extension(std::int64_t n,
                             std::vector<std::int64_t> fiber_moduli = {0}) {
  return build_extension(std::move(fiber_moduli), cyclic_group(n),
                         Cocycle::carry(n));
}

}  // namespace qh

#endif  // QH_EXTENSION_HPP_
