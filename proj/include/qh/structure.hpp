#ifndef QH_STRUCTURE_HPP_
#define QH_STRUCTURE_HPP_

// Finite-group structure: subgroups, outer classes, kernel coset graphs,
// projections, the quasi-split audit and the constructibility pipeline.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qh/defect.hpp"
#include "qh/enumerate.hpp"
#include "qh/extension.hpp"
#include "qh/group.hpp"
#include "qh/qmap.hpp"
#include "qh/word.hpp"

namespace qh {

inline constexpr std::size_t kDefaultAutCap = 64;

using ElementSet = std::unordered_set<Element, ElementHash>;

//------------------------------------------------------------------------------
// Finite views
//------------------------------------------------------------------------------

class FiniteGroupView {
 public:
  explicit FiniteGroupView(Group h, std::size_t cap = kDefaultOrderCap)
      : h_(std::move(h)) {
    if (!h_.is_finite()) {
      throw InvalidArgument("finite view of an infinite group " + h_.describe());
    }
    elements_ = enumerate_all(h_, cap);
    h_.canonical_sort(elements_);
    for (std::size_t i = 0; i < elements_.size(); ++i) {
      index_.emplace(elements_[i], i);
    }
    inverse_.resize(elements_.size());
    for (std::size_t i = 0; i < elements_.size(); ++i) {
      inverse_[i] = index(h_.invert(elements_[i]));
    }
    for (const auto& g : h_.generators()) generators_.push_back(index(g));
  }

  const Group& group() const noexcept { return h_; }
  std::size_t order() const noexcept { return elements_.size(); }
  const std::vector<Element>& elements() const noexcept { return elements_; }
  const Element& at(std::size_t i) const { return elements_.at(i); }
  const std::vector<std::size_t>& generators() const noexcept {
    return generators_;
  }

  std::size_t index(const Element& x) const {
    auto it = index_.find(x);
    if (it == index_.end()) {
      throw GroupMismatch("element " + h_.format(x) + " is not in the view of " +
                          h_.describe());
    }
    return it->second;
  }
  std::size_t inverse(std::size_t i) const { return inverse_.at(i); }
  std::size_t mul(std::size_t i, std::size_t j) const {
    return index(h_.multiply(elements_.at(i), elements_.at(j)));
  }

 private:
  Group h_;
  std::vector<Element> elements_;
  std::unordered_map<Element, std::size_t, ElementHash> index_;
  std::vector<std::size_t> inverse_;
  std::vector<std::size_t> generators_;
};

// <S> in canonical order.
inline std::vector<Element> closure(const Group& h, std::vector<Element> s) {
  if (s.empty()) return {h.identity()};
  return subgroup_ball(h, std::move(s), -1).elements;
}

inline std::vector<Element> centralizer(const FiniteGroupView& v,
                                        const std::vector<Element>& s) {
  const Group& h = v.group();
  std::vector<Element> out;
  for (const auto& x : v.elements()) {
    if (std::all_of(s.begin(), s.end(),
                    [&](const Element& y) { return h.commute(x, y); })) {
      out.push_back(x);
    }
  }
  return out;
}

// {h : h S h^-1 = S} for a finite set S.
inline std::vector<Element> normalizer(const FiniteGroupView& v,
                                       const std::vector<Element>& s) {
  const Group& h = v.group();
  const ElementSet set(s.begin(), s.end());
  std::vector<Element> out;
  for (const auto& x : v.elements()) {
    const Element xi = h.invert(x);
    bool ok = true;
    for (const auto& y : set) {
      if (!set.contains(h.multiply(h.multiply(x, y), xi))) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(x);
  }
  return out;
}

inline bool is_subset(const std::vector<Element>& a,
                      const std::vector<Element>& b) {
  const ElementSet sb(b.begin(), b.end());
  return std::all_of(a.begin(), a.end(),
                     [&](const Element& x) { return sb.contains(x); });
}

//------------------------------------------------------------------------------
// Automorphisms of a finite subgroup
//------------------------------------------------------------------------------

using ImageList = std::vector<std::size_t>;  // indices into Delta

struct AutomorphismRecord {
  Element conjugator;              // h with ad(h) d = h d h^-1
  ImageList images;                // ad(h) on Delta's canonical order
  bool inner = false;
  std::optional<Element> witness;  // y in Delta with ad(y) = ad(h) on Delta
};

// Delta as an indexed subgroup with conjugation on its elements.
class SubgroupAut {
 public:
  SubgroupAut(Group h, std::vector<Element> delta,
              std::size_t cap = kDefaultAutCap)
      : h_(std::move(h)), delta_(std::move(delta)) {
    if (delta_.size() > cap) {
      throw CapExceeded("automorphism computation needs |Delta| <= " +
                        std::to_string(cap) + ", got " +
                        std::to_string(delta_.size()));
    }
    for (std::size_t i = 0; i < delta_.size(); ++i) index_.emplace(delta_[i], i);
    for (const auto& y : delta_) inner_.push_back(ad(y));
  }

  const std::vector<Element>& delta() const noexcept { return delta_; }
  const std::vector<ImageList>& inner() const noexcept { return inner_; }

  bool normalizes(const Element& x) const {
    const Element xi = h_.invert(x);
    return std::all_of(delta_.begin(), delta_.end(), [&](const Element& d) {
      return index_.contains(h_.multiply(h_.multiply(x, d), xi));
    });
  }

  // ad(x) restricted to Delta; requires x to normalize Delta.
  ImageList ad(const Element& x) const {
    const Element xi = h_.invert(x);
    ImageList out;
    out.reserve(delta_.size());
    for (const auto& d : delta_) {
      auto it = index_.find(h_.multiply(h_.multiply(x, d), xi));
      if (it == index_.end()) {
        throw InvalidArgument(h_.format(x) + " does not normalize Delta");
      }
      out.push_back(it->second);
    }
    return out;
  }

  static ImageList compose(const ImageList& a, const ImageList& b) {
    ImageList out(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = a[b[i]];
    return out;
  }

  // Least image list in the class a . Inn(Delta).
  ImageList outer_key(const ImageList& a) const {
    ImageList best;
    for (const auto& in : inner_) {
      ImageList c = compose(a, in);
      if (best.empty() || c < best) best = std::move(c);
    }
    return best;
  }

  std::optional<std::size_t> inner_witness(const ImageList& a) const {
    for (std::size_t i = 0; i < inner_.size(); ++i) {
      if (inner_[i] == a) return i;
    }
    return std::nullopt;
  }

 private:
  Group h_;
  std::vector<Element> delta_;
  std::unordered_map<Element, std::size_t, ElementHash> index_;
  std::vector<ImageList> inner_;
};

inline AutomorphismRecord outer_class(const SubgroupAut& aut, const Group& h,
                                      const Element& x) {
  AutomorphismRecord rec;
  rec.conjugator = x;
  rec.images = aut.ad(x);
  if (auto w = aut.inner_witness(rec.images)) {
    rec.inner = true;
    rec.witness = aut.delta()[*w];
    // Re-verify ad(y) = ad(x) on Delta directly.
    for (const auto& d : aut.delta()) {
      if (h.conjugate(d, h.invert(x)) != h.conjugate(d, h.invert(*rec.witness))) {
        throw Error("inner witness failed re-verification");
      }
    }
  }
  return rec;
}

inline AutomorphismRecord outer_class(const Group& h,
                                      const std::vector<Element>& delta,
                                      const Element& x,
                                      std::size_t cap = kDefaultAutCap) {
  SubgroupAut aut(h, delta, cap);
  return outer_class(aut, h, x);
}

// The subgroup of Out(Delta) generated by the classes of ad(x_i), as a table
// group with generators in the order given.
struct OuterImage {
  Group group;
  std::vector<ImageList> keys;      // element index -> class key
  std::vector<Element> generators;  // class of each ad(x_i)
};

inline OuterImage outer_image(const SubgroupAut& aut,
                              const std::vector<Element>& xs) {
  std::map<ImageList, std::size_t> pos;
  std::vector<ImageList> keys;
  auto add = [&](ImageList k) {
    auto [it, fresh] = pos.emplace(k, keys.size());
    if (fresh) keys.push_back(std::move(k));
    return it->second;
  };
  ImageList id(aut.delta().size());
  for (std::size_t i = 0; i < id.size(); ++i) id[i] = i;
  add(aut.outer_key(id));
  std::vector<std::size_t> gens;
  std::vector<ImageList> gen_keys;
  for (const auto& x : xs) {
    ImageList k = aut.outer_key(aut.ad(x));
    gens.push_back(add(k));
    gen_keys.push_back(std::move(k));
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (const auto& g : gen_keys) {
      add(aut.outer_key(SubgroupAut::compose(keys[i], g)));
    }
  }
  const std::size_t n = keys.size();
  std::vector<std::vector<std::int64_t>> table(n, std::vector<std::int64_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      auto it = pos.find(aut.outer_key(SubgroupAut::compose(keys[i], keys[j])));
      if (it == pos.end()) {
        throw Error("outer image is not closed under composition");
      }
      table[i][j] = static_cast<std::int64_t>(it->second);
    }
  }
  std::vector<std::int64_t> tg;
  for (auto g : gens) {
    if (g != 0) tg.push_back(static_cast<std::int64_t>(g));
  }
  OuterImage out{table_group(std::move(table), tg), std::move(keys), {}};
  for (auto g : gens) out.generators.push_back(Element({static_cast<std::int64_t>(g)}));
  return out;
}

//------------------------------------------------------------------------------
// Kernel coset graphs
//------------------------------------------------------------------------------

struct CosetGraph {
  int rank = 0;
  Group quotient;
  std::vector<Element> images;        // per domain generator
  std::vector<Element> cosets;        // quotient element of each coset
  std::vector<std::vector<std::size_t>> edges;  // [coset][generator]
  std::vector<Word> transversal;      // BFS tree words
  std::vector<Word> schreier;         // generators of the kernel

  std::size_t index() const noexcept { return cosets.size(); }

  Element act(const Word& w) const {
    Element s = quotient.identity();
    for (const auto& l : w.letters()) {
      const Element& g = images[static_cast<std::size_t>(l.generator() - 1)];
      s = quotient.multiply(s, l.sign() > 0 ? g : quotient.invert(g));
    }
    return s;
  }
  bool in_kernel(const Word& w) const { return act(w) == quotient.identity(); }
};

// Cosets of ker(w -> product of images) in a free group of rank r, by BFS on
// the reachable quotient elements, and the Schreier generators t_c g t_c'^-1
// for every non-tree edge.
inline CosetGraph kernel_coset_graph(int rank, const Group& quotient,
                                     std::vector<Element> images) {
  if (!quotient.is_finite()) {
    throw InvalidArgument("coset graphs need a finite quotient");
  }
  if (images.size() != static_cast<std::size_t>(rank)) {
    throw InvalidArgument("one image per domain generator is needed");
  }
  for (const auto& g : images) quotient.require(g);
  CosetGraph out;
  out.rank = rank;
  out.quotient = quotient;
  out.images = std::move(images);
  std::unordered_map<Element, std::size_t, ElementHash> pos;
  out.cosets.push_back(quotient.identity());
  out.transversal.emplace_back(rank);
  pos.emplace(quotient.identity(), 0);
  std::vector<std::pair<std::size_t, int>> parent{{0, 0}};
  for (std::size_t c = 0; c < out.cosets.size(); ++c) {
    out.edges.emplace_back(rank);
    for (int g = 0; g < rank; ++g) {
      Element next = quotient.multiply(out.cosets[c], out.images[g]);
      auto [it, fresh] = pos.emplace(next, out.cosets.size());
      if (fresh) {
        out.cosets.push_back(std::move(next));
        out.transversal.push_back(
            multiply(out.transversal[c], Word::generator(g + 1, rank)));
        parent.emplace_back(c, g);
      }
      out.edges[c][g] = it->second;
    }
  }
  for (std::size_t c = 0; c < out.cosets.size(); ++c) {
    for (int g = 0; g < rank; ++g) {
      const std::size_t d = out.edges[c][g];
      if (d != 0 && parent[d] == std::pair<std::size_t, int>{c, g}) continue;
      out.schreier.push_back(
          multiply(multiply(out.transversal[c], Word::generator(g + 1, rank)),
                   invert(out.transversal[d])));
    }
  }
  return out;
}

//------------------------------------------------------------------------------
// Projections
//------------------------------------------------------------------------------

// z in Z minimizing |z^-1 x|, ties to the canonically least z.
inline Element nearest_point_projection(const Group& h, const Element& x,
                                        std::vector<Element> z) {
  if (z.empty()) throw InvalidArgument("projection onto an empty set");
  h.canonical_sort(z);
  std::optional<std::size_t> best;
  std::int64_t best_d = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const std::int64_t d = h.norm(h.multiply(h.invert(z[i]), x));
    if (!best || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return z[*best];
}

struct Retraction {
  Element value;
  std::size_t coset = 0;   // index i of h_i
  bool ambiguous = false;  // more than one h_i fits
};

// r(k h_i) = k with the least index i such that x h_i^-1 lies in K.
inline Retraction central_coset_retraction(const Group& h, const Element& x,
                                           const ElementSet& k,
                                           const std::vector<Element>& hs) {
  std::optional<Retraction> out;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    Element kk = h.multiply(x, h.invert(hs[i]));
    if (k.contains(kk)) {
      if (out) {
        out->ambiguous = true;
        break;
      }
      out = Retraction{std::move(kk), i, false};
    }
  }
  if (!out) {
    throw InvalidArgument(h.format(x) + " is outside every coset K h_i");
  }
  return *out;
}

inline QMap make_retraction(const QMap& f, std::vector<Element> k,
                            std::vector<Element> hs) {
  const Group h = f.target();
  auto kset = std::make_shared<ElementSet>(k.begin(), k.end());
  nlohmann::json spec{{"mode", "retract"}};
  for (const auto& x : k) spec["subgroup"].push_back(h.format(x));
  for (const auto& x : hs) spec["cosets"].push_back(h.format(x));
  return make_post_project(
      f, h,
      [h, kset, hs](const Element& x) {
        return central_coset_retraction(h, x, *kset, hs).value;
      },
      std::move(spec));
}

//------------------------------------------------------------------------------
// Quasi-split round trip
//------------------------------------------------------------------------------

struct RoundTripAudit {
  std::size_t elements = 0;
  std::size_t pairs = 0;
  bool q_is_minus_a = true;      // q((a, c)) = -a
  bool q_of_section_zero = true; // q(s(c)) = 0
  bool f_prime_f = true;         // F'(F(b)) = b
  bool f_f_prime = true;         // F(F'(c, a)) = (c, a)
  bool defect_in_omega = true;   // D(q) in -omega(C x C) on scanned pairs
  std::vector<Element> witness;

  bool pass() const {
    return q_is_minus_a && q_of_section_zero && f_prime_f && f_f_prime &&
           defect_in_omega;
  }
};

// q(b) = b^-1 s(p(b)), F(b) = (p(b), q(b)), F'(c, a) = s(c) a^-1, checked on
// the whole group when E is finite, otherwise on the ball of the given
// radius (pairs on the ball of half that radius).
inline RoundTripAudit quasi_split_roundtrip(const Group& e, int radius) {
  const auto& x = e.expect<ExtensionGroup>("extension");
  const Group& fib = x.fiber();
  RoundTripAudit out;
  auto q = [&](const Element& b) {
    return x.fiber_part(e.multiply(e.invert(b), x.section(x.project(b))));
  };
  auto big_f = [&](const Element& b) { return std::make_pair(x.project(b), q(b)); };
  auto big_f_prime = [&](const Element& c, const Element& a) {
    return e.multiply(x.section(c), e.invert(x.include(a)));
  };

  std::vector<Element> elems;
  std::vector<Element> pair_elems;
  if (e.is_finite()) {
    elems = enumerate_all(e);
    pair_elems = elems;
  } else {
    elems = enumerate_ball(e, radius).elements;
    pair_elems = enumerate_ball(e, radius / 2).elements;
  }
  auto fail = [&](bool& flag, std::vector<Element> w) {
    if (flag) out.witness = std::move(w);
    flag = false;
  };

  for (const auto& b : elems) {
    ++out.elements;
    const Element a = x.fiber_part(b);
    if (q(b) != fib.invert(a)) fail(out.q_is_minus_a, {b});
    const auto [c, qa] = big_f(b);
    if (big_f_prime(c, qa) != b) fail(out.f_prime_f, {b});
  }
  // F o F' on pairs (c, a) drawn from the same elements' coordinates.
  for (const auto& b : elems) {
    const Element c = x.project(b);
    const Element a = x.fiber_part(b);
    if (q(x.section(c)) != fib.identity()) fail(out.q_of_section_zero, {b});
    const auto back = big_f(big_f_prime(c, a));
    if (back.first != c || back.second != a) fail(out.f_f_prime, {b});
  }
  ElementSet minus_omega;
  std::vector<Element> bases;
  {
    ElementSet seen;
    for (const auto& b : pair_elems) {
      if (seen.insert(x.project(b)).second) bases.push_back(x.project(b));
    }
  }
  for (const auto& c1 : bases) {
    for (const auto& c2 : bases) {
      minus_omega.insert(fib.invert(x.omega(c1, c2)));
    }
  }
  for (const auto& b1 : pair_elems) {
    for (const auto& b2 : pair_elems) {
      ++out.pairs;
      const Element d = fib.multiply(
          fib.invert(q(b2)), fib.multiply(fib.invert(q(b1)), q(e.multiply(b1, b2))));
      if (!minus_omega.contains(d)) fail(out.defect_in_omega, {b1, b2});
    }
  }
  return out;
}

//------------------------------------------------------------------------------
// Constructibility decomposition
//------------------------------------------------------------------------------

struct DecompositionCheck {
  std::string name;
  bool pass = true;
  std::string detail;
};

struct DecompositionReport {
  int radius = 0;                      // radius of the final attempt
  std::vector<int> attempts;           // radii tried
  std::string status;                  // ok | scan_incomplete | aut_cap
  std::vector<Element> defects;        // scanned D(f)
  std::vector<Element> delta;          // <D(f)>
  std::vector<Element> normalizer;     // N_H(Delta)
  std::vector<Element> centralizer;    // Z_H(Delta)
  bool phi_trivial = false;
  bool phi_computed = false;
  Group out_image;                     // image of phi in Out(Delta)
  std::vector<Element> phi_generators; // phi of each domain generator
  std::optional<CosetGraph> coset_graph;   // free domains
  std::vector<Element> kernel_elements;    // finite domains: G_o
  std::size_t kernel_index = 1;
  std::vector<std::pair<Element, Element>> projected;  // (x, f_o(x)) on the scan
  std::vector<Element> h_o;            // <f_o values>
  std::vector<Element> defects_o;      // D(f_o) over scanned G_o pairs
  std::vector<Element> delta_o;        // <D(f_o)>
  Group quotient;                      // H_o / Delta_{f_o}
  std::vector<Element> coset_reps;     // representative per quotient index
  std::int64_t sup_distance = 0;       // max |f(x)^-1 f_o(x)|
  std::size_t hom_pairs = 0;
  std::vector<DecompositionCheck> checks;

  bool pass() const {
    return status == "ok" &&
           std::all_of(checks.begin(), checks.end(),
                       [](const DecompositionCheck& c) { return c.pass; });
  }
  const DecompositionCheck* check(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

namespace detail {

inline DecompositionReport decompose_once(const QMap& f, int radius,
                                          std::size_t aut_cap) {
  const Group& g = f.domain();
  const Group& h = f.target();
  DecompositionReport rep;
  rep.radius = radius;
  auto add_check = [&](std::string name, bool ok, std::string detail = {}) {
    rep.checks.push_back({std::move(name), ok, std::move(detail)});
    return ok;
  };

  const FiniteGroupView view(h);
  const Ball ball = enumerate_ball(g, radius);
  const bool free_domain = g.as<FreeGroup>() != nullptr;
  if (!free_domain && !g.is_finite()) {
    throw InvalidArgument("decomposition needs a free or finite domain");
  }

  rep.defects = defect_set(f, PairEnumeration::exhaustive(radius),
                           DefectClass::kUlam)
                    .defects;
  rep.delta = closure(h, rep.defects);
  rep.normalizer = normalizer(view, rep.delta);
  rep.centralizer = centralizer(view, rep.delta);

  std::vector<Element> fvals;
  for (const auto& x : ball.elements) fvals.push_back(f(x));
  const ElementSet nset(rep.normalizer.begin(), rep.normalizer.end());
  if (!add_check("values_normalize_delta",
                 std::all_of(fvals.begin(), fvals.end(),
                             [&](const Element& v) { return nset.contains(v); }),
                 "f(x) in N_H(Delta) for scanned x")) {
    rep.status = "scan_incomplete";
    return rep;
  }

  // phi: G -> Out(Delta). Trivial when every value centralizes Delta.
  const ElementSet zset(rep.centralizer.begin(), rep.centralizer.end());
  const ElementSet dset(rep.delta.begin(), rep.delta.end());
  rep.phi_trivial = std::all_of(fvals.begin(), fvals.end(),
                                [&](const Element& v) { return zset.contains(v); });
  std::function<bool(std::size_t)> in_kernel;
  if (rep.phi_trivial) {
    rep.phi_computed = true;
    rep.out_image = cyclic_group(1);
    in_kernel = [](std::size_t) { return true; };
    if (free_domain) {
      const int rank = g.as<FreeGroup>()->rank();
      rep.coset_graph = kernel_coset_graph(
          rank, rep.out_image, std::vector<Element>(rank, rep.out_image.identity()));
      rep.phi_generators.assign(rank, rep.out_image.identity());
    } else {
      rep.kernel_elements = enumerate_all(g);
    }
  } else {
    if (rep.delta.size() > aut_cap) {
      rep.status = "aut_cap";
      add_check("aut_cap", false,
                "|Delta| = " + std::to_string(rep.delta.size()) + " exceeds " +
                    std::to_string(aut_cap));
      return rep;
    }
    const SubgroupAut aut(h, rep.delta, aut_cap);
    rep.phi_computed = true;
    if (free_domain) {
      const auto& fg = *g.as<FreeGroup>();
      std::vector<Element> gen_values;
      for (int i = 1; i <= fg.rank(); ++i) gen_values.push_back(f(Element({i})));
      OuterImage oi = outer_image(aut, gen_values);
      rep.out_image = oi.group;
      rep.phi_generators = oi.generators;
      rep.coset_graph = kernel_coset_graph(fg.rank(), oi.group, oi.generators);
      // phi read along the word must agree with the class of ad(f(x)).
      bool consistent = true;
      std::map<ImageList, std::size_t> key_pos;
      for (std::size_t i = 0; i < oi.keys.size(); ++i) key_pos[oi.keys[i]] = i;
      for (std::size_t i = 0; i < ball.size() && consistent; ++i) {
        const Element st = rep.coset_graph->act(fg.to_word(ball.elements[i]));
        auto it = key_pos.find(aut.outer_key(aut.ad(fvals[i])));
        consistent = it != key_pos.end() &&
                     Element({static_cast<std::int64_t>(it->second)}) == st;
      }
      if (!add_check("phi_homomorphism", consistent,
                     "class of ad(f(x)) equals phi read along x")) {
        rep.status = "scan_incomplete";
        return rep;
      }
      const FreeGroup* fgp = &fg;
      in_kernel = [&rep, &ball, fgp](std::size_t i) {
        return rep.coset_graph->in_kernel(fgp->to_word(ball.elements[i]));
      };
    } else {
      std::vector<Element> all = enumerate_all(g);
      std::vector<Element> kernel;
      for (const auto& x : all) {
        if (aut.inner_witness(aut.ad(f(x)))) kernel.push_back(x);
      }
      const ElementSet kset(kernel.begin(), kernel.end());
      bool closed = true;
      for (const auto& a : kernel) {
        for (const auto& b : kernel) {
          if (!kset.contains(g.multiply(a, b))) closed = false;
        }
      }
      if (!add_check("kernel_is_subgroup", closed)) {
        rep.status = "scan_incomplete";
        return rep;
      }
      std::vector<Element> gen_values;
      for (const auto& x : g.generators()) gen_values.push_back(f(x));
      OuterImage oi = outer_image(aut, gen_values);
      rep.out_image = oi.group;
      rep.phi_generators = oi.generators;
      rep.kernel_elements = kernel;
      auto shared = std::make_shared<ElementSet>(std::move(kset));
      in_kernel = [shared, &ball](std::size_t i) {
        return shared->contains(ball.elements[i]);
      };
    }
  }
  rep.kernel_index = free_domain ? rep.coset_graph->index()
                                 : enumerate_all(g).size() /
                                       std::max<std::size_t>(
                                           rep.kernel_elements.size(), 1);

  // f_o(x): the point of Z_H(Delta) n f(x) Delta nearest to f(x).
  auto project = [&](const Element& v) -> std::optional<Element> {
    std::vector<Element> cands;
    for (const auto& d : rep.delta) {
      Element z = h.multiply(v, d);
      if (zset.contains(z)) cands.push_back(std::move(z));
    }
    if (cands.empty()) return std::nullopt;
    return nearest_point_projection(h, v, std::move(cands));
  };

  std::vector<std::size_t> ko;  // scanned kernel elements
  for (std::size_t i = 0; i < ball.size(); ++i) {
    if (in_kernel(i)) ko.push_back(i);
  }
  std::unordered_map<Element, Element, ElementHash> fo;
  bool projected = true;
  for (auto i : ko) {
    auto z = project(fvals[i]);
    if (!z) {
      projected = false;
      break;
    }
    rep.sup_distance =
        std::max(rep.sup_distance, h.norm(h.multiply(h.invert(fvals[i]), *z)));
    rep.projected.emplace_back(ball.elements[i], *z);
    fo.emplace(ball.elements[i], *z);
  }
  if (!add_check("projection_exists", projected,
                 "Z_H(Delta) meets f(x) Delta for scanned x in G_o")) {
    rep.status = "scan_incomplete";
    return rep;
  }
  auto fo_at = [&](const Element& x) -> std::optional<Element> {
    if (auto it = fo.find(x); it != fo.end()) return it->second;
    auto z = project(f(x));
    if (z) fo.emplace(x, *z);
    return z;
  };

  // D(f_o) over pairs of scanned kernel elements.
  ElementSet dfo;
  std::vector<Element> hgen;
  bool products_ok = true;
  for (auto i : ko) {
    for (auto j : ko) {
      const Element& x = ball.elements[i];
      const Element& y = ball.elements[j];
      auto zxy = fo_at(g.multiply(x, y));
      if (!zxy) {
        products_ok = false;
        continue;
      }
      dfo.insert(ulam_from_values(h, fo.at(x), fo.at(y), *zxy));
      hgen.push_back(*zxy);
    }
    hgen.push_back(fo.at(ball.elements[i]));
  }
  if (!add_check("projection_exists_on_products", products_ok)) {
    rep.status = "scan_incomplete";
    return rep;
  }
  rep.defects_o.assign(dfo.begin(), dfo.end());
  h.canonical_sort(rep.defects_o);
  rep.delta_o = closure(h, rep.defects_o);
  {
    ElementSet hs(hgen.begin(), hgen.end());
    rep.h_o = closure(h, std::vector<Element>(hs.begin(), hs.end()));
  }

  add_check("defects_o_in_delta", is_subset(rep.defects_o, rep.delta),
            "D(f_o) in Delta_f");
  add_check("delta_o_in_h_o", is_subset(rep.delta_o, rep.h_o));
  {
    bool central = true;
    for (const auto& d : rep.delta_o) {
      for (const auto& x : rep.h_o) {
        if (!h.commute(d, x)) central = false;
      }
    }
    add_check("delta_o_central_in_h_o", central, "Delta_{f_o} in Z(H_o)");
  }

  // Quotient H_o / Delta_{f_o}: cosets keyed by their least element.
  std::unordered_map<Element, std::size_t, ElementHash> coset_of;
  for (const auto& x : rep.h_o) {
    if (coset_of.contains(x)) continue;
    const std::size_t id = rep.coset_reps.size();
    rep.coset_reps.push_back(x);  // h_o is canonical, so x is least
    for (const auto& d : rep.delta_o) coset_of.emplace(h.multiply(x, d), id);
  }
  const std::size_t nq = rep.coset_reps.size();
  std::vector<std::vector<std::int64_t>> table(nq, std::vector<std::int64_t>(nq));
  bool well_defined = true;
  for (std::size_t i = 0; i < nq; ++i) {
    for (std::size_t j = 0; j < nq; ++j) {
      auto it = coset_of.find(h.multiply(rep.coset_reps[i], rep.coset_reps[j]));
      if (it == coset_of.end()) {
        well_defined = false;
        continue;
      }
      table[i][j] = static_cast<std::int64_t>(it->second);
    }
  }
  if (!add_check("quotient_well_defined", well_defined)) {
    rep.status = "scan_incomplete";
    return rep;
  }
  std::vector<std::int64_t> qgens;
  for (std::size_t i = 1; i < nq; ++i) qgens.push_back(static_cast<std::int64_t>(i));
  rep.quotient = table_group(std::move(table), qgens);

  // The projected map into the quotient is a homomorphism on scanned pairs.
  bool hom = true;
  for (auto i : ko) {
    for (auto j : ko) {
      const Element& x = ball.elements[i];
      const Element& y = ball.elements[j];
      ++rep.hom_pairs;
      const auto qx = coset_of.at(fo.at(x));
      const auto qy = coset_of.at(fo.at(y));
      const auto qxy = coset_of.at(fo.at(g.multiply(x, y)));
      if (rep.quotient.multiply(Element({static_cast<std::int64_t>(qx)}),
                                Element({static_cast<std::int64_t>(qy)})) !=
          Element({static_cast<std::int64_t>(qxy)})) {
        hom = false;
      }
    }
  }
  add_check("quotient_map_homomorphism", hom,
            "pi o f_o has trivial defect on scanned pairs of G_o");
  rep.status = "ok";
  for (const auto& c : rep.checks) {
    if (!c.pass) rep.status = "scan_incomplete";
  }
  return rep;
}

}  // namespace detail

// Runs the pipeline at `radius`, retrying with larger radii up to
// `max_radius` while a verification fails. Every claim is relative to the
// scanned D(f).
inline DecompositionReport constructibility_decompose(
    const QMap& f, int radius, int max_radius = -1,
    std::size_t aut_cap = kDefaultAutCap) {
  if (!f.target().is_finite()) {
    throw InvalidArgument("decomposition needs a finite target, got " +
                          f.target().describe());
  }
  if (max_radius < radius) max_radius = radius;
  std::vector<int> tried;
  for (int r = radius;; ++r) {
    tried.push_back(r);
    DecompositionReport rep = detail::decompose_once(f, r, aut_cap);
    rep.attempts = tried;
    if (rep.pass() || rep.status == "aut_cap" || r >= max_radius) return rep;
  }
}

}  // namespace qh

#endif  // QH_STRUCTURE_HPP_
