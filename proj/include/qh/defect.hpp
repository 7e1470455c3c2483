#ifndef QH_DEFECT_HPP_
#define QH_DEFECT_HPP_

// Defect functionals, pair scans and the defect-set identities.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qh/enumerate.hpp"
#include "qh/group.hpp"
#include "qh/qmap.hpp"
#include "qh/word.hpp"

namespace qh {

enum class DefectClass { kUlam, kMiddle, kGeometric, kAlgebraic };

inline std::string to_string(DefectClass c) {
  switch (c) {
    case DefectClass::kUlam: return "ulam";
    case DefectClass::kMiddle: return "middle";
    case DefectClass::kGeometric: return "geometric";
    case DefectClass::kAlgebraic: return "algebraic";
  }
  return "?";
}

inline DefectClass parse_defect_class(const std::string& s) {
  if (s == "ulam") return DefectClass::kUlam;
  if (s == "middle") return DefectClass::kMiddle;
  if (s == "geometric") return DefectClass::kGeometric;
  if (s == "algebraic") return DefectClass::kAlgebraic;
  throw InvalidArgument("unknown defect class '" + s + "'");
}

inline constexpr int kDefaultSearchRadius = 8;
inline constexpr std::size_t kDefaultPairCap = 50'000'000;

//------------------------------------------------------------------------------
// Pointwise defects
//------------------------------------------------------------------------------

// f(y)^-1 f(x)^-1 f(xy), given the three values.
inline Element ulam_from_values(const Group& h, const Element& fx,
                                const Element& fy, const Element& fxy) {
  return h.multiply(h.invert(fy), h.multiply(h.invert(fx), fxy));
}

// f(x)^-1 f(xy) f(y)^-1, given the three values.
inline Element middle_from_values(const Group& h, const Element& fx,
                                  const Element& fy, const Element& fxy) {
  return h.multiply(h.multiply(h.invert(fx), fxy), h.invert(fy));
}

inline Element ulam_defect(const QMap& f, const Element& x, const Element& y) {
  return ulam_from_values(f.target(), f(x), f(y),
                          f(f.domain().multiply(x, y)));
}

inline Element middle_defect(const QMap& f, const Element& x,
                             const Element& y) {
  return middle_from_values(f.target(), f(x), f(y),
                            f(f.domain().multiply(x, y)));
}

// Result of the bounded search for f(xy) = s1 f(x) s2 f(y) s3.
struct SearchDefect {
  std::optional<int> radius;  // empty when no decomposition within the cap
  Element s1, s2, s3;
};

// Candidates for s1, s2: the target ball of radius rho, ordered by
// (norm, payload), together with their norms.
class SearchSpace {
 public:
  SearchSpace(const Group& target, int rho) : target_(target), rho_(rho) {
    if (rho < 0) throw InvalidArgument("search radius must be non-negative");
    auto ball = enumerate_ball(target, rho);
    elements_ = std::move(ball.elements);
    target.canonical_sort(elements_);
    for (const auto& e : elements_) norms_.push_back(target.norm(e));
  }

  const Group& target() const noexcept { return target_; }
  int rho() const noexcept { return rho_; }
  const std::vector<Element>& elements() const noexcept { return elements_; }
  const std::vector<std::int64_t>& norms() const noexcept { return norms_; }

  // Number of leading candidates of norm <= m.
  std::size_t prefix(int m) const {
    return static_cast<std::size_t>(
        std::upper_bound(norms_.begin(), norms_.end(), m) - norms_.begin());
  }

 private:
  Group target_;
  int rho_;
  std::vector<Element> elements_;
  std::vector<std::int64_t> norms_;
};

// Minimal m <= rho such that f(xy) = s1 f(x) s2 f(y) s3 with all |s_i| <= m.
// Geometric fixes s1 = 1. Candidates are tried in increasing m, then in
// canonical order of (s1, s2).
inline SearchDefect search_defect(const SearchSpace& space, bool algebraic,
                                  const Element& fx, const Element& fy,
                                  const Element& fxy) {
  const Group& h = space.target();
  const auto& cand = space.elements();
  const Element fy_inv = h.invert(fy);
  const Element fx_inv = h.invert(fx);
  for (int m = 0; m <= space.rho(); ++m) {
    const std::size_t n = space.prefix(m);
    const std::size_t n1 = algebraic ? n : 1;
    for (std::size_t i = 0; i < n1; ++i) {
      // rest = f(x)^-1 s1^-1 f(xy); then s3 = f(y)^-1 s2^-1 rest.
      const Element& s1 = cand[i];
      const Element rest = h.multiply(fx_inv, h.multiply(h.invert(s1), fxy));
      for (std::size_t j = 0; j < n; ++j) {
        const Element& s2 = cand[j];
        if (std::max(space.norms()[i], space.norms()[j]) < m) {
          continue;  // already tried at a smaller m
        }
        Element s3 = h.multiply(fy_inv, h.multiply(h.invert(s2), rest));
        if (h.norm(s3) <= m) {
          return {m, s1, s2, std::move(s3)};
        }
      }
    }
  }
  return {std::nullopt, {}, {}, {}};
}

//------------------------------------------------------------------------------
// Pair enumeration
//------------------------------------------------------------------------------

struct PairEnumeration {
  enum class Mode { kExhaustive, kRandom };
  Mode mode = Mode::kExhaustive;
  int radius = 0;          // exhaustive radius, or max length for random
  std::size_t count = 0;   // random pair count
  std::uint64_t seed = 0;  // random seed
  std::size_t pair_cap = kDefaultPairCap;

  static PairEnumeration exhaustive(int radius) {
    PairEnumeration e;
    e.radius = radius;
    return e;
  }
  static PairEnumeration random(std::size_t count, int max_length,
                                std::uint64_t seed) {
    PairEnumeration e;
    e.mode = Mode::kRandom;
    e.radius = max_length;
    e.count = count;
    e.seed = seed;
    return e;
  }
};

struct PairVisit {
  const Element& x;
  const Element& y;
  const Element& fx;
  const Element& fy;
  const Element& fxy;
  int level;  // max of the BFS depths of x and y
};

// Calls visit for every enumerated pair, in a deterministic order: x-major
// over the ball for exhaustive scans, draw order for random ones.
inline std::size_t scan_pairs(const QMap& f, const PairEnumeration& en,
                              const std::function<void(const PairVisit&)>& visit) {
  const Group& g = f.domain();
  const Ball ball = enumerate_ball(g, en.radius);
  std::vector<Element> fv;
  fv.reserve(ball.size());
  for (const auto& x : ball.elements) fv.push_back(f(x));

  if (en.mode == PairEnumeration::Mode::kExhaustive) {
    const std::size_t n = ball.size();
    if (n != 0 && n > en.pair_cap / n) {
      throw CapExceeded("pair scan of " + std::to_string(n) + "^2 pairs exceeds cap " +
                        std::to_string(en.pair_cap));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const Element fxy =
            f.eval_unchecked(g.multiply(ball.elements[i], ball.elements[j]));
        visit({ball.elements[i], ball.elements[j], fv[i], fv[j], fxy,
               std::max(ball.depth[i], ball.depth[j])});
      }
    }
    return n * n;
  }

  if (en.count > en.pair_cap) {
    throw CapExceeded("random pair count exceeds cap " +
                      std::to_string(en.pair_cap));
  }
  std::mt19937_64 rng(en.seed);
  const std::uint64_t n = ball.size();
  for (std::size_t k = 0; k < en.count; ++k) {
    const std::size_t i = rng() % n;
    const std::size_t j = rng() % n;
    const Element fxy =
        f.eval_unchecked(g.multiply(ball.elements[i], ball.elements[j]));
    visit({ball.elements[i], ball.elements[j], fv[i], fv[j], fxy,
           std::max(ball.depth[i], ball.depth[j])});
  }
  return en.count;
}

//------------------------------------------------------------------------------
// Defect reports
//------------------------------------------------------------------------------

struct DefectWitness {
  Element x, y, value;
  std::int64_t norm = 0;
  int level = 0;
};

struct StabilizationRow {
  int radius = 0;
  std::size_t distinct = 0;  // distinct defects seen at level <= radius
  std::int64_t max_norm = 0;
  std::size_t exceeded = 0;  // search classes: pairs with no decomposition
};

// For Ulam and Middle the defects are target elements. For the search classes
// each pair contributes its minimal radius; `defects` then stays empty, the
// table counts distinct radii and its max_norm is the largest radius found.
struct DefectReport {
  DefectClass cls = DefectClass::kUlam;
  PairEnumeration enumeration;
  int search_radius = 0;
  std::size_t pairs = 0;
  std::vector<Element> defects;      // canonical order
  std::vector<std::int64_t> norms;   // parallel to defects
  std::int64_t max_norm = 0;
  std::vector<StabilizationRow> table;
  std::vector<DefectWitness> witnesses;  // extremal pair per table row
  std::map<int, std::size_t> radius_histogram;  // search classes
  std::size_t exceeded = 0;

  bool contains(const Element& d) const {
    return std::binary_search(defects.begin(), defects.end(), d,
                              [this](const Element& a, const Element& b) {
                                return less_(a, b);
                              });
  }

  // Smallest radius r with distinct(r) = distinct(R) and max_norm(r) =
  // max_norm(R) over the scanned table. Says nothing beyond R.
  std::optional<int> stable_from() const {
    if (table.empty()) return std::nullopt;
    const auto& last = table.back();
    int r = last.radius;
    for (auto it = table.rbegin(); it != table.rend(); ++it) {
      if (it->distinct != last.distinct || it->max_norm != last.max_norm ||
          it->exceeded != last.exceeded) {
        break;
      }
      r = it->radius;
    }
    if (r == last.radius && table.size() > 1) return std::nullopt;
    return r;
  }

  std::string stability_summary() const {
    auto r = stable_from();
    if (!r) return "not stable within scanned range";
    return "stable within scanned range from radius " + std::to_string(*r);
  }

  std::function<bool(const Element&, const Element&)> less_;
};

inline DefectReport defect_set(const QMap& f, const PairEnumeration& en,
                               DefectClass cls,
                               int search_radius = kDefaultSearchRadius) {
  const Group& h = f.target();
  DefectReport rep;
  rep.cls = cls;
  rep.enumeration = en;
  rep.search_radius = search_radius;
  rep.less_ = [h](const Element& a, const Element& b) {
    return h.canonical_less(a, b);
  };
  const int levels = en.radius;

  struct Seen {
    int level;
    Element x, y;
  };
  std::unordered_map<Element, Seen, ElementHash> first;
  // Search classes: per level, max radius with a witness, and failures.
  std::vector<std::optional<DefectWitness>> best(levels + 1);
  std::vector<std::size_t> fails(levels + 1, 0);
  std::vector<std::set<int>> radii(levels + 1);

  const bool search =
      cls == DefectClass::kGeometric || cls == DefectClass::kAlgebraic;
  std::optional<SearchSpace> space;
  if (search) space.emplace(h, search_radius);

  rep.pairs = scan_pairs(f, en, [&](const PairVisit& v) {
    if (!search) {
      Element d = cls == DefectClass::kUlam
                      ? ulam_from_values(h, v.fx, v.fy, v.fxy)
                      : middle_from_values(h, v.fx, v.fy, v.fxy);
      auto it = first.find(d);
      if (it == first.end()) {
        first.emplace(std::move(d), Seen{v.level, v.x, v.y});
      } else if (v.level < it->second.level) {
        it->second = Seen{v.level, v.x, v.y};
      }
      return;
    }
    auto s = search_defect(*space, cls == DefectClass::kAlgebraic, v.fx, v.fy,
                           v.fxy);
    if (!s.radius) {
      ++fails[v.level];
      return;
    }
    ++rep.radius_histogram[*s.radius];
    radii[v.level].insert(*s.radius);
    auto& b = best[v.level];
    if (!b || *s.radius > b->norm) {
      b = DefectWitness{v.x, v.y, s.s3, *s.radius, v.level};
    }
  });

  if (!search) {
    // Defects sorted canonically; per-level bookkeeping from first sightings.
    std::vector<std::pair<Element, Seen>> all(first.begin(), first.end());
    std::vector<std::int64_t> nrm(all.size());
    std::vector<std::size_t> idx(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      nrm[i] = h.norm(all[i].first);
      idx[i] = i;
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return nrm[a] != nrm[b] ? nrm[a] < nrm[b] : all[a].first < all[b].first;
    });
    std::vector<std::size_t> count_at(levels + 1, 0);
    std::vector<std::optional<std::size_t>> arg_at(levels + 1);
    for (std::size_t k : idx) {
      rep.defects.push_back(all[k].first);
      rep.norms.push_back(nrm[k]);
      const int lv = all[k].second.level;
      ++count_at[lv];
      // idx is in increasing norm order, so the last one wins the max, with
      // the canonically largest element among equal norms.
      arg_at[lv] = k;
    }
    std::size_t cum = 0;
    std::int64_t mx = 0;
    std::optional<std::size_t> arg;
    for (int r = 0; r <= levels; ++r) {
      cum += count_at[r];
      if (arg_at[r] && (!arg || nrm[*arg_at[r]] > nrm[*arg])) {
        arg = arg_at[r];
      }
      if (arg) mx = nrm[*arg];
      rep.table.push_back({r, cum, mx, 0});
      if (arg) {
        const auto& [d, seen] = all[*arg];
        rep.witnesses.push_back({seen.x, seen.y, d, nrm[*arg], seen.level});
      }
    }
    rep.max_norm = mx;
    return rep;
  }

  std::int64_t mx = 0;
  std::size_t fails_cum = 0;
  std::optional<DefectWitness> arg;
  std::set<int> seen_radii;
  for (int r = 0; r <= levels; ++r) {
    fails_cum += fails[r];
    seen_radii.insert(radii[r].begin(), radii[r].end());
    if (best[r] && (!arg || best[r]->norm > arg->norm)) arg = best[r];
    if (arg) mx = arg->norm;
    rep.table.push_back({r, seen_radii.size(), mx, fails_cum});
    if (arg) rep.witnesses.push_back(*arg);
  }
  rep.max_norm = mx;
  rep.exceeded = fails_cum;
  return rep;
}

//------------------------------------------------------------------------------
// Subgroup balls
//------------------------------------------------------------------------------

struct SubgroupBall {
  std::vector<Element> generators;  // D, canonical order
  int radius = 0;                   // n actually reached
  std::vector<Element> elements;    // products of <= n elements of D u D^-1
  bool closed = false;              // D^_{n+1} = D^_n
};

// D^_n. With n < 0, iterates until closure (which must happen for finite
// targets, and is enforced by `cap` otherwise).
inline SubgroupBall subgroup_ball(const Group& h, std::vector<Element> gens,
                                  int n, std::size_t cap = kDefaultBallCap) {
  for (const auto& s : gens) h.require(s);
  h.canonical_sort(gens);
  gens.erase(std::unique(gens.begin(), gens.end()), gens.end());
  std::vector<Element> sym;
  for (const auto& s : gens) {
    sym.push_back(s);
    sym.push_back(h.invert(s));
  }
  SubgroupBall out;
  out.generators = gens;
  std::unordered_set<Element, ElementHash> seen{h.identity()};
  std::vector<Element> layer{h.identity()};
  std::vector<Element> elems{h.identity()};
  int k = 0;
  while (true) {
    std::vector<Element> next;
    for (const auto& e : layer) {
      for (const auto& s : sym) {
        Element p = h.multiply(e, s);
        if (seen.insert(p).second) next.push_back(std::move(p));
      }
    }
    if (next.empty()) {
      out.closed = true;
      break;
    }
    if (n >= 0 && k == n) break;
    ++k;
    elems.insert(elems.end(), next.begin(), next.end());
    if (elems.size() > cap) {
      throw CapExceeded("subgroup ball exceeds cap " + std::to_string(cap));
    }
    layer = std::move(next);
  }
  out.radius = k;
  h.canonical_sort(elems);
  out.elements = std::move(elems);
  return out;
}

//------------------------------------------------------------------------------
// Identity audit
//------------------------------------------------------------------------------

struct AuditCheck {
  std::string name;
  bool pass = true;
  std::size_t checked = 0;
  std::string method;                // "set" or "factorization"
  std::vector<Element> witness;      // domain elements of the first failure
  std::string detail;
};

struct IdentityAudit {
  std::size_t defects = 0;  // |D| from the scan
  int radius = 0;
  int triple_radius = 0;
  std::vector<AuditCheck> checks;  // epsilon, inverse, conjugation, quasi_action

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const AuditCheck& c) { return c.pass; });
  }
  const AuditCheck& check(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return c;
    }
    throw InvalidArgument("no audit check named " + name);
  }
};

inline constexpr std::size_t kProductSetCap = 4'000'000;

// Exact audit of the elementary defect-set identities against D taken from an
// exhaustive Ulam scan of radius R:
//   epsilon       f(1)^-1 in D
//   inverse       f(x^-1)^-1 f(x)^-1 in D^2           for |x| <= R
//   conjugation   f(c)^-1 s f(c) in D^2 D^-1          s = d(a,b)
//   quasi_action  (f(x)f(y)f(z))^-1 f(xy) f(z) in D^2 D^-1
// The last two run over triples in the ball of radius floor(R/2), where
//   f(xy)f(z) = f(x)f(y)f(z) d(y,z) d(x,yz) d(xy,z)^-1
// gives a factorization through pairs of the scan. Membership is decided by
// an explicit product set when it fits under the cap, and by checking that
// factorization otherwise.
inline IdentityAudit identity_audit(const QMap& f, int radius) {
  const Group& g = f.domain();
  const Group& h = f.target();
  IdentityAudit out;
  out.radius = radius;
  out.triple_radius = radius / 2;

  const DefectReport rep = defect_set(f, PairEnumeration::exhaustive(radius),
                                      DefectClass::kUlam);
  const std::unordered_set<Element, ElementHash> dset(rep.defects.begin(),
                                                      rep.defects.end());
  out.defects = dset.size();
  const std::size_t nd = dset.size();

  std::optional<std::unordered_set<Element, ElementHash>> d2, d2d;
  if (nd * nd <= kProductSetCap) {
    d2.emplace();
    for (const auto& a : rep.defects) {
      for (const auto& b : rep.defects) d2->insert(h.multiply(a, b));
    }
    if (d2->size() * nd <= kProductSetCap) {
      d2d.emplace();
      for (const auto& ab : *d2) {
        for (const auto& c : rep.defects) {
          d2d->insert(h.multiply(ab, h.invert(c)));
        }
      }
    }
  }
  auto in_d = [&](const Element& e) { return dset.contains(e); };
  auto d = [&](const Element& x, const Element& y) {
    return ulam_defect(f, x, y);
  };

  const Element f1 = f(g.identity());
  {
    AuditCheck c{"epsilon", true, 1, "set", {}, {}};
    if (!in_d(h.invert(f1))) {
      c.pass = false;
      c.witness = {g.identity()};
      c.detail = "f(1)^-1 = " + h.format(h.invert(f1)) + " not in scanned D";
    }
    out.checks.push_back(std::move(c));
  }

  const Ball ball = enumerate_ball(g, radius);
  {
    AuditCheck c{"inverse", true, 0, d2 ? "set" : "factorization", {}, {}};
    for (const auto& x : ball.elements) {
      const Element fx = f(x);
      const Element q = h.multiply(h.invert(f(g.invert(x))), h.invert(fx));
      bool ok;
      if (d2) {
        ok = d2->contains(q);
      } else {
        const Element s = d(x, g.invert(x));
        ok = in_d(s) && in_d(h.invert(f1)) &&
             h.multiply(s, h.invert(f1)) == q;
      }
      ++c.checked;
      if (!ok && c.pass) {
        c.pass = false;
        c.witness = {x};
        c.detail = "f(x^-1)^-1 f(x)^-1 = " + h.format(q) +
                   " not in D^2 of the scan";
      }
    }
    out.checks.push_back(std::move(c));
  }

  const std::size_t nt = ball.count_within(out.triple_radius);
  std::vector<Element> fv(nt);
  for (std::size_t i = 0; i < nt; ++i) fv[i] = f(ball.elements[i]);

  auto member = [&](const Element& q, const Element& x, const Element& y,
                    const Element& z) {
    if (d2d) return d2d->contains(q);
    const Element yz = g.multiply(y, z);
    const Element xy = g.multiply(x, y);
    const Element a = d(y, z);
    const Element b = d(x, yz);
    const Element c = d(xy, z);
    return in_d(a) && in_d(b) && in_d(c) &&
           h.multiply(h.multiply(a, b), h.invert(c)) == q;
  };

  AuditCheck conj{"conjugation", true, 0, d2d ? "set" : "factorization", {}, {}};
  AuditCheck qa{"quasi_action", true, 0, d2d ? "set" : "factorization", {}, {}};
  for (std::size_t i = 0; i < nt; ++i) {
    const Element& a = ball.elements[i];
    for (std::size_t j = 0; j < nt; ++j) {
      const Element& b = ball.elements[j];
      const Element ab = g.multiply(a, b);
      const Element fab = f(ab);
      const Element s = ulam_from_values(h, fv[i], fv[j], fab);
      for (std::size_t k = 0; k < nt; ++k) {
        const Element& c = ball.elements[k];
        const Element& hc = fv[k];
        const Element q = h.conjugate(s, hc);
        ++conj.checked;
        if (!member(q, a, b, c) && conj.pass) {
          conj.pass = false;
          conj.witness = {a, b, c};
          conj.detail = "h^-1 s h = " + h.format(q) + " not in D^2 D^-1";
        }
        // (f(x) f(y) h)^-1 f(xy) h
        const Element lhs = h.multiply(fab, hc);
        const Element rhs = h.multiply(h.multiply(fv[i], fv[j]), hc);
        const Element disp = h.multiply(h.invert(rhs), lhs);
        ++qa.checked;
        if (!member(disp, a, b, c) && qa.pass) {
          qa.pass = false;
          qa.witness = {a, b, c};
          qa.detail = "displacement " + h.format(disp) + " not in D^2 D^-1";
        }
      }
    }
  }
  out.checks.push_back(std::move(conj));
  out.checks.push_back(std::move(qa));
  return out;
}

//------------------------------------------------------------------------------
// Composition and product containments
//------------------------------------------------------------------------------

struct ContainmentAudit {
  std::string relation;
  int radius = 0;
  std::size_t pairs = 0;
  std::size_t defects = 0;        // distinct defects of the combined map
  std::size_t factor_pairs = 0;   // distinct pairs at which factor defects were taken
  bool pass = true;
  std::vector<Element> witness;   // (x, y) of the first failure
  std::string detail;
};

// For g = f2 o f1 and a pair (x, y), with X = f1(x), Y = f1(y),
// d = d1(x, y):
//   d_g(x, y) = d2(X, Y) f2(d) d2(XY, d)
// so every scanned defect of g is checked against an explicit element of
// D(f2) f2(D(f1)) D(f2), the outer factors being defects of f2 at exhibited
// pairs and d a defect of f1 from the same scan.
inline ContainmentAudit composition_containment(const QMap& outer,
                                                const QMap& inner, int radius) {
  require_same_group(inner.target(), outer.domain(),
                     "composition containment");
  const Group& h = outer.target();
  const Group& mid = inner.target();
  ContainmentAudit out;
  out.relation = "D(f2 o f1) in D(f2) f2(D(f1)) D(f2)";
  out.radius = radius;
  std::unordered_set<Element, ElementHash> seen;
  std::set<std::pair<Element, Element>> fpairs;
  out.pairs = scan_pairs(inner, PairEnumeration::exhaustive(radius),
                         [&](const PairVisit& v) {
    const Element d = ulam_from_values(mid, v.fx, v.fy, v.fxy);
    const Element xy = mid.multiply(v.fx, v.fy);
    const Element e2 = ulam_defect(outer, v.fx, v.fy);
    const Element e1 = ulam_defect(outer, xy, d);
    fpairs.emplace(v.fx, v.fy);
    fpairs.emplace(xy, d);
    const Element gx = outer.eval_unchecked(v.fx);
    const Element gy = outer.eval_unchecked(v.fy);
    const Element gxy = outer.eval_unchecked(v.fxy);
    const Element dg = ulam_from_values(h, gx, gy, gxy);
    seen.insert(dg);
    const Element rhs = h.multiply(h.multiply(e2, outer.eval_unchecked(d)), e1);
    if (rhs != dg && out.pass) {
      out.pass = false;
      out.witness = {v.x, v.y};
      out.detail = "defect " + h.format(dg) + " differs from " + h.format(rhs);
    }
  });
  out.defects = seen.size();
  out.factor_pairs = fpairs.size();
  return out;
}

// For a product map, the defect at (x, y) is the tuple of factor defects, so
// D(f1 x ... x fk) is contained in D(f1) x ... x D(fk) with each D(fi) from
// the same scan.
inline ContainmentAudit product_containment(const QMap& f, int radius) {
  const auto* rule = f.rule_as<ProductRule>();
  if (rule == nullptr) {
    throw InvalidArgument("product containment needs a product map");
  }
  const auto& factors = rule->factors();
  const Group& h = f.target();
  ContainmentAudit out;
  out.relation = "D(f1 x ... x fk) in D(f1) x ... x D(fk)";
  out.radius = radius;
  std::vector<std::unordered_set<Element, ElementHash>> dsets(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    scan_pairs(factors[i], PairEnumeration::exhaustive(radius),
               [&](const PairVisit& v) {
      dsets[i].insert(ulam_from_values(factors[i].target(), v.fx, v.fy, v.fxy));
    });
  }
  std::unordered_set<Element, ElementHash> seen;
  out.pairs = scan_pairs(f, PairEnumeration::exhaustive(radius),
                         [&](const PairVisit& v) {
    const Element d = ulam_from_values(h, v.fx, v.fy, v.fxy);
    seen.insert(d);
    bool ok = d.parts().size() == factors.size();
    for (std::size_t i = 0; ok && i < factors.size(); ++i) {
      ok = dsets[i].contains(d.parts()[i]) &&
           d.parts()[i] == ulam_defect(factors[i], v.x, v.y);
    }
    if (!ok && out.pass) {
      out.pass = false;
      out.witness = {v.x, v.y};
      out.detail = "defect " + h.format(d) + " is not a tuple of factor defects";
    }
  });
  out.defects = seen.size();
  out.factor_pairs = out.pairs;
  return out;
}

//------------------------------------------------------------------------------
// Probing with Brooks quasimorphisms on a free target
//------------------------------------------------------------------------------

// All cyclically reduced words of length 1..k.
inline std::vector<Word> cyclically_reduced_words(int rank, int k) {
  std::vector<Word> out;
  const Group fg = free_group(rank);
  const auto& impl = fg.expect<FreeGroup>("free group");
  const Ball b = enumerate_ball(fg, k);
  for (std::size_t i = 1; i < b.size(); ++i) {
    Word w = impl.to_word(b.elements[i]);
    if (is_cyclically_reduced(w)) out.push_back(std::move(w));
  }
  return out;
}

struct ProbeRow {
  Word probe;
  std::vector<std::int64_t> max_defect;  // per level 0..R, cumulative
};

struct HSProbe {
  int k = 0;
  PairEnumeration enumeration;
  std::vector<ProbeRow> rows;
};

// For each Brooks probe phi_w with w cyclically reduced, |w| <= k, tabulates
// max |phi(f(xy)) - phi(f(x)) - phi(f(y))| over the scan, cumulatively per
// level. A finite probe family is a heuristic, not a membership test.
inline HSProbe hs_probe(const QMap& f, int k, const PairEnumeration& en) {
  const auto* tf = f.target().as<FreeGroup>();
  if (tf == nullptr) {
    throw InvalidArgument("HS probes need a free target, got " +
                          f.target().describe());
  }
  HSProbe out;
  out.k = k;
  out.enumeration = en;
  const auto probes = cyclically_reduced_words(tf->rank(), k);
  const int levels = en.radius;
  std::vector<std::vector<std::int64_t>> at(
      probes.size(), std::vector<std::int64_t>(levels + 1, 0));
  std::unordered_map<Element, std::vector<std::int64_t>, ElementHash> memo;
  auto values = [&](const Element& y) -> const std::vector<std::int64_t>& {
    auto it = memo.find(y);
    if (it != memo.end()) return it->second;
    const Word w = tf->to_word(y);
    std::vector<std::int64_t> v;
    v.reserve(probes.size());
    for (const auto& p : probes) v.push_back(brooks_value(p, w));
    return memo.emplace(y, std::move(v)).first->second;
  };
  scan_pairs(f, en, [&](const PairVisit& v) {
    const auto a = values(v.fx);
    const auto b = values(v.fy);
    const auto& c = values(v.fxy);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      const std::int64_t dv = c[p] - a[p] - b[p];
      const std::int64_t ad = dv < 0 ? -dv : dv;
      at[p][v.level] = std::max(at[p][v.level], ad);
    }
  });
  for (std::size_t p = 0; p < probes.size(); ++p) {
    ProbeRow row{probes[p], {}};
    std::int64_t mx = 0;
    for (int r = 0; r <= levels; ++r) {
      mx = std::max(mx, at[p][r]);
      row.max_defect.push_back(mx);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace qh

#endif  // QH_DEFECT_HPP_
