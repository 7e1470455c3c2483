#ifndef QH_QMAP_HPP_
#define QH_QMAP_HPP_

// Quasihomomorphism candidates: a domain, a target and an evaluation rule.
// Rules compose into trees (products, compositions, lifts, perturbations).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qh/element.hpp"
#include "qh/enumerate.hpp"
#include "qh/error.hpp"
#include "qh/extension.hpp"
#include "qh/group.hpp"
#include "qh/word.hpp"

namespace qh {

class Rule {
 public:
  virtual ~Rule() = default;
  virtual Element evaluate(const Element& x) const = 0;
  virtual nlohmann::json spec() const = 0;
};

class QMap {
 public:
  QMap() = default;
  QMap(Group domain, Group target, std::shared_ptr<const Rule> rule)
      : domain_(std::move(domain)),
        target_(std::move(target)),
        rule_(std::move(rule)) {}

  const Group& domain() const noexcept { return domain_; }
  const Group& target() const noexcept { return target_; }
  const Rule& rule() const { return *rule_; }

  template <class R>
  const R* rule_as() const {
    return dynamic_cast<const R*>(rule_.get());
  }

  Element operator()(const Element& x) const {
    domain_.require(x);
    return rule_->evaluate(x);
  }

  // Skips the domain membership check; for inner loops over known elements.
  Element eval_unchecked(const Element& x) const { return rule_->evaluate(x); }

  nlohmann::json spec() const {
    return {{"domain", domain_.spec()},
            {"target", target_.spec()},
            {"rule", rule_->spec()}};
  }

 private:
  Group domain_;
  Group target_;
  std::shared_ptr<const Rule> rule_;
};

class NonOverlapError : public InvalidArgument {
 public:
  NonOverlapError(const std::string& what, OverlapWitness witness)
      : InvalidArgument(what), witness_(std::move(witness)) {}
  const OverlapWitness& witness() const noexcept { return witness_; }

 private:
  OverlapWitness witness_;
};

class ProjectionMismatch : public Error {
 public:
  ProjectionMismatch(const std::string& what, Element witness)
      : Error(what), witness_(std::move(witness)) {}
  const Element& witness() const noexcept { return witness_; }

 private:
  Element witness_;
};

//------------------------------------------------------------------------------
// Word-level evaluators
//------------------------------------------------------------------------------

// (#occurrences of w in x) - (#occurrences of w^-1 in x), overlapping matches
// included.
inline std::int64_t brooks_value(const Word& w, const Word& x) {
  std::array<Word, 2> patterns{w, invert(w)};
  std::int64_t v = 0;
  for (const auto& occ : find_occurrences(x, patterns)) {
    v += occ.pattern_id == 0 ? 1 : -1;
  }
  return v;
}

struct MiddleValue {
  Word value;
  // Ids into T = {u, u^-1, v, v^-1} of the matched subwords t_1 ... t_n.
  std::vector<std::size_t> pattern_ids;
};

// f_{u,v}(x) = t_1 ... t_n, the ordered product of all subwords of x that are
// copies of elements of T; the identity when there are none.
inline MiddleValue middle_uv_value(const Word& u, const Word& v,
                                   const Word& x) {
  const auto t = pattern_set(u, v);
  MiddleValue out{Word(x.rank()), {}};
  for (const auto& occ : find_occurrences(x, t)) {
    out.value = multiply(out.value, t[occ.pattern_id]);
    out.pattern_ids.push_back(occ.pattern_id);
  }
  return out;
}

// alpha: <u, v> -> Z with u -> 1, v -> 0, read off the pattern sequence.
inline std::int64_t alpha_abelianize(std::span<const std::size_t> ids) {
  std::int64_t a = 0;
  for (auto id : ids) {
    if (id == 0) ++a;
    if (id == 1) --a;
  }
  return a;
}

//------------------------------------------------------------------------------
// Rules
//------------------------------------------------------------------------------

class GeneratorHomRule final : public Rule {
 public:
  GeneratorHomRule(const Group& domain, Group target,
                   std::vector<Element> images)
      : target_(std::move(target)), images_(std::move(images)) {
    const auto& fg = domain.expect<FreeGroup>("free domain for a generator "
                                              "homomorphism");
    if (images_.size() != static_cast<std::size_t>(fg.rank())) {
      throw InvalidArgument("generator homomorphism needs " +
                            std::to_string(fg.rank()) + " images, got " +
                            std::to_string(images_.size()));
    }
    for (const auto& img : images_) {
      target_.require(img);
      inverses_.push_back(target_.invert(img));
    }
  }

  const std::vector<Element>& images() const noexcept { return images_; }

  Element evaluate(const Element& x) const override {
    Element r = target_.identity();
    for (auto c : x.data()) {
      const auto g = static_cast<std::size_t>(c > 0 ? c : -c) - 1;
      r = target_.multiply(r, c > 0 ? images_[g] : inverses_[g]);
    }
    return r;
  }

  nlohmann::json spec() const override {
    nlohmann::json imgs = nlohmann::json::array();
    for (const auto& i : images_) imgs.push_back(target_.format(i));
    return {{"type", "generator_hom"}, {"images", imgs}};
  }

 private:
  Group target_;
  std::vector<Element> images_;
  std::vector<Element> inverses_;
};

class IdentityRule final : public Rule {
 public:
  Element evaluate(const Element& x) const override { return x; }
  nlohmann::json spec() const override { return {{"type", "identity"}}; }
};

class PointTableRule final : public Rule {
 public:
  PointTableRule(const Group& domain, Group target,
                 std::vector<std::pair<Element, Element>> table)
      : domain_(domain), target_(std::move(target)) {
    if (!domain.is_finite()) {
      throw InvalidArgument("point tables need a finite domain");
    }
    for (auto& [x, y] : table) {
      domain.require(x);
      target_.require(y);
      values_[x] = y;
    }
    for (const auto& x : enumerate_all(domain)) {
      if (!values_.contains(x)) {
        throw InvalidArgument("point table has no value at " +
                              domain.format(x));
      }
      order_.push_back(x);
    }
  }

  Element evaluate(const Element& x) const override { return values_.at(x); }

  nlohmann::json spec() const override {
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& x : order_) {
      vals.push_back({domain_.format(x), target_.format(values_.at(x))});
    }
    return {{"type", "point_table"}, {"values", vals}};
  }

 private:
  Group domain_;
  Group target_;
  std::unordered_map<Element, Element, ElementHash> values_;
  std::vector<Element> order_;
};

class BrooksRule final : public Rule {
 public:
  BrooksRule(const Group& domain, Word w)
      : free_(&domain.expect<FreeGroup>("free domain for a Brooks "
                                        "quasimorphism")),
        domain_(domain),
        w_(std::move(w)) {
    if (w_.empty() || !is_cyclically_reduced(w_)) {
      throw InvalidArgument("Brooks word must be nonempty and cyclically "
                            "reduced, got '" + w_.str() + "'");
    }
    if (w_.rank() != free_->rank()) {
      throw InvalidArgument("Brooks word rank does not match the domain");
    }
  }

  const Word& word() const noexcept { return w_; }

  Element evaluate(const Element& x) const override {
    return Element({brooks_value(w_, free_->to_word(x))});
  }

  nlohmann::json spec() const override {
    return {{"type", "brooks"}, {"word", w_.str()}};
  }

 private:
  const FreeGroup* free_;
  Group domain_;  // keeps free_ alive
  Word w_;
};

class MiddleUVRule final : public Rule {
 public:
  MiddleUVRule(const Group& domain, Word u, Word v)
      : free_(&domain.expect<FreeGroup>("free domain for f_{u,v}")),
        domain_(domain),
        u_(std::move(u)),
        v_(std::move(v)) {
    if (u_.rank() != free_->rank() || v_.rank() != free_->rank()) {
      throw InvalidArgument("u, v must be words over the domain alphabet");
    }
    certificate_ = verify_nonoverlapping(u_, v_);
    if (!certificate_.ok) {
      auto t = pattern_set(u_, v_);
      throw NonOverlapError("u='" + u_.str() + "', v='" + v_.str() +
                                "' overlap: " +
                                describe(*certificate_.witness, t),
                            *certificate_.witness);
    }
  }

  const Word& u() const noexcept { return u_; }
  const Word& v() const noexcept { return v_; }
  const NonOverlapCertificate& certificate() const noexcept {
    return certificate_;
  }
  std::size_t max_length() const { return std::max(u_.size(), v_.size()); }

  MiddleValue evaluate_word(const Word& x) const {
    return middle_uv_value(u_, v_, x);
  }

  Element evaluate(const Element& x) const override {
    return free_->from_word(middle_uv_value(u_, v_, free_->to_word(x)).value);
  }

  nlohmann::json spec() const override {
    return {{"type", "middle_uv"}, {"u", u_.str()}, {"v", v_.str()}};
  }

 private:
  const FreeGroup* free_;
  Group domain_;
  Word u_;
  Word v_;
  NonOverlapCertificate certificate_;
};

// x -> s(f(x)) = (0, f(x)) for an inner map f into the base of an extension.
class SectionLiftRule final : public Rule {
 public:
  SectionLiftRule(QMap inner, Group extension)
      : inner_(std::move(inner)), extension_(std::move(extension)) {
    const auto& e = extension_.expect<ExtensionGroup>("extension target");
    require_same_group(inner_.target(), e.base(),
                       "section lift: inner target vs extension base");
    ext_ = &e;
  }

  const QMap& inner() const noexcept { return inner_; }

  Element evaluate(const Element& x) const override {
    return ext_->section(inner_.eval_unchecked(x));
  }

  nlohmann::json spec() const override {
    return {{"type", "section_lift"}, {"inner", inner_.spec()}};
  }

 private:
  QMap inner_;
  Group extension_;
  const ExtensionGroup* ext_;
};

// Free-domain homomorphism into E_w with generator images (0, h(a)).
class HomLiftRule final : public Rule {
 public:
  HomLiftRule(const Group& domain, Group extension,
              std::vector<Element> base_images)
      : extension_(std::move(extension)), base_images_(std::move(base_images)) {
    const auto& fg = domain.expect<FreeGroup>("free domain for a "
                                              "homomorphic lift");
    const auto& e = extension_.expect<ExtensionGroup>("extension target");
    if (base_images_.size() != static_cast<std::size_t>(fg.rank())) {
      throw InvalidArgument("homomorphic lift needs one base image per "
                            "generator");
    }
    for (const auto& c : base_images_) {
      e.base().require(c);
      lifted_.push_back(e.section(c));
      lifted_inv_.push_back(extension_.invert(lifted_.back()));
    }
  }

  const std::vector<Element>& base_images() const noexcept {
    return base_images_;
  }

  Element evaluate(const Element& x) const override {
    Element r = extension_.identity();
    for (auto c : x.data()) {
      const auto g = static_cast<std::size_t>(c > 0 ? c : -c) - 1;
      r = extension_.multiply(r, c > 0 ? lifted_[g] : lifted_inv_[g]);
    }
    return r;
  }

  nlohmann::json spec() const override {
    const auto& base = extension_.expect<ExtensionGroup>("extension").base();
    nlohmann::json imgs = nlohmann::json::array();
    for (const auto& c : base_images_) imgs.push_back(base.format(c));
    return {{"type", "hom_lift"}, {"images", imgs}};
  }

 private:
  Group extension_;
  std::vector<Element> base_images_;
  std::vector<Element> lifted_;
  std::vector<Element> lifted_inv_;
};

// x -> f(x) * i(psi(x)) with psi a map into the (central) fiber.
class CentralPerturbationRule final : public Rule {
 public:
  CentralPerturbationRule(QMap base, QMap psi)
      : base_(std::move(base)), psi_(std::move(psi)) {
    const auto& e = base_.target().expect<ExtensionGroup>("extension target");
    require_same_group(base_.domain(), psi_.domain(),
                       "central perturbation: domains");
    require_same_group(psi_.target(), e.fiber(),
                       "central perturbation: psi target vs fiber");
    ext_ = &e;
  }

  const QMap& base() const noexcept { return base_; }
  const QMap& psi() const noexcept { return psi_; }

  Element evaluate(const Element& x) const override {
    return base_.target().multiply(base_.eval_unchecked(x),
                                   ext_->include(psi_.eval_unchecked(x)));
  }

  nlohmann::json spec() const override {
    return {{"type", "central_perturbation"},
            {"base", base_.spec()},
            {"psi", psi_.spec()}};
  }

 private:
  QMap base_;
  QMap psi_;
  const ExtensionGroup* ext_;
};

class ProductRule final : public Rule {
 public:
  explicit ProductRule(std::vector<QMap> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) {
      throw InvalidArgument("product of zero maps");
    }
    for (const auto& f : factors_) {
      require_same_group(factors_[0].domain(), f.domain(), "product: domains");
    }
  }

  const std::vector<QMap>& factors() const noexcept { return factors_; }

  Element evaluate(const Element& x) const override {
    std::vector<Element> parts;
    parts.reserve(factors_.size());
    for (const auto& f : factors_) {
      parts.push_back(f.eval_unchecked(x));
    }
    return Element({}, std::move(parts));
  }

  nlohmann::json spec() const override {
    nlohmann::json fs = nlohmann::json::array();
    for (const auto& f : factors_) fs.push_back(f.spec());
    return {{"type", "product"}, {"factors", fs}};
  }

 private:
  std::vector<QMap> factors_;
};

class ComposeRule final : public Rule {
 public:
  ComposeRule(QMap outer, QMap inner)
      : outer_(std::move(outer)), inner_(std::move(inner)) {
    require_same_group(inner_.target(), outer_.domain(),
                       "compose: inner target vs outer domain");
  }

  const QMap& outer() const noexcept { return outer_; }
  const QMap& inner() const noexcept { return inner_; }

  Element evaluate(const Element& x) const override {
    return outer_.eval_unchecked(inner_.eval_unchecked(x));
  }

  nlohmann::json spec() const override {
    return {{"type", "compose"},
            {"outer", outer_.spec()},
            {"inner", inner_.spec()}};
  }

 private:
  QMap outer_;
  QMap inner_;
};

// Post-composition with a projection computed elsewhere (nearest point,
// coset retraction, quotient); the projector must be pure.
class PostProjectRule final : public Rule {
 public:
  PostProjectRule(QMap inner, std::function<Element(const Element&)> projector,
                  nlohmann::json projection_spec)
      : inner_(std::move(inner)),
        projector_(std::move(projector)),
        projection_spec_(std::move(projection_spec)) {}

  const QMap& inner() const noexcept { return inner_; }

  Element evaluate(const Element& x) const override {
    return projector_(inner_.eval_unchecked(x));
  }

  nlohmann::json spec() const override {
    return {{"type", "post_project"},
            {"inner", inner_.spec()},
            {"projection", projection_spec_}};
  }

 private:
  QMap inner_;
  std::function<Element(const Element&)> projector_;
  nlohmann::json projection_spec_;
};

class PointPerturbationRule final : public Rule {
 public:
  PointPerturbationRule(QMap base,
                        std::vector<std::pair<Element, Element>> overrides)
      : base_(std::move(base)) {
    for (auto& [x, y] : overrides) {
      base_.domain().require(x);
      base_.target().require(y);
      if (!overrides_.emplace(x, y).second) {
        throw InvalidArgument("duplicate override at " +
                              base_.domain().format(x));
      }
      order_.push_back(x);
    }
  }

  const QMap& base() const noexcept { return base_; }
  const std::unordered_map<Element, Element, ElementHash>& overrides() const {
    return overrides_;
  }

  Element evaluate(const Element& x) const override {
    if (auto it = overrides_.find(x); it != overrides_.end()) {
      return it->second;
    }
    return base_.eval_unchecked(x);
  }

  nlohmann::json spec() const override {
    nlohmann::json ov = nlohmann::json::array();
    for (const auto& x : order_) {
      ov.push_back({base_.domain().format(x),
                    base_.target().format(overrides_.at(x))});
    }
    return {{"type", "point_perturbation"},
            {"base", base_.spec()},
            {"overrides", ov}};
  }

 private:
  QMap base_;
  std::unordered_map<Element, Element, ElementHash> overrides_;
  std::vector<Element> order_;
};

// delta(g) = f2(g) f1(g)^-1 read in the fiber, for two lifts of the same map.
class LiftDifferenceRule final : public Rule {
 public:
  LiftDifferenceRule(QMap f1, QMap f2) : f1_(std::move(f1)), f2_(std::move(f2)) {
    require_same_group(f1_.domain(), f2_.domain(), "lift difference: domains");
    require_same_group(f1_.target(), f2_.target(), "lift difference: targets");
    ext_ = &f1_.target().expect<ExtensionGroup>("extension target");
  }

  Element evaluate(const Element& x) const override {
    const Group& e = f1_.target();
    const Element a = f1_.eval_unchecked(x);
    const Element b = f2_.eval_unchecked(x);
    if (ext_->project(a) != ext_->project(b)) {
      throw ProjectionMismatch("lifts project to different base elements at " +
                                   f1_.domain().format(x),
                               x);
    }
    return ext_->fiber_part(e.multiply(b, e.invert(a)));
  }

  nlohmann::json spec() const override {
    return {{"type", "lift_difference"}, {"f1", f1_.spec()}, {"f2", f2_.spec()}};
  }

 private:
  QMap f1_;
  QMap f2_;
  const ExtensionGroup* ext_;
};

//------------------------------------------------------------------------------
// Constructors
//------------------------------------------------------------------------------

inline QMap make_generator_hom(const Group& domain, const Group& target,
                               std::vector<Element> images) {
  return QMap(domain, target,
              std::make_shared<GeneratorHomRule>(domain, target,
                                                 std::move(images)));
}

inline QMap make_identity(const Group& g) {
  const auto* free = g.as<FreeGroup>();
  if (free == nullptr) {
    return QMap(g, g, std::make_shared<IdentityRule>());
  }
  const auto& fg = *free;
  std::vector<Element> imgs;
  for (int i = 1; i <= fg.rank(); ++i) imgs.push_back(Element({i}));
  return make_generator_hom(g, g, std::move(imgs));
}

inline QMap make_point_table(const Group& domain, const Group& target,
                             std::vector<std::pair<Element, Element>> table) {
  return QMap(domain, target,
              std::make_shared<PointTableRule>(domain, target,
                                               std::move(table)));
}

// Any function on a finite domain, tabulated.
inline QMap make_point_table(const Group& domain, const Group& target,
                             const std::function<Element(const Element&)>& fn) {
  std::vector<std::pair<Element, Element>> table;
  for (const auto& x : enumerate_all(domain)) {
    table.emplace_back(x, fn(x));
  }
  return make_point_table(domain, target, std::move(table));
}

inline QMap make_brooks(const Group& domain, const Word& w) {
  return QMap(domain, free_abelian_group(1),
              std::make_shared<BrooksRule>(domain, w));
}

inline QMap make_middle_uv(const Group& domain, const Word& u, const Word& v) {
  return QMap(domain, domain, std::make_shared<MiddleUVRule>(domain, u, v));
}

inline QMap make_section_lift(const QMap& inner, const Group& extension) {
  return QMap(inner.domain(), extension,
              std::make_shared<SectionLiftRule>(inner, extension));
}

inline QMap make_hom_lift(const Group& domain, const Group& extension,
                          std::vector<Element> base_images) {
  return QMap(domain, extension,
              std::make_shared<HomLiftRule>(domain, extension,
                                            std::move(base_images)));
}

inline QMap make_central_perturbation(const QMap& base, const QMap& psi) {
  return QMap(base.domain(), base.target(),
              std::make_shared<CentralPerturbationRule>(base, psi));
}

inline QMap make_product(std::vector<QMap> factors) {
  std::vector<Group> targets;
  for (const auto& f : factors) targets.push_back(f.target());
  auto rule = std::make_shared<ProductRule>(factors);
  return QMap(factors.at(0).domain(), direct_product(std::move(targets)),
              std::move(rule));
}

inline QMap make_compose(const QMap& outer, const QMap& inner) {
  return QMap(inner.domain(), outer.target(),
              std::make_shared<ComposeRule>(outer, inner));
}

inline QMap make_post_project(const QMap& inner, const Group& target,
                              std::function<Element(const Element&)> projector,
                              nlohmann::json projection_spec) {
  return QMap(inner.domain(), target,
              std::make_shared<PostProjectRule>(inner, std::move(projector),
                                                std::move(projection_spec)));
}

inline QMap make_point_perturbation(
    const QMap& base, std::vector<std::pair<Element, Element>> overrides) {
  return QMap(base.domain(), base.target(),
              std::make_shared<PointPerturbationRule>(base,
                                                      std::move(overrides)));
}

//------------------------------------------------------------------------------
// Lift differences
//------------------------------------------------------------------------------

struct LiftDifference {
  QMap delta;  // domain -> fiber A
  std::vector<Element> points;
  std::vector<Element> values;  // delta at each point, in the fiber
};

// Verifies p o f1 = p o f2 on `points` and that every f2(g) f1(g)^-1 lies in
// the central fiber; returns delta as a fiber-valued map.
inline LiftDifference lift_difference(const QMap& f1, const QMap& f2,
                                      const std::vector<Element>& points) {
  auto rule = std::make_shared<LiftDifferenceRule>(f1, f2);
  const auto& ext = f1.target().expect<ExtensionGroup>("extension target");
  LiftDifference out{QMap(f1.domain(), ext.fiber(), rule), points, {}};
  out.values.reserve(points.size());
  for (const auto& g : points) {
    out.values.push_back(out.delta(g));
  }
  return out;
}

}  // namespace qh

#endif  // QH_QMAP_HPP_
