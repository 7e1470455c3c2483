#ifndef QH_GROUP_HPP_
#define QH_GROUP_HPP_

// Uniform group handle over concrete realizations: free groups, finitely
// generated abelian groups, finite permutation groups, finite groups given by a
// multiplication table, central extensions E_w of a base group by an abelian
// fiber twisted by a normalized 2-cocycle, and direct products.
//
// Handles are immutable and cheap to copy. Every group carries a symmetric
// generating set; balls and word norms are taken with respect to it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qh/element.hpp"
#include "qh/error.hpp"
#include "qh/word.hpp"

namespace qh {

enum class GroupKind {
  kFree,
  kAbelian,
  kPermutation,
  kTable,
  kExtension,
  kProduct
};

inline constexpr std::size_t kDefaultOrderCap = 10000;

class Group;

namespace detail {

class GroupImpl {
 public:
  virtual ~GroupImpl() = default;

  virtual GroupKind kind() const = 0;
  virtual Element multiply(const Element& x, const Element& y) const = 0;
  virtual Element invert(const Element& x) const = 0;
  virtual std::int64_t norm(const Element& x) const = 0;
  virtual bool contains(const Element& x) const = 0;
  virtual bool is_finite() const = 0;
  virtual std::string format(const Element& x) const = 0;
  virtual Element parse(std::string_view text) const = 0;

  const Element& identity() const noexcept { return identity_; }
  const std::vector<Element>& generators() const noexcept {
    return generators_;
  }
  const nlohmann::json& spec() const noexcept { return spec_; }
  const std::string& key() const noexcept { return key_; }

 protected:
  void set_spec(nlohmann::json spec) {
    spec_ = std::move(spec);
    key_ = spec_.dump();
  }

  // Appends the given generators and their inverses, skipping duplicates and
  // the identity, preserving first-seen order.
  void set_symmetric_generators(const std::vector<Element>& gens) {
    generators_.clear();
    auto add = [&](const Element& g) {
      if (g != identity_ &&
          std::find(generators_.begin(), generators_.end(), g) ==
              generators_.end()) {
        generators_.push_back(g);
      }
    };
    for (const Element& g : gens) {
      add(g);
      add(invert(g));
    }
  }

  Element identity_;
  std::vector<Element> generators_;

 private:
  nlohmann::json spec_;
  std::string key_;
};

// Splits "x;y;z" at top-level separators, respecting (), [], {}, <>.
inline std::vector<std::string_view> split_top_level(std::string_view s,
                                                     char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(' || c == '[' || c == '{' || c == '<') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}' || c == '>') {
      --depth;
    } else if (c == sep && depth == 0) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(s.substr(start));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::string_view strip_brackets(std::string_view s, char open,
                                       char close) {
  s = trim(s);
  if (s.size() < 2 || s.front() != open || s.back() != close) {
    throw InvalidArgument("expected '" + std::string(1, open) + "...' + '" +
                          std::string(1, close) + "' in \"" + std::string(s) +
                          "\"");
  }
  return s.substr(1, s.size() - 2);
}

inline std::int64_t parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) {
    throw InvalidArgument("expected an integer");
  }
  std::size_t pos = 0;
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    pos = 1;
  }
  if (pos == s.size()) {
    throw InvalidArgument("expected an integer, got \"" + std::string(s) +
                          "\"");
  }
  std::int64_t v = 0;
  for (; pos < s.size(); ++pos) {
    if (s[pos] < '0' || s[pos] > '9') {
      throw InvalidArgument("expected an integer, got \"" + std::string(s) +
                            "\"");
    }
    v = checked::add(checked::mul(v, 10), s[pos] - '0');
  }
  return neg ? -v : v;
}

inline std::vector<std::int64_t> parse_int_list(std::string_view s) {
  std::vector<std::int64_t> out;
  if (trim(s).empty()) {
    return out;
  }
  for (auto part : split_top_level(s, ',')) {
    out.push_back(parse_int(part));
  }
  return out;
}

inline std::string format_int_list(const std::vector<std::int64_t>& v,
                                   char open, char close) {
  std::string s(1, open);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  s += close;
  return s;
}

}  // namespace detail

class Group {
 public:
  Group() = default;
  explicit Group(std::shared_ptr<const detail::GroupImpl> impl)
      : impl_(std::move(impl)) {}

  bool valid() const noexcept { return impl_ != nullptr; }
  GroupKind kind() const { return impl().kind(); }
  const Element& identity() const { return impl().identity(); }
  const std::vector<Element>& generators() const {
    return impl().generators();
  }
  bool is_finite() const { return impl().is_finite(); }
  const nlohmann::json& spec() const { return impl().spec(); }

  bool contains(const Element& x) const { return impl().contains(x); }

  void require(const Element& x) const {
    if (!contains(x)) {
      throw GroupMismatch("element is not in group " + impl().key());
    }
  }

  Element multiply(const Element& x, const Element& y) const {
    return impl().multiply(x, y);
  }
  Element invert(const Element& x) const { return impl().invert(x); }
  std::int64_t norm(const Element& x) const { return impl().norm(x); }
  std::string format(const Element& x) const { return impl().format(x); }
  Element parse(std::string_view text) const {
    Element e = impl().parse(text);
    require(e);
    return e;
  }

  // x^-1 y
  Element divide_left(const Element& x, const Element& y) const {
    return multiply(invert(x), y);
  }
  // h^-1 x h
  Element conjugate(const Element& x, const Element& h) const {
    return multiply(multiply(invert(h), x), h);
  }
  bool commute(const Element& x, const Element& y) const {
    return multiply(x, y) == multiply(y, x);
  }
  Element power(const Element& x, long n) const {
    Element base = n < 0 ? invert(x) : x;
    Element r = identity();
    for (long i = 0; i < (n < 0 ? -n : n); ++i) {
      r = multiply(r, base);
    }
    return r;
  }

  // Canonical order: norm first, then payload.
  bool canonical_less(const Element& x, const Element& y) const {
    auto nx = norm(x);
    auto ny = norm(y);
    return nx != ny ? nx < ny : x < y;
  }
  void canonical_sort(std::vector<Element>& v) const {
    std::vector<std::pair<std::int64_t, std::size_t>> keys(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      keys[i] = {norm(v[i]), i};
    }
    std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : v[a.second] < v[b.second];
    });
    std::vector<Element> out;
    out.reserve(v.size());
    for (auto& k : keys) {
      out.push_back(std::move(v[k.second]));
    }
    v = std::move(out);
  }

  template <class T>
  const T* as() const {
    return dynamic_cast<const T*>(impl_.get());
  }

  template <class T>
  const T& expect(const char* what) const {
    const T* p = as<T>();
    if (p == nullptr) {
      throw InvalidArgument(std::string("expected ") + what + ", got " +
                            (valid() ? impl().key() : "<null group>"));
    }
    return *p;
  }

  std::string describe() const { return valid() ? impl().key() : "<null>"; }

  friend bool operator==(const Group& x, const Group& y) {
    if (x.impl_ == y.impl_) {
      return true;
    }
    return x.valid() && y.valid() && x.impl().key() == y.impl().key();
  }

 private:
  const detail::GroupImpl& impl() const {
    if (!impl_) {
      throw InvalidArgument("use of an empty group handle");
    }
    return *impl_;
  }

  std::shared_ptr<const detail::GroupImpl> impl_;
};

inline void require_same_group(const Group& x, const Group& y,
                               const char* context) {
  if (!(x == y)) {
    throw GroupMismatch(std::string(context) + ": " + x.describe() + " vs " +
                        y.describe());
  }
}

//------------------------------------------------------------------------------
// Free groups
//------------------------------------------------------------------------------

class FreeGroup final : public detail::GroupImpl {
 public:
  explicit FreeGroup(int rank) : rank_(Word(rank).rank()) {
    identity_ = Element();
    std::vector<Element> gens;
    for (int g = 1; g <= rank_; ++g) {
      gens.push_back(Element({g}));
    }
    set_symmetric_generators(gens);
    set_spec({{"kind", "free"}, {"rank", rank_}});
  }

  int rank() const noexcept { return rank_; }

  Word to_word(const Element& x) const {
    std::vector<Letter> letters;
    letters.reserve(x.data().size());
    for (auto c : x.data()) {
      letters.push_back(Letter::from_code(static_cast<int>(c)));
    }
    return Word::from_reduced(std::move(letters), rank_);
  }

  Element from_word(const Word& w) const {
    if (w.rank() != rank_) {
      throw GroupMismatch("word rank " + std::to_string(w.rank()) +
                          " does not match free group rank " +
                          std::to_string(rank_));
    }
    std::vector<Element::Scalar> data;
    data.reserve(w.size());
    for (Letter l : w.letters()) {
      data.push_back(l.code());
    }
    return Element(std::move(data));
  }

  GroupKind kind() const override { return GroupKind::kFree; }

  Element multiply(const Element& x, const Element& y) const override {
    const auto& a = x.data();
    const auto& b = y.data();
    std::size_t cancel = 0;
    while (cancel < a.size() && cancel < b.size() &&
           a[a.size() - 1 - cancel] == -b[cancel]) {
      ++cancel;
    }
    std::vector<Element::Scalar> out;
    out.reserve(a.size() + b.size() - 2 * cancel);
    out.insert(out.end(), a.begin(),
               a.end() - static_cast<std::ptrdiff_t>(cancel));
    out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(cancel),
               b.end());
    return Element(std::move(out));
  }

  Element invert(const Element& x) const override {
    std::vector<Element::Scalar> out(x.data().rbegin(), x.data().rend());
    for (auto& c : out) {
      c = -c;
    }
    return Element(std::move(out));
  }

  std::int64_t norm(const Element& x) const override {
    return static_cast<std::int64_t>(x.data().size());
  }

  bool contains(const Element& x) const override {
    if (!x.parts().empty()) {
      return false;
    }
    const auto& d = x.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d[i] == 0 || d[i] > rank_ || d[i] < -rank_) {
        return false;
      }
      if (i > 0 && d[i] == -d[i - 1]) {
        return false;
      }
    }
    return true;
  }

  bool is_finite() const override { return false; }

  std::string format(const Element& x) const override {
    return x.data().empty() ? std::string("1") : to_word(x).str();
  }

  Element parse(std::string_view text) const override {
    text = detail::trim(text);
    if (text == "1") {
      return identity_;
    }
    return from_word(Word::parse(text, rank_));
  }

 private:
  int rank_;
};

//------------------------------------------------------------------------------
// Finitely generated abelian groups Z^k x Z/n_1 x ... (modulus 0 means Z)
//------------------------------------------------------------------------------

class AbelianGroup final : public detail::GroupImpl {
 public:
  explicit AbelianGroup(std::vector<std::int64_t> moduli)
      : moduli_(std::move(moduli)) {
    if (moduli_.empty()) {
      throw InvalidArgument("abelian group needs at least one coordinate");
    }
    for (auto m : moduli_) {
      if (m < 0 || m == 1) {
        throw InvalidArgument("abelian moduli must be 0 (for Z) or >= 2");
      }
    }
    identity_ = Element(std::vector<Element::Scalar>(moduli_.size(), 0));
    std::vector<Element> gens;
    for (std::size_t j = 0; j < moduli_.size(); ++j) {
      std::vector<Element::Scalar> e(moduli_.size(), 0);
      e[j] = 1;
      gens.push_back(Element(std::move(e)));
    }
    set_symmetric_generators(gens);
    if (is_free()) {
      set_spec({{"kind", "free_abelian"}, {"rank", moduli_.size()}});
    } else {
      set_spec({{"kind", "abelian"}, {"moduli", moduli_}});
    }
  }

  std::size_t rank() const noexcept { return moduli_.size(); }
  const std::vector<std::int64_t>& moduli() const noexcept { return moduli_; }
  bool is_free() const {
    return std::all_of(moduli_.begin(), moduli_.end(),
                       [](auto m) { return m == 0; });
  }

  Element make(std::vector<std::int64_t> coords) const {
    if (coords.size() != moduli_.size()) {
      throw InvalidArgument("abelian element has " +
                            std::to_string(coords.size()) +
                            " coordinates, expected " +
                            std::to_string(moduli_.size()));
    }
    for (std::size_t j = 0; j < coords.size(); ++j) {
      coords[j] = checked::reduce_mod(coords[j], moduli_[j]);
    }
    return Element(std::move(coords));
  }

  Element add(const std::vector<std::int64_t>& x,
              const std::vector<std::int64_t>& y) const {
    std::vector<std::int64_t> r(moduli_.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] = checked::reduce_mod(checked::add(x[j], y[j]), moduli_[j]);
    }
    return Element(std::move(r));
  }

  GroupKind kind() const override { return GroupKind::kAbelian; }

  Element multiply(const Element& x, const Element& y) const override {
    return add(x.data(), y.data());
  }

  Element invert(const Element& x) const override {
    std::vector<std::int64_t> r(moduli_.size());
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] = checked::reduce_mod(checked::neg(x.data()[j]), moduli_[j]);
    }
    return Element(std::move(r));
  }

  // l1 norm; a finite coordinate a in Z/n contributes min(a, n - a).
  static std::int64_t coordinate_norm(std::int64_t a, std::int64_t modulus) {
    if (modulus == 0) {
      if (a == std::numeric_limits<std::int64_t>::min()) {
        throw OverflowError("norm of minimal int64");
      }
      return a < 0 ? -a : a;
    }
    return std::min(a, modulus - a);
  }

  std::int64_t norm(const Element& x) const override {
    std::int64_t n = 0;
    for (std::size_t j = 0; j < moduli_.size(); ++j) {
      n = checked::add(n, coordinate_norm(x.data()[j], moduli_[j]));
    }
    return n;
  }

  bool contains(const Element& x) const override {
    if (!x.parts().empty() || x.data().size() != moduli_.size()) {
      return false;
    }
    for (std::size_t j = 0; j < moduli_.size(); ++j) {
      if (moduli_[j] != 0 && (x.data()[j] < 0 || x.data()[j] >= moduli_[j])) {
        return false;
      }
    }
    return true;
  }

  bool is_finite() const override { return !is_free_any(); }

  std::string format(const Element& x) const override {
    return detail::format_int_list(x.data(), '(', ')');
  }

  Element parse(std::string_view text) const override {
    text = detail::trim(text);
    if (!text.empty() && text.front() == '(') {
      return make(detail::parse_int_list(detail::strip_brackets(text, '(', ')')));
    }
    if (moduli_.size() == 1) {
      return make({detail::parse_int(text)});
    }
    throw InvalidArgument("expected an abelian element \"(x1,...,xk)\"");
  }

 private:
  bool is_free_any() const {
    return std::any_of(moduli_.begin(), moduli_.end(),
                       [](auto m) { return m == 0; });
  }

  std::vector<std::int64_t> moduli_;
};

//------------------------------------------------------------------------------
// Finite groups: enumerated at construction by BFS over the generators.
//------------------------------------------------------------------------------

class FiniteGroupImpl : public detail::GroupImpl {
 public:
  std::size_t order() const noexcept { return elements_.size(); }
  // All elements in BFS order: depth, then payload.
  const std::vector<Element>& elements() const noexcept { return elements_; }
  std::size_t index_of(const Element& x) const {
    auto it = index_.find(x);
    if (it == index_.end()) {
      throw GroupMismatch("element outside the generated subgroup");
    }
    return it->second;
  }
  bool is_finite() const override { return true; }

  std::int64_t norm(const Element& x) const override {
    return depth_[index_of(x)];
  }

 protected:
  void enumerate(std::size_t cap) {
    elements_.clear();
    index_.clear();
    depth_.clear();
    std::vector<Element> layer{identity_};
    int d = 0;
    while (!layer.empty()) {
      for (auto& e : layer) {
        index_.emplace(e, elements_.size());
        elements_.push_back(e);
        depth_.push_back(d);
        if (elements_.size() > cap) {
          throw CapExceeded("finite group order exceeds cap " +
                            std::to_string(cap));
        }
      }
      std::vector<Element> next;
      std::unordered_set<Element, ElementHash> seen;
      for (const auto& e : layer) {
        for (const auto& g : generators_) {
          Element y = multiply(e, g);
          if (!index_.contains(y) && seen.insert(y).second) {
            next.push_back(std::move(y));
          }
        }
      }
      std::sort(next.begin(), next.end());
      layer = std::move(next);
      ++d;
    }
  }

  std::vector<Element> elements_;
  std::unordered_map<Element, std::size_t, ElementHash> index_;
  std::vector<std::int64_t> depth_;
};

// Permutations of {0, ..., n-1} as one-line image arrays. The product p*q
// applies p first: (p*q)[i] = q[p[i]].
class PermutationGroup final : public FiniteGroupImpl {
 public:
  PermutationGroup(std::size_t degree,
                   const std::vector<std::vector<std::int64_t>>& generators,
                   std::size_t order_cap = kDefaultOrderCap,
                   nlohmann::json spec = nullptr)
      : degree_(degree) {
    if (degree_ == 0) {
      throw InvalidArgument("permutation degree must be positive");
    }
    std::vector<Element::Scalar> id(degree_);
    std::iota(id.begin(), id.end(), 0);
    identity_ = Element(std::move(id));
    std::vector<Element> gens;
    for (const auto& g : generators) {
      Element e(g);
      if (!is_permutation(e)) {
        throw InvalidArgument("generator " +
                              detail::format_int_list(g, '[', ']') +
                              " is not a permutation of degree " +
                              std::to_string(degree_));
      }
      gens.push_back(std::move(e));
    }
    set_symmetric_generators(gens);
    if (spec.is_null()) {
      spec = {{"kind", "finite_perm"},
              {"degree", degree_},
              {"generators", generators}};
    }
    set_spec(std::move(spec));
    enumerate(order_cap);
  }

  std::size_t degree() const noexcept { return degree_; }

  GroupKind kind() const override { return GroupKind::kPermutation; }

  Element multiply(const Element& x, const Element& y) const override {
    std::vector<Element::Scalar> r(degree_);
    for (std::size_t i = 0; i < degree_; ++i) {
      r[i] = y.data()[static_cast<std::size_t>(x.data()[i])];
    }
    return Element(std::move(r));
  }

  Element invert(const Element& x) const override {
    std::vector<Element::Scalar> r(degree_);
    for (std::size_t i = 0; i < degree_; ++i) {
      r[static_cast<std::size_t>(x.data()[i])] =
          static_cast<Element::Scalar>(i);
    }
    return Element(std::move(r));
  }

  bool contains(const Element& x) const override {
    return is_permutation(x) && index_.contains(x);
  }

  std::string format(const Element& x) const override {
    return detail::format_int_list(x.data(), '[', ']');
  }

  Element parse(std::string_view text) const override {
    return Element(
        detail::parse_int_list(detail::strip_brackets(text, '[', ']')));
  }

 private:
  bool is_permutation(const Element& x) const {
    if (!x.parts().empty() || x.data().size() != degree_) {
      return false;
    }
    std::vector<bool> hit(degree_, false);
    for (auto v : x.data()) {
      if (v < 0 || static_cast<std::size_t>(v) >= degree_ ||
          hit[static_cast<std::size_t>(v)]) {
        return false;
      }
      hit[static_cast<std::size_t>(v)] = true;
    }
    return true;
  }

  std::size_t degree_;
};

// Finite group given by a Cayley table on {0, ..., n-1}; elements are {index}.
class TableGroup final : public FiniteGroupImpl {
 public:
  TableGroup(std::vector<std::vector<std::int64_t>> table,
             const std::vector<std::int64_t>& generators,
             nlohmann::json spec = nullptr)
      : table_(std::move(table)) {
    const std::size_t n = table_.size();
    if (n == 0) {
      throw InvalidArgument("multiplication table is empty");
    }
    for (const auto& row : table_) {
      if (row.size() != n) {
        throw InvalidArgument("multiplication table is not square");
      }
      for (auto v : row) {
        if (v < 0 || static_cast<std::size_t>(v) >= n) {
          throw InvalidArgument("table entry out of range");
        }
      }
    }
    std::int64_t e = -1;
    for (std::size_t i = 0; i < n && e < 0; ++i) {
      bool ok = true;
      for (std::size_t j = 0; j < n && ok; ++j) {
        ok = table_[i][j] == static_cast<std::int64_t>(j) &&
             table_[j][i] == static_cast<std::int64_t>(j);
      }
      if (ok) {
        e = static_cast<std::int64_t>(i);
      }
    }
    if (e < 0) {
      throw InvalidArgument("multiplication table has no identity");
    }
    identity_ = Element({e});
    inverse_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (table_[i][j] == e) {
          inverse_[i] = static_cast<std::int64_t>(j);
          break;
        }
      }
      if (inverse_[i] < 0 || table_[static_cast<std::size_t>(inverse_[i])][i] != e) {
        throw InvalidArgument("table element " + std::to_string(i) +
                              " has no two-sided inverse");
      }
    }
    // Associativity: exhaustive for small tables, otherwise on a prefix.
    const std::size_t m = std::min<std::size_t>(n, 128);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        for (std::size_t c = 0; c < m; ++c) {
          auto ab = static_cast<std::size_t>(table_[a][b]);
          auto bc = static_cast<std::size_t>(table_[b][c]);
          if (table_[ab][c] != table_[a][bc]) {
            throw InvalidArgument("table is not associative at (" +
                                  std::to_string(a) + "," + std::to_string(b) +
                                  "," + std::to_string(c) + ")");
          }
        }
      }
    }
    std::vector<Element> gens;
    for (auto g : generators) {
      if (g < 0 || static_cast<std::size_t>(g) >= n) {
        throw InvalidArgument("table generator out of range");
      }
      gens.push_back(Element({g}));
    }
    set_symmetric_generators(gens);
    if (spec.is_null()) {
      spec = {{"kind", "finite_table"},
              {"table", table_},
              {"generators", generators}};
    }
    set_spec(std::move(spec));
    enumerate(n);
  }

  std::size_t table_size() const noexcept { return table_.size(); }
  const std::vector<std::vector<std::int64_t>>& table() const noexcept {
    return table_;
  }

  // True when the table is addition modulo n on residues 0..n-1.
  bool is_standard_cyclic() const {
    const auto n = static_cast<std::int64_t>(table_.size());
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        if (table_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] !=
            (i + j) % n) {
          return false;
        }
      }
    }
    return true;
  }

  GroupKind kind() const override { return GroupKind::kTable; }

  Element multiply(const Element& x, const Element& y) const override {
    return Element({table_[static_cast<std::size_t>(x.data()[0])]
                          [static_cast<std::size_t>(y.data()[0])]});
  }

  Element invert(const Element& x) const override {
    return Element({inverse_[static_cast<std::size_t>(x.data()[0])]});
  }

  bool contains(const Element& x) const override {
    return x.parts().empty() && x.data().size() == 1 && x.data()[0] >= 0 &&
           static_cast<std::size_t>(x.data()[0]) < table_.size();
  }

  std::string format(const Element& x) const override {
    return "#" + std::to_string(x.data()[0]);
  }

  Element parse(std::string_view text) const override {
    text = detail::trim(text);
    if (!text.empty() && text.front() == '#') {
      text.remove_prefix(1);
    }
    return Element({detail::parse_int(text)});
  }

 private:
  std::vector<std::vector<std::int64_t>> table_;
  std::vector<std::int64_t> inverse_;
};

//------------------------------------------------------------------------------
// 2-cocycles and central extensions
//------------------------------------------------------------------------------

// Standard symplectic pairing sum_i (x_{2i-1} y_{2i} - x_{2i} y_{2i-1}).
inline std::int64_t symplectic_form(std::span<const std::int64_t> x,
                                    std::span<const std::int64_t> y) {
  if (x.size() != y.size() || x.size() % 2 != 0) {
    throw InvalidArgument("symplectic form needs equal even dimensions, got " +
                          std::to_string(x.size()) + " and " +
                          std::to_string(y.size()));
  }
  std::int64_t s = 0;
  for (std::size_t i = 0; i < x.size(); i += 2) {
    s = checked::add(s, checked::sub(checked::mul(x[i], y[i + 1]),
                                     checked::mul(x[i + 1], y[i])));
  }
  return s;
}

class Cocycle {
 public:
  enum class Rule { kSymplecticStandard, kCarryMod, kExplicitTable, kZero };

  static Cocycle symplectic(int n) {
    if (n < 1) {
      throw InvalidArgument("symplectic cocycle needs n >= 1");
    }
    Cocycle c;
    c.rule_ = Rule::kSymplecticStandard;
    c.n_ = n;
    return c;
  }

  static Cocycle carry(std::int64_t modulus) {
    if (modulus < 2) {
      throw InvalidArgument("carry cocycle needs modulus >= 2");
    }
    Cocycle c;
    c.rule_ = Rule::kCarryMod;
    c.n_ = modulus;
    return c;
  }

  static Cocycle zero() { return Cocycle(); }

  // values[i][j] is w(c_i, c_j) where i, j index the base group's elements
  // (table index for table groups, enumeration index otherwise).
  static Cocycle table(
      std::vector<std::vector<std::vector<std::int64_t>>> values) {
    Cocycle c;
    c.rule_ = Rule::kExplicitTable;
    c.table_ = std::move(values);
    return c;
  }

  Rule rule() const noexcept { return rule_; }
  std::int64_t parameter() const noexcept { return n_; }
  const std::vector<std::vector<std::vector<std::int64_t>>>& values() const {
    return table_;
  }

  nlohmann::json spec() const {
    switch (rule_) {
      case Rule::kSymplecticStandard:
        return {{"rule", "symplectic"}, {"n", n_}};
      case Rule::kCarryMod:
        return {{"rule", "carry"}, {"modulus", n_}};
      case Rule::kExplicitTable:
        return {{"rule", "table"}, {"values", table_}};
      case Rule::kZero:
        break;
    }
    return {{"rule", "zero"}};
  }

 private:
  Rule rule_ = Rule::kZero;
  std::int64_t n_ = 0;
  std::vector<std::vector<std::vector<std::int64_t>>> table_;
};

struct CocycleViolation {
  std::string what;
  std::vector<Element> witness;
};

// E_w on A x C with (a1,c1)(a2,c2) = (a1 + a2 + w(c1,c2), c1 c2).
class ExtensionGroup final : public detail::GroupImpl {
 public:
  ExtensionGroup(std::vector<std::int64_t> fiber_moduli, Group base,
                 Cocycle cocycle, nlohmann::json spec = nullptr)
      : fiber_(std::make_shared<AbelianGroup>(std::move(fiber_moduli))),
        base_(std::move(base)),
        cocycle_(std::move(cocycle)) {
    const auto& fib = fiber_.expect<AbelianGroup>("abelian fiber");
    const std::size_t dim = fib.rank();
    switch (cocycle_.rule()) {
      case Cocycle::Rule::kSymplecticStandard: {
        const auto* ab = base_.as<AbelianGroup>();
        if (ab == nullptr || !ab->is_free() ||
            ab->rank() != static_cast<std::size_t>(2 * cocycle_.parameter())) {
          throw InvalidArgument(
              "symplectic cocycle needs base Z^{2n} with n = " +
              std::to_string(cocycle_.parameter()));
        }
        if (dim != 1) {
          throw InvalidArgument("symplectic cocycle needs a rank-1 fiber");
        }
        break;
      }
      case Cocycle::Rule::kCarryMod: {
        const auto* tg = base_.as<TableGroup>();
        if (tg == nullptr || !tg->is_standard_cyclic() ||
            static_cast<std::int64_t>(tg->table_size()) !=
                cocycle_.parameter()) {
          throw InvalidArgument("carry cocycle needs base Z/" +
                                std::to_string(cocycle_.parameter()) +
                                " as a cyclic table");
        }
        if (dim != 1) {
          throw InvalidArgument("carry cocycle needs a rank-1 fiber");
        }
        break;
      }
      case Cocycle::Rule::kExplicitTable: {
        const auto* fin = base_.as<FiniteGroupImpl>();
        if (fin == nullptr) {
          throw InvalidArgument("explicit cocycle table needs a finite base");
        }
        const std::size_t n = table_base_size();
        const auto& vals = cocycle_.values();
        if (vals.size() != n) {
          throw InvalidArgument("cocycle table has " +
                                std::to_string(vals.size()) +
                                " rows, expected " + std::to_string(n));
        }
        for (const auto& row : vals) {
          if (row.size() != n) {
            throw InvalidArgument("cocycle table row has wrong length");
          }
          for (const auto& v : row) {
            if (v.size() != dim) {
              throw InvalidArgument("cocycle value has wrong fiber dimension");
            }
          }
        }
        break;
      }
      case Cocycle::Rule::kZero:
        break;
    }
    identity_ = Element(std::vector<Element::Scalar>(dim, 0),
                        {base_.identity()});
    std::vector<Element> gens;
    for (const auto& g : base_.generators()) {
      gens.push_back(Element(std::vector<Element::Scalar>(dim, 0), {g}));
    }
    for (const auto& g : fiber_.generators()) {
      gens.push_back(Element(g.data(), {base_.identity()}));
    }
    set_symmetric_generators(gens);
    if (spec.is_null()) {
      spec = {{"kind", "extension"},
              {"fiber", {{"moduli", fib.moduli()}}},
              {"base", base_.spec()},
              {"cocycle", cocycle_.spec()}};
    }
    set_spec(std::move(spec));
  }

  const Group& base() const noexcept { return base_; }
  // The fiber A as a group in its own right.
  const Group& fiber() const noexcept { return fiber_; }
  const Cocycle& cocycle() const noexcept { return cocycle_; }
  std::size_t fiber_rank() const {
    return fiber_.expect<AbelianGroup>("fiber").rank();
  }

  // w(c1, c2) as a reduced fiber element.
  Element omega(const Element& c1, const Element& c2) const {
    const auto& fib = fiber_.expect<AbelianGroup>("fiber");
    const std::size_t dim = fib.rank();
    std::vector<std::int64_t> v(dim, 0);
    switch (cocycle_.rule()) {
      case Cocycle::Rule::kSymplecticStandard:
        v[0] = symplectic_form(c1.data(), c2.data());
        break;
      case Cocycle::Rule::kCarryMod:
        v[0] = c1.data()[0] + c2.data()[0] >= cocycle_.parameter() ? 1 : 0;
        break;
      case Cocycle::Rule::kExplicitTable:
        v = cocycle_.values()[base_index(c1)][base_index(c2)];
        break;
      case Cocycle::Rule::kZero:
        break;
    }
    return fib.make(std::move(v));
  }

  // Section s(c) = (0, c).
  Element section(const Element& c) const {
    return Element(std::vector<Element::Scalar>(fiber_rank(), 0), {c});
  }
  // Projection p(a, c) = c.
  const Element& project(const Element& b) const { return b.parts().at(0); }
  // The fiber coordinate a of (a, c) as an element of the fiber group.
  Element fiber_part(const Element& b) const { return Element(b.data()); }
  // i(a) = (a, 1).
  Element include(const Element& a) const {
    return Element(a.data(), {base_.identity()});
  }
  Element make(const Element& a, const Element& c) const {
    return Element(a.data(), {c});
  }

  GroupKind kind() const override { return GroupKind::kExtension; }

  Element multiply(const Element& x, const Element& y) const override {
    const auto& fib = fiber_.expect<AbelianGroup>("fiber");
    const Element& c1 = x.parts()[0];
    const Element& c2 = y.parts()[0];
    Element w = omega(c1, c2);
    Element a = fib.add(fib.add(x.data(), y.data()).data(), w.data());
    return Element(a.data(), {base_.multiply(c1, c2)});
  }

  // (a, c)^-1 = (-a - w(c, c^-1), c^-1)
  Element invert(const Element& x) const override {
    const auto& fib = fiber_.expect<AbelianGroup>("fiber");
    const Element& c = x.parts()[0];
    Element cinv = base_.invert(c);
    Element w = omega(c, cinv);
    Element a = fib.invert(fib.add(x.data(), w.data()));
    return Element(a.data(), {cinv});
  }

  // Reporting pseudo-norm: norm_C(c) + sum_j ceil(sqrt|a_j|) over Z fiber
  // coordinates, plus the cyclic distance for finite fiber coordinates.
  std::int64_t norm(const Element& x) const override {
    const auto& moduli = fiber_.expect<AbelianGroup>("fiber").moduli();
    std::int64_t n = base_.norm(x.parts()[0]);
    for (std::size_t j = 0; j < moduli.size(); ++j) {
      const std::int64_t a = x.data()[j];
      if (moduli[j] == 0) {
        n = checked::add(n, ceil_sqrt(AbelianGroup::coordinate_norm(a, 0)));
      } else {
        n = checked::add(n, AbelianGroup::coordinate_norm(a, moduli[j]));
      }
    }
    return n;
  }

  bool contains(const Element& x) const override {
    return x.parts().size() == 1 && fiber_.contains(Element(x.data())) &&
           base_.contains(x.parts()[0]);
  }

  bool is_finite() const override {
    return base_.is_finite() && fiber_.is_finite();
  }

  std::string format(const Element& x) const override {
    return "<" + fiber_.format(Element(x.data())) + "|" +
           base_.format(x.parts()[0]) + ">";
  }

  Element parse(std::string_view text) const override {
    auto inner = detail::strip_brackets(text, '<', '>');
    auto bar = inner.find('|');
    if (bar == std::string_view::npos) {
      throw InvalidArgument("expected extension element \"<a|c>\"");
    }
    Element a = fiber_.parse(inner.substr(0, bar));
    Element c = base_.parse(inner.substr(bar + 1));
    return Element(a.data(), {c});
  }

  static std::int64_t ceil_sqrt(std::int64_t v) {
    auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
    while (r * r > v) --r;
    while (r * r < v) ++r;
    return r;
  }

 private:
  std::size_t table_base_size() const {
    if (const auto* tg = base_.as<TableGroup>()) {
      return tg->table_size();
    }
    return base_.expect<FiniteGroupImpl>("finite base").order();
  }

  std::size_t base_index(const Element& c) const {
    if (base_.as<TableGroup>() != nullptr) {
      return static_cast<std::size_t>(c.data()[0]);
    }
    return base_.expect<FiniteGroupImpl>("finite base").index_of(c);
  }

  Group fiber_;
  Group base_;
  Cocycle cocycle_;
};

//------------------------------------------------------------------------------
// Direct products
//------------------------------------------------------------------------------

class ProductGroup final : public detail::GroupImpl {
 public:
  explicit ProductGroup(std::vector<Group> factors)
      : factors_(std::move(factors)) {
    if (factors_.empty()) {
      throw InvalidArgument("direct product needs at least one factor");
    }
    std::vector<Element> ids;
    nlohmann::json specs = nlohmann::json::array();
    for (const auto& f : factors_) {
      ids.push_back(f.identity());
      specs.push_back(f.spec());
    }
    identity_ = Element({}, ids);
    std::vector<Element> gens;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      for (const auto& g : factors_[i].generators()) {
        auto parts = ids;
        parts[i] = g;
        gens.push_back(Element({}, std::move(parts)));
      }
    }
    set_symmetric_generators(gens);
    set_spec({{"kind", "product"}, {"factors", specs}});
  }

  const std::vector<Group>& factors() const noexcept { return factors_; }

  Element make(std::vector<Element> components) const {
    return Element({}, std::move(components));
  }

  GroupKind kind() const override { return GroupKind::kProduct; }

  Element multiply(const Element& x, const Element& y) const override {
    std::vector<Element> parts;
    parts.reserve(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      parts.push_back(factors_[i].multiply(x.parts()[i], y.parts()[i]));
    }
    return Element({}, std::move(parts));
  }

  Element invert(const Element& x) const override {
    std::vector<Element> parts;
    parts.reserve(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      parts.push_back(factors_[i].invert(x.parts()[i]));
    }
    return Element({}, std::move(parts));
  }

  std::int64_t norm(const Element& x) const override {
    std::int64_t n = 0;
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      n = checked::add(n, factors_[i].norm(x.parts()[i]));
    }
    return n;
  }

  bool contains(const Element& x) const override {
    if (!x.data().empty() || x.parts().size() != factors_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (!factors_[i].contains(x.parts()[i])) {
        return false;
      }
    }
    return true;
  }

  bool is_finite() const override {
    return std::all_of(factors_.begin(), factors_.end(),
                       [](const Group& g) { return g.is_finite(); });
  }

  std::string format(const Element& x) const override {
    std::string s = "{";
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (i) s += ';';
      s += factors_[i].format(x.parts()[i]);
    }
    return s + "}";
  }

  Element parse(std::string_view text) const override {
    auto items = detail::split_top_level(detail::strip_brackets(text, '{', '}'),
                                         ';');
    if (items.size() != factors_.size()) {
      throw InvalidArgument("product element has " +
                            std::to_string(items.size()) +
                            " components, expected " +
                            std::to_string(factors_.size()));
    }
    std::vector<Element> parts;
    for (std::size_t i = 0; i < items.size(); ++i) {
      parts.push_back(factors_[i].parse(items[i]));
    }
    return Element({}, std::move(parts));
  }

 private:
  std::vector<Group> factors_;
};

//------------------------------------------------------------------------------
// Factories
//------------------------------------------------------------------------------

inline Group free_group(int rank) {
  return Group(std::make_shared<FreeGroup>(rank));
}

inline Group free_abelian_group(std::size_t rank) {
  return Group(std::make_shared<AbelianGroup>(std::vector<std::int64_t>(rank, 0)));
}

inline Group abelian_group(std::vector<std::int64_t> moduli) {
  return Group(std::make_shared<AbelianGroup>(std::move(moduli)));
}

inline Group permutation_group(
    std::size_t degree, const std::vector<std::vector<std::int64_t>>& gens,
    std::size_t order_cap = kDefaultOrderCap) {
  return Group(std::make_shared<PermutationGroup>(degree, gens, order_cap));
}

inline Group table_group(std::vector<std::vector<std::int64_t>> table,
                         const std::vector<std::int64_t>& gens) {
  return Group(std::make_shared<TableGroup>(std::move(table), gens));
}

// Z/n as the table of addition mod n, generated by 1.
inline Group cyclic_group(std::int64_t n) {
  if (n < 1) {
    throw InvalidArgument("cyclic group order must be positive");
  }
  std::vector<std::vector<std::int64_t>> table(
      static_cast<std::size_t>(n), std::vector<std::int64_t>(static_cast<std::size_t>(n)));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = (i + j) % n;
    }
  }
  std::vector<std::int64_t> gens;
  if (n > 1) gens.push_back(1);
  return Group(std::make_shared<TableGroup>(
      std::move(table), gens, nlohmann::json{{"kind", "cyclic"}, {"order", n}}));
}

// S_n generated by the transposition (0 1) and the cycle (0 1 ... n-1).
inline Group symmetric_group(std::size_t n,
                             std::size_t order_cap = kDefaultOrderCap) {
  if (n < 2) {
    throw InvalidArgument("symmetric group degree must be >= 2");
  }
  std::vector<std::int64_t> t(n), c(n);
  std::iota(t.begin(), t.end(), 0);
  std::swap(t[0], t[1]);
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = static_cast<std::int64_t>((i + 1) % n);
  }
  return Group(std::make_shared<PermutationGroup>(
      n, std::vector<std::vector<std::int64_t>>{t, c}, order_cap,
      nlohmann::json{{"kind", "symmetric"}, {"degree", n}}));
}

// Quaternion group Q8 in its regular representation on 8 points,
// generated by i and j.
inline Group quaternion_group() {
  std::vector<std::vector<std::int64_t>> gens{{1, 2, 3, 0, 5, 6, 7, 4},
                                              {4, 7, 6, 5, 2, 1, 0, 3}};
  return Group(std::make_shared<PermutationGroup>(
      8, gens, kDefaultOrderCap, nlohmann::json{{"kind", "quaternion"}}));
}

inline Group direct_product(std::vector<Group> factors) {
  return Group(std::make_shared<ProductGroup>(std::move(factors)));
}

}  // namespace qh

#endif  // QH_GROUP_HPP_
