#ifndef QH_WORD_HPP_
#define QH_WORD_HPP_

// Free-group words over the alphabet a, b, c, ... (generators 1, 2, 3, ...)
// with upper-case letters for inverses, and the subword-occurrence machinery
// used by counting quasimorphisms and middle-quasihomomorphisms.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qh/error.hpp"

namespace qh {

inline constexpr int kMaxRank = 26;

class Letter {
 public:
  constexpr Letter() = default;

  constexpr Letter(int generator, int sign) : code_(generator * sign) {
    if (generator < 1 || (sign != 1 && sign != -1)) {
      throw InvalidArgument("invalid letter: generator " +
                            std::to_string(generator) + ", sign " +
                            std::to_string(sign));
    }
  }

  static constexpr Letter from_code(int code) {
    return code > 0 ? Letter(code, 1) : Letter(-code, -1);
  }

  static Letter from_char(char c) {
    if (c >= 'a' && c <= 'z') {
      return Letter(c - 'a' + 1, 1);
    }
    if (c >= 'A' && c <= 'Z') {
      return Letter(c - 'A' + 1, -1);
    }
    throw InvalidArgument(std::string("invalid letter '") + c + "'");
  }

  constexpr int generator() const noexcept {
    return code_ < 0 ? -code_ : code_;
  }
  constexpr int sign() const noexcept { return code_ < 0 ? -1 : 1; }
  constexpr int code() const noexcept { return code_; }
  constexpr Letter inverse() const noexcept { return from_code_unchecked(-code_); }

  char to_char() const {
    char base = sign() > 0 ? 'a' : 'A';
    return static_cast<char>(base + generator() - 1);
  }

  constexpr bool cancels(Letter other) const noexcept {
    return code_ == -other.code_;
  }

  friend constexpr bool operator==(Letter, Letter) = default;
  friend constexpr auto operator<=>(Letter, Letter) = default;

 private:
  static constexpr Letter from_code_unchecked(int code) noexcept {
    Letter l;
    l.code_ = code;
    return l;
  }

  int code_ = 1;
};

// A freely reduced word over an alphabet of fixed rank.
class Word {
 public:
  Word() = default;
  explicit Word(int rank) : rank_(check_rank(rank)) {}

  // Free reduction of an arbitrary letter sequence.
  static Word reduce(std::span<const Letter> raw, int rank) {
    Word w(rank);
    w.letters_.reserve(raw.size());
    for (Letter l : raw) {
      if (l.generator() > rank) {
        throw InvalidArgument("letter '" + std::string(1, l.to_char()) +
                              "' exceeds alphabet rank " +
                              std::to_string(rank));
      }
      w.push_reducing(l);
    }
    return w;
  }

  // Parses lower/upper-case text; the result is freely reduced.
  static Word parse(std::string_view text, int rank) {
    std::vector<Letter> raw;
    raw.reserve(text.size());
    for (char c : text) {
      raw.push_back(Letter::from_char(c));
    }
    return reduce(raw, rank);
  }

  // Wraps letters that are already reduced; throws if they are not.
  static Word from_reduced(std::vector<Letter> letters, int rank) {
    Word w(rank);
    for (std::size_t i = 0; i < letters.size(); ++i) {
      if (letters[i].generator() > rank) {
        throw InvalidArgument("letter exceeds alphabet rank");
      }
      if (i > 0 && letters[i].cancels(letters[i - 1])) {
        throw InvalidArgument("word is not freely reduced");
      }
    }
    w.letters_ = std::move(letters);
    return w;
  }

  static Word generator(int index, int rank, int sign = 1) {
    Word w(rank);
    if (index < 1 || index > rank) {
      throw InvalidArgument("generator index out of range");
    }
    w.letters_.push_back(Letter(index, sign));
    return w;
  }

  int rank() const noexcept { return rank_; }
  std::size_t size() const noexcept { return letters_.size(); }
  bool empty() const noexcept { return letters_.empty(); }
  Letter operator[](std::size_t i) const { return letters_[i]; }
  std::span<const Letter> letters() const noexcept { return letters_; }

  std::string str() const {
    std::string s;
    s.reserve(letters_.size());
    for (Letter l : letters_) {
      s.push_back(l.to_char());
    }
    return s;
  }

  // Equality of reduced forms is letter-sequence equality.
  friend bool operator==(const Word& x, const Word& y) {
    return x.letters_ == y.letters_;
  }
  friend auto operator<=>(const Word& x, const Word& y) {
    return x.letters_ <=> y.letters_;
  }

 private:
  friend Word multiply(const Word& x, const Word& y);
  friend Word invert(const Word& x);
  friend Word cyclic_reduce(const Word& x);

  static int check_rank(int rank) {
    if (rank < 1 || rank > kMaxRank) {
      throw InvalidArgument("alphabet rank must be in [1, 26], got " +
                            std::to_string(rank));
    }
    return rank;
  }

  void push_reducing(Letter l) {
    if (!letters_.empty() && letters_.back().cancels(l)) {
      letters_.pop_back();
    } else {
      letters_.push_back(l);
    }
  }

  int rank_ = 1;
  std::vector<Letter> letters_;
};

inline void require_same_rank(const Word& x, const Word& y) {
  if (x.rank() != y.rank()) {
    throw InvalidArgument("alphabet rank mismatch: " +
                          std::to_string(x.rank()) + " vs " +
                          std::to_string(y.rank()));
  }
}

inline Word multiply(const Word& x, const Word& y) {
  require_same_rank(x, y);
  std::size_t cancel = 0;
  while (cancel < x.size() && cancel < y.size() &&
         x[x.size() - 1 - cancel].cancels(y[cancel])) {
    ++cancel;
  }
  Word r(x.rank());
  r.letters_.reserve(x.size() + y.size() - 2 * cancel);
  r.letters_.insert(r.letters_.end(), x.letters_.begin(),
                    x.letters_.end() - static_cast<std::ptrdiff_t>(cancel));
  r.letters_.insert(r.letters_.end(),
                    y.letters_.begin() + static_cast<std::ptrdiff_t>(cancel),
                    y.letters_.end());
  return r;
}

inline Word invert(const Word& x) {
  Word r(x.rank());
  r.letters_.reserve(x.size());
  for (auto it = x.letters_.rbegin(); it != x.letters_.rend(); ++it) {
    r.letters_.push_back(it->inverse());
  }
  return r;
}

inline Word power(const Word& x, long n) {
  Word base = n < 0 ? invert(x) : x;
  Word r(x.rank());
  for (long i = 0; i < (n < 0 ? -n : n); ++i) {
    r = multiply(r, base);
  }
  return r;
}

inline bool is_cyclically_reduced(const Word& x) {
  return x.size() < 2 || !x[0].cancels(x[x.size() - 1]);
}

// Strips matching inverse pairs from the two ends.
inline Word cyclic_reduce(const Word& x) {
  std::size_t lo = 0;
  std::size_t hi = x.size();
  while (hi - lo >= 2 && x[lo].cancels(x[hi - 1])) {
    ++lo;
    --hi;
  }
  Word r(x.rank());
  r.letters_.assign(x.letters_.begin() + static_cast<std::ptrdiff_t>(lo),
                    x.letters_.begin() + static_cast<std::ptrdiff_t>(hi));
  return r;
}

inline bool has_factor_at(std::span<const Letter> host,
                          std::span<const Letter> pattern, std::size_t start) {
  if (start + pattern.size() > host.size()) {
    return false;
  }
  return std::equal(pattern.begin(), pattern.end(),
                    host.begin() + static_cast<std::ptrdiff_t>(start));
}

inline bool is_factor(const Word& pattern, const Word& host) {
  if (pattern.size() > host.size()) {
    return false;
  }
  for (std::size_t s = 0; s + pattern.size() <= host.size(); ++s) {
    if (has_factor_at(host.letters(), pattern.letters(), s)) {
      return true;
    }
  }
  return false;
}

struct Occurrence {
  std::size_t pattern_id = 0;
  std::size_t start = 0;

  friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

// Every positioned match of every pattern in w, ordered by start index
// (ties, which only arise for degenerate pattern lists, by pattern id).
inline std::vector<Occurrence> find_occurrences(const Word& w,
                                                std::span<const Word> patterns) {
  std::vector<Occurrence> out;
  auto host = w.letters();
  for (std::size_t start = 0; start < host.size(); ++start) {
    for (std::size_t id = 0; id < patterns.size(); ++id) {
      const Word& p = patterns[id];
      if (!p.empty() && has_factor_at(host, p.letters(), start)) {
        out.push_back({id, start});
      }
    }
  }
  return out;
}

// T = {u, u^-1, v, v^-1} in this order; pattern ids index into it.
inline std::array<Word, 4> pattern_set(const Word& u, const Word& v) {
  return {u, invert(u), v, invert(v)};
}

struct OverlapWitness {
  enum class Kind { kSuffixPrefix, kFactor };

  Kind kind = Kind::kSuffixPrefix;
  // Pattern ids in T. For kSuffixPrefix the shared segment is a proper suffix
  // of T[first] and a proper prefix of T[second]; for kFactor T[first] is a
  // factor of T[second] and the segment is T[first].
  std::size_t first = 0;
  std::size_t second = 0;
  Word segment;
};

struct NonOverlapCertificate {
  bool ok = false;
  std::optional<OverlapWitness> witness;
};

// Sufficient test that copies of distinct elements of T never share a letter:
// no proper suffix/prefix match and no factor containment between distinct
// elements. Pairs accepted here are genuinely non-overlapping.
inline NonOverlapCertificate verify_nonoverlapping(const Word& u,
                                                   const Word& v) {
  require_same_rank(u, v);
  if (u.empty() || v.empty()) {
    throw InvalidArgument("non-overlap test needs nonempty words");
  }
  if (!is_cyclically_reduced(u) || !is_cyclically_reduced(v)) {
    throw InvalidArgument("non-overlap test needs cyclically reduced words");
  }
  if (u == v || u == invert(v)) {
    throw InvalidArgument("degenerate pattern set: u equals v or v^-1");
  }
  const auto t = pattern_set(u, v);
  using Kind = OverlapWitness::Kind;

  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (i != j && is_factor(t[i], t[j])) {
        return {false, OverlapWitness{Kind::kFactor, i, j, t[i]}};
      }
    }
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (i == j) {
        continue;
      }
      const std::size_t max_len = std::min(t[i].size(), t[j].size());
      for (std::size_t k = 1; k < max_len; ++k) {
        auto suffix = t[i].letters().subspan(t[i].size() - k);
        auto prefix = t[j].letters().subspan(0, k);
        if (std::equal(suffix.begin(), suffix.end(), prefix.begin())) {
          std::vector<Letter> seg(suffix.begin(), suffix.end());
          return {false, OverlapWitness{Kind::kSuffixPrefix, i, j,
                                        Word::from_reduced(seg, u.rank())}};
        }
      }
    }
  }
  return {true, std::nullopt};
}

inline std::string describe(const OverlapWitness& w,
                            std::span<const Word, 4> t) {
  if (w.kind == OverlapWitness::Kind::kFactor) {
    return "'" + t[w.first].str() + "' is a factor of '" + t[w.second].str() +
           "'";
  }
  return "suffix '" + w.segment.str() + "' of '" + t[w.first].str() +
         "' is a prefix of '" + t[w.second].str() + "'";
}

}  // namespace qh

#endif  // QH_WORD_HPP_
