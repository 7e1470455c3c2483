#include <gtest/gtest.h>

#include <set>
#include <string>
#include <vector>

#include "qh/enumerate.hpp"
#include "qh/word.hpp"

using namespace qh;

namespace {

Word W(const std::string& s, int rank = 2) { return Word::parse(s, rank); }

// All (not necessarily reduced) letter strings of length <= n over rank 2.
std::vector<std::string> raw_strings(int n) {
  std::vector<std::string> out{""};
  std::vector<std::string> layer{""};
  for (int len = 1; len <= n; ++len) {
    std::vector<std::string> next;
    for (const auto& s : layer) {
      for (char c : std::string("aAbB")) next.push_back(s + c);
    }
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

// Independent reduction oracle: repeatedly delete the leftmost cancelling pair.
std::string naive_reduce(std::string s) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      if (s[i] != s[i + 1] && std::tolower(s[i]) == std::tolower(s[i + 1])) {
        s.erase(i, 2);
        changed = true;
        break;
      }
    }
  }
  return s;
}

std::vector<Word> reduced_words(int max_len) {
  Group f2 = free_group(2);
  const auto& fg = f2.expect<FreeGroup>("free");
  std::vector<Word> out;
  for (const auto& e : enumerate_ball(f2, max_len).elements) {
    out.push_back(fg.to_word(e));
  }
  return out;
}

}  // namespace

TEST(Reduce, Examples) {
  EXPECT_EQ(W("aA").str(), "");
  EXPECT_EQ(W("abBA").str(), "");
  EXPECT_EQ(W("aabB").str(), "aa");
  EXPECT_TRUE(W("").empty());
}

TEST(Reduce, RejectsInvalidLetters) {
  EXPECT_THROW(W("a1"), InvalidArgument);
  EXPECT_THROW(W("a b"), InvalidArgument);
  EXPECT_THROW(W("c", 2), InvalidArgument);
  EXPECT_THROW(Word(0), InvalidArgument);
  EXPECT_THROW(Letter(0, 1), InvalidArgument);
}

TEST(Reduce, MatchesNaiveOracleAndIsIdempotent) {
  for (const auto& s : raw_strings(7)) {
    Word w = W(s);
    ASSERT_EQ(w.str(), naive_reduce(s)) << s;
    ASSERT_EQ(Word::parse(w.str(), 2), w);
    ASSERT_LE(w.size(), s.size());
  }
}

TEST(WordArithmetic, Examples) {
  EXPECT_TRUE(multiply(W("ab"), W("BA")).empty());
  EXPECT_EQ(invert(W("aab")).str(), "BAA");
  EXPECT_EQ(cyclic_reduce(W("Aba")).str(), "b");
  EXPECT_EQ(cyclic_reduce(W("abAB")).str(), "abAB");
  EXPECT_EQ(cyclic_reduce(W("abaBA")).str(), "a");
  EXPECT_EQ(power(W("ab"), 3).str(), "ababab");
  EXPECT_EQ(power(W("ab"), -2).str(), "BABA");
}

TEST(WordArithmetic, RankMismatch) {
  EXPECT_THROW(multiply(W("a", 2), W("a", 3)), InvalidArgument);
}

TEST(WordArithmetic, GroupAxiomsExhaustive) {
  const auto words5 = reduced_words(5);
  for (const auto& x : words5) {
    ASSERT_EQ(invert(invert(x)), x);
    ASSERT_TRUE(multiply(x, invert(x)).empty());
    for (const auto& y : words5) {
      Word xy = multiply(x, y);
      ASSERT_EQ(xy.str(), naive_reduce(x.str() + y.str()));
      ASSERT_LE(xy.size(), x.size() + y.size());
    }
  }
  const auto words4 = reduced_words(4);
  for (const auto& x : words4) {
    for (const auto& y : words4) {
      Word xy = multiply(x, y);
      for (const auto& z : words4) {
        ASSERT_EQ(multiply(xy, z), multiply(x, multiply(y, z)));
      }
    }
  }
}

TEST(Occurrences, Examples) {
  const Word u = W("aabaa");
  const Word v = W("bbabb");
  const auto t = pattern_set(u, v);

  auto occ = find_occurrences(power(u, 2), t);
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_EQ(occ[0], (Occurrence{0, 0}));
  EXPECT_EQ(occ[1], (Occurrence{0, 5}));

  EXPECT_TRUE(find_occurrences(W("ab"), t).empty());

  occ = find_occurrences(W("aabaabbabb"), t);
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_EQ(occ[0], (Occurrence{0, 0}));
  EXPECT_EQ(occ[1], (Occurrence{2, 5}));
}

TEST(Occurrences, SelfOverlapsAreCounted) {
  std::vector<Word> t{W("aa")};
  EXPECT_EQ(find_occurrences(W("aaaa"), t).size(), 3u);
}

TEST(NonOverlap, Examples) {
  auto ok = verify_nonoverlapping(W("aabaa"), W("bbabb"));
  EXPECT_TRUE(ok.ok);
  EXPECT_FALSE(ok.witness.has_value());

  auto bad = verify_nonoverlapping(W("ab"), W("ba"));
  ASSERT_FALSE(bad.ok);
  ASSERT_TRUE(bad.witness.has_value());
  EXPECT_EQ(bad.witness->kind, OverlapWitness::Kind::kSuffixPrefix);
  EXPECT_EQ(bad.witness->first, 0u);   // u
  EXPECT_EQ(bad.witness->second, 2u);  // v
  EXPECT_EQ(bad.witness->segment.str(), "b");

  auto factor = verify_nonoverlapping(W("aabaa"), W("aba"));
  ASSERT_FALSE(factor.ok);
  EXPECT_EQ(factor.witness->kind, OverlapWitness::Kind::kFactor);
  EXPECT_EQ(factor.witness->first, 2u);   // v ...
  EXPECT_EQ(factor.witness->second, 0u);  // ... inside u
}

TEST(NonOverlap, Preconditions) {
  EXPECT_THROW(verify_nonoverlapping(W(""), W("b")), InvalidArgument);
  EXPECT_THROW(verify_nonoverlapping(W("abA"), W("b")), InvalidArgument);
  EXPECT_THROW(verify_nonoverlapping(W("ab"), W("ab")), InvalidArgument);
  EXPECT_THROW(verify_nonoverlapping(W("ab"), W("BA")), InvalidArgument);
}

TEST(NonOverlap, FamilyMembersAreCertified) {
  for (int m = 2; m <= 5; ++m) {
    std::string am(m, 'a');
    std::string bm(m, 'b');
    EXPECT_TRUE(verify_nonoverlapping(W(am + "b" + am), W(bm + "a" + bm)).ok)
        << m;
  }
}

// Certified pattern sets: occurrences of distinct patterns share no letter.
TEST(NonOverlap, CertifiedOccurrencesAreDisjoint) {
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"aabaa", "bbabb"}, {"aaabaaa", "bbbabbb"}, {"aab", "bba"}};
  for (const auto& [us, vs] : pairs) {
    const Word u = W(us);
    const Word v = W(vs);
    const auto cert = verify_nonoverlapping(u, v);
    if (!cert.ok) continue;
    const auto t = pattern_set(u, v);
    for (const auto& w : reduced_words(9)) {
      auto occ = find_occurrences(w, t);
      for (std::size_t i = 0; i < occ.size(); ++i) {
        for (std::size_t j = i + 1; j < occ.size(); ++j) {
          if (occ[i].pattern_id == occ[j].pattern_id) continue;
          const auto end_i = occ[i].start + t[occ[i].pattern_id].size();
          ASSERT_LE(end_i, occ[j].start) << us << "," << vs << " in " << w.str();
        }
      }
    }
  }
}
