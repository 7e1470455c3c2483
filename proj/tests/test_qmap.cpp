#include <gtest/gtest.h>

#include <array>
#include <string>
#include <vector>

#include "qh/enumerate.hpp"
#include "qh/extension.hpp"
#include "qh/qmap.hpp"

using namespace qh;

namespace {

Word W(const std::string& s) { return Word::parse(s, 2); }

const Group& F2() {
  static const Group g = free_group(2);
  return g;
}

Element E(const std::string& s) { return F2().parse(s); }

// Occurrence count by direct substring search on the text form.
std::int64_t count_text(const std::string& hay, const std::string& needle) {
  std::int64_t n = 0;
  if (hay.size() < needle.size()) return 0;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (hay.compare(i, needle.size(), needle) == 0) ++n;
  }
  return n;
}

std::string inverse_text(const std::string& s) {
  std::string r(s.rbegin(), s.rend());
  for (char& c : r) c = std::islower(c) ? std::toupper(c) : std::tolower(c);
  return r;
}

std::int64_t naive_brooks(const std::string& w, const std::string& x) {
  return count_text(x, w) - count_text(x, inverse_text(w));
}

std::vector<std::string> reduced_texts(int radius) {
  std::vector<std::string> out;
  for (const auto& e : enumerate_ball(F2(), radius).elements) {
    out.push_back(e.data().empty() ? std::string() : F2().format(e));
  }
  return out;
}

// Heisenberg H_2 arithmetic on (a, c1, c2) triples, written from the group law.
struct H3 {
  std::int64_t a, c1, c2;
};
H3 hmul(H3 x, H3 y) {
  return {x.a + y.a + (x.c1 * y.c2 - x.c2 * y.c1), x.c1 + y.c1, x.c2 + y.c2};
}
Element to_element(H3 x) { return Element({x.a}, {Element({x.c1, x.c2})}); }

H3 hom_lift_oracle(const std::string& w) {
  H3 r{0, 0, 0};
  for (char c : w) {
    switch (c) {
      case 'a': r = hmul(r, {0, 1, 0}); break;
      case 'A': r = hmul(r, {0, -1, 0}); break;
      case 'b': r = hmul(r, {0, 0, 1}); break;
      case 'B': r = hmul(r, {0, 0, -1}); break;
    }
  }
  return r;
}

std::vector<Element> z2_images() {
  return {Element({1, 0}), Element({0, 1})};
}

}  // namespace

TEST(Brooks, Examples) {
  EXPECT_EQ(brooks_value(W("ab"), W("ababab")), 3);
  EXPECT_EQ(brooks_value(W("ab"), W("")), 0);
  EXPECT_EQ(brooks_value(W("ab"), W("BA")), -1);
  EXPECT_EQ(brooks_value(W("aa"), W("aaaa")), 3);
}

TEST(Brooks, MatchesSubstringCountAndIsOdd) {
  const std::vector<std::string> ws{"a", "ab", "aab", "abAB", "aabaa"};
  for (const auto& x : reduced_texts(6)) {
    const Word wx = W(x);
    for (const auto& w : ws) {
      const auto v = brooks_value(W(w), wx);
      ASSERT_EQ(v, naive_brooks(w, x)) << w << " " << x;
      ASSERT_EQ(brooks_value(W(w), invert(wx)), -v);
    }
  }
}

TEST(Brooks, RuleValidation) {
  EXPECT_THROW(make_brooks(F2(), W("abA")), InvalidArgument);
  EXPECT_THROW(make_brooks(F2(), W("")), InvalidArgument);
  EXPECT_THROW(make_brooks(cyclic_group(3), W("ab")), InvalidArgument);
  auto f = make_brooks(F2(), W("ab"));
  EXPECT_EQ(f(E("ababab")), Element({3}));
}

TEST(MiddleUV, Examples) {
  const Word u = W("aabaa");
  const Word v = W("bbabb");
  EXPECT_EQ(middle_uv_value(u, v, multiply(u, u)).value, multiply(u, u));
  EXPECT_TRUE(middle_uv_value(u, v, W("aa")).value.empty());
  EXPECT_EQ(middle_uv_value(u, v, W("aabaabbabb")).value, multiply(u, v));
}

TEST(MiddleUV, FixedPoints) {
  const Word u = W("aabaa");
  const Word v = W("bbabb");
  for (int n = 1; n <= 20; ++n) {
    EXPECT_EQ(middle_uv_value(u, v, power(u, n)).value, power(u, n)) << n;
    EXPECT_EQ(middle_uv_value(u, v, power(v, n)).value, power(v, n)) << n;
    EXPECT_EQ(middle_uv_value(u, v, power(u, -n)).value, power(u, -n)) << n;
    EXPECT_TRUE(middle_uv_value(u, v, power(W("a"), n)).value.empty());
    EXPECT_TRUE(middle_uv_value(u, v, power(W("b"), n)).value.empty());
  }
}

TEST(MiddleUV, Abelianization) {
  const Word u = W("aabaa");
  const Word v = W("bbabb");
  EXPECT_EQ(alpha_abelianize(middle_uv_value(u, v, power(u, 3)).pattern_ids),
            3);
  EXPECT_EQ(alpha_abelianize(middle_uv_value(u, v, power(v, 2)).pattern_ids),
            0);
  EXPECT_EQ(alpha_abelianize(middle_uv_value(u, v, multiply(u, v)).pattern_ids),
            1);
}

TEST(MiddleUV, AbelianizationIsBrooks) {
  const Word u = W("aabaa");
  const Word v = W("bbabb");
  for (const auto& x : enumerate_ball(F2(), 8).elements) {
    const Word w = F2().as<FreeGroup>()->to_word(x);
    ASSERT_EQ(alpha_abelianize(middle_uv_value(u, v, w).pattern_ids),
              brooks_value(u, w))
        << w.str();
  }
}

TEST(MiddleUV, InverseIdentity) {
  const Word u = W("aabaa");
  const Word v = W("bbabb");
  for (const auto& x : enumerate_ball(F2(), 7).elements) {
    const Word w = F2().as<FreeGroup>()->to_word(x);
    ASSERT_EQ(middle_uv_value(u, v, invert(w)).value,
              invert(middle_uv_value(u, v, w).value))
        << w.str();
  }
  // The uncorrected form f(w) = f(w)^-1 fails already at w = u.
  EXPECT_NE(middle_uv_value(u, v, u).value,
            invert(middle_uv_value(u, v, u).value));
}

TEST(MiddleUV, Construction) {
  auto f = make_middle_uv(F2(), W("aabaa"), W("bbabb"));
  EXPECT_TRUE(f.rule_as<MiddleUVRule>()->certificate().ok);
  try {
    make_middle_uv(F2(), W("ab"), W("ba"));
    FAIL() << "expected overlap rejection";
  } catch (const NonOverlapError& e) {
    EXPECT_EQ(e.witness().kind, OverlapWitness::Kind::kSuffixPrefix);
  }
  EXPECT_THROW(make_middle_uv(F2(), W("aabaa"), W("aba")), NonOverlapError);
}

TEST(Evaluate, Product) {
  auto f = make_product({make_brooks(F2(), W("ab")), make_brooks(F2(), W("ba"))});
  for (const auto& x : reduced_texts(5)) {
    const Element val = f(F2().parse(x.empty() ? "1" : x));
    ASSERT_EQ(val.parts().size(), 2u);
    EXPECT_EQ(val.parts()[0], Element({naive_brooks("ab", x)}));
    EXPECT_EQ(val.parts()[1], Element({naive_brooks("ba", x)}));
  }
  EXPECT_EQ(f(E("abba")), Element({}, {Element({1}), Element({1})}));
}

TEST(Evaluate, PointPerturbation) {
  auto f = make_point_perturbation(make_identity(F2()), {{E("ab"), E("aba")}});
  EXPECT_EQ(f(E("ab")), E("aba"));
  EXPECT_EQ(f(E("ba")), E("ba"));
  EXPECT_EQ(f(F2().identity()), F2().identity());
  EXPECT_THROW(make_point_perturbation(make_identity(F2()),
                                       {{E("a"), E("b")}, {E("a"), E("a")}}),
               InvalidArgument);
}

TEST(Evaluate, Compose) {
  Group s3 = symmetric_group(3);
  auto h = make_generator_hom(F2(), s3, {s3.parse("[1,0,2]"), s3.parse("[1,2,0]")});
  auto back = make_point_table(s3, free_abelian_group(1), [](const Element& x) {
    return Element({x.data()[0]});
  });
  auto c = make_compose(back, h);
  for (const auto& x : enumerate_ball(F2(), 3).elements) {
    EXPECT_EQ(c(x), back(h(x)));
  }
  EXPECT_THROW(make_compose(h, back), GroupMismatch);
  EXPECT_THROW(make_generator_hom(s3, s3, {s3.identity(), s3.identity()}),
               InvalidArgument);
}

TEST(Evaluate, CheckedDomain) {
  auto f = make_brooks(F2(), W("ab"));
  EXPECT_THROW(f(Element({1, 3})), GroupMismatch);
}

TEST(HeisenbergLift, SectionAndHomLift) {
  Group h = heisenberg_group(1);
  Group z2 = free_abelian_group(2);
  auto base = make_generator_hom(F2(), z2, z2_images());
  auto s = make_section_lift(base, h);
  EXPECT_EQ(s(E("ab")), to_element({0, 1, 1}));

  auto lift = make_hom_lift(F2(), h, z2_images());
  EXPECT_EQ(lift(E("ab")), to_element({1, 1, 1}));
  EXPECT_EQ(lift(F2().identity()), to_element({0, 0, 0}));
  for (const auto& x : reduced_texts(6)) {
    const Element e = F2().parse(x.empty() ? "1" : x);
    ASSERT_EQ(lift(e), to_element(hom_lift_oracle(x))) << x;
  }
  EXPECT_THROW(make_hom_lift(cyclic_group(2), h, {Element({1, 0})}),
               InvalidArgument);
}

TEST(HeisenbergLift, CentralPerturbation) {
  Group h = heisenberg_group(1);
  auto lift = make_hom_lift(F2(), h, z2_images());
  auto psi = make_brooks(F2(), W("ab"));
  auto pert = make_central_perturbation(lift, psi);
  const H3 base = hom_lift_oracle("abab");
  EXPECT_EQ(pert(E("abab")), to_element({base.a + 2, base.c1, base.c2}));
  EXPECT_THROW(make_central_perturbation(lift, make_brooks(free_group(3),
                                                           Word::parse("ab", 3))),
               GroupMismatch);
}

TEST(HeisenbergLift, LiftDifference) {
  Group h = heisenberg_group(1);
  auto f1 = make_hom_lift(F2(), h, z2_images());
  auto psi = make_brooks(F2(), W("ab"));
  auto f2 = make_central_perturbation(f1, psi);
  const auto pts = enumerate_ball(F2(), 5).elements;

  auto diff = lift_difference(f1, f2, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ASSERT_EQ(diff.values[i], psi(pts[i]));
  }
  auto same = lift_difference(f1, f1, pts);
  for (const auto& v : same.values) ASSERT_EQ(v, Element({0}));

  Group z2 = free_abelian_group(2);
  auto other = make_hom_lift(F2(), h, {Element({0, 1}), Element({1, 0})});
  try {
    lift_difference(f1, other, pts);
    FAIL() << "expected a projection mismatch";
  } catch (const ProjectionMismatch& e) {
    EXPECT_NE(e.witness(), F2().identity());
  }
}
