// Acceptance run: one PASS/FAIL line per criterion, exact arithmetic
// throughout. Exit status is nonzero when any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qh/qh.hpp"

using namespace qh;

namespace {

const std::string kCli = QH_CLI_PATH;
const std::string kSamples = QH_SAMPLES_DIR;

Group F2() { return free_group(2); }
Word W(const std::string& s) { return Word::parse(s, 2); }
Element E(const std::string& s) { return F2().parse(s); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure, keeps counting.
class Tally {
 public:
  void require(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && pass_) {
      pass_ = false;
      first_ = what;
    }
  }
  Outcome done(const std::string& summary) const {
    return {pass_, pass_ ? summary + " (" + std::to_string(checks_) + " checks)"
                         : "first failure: " + first_};
  }

 private:
  bool pass_ = true;
  std::size_t checks_ = 0;
  std::string first_;
};

//------------------------------------------------------------------------------
// Catalog
//------------------------------------------------------------------------------

QMap fuv() { return make_middle_uv(F2(), W("aabaa"), W("bbabb")); }
QMap brooks_ab() { return make_brooks(F2(), W("ab")); }
QMap point_perturbation() {
  return make_point_perturbation(make_identity(F2()), {{E("ab"), E("aba")}});
}
QMap heis_lift() {
  return make_hom_lift(F2(), heisenberg_group(1), {Element({1, 0}), Element({0, 1})});
}
QMap heis_perturbed() { return make_central_perturbation(heis_lift(), brooks_ab()); }
QMap s3_hom() {
  Group s3 = symmetric_group(3);
  return make_generator_hom(F2(), s3, {s3.parse("[1,0,2]"), s3.parse("[1,2,0]")});
}
QMap z8_to_z4() {
  return make_point_table(cyclic_group(8), cyclic_group(4), [](const Element& x) {
    return Element({x.data()[0] % 2});
  });
}
QMap q8_section() {
  Group v4 = abelian_group({2, 2});
  Group q = quaternion_group();
  auto h = make_generator_hom(F2(), v4, {Element({1, 0}), Element({0, 1})});
  const Element i = q.parse("[1,2,3,0,5,6,7,4]");
  const Element j = q.parse("[4,7,6,5,2,1,0,3]");
  auto sec = make_point_table(v4, q, [q, i, j](const Element& x) {
    return q.multiply(q.power(i, x.data()[0]), q.power(j, x.data()[1]));
  });
  return make_compose(sec, h);
}
QMap carry_section(std::int64_t n) {
  Group e = carry_extension(n, {0});
  return make_section_lift(make_identity(e.as<ExtensionGroup>()->base()), e);
}

struct Named {
  std::string name;
  QMap f;
};

std::vector<Named> catalog() {
  return {{"f_uv", fuv()},
          {"brooks(ab)", brooks_ab()},
          {"point_perturbation", point_perturbation()},
          {"heisenberg_hom_lift", heis_lift()},
          {"heisenberg_perturbed", heis_perturbed()},
          {"hom F2->S3", s3_hom()},
          {"Z8->Z4", z8_to_z4()},
          {"F2->V4->Q8", q8_section()},
          {"carry_section(4)", carry_section(4)},
          {"brooks(ab) o f_uv", make_compose(brooks_ab(), fuv())},
          {"f_uv x brooks(ab)", make_product({fuv(), brooks_ab()})}};
}

// Overlapping occurrences of p in s.
std::int64_t count_sub(const std::string& s, const std::string& p) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i + p.size() <= s.size(); ++i) {
    if (s.compare(i, p.size(), p) == 0) ++n;
  }
  return n;
}

//------------------------------------------------------------------------------
// Criteria
//------------------------------------------------------------------------------

Outcome c1_middle_bound() {
  const auto rep = defect_set(fuv(), PairEnumeration::exhaustive(6), DefectClass::kMiddle);
  Tally t;
  t.require(rep.pairs == 1457u * 1457u, "pair count " + std::to_string(rep.pairs));
  for (auto n : rep.norms) t.require(n <= 75, "middle norm " + std::to_string(n));
  t.require(rep.max_norm <= 75, "max norm");
  return t.done(std::to_string(rep.pairs) + " pairs, max middle norm " +
                std::to_string(rep.max_norm) + " <= 75");
}

Outcome c2_fixed_points() {
  const QMap f = fuv();
  const auto& fg = *F2().as<FreeGroup>();
  Tally t;
  for (int n = 1; n <= 20; ++n) {
    const Element un = fg.from_word(power(W("aabaa"), n));
    const Element vn = fg.from_word(power(W("bbabb"), n));
    t.require(f(un) == un, "u^" + std::to_string(n));
    t.require(f(vn) == vn, "v^" + std::to_string(n));
    t.require(f(fg.from_word(power(W("a"), n))) == F2().identity(), "a^n");
    t.require(f(fg.from_word(power(W("b"), n))) == F2().identity(), "b^n");
  }
  return t.done("f(u^n) = u^n, f(v^n) = v^n, f(a^n) = f(b^n) = 1 for n <= 20");
}

Outcome c3_brooks_identity() {
  const auto& fg = *F2().as<FreeGroup>();
  const Word u = W("aabaa"), v = W("bbabb");
  Tally t;
  std::size_t n = 0;
  for (const auto& x : enumerate_ball(F2(), 8).elements) {
    const Word w = fg.to_word(x);
    const auto mv = middle_uv_value(u, v, w);
    const std::string s = w.str();
    const std::int64_t oracle = count_sub(s, "aabaa") - count_sub(s, "AABAA");
    t.require(fg.from_word(mv.value) == fuv()(x), "value at " + s);
    t.require(alpha_abelianize(mv.pattern_ids) == oracle, "alpha at " + s);
    ++n;
  }
  return t.done(std::to_string(n) + " elements with |x| <= 8");
}

Outcome c4_conjugation() {
  Tally t;
  std::size_t pairs = 0;
  for (const auto& [name, f] : catalog()) {
    const Group& h = f.target();
    pairs += scan_pairs(f, PairEnumeration::exhaustive(4), [&](const PairVisit& v) {
      const Element u = ulam_from_values(h, v.fx, v.fy, v.fxy);
      const Element m = middle_from_values(h, v.fx, v.fy, v.fxy);
      t.require(u == h.multiply(h.multiply(h.invert(v.fy), m), v.fy), name);
    });
  }
  return t.done(std::to_string(catalog().size()) + " maps, " + std::to_string(pairs) +
                " pairs at radius 4");
}

Outcome c5_witness_family() {
  const auto& fg = *F2().as<FreeGroup>();
  const QMap f = fuv();
  Tally t;
  for (int k = 1; k <= 10; ++k) {
    const Element y = fg.from_word(multiply(W("baa"), power(W("bbabb"), k)));
    const Element d = ulam_defect(f, E("aa"), y);
    const Element expect = fg.from_word(
        multiply(multiply(power(W("bbabb"), -k), W("aabaa")), power(W("bbabb"), k)));
    t.require(d == expect, "defect at k = " + std::to_string(k));
    t.require(F2().norm(d) == 5 + 10 * k, "norm at k = " + std::to_string(k));
  }
  return t.done("d(aa, baa v^k) = v^-k u v^k, norm 5 + 10k, k = 1..10");
}

Outcome c6_containments() {
  Tally t;
  std::size_t pairs = 0;
  const std::vector<std::pair<QMap, QMap>> comps{
      {brooks_ab(), fuv()},
      {fuv(), point_perturbation()},
      {point_perturbation(), fuv()},
      {s3_hom(), fuv()}};
  for (const auto& [outer, inner] : comps) {
    const auto c = composition_containment(outer, inner, 4);
    t.require(c.pass, c.detail);
    pairs += c.pairs;
  }
  const std::vector<QMap> prods{make_product({fuv(), brooks_ab()}),
                                make_product({heis_lift(), point_perturbation()}),
                                make_product({s3_hom(), heis_perturbed()})};
  for (const auto& p : prods) {
    const auto c = product_containment(p, 4);
    t.require(c.pass, c.detail);
    pairs += c.pairs;
  }
  return t.done(std::to_string(comps.size()) + " compositions, " +
                std::to_string(prods.size()) + " products, " + std::to_string(pairs) +
                " pairs at radius 4");
}

Outcome c7_identity_audit() {
  Tally t;
  for (const auto& [name, f] : catalog()) {
    const auto a = identity_audit(f, 4);
    for (const auto& c : a.checks) t.require(c.pass, name + ": " + c.name + " " + c.detail);
  }
  return t.done("epsilon, inverse, conjugation, quasi_action on " +
                std::to_string(catalog().size()) + " maps at radius 4");
}

Outcome c8_roundtrip() {
  Tally t;
  std::vector<std::pair<std::string, Group>> groups{
      {"H(1)", heisenberg_group(1)}, {"H(2)", heisenberg_group(2)}};
  for (std::int64_t n : {2, 3, 4}) {
    groups.emplace_back("carry(" + std::to_string(n) + ") fiber Z/" + std::to_string(n),
                        carry_extension(n, {n}));
    groups.emplace_back("carry(" + std::to_string(n) + ") fiber Z", carry_extension(n, {0}));
  }
  for (const auto& [name, e] : groups) {
    const auto a = quasi_split_roundtrip(e, 4);
    t.require(a.q_is_minus_a, name + ": q");
    t.require(a.f_prime_f, name + ": F'F");
    t.require(a.f_f_prime, name + ": FF'");
    t.require(a.pass(), name);
    if (e.is_finite()) {
      t.require(a.elements == enumerate_all(e).size(), name + ": not exhaustive");
    }
  }
  return t.done(std::to_string(groups.size()) + " extensions");
}

Outcome c9_cocycles() {
  Tally t;
  std::string sizes;
  for (std::int64_t n : {2, 3, 4, 5, 8}) {
    const auto rep = defect_set(carry_section(n),
                                PairEnumeration::exhaustive(static_cast<int>(n)),
                                DefectClass::kUlam);
    t.require(rep.pairs == static_cast<std::size_t>(n * n), "carry not exhaustive");
    t.require(rep.defects.size() <= 2, "carry(" + std::to_string(n) + ")");
    sizes += (sizes.empty() ? "" : ",") + std::to_string(rep.defects.size());
  }
  const Group h = heisenberg_group(1);
  const QMap s = make_section_lift(make_identity(free_abelian_group(2)), h);
  std::int64_t prev = -1;
  std::string norms;
  for (int r : {2, 4, 6, 8}) {
    const auto rep = defect_set(s, PairEnumeration::exhaustive(r), DefectClass::kUlam);
    t.require(rep.max_norm > prev, "symplectic radius " + std::to_string(r));
    t.require(!rep.witnesses.empty() &&
                  ulam_defect(s, rep.witnesses.back().x, rep.witnesses.back().y) ==
                      rep.witnesses.back().value,
              "witness at radius " + std::to_string(r));
    prev = rep.max_norm;
    norms += (norms.empty() ? "" : ",") + std::to_string(rep.max_norm);
  }
  return t.done("carry distinct defects {" + sizes + "}; symplectic max norms {" +
                norms + "} at radii 2,4,6,8");
}

Outcome c10_lift_difference() {
  const QMap f1 = heis_lift();
  const QMap psi = brooks_ab();
  const QMap f2 = make_central_perturbation(f1, psi);
  const auto& ext = *f2.target().as<ExtensionGroup>();
  const Group g = F2();
  Tally t;
  const auto pts = enumerate_ball(g, 4).elements;
  const auto diff = lift_difference(f1, f2, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t.require(diff.values[i] == psi(pts[i]), "delta at " + g.format(pts[i]));
  }
  std::set<std::int64_t> fiber, minus_dpsi;
  scan_pairs(f2, PairEnumeration::exhaustive(4), [&](const PairVisit& v) {
    const Element d = ulam_from_values(f2.target(), v.fx, v.fy, v.fxy);
    t.require(ext.project(d) == ext.base().identity(), "defect not in the fiber");
    for (const auto& z : enumerate_ball(f2.target(), 1).elements) {
      t.require(f2.target().commute(d, z), "defect not central");
    }
    // D(psi)(x, y) = psi(x) + psi(y) - psi(xy)
    const std::int64_t dpsi = psi(v.x).data()[0] + psi(v.y).data()[0] -
                              psi(g.multiply(v.x, v.y)).data()[0];
    t.require(ext.fiber_part(d).data()[0] == -dpsi, "fiber coordinate");
    fiber.insert(ext.fiber_part(d).data()[0]);
    minus_dpsi.insert(-dpsi);
  });
  t.require(fiber == minus_dpsi, "defect sets differ");
  return t.done("delta = Brooks(ab) on " + std::to_string(pts.size()) +
                " points; D(f2) fiber set = -D(Brooks(ab)) with " +
                std::to_string(fiber.size()) + " values");
}

Outcome c11_decomposition() {
  const auto start = std::chrono::steady_clock::now();
  Tally t;
  const std::vector<Named> maps{{"hom F2->S3", s3_hom()},
                                {"Z8->Z4", z8_to_z4()},
                                {"F2->V4->Q8", q8_section()}};
  for (const auto& [name, f] : maps) {
    const auto rep = constructibility_decompose(f, 4);
    const Group& h = f.target();
    t.require(rep.pass(), name + ": " + rep.status);
    for (const auto& d : rep.delta_o) {
      for (const auto& x : rep.h_o) t.require(h.commute(d, x), name + ": Delta not central");
    }
    const std::set<Element> delta_o(rep.delta_o.begin(), rep.delta_o.end());
    for (const auto& d : rep.defects_o) t.require(delta_o.contains(d), name + ": D(f_o)");
    const auto* hom = rep.check("quotient_map_homomorphism");
    t.require(hom != nullptr && hom->pass, name + ": quotient map");
    if (name == "hom F2->S3") {
      t.require(rep.delta.size() == 1 && rep.delta[0] == h.identity(), "Delta = {1}");
      for (const auto& [x, y] : rep.projected) t.require(f(x) == y, "f_o = f");
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  t.require(secs < 60.0, "runtime " + std::to_string(secs) + " s");
  std::ostringstream os;
  os.precision(2);
  os << std::fixed << secs;
  return t.done("3 certificates in " + os.str() + " s");
}

Outcome c12_rigidity() {
  const QMap f = point_perturbation();
  const Group g = F2();
  const Element x0 = E("ab");
  const Element a_inv = E("A");  // f(ab)^-1 ab = (aba)^-1 ab
  const Ball ball = enumerate_ball(g, 8);
  std::vector<std::int64_t> max_at(9, 0);
  Tally t;
  for (std::size_t i = 0; i < ball.size(); ++i) {
    const Element& y = ball.elements[i];
    if (y == g.identity() || y == x0) continue;  // overridden points
    const Element d = ulam_defect(f, x0, y);
    t.require(d == g.conjugate(a_inv, y), "y = " + g.format(y));
    auto& m = max_at[static_cast<std::size_t>(ball.depth[i])];
    m = std::max(m, g.norm(d));
  }
  std::string norms;
  std::int64_t cum = 0, prev = -1;
  for (int r = 0; r <= 8; ++r) {
    cum = std::max(cum, max_at[static_cast<std::size_t>(r)]);
    if (r < 2) continue;
    t.require(cum > prev, "growth at radius " + std::to_string(r));
    t.require(cum == 2 * r + 1, "max norm 2r+1 at radius " + std::to_string(r));
    prev = cum;
    norms += (norms.empty() ? "" : ",") + std::to_string(cum);
  }
  return t.done("d(ab, y) = y^-1 A y; max norms {" + norms + "} at radii 2..8");
}

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c13_determinism() {
  Tally t;
  const auto dir = std::filesystem::temp_directory_path() / "qh_acceptance";
  std::filesystem::create_directories(dir);
  std::vector<std::string> specs;
  for (const auto& e : std::filesystem::directory_iterator(kSamples)) {
    if (e.path().extension() == ".json") specs.push_back(e.path().string());
  }
  std::sort(specs.begin(), specs.end());
  for (const auto& s : specs) {
    const std::string a = (dir / "a.json").string();
    const std::string b = (dir / "b.json").string();
    const int ea = run_cli("experiment " + s + " --out " + a);
    const int eb = run_cli("experiment " + s + " --out " + b);
    t.require(ea == 0 && eb == 0, s + ": exit " + std::to_string(ea));
    const std::string ra = slurp(a);
    t.require(!ra.empty() && ra == slurp(b), s + ": reports differ");
  }
  const std::string a = (dir / "a.json").string();
  const std::string b = (dir / "b.json").string();
  const std::string dcmd = "defect --map " + kSamples +
                           "/maps/fuv.json --class middle --count 5000 --radius 9 --seed 11 --out ";
  t.require(run_cli(dcmd + a) == 0 && run_cli(dcmd + b) == 0, "random defect run");
  t.require(slurp(a) == slurp(b), "random defect reports differ");
  return t.done(std::to_string(specs.size()) + " sample specs and a seeded random scan, run twice");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 middle-defect bound", c1_middle_bound},
      {"2 fixed points", c2_fixed_points},
      {"3 Brooks identity", c3_brooks_identity},
      {"4 Ulam/middle conjugation", c4_conjugation},
      {"5 Ulam witness growth", c5_witness_family},
      {"6 composition/product containments", c6_containments},
      {"7 defect-set identities", c7_identity_audit},
      {"8 quasi-split round trip", c8_roundtrip},
      {"9 bounded vs unbounded cocycle", c9_cocycles},
      {"10 lift difference", c10_lift_difference},
      {"11 constructibility pipeline", c11_decomposition},
      {"12 perturbation rigidity", c12_rigidity},
      {"13 determinism", c13_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
