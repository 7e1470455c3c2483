#ifndef QH_EXPERIMENT_HPP_
#define QH_EXPERIMENT_HPP_

// Experiment documents and their runner.
//
//   {"experiment": NAME, "seed": N (random scans only), "params": {...}}
//
// Parameters per experiment (defaults in parentheses):
//   middle_vs_ulam        u ("aabaa"), v ("bbabb"), rank (2), radius (6),
//                         ulam_radius (4), k_max (10), fixed_max (20),
//                         brooks_radius (8), x ("aa"), y_prefix ("baa")
//   perturbation_rigidity rank (2), overrides ([["ab","aba"]]), x0 ("ab"),
//                         min_radius (2), max_radius (8)
//   heisenberg_lift       n (1), word ("ab"), radius (4)
//   quasisplit_audit      group (required, an extension), radius (4),
//                         section_radii ([2,4,6,8]),
//                         section_growth ("bounded" on finite bases,
//                         "unbounded" otherwise, or "none"),
//                         max_distinct (2)
//   decompose             map, radius (4), max_radius (radius),
//                         aut_cap (64), expect ({})
//   defect_scan           map, class ("ulam"), radius (4), random
//                         ({count, max_length}), search_radius (8),
//                         identity_audit (false), conjugation (false),
//                         containment (false), expect ({})
//   hs_probe              map, k (2), radius (3), random
//
// A "map" parameter is an inline map document or a path to one, relative to
// the experiment file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qh/defect.hpp"
#include "qh/enumerate.hpp"
#include "qh/extension.hpp"
#include "qh/qmap.hpp"
#include "qh/report.hpp"
#include "qh/spec.hpp"
#include "qh/structure.hpp"

namespace qh::experiment {

using nlohmann::json;
using spec::child;

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n{
      "middle_vs_ulam", "perturbation_rigidity", "heisenberg_lift",
      "quasisplit_audit", "decompose", "defect_scan", "hs_probe"};
  return n;
}

struct Diagnostic {
  std::string pointer;
  std::string message;
  json witness;  // null when there is none
};

inline json to_json(const std::vector<Diagnostic>& ds) {
  json a = json::array();
  for (const auto& d : ds) {
    json j{{"pointer", d.pointer}, {"message", d.message}};
    if (!d.witness.is_null()) j["witness"] = d.witness;
    a.push_back(std::move(j));
  }
  return a;
}

// Collects spec errors instead of stopping at the first one.
class Collector {
 public:
  template <class Fn>
  bool attempt(Fn&& fn) {
    try {
      fn();
      return true;
    } catch (const spec::WitnessError& e) {
      out_.push_back({e.pointer(), e.message(), e.witness()});
    } catch (const SpecError& e) {
      out_.push_back({e.pointer(), e.message(), nullptr});
    }
    return false;
  }
  void add(std::string pointer, std::string message) {
    out_.push_back({std::move(pointer), std::move(message), nullptr});
  }
  const std::vector<Diagnostic>& diagnostics() const { return out_; }
  bool ok() const { return out_.empty(); }

 private:
  std::vector<Diagnostic> out_;
};

//------------------------------------------------------------------------------
// Typed parameters
//------------------------------------------------------------------------------

struct MiddleVsUlam {
  int rank = 2;
  Word u, v, x, y_prefix;
  int radius = 6, ulam_radius = 4, k_max = 10, fixed_max = 20,
      brooks_radius = 8;
};

struct Rigidity {
  int rank = 2;
  std::vector<std::pair<Element, Element>> overrides;
  Element x0;
  int min_radius = 2, max_radius = 8;
};

struct HeisenbergLift {
  int n = 1;
  Word word;
  int radius = 4;
};

struct QuasiSplit {
  Group group;
  int radius = 4;
  std::vector<int> section_radii{2, 4, 6, 8};
  std::string section_growth;
  std::size_t max_distinct = 2;
};

struct Expectations {
  std::optional<std::int64_t> max_norm_at_most;
  std::optional<std::int64_t> distinct_at_most;
  std::optional<std::int64_t> delta_size;
  std::optional<std::int64_t> kernel_index;
  std::optional<std::int64_t> quotient_order;
  std::optional<bool> fixed;  // f_o = f on the scan
};

struct Decompose {
  QMap map;
  int radius = 4, max_radius = -1;
  std::size_t aut_cap = kDefaultAutCap;
  Expectations expect;
};

struct DefectScan {
  QMap map;
  DefectClass cls = DefectClass::kUlam;
  PairEnumeration en = PairEnumeration::exhaustive(4);
  int search_radius = kDefaultSearchRadius;
  bool identity_audit = false, conjugation = false, containment = false;
  Expectations expect;
};

struct HsProbeParams {
  QMap map;
  int k = 2;
  PairEnumeration en = PairEnumeration::exhaustive(3);
};

struct Spec {
  std::string name;
  json doc;  // echoed into the report
  MiddleVsUlam middle_vs_ulam;
  Rigidity rigidity;
  HeisenbergLift heisenberg;
  QuasiSplit quasisplit;
  Decompose decompose;
  DefectScan defect_scan;
  HsProbeParams hs;
};

namespace detail {

inline void check_keys(const json& p, const std::string& ptr,
                       const std::set<std::string>& allowed, Collector& c) {
  for (auto it = p.begin(); it != p.end(); ++it) {
    if (!allowed.contains(it.key())) {
      c.add(child(ptr, it.key()), "unknown parameter");
    }
  }
}

inline int int_param(const json& p, const std::string& ptr,
                     const std::string& key, int dflt, int lo, int hi) {
  return static_cast<int>(spec::get_int_or(p, ptr, key, dflt, lo, hi));
}

inline bool bool_param(const json& p, const std::string& ptr,
                       const std::string& key, bool dflt) {
  if (!p.contains(key)) return dflt;
  if (!p.at(key).is_boolean()) throw SpecError(child(ptr, key), "expected a boolean");
  return p.at(key).get<bool>();
}

inline Word word_param(const Group& g, const json& p, const std::string& ptr,
                       const std::string& key, const std::string& dflt) {
  if (!p.contains(key)) return spec::parse_word(g, json(dflt), child(ptr, key));
  return spec::parse_word(g, p.at(key), child(ptr, key));
}

inline QMap map_param(const json& p, const std::string& ptr,
                      const std::filesystem::path& base_dir) {
  const std::string mp = child(ptr, "map");
  const json& m = spec::field(p, ptr, "map");
  if (m.is_string()) {
    const auto path = base_dir / m.get<std::string>();
    json doc;
    try {
      doc = spec::load_file(path.string());
    } catch (const SpecError& e) {
      throw SpecError(mp, e.message());
    }
    return spec::parse_map(doc, mp);
  }
  return spec::parse_map(m, mp);
}

inline PairEnumeration enumeration_param(const json& doc, const json& p,
                                         const std::string& ptr, int dflt_radius,
                                         Collector& c) {
  PairEnumeration en =
      PairEnumeration::exhaustive(int_param(p, ptr, "radius", dflt_radius, 0, 64));
  if (!p.contains("random")) return en;
  const std::string rp = child(ptr, "random");
  const json& r = p.at("random");
  spec::require_object(r, rp);
  const auto count = spec::get_int(r, rp, "count", 1, 1'000'000'000);
  const int len = static_cast<int>(spec::get_int(r, rp, "max_length", 0, 64));
  std::uint64_t seed = 0;
  if (!doc.contains("seed")) {
    c.add("/seed", "seed is mandatory for random scans");
  } else {
    seed = static_cast<std::uint64_t>(
        spec::as_int(doc.at("seed"), "/seed", 0, INT64_MAX));
  }
  return PairEnumeration::random(static_cast<std::size_t>(count), len, seed);
}

inline Expectations expect_param(const json& p, const std::string& ptr,
                                 Collector& c) {
  Expectations e;
  if (!p.contains("expect")) return e;
  const std::string ep = child(ptr, "expect");
  const json& j = p.at("expect");
  spec::require_object(j, ep);
  check_keys(j, ep,
             {"max_norm_at_most", "distinct_at_most", "delta_size",
              "kernel_index", "quotient_order", "fixed"},
             c);
  auto opt = [&](const char* key, std::optional<std::int64_t>& slot) {
    c.attempt([&] {
      if (j.contains(key)) slot = spec::as_int(j.at(key), child(ep, key), 0, INT64_MAX);
    });
  };
  opt("max_norm_at_most", e.max_norm_at_most);
  opt("distinct_at_most", e.distinct_at_most);
  opt("delta_size", e.delta_size);
  opt("kernel_index", e.kernel_index);
  opt("quotient_order", e.quotient_order);
  c.attempt([&] {
    if (j.contains("fixed")) e.fixed = bool_param(j, ep, "fixed", false);
  });
  return e;
}

}  // namespace detail

//------------------------------------------------------------------------------
// Parsing and validation
//------------------------------------------------------------------------------

// Parses and validates every parameter, collecting all diagnostics.
inline std::optional<Spec> parse(const json& doc, Collector& c,
                                 const std::filesystem::path& base_dir = ".") {
  Spec s;
  s.doc = doc;
  if (!doc.is_object()) {
    c.add("", "expected an object");
    return std::nullopt;
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() != "experiment" && it.key() != "seed" && it.key() != "params") {
      c.add(child("", it.key()), "unknown field");
    }
  }
  if (!c.attempt([&] { s.name = spec::get_string(doc, "", "experiment"); })) {
    return std::nullopt;
  }
  bool known = false;
  for (const auto& n : names()) known = known || n == s.name;
  if (!known) {
    c.add("/experiment", "unknown experiment '" + s.name + "'");
    return std::nullopt;
  }
  if (doc.contains("seed")) {
    c.attempt([&] { spec::as_int(doc.at("seed"), "/seed", 0, INT64_MAX); });
  }
  static const json kEmpty = json::object();
  const json& p = doc.contains("params") ? doc.at("params") : kEmpty;
  const std::string pp = "/params";
  if (!p.is_object()) {
    c.add(pp, "expected an object");
    return std::nullopt;
  }
  using detail::int_param;

  if (s.name == "middle_vs_ulam") {
    detail::check_keys(p, pp,
                       {"u", "v", "rank", "radius", "ulam_radius", "k_max",
                        "fixed_max", "brooks_radius", "x", "y_prefix"},
                       c);
    auto& m = s.middle_vs_ulam;
    c.attempt([&] { m.rank = int_param(p, pp, "rank", 2, 1, kMaxRank); });
    const Group g = free_group(m.rank);
    c.attempt([&] { m.u = detail::word_param(g, p, pp, "u", "aabaa"); });
    c.attempt([&] { m.v = detail::word_param(g, p, pp, "v", "bbabb"); });
    c.attempt([&] { m.x = detail::word_param(g, p, pp, "x", "aa"); });
    c.attempt([&] { m.y_prefix = detail::word_param(g, p, pp, "y_prefix", "baa"); });
    c.attempt([&] { m.radius = int_param(p, pp, "radius", 6, 0, 12); });
    c.attempt([&] { m.ulam_radius = int_param(p, pp, "ulam_radius", 4, 0, 12); });
    c.attempt([&] { m.k_max = int_param(p, pp, "k_max", 10, 0, 1000); });
    c.attempt([&] { m.fixed_max = int_param(p, pp, "fixed_max", 20, 0, 10000); });
    c.attempt([&] { m.brooks_radius = int_param(p, pp, "brooks_radius", 8, 0, 14); });
    if (c.ok()) {
      c.attempt([&] {
        spec::at_pointer(pp, [&] { return make_middle_uv(g, m.u, m.v); });
      });
    }
  } else if (s.name == "perturbation_rigidity") {
    detail::check_keys(p, pp,
                       {"rank", "overrides", "x0", "min_radius", "max_radius"}, c);
    auto& r = s.rigidity;
    c.attempt([&] { r.rank = int_param(p, pp, "rank", 2, 1, kMaxRank); });
    const Group g = free_group(r.rank);
    c.attempt([&] {
      const json ov = p.contains("overrides") ? p.at("overrides")
                                              : json::parse(R"([["ab","aba"]])");
      const std::string op = child(pp, "overrides");
      const auto& a = spec::as_array(ov, op);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& pair = spec::as_array(a[i], child(op, i));
        if (pair.size() != 2) throw SpecError(child(op, i), "expected a [point, value] pair");
        r.overrides.emplace_back(spec::parse_element(g, pair[0], child(child(op, i), 0)),
                                 spec::parse_element(g, pair[1], child(child(op, i), 1)));
      }
    });
    c.attempt([&] {
      r.x0 = spec::parse_element(g, p.contains("x0") ? p.at("x0") : json("ab"),
                                 child(pp, "x0"));
    });
    c.attempt([&] { r.min_radius = int_param(p, pp, "min_radius", 2, 0, 12); });
    c.attempt([&] { r.max_radius = int_param(p, pp, "max_radius", 8, 0, 12); });
    if (r.max_radius < r.min_radius) {
      c.add(child(pp, "max_radius"), "max_radius is below min_radius");
    }
  } else if (s.name == "heisenberg_lift") {
    detail::check_keys(p, pp, {"n", "word", "radius"}, c);
    auto& h = s.heisenberg;
    c.attempt([&] { h.n = int_param(p, pp, "n", 1, 1, 4); });
    c.attempt([&] {
      h.word = detail::word_param(free_group(2 * h.n), p, pp, "word", "ab");
      spec::at_pointer(child(pp, "word"),
                       [&] { return make_brooks(free_group(2 * h.n), h.word); });
    });
    c.attempt([&] { h.radius = int_param(p, pp, "radius", 4, 0, 8); });
  } else if (s.name == "quasisplit_audit") {
    detail::check_keys(p, pp,
                       {"group", "radius", "section_radii", "section_growth",
                        "max_distinct"},
                       c);
    auto& q = s.quasisplit;
    c.attempt([&] {
      q.group = spec::parse_group(spec::field(p, pp, "group"), child(pp, "group"));
      if (q.group.as<ExtensionGroup>() == nullptr) {
        throw SpecError(child(pp, "group"), "expected an extension group");
      }
    });
    c.attempt([&] { q.radius = int_param(p, pp, "radius", 4, 0, 12); });
    c.attempt([&] {
      if (!p.contains("section_radii")) return;
      const std::string rp = child(pp, "section_radii");
      q.section_radii.clear();
      const auto& a = spec::as_array(p.at("section_radii"), rp);
      if (a.empty()) throw SpecError(rp, "expected at least one radius");
      for (std::size_t i = 0; i < a.size(); ++i) {
        q.section_radii.push_back(
            static_cast<int>(spec::as_int(a[i], child(rp, i), 0, 16)));
      }
    });
    c.attempt([&] {
      if (!p.contains("section_growth")) return;
      q.section_growth = spec::get_string(p, pp, "section_growth");
      if (q.section_growth != "bounded" && q.section_growth != "unbounded" &&
          q.section_growth != "none") {
        throw SpecError(child(pp, "section_growth"),
                        "expected bounded, unbounded or none");
      }
    });
    c.attempt([&] {
      q.max_distinct = static_cast<std::size_t>(
          spec::get_int_or(p, pp, "max_distinct", 2, 1, INT64_MAX));
    });
    if (q.group.valid() && q.section_growth.empty()) {
      q.section_growth =
          q.group.as<ExtensionGroup>()->base().is_finite() ? "bounded" : "unbounded";
    }
  } else if (s.name == "decompose") {
    detail::check_keys(p, pp, {"map", "radius", "max_radius", "aut_cap", "expect"}, c);
    auto& d = s.decompose;
    c.attempt([&] {
      d.map = detail::map_param(p, pp, base_dir);
      if (!d.map.target().is_finite()) {
        throw SpecError(child(pp, "map"), "decomposition needs a finite target");
      }
    });
    c.attempt([&] { d.radius = int_param(p, pp, "radius", 4, 0, 12); });
    c.attempt([&] { d.max_radius = int_param(p, pp, "max_radius", d.radius, 0, 12); });
    c.attempt([&] {
      d.aut_cap = static_cast<std::size_t>(
          spec::get_int_or(p, pp, "aut_cap", kDefaultAutCap, 1, 1 << 20));
    });
    c.attempt([&] { d.expect = detail::expect_param(p, pp, c); });
  } else if (s.name == "defect_scan") {
    detail::check_keys(p, pp,
                       {"map", "class", "radius", "random", "search_radius",
                        "identity_audit", "conjugation", "containment", "expect"},
                       c);
    auto& d = s.defect_scan;
    c.attempt([&] { d.map = detail::map_param(p, pp, base_dir); });
    c.attempt([&] {
      if (!p.contains("class")) return;
      const std::string cls = spec::get_string(p, pp, "class");
      spec::at_pointer(child(pp, "class"), [&] {
        d.cls = parse_defect_class(cls);
        return 0;
      });
    });
    c.attempt([&] { d.en = detail::enumeration_param(doc, p, pp, 4, c); });
    c.attempt([&] {
      d.search_radius = int_param(p, pp, "search_radius", kDefaultSearchRadius, 0, 16);
    });
    c.attempt([&] { d.identity_audit = detail::bool_param(p, pp, "identity_audit", false); });
    c.attempt([&] { d.conjugation = detail::bool_param(p, pp, "conjugation", false); });
    c.attempt([&] { d.containment = detail::bool_param(p, pp, "containment", false); });
    c.attempt([&] { d.expect = detail::expect_param(p, pp, c); });
    const bool exhaustive = d.en.mode == PairEnumeration::Mode::kExhaustive;
    if ((d.identity_audit || d.containment) && !exhaustive) {
      c.add(child(pp, "random"), "identity_audit and containment need exhaustive scans");
    }
    if (d.containment && d.map.rule_as<ComposeRule>() == nullptr &&
        d.map.rule_as<ProductRule>() == nullptr) {
      c.add(child(pp, "containment"), "containment needs a compose or product map");
    }
  } else if (s.name == "hs_probe") {
    detail::check_keys(p, pp, {"map", "k", "radius", "random"}, c);
    auto& h = s.hs;
    c.attempt([&] {
      h.map = detail::map_param(p, pp, base_dir);
      if (h.map.target().as<FreeGroup>() == nullptr) {
        throw SpecError(child(pp, "map"), "HS probes need a free target");
      }
    });
    c.attempt([&] { h.k = int_param(p, pp, "k", 2, 1, 8); });
    c.attempt([&] { h.en = detail::enumeration_param(doc, p, pp, 3, c); });
  }
  if (!c.ok()) return std::nullopt;
  return s;
}

inline std::vector<Diagnostic> validate(const json& doc,
                                        const std::filesystem::path& base_dir = ".") {
  Collector c;
  parse(doc, c, base_dir);
  return c.diagnostics();
}

// Validates any document: an experiment, a map or a group.
inline std::vector<Diagnostic> validate_document(
    const json& doc, const std::filesystem::path& base_dir = ".") {
  if (doc.is_object() && doc.contains("experiment")) return validate(doc, base_dir);
  Collector c;
  if (doc.is_object() && doc.contains("rule")) {
    c.attempt([&] { spec::parse_map(doc); });
  } else if (doc.is_object() && doc.contains("kind")) {
    c.attempt([&] { spec::parse_group(doc); });
  } else {
    c.add("", "not an experiment, map or group document");
  }
  return c.diagnostics();
}

//------------------------------------------------------------------------------
// Runners
//------------------------------------------------------------------------------

namespace detail {

inline std::string fmt_count(const char* what, std::size_t n) {
  return std::string(what) + " " + std::to_string(n);
}

// ulam(x, y) = f(y)^-1 middle(x, y) f(y) on every scanned pair.
inline std::pair<bool, std::size_t> conjugation_relation(
    const QMap& f, const PairEnumeration& en, std::string& detail) {
  const Group& h = f.target();
  const Group& g = f.domain();
  bool ok = true;
  const std::size_t n = scan_pairs(f, en, [&](const PairVisit& v) {
    const Element u = ulam_from_values(h, v.fx, v.fy, v.fxy);
    const Element m = middle_from_values(h, v.fx, v.fy, v.fxy);
    if (u != h.conjugate(m, v.fy) && ok) {
      ok = false;
      detail = "fails at (" + g.format(v.x) + ", " + g.format(v.y) + ")";
    }
  });
  return {ok, n};
}

inline void run_middle_vs_ulam(const MiddleVsUlam& m, report::Builder& b) {
  const Group g = free_group(m.rank);
  const auto& fg = *g.as<FreeGroup>();
  const QMap f = make_middle_uv(g, m.u, m.v);
  const std::int64_t len =
      static_cast<std::int64_t>(std::max(m.u.size(), m.v.size()));
  const std::int64_t bound = 3 * len * len;
  auto& res = b.results();

  const DefectReport mid =
      defect_set(f, PairEnumeration::exhaustive(m.radius), DefectClass::kMiddle);
  res["middle"] = report::defect_report(f, mid);
  res["middle_bound"] = bound;
  b.check("middle_bound", mid.max_norm <= bound,
          "max middle norm " + std::to_string(mid.max_norm) + " vs 3L^2 = " +
              std::to_string(bound) + " over " + std::to_string(mid.pairs) +
              " pairs");

  const DefectReport ulam = defect_set(f, PairEnumeration::exhaustive(m.ulam_radius),
                                       DefectClass::kUlam);
  res["ulam"] = report::defect_report(f, ulam);

  std::string cdetail;
  auto [cok, cn] = conjugation_relation(
      f, PairEnumeration::exhaustive(m.ulam_radius), cdetail);
  b.check("conjugation_relation", cok,
          cok ? fmt_count("pairs", cn) : cdetail);

  bool fixed = true;
  std::string fdetail;
  for (int n = 1; n <= m.fixed_max && fixed; ++n) {
    for (const Word* w : {&m.u, &m.v}) {
      const Element e = fg.from_word(power(*w, n));
      if (f(e) != e) {
        fixed = false;
        fdetail = "f(" + w->str() + "^" + std::to_string(n) + ") differs";
      }
    }
  }
  b.check("fixed_points", fixed,
          fixed ? "u^n and v^n fixed for 1 <= n <= " + std::to_string(m.fixed_max)
                : fdetail);
  bool cyc = true;
  for (int gen = 1; gen <= m.rank && cyc; ++gen) {
    for (int n = 1; n <= m.fixed_max && cyc; ++n) {
      const Element e = fg.from_word(power(Word::generator(gen, m.rank), n));
      if (f(e) != g.identity()) {
        cyc = false;
        fdetail = "generator " + std::to_string(gen) + " power " + std::to_string(n);
      }
    }
  }
  b.check("generator_powers_trivial", cyc,
          cyc ? "powers up to " + std::to_string(m.fixed_max) : fdetail);

  bool brooks_ok = true;
  std::size_t brooks_n = 0;
  std::string bdetail;
  for (const auto& x : enumerate_ball(g, m.brooks_radius).elements) {
    const Word w = fg.to_word(x);
    const auto mv = middle_uv_value(m.u, m.v, w);
    ++brooks_n;
    if (alpha_abelianize(mv.pattern_ids) != brooks_value(m.u, w) ||
        fg.from_word(mv.value) != f(x)) {
      if (brooks_ok) bdetail = "fails at " + w.str();
      brooks_ok = false;
    }
  }
  b.check("brooks_identity", brooks_ok,
          brooks_ok ? fmt_count("elements", brooks_n) : bdetail);

  json fam = json::array();
  bool fam_ok = true;
  const Element x = fg.from_word(m.x);
  for (int k = 1; k <= m.k_max; ++k) {
    const Element y = fg.from_word(multiply(m.y_prefix, power(m.v, k)));
    const Element d = ulam_defect(f, x, y);
    const Element expect =
        fg.from_word(multiply(multiply(power(m.v, -k), m.u), power(m.v, k)));
    const std::int64_t expect_norm = static_cast<std::int64_t>(
        m.u.size() + 2 * static_cast<std::size_t>(k) * m.v.size());
    const bool ok = d == expect && g.norm(d) == expect_norm;
    fam_ok = fam_ok && ok;
    fam.push_back({{"k", k},
                   {"x", g.format(x)},
                   {"y", g.format(y)},
                   {"defect", g.format(d)},
                   {"norm", g.norm(d)},
                   {"expected_norm", expect_norm},
                   {"match", ok}});
  }
  res["witness_family"] = std::move(fam);
  b.check("witness_family", fam_ok,
          "defect(x, y_prefix v^k) = v^-k u v^k with norm |u| + 2k|v| for k <= " +
              std::to_string(m.k_max));
}

inline void run_rigidity(const Rigidity& r, report::Builder& b) {
  const Group g = free_group(r.rank);
  const QMap f = make_point_perturbation(make_identity(g), r.overrides);
  std::set<Element> moved;
  for (const auto& [x, y] : r.overrides) moved.insert(x);
  // Generic value: defect(x0, y) = y^-1 A y with A = f(x0)^-1 x0 whenever
  // y != 1 and neither y nor x0 y is overridden.
  const Element a = g.multiply(g.invert(f(r.x0)), r.x0);
  auto& res = b.results();
  res["A"] = g.format(a);
  const Ball ball = enumerate_ball(g, r.max_radius);
  std::vector<std::int64_t> max_at(static_cast<std::size_t>(r.max_radius) + 1, 0);
  std::vector<std::string> arg_at(max_at.size());
  json exceptions = json::array();
  bool conj_ok = true;
  std::size_t checked = 0;
  std::string detail;
  for (std::size_t i = 0; i < ball.size(); ++i) {
    const Element& y = ball.elements[i];
    const Element xy = g.multiply(r.x0, y);
    if (y == g.identity() || moved.contains(y) || moved.contains(xy)) {
      exceptions.push_back(g.format(y));
      continue;
    }
    const Element d = ulam_defect(f, r.x0, y);
    ++checked;
    if (d != g.conjugate(a, y)) {
      if (conj_ok) detail = "fails at y = " + g.format(y);
      conj_ok = false;
    }
    const auto lvl = static_cast<std::size_t>(ball.depth[i]);
    const std::int64_t nd = g.norm(d);
    if (nd > max_at[lvl]) {
      max_at[lvl] = nd;
      arg_at[lvl] = g.format(y);
    }
  }
  json rows = json::array();
  bool growth = true;
  std::int64_t cum = 0, prev = -1;
  std::string wit;
  for (int rad = 0; rad <= r.max_radius; ++rad) {
    const auto l = static_cast<std::size_t>(rad);
    if (max_at[l] > cum) {
      cum = max_at[l];
      wit = arg_at[l];
    }
    if (rad < r.min_radius) continue;
    rows.push_back({{"radius", rad}, {"max_norm", cum}, {"witness_y", wit}});
    if (prev >= 0 && cum <= prev) growth = false;
    prev = cum;
  }
  res["radius_table"] = std::move(rows);
  res["exceptions"] = std::move(exceptions);
  res["checked"] = checked;
  b.check("defect_is_conjugate_of_A", conj_ok,
          conj_ok ? fmt_count("pairs (x0, y)", checked) : detail);
  b.check("strict_growth", growth,
          "max norm strictly increasing over radii " +
              std::to_string(r.min_radius) + ".." + std::to_string(r.max_radius));
}

inline void run_heisenberg_lift(const HeisenbergLift& p, report::Builder& b) {
  const Group g = free_group(2 * p.n);
  const Group e = heisenberg_group(p.n);
  const auto& ext = *e.as<ExtensionGroup>();
  std::vector<Element> imgs;
  for (int i = 0; i < 2 * p.n; ++i) {
    std::vector<std::int64_t> v(static_cast<std::size_t>(2 * p.n), 0);
    v[static_cast<std::size_t>(i)] = 1;
    imgs.push_back(Element(std::move(v)));
  }
  const QMap f1 = make_hom_lift(g, e, imgs);
  const QMap psi = make_brooks(g, p.word);
  const QMap f2 = make_central_perturbation(f1, psi);
  auto& res = b.results();
  res["f1"] = f1.spec();
  res["f2"] = f2.spec();

  const auto pts = enumerate_ball(g, p.radius).elements;
  const LiftDifference diff = lift_difference(f1, f2, pts);
  bool delta_ok = true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    delta_ok = delta_ok && diff.values[i] == psi(pts[i]);
  }
  b.check("delta_equals_psi", delta_ok, fmt_count("points", pts.size()));

  const auto en = PairEnumeration::exhaustive(p.radius);
  const DefectReport d1 = defect_set(f1, en, DefectClass::kUlam);
  b.check("hom_lift_is_hom",
          d1.defects.size() == 1 && d1.defects[0] == e.identity(),
          fmt_count("distinct defects", d1.defects.size()));

  bool central = true, minus = true;
  std::set<std::int64_t> psi_defects;
  std::string detail;
  scan_pairs(f2, en, [&](const PairVisit& v) {
    const Element d = ulam_from_values(e, v.fx, v.fy, v.fxy);
    if (ext.project(d) != ext.base().identity()) central = false;
    const std::int64_t px = psi.eval_unchecked(v.x).data()[0];
    const std::int64_t py = psi.eval_unchecked(v.y).data()[0];
    const std::int64_t pxy = psi.eval_unchecked(g.multiply(v.x, v.y)).data()[0];
    const std::int64_t qd = px + py - pxy;
    psi_defects.insert(qd);
    if (ext.fiber_part(d).data()[0] != -qd) {
      if (minus) detail = "fails at (" + g.format(v.x) + ", " + g.format(v.y) + ")";
      minus = false;
    }
  });
  const DefectReport d2 = defect_set(f2, en, DefectClass::kUlam);
  res["defects_f2"] = report::defect_report(f2, d2);
  res["psi_defect_values"] = json(std::vector<std::int64_t>(psi_defects.begin(),
                                                            psi_defects.end()));
  b.check("defects_central", central, "every D(f2) element lies in the fiber");
  b.check("fiber_is_minus_psi_defect", minus,
          minus ? "fiber coordinate of d_f2(x,y) = -(psi(x) + psi(y) - psi(xy))"
                : detail);
}

inline void run_quasisplit(const QuasiSplit& q, report::Builder& b) {
  const Group& e = q.group;
  const auto& ext = *e.as<ExtensionGroup>();
  auto& res = b.results();
  const RoundTripAudit rt = quasi_split_roundtrip(e, q.radius);
  res["roundtrip"] = report::roundtrip(e, rt);
  res["exhaustive"] = e.is_finite();
  b.check("q_is_minus_a", rt.q_is_minus_a);
  b.check("q_of_section_zero", rt.q_of_section_zero);
  b.check("f_prime_f_identity", rt.f_prime_f);
  b.check("f_f_prime_identity", rt.f_f_prime);
  b.check("defect_in_omega", rt.defect_in_omega);

  const Group base = ext.base();
  const QMap s = make_section_lift(make_identity(base), e);
  json rows = json::array();
  if (base.is_finite()) {
    const int diam = static_cast<int>(enumerate_all(base).size());
    const DefectReport rep = defect_set(s, PairEnumeration::exhaustive(diam),
                                        DefectClass::kUlam);
    res["section_defects"] = report::defect_report(s, rep);
    if (q.section_growth == "bounded") {
      b.check("section_defects_bounded", rep.defects.size() <= q.max_distinct,
              fmt_count("distinct section defects", rep.defects.size()) +
                  " (exhaustive), limit " + std::to_string(q.max_distinct));
    } else if (q.section_growth == "unbounded") {
      b.check("section_defects_unbounded", false,
              "a finite base has finitely many section defects");
    }
  } else {
    std::int64_t prev = -1;
    bool growth = true;
    std::size_t max_distinct = 0;
    for (int r : q.section_radii) {
      const DefectReport rep = defect_set(s, PairEnumeration::exhaustive(r),
                                          DefectClass::kUlam);
      json row{{"radius", r},
               {"pairs", rep.pairs},
               {"distinct", rep.defects.size()},
               {"max_norm", rep.max_norm}};
      if (!rep.witnesses.empty()) {
        const auto& w = rep.witnesses.back();
        row["witness"] = {{"x", base.format(w.x)},
                          {"y", base.format(w.y)},
                          {"defect", e.format(w.value)}};
      }
      rows.push_back(std::move(row));
      if (rep.max_norm <= prev) growth = false;
      prev = rep.max_norm;
      max_distinct = std::max(max_distinct, rep.defects.size());
    }
    res["section_scan"] = std::move(rows);
    if (q.section_growth == "unbounded") {
      b.check("section_max_norm_strictly_increasing", growth,
              "over scan radii");
    } else if (q.section_growth == "bounded") {
      b.check("section_defects_bounded", max_distinct <= q.max_distinct,
              fmt_count("max distinct section defects", max_distinct));
    }
  }
}

inline void run_decompose(const Decompose& d, report::Builder& b) {
  const DecompositionReport rep =
      constructibility_decompose(d.map, d.radius, d.max_radius, d.aut_cap);
  b.results()["certificate"] = report::decomposition(d.map, rep);
  b.check("status_ok", rep.status == "ok", rep.status);
  for (const auto& c : rep.checks) b.check("clause:" + c.name, c.pass, c.detail);
  const auto& e = d.expect;
  if (e.delta_size) {
    b.check("expect:delta_size",
            static_cast<std::int64_t>(rep.delta.size()) == *e.delta_size,
            fmt_count("|Delta| =", rep.delta.size()));
  }
  if (e.kernel_index) {
    b.check("expect:kernel_index",
            static_cast<std::int64_t>(rep.kernel_index) == *e.kernel_index,
            fmt_count("index", rep.kernel_index));
  }
  if (e.quotient_order) {
    const std::size_t qo =
        rep.quotient.valid() ? enumerate_all(rep.quotient).size() : 0;
    b.check("expect:quotient_order",
            static_cast<std::int64_t>(qo) == *e.quotient_order,
            fmt_count("order", qo));
  }
  if (e.fixed) {
    bool same = true;
    for (const auto& [x, y] : rep.projected) same = same && d.map(x) == y;
    b.check("expect:fixed", same == *e.fixed,
            same ? "f_o = f on the scan" : "f_o differs from f");
  }
}

inline void run_defect_scan(const DefectScan& d, report::Builder& b) {
  auto& res = b.results();
  const DefectReport rep = defect_set(d.map, d.en, d.cls, d.search_radius);
  res["defects"] = report::defect_report(d.map, rep);
  const auto& e = d.expect;
  if (e.max_norm_at_most) {
    b.check("expect:max_norm_at_most", rep.max_norm <= *e.max_norm_at_most,
            "max norm " + std::to_string(rep.max_norm));
  }
  if (e.distinct_at_most) {
    const std::size_t n = rep.table.empty() ? 0 : rep.table.back().distinct;
    b.check("expect:distinct_at_most",
            static_cast<std::int64_t>(n) <= *e.distinct_at_most,
            fmt_count("distinct", n));
  }
  if (d.cls == DefectClass::kGeometric || d.cls == DefectClass::kAlgebraic) {
    b.check("search_complete", rep.exceeded == 0,
            fmt_count("pairs without a decomposition within the search radius",
                      rep.exceeded));
  }
  if (d.conjugation) {
    std::string detail;
    auto [ok, n] = conjugation_relation(d.map, d.en, detail);
    b.check("conjugation_relation", ok, ok ? fmt_count("pairs", n) : detail);
  }
  if (d.identity_audit) {
    const IdentityAudit a = qh::identity_audit(d.map, d.en.radius);
    res["identity_audit"] = report::identity_audit(d.map, a);
    for (const auto& c : a.checks) {
      b.check("identity:" + c.name, c.pass,
              c.pass ? fmt_count("checked", c.checked) : c.detail);
    }
  }
  if (d.containment) {
    ContainmentAudit c;
    if (const auto* comp = d.map.rule_as<ComposeRule>()) {
      c = composition_containment(comp->outer(), comp->inner(), d.en.radius);
    } else {
      c = product_containment(d.map, d.en.radius);
    }
    res["containment"] = report::containment(d.map.domain(), c);
    b.check("containment", c.pass,
            c.pass ? c.relation + ", " + fmt_count("pairs", c.pairs) : c.detail);
  }
}

inline void run_hs_probe(const HsProbeParams& h, report::Builder& b) {
  b.results()["probe"] = report::hs_probe(hs_probe(h.map, h.k, h.en));
}

}  // namespace detail

inline report::Builder run(const Spec& s, const std::string& command = "experiment") {
  report::Builder b(command, s.doc);
  b.results()["experiment"] = s.name;
  if (s.name == "middle_vs_ulam") {
    detail::run_middle_vs_ulam(s.middle_vs_ulam, b);
  } else if (s.name == "perturbation_rigidity") {
    detail::run_rigidity(s.rigidity, b);
  } else if (s.name == "heisenberg_lift") {
    detail::run_heisenberg_lift(s.heisenberg, b);
  } else if (s.name == "quasisplit_audit") {
    detail::run_quasisplit(s.quasisplit, b);
  } else if (s.name == "decompose") {
    detail::run_decompose(s.decompose, b);
  } else if (s.name == "defect_scan") {
    detail::run_defect_scan(s.defect_scan, b);
  } else if (s.name == "hs_probe") {
    detail::run_hs_probe(s.hs, b);
  }
  return b;
}

// Parses, raising the first diagnostic as a spec error.
inline Spec parse_or_throw(const json& doc,
                           const std::filesystem::path& base_dir = ".") {
  Collector c;
  auto s = parse(doc, c, base_dir);
  if (!s) {
    const auto& d = c.diagnostics().front();
    if (!d.witness.is_null()) throw spec::WitnessError(d.pointer, d.message, d.witness);
    throw SpecError(d.pointer, d.message);
  }
  return std::move(*s);
}

}  // namespace qh::experiment

#endif  // QH_EXPERIMENT_HPP_
