#ifndef QH_SPEC_HPP_
#define QH_SPEC_HPP_

// JSON documents for groups, elements and maps.
//
// Group:   {"kind": "free", "rank": 2}
//          {"kind": "free_abelian", "rank": 2}
//          {"kind": "abelian", "moduli": [0, 4]}
//          {"kind": "cyclic", "order": 8}
//          {"kind": "symmetric", "degree": 3}
//          {"kind": "quaternion"}
//          {"kind": "heisenberg", "n": 1}
//          {"kind": "finite_perm", "degree": 3, "generators": [[1,0,2], ...]}
//          {"kind": "finite_table", "table": [[...]], "generators": [1]}
//          {"kind": "extension", "fiber": {"moduli": [0]}, "base": GROUP,
//           "cocycle": {"rule": "symplectic", "n": 1}
//                    | {"rule": "carry", "modulus": 4}
//                    | {"rule": "table", "values": [[[...]]]}
//                    | {"rule": "zero"}}
//          {"kind": "product", "factors": [GROUP, ...]}
// Element: its text encoding in the group, e.g. "abA", "(1,-2)", "[1,0,2]".
// Map:     {"domain": GROUP, "target": GROUP, "rule": {"type": ..., ...}}
//          Nested maps may omit "domain" (inherited from the enclosing map)
//          and, where the rule fixes it, "target".
//
// Errors carry an RFC 6901 pointer into the document.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qh/error.hpp"
#include "qh/extension.hpp"
#include "qh/group.hpp"
#include "qh/qmap.hpp"
#include "qh/structure.hpp"
#include "qh/word.hpp"

namespace qh::spec {

using nlohmann::json;

// A spec error with a machine-readable witness (e.g. an overlap).
class WitnessError : public SpecError {
 public:
  WitnessError(std::string pointer, std::string message, json witness)
      : SpecError(std::move(pointer), std::move(message)),
        witness_(std::move(witness)) {}
  const json& witness() const noexcept { return witness_; }

 private:
  json witness_;
};

inline std::string child(const std::string& ptr, const std::string& key) {
  std::string esc;
  for (char c : key) {
    if (c == '~') {
      esc += "~0";
    } else if (c == '/') {
      esc += "~1";
    } else {
      esc += c;
    }
  }
  return ptr + "/" + esc;
}

inline std::string child(const std::string& ptr, std::size_t i) {
  return ptr + "/" + std::to_string(i);
}

inline void require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) throw SpecError(ptr, "expected an object");
}

inline const json& field(const json& j, const std::string& ptr,
                         const std::string& key) {
  require_object(j, ptr);
  auto it = j.find(key);
  if (it == j.end()) {
    throw SpecError(child(ptr, key), "missing required field");
  }
  return *it;
}

inline std::int64_t as_int(const json& j, const std::string& ptr,
                           std::int64_t lo, std::int64_t hi) {
  if (!j.is_number_integer()) throw SpecError(ptr, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < lo || v > hi) {
    throw SpecError(ptr, "value " + std::to_string(v) + " outside [" +
                             std::to_string(lo) + ", " + std::to_string(hi) +
                             "]");
  }
  return v;
}

inline std::int64_t get_int(const json& j, const std::string& ptr,
                            const std::string& key, std::int64_t lo,
                            std::int64_t hi) {
  return as_int(field(j, ptr, key), child(ptr, key), lo, hi);
}

inline std::int64_t get_int_or(const json& j, const std::string& ptr,
                               const std::string& key, std::int64_t dflt,
                               std::int64_t lo, std::int64_t hi) {
  require_object(j, ptr);
  if (!j.contains(key)) return dflt;
  return as_int(j.at(key), child(ptr, key), lo, hi);
}

inline std::string as_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw SpecError(ptr, "expected a string");
  return j.get<std::string>();
}

inline std::string get_string(const json& j, const std::string& ptr,
                              const std::string& key) {
  return as_string(field(j, ptr, key), child(ptr, key));
}

inline const json& as_array(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SpecError(ptr, "expected an array");
  return j;
}

inline std::vector<std::int64_t> as_int_list(const json& j,
                                             const std::string& ptr) {
  std::vector<std::int64_t> out;
  const auto& a = as_array(j, ptr);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.push_back(as_int(a[i], child(ptr, i), INT64_MIN, INT64_MAX));
  }
  return out;
}

// Runs fn, turning library errors into spec errors at ptr. Resource caps and
// spec errors pass through.
template <class Fn>
auto at_pointer(const std::string& ptr, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const SpecError&) {
    throw;
  } catch (const CapExceeded&) {
    throw;
  } catch (const NonOverlapError& e) {
    const auto& w = e.witness();
    throw WitnessError(ptr, e.what(),
                       json{{"kind", w.kind == OverlapWitness::Kind::kFactor
                                         ? "factor"
                                         : "suffix_prefix"},
                            {"first", w.first},
                            {"second", w.second},
                            {"segment", w.segment.str()}});
  } catch (const Error& e) {
    throw SpecError(ptr, e.what());
  }
}

//------------------------------------------------------------------------------
// Groups and elements
//------------------------------------------------------------------------------

inline Cocycle parse_cocycle(const json& j, const std::string& ptr) {
  const std::string rule = get_string(j, ptr, "rule");
  if (rule == "symplectic") {
    return Cocycle::symplectic(static_cast<int>(get_int(j, ptr, "n", 1, 64)));
  }
  if (rule == "carry") {
    return Cocycle::carry(get_int(j, ptr, "modulus", 2, 1 << 20));
  }
  if (rule == "zero") return Cocycle::zero();
  if (rule == "table") {
    const std::string vp = child(ptr, "values");
    const auto& v = as_array(field(j, ptr, "values"), vp);
    std::vector<std::vector<std::vector<std::int64_t>>> values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& row = as_array(v[i], child(vp, i));
      values.emplace_back();
      for (std::size_t k = 0; k < row.size(); ++k) {
        values.back().push_back(as_int_list(row[k], child(child(vp, i), k)));
      }
    }
    return Cocycle::table(std::move(values));
  }
  throw SpecError(child(ptr, "rule"), "unknown cocycle rule '" + rule + "'");
}

inline Group parse_group(const json& j, const std::string& ptr = "") {
  const std::string kind = get_string(j, ptr, "kind");
  if (kind == "free") {
    return free_group(static_cast<int>(get_int(j, ptr, "rank", 1, kMaxRank)));
  }
  if (kind == "free_abelian") {
    return free_abelian_group(
        static_cast<std::size_t>(get_int(j, ptr, "rank", 1, 64)));
  }
  if (kind == "abelian") {
    auto moduli = as_int_list(field(j, ptr, "moduli"), child(ptr, "moduli"));
    return at_pointer(child(ptr, "moduli"),
                      [&] { return abelian_group(std::move(moduli)); });
  }
  if (kind == "cyclic") {
    return cyclic_group(get_int(j, ptr, "order", 1, 4096));
  }
  if (kind == "symmetric") {
    return symmetric_group(
        static_cast<std::size_t>(get_int(j, ptr, "degree", 2, 7)));
  }
  if (kind == "quaternion") return quaternion_group();
  if (kind == "heisenberg") {
    return heisenberg_group(static_cast<int>(get_int(j, ptr, "n", 1, 16)));
  }
  if (kind == "finite_perm") {
    const auto degree =
        static_cast<std::size_t>(get_int(j, ptr, "degree", 1, 64));
    const std::string gp = child(ptr, "generators");
    const auto& g = as_array(field(j, ptr, "generators"), gp);
    std::vector<std::vector<std::int64_t>> gens;
    for (std::size_t i = 0; i < g.size(); ++i) {
      gens.push_back(as_int_list(g[i], child(gp, i)));
    }
    return at_pointer(ptr, [&] { return permutation_group(degree, gens); });
  }
  if (kind == "finite_table") {
    const std::string tp = child(ptr, "table");
    const auto& t = as_array(field(j, ptr, "table"), tp);
    std::vector<std::vector<std::int64_t>> table;
    for (std::size_t i = 0; i < t.size(); ++i) {
      table.push_back(as_int_list(t[i], child(tp, i)));
    }
    auto gens = as_int_list(field(j, ptr, "generators"),
                            child(ptr, "generators"));
    return at_pointer(ptr, [&] { return table_group(std::move(table), gens); });
  }
  if (kind == "extension") {
    const std::string fp = child(ptr, "fiber");
    const json& fj = field(j, ptr, "fiber");
    std::vector<std::int64_t> moduli;
    require_object(fj, fp);
    if (fj.contains("moduli")) {
      moduli = as_int_list(fj.at("moduli"), child(fp, "moduli"));
    } else {
      moduli.assign(static_cast<std::size_t>(get_int(fj, fp, "rank", 1, 64)), 0);
    }
    const Group base = parse_group(field(j, ptr, "base"), child(ptr, "base"));
    const Cocycle w =
        parse_cocycle(field(j, ptr, "cocycle"), child(ptr, "cocycle"));
    return at_pointer(ptr, [&] {
      return build_extension(std::move(moduli), base, w);
    });
  }
  if (kind == "product") {
    const std::string fp = child(ptr, "factors");
    const auto& f = as_array(field(j, ptr, "factors"), fp);
    std::vector<Group> factors;
    for (std::size_t i = 0; i < f.size(); ++i) {
      factors.push_back(parse_group(f[i], child(fp, i)));
    }
    return at_pointer(fp, [&] { return direct_product(std::move(factors)); });
  }
  throw SpecError(child(ptr, "kind"), "unknown group kind '" + kind + "'");
}

inline Element parse_element(const Group& g, const json& j,
                             const std::string& ptr) {
  const std::string text = as_string(j, ptr);
  return at_pointer(ptr, [&] { return g.parse(text); });
}

inline std::vector<Element> parse_elements(const Group& g, const json& j,
                                           const std::string& ptr) {
  std::vector<Element> out;
  const auto& a = as_array(j, ptr);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.push_back(parse_element(g, a[i], child(ptr, i)));
  }
  return out;
}

inline Word parse_word(const Group& g, const json& j, const std::string& ptr) {
  const auto* fg = g.as<FreeGroup>();
  if (fg == nullptr) {
    throw SpecError(ptr, "words need a free group, got " + g.describe());
  }
  const std::string text = as_string(j, ptr);
  return at_pointer(ptr, [&] { return Word::parse(text, fg->rank()); });
}

//------------------------------------------------------------------------------
// Maps
//------------------------------------------------------------------------------

struct MapContext {
  const Group* domain = nullptr;  // inherited domain
  const Group* target = nullptr;  // default target when the rule needs one
};

inline QMap parse_map(const json& j, const std::string& ptr = "",
                      MapContext ctx = {});

namespace detail {

inline Group map_domain(const json& j, const std::string& ptr,
                        const MapContext& ctx) {
  require_object(j, ptr);
  if (j.contains("domain")) return parse_group(j.at("domain"), child(ptr, "domain"));
  if (ctx.domain != nullptr) return *ctx.domain;
  throw SpecError(child(ptr, "domain"), "missing required field");
}

inline Group map_target(const json& j, const std::string& ptr,
                        const MapContext& ctx) {
  if (j.contains("target")) return parse_group(j.at("target"), child(ptr, "target"));
  if (ctx.target != nullptr) return *ctx.target;
  throw SpecError(child(ptr, "target"), "missing required field");
}

inline std::vector<std::pair<Element, Element>> parse_pairs(
    const Group& dom, const Group& tgt, const json& j, const std::string& ptr) {
  std::vector<std::pair<Element, Element>> out;
  const auto& a = as_array(j, ptr);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string ip = child(ptr, i);
    const auto& p = as_array(a[i], ip);
    if (p.size() != 2) throw SpecError(ip, "expected a [point, value] pair");
    out.emplace_back(parse_element(dom, p[0], child(ip, 0)),
                     parse_element(tgt, p[1], child(ip, 1)));
  }
  return out;
}

}  // namespace detail

inline QMap parse_map(const json& j, const std::string& ptr, MapContext ctx) {
  const Group domain = detail::map_domain(j, ptr, ctx);
  const std::string rp = child(ptr, "rule");
  const json& r = field(j, ptr, "rule");
  const std::string type = get_string(r, rp, "type");
  MapContext inner{&domain, nullptr};

  QMap out;
  if (type == "generator_hom") {
    const Group target = detail::map_target(j, ptr, ctx);
    auto images = parse_elements(target, field(r, rp, "images"),
                                 child(rp, "images"));
    out = at_pointer(rp, [&] {
      return make_generator_hom(domain, target, std::move(images));
    });
  } else if (type == "identity") {
    out = make_identity(domain);
  } else if (type == "point_table") {
    const Group target = detail::map_target(j, ptr, ctx);
    auto table = detail::parse_pairs(domain, target, field(r, rp, "values"),
                                     child(rp, "values"));
    out = at_pointer(rp, [&] {
      return make_point_table(domain, target, std::move(table));
    });
  } else if (type == "brooks") {
    const Word w = parse_word(domain, field(r, rp, "word"), child(rp, "word"));
    out = at_pointer(rp, [&] { return make_brooks(domain, w); });
  } else if (type == "middle_uv") {
    const Word u = parse_word(domain, field(r, rp, "u"), child(rp, "u"));
    const Word v = parse_word(domain, field(r, rp, "v"), child(rp, "v"));
    out = at_pointer(rp, [&] { return make_middle_uv(domain, u, v); });
  } else if (type == "section_lift") {
    const Group target = detail::map_target(j, ptr, ctx);
    const auto* ext = target.as<ExtensionGroup>();
    if (ext == nullptr) {
      throw SpecError(child(ptr, "target"), "section_lift needs an extension target");
    }
    const Group base = ext->base();
    QMap in = parse_map(field(r, rp, "inner"), child(rp, "inner"),
                        {&domain, &base});
    out = at_pointer(rp, [&] { return make_section_lift(in, target); });
  } else if (type == "hom_lift") {
    const Group target = detail::map_target(j, ptr, ctx);
    const auto* ext = target.as<ExtensionGroup>();
    if (ext == nullptr) {
      throw SpecError(child(ptr, "target"), "hom_lift needs an extension target");
    }
    auto images = parse_elements(ext->base(), field(r, rp, "images"),
                                 child(rp, "images"));
    out = at_pointer(rp, [&] {
      return make_hom_lift(domain, target, std::move(images));
    });
  } else if (type == "central_perturbation") {
    QMap base = parse_map(field(r, rp, "base"), child(rp, "base"), inner);
    const auto* ext = base.target().as<ExtensionGroup>();
    if (ext == nullptr) {
      throw SpecError(child(rp, "base"), "central_perturbation needs a map into an extension");
    }
    const Group fiber = ext->fiber();
    QMap psi = parse_map(field(r, rp, "psi"), child(rp, "psi"), {&domain, &fiber});
    out = at_pointer(rp, [&] { return make_central_perturbation(base, psi); });
  } else if (type == "product") {
    const std::string fp = child(rp, "factors");
    const auto& fs = as_array(field(r, rp, "factors"), fp);
    if (fs.empty()) throw SpecError(fp, "product of zero maps");
    std::vector<QMap> factors;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      factors.push_back(parse_map(fs[i], child(fp, i), inner));
    }
    out = at_pointer(rp, [&] { return make_product(std::move(factors)); });
  } else if (type == "compose") {
    QMap in = parse_map(field(r, rp, "inner"), child(rp, "inner"), inner);
    const Group mid = in.target();
    QMap outer = parse_map(field(r, rp, "outer"), child(rp, "outer"), {&mid, nullptr});
    out = at_pointer(rp, [&] { return make_compose(outer, in); });
  } else if (type == "point_perturbation") {
    QMap base = parse_map(field(r, rp, "base"), child(rp, "base"), inner);
    auto ov = detail::parse_pairs(domain, base.target(), field(r, rp, "overrides"),
                                  child(rp, "overrides"));
    out = at_pointer(rp, [&] {
      return make_point_perturbation(base, std::move(ov));
    });
  } else if (type == "post_project") {
    QMap in = parse_map(field(r, rp, "inner"), child(rp, "inner"), inner);
    const std::string pp = child(rp, "projection");
    const json& pj = field(r, rp, "projection");
    const std::string mode = get_string(pj, pp, "mode");
    if (mode != "retract") {
      throw SpecError(child(pp, "mode"), "unknown projection mode '" + mode + "'");
    }
    const Group& h = in.target();
    if (!h.is_finite()) {
      throw SpecError(child(rp, "inner"), "retraction needs a finite target");
    }
    auto k = parse_elements(h, field(pj, pp, "subgroup"), child(pp, "subgroup"));
    auto hs = parse_elements(h, field(pj, pp, "cosets"), child(pp, "cosets"));
    out = at_pointer(rp, [&] { return make_retraction(in, std::move(k), std::move(hs)); });
  } else {
    throw SpecError(child(rp, "type"), "unknown rule type '" + type + "'");
  }

  if (j.contains("target")) {
    const Group declared = parse_group(j.at("target"), child(ptr, "target"));
    if (!(declared == out.target())) {
      throw SpecError(child(ptr, "target"),
                      "declared target " + declared.describe() +
                          " differs from the rule's target " +
                          out.target().describe());
    }
  }
  return out;
}

//------------------------------------------------------------------------------
// Files
//------------------------------------------------------------------------------

inline json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is a 1-based offset; report it as line:column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SpecError("", origin + ":" + std::to_string(line) + ":" +
                            std::to_string(col) + ": JSON syntax error");
  }
}

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("", path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

}  // namespace qh::spec

#endif  // QH_SPEC_HPP_
