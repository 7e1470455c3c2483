#ifndef QH_REPORT_HPP_
#define QH_REPORT_HPP_

// JSON encodings of computed results and the report envelope.
//
// Envelope (schema "qh-report/1"):
//   {"schema", "tool": {"name", "version"}, "command", "spec",
//    "results", "assertions": [{"name", "pass", "detail"}],
//    "summary": {"pass", "assertions", "failed"}, "timing"?}
// "timing" appears only when requested; everything else is a pure function
// of the input document, so two runs produce the same bytes.

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qh/defect.hpp"
#include "qh/group.hpp"
#include "qh/structure.hpp"

namespace qh::report {

using nlohmann::json;

inline constexpr const char* kSchema = "qh-report/1";
inline constexpr const char* kToolVersion = "1.0.0";

inline json elements(const Group& g, const std::vector<Element>& xs) {
  json a = json::array();
  for (const auto& x : xs) a.push_back(g.format(x));
  return a;
}

inline json words(const std::vector<Word>& ws) {
  json a = json::array();
  for (const auto& w : ws) a.push_back(w.str());
  return a;
}

inline json enumeration(const PairEnumeration& en) {
  if (en.mode == PairEnumeration::Mode::kExhaustive) {
    return {{"mode", "exhaustive"}, {"radius", en.radius}};
  }
  return {{"mode", "random"},
          {"max_length", en.radius},
          {"count", en.count},
          {"seed", en.seed}};
}

inline json defect_report(const QMap& f, const DefectReport& rep) {
  const Group& g = f.domain();
  const Group& h = f.target();
  const bool search = rep.cls == DefectClass::kGeometric ||
                      rep.cls == DefectClass::kAlgebraic;
  json out{{"class", to_string(rep.cls)},
           {"enumeration", enumeration(rep.enumeration)},
           {"pairs", rep.pairs},
           {"max_norm", rep.max_norm},
           {"stability", rep.stability_summary()}};
  json table = json::array();
  for (const auto& row : rep.table) {
    json r{{"radius", row.radius},
           {"distinct", row.distinct},
           {"max_norm", row.max_norm}};
    if (search) r["exceeded"] = row.exceeded;
    table.push_back(std::move(r));
  }
  out["radius_table"] = std::move(table);
  json wit = json::array();
  for (const auto& w : rep.witnesses) {
    wit.push_back({{"x", g.format(w.x)},
                   {"y", g.format(w.y)},
                   {search ? "s3" : "defect", h.format(w.value)},
                   {"norm", w.norm},
                   {"level", w.level}});
  }
  out["witnesses"] = std::move(wit);
  if (search) {
    out["search_radius"] = rep.search_radius;
    out["exceeded"] = rep.exceeded;
    json hist = json::array();
    for (const auto& [r, n] : rep.radius_histogram) hist.push_back({r, n});
    out["radius_histogram"] = std::move(hist);
  } else {
    out["distinct"] = rep.defects.size();
    out["defects"] = elements(h, rep.defects);
    out["norms"] = rep.norms;
  }
  return out;
}

inline json identity_audit(const QMap& f, const IdentityAudit& a) {
  json checks = json::array();
  for (const auto& c : a.checks) {
    json j{{"name", c.name},
           {"pass", c.pass},
           {"checked", c.checked},
           {"method", c.method}};
    if (!c.pass) {
      j["witness"] = elements(f.domain(), c.witness);
      j["detail"] = c.detail;
    }
    checks.push_back(std::move(j));
  }
  return {{"radius", a.radius},
          {"triple_radius", a.triple_radius},
          {"defects", a.defects},
          {"pass", a.pass()},
          {"checks", std::move(checks)}};
}

inline json containment(const Group& domain, const ContainmentAudit& c) {
  json j{{"relation", c.relation},
         {"radius", c.radius},
         {"pairs", c.pairs},
         {"defects", c.defects},
         {"factor_pairs", c.factor_pairs},
         {"pass", c.pass}};
  if (!c.pass) {
    j["witness"] = elements(domain, c.witness);
    j["detail"] = c.detail;
  }
  return j;
}

inline json hs_probe(const HSProbe& p) {
  json rows = json::array();
  for (const auto& r : p.rows) {
    rows.push_back({{"probe", r.probe.str()}, {"max_defect", r.max_defect}});
  }
  return {{"k", p.k},
          {"enumeration", enumeration(p.enumeration)},
          {"probes", p.rows.size()},
          {"rows", std::move(rows)},
          {"note", "probe statistics only; no membership claim"}};
}

inline json roundtrip(const Group& e, const RoundTripAudit& a) {
  json j{{"elements", a.elements},
         {"pairs", a.pairs},
         {"q_is_minus_a", a.q_is_minus_a},
         {"q_of_section_zero", a.q_of_section_zero},
         {"f_prime_f", a.f_prime_f},
         {"f_f_prime", a.f_f_prime},
         {"defect_in_omega", a.defect_in_omega},
         {"pass", a.pass()}};
  if (!a.witness.empty()) j["witness"] = elements(e, a.witness);
  return j;
}

inline json decomposition(const QMap& f, const DecompositionReport& rep) {
  const Group& g = f.domain();
  const Group& h = f.target();
  json out{{"radius", rep.radius},
           {"attempts", rep.attempts},
           {"status", rep.status},
           {"pass", rep.pass()},
           {"defects", elements(h, rep.defects)},
           {"delta", elements(h, rep.delta)},
           {"normalizer", elements(h, rep.normalizer)},
           {"centralizer", elements(h, rep.centralizer)},
           {"phi_computed", rep.phi_computed}};
  if (rep.phi_computed) {
    out["phi_trivial"] = rep.phi_trivial;
    out["out_image_order"] =
        rep.out_image.valid() ? enumerate_all(rep.out_image).size() : 1;
    if (rep.out_image.valid()) {
      out["phi_generators"] = elements(rep.out_image, rep.phi_generators);
    }
  }
  out["kernel_index"] = rep.kernel_index;
  if (rep.coset_graph) {
    const auto& cg = *rep.coset_graph;
    out["kernel"] = {{"index", cg.index()},
                     {"transversal", words(cg.transversal)},
                     {"schreier_generators", words(cg.schreier)}};
  } else if (!rep.kernel_elements.empty()) {
    out["kernel"] = {{"index", rep.kernel_index},
                     {"elements", elements(g, rep.kernel_elements)}};
  }
  json proj = json::array();
  for (const auto& [x, y] : rep.projected) {
    proj.push_back({g.format(x), h.format(y)});
  }
  out["projected"] = std::move(proj);
  out["h_o"] = elements(h, rep.h_o);
  out["defects_o"] = elements(h, rep.defects_o);
  out["delta_o"] = elements(h, rep.delta_o);
  if (rep.quotient.valid()) {
    out["quotient_order"] = enumerate_all(rep.quotient).size();
    out["coset_reps"] = elements(h, rep.coset_reps);
  }
  out["sup_distance"] = rep.sup_distance;
  out["hom_pairs"] = rep.hom_pairs;
  json checks = json::array();
  for (const auto& c : rep.checks) {
    json j{{"name", c.name}, {"pass", c.pass}};
    if (!c.detail.empty()) j["detail"] = c.detail;
    checks.push_back(std::move(j));
  }
  out["checks"] = std::move(checks);
  return out;
}

//------------------------------------------------------------------------------
// Envelope
//------------------------------------------------------------------------------

struct Assertion {
  std::string name;
  bool pass = true;
  std::string detail;
};

class Builder {
 public:
  Builder(std::string command, json spec)
      : command_(std::move(command)), spec_(std::move(spec)) {}

  json& results() { return results_; }

  void check(std::string name, bool pass, std::string detail = {}) {
    assertions_.push_back({std::move(name), pass, std::move(detail)});
  }

  bool pass() const {
    for (const auto& a : assertions_) {
      if (!a.pass) return false;
    }
    return true;
  }

  const std::vector<Assertion>& assertions() const { return assertions_; }

  json finish() const {
    json as = json::array();
    std::size_t failed = 0;
    for (const auto& a : assertions_) {
      json j{{"name", a.name}, {"pass", a.pass}};
      if (!a.detail.empty()) j["detail"] = a.detail;
      as.push_back(std::move(j));
      if (!a.pass) ++failed;
    }
    return {{"schema", kSchema},
            {"tool", {{"name", "qh"}, {"version", kToolVersion}}},
            {"command", command_},
            {"spec", spec_},
            {"results", results_},
            {"assertions", std::move(as)},
            {"summary",
             {{"pass", failed == 0},
              {"assertions", assertions_.size()},
              {"failed", failed}}}};
  }

 private:
  std::string command_;
  json spec_;
  json results_ = json::object();
  std::vector<Assertion> assertions_;
};

// Stable text form: sorted keys (nlohmann objects are ordered maps), two-space
// indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace qh::report

#endif  // QH_REPORT_HPP_
