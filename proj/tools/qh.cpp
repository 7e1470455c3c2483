// qh: command-line front end.
//
//   qh eval       --map m.json --word w [--word ...]
//   qh eval       --group g.json --element x [--element ...]
//   qh defect     --map m.json [--class ulam] [--radius N] [--seed N --count N]
//   qh decompose  --map m.json [--radius N] [--max-radius N]
//   qh experiment spec.json
//   qh validate   file.json [...]
//
// Reports go to --out or stdout. Exit status: 0 pass, 2 assertion failure,
// 3 spec error, 4 resource cap.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qh/qh.hpp"

namespace {

using nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitAssertion = 2;
constexpr int kExitSpec = 3;
constexpr int kExitCap = 4;

struct Options {
  std::string map_file;
  std::string group_file;
  std::string spec_file;
  std::string out_file;
  std::string cls = "ulam";
  std::vector<std::string> words;
  std::vector<std::string> elements;
  std::vector<std::string> files;
  int radius = 4;
  int max_radius = -1;
  int search_radius = qh::kDefaultSearchRadius;
  int max_length = -1;
  std::optional<std::int64_t> seed;
  std::int64_t count = 0;
  bool audit = false;
  bool timing = false;
};

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qh::SpecError("", path + ": cannot write file");
  out << text;
}

int emit(const qh::report::Builder& b, const Options& o,
         std::chrono::steady_clock::time_point start) {
  json doc = b.finish();
  if (o.timing) {
    const auto dt = std::chrono::steady_clock::now() - start;
    doc["timing"] = {
        {"seconds", std::chrono::duration<double>(dt).count()}};
  }
  write_output(qh::report::dump(doc), o.out_file);
  if (!o.out_file.empty()) {
    std::cerr << "qh: " << doc["command"].get<std::string>() << ": "
              << (b.pass() ? "pass" : "FAIL") << " ("
              << doc["summary"]["failed"].get<std::size_t>() << " of "
              << b.assertions().size() << " assertions failed) -> "
              << o.out_file << "\n";
  }
  return b.pass() ? kExitPass : kExitAssertion;
}

int cmd_eval(const Options& o, std::chrono::steady_clock::time_point start) {
  if (o.map_file.empty() == o.group_file.empty()) {
    throw qh::SpecError("", "eval needs exactly one of --map or --group");
  }
  json values = json::array();
  json echo;
  if (!o.map_file.empty()) {
    const json doc = qh::spec::load_file(o.map_file);
    const qh::QMap f = qh::spec::parse_map(doc);
    echo = {{"map", f.spec()}, {"words", o.words}};
    for (std::size_t i = 0; i < o.words.size(); ++i) {
      const auto x = qh::spec::parse_element(f.domain(), o.words[i],
                                             "/words/" + std::to_string(i));
      const auto y = f(x);
      values.push_back({{"x", f.domain().format(x)},
                        {"value", f.target().format(y)},
                        {"norm", f.target().norm(y)}});
    }
  } else {
    const json doc = qh::spec::load_file(o.group_file);
    const qh::Group g = qh::spec::parse_group(doc);
    echo = {{"group", g.spec()}, {"elements", o.elements}};
    for (std::size_t i = 0; i < o.elements.size(); ++i) {
      const auto x = qh::spec::parse_element(g, o.elements[i],
                                             "/elements/" + std::to_string(i));
      values.push_back({{"x", g.format(x)},
                        {"inverse", g.format(g.invert(x))},
                        {"norm", g.norm(x)}});
    }
  }
  qh::report::Builder b("eval", echo);
  b.results()["values"] = std::move(values);
  return emit(b, o, start);
}

int run_spec(const json& doc, const std::string& command,
             const std::filesystem::path& base_dir, const Options& o,
             std::chrono::steady_clock::time_point start) {
  const auto s = qh::experiment::parse_or_throw(doc, base_dir);
  return emit(qh::experiment::run(s, command), o, start);
}

int cmd_defect(const Options& o, std::chrono::steady_clock::time_point start) {
  if (o.map_file.empty()) throw qh::SpecError("", "defect needs --map");
  json params{{"map", qh::spec::load_file(o.map_file)},
              {"class", o.cls},
              {"radius", o.radius},
              {"search_radius", o.search_radius},
              {"identity_audit", o.audit}};
  json doc{{"experiment", "defect_scan"}, {"params", params}};
  if (o.count > 0) {
    doc["params"]["random"] = {
        {"count", o.count},
        {"max_length", o.max_length >= 0 ? o.max_length : o.radius}};
  }
  if (o.seed) doc["seed"] = *o.seed;
  return run_spec(doc, "defect", ".", o, start);
}

int cmd_decompose(const Options& o,
                  std::chrono::steady_clock::time_point start) {
  if (o.map_file.empty()) throw qh::SpecError("", "decompose needs --map");
  json doc{{"experiment", "decompose"},
           {"params",
            {{"map", qh::spec::load_file(o.map_file)},
             {"radius", o.radius},
             {"max_radius", std::max(o.radius, o.max_radius)}}}};
  return run_spec(doc, "decompose", ".", o, start);
}

int cmd_experiment(const Options& o,
                   std::chrono::steady_clock::time_point start) {
  const json doc = qh::spec::load_file(o.spec_file);
  const auto dir = std::filesystem::path(o.spec_file).parent_path();
  return run_spec(doc, "experiment", dir.empty() ? "." : dir, o, start);
}

int cmd_validate(const Options& o) {
  json files = json::array();
  bool clean = true;
  for (const auto& path : o.files) {
    std::vector<qh::experiment::Diagnostic> ds;
    try {
      const json doc = qh::spec::load_file(path);
      const auto dir = std::filesystem::path(path).parent_path();
      ds = qh::experiment::validate_document(doc, dir.empty() ? "." : dir);
    } catch (const qh::SpecError& e) {
      ds.push_back({e.pointer(), e.message(), nullptr});
    }
    clean = clean && ds.empty();
    files.push_back({{"path", path},
                     {"diagnostics", qh::experiment::to_json(ds)}});
  }
  json out{{"schema", "qh-diagnostics/1"}, {"valid", clean}, {"files", files}};
  write_output(qh::report::dump(out), o.out_file);
  return clean ? kExitPass : kExitSpec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qh: quasihomomorphism constructions, defect scans and "
               "decomposition certificates"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out_file, "Write the report here (default stdout)");
    sub->add_flag("--timing", o.timing, "Add wall-clock timing to the report");
  };

  auto* eval = app.add_subcommand("eval", "Evaluate a map or group elements");
  eval->add_option("--map", o.map_file, "Map spec (JSON)");
  eval->add_option("--group", o.group_file, "Group spec (JSON)");
  eval->add_option("--word", o.words, "Domain element(s) for --map");
  eval->add_option("--element", o.elements, "Element(s) for --group");
  add_common(eval);

  auto* defect = app.add_subcommand("defect", "Scan a defect set");
  defect->add_option("--map", o.map_file, "Map spec (JSON)")->required();
  defect->add_option("--class", o.cls, "ulam | middle | geometric | algebraic");
  defect->add_option("--radius", o.radius, "Scan radius (or max length)");
  defect->add_option("--search-radius", o.search_radius,
                     "Cap for geometric/algebraic searches");
  defect->add_option("--seed", o.seed, "Seed for random scans");
  defect->add_option("--count", o.count, "Random pair count (enables random mode)");
  defect->add_option("--max-length", o.max_length, "Random word length bound");
  defect->add_flag("--audit", o.audit, "Also run the identity audit");
  add_common(defect);

  auto* decompose = app.add_subcommand("decompose", "Constructibility certificate");
  decompose->add_option("--map", o.map_file, "Map spec (JSON)")->required();
  decompose->add_option("--radius", o.radius, "Scan radius");
  decompose->add_option("--max-radius", o.max_radius, "Retry up to this radius");
  add_common(decompose);

  auto* experiment = app.add_subcommand("experiment", "Run an experiment spec");
  experiment->add_option("spec", o.spec_file, "Experiment spec (JSON)")->required();
  add_common(experiment);

  auto* validate = app.add_subcommand("validate", "Validate spec files");
  validate->add_option("files", o.files, "Spec files")->required();
  validate->add_option("--out", o.out_file, "Write diagnostics here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSpec;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (eval->parsed()) return cmd_eval(o, start);
    if (defect->parsed()) return cmd_defect(o, start);
    if (decompose->parsed()) return cmd_decompose(o, start);
    if (experiment->parsed()) return cmd_experiment(o, start);
    if (validate->parsed()) return cmd_validate(o);
  } catch (const qh::spec::WitnessError& e) {
    std::cerr << "qh: spec error: " << e.what() << "\n  witness: "
              << e.witness().dump() << "\n";
    return kExitSpec;
  } catch (const qh::SpecError& e) {
    std::cerr << "qh: spec error: " << e.what() << "\n";
    return kExitSpec;
  } catch (const qh::CapExceeded& e) {
    std::cerr << "qh: resource cap: " << e.what() << "\n";
    return kExitCap;
  } catch (const qh::OverflowError& e) {
    std::cerr << "qh: resource cap (int64 overflow): " << e.what() << "\n";
    return kExitCap;
  } catch (const qh::Error& e) {
    std::cerr << "qh: error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
