#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "qh/qh.hpp"

using namespace qh;
using nlohmann::json;

namespace {

const std::string kCli = QH_CLI_PATH;
const std::string kSamples = QH_SAMPLES_DIR;

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / "qh_test_spec";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write_temp(const std::string& name, const std::string& text) {
  auto p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

int run(const std::string& args) {
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

// Pointer of the SpecError raised by fn, or "<none>".
template <class Fn>
std::string pointer_of(Fn&& fn) {
  try {
    fn();
  } catch (const SpecError& e) {
    return e.pointer();
  }
  return "<none>";
}

}  // namespace

TEST(GroupSpec, RoundTripsEveryKind) {
  const char* docs[] = {
      R"({"kind":"free","rank":3})",
      R"({"kind":"free_abelian","rank":2})",
      R"({"kind":"abelian","moduli":[0,4]})",
      R"({"kind":"cyclic","order":6})",
      R"({"kind":"symmetric","degree":4})",
      R"({"kind":"quaternion"})",
      R"({"kind":"heisenberg","n":2})",
      R"({"kind":"finite_perm","degree":3,"generators":[[1,2,0]]})",
      R"({"kind":"finite_table","table":[[0,1],[1,0]],"generators":[1]})",
      R"({"kind":"extension","fiber":{"moduli":[2]},"base":{"kind":"cyclic","order":2},
          "cocycle":{"rule":"carry","modulus":2}})",
      R"({"kind":"extension","fiber":{"rank":1},"base":{"kind":"cyclic","order":3},
          "cocycle":{"rule":"zero"}})",
      R"({"kind":"product","factors":[{"kind":"cyclic","order":2},{"kind":"free","rank":1}]})",
  };
  for (const char* d : docs) {
    const Group g = spec::parse_group(json::parse(d));
    const Group again = spec::parse_group(g.spec());
    EXPECT_EQ(g, again) << d;
    for (const auto& x : enumerate_ball(g, 2).elements) {
      ASSERT_EQ(g.parse(g.format(x)), x);
    }
  }
}

TEST(GroupSpec, CarryOfOrderTwoIsCyclicOfOrderFour) {
  const Group e = spec::parse_group(json::parse(
      R"({"kind":"extension","fiber":{"moduli":[2]},"base":{"kind":"cyclic","order":2},
          "cocycle":{"rule":"carry","modulus":2}})"));
  EXPECT_EQ(enumerate_all(e).size(), 4u);
}

TEST(GroupSpec, ErrorsCarryPointers) {
  auto p = [](const char* text) {
    return pointer_of([&] { spec::parse_group(json::parse(text)); });
  };
  EXPECT_EQ(p(R"({"kind":"hyperbolic"})"), "/kind");
  EXPECT_EQ(p(R"({"rank":2})"), "/kind");
  EXPECT_EQ(p(R"({"kind":"free"})"), "/rank");
  EXPECT_EQ(p(R"({"kind":"free","rank":"two"})"), "/rank");
  EXPECT_EQ(p(R"({"kind":"free","rank":0})"), "/rank");
  EXPECT_EQ(p(R"({"kind":"product","factors":[{"kind":"cyclic","order":2},{"kind":"x"}]})"),
            "/factors/1/kind");
  EXPECT_EQ(p(R"({"kind":"extension","fiber":{"moduli":[0]},"base":{"kind":"cyclic","order":2},
                 "cocycle":{"rule":"bogus"}})"),
            "/cocycle/rule");
  EXPECT_EQ(p(R"({"kind":"finite_perm","degree":3,"generators":[[0,0,1]]})"), "");
  EXPECT_EQ(p(R"([1,2])"), "");
}

TEST(GroupSpec, BadCocycleTableIsRejected) {
  // w(1,1) = 1 on Z/2 with every other value 0 is the carry cocycle; making
  // w(1,0) nonzero breaks normalization.
  const char* doc = R"({"kind":"extension","fiber":{"moduli":[0]},
      "base":{"kind":"cyclic","order":2},
      "cocycle":{"rule":"table","values":[[[0],[0]],[[1],[1]]]}})";
  EXPECT_THROW(spec::parse_group(json::parse(doc)), SpecError);
  const char* good = R"({"kind":"extension","fiber":{"moduli":[0]},
      "base":{"kind":"cyclic","order":2},
      "cocycle":{"rule":"table","values":[[[0],[0]],[[0],[1]]]}})";
  EXPECT_NO_THROW(spec::parse_group(json::parse(good)));
}

TEST(MapSpec, SamplesRoundTrip) {
  for (const auto& entry : std::filesystem::directory_iterator(kSamples + "/maps")) {
    const QMap f = spec::parse_map(spec::load_file(entry.path().string()));
    const QMap g = spec::parse_map(f.spec());
    EXPECT_EQ(f.spec(), g.spec()) << entry.path();
    for (const auto& x : enumerate_ball(f.domain(), 3).elements) {
      ASSERT_EQ(f(x), g(x)) << entry.path();
    }
  }
}

TEST(MapSpec, NestedDomainsAreInherited) {
  const QMap f = spec::parse_map(spec::load_file(kSamples + "/maps/heisenberg_perturbed.json"));
  const Group f2 = free_group(2);
  EXPECT_EQ(f.domain(), f2);
  EXPECT_EQ(f.target(), heisenberg_group(1));
  // psi = Brooks("ab") adds 2 to the fiber at abab.
  const Element v = f(f2.parse("abab"));
  const auto& e = *f.target().as<ExtensionGroup>();
  EXPECT_EQ(e.project(v), Element({2, 2}));
}

TEST(MapSpec, MatchesDirectConstruction) {
  const QMap parsed = spec::parse_map(spec::load_file(kSamples + "/maps/fuv.json"));
  const Group f2 = free_group(2);
  const QMap direct =
      make_middle_uv(f2, Word::parse("aabaa", 2), Word::parse("bbabb", 2));
  for (const auto& x : enumerate_ball(f2, 5).elements) {
    ASSERT_EQ(parsed(x), direct(x));
  }
}

TEST(MapSpec, ErrorsCarryPointers) {
  auto p = [](const char* text) {
    return pointer_of([&] { spec::parse_map(json::parse(text)); });
  };
  EXPECT_EQ(p(R"({"rule":{"type":"identity"}})"), "/domain");
  EXPECT_EQ(p(R"({"domain":{"kind":"free","rank":2}})"), "/rule");
  EXPECT_EQ(p(R"({"domain":{"kind":"free","rank":2},"rule":{"type":"warp"}})"),
            "/rule/type");
  EXPECT_EQ(p(R"({"domain":{"kind":"free","rank":2},"rule":{"type":"brooks","word":"a1"}})"),
            "/rule/word");
  EXPECT_EQ(p(R"({"domain":{"kind":"free","rank":2},"rule":{"type":"brooks","word":"abA"}})"),
            "/rule");  // not cyclically reduced
  EXPECT_EQ(p(R"({"domain":{"kind":"free","rank":2},"target":{"kind":"cyclic","order":3},
                  "rule":{"type":"generator_hom","images":["#1","#5"]}})"),
            "/rule/images/1");
  EXPECT_EQ(p(R"({"domain":{"kind":"free","rank":2},"target":{"kind":"cyclic","order":3},
                  "rule":{"type":"brooks","word":"ab"}})"),
            "/target");
  EXPECT_EQ(p(R"({"domain":{"kind":"free","rank":2},"rule":{"type":"compose",
                  "inner":{"rule":{"type":"identity"}},
                  "outer":{"rule":{"type":"middle_uv","u":"ab","v":"ab"}}}})"),
            "/rule/outer/rule");
}

TEST(MapSpec, OverlapCarriesWitness) {
  try {
    spec::parse_map(json::parse(
        R"({"domain":{"kind":"free","rank":2},"rule":{"type":"middle_uv","u":"ab","v":"ba"}})"));
    FAIL() << "expected an overlap";
  } catch (const spec::WitnessError& e) {
    EXPECT_EQ(e.pointer(), "/rule");
    EXPECT_EQ(e.witness().at("segment"), "b");
    EXPECT_EQ(e.witness().at("kind"), "suffix_prefix");
  }
}

TEST(Files, SyntaxErrorHasLineAndColumn) {
  try {
    spec::parse_text("{\n  \"kind\": \"free\",\n  \"rank\" 2\n}", "g.json");
    FAIL();
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("g.json:3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(spec::load_file("/nonexistent/x.json"), SpecError);
}

TEST(Validate, ValidSpecsHaveNoDiagnostics) {
  for (const auto& entry : std::filesystem::directory_iterator(kSamples)) {
    if (entry.path().extension() != ".json") continue;
    const auto ds = experiment::validate_document(spec::load_file(entry.path().string()),
                                                  kSamples);
    EXPECT_TRUE(ds.empty()) << entry.path() << ": " << experiment::to_json(ds).dump();
  }
}

TEST(Validate, AggregatesDiagnostics) {
  const json doc = json::parse(R"({
    "experiment": "defect_scan",
    "params": {"map": {"domain": {"kind": "hyperbolic"}, "rule": {"type": "identity"}},
               "class": "sideways", "random": {"count": 5, "max_length": 2},
               "colour": 1}
  })");
  const auto ds = experiment::validate(doc);
  std::set<std::string> ptrs;
  for (const auto& d : ds) ptrs.insert(d.pointer);
  EXPECT_TRUE(ptrs.contains("/params/colour"));
  EXPECT_TRUE(ptrs.contains("/params/map/domain/kind"));
  EXPECT_TRUE(ptrs.contains("/params/class"));
  EXPECT_TRUE(ptrs.contains("/seed"));
}

TEST(Validate, UnknownExperimentAndDocuments) {
  auto ds = experiment::validate(json::parse(R"({"experiment":"nope"})"));
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].pointer, "/experiment");
  ds = experiment::validate_document(json::parse(R"({"kind":"free","rank":2})"));
  EXPECT_TRUE(ds.empty());
  ds = experiment::validate_document(json::parse(R"({"hello":1})"));
  ASSERT_EQ(ds.size(), 1u);
  ds = experiment::validate_document(json::parse(
      R"({"domain":{"kind":"free","rank":2},"rule":{"type":"middle_uv","u":"ab","v":"ba"}})"));
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].witness.at("segment"), "b");
}

TEST(Report, EnvelopeAndDeterminism) {
  const json doc = json::parse(R"({
    "experiment": "defect_scan", "seed": 7,
    "params": {"map": {"domain": {"kind": "free", "rank": 2},
                       "rule": {"type": "middle_uv", "u": "aabaa", "v": "bbabb"}},
               "class": "middle", "random": {"count": 500, "max_length": 8},
               "expect": {"max_norm_at_most": 75}}
  })");
  const auto s = experiment::parse_or_throw(doc);
  const json a = experiment::run(s).finish();
  const json b = experiment::run(s).finish();
  EXPECT_EQ(report::dump(a), report::dump(b));
  EXPECT_EQ(a.at("schema"), "qh-report/1");
  EXPECT_EQ(a.at("spec"), doc);
  EXPECT_FALSE(a.contains("timing"));
  EXPECT_TRUE(a.at("summary").at("pass").get<bool>());
  EXPECT_EQ(a.at("results").at("defects").at("enumeration").at("seed"), 7);

  json other = doc;
  other["seed"] = 8;
  const json c = experiment::run(experiment::parse_or_throw(other)).finish();
  EXPECT_NE(a.at("results"), c.at("results"));
}

TEST(Report, FailedExpectationFailsSummary) {
  const json doc = json::parse(R"({
    "experiment": "defect_scan",
    "params": {"map": {"domain": {"kind": "free", "rank": 2},
                       "rule": {"type": "middle_uv", "u": "aabaa", "v": "bbabb"}},
               "radius": 3, "expect": {"max_norm_at_most": 4}}
  })");
  const auto b = experiment::run(experiment::parse_or_throw(doc));
  EXPECT_FALSE(b.pass());
  EXPECT_FALSE(b.finish().at("summary").at("pass").get<bool>());
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("experiment " + kSamples + "/quasisplit_carry2.json"), 0);
  EXPECT_EQ(run("experiment " + kSamples + "/invalid/overlap.json"), 3);
  EXPECT_EQ(run("experiment " + kSamples + "/invalid/unknown_kind.json"), 3);
  EXPECT_EQ(run("experiment " + kSamples + "/invalid/missing_seed.json"), 3);
  EXPECT_EQ(run("validate " + kSamples + "/invalid/overlap.json"), 3);
  EXPECT_EQ(run("validate " + kSamples + "/decompose_q8.json"), 0);
  EXPECT_EQ(run("defect --map " + kSamples + "/maps/fuv.json --radius 12"), 4);
  EXPECT_EQ(run("nosuchcommand"), 3);

  const std::string failing = write_temp("failing.json", R"({
    "experiment": "defect_scan",
    "params": {"map": {"domain": {"kind": "free", "rank": 2},
                       "rule": {"type": "middle_uv", "u": "aabaa", "v": "bbabb"}},
               "radius": 3, "expect": {"max_norm_at_most": 4}}
  })");
  EXPECT_EQ(run("experiment " + failing), 2);
}

TEST(Cli, ReportsAreByteIdentical) {
  const auto dir = scratch();
  const std::string a = (dir / "a.json").string();
  const std::string b = (dir / "b.json").string();
  ASSERT_EQ(run("experiment " + kSamples + "/defect_scan_random.json --out " + a), 0);
  ASSERT_EQ(run("experiment " + kSamples + "/defect_scan_random.json --out " + b), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  ASSERT_EQ(run("decompose --map " + kSamples + "/maps/s3_hom.json --radius 3 --out " + a), 0);
  ASSERT_EQ(run("decompose --map " + kSamples + "/maps/s3_hom.json --radius 3 --out " + b), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  ASSERT_EQ(run("experiment " + kSamples + "/hs_probe.json --timing --out " + a), 0);
  EXPECT_TRUE(json::parse(slurp(a)).contains("timing"));
}

TEST(Cli, EvalAndDefect) {
  const auto out = (scratch() / "eval.json").string();
  ASSERT_EQ(run("eval --map " + kSamples + "/maps/fuv.json --word aabaa --word aa --out " + out), 0);
  const json r = json::parse(slurp(out));
  EXPECT_EQ(r.at("results").at("values").at(0).at("value"), "aabaa");
  EXPECT_EQ(r.at("results").at("values").at(1).at("value"), "1");
  EXPECT_EQ(run("eval --map " + kSamples + "/maps/fuv.json --word a1"), 3);

  const auto grp = write_temp("z4.json", R"({"kind":"cyclic","order":5})");
  ASSERT_EQ(run("eval --group " + grp + " --element '#3' --out " + out), 0);
  EXPECT_EQ(json::parse(slurp(out)).at("results").at("values").at(0).at("norm"), 2);

  ASSERT_EQ(run("defect --map " + kSamples + "/maps/fuv.json --class ulam --radius 3 --out " + out), 0);
  const json d = json::parse(slurp(out)).at("results").at("defects");
  EXPECT_EQ(d.at("class"), "ulam");
  EXPECT_EQ(d.at("radius_table").size(), 4u);
  EXPECT_EQ(d.at("defects").size(), d.at("distinct"));
  EXPECT_TRUE(d.contains("max_norm"));
  EXPECT_TRUE(d.contains("witnesses"));
}
