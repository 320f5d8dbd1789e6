#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "pml/io.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using pml::cli::run;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("pml_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

int quiet(const std::vector<std::string>& args) {
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  auto* olderr = std::cerr.rdbuf(sink.rdbuf());
  const int code = run(args);
  std::cout.rdbuf(old);
  std::cerr.rdbuf(olderr);
  return code;
}

// Koch level 2 with a mesh coarse enough for a unit test.
void pipeline(const TempDir& t, const std::string& tag, double p) {
  REQUIRE(quiet({"domain", "--kind", "koch", "--level", "2", "--out", t / "dom.json"}) == 0);
  REQUIRE(quiet({"solve", "--domain", t / "dom.json", "--p", pml::format_double(p), "--h", "0.03", "--out",
                 t / ("field" + tag + ".phf")}) == 0);
  REQUIRE(quiet({"measure", "--field", t / ("field" + tag + ".phf"), "--arcs", "4096", "--out",
                 t / ("mu" + tag + ".csv")}) == 0);
  REQUIRE(quiet({"dimension", "--measure", t / ("mu" + tag + ".csv"), "--samples", "40", "--seed", "5", "--out",
                 t / ("dim" + tag + ".json")}) == 0);
}

}  // namespace

TEST_CASE("pipeline writes a dimension report with a weighted median") {
  TempDir t("pipeline");
  pipeline(t, "", 2.0);
  const auto j = nlohmann::json::parse(pml::read_file(t / "dim.json"));
  CHECK(j.contains("weighted_median"));
  CHECK(j["samples"].size() == 40);
  CHECK(j["provenance"]["domain"].get<std::string>().size() == 16);
}

TEST_CASE("reruns are byte-identical") {
  TempDir t("determinism");
  pipeline(t, "_a", 1.5);
  pipeline(t, "_b", 1.5);
  CHECK(pml::read_file(t / "field_a.phf") == pml::read_file(t / "field_b.phf"));
  CHECK(pml::read_file(t / "mu_a.csv") == pml::read_file(t / "mu_b.csv"));
  CHECK(pml::read_file(t / "dim_a.json") == pml::read_file(t / "dim_b.json"));
}

TEST_CASE("exit codes follow the error category") {
  TempDir t("exit");
  CHECK(quiet({}) == 1);
  CHECK(quiet({"solve", "--no-such-flag"}) == 1);
  CHECK(quiet({"solve", "--domain", t / "missing.json"}) == 1);
  REQUIRE(quiet({"domain", "--kind", "koch", "--level", "1", "--out", t / "dom.json"}) == 0);
  CHECK(quiet({"solve", "--domain", t / "dom.json", "--p", "0.5"}) == 1);
  // A bow tie is not a Jordan curve.
  CHECK(quiet({"domain", "--kind", "polygon", "--vertices", "0,0 1,1 1,0 0,1", "--out", t / "bow.json"}) == 2);
  CHECK(quiet({"--help"}) == 0);
}

TEST_CASE("report builds a bundle and refuses mixed provenance") {
  TempDir t("report");
  pipeline(t, "", 2.0);
  REQUIRE(quiet({"verify", "flux", "--field", t / "field.phf", "--measure", t / "mu.csv", "--levels", "0.3,0.6",
                 "--out", t / "flux.json"}) == 0);
  REQUIRE(quiet({"report", "--all", t.path.string(), "--out", t / "bundle"}) == 0);
  for (const char* f : {"verdicts.csv", "manifest.csv", "level_flux.svg", "localdim_hist_p2.svg", "koebe_scatter.svg"})
    CHECK(fs::exists(t.path / "bundle" / f));
  const std::string verdicts = pml::read_file(t / "bundle/verdicts.csv");
  CHECK(verdicts.find("measure.level_flux_conservation") != std::string::npos);
  CHECK(pml::read_file(t / "bundle/koebe_scatter.svg").find("no data") != std::string::npos);

  fs::create_directories(t.path / "other");
  REQUIRE(quiet({"domain", "--kind", "regular_ngon", "--n", "32", "--out", t / "other/dom.json"}) == 0);
  CHECK(quiet({"report", "--all", t.path.string(), "--out", t / "bundle2"}) == 1);
  CHECK_FALSE(fs::exists(t.path / "bundle2" / "verdicts.csv"));
}

TEST_CASE("svg helpers") {
  CHECK(pml::svg::sturges_bins(1) == 1);
  CHECK(pml::svg::sturges_bins(500) == 10);
  CHECK(pml::svg::sturges_bins(1024) == 11);
  const std::string h = pml::svg::histogram({1.0, 2.0, 2.5, 3.0}, {"t", "x (m)", "", "hash abc"});
  CHECK(h.find("<rect") != std::string::npos);
  CHECK(h.find("hash abc") != std::string::npos);
  CHECK(pml::svg::plot({}, {"t", "x", "y", "f"}).find("no data") != std::string::npos);
}
