#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "config.hpp"
#include "psicalc/io.hpp"
#include "psicalc/projection.hpp"
#include "scenario.hpp"

using namespace psicalc;
using namespace psicalc::cli;

namespace {

int exit_status(const std::string& command) {
  const int raw = std::system(command.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string temp_config(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path.string();
}

Outcome run_text(const std::string& text) { return run_scenario(load_scenario(Config::parse_string(text, "test.cfg"))); }

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("syntax errors carry the line number") {
    try {
      Config::parse_string("[scenario]\nname = a\nthis line has no equals\n", "bad.cfg");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("bad.cfg:3") != std::string::npos);
    }
  }

  TEST_CASE("unknown keys are rejected with their line") {
    try {
      load_scenario(Config::parse_string("[scenario]\nname = a\n[field]\nepsilonn = 0.1\n", "typo.cfg"));
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 4);
      CHECK(std::string(e.what()).find("epsilonn") != std::string::npos);
    }
  }

  TEST_CASE("a random field without a seed is a config error") {
    const std::string text = "[scenario]\nname = s\nchecks = pi0\n[field]\nepsilon = 0.2\n";
    try {
      load_scenario(Config::parse_string(text, "noseed.cfg"));
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("field.seed") != std::string::npos);
    }
    const auto path = temp_config("psicalc_noseed.cfg", text);
    CHECK(exit_status(std::string(PSICALC_BIN) + " run " + path + " > /dev/null 2>&1") == kExitConfig);
  }

  TEST_CASE("canonical form ignores comments and layout") {
    const auto a = Config::parse_string("[field]\nseed = 3\nepsilon = 0.1\n[scenario]\nname = x\n", "a");
    const auto b = Config::parse_string("# comment\n[scenario]\n  name=x   # trailing\n\n[field]\nepsilon = 0.1\nseed = 3\n", "b");
    CHECK(a.canonical() == b.canonical());
    CHECK(fnv1a64(a.canonical()) == fnv1a64(b.canonical()));
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  }

  TEST_CASE("builtin configs load") {
    for (const char* name : {"lemma_a1", "vanishing_n1", "vanishing_n2"})
      CHECK_NOTHROW(load_scenario(Config::parse_string(builtin_config(name), name)));
  }
}

TEST_SUITE("report") {
  TEST_CASE("an empty check list writes the header only") {
    const auto out = run_text("[scenario]\nname = empty\n");
    CHECK(out.exit_code == kExitPass);
    REQUIRE(out.report.sections().size() == 1);
    CHECK(out.report.sections()[0].first == "meta");
    const auto text = out.report.render();
    for (const char* key : {"tool = ", "tool_version = ", "config = ", "config_hash = fnv1a64:", "timestamp = "})
      CHECK(text.find(key) != std::string::npos);
  }

  TEST_CASE("residue check reports every component and is reproducible") {
    const std::string text =
        "[scenario]\nname = r\nchecks = residue\n[manifold]\ndim = 1\ngrid = 32\n"
        "[field]\nepsilon = 0.2\nbandwidth = 1\nhalf_width = 1.0\nseed = 4\n[projection]\norder = 2\n";
    const auto a = run_text(text);
    const auto b = run_text(text);
    CHECK(a.exit_code == kExitPass);
    const auto body = strip_timestamp(a.report.render());
    for (const char* key : {"[check.residue]", "interior = ", "boundary_green = ", "boundary_psdo = ", "total = ",
                            "closed_interior = ", "bitwise_equal = true", "status = pass"})
      CHECK(body.find(key) != std::string::npos);
    CHECK(body.find("timestamp") == std::string::npos);
    CHECK(body == strip_timestamp(b.report.render()));
  }

  TEST_CASE("numerical refusals exit with the refusal code") {
    const auto out = run_text(
        "[scenario]\nname = r\nchecks = residue\n[manifold]\ndim = 2\ngrid = 16\ndirections = 16\n"
        "[field]\nepsilon = 0\nhalf_width = 0.7\n[projection]\norder = 1\n");
    CHECK(out.exit_code == kExitRefused);
    const auto text = out.report.render();
    CHECK(text.find("[refusal]") != std::string::npos);
    CHECK(text.find("kind = rejected_input") != std::string::npos);
    CHECK(text.find("status = refused") != std::string::npos);
  }

  TEST_CASE("CLI run writes identical bodies twice") {
    const auto dir = std::filesystem::temp_directory_path() / "psicalc_cli_test";
    std::filesystem::remove_all(dir);
    const std::string cmd = std::string(PSICALC_BIN) + " --out " + dir.string() + " run " + PSICALC_SCENARIOS +
                            "/lemma_a1.cfg > /dev/null 2>&1";
    REQUIRE(exit_status(cmd) == kExitPass);
    std::stringstream first;
    first << std::ifstream(dir / "lemma_a1.report").rdbuf();
    REQUIRE(exit_status(cmd) == kExitPass);
    std::stringstream second;
    second << std::ifstream(dir / "lemma_a1.report").rdbuf();
    CHECK(!first.str().empty());
    CHECK(strip_timestamp(first.str()) == strip_timestamp(second.str()));
  }

  TEST_CASE("unknown subcommand is a usage error") {
    CHECK(exit_status(std::string(PSICALC_BIN) + " frobnicate > /dev/null 2>&1") == kExitConfig);
  }
}

TEST_SUITE("symbol io") {
  TEST_CASE("JSON round trip keeps every value") {
    auto m = ModelManifold::torus(8, 8);
    const auto p = band_limited_symbol(m, 1, 2, 2, 1, 1, 9);
    const auto q = symbol_from_json(symbol_to_json(p));
    REQUIRE(q.terms().size() == p.terms().size());
    CHECK(q.fiber() == 2);
    CHECK(q.manifold()->grid() == 8);
    for (std::size_t j = 0; j < p.terms().size(); ++j) {
      CHECK(q.terms()[j].degree() == p.terms()[j].degree());
      for (int pt = 0; pt < m->points(); ++pt)
        for (int d = 0; d < m->directions(); ++d) CHECK(q.terms()[j].value(pt, d) == p.terms()[j].value(pt, d));
    }
  }

  TEST_CASE("malformed JSON is rejected") {
    CHECK_THROWS_AS(symbol_from_json("{\"format\": \"other\"}"), RejectedInput);
    CHECK_THROWS(symbol_from_json("not json"));
  }
}
