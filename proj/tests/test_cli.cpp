#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "cofirec/commands.hpp"
#include "cofirec/io.hpp"
#include "cofirec/run_config.hpp"

using namespace cofirec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cofirec_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Result {
  int status = -1;
  std::string err;
};

Result cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(COFIREC_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  Result r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = fs::exists(err) ? io::read_file(err) : "";
  return r;
}

std::string micro_config(const fs::path& out) {
  return "[run]\nseed = 3\nout = " + out.string() +
         "\n[corpus]\nsource = files\nn_users = 150\nn_items = 60\nn_categories = 3\n"
         "n_types_per_category = 2\nmin_session_length = 5\nmax_session_length = 8\n"
         "[featurizer]\nd_text = 16\nd_cf = 8\n"
         "[tokenizer]\ncodebook_sizes = 4,8,8,8\ncode_dim = 8\nhidden = 16\nepochs = 20\n"
         "[generator]\nd_model = 16\nn_heads = 2\nepochs = 2\nbeam_width = 10\n"
         "[eval]\nbeam_width = 10\nablation_variants = full,reverse\nablation_seeds = 1\n"
         "[theory]\ntrials = 20000\n";
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "stderr.txt")
      files[e.path().filename().string()] = io::read_file(e.path());
  return files;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults and overrides") {
    const RunConfig c = parse_config("[run]\nseed = 9\n[tokenizer]\ncodebook_sizes = 8,16,32,32\n");
    CHECK(c.seed == 9);
    CHECK(c.tokenizer.codebook_sizes == std::vector<std::size_t>{8, 16, 32, 32});
    CHECK(c.generator.beam_width == 20);
  }
  SUBCASE("unknown key names itself") {
    try {
      parse_config("[generator]\nd_modle = 3\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("generator.d_modle") != std::string::npos);
    }
  }
  SUBCASE("bad values") {
    CHECK_THROWS_AS(parse_config("[generator]\nd_model = lots\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nowhere]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[corpus]\nsource = web\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[tokenizer]\ncodebook_sizes = 8,8\n"), ConfigError);
  }
  SUBCASE("canonical form and hash") {
    const RunConfig a = parse_config("[run]\nseed = 2\n");
    const RunConfig b = parse_config("; comment\n[run]\nseed=2\n");
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    CHECK(parse_config("[run]\nseed = 3\n").hash() != a.hash());
    CHECK(parse_config(a.canonical().empty() ? "" : "[run]\nseed = 2\n").canonical() == a.canonical());
  }
  SUBCASE("seed precedence") {
    RunConfig c = parse_config("[run]\nseed = 4\n");
    ::unsetenv("COFIREC_SEED");
    resolve_seed(c, "");
    CHECK(c.seed == 4);
    ::setenv("COFIREC_SEED", "6", 1);
    resolve_seed(c, "");
    CHECK(c.seed == 6);
    CHECK(c.tokenizer.seed == 6);
    resolve_seed(c, "8");
    CHECK(c.seed == 8);
    CHECK(c.generator.seed == 8);
    ::setenv("COFIREC_SEED", "x", 1);
    CHECK_THROWS_AS(resolve_seed(c, ""), ConfigError);
    ::unsetenv("COFIREC_SEED");
  }
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  io::write_file(dir / "bad.ini", "[tokenizer]\nbogus = 1\n");
  const Result bad = cli("synth --config " + (dir / "bad.ini").string(), dir);
  CHECK(bad.status == 1);
  CHECK(bad.err.find("tokenizer.bogus") != std::string::npos);

  CHECK(cli("synth", dir).status == 1);
  CHECK(cli("frobnicate --config " + (dir / "bad.ini").string(), dir).status == 1);
  CHECK(cli("--help", dir).status == 0);

  io::write_file(dir / "ok.ini", micro_config(dir / "empty"));
  const Result missing = cli("train-tokenizer --config " + (dir / "ok.ini").string(), dir);
  CHECK(missing.status == 2);
  CHECK(missing.err.find((dir / "empty" / "items.jsonl").string()) != std::string::npos);
}

TEST_CASE("theory command") {
  const fs::path dir = scratch("theory");
  io::write_file(dir / "t.ini", micro_config(dir / "out"));
  // The default grid holds three points with p <= 1/V; they are reported and exit 2.
  const Result r = cli("theory --config " + (dir / "t.ini").string(), dir);
  CHECK(r.status == 2);
  CHECK(r.err.find("p <= 1/V at p=0.2 V=4 K=2") != std::string::npos);
  std::istringstream csv(io::read_file(dir / "out" / "theory.csv"));
  std::string line;
  std::getline(csv, line);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const bool below = line.rfind("0.2,4,", 0) == 0;
    CHECK(line.substr(line.rfind(',') + 1) == (below ? "false" : "true"));
  }
  CHECK(rows == 27);
}

TEST_CASE("pipeline end to end, twice, byte for byte") {
  const fs::path dir = scratch("pipeline");
  const fs::path out = dir / "nested" / "out";
  io::write_file(dir / "m.ini", micro_config(out));
  const std::string cfg = " --config " + (dir / "m.ini").string();
  const std::vector<std::string> stages = {"synth", "train-tokenizer", "tokenize",
                                           "train-generator", "evaluate", "ablate"};
  std::map<std::string, std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& s : stages) {
      const Result r = cli(s + cfg + " --workers 2", dir);
      INFO(s << ": " << r.err);
      REQUIRE(r.status == 0);
    }
    if (pass == 0) first = snapshot(out);
  }
  const auto second = snapshot(out);
  for (const char* name : {"items.jsonl", "interactions.jsonl", "tokenizer.ckpt", "tokenizer_curve.csv",
                           "tokens.txt", "tokenizer_analytics.csv", "generator.ckpt",
                           "generator_curve.csv", "metrics.csv", "metrics.json",
                           "recommendations.csv", "ablation.csv", "ablation.json",
                           "manifest-evaluate.json"})
    CHECK_MESSAGE(first.count(name) == 1, name);
  CHECK(first == second);

  // A seed override changes the corpus and is recorded.
  REQUIRE(cli("synth" + cfg + " --seed 11", dir).status == 0);
  CHECK(io::read_file(out / "interactions.jsonl") != first["interactions.jsonl"]);
  CHECK(io::read_file(out / "manifest-synth.json").find("\"seed\": 11") != std::string::npos);
}
