#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "error.hpp"

using namespace ivy;

namespace {

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kFail;
}

}  // namespace

TEST_CASE("defaults come from the registry") {
  Config cfg;
  CHECK(cfg.get_u64("run.seed") == 1);
  CHECK(cfg.get_double("train.lr") == doctest::Approx(3e-4));
  CHECK(cfg.get_int("train.epochs") == 200);
  CHECK(cfg.get_bool("run.paired"));
  CHECK(cfg.get_str("paths.dataset") == "out/dataset.ivd");
  std::vector<std::string> pool = cfg.get_list("run.pool");
  REQUIRE(pool.size() == 3);
  CHECK(pool[0] == "safe_filter");
  CHECK(pool[1] == "probe_max");
  CHECK(pool[2] == "loss_tolerant");
  std::vector<double> iv = cfg.get_double_list("run.ablate_intervals");
  REQUIRE(iv.size() == 4);
  CHECK(iv[0] == doctest::Approx(1.2));
  CHECK(iv[3] == doctest::Approx(6.0));
}

TEST_CASE("set accepts both forms and rejects unknown keys") {
  Config cfg;
  cfg.set("run.seed=42");
  CHECK(cfg.get_u64("run.seed") == 42);
  cfg.set("run.seed", "43");
  CHECK(cfg.get_u64("run.seed") == 43);
  cfg.set(" train.lr = 0.01 ");  // assignment form trims
  CHECK(cfg.get_double("train.lr") == doctest::Approx(0.01));
  CHECK(code_of([&] { cfg.set("run.sede=1"); }) == Errc::kConfig);
  CHECK(code_of([&] { cfg.set("no-equals-sign"); }) == Errc::kConfig);
  CHECK(code_of([&] { cfg.get_str("nope.nope"); }) == Errc::kConfig);
}

TEST_CASE("typed getters validate their parses") {
  Config cfg;
  cfg.set("train.lr", "fast");
  CHECK(code_of([&] { cfg.get_double("train.lr"); }) == Errc::kConfig);
  cfg.set("train.epochs", "1.5");
  CHECK(code_of([&] { cfg.get_int("train.epochs"); }) == Errc::kConfig);
  cfg.set("train.epochs", "-3");
  CHECK(cfg.get_int("train.epochs") == -3);
  cfg.set("run.seed", "12x");
  CHECK(code_of([&] { cfg.get_u64("run.seed"); }) == Errc::kConfig);
  cfg.set("run.paired", "0");
  CHECK_FALSE(cfg.get_bool("run.paired"));
  cfg.set("run.paired", "yes");
  CHECK(code_of([&] { cfg.get_bool("run.paired"); }) == Errc::kConfig);
  cfg.set("run.pool", " a , b ,, c ");
  std::vector<std::string> got = cfg.get_list("run.pool");
  REQUIRE(got.size() == 3);
  CHECK(got[1] == "b");
  cfg.set("run.ablate_intervals", "1,two");
  CHECK(code_of([&] { cfg.get_double_list("run.ablate_intervals"); }) ==
        Errc::kConfig);
}

TEST_CASE("config files support sections and comments") {
  const char* path = "test_config_tmp.ini";
  spit(path,
       "# top comment\n"
       "run.seed = 99\n"
       "[train]\n"
       "epochs = 7   # trailing comment\n"
       "lr=0.002\n"
       "run.eval_calls = 5\n"
       "[eval]\n"
       "jitter_threshold = 30\n");
  Config cfg;
  cfg.load_file(path);
  CHECK(cfg.get_u64("run.seed") == 99);
  CHECK(cfg.get_int("train.epochs") == 7);
  CHECK(cfg.get_double("train.lr") == doctest::Approx(0.002));
  // a qualified key inside a section bypasses the section prefix
  CHECK(cfg.get_int("run.eval_calls") == 5);
  CHECK(cfg.get_double("eval.jitter_threshold") == doctest::Approx(30));
  std::remove(path);
}

TEST_CASE("config file errors carry the offending line") {
  const char* path = "test_config_tmp.ini";
  Config cfg;
  CHECK(code_of([&] { cfg.load_file("no_such.ini"); }) == Errc::kMissingInput);

  spit(path, "[run\nseed = 1\n");
  try {
    cfg.load_file(path);
    FAIL_CHECK("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kConfig);
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }

  spit(path, "run.seed = 1\njust words\n");
  try {
    cfg.load_file(path);
    FAIL_CHECK("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  spit(path, "[run]\nsede = 1\n");
  CHECK(code_of([&] { cfg.load_file(path); }) == Errc::kConfig);
  std::remove(path);
}

TEST_CASE("dump lists every key in registry order") {
  Config cfg;
  cfg.set("run.seed", "5");
  std::string out = cfg.dump();
  CHECK(out.find("run.seed = 5\n") != std::string::npos);
  CHECK(out.rfind("paths.traces = out/traces\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : out) lines += c == '\n';
  CHECK(lines == Config::keys().size());
}
