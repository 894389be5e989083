#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "jmd/io.hpp"
#include "jmd/rank.hpp"
#include "jmd/synthetic.hpp"
#include "support.hpp"

using namespace jmd;
using jmd::testing::Gen;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run jmd_cli(const std::string& args) {
  const std::string cmd = std::string(JMD_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Run r;
  char buf[4096];
  size_t got = 0;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("jmd_cli_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name, const std::string& contents) const {
    io::write_file_atomic(path / name, contents);
    return (path / name).string();
  }
  std::string str(const std::string& name) const { return (path / name).string(); }
  fs::path path;
};

// Faster than the defaults; the CLI round trips do not depend on the values.
const char* kQuickConfig = "bridge_solver = explicit\nT1 = 3\nT2 = 3\n";

}  // namespace

TEST_CASE("eval examples") {
  TempDir d;
  const std::string pred = d.file("p.txt", "3\n2\n1\n");
  const Run ok = jmd_cli("eval --pred " + pred + " --pairs " + d.file("pairs.txt", "0,1\n1,2\n"));
  CHECK(ok.code == 0);
  CHECK(ok.out == "accuracy=1\n");

  const Run half = jmd_cli("eval --pred " + d.file("q.txt", "1\n1\n0\n") + " --pairs " + d.file("h.txt", "0,1\n0,2\n"));
  CHECK(half.out == "accuracy=0.5\n");

  CHECK(jmd_cli("eval --pred " + pred + " --pairs " + d.file("empty.txt", "")).code == 4);
  CHECK(jmd_cli("eval --pred " + pred + " --pairs " + d.file("bad.txt", "0,9\n")).code == 4);
  CHECK(jmd_cli("eval --pred " + pred + " --pairs " + d.file("junk.txt", "0;1\n")).code == 4);
  CHECK(jmd_cli("eval --pred " + d.str("missing.txt") + " --pairs " + d.str("pairs.txt")).code == 2);
  CHECK(jmd_cli("eval --pred " + pred).code == 3);
  CHECK(jmd_cli("frobnicate").code == 3);
}

TEST_CASE("eval agrees with the library on random files") {
  TempDir d;
  for (int c = 0; c < 25; ++c) {
    Gen g(jmd::testing::case_seed(101, c));
    const Index n = g.integer(2, 50);
    Vector pred = g.vector(n);
    if (c % 3 == 0)
      for (Index i = 0; i < n; ++i) pred[i] = std::round(pred[i]);
    RankPairs pairs{{}, n};
    for (int t = g.integer(1, 60); t > 0; --t) {
      const Index i = g.integer(0, static_cast<int>(n) - 1), j = (i + g.integer(1, static_cast<int>(n) - 1)) % n;
      pairs.pairs.emplace_back(i, j);
    }
    const Run r = jmd_cli("eval --pred " + d.file("p.txt", io::predictions_text(pred)) + " --pairs " +
                          d.file("r.txt", io::pairs_text(pairs.pairs)));
    CHECK(r.out == "accuracy=" + io::format_shortest(ranking_accuracy(pred, pairs)) + "\n");
  }
}

TEST_CASE("train examples") {
  TempDir d;
  const std::string feat = d.file("x.csv", "0\n1\n");
  const std::string pairs = d.file("p.txt", "1,0\n");
  const Run r = jmd_cli("train --feat " + feat + " --pairs " + pairs + " --val-pairs " + pairs + " --out " + d.str("out.txt"));
  CHECK(r.code == 0);
  CHECK(r.out == "accuracy=1\n");
  const Vector out = io::read_predictions(d.path / "out.txt");
  CHECK(out[1] > out[0]);
  const std::string first = slurp(d.path / "out.txt");
  jmd_cli("train --feat " + feat + " --pairs " + pairs + " --val-pairs " + pairs + " --out " + d.str("out.txt"));
  CHECK(slurp(d.path / "out.txt") == first);

  CHECK(jmd_cli("train --feat " + feat + " --pairs " + pairs + " --out " + d.str("o.txt")).code == 4);  // grid without validation
  CHECK(jmd_cli("train --feat " + feat + " --pairs " + d.file("e.txt", "") + " --lambda 1 --out " + d.str("o.txt")).code == 4);
}

TEST_CASE("train matches the library trainer exactly") {
  TempDir d;
  Gen g(102);
  const Index n = 60;
  const Matrix x = g.matrix(n, 4);
  const Vector truth = x * g.vector(4);
  RankPairs train{{}, n}, val{{}, n};
  for (int t = 0; t < 150; ++t) {
    const Index i = g.integer(0, n - 1), j = g.integer(0, n - 1);
    if (i == j) continue;
    (t % 3 ? train : val).pairs.emplace_back(truth[i] > truth[j] ? i : j, truth[i] > truth[j] ? j : i);
  }
  const Run r = jmd_cli("train --feat " + d.file("x.csv", io::features_text(x)) + " --pairs " + d.file("t.txt", io::pairs_text(train.pairs)) +
                        " --val-pairs " + d.file("v.txt", io::pairs_text(val.pairs)) + " --out " + d.str("out.txt"));
  REQUIRE(r.code == 0);
  const LinearRanker lib = train_linear_ranker(io::read_features(d.path / "x.csv"), train, kDefaultLambdaGrid, val);
  CHECK(slurp(d.path / "out.txt") == io::predictions_text(lib.predict(x)));
}

TEST_CASE("diffuse arity, shape and config errors") {
  TempDir d;
  const std::string mp = d.file("mp.txt", "1\n2\n3\n4\n"), mf = d.file("mf.csv", "0\n1\n2\n3\n");
  const std::string val = d.file("val.txt", "3,0\n2,1\n");
  const std::string base = "diffuse --main-pred " + mp + " --main-feat " + mf + " --val-pairs " + val + " --out " + d.str("o.txt");

  const std::string none = std::string(JMD_CLI_PATH) + " " + base + " 2>&1";
  FILE* pipe = popen(none.c_str(), "r");
  char buf[512] = {};
  const size_t got = fread(buf, 1, sizeof buf - 1, pipe);
  CHECK(WEXITSTATUS(pclose(pipe)) == 4);
  CHECK(std::string(buf, got).find("at least one reference required") != std::string::npos);

  const std::string ref = " --ref-pred " + mp + " --ref-feat " + mf + " --couple " + d.file("c.txt", "0,0\n1,1\n2,2\n3,3\n");
  CHECK(jmd_cli(base + ref + " --config " + d.file("k.txt", "N = 2\n")).code == 0);

  const std::string shortfeat = d.file("short.csv", "0\n1\n2\n");
  CHECK(jmd_cli("diffuse --main-pred " + mp + " --main-feat " + shortfeat + " --val-pairs " + val + " --out " + d.str("o.txt") + ref).code ==
        4);
  CHECK(jmd_cli(base + " --ref-pred " + mp + " --ref-feat " + mf + " --couple " + d.file("bad.txt", "0,9\n")).code == 4);
  CHECK(jmd_cli(base + ref + " --config " + d.file("bad.cfg", "sigma2 = -3\n")).code == 3);
  CHECK(jmd_cli(base + ref + " --config " + d.str("absent.cfg")).code == 2);
}

TEST_CASE("diffuse: a fully coupled copy of the main predictor is a fixed point") {
  TempDir d;
  Gen g(103);
  const Index n = 30;
  const Vector f = g.nonconstant(n);
  const std::string mp = d.file("mp.txt", io::predictions_text(f)), mf = d.file("mf.csv", io::features_text(g.matrix(n, 2)));
  std::string couple;
  for (Index i = 0; i < n; ++i) couple += std::to_string(i) + "," + std::to_string(i) + "\n";
  const Run r = jmd_cli("diffuse --main-pred " + mp + " --main-feat " + mf + " --ref-pred " + mp + " --ref-feat " + mf + " --couple " +
                        d.file("c.txt", couple) + " --val-pairs " + d.file("v.txt", "0,1\n2,3\n4,5\n") + " --config " +
                        d.file("k.txt", "N = 4\ndelta = 5\n") + " --out " + d.str("o.txt"));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("accuracy=", 0) == 0);
  const double rho = manifold_metric(io::read_predictions(d.path / "o.txt"), f);
  CHECK(rho * rho >= 1.0 - 1e-8);
}

TEST_CASE("synth writes matrices and heatmaps deterministically") {
  TempDir d;
  const std::string cfg = d.file("quick.cfg", kQuickConfig);
  const Run a = jmd_cli("synth --seed 42 --heatmap --config " + cfg + " --out " + d.str("a"));
  const Run b = jmd_cli("synth --seed 42 --heatmap --config " + cfg + " --out " + d.str("b"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  for (const char* name : {"gt.csv", "initial.csv", "refined.csv", "gt.pgm", "initial.pgm", "refined.pgm"}) {
    INFO(name);
    CHECK(slurp(d.path / "a" / name) == slurp(d.path / "b" / name));
  }
  const Matrix gt = io::read_features(d.path / "a" / "gt.csv");
  CHECK(gt.rows() == 12);
  CHECK(gt.cols() == 12);
  CHECK(slurp(d.path / "a" / "gt.pgm").substr(0, 11) == "P5\n12 12\n25");

  CHECK(jmd_cli("synth --seed 1 --config " + d.file("bad.cfg", "T1 = x\n") + " --out " + d.str("c")).code == 3);
  CHECK(jmd_cli("synth --seed 1 --config " + cfg + " --out /proc/definitely/not/here").code == 2);
}

TEST_CASE("exported synthetic task diffused through the CLI equals the library result bit-exactly") {
  TempDir d;
  const std::string cfg = d.file("quick.cfg", kQuickConfig);
  REQUIRE(jmd_cli("synth --seed 11 --config " + cfg + " --export-task 0 --out " + d.str("s")).code == 0);
  const fs::path t = d.path / "s" / "task0";
  std::string args = "diffuse --main-pred " + (t / "main_pred.txt").string() + " --main-feat " + (t / "main_feat.csv").string() +
                     " --val-pairs " + (t / "val_pairs.txt").string() + " --config " + (t / "config.txt").string() + " --out " +
                     d.str("refined.txt");
  for (int k = 0; k < 11; ++k) {
    const std::string stem = (t / ("ref" + std::to_string(k))).string();
    args += " --ref-pred " + stem + "_pred.txt --ref-feat " + stem + "_feat.csv --couple " + stem + "_couple.txt";
  }
  const Run r = jmd_cli(args);
  REQUIRE(r.code == 0);

  ToyConfig toy;
  toy.seed = 11;
  const ProblemInstance inst = toy_problem(generate_toy_world(toy), 0);
  const JointResult lib = run_joint_diffusion(inst, io::parse_config(kQuickConfig));
  CHECK(io::read_predictions(d.path / "refined.txt") == lib.refined);
  CHECK(r.out == "accuracy=" + io::format_shortest(ranking_accuracy(lib.refined, inst.validation)) + "\n");
}
