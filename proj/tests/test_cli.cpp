// Copyright 2026 The ACD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "acd/cli.hpp"
#include "acd/codec.hpp"
#include "acd/policy.hpp"
#include "acd/trajectory.hpp"

using namespace acd;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "acd");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("acd_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string kv(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

}  // namespace

TEST_CASE("usage errors exit 2 and help exits 0") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"bogus"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"simulate", "--help"}).code == kExitOk);
  CHECK(cli({"simulate", "--fm", "abc"}).code == kExitUsage);
  const auto r = cli({"gen-data", "--kind", "nope", "--out", scratch("kind").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("nope") != std::string::npos);
  CHECK(cli({"gen-data", "--count", "5"}).code == kExitUsage);  // no --out
  CHECK(cli({"gen-data", "--config", "/nonexistent/cfg.txt"}).code == kExitUsage);
}

TEST_CASE("gen-data writes a loadable dataset and reruns are byte-identical") {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  for (const auto& dir : {a, b}) {
    const auto r = cli({"gen-data", "--count", "100", "--length", "30", "--seed", "4", "--csv",
                        "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
  }
  const Dataset d = read_traj(a / "data.traj");
  CHECK(d.size() == 100);
  for (const auto& t : d) CHECK(t.length() == 30);
  CHECK(slurp(a / "data.traj") == slurp(b / "data.traj"));
  CHECK(slurp(a / "data.csv") == slurp(b / "data.csv"));
  auto without_out = [](std::string text) {
    const auto at = text.find("\nout=");
    return text.erase(at, text.find('\n', at + 1) - at);
  };
  CHECK(without_out(slurp(a / "config.txt")) == without_out(slurp(b / "config.txt")));
  CHECK(kv(slurp(a / "config.txt"), "seed") == "4");
}

TEST_CASE("config file provides defaults and command-line flags win") {
  const fs::path dir = scratch("layer");
  {
    std::ofstream cfg(dir / "cfg.txt");
    cfg << "# defaults\ncount = 3\nlength=12\nseed=9\n";
  }
  const auto r = cli({"gen-data", "--config", (dir / "cfg.txt").string(), "--count", "2",
                      "--out", (dir / "o").string()});
  REQUIRE(r.code == kExitOk);
  const Dataset d = read_traj(dir / "o" / "data.traj");
  CHECK(d.size() == 2);
  CHECK(d[0].length() == 12);
  const std::string echo = slurp(dir / "o" / "config.txt");
  CHECK(kv(echo, "count") == "2");
  CHECK(kv(echo, "seed") == "9");
  {
    std::ofstream bad(dir / "bad.txt");
    bad << "no equals sign\n";
  }
  CHECK(cli({"gen-data", "--config", (dir / "bad.txt").string(), "--out", dir.string()}).code ==
        kExitUsage);
}

TEST_CASE("train-codec: missing data, zero steps, determinism") {
  const fs::path dir = scratch("train");
  const auto missing = cli({"train-codec", "--data", (dir / "nope.traj").string(), "--out",
                            dir.string()});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find((dir / "nope.traj").string()) != std::string::npos);

  REQUIRE(cli({"gen-data", "--count", "6", "--length", "40", "--out", (dir / "d").string()}).code ==
          kExitOk);
  const std::string data = (dir / "d" / "data.traj").string();
  const std::vector<std::string> small{"--hidden", "8", "--latent-dim", "4", "--codebook-size",
                                       "16", "--batch-size", "8"};
  auto train = [&](const std::string& out, const std::string& steps) {
    std::vector<std::string> a{"train-codec", "--data", data, "--out", out, "--steps", steps,
                               "--log-every", "10"};
    a.insert(a.end(), small.begin(), small.end());
    return cli(a);
  };

  REQUIRE(train((dir / "zero").string(), "0").code == kExitOk);
  const Codec zero = Codec::load(dir / "zero" / "codec.ckpt");
  const Codec init(zero.config());
  const auto p0 = zero.parameters(), p1 = init.parameters();
  for (std::size_t i = 0; i < p0.size(); ++i)
    CHECK(bitwise_equal(p0[i].var.value(), p1[i].var.value()));
  CHECK(zero.codebook() == init.codebook());
  CHECK(zero.meta().steps == 0);

  REQUIRE(train((dir / "r1").string(), "30").code == kExitOk);
  REQUIRE(train((dir / "r2").string(), "30").code == kExitOk);
  CHECK(slurp(dir / "r1" / "codec.ckpt") == slurp(dir / "r2" / "codec.ckpt"));
  CHECK(slurp(dir / "r1" / "loss.csv") == slurp(dir / "r2" / "loss.csv"));
  CHECK(Codec::load(dir / "r1" / "codec.ckpt").meta().steps == 30);
  CHECK(kv(slurp(dir / "r1" / "config.txt"), "steps") == "30");

  CHECK(train((dir / "bad").string(), "-3").code == kExitUsage);
  std::vector<std::string> bad_pool{"train-codec", "--data", data, "--out",
                                    (dir / "bad").string(), "--pool-factor", "0"};
  CHECK(cli(bad_pool).code == kExitUsage);
}

TEST_CASE("eval-codec: converged codec on its training data exceeds 25 dB") {
  const fs::path dir = scratch("eval");
  REQUIRE(cli({"gen-data", "--count", "10", "--length", "100", "--seed", "1", "--out",
               (dir / "d").string()})
              .code == kExitOk);
  const std::string data = (dir / "d" / "data.traj").string();
  REQUIRE(cli({"train-codec", "--data", data, "--out", (dir / "c").string(), "--steps", "2000",
               "--lr", "1e-3", "--log-every", "500"})
              .code == kExitOk);
  const auto r = cli({"eval-codec", "--codec", (dir / "c" / "codec.ckpt").string(), "--data", data,
                      "--out", (dir / "e").string()});
  REQUIRE(r.code == kExitOk);
  const double psnr = std::stod(kv(r.out, "psnr_db"));
  INFO("psnr " << psnr);
  CHECK(psnr > 25.0);
  CHECK(fs::exists(dir / "e" / "eval.csv"));
  CHECK(fs::exists(dir / "e" / "report-0.txt"));
}

TEST_CASE("eval-codec: one row per checkpoint across chunk lengths") {
  const fs::path dir = scratch("eval_rows");
  REQUIRE(cli({"gen-data", "--count", "5", "--length", "40", "--out", (dir / "d").string()}).code ==
          kExitOk);
  const std::string data = (dir / "d" / "data.traj").string();
  std::vector<std::string> ev{"eval-codec", "--data", data, "--out", (dir / "e").string()};
  for (const std::string n : {"1", "5", "10"}) {
    REQUIRE(cli({"train-codec", "--data", data, "--out", (dir / ("n" + n)).string(), "--steps",
                 "5", "--chunk-len", n, "--hidden", "8", "--latent-dim", "4", "--batch-size", "4"})
                .code == kExitOk);
    ev.push_back("--codec");
    ev.push_back((dir / ("n" + n) / "codec.ckpt").string());
  }
  REQUIRE(cli(ev).code == kExitOk);
  const std::string csv = slurp(dir / "e" / "eval.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("N=1") != std::string::npos);
  CHECK(csv.find("N=10") != std::string::npos);
}

TEST_CASE("corrupted checkpoint exits 2 with an integrity message") {
  const fs::path dir = scratch("corrupt");
  REQUIRE(cli({"gen-data", "--count", "3", "--length", "20", "--out", (dir / "d").string()}).code ==
          kExitOk);
  const std::string data = (dir / "d" / "data.traj").string();
  REQUIRE(cli({"train-codec", "--data", data, "--out", (dir / "c").string(), "--steps", "0"})
              .code == kExitOk);
  std::string bytes = slurp(dir / "c" / "codec.ckpt");
  bytes[bytes.size() - 100] ^= 0x40;
  {
    std::ofstream os(dir / "bad.ckpt", std::ios::binary);
    os << bytes;
  }
  const auto r = cli({"eval-codec", "--codec", (dir / "bad.ckpt").string(), "--data", data});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("integrity") != std::string::npos);
  CHECK(cli({"inspect-codebook", "--codec", (dir / "bad.ckpt").string()}).code == kExitUsage);
}

TEST_CASE("simulate reports the starvation of the rate regimes") {
  const fs::path dir = scratch("sim");
  const auto a = cli({"simulate", "--fl", "50", "--fm", "5", "--chunk", "10", "--out",
                      (dir / "a").string()});
  REQUIRE(a.code == kExitOk);
  CHECK(std::stod(kv(a.out, "starvation_fraction")) == 0.0);
  const auto b = cli({"simulate", "--fl", "50", "--fm", "2", "--chunk", "1"});
  REQUIRE(b.code == kExitOk);
  CHECK(std::stod(kv(b.out, "starvation_fraction")) == doctest::Approx(0.96).epsilon(0.01));
  CHECK(fs::exists(dir / "a" / "trace.csv"));
  CHECK(fs::exists(dir / "a" / "staleness.txt"));
  const auto again = cli({"simulate", "--fl", "50", "--fm", "5", "--chunk", "10", "--out",
                          (dir / "b").string()});
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  CHECK(slurp(dir / "a" / "summary.txt") == slurp(dir / "b" / "summary.txt"));
  CHECK(cli({"simulate", "--policy", "dream"}).code == kExitUsage);
  CHECK(cli({"simulate", "--policy", "trained-head"}).code == kExitUsage);
  CHECK(cli({"simulate", "--fm", "0"}).code == kExitUsage);
}

TEST_CASE("sweep emits one row per config and seed") {
  const fs::path dir = scratch("sweep");
  const auto r = cli({"sweep", "--fm", "2,5", "--chunk", "1,5,10", "--seeds", "0,1", "--duration",
                      "10", "--out", dir.string()});
  REQUIRE(r.code == kExitOk);
  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 12);
}

TEST_CASE("train-policy, trained-head simulation and codebook inspection") {
  const fs::path dir = scratch("policy");
  REQUIRE(cli({"gen-data", "--count", "8", "--length", "40", "--out", (dir / "d").string()}).code ==
          kExitOk);
  const std::string data = (dir / "d" / "data.traj").string();
  REQUIRE(cli({"train-codec", "--data", data, "--out", (dir / "c").string(), "--steps", "40",
               "--hidden", "8", "--latent-dim", "4", "--codebook-size", "16", "--batch-size", "8"})
              .code == kExitOk);
  const std::string codec = (dir / "c" / "codec.ckpt").string();
  const auto tp = cli({"train-policy", "--codec", codec, "--data", data, "--out",
                       (dir / "p").string(), "--steps", "50", "--hidden", "16"});
  REQUIRE(tp.code == kExitOk);
  const PolicyHead head = PolicyHead::load(dir / "p" / "head.ckpt");
  CHECK(head.config().groups == 4);
  CHECK(fs::exists(dir / "p" / "policy_log.csv"));

  const auto sim = cli({"simulate", "--policy", "trained-head", "--codec", codec, "--head",
                        (dir / "p" / "head.ckpt").string(), "--duration", "5"});
  REQUIRE(sim.code == kExitOk);
  CHECK(kv(sim.out, "policy") == "trained-head");

  const auto ins = cli({"inspect-codebook", "--codec", codec, "--data", data});
  REQUIRE(ins.code == kExitOk);
  for (const char* key : {"layer0.perplexity", "layer1.perplexity", "layer0.dead_codes",
                          "layer1.dead_codes"}) {
    CHECK_FALSE(kv(ins.out, key).empty());
  }
  const double p = std::stod(kv(ins.out, "layer0.perplexity"));
  CHECK(p >= 1.0);
  CHECK(p <= 16.0);
}
