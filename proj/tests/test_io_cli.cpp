#include <sys/wait.h>
#include <unistd.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "grab/io.hpp"
#include "helpers.hpp"

using namespace grab;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("grab_io_tests_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string path_for(const std::string& name) { return (test_dir() / name).string(); }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Runs the CLI binary with stdout captured to `out_path` (if given).
int run_cli(const std::string& args, const std::string& out_path = "") {
  std::string cmd = std::string(GRAB_CLI_PATH) + " " + args;
  cmd += out_path.empty() ? " >/dev/null" : (" >" + out_path);
  cmd += " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

// Drops the trailing (timing) column of each CSV line so runs can be compared.
std::string drop_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    out << (pos == std::string::npos ? line : line.substr(0, pos)) << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("doubles survive text round trips") {
  SplitMix64 g(404);
  for (int i = 0; i < 200; ++i) {
    const double x = (normal01(g)) * std::pow(10.0, static_cast<double>(g() % 60) - 30.0);
    const std::string text = fmt_double(x);
    CHECK(detail::parse_double(text, "test") == x);
  }
  CHECK(detail::parse_double(fmt_double(1.0 / 3.0), "test") == 1.0 / 3.0);
  CHECK_THROWS_AS(detail::parse_double("1.5x", "test"), std::runtime_error);
  CHECK_THROWS_AS(detail::parse_double("", "test"), std::runtime_error);
  CHECK_THROWS_AS(detail::parse_double("nan", "test"), std::runtime_error);
}

TEST_CASE("vector set round trips") {
  const VectorSet set = oracle::random_set(7, 5, 31);

  SECTION("csv") {
    const std::string p = path_for("set.csv");
    save_vector_set_csv(set, p);
    const VectorSet back = load_vector_set_csv(p);
    REQUIRE(back.size() == 7);
    REQUIRE(back.dim() == 5);
    CHECK(back.data() == set.data());
  }

  SECTION("binary") {
    const std::string p = path_for("set.bin");
    save_vector_set_binary(set, p);
    const VectorSet back = load_vector_set_binary(p);
    CHECK(back.data() == set.data());
  }

  SECTION("sniffing dispatches on the magic") {
    const std::string pc = path_for("sniff.csv");
    const std::string pb = path_for("sniff.bin");
    save_vector_set_csv(set, pc);
    save_vector_set_binary(set, pb);
    CHECK(load_vector_set(pc).data() == set.data());
    CHECK(load_vector_set(pb).data() == set.data());
  }
}

TEST_CASE("csv loader accepts comments and rejects malformed rows") {
  const std::string good = path_for("hand.csv");
  write_file(good, "# a comment\n1,2\n\n3.5,-4e-2\r\n");
  const VectorSet set = load_vector_set_csv(good);
  REQUIRE(set.size() == 2);
  REQUIRE(set.dim() == 2);
  CHECK(set.row(1)[0] == 3.5);
  CHECK(set.row(1)[1] == -4e-2);

  const std::string ragged = path_for("ragged.csv");
  write_file(ragged, "1,2\n3\n");
  CHECK_THROWS(load_vector_set_csv(ragged));

  const std::string junk = path_for("junk.csv");
  write_file(junk, "1,two\n");
  CHECK_THROWS(load_vector_set_csv(junk));

  const std::string empty = path_for("empty.csv");
  write_file(empty, "# nothing\n");
  CHECK_THROWS(load_vector_set_csv(empty));

  const std::string badmagic = path_for("badmagic.bin");
  write_file(badmagic, "NOTMAGIC\x01\x02");
  CHECK_THROWS(load_vector_set_binary(badmagic));
}

TEST_CASE("permutations round trip") {
  const Permutation perm = Permutation::random(23, 77u);
  const std::string p = path_for("perm.txt");
  save_permutation(perm, p);
  CHECK(load_permutation(p) == perm);

  const std::string bad = path_for("notperm.txt");
  write_file(bad, "0\n0\n1\n");
  CHECK_THROWS(load_permutation(bad));
}

TEST_CASE("trace csv has the pinned schema") {
  TrainTrace trace;
  trace.strategy = Strategy::GraB;
  trace.seed = 5;
  EpochRecord r1;
  r1.epoch = 1;
  r1.loss = 0.5;
  r1.grad_norm = 0.25;
  r1.herding_obj = 2.0;
  r1.balance_bound = 1.5;
  r1.wall_ms = 3.25;
  EpochRecord r2 = r1;
  r2.epoch = 2;
  r2.balance_bound.reset();
  trace.records = {r1, r2};

  std::ostringstream out;
  write_trace_csv(out, trace);
  const std::string text = out.str();
  std::istringstream in(text);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "# schema=1");
  REQUIRE(std::getline(in, line));
  CHECK(line == "epoch,strategy,seed,loss,grad_norm,herding_obj,balance_bound,wall_ms");
  REQUIRE(std::getline(in, line));
  CHECK(line == "1,grab,5,0.5,0.25,2,1.5,3.25");
  REQUIRE(std::getline(in, line));
  CHECK(line == "2,grab,5,0.5,0.25,2,,3.25");  // absent bound stays an empty field
  CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("trace json mirror carries the config") {
  const QuadraticSum p = QuadraticSum::random(6, 3, 1);
  TrainConfig cfg;
  cfg.strategy = Strategy::GraB;
  cfg.alpha = 0.05;
  cfg.epochs = 2;
  cfg.seed = 11;
  const TrainTrace trace = train(p, cfg);

  const nlohmann::json j = trace_to_json(trace, cfg);
  CHECK(j["schema"] == 1);
  CHECK(j["strategy"] == "grab");
  CHECK(j["config"]["alpha"] == 0.05);
  CHECK(j["config"]["balancer"]["kind"] == "naive");
  REQUIRE(j["records"].size() == 2);
  CHECK(j["records"][0]["epoch"] == 1);
  CHECK(j["records"][0]["loss"] == trace.records[0].loss);
  CHECK(j["records"][0].contains("balance_bound"));
}

TEST_CASE("dataset loader") {
  const std::string good = path_for("data.csv");
  write_file(good, "x0,x1,label\n1.0,2.0,1\n-1.0,0.5,-1\n0.25,0.25,1\n");
  const LogisticRegression p = load_logreg_csv(good, 1e-2);
  CHECK(p.size() == 3);
  CHECK(p.dim() == 2);

  const std::string noheader = path_for("noheader.csv");
  write_file(noheader, "x0,x1,y\n1,2,1\n");
  CHECK_THROWS(load_logreg_csv(noheader));

  const std::string badlabel = path_for("badlabel.csv");
  write_file(badlabel, "x0,label\n1.0,0.5\n");
  CHECK_THROWS(load_logreg_csv(badlabel));

  const std::string ragged = path_for("raggeddata.csv");
  write_file(ragged, "x0,x1,label\n1.0,1\n");
  CHECK_THROWS(load_logreg_csv(ragged));
}

TEST_CASE("cli: balance-demo is deterministic") {
  const std::string a = path_for("demo_a.csv");
  const std::string b = path_for("demo_b.csv");
  const std::string args = "balance-demo --n 40 --d 6 --rounds 2 --seed 3 --out ";
  REQUIRE(run_cli(args + a) == 0);
  REQUIRE(run_cli(args + b) == 0);
  const std::string text = read_file(a);
  CHECK(text == read_file(b));
  CHECK(text.rfind("# schema=1\nkind,index,value\n", 0) == 0);
  CHECK(text.find("prefix_random,1,") != std::string::npos);
  CHECK(text.find("round,0,") != std::string::npos);
  CHECK(text.find("round,2,") != std::string::npos);
  CHECK(text.find("prefix_final,40,") != std::string::npos);

  // rounds=0 reports the baseline objective only
  const std::string c = path_for("demo_c.csv");
  REQUIRE(run_cli("balance-demo --n 10 --d 3 --rounds 0 --seed 1 --out " + c) == 0);
  const std::string base = read_file(c);
  CHECK(base.find("round,0,") != std::string::npos);
  CHECK(base.find("round,1,") == std::string::npos);
  CHECK(base.find("prefix_final") == std::string::npos);
}

TEST_CASE("cli: balance-demo reads vector files") {
  const VectorSet set = oracle::random_set(12, 3, 5);
  const std::string vec = path_for("demo_in.bin");
  save_vector_set_binary(set, vec);
  const std::string out = path_for("demo_in_out.csv");
  REQUIRE(run_cli("balance-demo --input " + vec + " --rounds 1 --out " + out) == 0);
  CHECK(read_file(out).find("prefix_random,12,") != std::string::npos);
}

TEST_CASE("cli: train is deterministic up to timing") {
  const std::string csv1 = path_for("tr1.csv");
  const std::string csv2 = path_for("tr2.csv");
  const std::string ord = path_for("tr1.order");
  const std::string log1 = path_for("tr1.stdout");
  const std::string log2 = path_for("tr2.stdout");
  const std::string common =
      "train --problem quad --n 12 --d 4 --epochs 3 --lr 0.05 --strategy grab --seed 9 ";
  REQUIRE(run_cli(common + "--out " + csv1 + " --order-out " + ord, log1) == 0);
  REQUIRE(run_cli(common + "--out " + csv2, log2) == 0);

  CHECK(drop_last_column(read_file(csv1)) == drop_last_column(read_file(csv2)));
  CHECK(read_file(log1) == read_file(log2));
  CHECK(read_file(log1).rfind("final_loss=", 0) == 0);

  const Permutation final_order = load_permutation(ord);
  CHECK(final_order.size() == 12);

  // the JSON mirror sits alongside the CSV and parses
  const nlohmann::json j = nlohmann::json::parse(read_file(csv1 + ".json"));
  CHECK(j["records"].size() == 3);
  CHECK(j["config"]["epochs"] == 3);

  // the saved order is a usable fixed strategy
  const std::string csv3 = path_for("tr3.csv");
  REQUIRE(run_cli("train --problem quad --n 12 --d 4 --epochs 2 --lr 0.05 --strategy fixed:" +
                      ord + " --seed 9 --out " + csv3) == 0);
}

TEST_CASE("cli: train covers every generator") {
  for (const std::string prob : {"quad", "logreg", "mlp"}) {
    const std::string out = path_for("gen_" + prob + ".csv");
    INFO(prob);
    CHECK(run_cli("train --problem " + prob + " --n 16 --d 4 --epochs 2 --lr 0.01 --strategy so "
                  "--seed 2 --out " + out) == 0);
  }
  const std::string data = path_for("train_data.csv");
  write_file(data, "x0,x1,label\n1.0,0.0,1\n-1.0,0.0,-1\n0.0,1.0,1\n0.0,-1.0,-1\n");
  const std::string out = path_for("gen_csv.csv");
  CHECK(run_cli("train --problem csv:" + data + " --epochs 2 --lr 0.1 --l2 0.01 --strategy grab "
                "--seed 2 --out " + out) == 0);
}

TEST_CASE("cli: exit codes") {
  const std::string out = path_for("codes.csv");
  CHECK(run_cli("train --strategy warp --out " + out) == 2);
  CHECK(run_cli("train --problem tea --out " + out) == 2);
  CHECK(run_cli("train --problem quad --n 8 --d 3 --epochs 2 --lr 1e30 --strategy rr --out " +
                out) == 3);
  CHECK(run_cli("train --problem quad --n 8 --d 3 --epochs 2 --lr 0.01 --strategy greedy "
                "--stale-cap-bytes 8 --out " + out) == 5);
  CHECK(run_cli("adversarial --n-list 7 --out " + out) == 2);
  CHECK(run_cli("adversarial") == 2);       // missing required --out
  CHECK(run_cli("") == 2);                  // missing subcommand
  CHECK(run_cli("balance-demo --input /nonexistent.csv --out " + out) == 2);
}

TEST_CASE("cli: adversarial sweep") {
  const std::string a = path_for("adv_a.csv");
  const std::string b = path_for("adv_b.csv");
  const std::string args = "adversarial --n-list 8,16 --seeds 5 --out ";
  REQUIRE(run_cli(args + a) == 0);
  REQUIRE(run_cli(args + b) == 0);
  const std::string text = read_file(a);
  CHECK(text == read_file(b));

  std::istringstream in(text);
  std::string line;
  REQUIRE(std::getline(in, line));  // # schema=1
  REQUIRE(std::getline(in, line));
  CHECK(line == "n,greedy_obj,random_mean,random_std,seeds");
  REQUIRE(std::getline(in, line));
  const auto fields = detail::split_csv_line(line);
  REQUIRE(fields.size() == 5);
  CHECK(fields[0] == "8");
  // the trap walks the first half of the hard set: objective 1.5*sqrt(2)*n/2
  CHECK(detail::parse_double(fields[1], "adv") ==
        Catch::Approx(6.0 * std::sqrt(2.0)).margin(1e-12));
  CHECK(fields[4] == "5");
}
