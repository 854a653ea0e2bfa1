#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "checks.hpp"
#include "doctest.h"
#include "fdd/harness.hpp"

using namespace fdd;
using harness::Method;

namespace {

harness::RunConfig tiny_run() {
  harness::RunConfig c;
  c.model = checks::tiny_config();
  c.data.geometry.array.nx = 4;
  c.data.train = 80;
  c.data.val = 10;
  c.data.test = 24;
  c.train.epochs = 2;
  c.train.batch_size = 20;
  c.train.users = {2};
  c.eval.users = {2};
  c.eval.lloyd_iters = 10;
  return c;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch() {
  auto p = std::filesystem::temp_directory_path() / "fdd_harness_test";
  std::filesystem::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(FDD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("budgets must split evenly over tiers") {
  model::ModelConfig m;
  harness::set_budget(m, 12, 3);
  CHECK(m.tier_bits == 4);
  CHECK_THROWS_AS(harness::set_budget(m, 10, 3), model::ConfigError);
  CHECK_THROWS_AS(harness::set_budget(m, 0, 3), model::ConfigError);
}

TEST_CASE("run config validation catches cross-field errors") {
  auto c = tiny_run();
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.eval.users = {5};
  CHECK_THROWS_AS(bad.validate(), model::ConfigError);
  bad = c;
  bad.data.geometry.array.nx = 8;
  CHECK_THROWS_AS(bad.validate(), model::ConfigError);
  bad = c;
  bad.eval.methods.clear();
  CHECK_THROWS_AS(bad.validate(), model::ConfigError);
  CHECK_THROWS_AS(harness::parse_method("fcn"), model::ConfigError);
  for (Method m : {Method::proposed, Method::zf_csit, Method::lmmse_zf, Method::lloyd_rvq_zf})
    CHECK(harness::parse_method(harness::method_name(m)) == m);
}

TEST_CASE("the config hash tracks result-changing fields") {
  const auto a = tiny_run();
  auto b = a;
  CHECK(a.hash() == b.hash());
  b.train.seed = 2;
  CHECK(a.hash() != b.hash());
  b = a;
  b.data.geometry.seed = 9;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("Lloyd baseline tiers follow the system tier width") {
  CHECK(harness::lloyd_tier_bits(12, 4) == std::vector<std::size_t>{4, 4, 4});
  CHECK(harness::lloyd_tier_bits(10, 4) == std::vector<std::size_t>{4, 4, 2});
  CHECK(harness::lloyd_tier_bits(3, 4) == std::vector<std::size_t>{3});
}

TEST_CASE("CSV rows carry the header, hash and full precision") {
  harness::ResultTable t(0xabcULL);
  t.append({"exp", "zf_csit", 10.0, 12, 2, 1, 1.0 / 3.0, {0.25, 0.5}, 1.5});
  const std::string csv = t.csv();
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == harness::kCsvHeader);
  CHECK(row == "0000000000000abc,exp,zf_csit,10,12,2,1,0.33333333333333331,0.25;0.5,1.5");
  const auto path = (scratch() / "t.csv").string();
  t.write(path);
  CHECK(read_all(path) == csv);
}

TEST_CASE("missing inputs raise MissingFileError") {
  auto c = tiny_run();
  c.data.path = (scratch() / "absent.bin").string();
  CHECK_THROWS_AS(harness::obtain_dataset(c.data), harness::MissingFileError);
  CHECK_THROWS_AS(harness::load_model_file((scratch() / "absent.mdl").string()), harness::MissingFileError);
}

TEST_CASE("evaluation is deterministic and perfect-CSIT ZF bounds the feedback baselines") {
  const auto c = tiny_run();
  const auto ds = harness::make_dataset(c.data);
  const auto m = train::train(c.model, c.train, ds);
  harness::Evaluator ev(ds, c, &m);
  const double zf = ev.run(Method::zf_csit, 2, 4, 10.0, 1).sum_rate;
  for (Method meth : {Method::proposed, Method::lmmse_zf, Method::lloyd_rvq_zf}) {
    const auto a = ev.run(meth, 2, 4, 10.0, 1);
    const auto b = ev.run(meth, 2, 4, 10.0, 1);
    CHECK(a.sum_rate == b.sum_rate);
    CHECK(a.per_user == b.per_user);
    CHECK(a.sum_rate > 0.0);
  }
  CHECK(zf >= ev.run(Method::lloyd_rvq_zf, 2, 4, 10.0, 1).sum_rate);
  CHECK(zf >= ev.run(Method::lmmse_zf, 2, 4, 10.0, 1).sum_rate);
  CHECK(ev.run(Method::zf_csit, 2, 4, -10.0, 1).sum_rate < zf);
  CHECK_THROWS_AS(ev.run(Method::proposed, 2, 5, 10.0, 1), model::ConfigError);
  CHECK(ev.run(Method::proposed, 2, 3, 10.0, 1).sum_rate > 0.0);
}

TEST_CASE("baseline-only evaluation needs no model") {
  const auto c = tiny_run();
  const auto ds = harness::make_dataset(c.data);
  harness::Evaluator ev(ds, c, nullptr);
  CHECK(ev.run(Method::lmmse_zf, 2, 4, 10.0, 1).sum_rate > 0.0);
  CHECK_THROWS_AS(ev.run(Method::proposed, 2, 4, 10.0, 1), model::ConfigError);
}

TEST_CASE("sweeps emit one row per grid point in nesting order") {
  auto c = tiny_run();
  c.eval.methods = {Method::zf_csit, Method::lmmse_zf};
  c.eval.snr_db = {0.0, 10.0};
  c.eval.users = {1, 2};
  c.eval.seeds = {1, 2};
  const auto ds = harness::make_dataset(c.data);
  harness::Evaluator ev(ds, c, nullptr);
  const auto t = harness::sweep(ev, c);
  REQUIRE(t.rows().size() == 16);
  CHECK(t.rows()[0].seed == 1);
  CHECK(t.rows()[0].users == 1);
  CHECK(t.rows()[0].snr_db == 0.0);
  CHECK(t.rows()[0].method == "zf_csit");
  CHECK(t.rows()[1].method == "lmmse_zf");
  CHECK(t.rows()[2].snr_db == 10.0);
  CHECK(t.rows()[4].users == 2);
  CHECK(t.rows()[8].seed == 2);
  for (const auto& r : t.rows()) CHECK(r.per_user.size() == r.users);
}

TEST_CASE("command line exit codes and file workflow") {
  const auto dir = scratch();
  const std::string tiny =
      "--antennas 4 --nx 4 --pilot_length 4 --feature_dim 8 --hidden 8 8 --bits 4 --tiers 2 "
      "--egat_state_dim 4 --egat_hidden 8 --egat_layers 2 --train_samples 60 --val_samples 10 "
      "--test_samples 12 --epochs 2 --batch_size 20 --train_users 2 --users 2 --lloyd_iters 5";
  const std::string mdl = (dir / "cli.mdl").string();
  const std::string csv = (dir / "cli.csv").string();
  std::filesystem::remove(mdl);
  CHECK(cli("") == 2);
  CHECK(cli("frobnicate") == 2);
  CHECK(cli("train " + tiny + " --bits 5") == 2);
  CHECK(cli("train " + tiny + " --not_an_option 1") == 2);
  CHECK(cli("eval " + tiny + " --model " + (dir / "absent.mdl").string() + " --out " + csv) == 3);
  CHECK(cli("train " + tiny + " --out " + mdl) == 0);
  REQUIRE(std::filesystem::exists(mdl));
  CHECK(cli("eval " + tiny + " --model " + mdl + " --out " + csv) == 0);
  const std::string table = read_all(csv);
  CHECK(table.rfind(harness::kCsvHeader, 0) == 0);
  CHECK(cli("shrink " + tiny + " --model " + mdl + " --deploy_bits 3 --out " + mdl) == 2);
  const std::string small = (dir / "cli_small.mdl").string();
  CHECK(cli("shrink " + tiny + " --model " + mdl + " --deploy_bits 3 --out " + small) == 0);
  CHECK(harness::load_model_file(small).codebook.total_bits() == 3);
  std::ofstream(dir / "junk.mdl") << "not a model";
  CHECK(cli("eval " + tiny + " --model " + (dir / "junk.mdl").string() + " --out " + csv) == 3);
}
