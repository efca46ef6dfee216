#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "pointprobe/errors.hpp"
#include "pointprobe/external_oracle.hpp"
#include "test_helpers.hpp"

using namespace pointprobe;
using tests::random_cloud;

#ifndef ORACLE_STUB_BIN
#define ORACLE_STUB_BIN "oracle_stub"
#endif
#ifndef POINTPROBE_BIN
#define POINTPROBE_BIN "pointprobe"
#endif

namespace {

ExternalOracleConfig stub_config(const std::string& args, int timeout_ms = 10000) {
  ExternalOracleConfig cfg;
  cfg.command = std::string(ORACLE_STUB_BIN) + " " + args;
  cfg.timeout_ms = timeout_ms;
  return cfg;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("uniform stub yields zero reward for two classes") {
  ExternalOracle oracle(stub_config("uniform 2"));
  CHECK(oracle.num_classes() == 2);
  RewardSpec spec;
  spec.label = 0;
  const double v = reward(oracle, random_cloud(16, 1), spec);
  CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("responses may arrive out of order") {
  ExternalOracle oracle(stub_config("reverse 3"));
  const std::vector<PointCloud> batch{random_cloud(8, 1), random_cloud(8, 2),
                                      random_cloud(8, 3), random_cloud(8, 4)};
  const auto probs = oracle.evaluate(batch);
  REQUIRE(probs.size() == 4);
  for (const auto& p : probs)
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3));
}

TEST_CASE("an invalid probability simplex is an oracle error") {
  ExternalOracle oracle(stub_config("badsum 4"));
  CHECK_THROWS_AS(oracle.evaluate({random_cloud(8, 1)}), OracleError);
}

TEST_CASE("malformed responses surface the raw payload") {
  ExternalOracle oracle(stub_config("garbage 2"));
  try {
    oracle.evaluate({random_cloud(8, 1)});
    FAIL("expected an oracle error");
  } catch (const OracleError& e) {
    CHECK(e.payload().find("not json") != std::string::npos);
  }
}

TEST_CASE("a silent model triggers the timeout") {
  ExternalOracle oracle(stub_config("hang 2", 300));
  CHECK_THROWS_AS(oracle.evaluate({random_cloud(8, 1)}), OracleError);
}

TEST_CASE("a dead command fails the handshake") {
  ExternalOracleConfig cfg;
  cfg.command = "false";
  cfg.timeout_ms = 2000;
  CHECK_THROWS_AS(ExternalOracle{cfg}, OracleError);
}

TEST_CASE("served weights match in-process evaluation") {
  namespace fs = std::filesystem;
  const fs::path weights = fs::temp_directory_path() / "pp_roundtrip_weights.json";
  const BuiltinClassifier model(6, 2024);
  model.save(weights.string());

  ExternalOracleConfig cfg;
  cfg.command = std::string(POINTPROBE_BIN) + " serve --weights " + weights.string();
  cfg.timeout_ms = 20000;
  ExternalOracle remote(cfg);
  CHECK(remote.num_classes() == 6);

  std::vector<PointCloud> batch;
  for (int k = 0; k < 10; ++k) batch.push_back(normalize(random_cloud(64, 100 + k)));
  const auto via_wire = remote.evaluate(batch);
  const auto in_process = model.evaluate(batch);
  for (std::size_t k = 0; k < batch.size(); ++k)
    for (int c = 0; c < 6; ++c)
      CHECK(std::abs(via_wire[k][c] - in_process[k][c]) <= 1e-12);
  fs::remove(weights);
}

TEST_CASE("the subprocess pool answers consistently") {
  ExternalOracleConfig cfg = stub_config("uniform 5");
  cfg.procs = 3;
  ExternalOracle oracle(cfg);
  for (int round = 0; round < 6; ++round) {
    const auto probs = oracle.evaluate({random_cloud(8, round)});
    CHECK(probs[0][0] == doctest::Approx(0.2));
  }
}

}  // TEST_SUITE
