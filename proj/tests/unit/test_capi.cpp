#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "reachavoid/reachavoid.h"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct EnvHandle {
  ra_env* env = nullptr;
  ~EnvHandle() { ra_env_free(env); }
};

json take_json(char* s) {
  REQUIRE(s != nullptr);
  json doc = json::parse(s);
  ra_string_free(s);
  return doc;
}

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("version and error state") {
    CHECK(std::string(ra_version()).size() > 0);
    EnvHandle h;
    CHECK(ra_env_gridworld("{not json", &h.env) == RA_ERR_PARSE);
    CHECK(h.env == nullptr);
    CHECK(std::string(ra_last_error()).size() > 0);
    CHECK(ra_env_example1(&h.env) == RA_OK);
    CHECK(std::string(ra_last_error()).empty());
  }

  TEST_CASE("null arguments") {
    CHECK(ra_env_example1(nullptr) == RA_ERR_INVALID_ARGUMENT);
    double x = 0.0;
    CHECK(ra_max_constraint_value(nullptr, &x) == RA_ERR_INVALID_ARGUMENT);
    ra_env_free(nullptr);
    ra_string_free(nullptr);
  }

  TEST_CASE("example through the C interface") {
    EnvHandle h;
    REQUIRE(ra_env_example1(&h.env) == RA_OK);
    int S = 0, A = 0, H = 0;
    REQUIRE(ra_env_dims(h.env, &S, &A, &H) == RA_OK);
    CHECK(S == 6);
    CHECK(A == 2);
    CHECK(H == 3);

    double vmax = 0.0;
    REQUIRE(ra_max_constraint_value(h.env, &vmax) == RA_OK);
    CHECK(vmax == 0.5);

    double value = 0.0, constraint = 0.0, lambda = -1.0;
    REQUIRE(ra_solve_cmdp(h.env, 0.4, &value, &constraint, &lambda) == RA_OK);
    CHECK(value == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(constraint == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(lambda >= 0.0);
    CHECK(ra_solve_cmdp(h.env, 0.9, &value, &constraint, &lambda) == RA_ERR_INFEASIBLE);

    std::vector<double> uniform(static_cast<size_t>(H) * 3 * S * A, 0.5);
    double r = 0.0, c = 0.0;
    REQUIRE(ra_evaluate_policy(h.env, uniform.data(), uniform.size(), &r, &c) == RA_OK);
    CHECK(r == 0.5);
    CHECK(c == 0.25);
    CHECK(ra_evaluate_policy(h.env, uniform.data(), uniform.size() - 1, &r, &c) == RA_ERR_INVALID_ARGUMENT);
    uniform[0] = 0.7;
    CHECK(ra_evaluate_policy(h.env, uniform.data(), uniform.size(), &r, &c) == RA_ERR_INVALID_ARGUMENT);

    int mismatches = -1;
    REQUIRE(ra_check_augmentation(h.env, 9, 2000, &mismatches) == RA_OK);
    CHECK(mismatches == 0);
  }

  TEST_CASE("environment JSON round trip") {
    EnvHandle a;
    REQUIRE(ra_env_example1(&a.env) == RA_OK);
    char* text = nullptr;
    REQUIRE(ra_env_to_json(a.env, &text) == RA_OK);
    const std::string doc(text);
    ra_string_free(text);
    EnvHandle b;
    REQUIRE(ra_env_from_json(doc.c_str(), &b.env) == RA_OK);
    double vmax = 0.0;
    REQUIRE(ra_max_constraint_value(b.env, &vmax) == RA_OK);
    CHECK(vmax == 0.5);

    json bad = json::parse(doc);
    bad["goal_set"] = {2};  // unsafe goal
    EnvHandle c;
    CHECK(ra_env_from_json(bad.dump().c_str(), &c.env) == RA_ERR_INVALID_ARGUMENT);
    CHECK(ra_env_load("/nonexistent/mdp.json", &c.env) == RA_ERR_IO);
  }

  TEST_CASE("gridworld parameters") {
    EnvHandle h;
    REQUIRE(ra_env_gridworld(R"({"width": 3, "height": 3, "goals": [[2, 2]]})", &h.env) == RA_OK);
    int S = 0, A = 0, H = 0;
    REQUIRE(ra_env_dims(h.env, &S, &A, &H) == RA_OK);
    CHECK(S == 9);
    CHECK(A == 4);
    EnvHandle bad;
    CHECK(ra_env_gridworld(R"({"slip": 2.0})", &bad.env) == RA_ERR_INVALID_ARGUMENT);
  }

  TEST_CASE("experiment, audit and solve through config files") {
    const fs::path dir = fs::temp_directory_path() / "ra_capi_run";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path config = dir / "config.json";
    std::ofstream(config) << R"({"env": "example1", "n": 1000, "iterations": 10, "seed": 2})";

    ra_run_overrides ov;
    ra_run_overrides_init(&ov);
    CHECK(ov.has_seed == 0);
    CHECK(ov.output_dir == nullptr);
    const std::string out = (dir / "run").string();
    ov.output_dir = out.c_str();
    ov.theta_out = "final";
    char* summary = nullptr;
    REQUIRE(ra_run_experiment(config.string().c_str(), &ov, &summary) == RA_OK);
    const json s = take_json(summary);
    CHECK(s["theta_out_selection"] == "final");
    CHECK(s["iterations_run"].get<int>() >= 1);
    CHECK(s["iterations_run"].get<int>() <= 10);

    char* audit = nullptr;
    REQUIRE(ra_audit_run(out.c_str(), &audit) == RA_OK);
    const json a = take_json(audit);
    CHECK(a["safe_fraction"] == s["safe_fraction"]);

    char* solved = nullptr;
    REQUIRE(ra_solve_config(config.string().c_str(), &solved) == RA_OK);
    CHECK(take_json(solved)["value"].get<double>() == doctest::Approx(0.6));

    std::ofstream(config) << R"({"env": "example1", "delta": 0.9, "n": 1000})";
    summary = nullptr;
    CHECK(ra_run_experiment(config.string().c_str(), &ov, &summary) == RA_ERR_INFEASIBLE);
    CHECK(take_json(summary)["exit_reason"] == "slater_violated");

    std::ofstream(config) << R"({"env": "example1", "n": 5})";
    summary = nullptr;
    CHECK(ra_run_experiment(config.string().c_str(), &ov, &summary) == RA_ERR_INSUFFICIENT_BATCH);
    CHECK(summary == nullptr);

    std::ofstream(config) << R"({"env": "example1", "bogus": 1})";
    CHECK(ra_run_experiment(config.string().c_str(), &ov, &summary) == RA_ERR_PARSE);
    fs::remove_all(dir);
  }
}
