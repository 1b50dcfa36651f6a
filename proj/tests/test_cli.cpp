#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "testutil.hpp"

namespace {

struct RunResult {
    int exit_code;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args) {
    std::string out_path = std::string(std::tmpnam(nullptr)) + "_out";
    std::string err_path = out_path + "_err";
    std::string cmd = std::string(STANGEN_CLI_PATH) + " " + args + " > " + out_path +
                      " 2> " + err_path;
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(status);
    r.out = testutil::read_file(out_path);
    r.err = testutil::read_file(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

std::string write_temp(const std::string& contents) {
    std::string path = std::string(std::tmpnam(nullptr)) + ".json";
    std::ofstream out(path);
    out << contents;
    return path;
}

}  // namespace

TEST_CASE("compile subcommand emits the canonical IR") {
    RunResult r = run_cli("compile " + testutil::model_path("coin.stan") + " --emit-ir");
    CHECK(r.exit_code == 0);
    CHECK(r.out == testutil::read_file(testutil::golden_path("coin_ir.txt")));
}

TEST_CASE("compile subcommand emits resolved types") {
    RunResult r = run_cli("compile " + testutil::model_path("vae.stan") + " --emit-types");
    CHECK(r.exit_code == 0);
    CHECK(r.out == testutil::read_file(testutil::golden_path("vae_types.txt")));
}

TEST_CASE("compile subcommand emits the kernelized surface program") {
    RunResult r =
        run_cli("compile " + testutil::model_path("reparameterization.stan") +
                " --emit-kernel");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("transformed parameters") == std::string::npos);
    CHECK(r.out.find("y = 3.0 * y_std;") != std::string::npos);
    // the kernel output reparses
    CHECK_NOTHROW(testutil::parse_model_source(r.out));
}

TEST_CASE("check reports diagnostics and fails") {
    std::string bad = write_temp("data { int N; }");
    RunResult r = run_cli("check " + bad);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("missing-model-block") != std::string::npos);
    std::remove(bad.c_str());

    RunResult ok = run_cli("check " + testutil::model_path("coin.stan"));
    CHECK(ok.exit_code == 0);
}

TEST_CASE("usage errors exit with code 2") {
    RunResult r = run_cli("frobnicate");
    CHECK(r.exit_code == 2);
    RunResult r2 = run_cli("infer " + testutil::model_path("coin.stan") + " --method bogus");
    CHECK(r2.exit_code == 2);
}

TEST_CASE("eval-target prints the log density with 17 significant digits") {
    std::string params = write_temp("{\"z\": 0.5}");
    RunResult r = run_cli("eval-target " + testutil::model_path("coin.stan") + " --data " +
                          testutil::model_path("coin_data.json") + " --params " + params);
    CHECK(r.exit_code == 0);
    // ten fair flips: 10 * log(1/2)
    CHECK(r.out == "-6.9314718055994531\n");
    std::remove(params.c_str());
}

TEST_CASE("inference output is byte-identical for a fixed seed") {
    std::string args = "infer " + testutil::model_path("coin.stan") + " --data " +
                       testutil::model_path("coin_data.json") +
                       " --method is --samples 2000 --seed 42";
    RunResult a = run_cli(args);
    RunResult b = run_cli(args);
    CHECK(a.exit_code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("\"ess\"") != std::string::npos);

    std::string mh_args = "infer " + testutil::model_path("coin.stan") + " --data " +
                          testutil::model_path("coin_data.json") +
                          " --method mh --samples 3000 --seed 7 --chains 2";
    RunResult c = run_cli(mh_args);
    RunResult d = run_cli(mh_args);
    CHECK(c.exit_code == 0);
    CHECK(c.out == d.out);
    CHECK(c.out.find("\"accept_rate\"") != std::string::npos);
    CHECK(c.out.find("\"chains\": 2") != std::string::npos);
}

TEST_CASE("inference on flat priors needs the chain method") {
    RunResult r = run_cli("infer " + testutil::model_path("double_normal.stan") +
                          " --method is --samples 100");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("improper-prior-needs-mcmc") != std::string::npos);
}
