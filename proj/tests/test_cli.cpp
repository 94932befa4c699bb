#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "twsbm/fit.hpp"
#include "twsbm/io.hpp"

namespace fs = std::filesystem;
using twsbm::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome call(std::vector<std::string> args) {
    args.insert(args.begin(), "twsbm");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("twsbm_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("simulate is reproducible and writes the documented files") {
    const fs::path a = fresh("sim_a"), b = fresh("sim_b");
    for (const auto& dir : {a, b})
        REQUIRE(call({"simulate", "--out", dir.string(), "--n", "12", "--T", "4", "--beta", "2t-1", "--seed", "5"}).code == 0);
    for (const char* f : {"manifest.csv", "Y_001.csv", "Y_004.csv", "X_1.csv", "labels_true.csv", "beta_true.csv",
                          "truth.cfg", "log.txt"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const std::string truth = slurp(a / "truth.cfg");
    CHECK(truth.find("beta0_diag = 1\n") != std::string::npos);
    CHECK(truth.find("beta0_offdiag = 0\n") != std::string::npos);
    CHECK(truth.find("pi = 0.20000000000000001,0.29999999999999999,0.5") != std::string::npos);
    CHECK(lines(a / "manifest.csv").size() == 5u);
    CHECK(fs::exists(a / "config.resolved"));
}

TEST_CASE("scenario presets reach the generator") {
    const fs::path dir = fresh("sim_s3");
    REQUIRE(call({"simulate", "--out", dir.string(), "--n", "6", "--scenario", "3"}).code == 0);
    const std::string truth = slurp(dir / "truth.cfg");
    CHECK(truth.find("beta0_diag = 0\n") != std::string::npos);
    CHECK(truth.find("beta0_offdiag = -1\n") != std::string::npos);
}

TEST_CASE("configuration errors exit with code 2 before touching the output") {
    const fs::path sim = fresh("sim_cfg");
    REQUIRE(call({"simulate", "--out", sim.string(), "--n", "10"}).code == 0);
    const fs::path out = fresh("fit_cfg");
    const Outcome missing = call({"fit", "--out", out.string(), "--manifest", (sim / "manifest.csv").string(),
                                  "--covariates", (sim / "nope.csv").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("\"error\":\"config\"") != std::string::npos);
    CHECK_FALSE(fs::exists(out));

    const fs::path cfg = sim / "bad.cfg";
    std::ofstream(cfg) << "# comment\nrho_grid = 1.5\ncolour = blue\n";
    CHECK(call({"fit", "--config", cfg.string(), "--out", out.string(), "--manifest", (sim / "manifest.csv").string()})
              .code == 2);
    CHECK(call({"fit", "--out", out.string(), "--manifest", (sim / "manifest.csv").string(), "--rho-grid", "2.5"})
              .code == 2);
    CHECK(call({"simulate", "--out", out.string(), "--pi", "0.5,0.6,0.1"}).code == 2);
    CHECK(call({"fit", "--bogus"}).code == 2);
    CHECK(call({}).code == 2);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("malformed data exits with code 3") {
    const fs::path dir = fresh("data_bad");
    fs::create_directories(dir);
    std::ofstream(dir / "y.csv") << "0,1\n1,zero\n";
    std::ofstream(dir / "m.csv") << "time,path\n0,y.csv\n";
    const Outcome o = call({"fit", "--out", (dir / "out").string(), "--manifest", (dir / "m.csv").string()});
    CHECK(o.code == 3);
    CHECK(o.err.find("\"error\":\"data\"") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("fit with a one-point grid and a config file") {
    const fs::path sim = fresh("sim_fit");
    REQUIRE(call({"simulate", "--out", sim.string(), "--n", "20", "--phi", "0.5", "--seed", "2"}).code == 0);
    const fs::path cfg = sim / "fit.cfg";
    std::ofstream(cfg) << "rho-grid = 1.2  # overridden below\nstarts = 3\nthreads = 1\n";
    const fs::path out = fresh("fit_one");
    const Outcome o = call({"fit", "--config", cfg.string(), "--rho-grid", "1.5", "--out", out.string(), "--manifest",
                            (sim / "manifest.csv").string()});
    REQUIRE(o.code == 0);
    const twsbm::FitResult r = twsbm::read_result(out / "result.txt");
    CHECK(r.per_rho.size() == 1u);
    CHECK(r.rho_hat == 1.5);
    const std::string resolved = slurp(out / "config.resolved");
    CHECK(resolved.find("rho-grid = 1.5\n") != std::string::npos);
    CHECK(resolved.find("starts = 3\n") != std::string::npos);
    CHECK(slurp(out / "log.txt").find("iteration,elbo") != std::string::npos);
    for (const char* f : {"labels.csv", "beta_t.csv", "inputs.txt"}) CHECK(fs::exists(out / f));

    const fs::path ev = fresh("eval_same");
    const Outcome e = call({"eval", "--out", ev.string(), "--labels", (sim / "labels_true.csv").string(),
                            "--truth-labels", (sim / "labels_true.csv").string(), "--beta",
                            (sim / "beta_true.csv").string(), "--truth-beta", (sim / "beta_true.csv").string()});
    REQUIRE(e.code == 0);
    const auto rows = lines(ev / "scores.csv");
    REQUIRE(rows.size() == 2u);
    CHECK(rows[1] == "nmi,1");
}

TEST_CASE("eval rejects shape mismatches") {
    const fs::path a = fresh("sim_eval_a"), b = fresh("sim_eval_b");
    REQUIRE(call({"simulate", "--out", a.string(), "--n", "10"}).code == 0);
    REQUIRE(call({"simulate", "--out", b.string(), "--n", "12"}).code == 0);
    CHECK(call({"eval", "--out", fresh("eval_bad").string(), "--labels", (a / "labels_true.csv").string(),
                "--truth-labels", (b / "labels_true.csv").string()})
              .code == 3);
}

TEST_CASE("cv writes one row per lambda and fold plus a summary") {
    const fs::path sim = fresh("sim_cv");
    REQUIRE(call({"simulate", "--out", sim.string(), "--n", "16", "--T", "5", "--beta", "1"}).code == 0);
    const fs::path out = fresh("cv_out");
    const Outcome o = call({"cv", "--out", out.string(), "--manifest", (sim / "manifest.csv").string(), "--covariates",
                            (sim / "X_1.csv").string(), "--lambda-grid", "0.1,0.5,1.0", "--rho-grid", "1.5",
                            "--starts", "2", "--threads", "1"});
    REQUIRE(o.code == 0);
    const auto rows = lines(out / "cv.csv");
    int folds = 0, means = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) (rows[i].find(",mean,") != std::string::npos ? means : folds)++;
    CHECK(folds == 3 * 3);
    CHECK(means == 3);
    const auto summary = lines(out / "cv_summary.csv");
    REQUIRE(summary.size() == 4u);
    int selected = 0;
    for (std::size_t i = 1; i < summary.size(); ++i) selected += summary[i].back() == '1';
    CHECK(selected == 1);
    CHECK(fs::exists(out / "beta_t.csv"));
    CHECK(fs::exists(out / "lambda_star.txt"));
}

TEST_CASE("density prints log densities") {
    const Outcome o = call({"density", "--y", "0,1", "--mu", "1", "--phi", "1", "--rho", "1.5"});
    REQUIRE(o.code == 0);
    CHECK(o.out.find("0,1,1,1.5,-2\n") != std::string::npos);
    CHECK(call({"density", "--y", "-1"}).code == 2);
}

TEST_CASE("help exits cleanly") {
    const Outcome o = call({"fit", "--help"});
    CHECK(o.code == 0);
    CHECK(o.out.find("--rho-grid") != std::string::npos);
}
