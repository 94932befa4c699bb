#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "twsbm/cv.hpp"
#include "twsbm/errors.hpp"
#include "twsbm/evaluation.hpp"
#include "twsbm/fit.hpp"
#include "twsbm/io.hpp"
#include "twsbm/parallel.hpp"
#include "twsbm/tweedie.hpp"

namespace twsbm::cli {

namespace fs = std::filesystem;
using io::format_double;

namespace {

// ---------------------------------------------------------------- settings

// Every option of a subcommand is captured as text and converted later, so
// flag values and config-file values go through the same checks.
struct Setting {
    std::string key;
    std::string value;
    std::string help;
};

class Settings {
public:
    Setting& add(CLI::App& app, const std::string& key, std::string fallback, const std::string& help) {
        auto& s = items_[key];
        s.key = key;
        s.value = std::move(fallback);
        s.help = help;
        order_.push_back(key);
        app.add_option("--" + key, s.value, help)->capture_default_str();
        return s;
    }

    bool has(const std::string& key) const { return items_.count(key) > 0; }
    const std::string& text(const std::string& key) const { return items_.at(key).value; }
    bool empty(const std::string& key) const { return text(key).empty(); }

    void write_resolved(const fs::path& path) const {
        std::ofstream out(path);
        for (const auto& key : order_) out << key << " = " << items_.at(key).value << '\n';
        if (!out) throw DataError("failed writing " + path.string());
    }

private:
    std::map<std::string, Setting> items_;
    std::vector<std::string> order_;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty key");
        if (out.count(key)) throw ConfigError(path.string() + ": key '" + key + "' given twice");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError("--" + key + ": '" + text + "' is not a number");
    return v;
}

long long to_integer(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError("--" + key + ": '" + text + "' is not an integer");
    return v;
}

int to_int(const std::string& key, const std::string& text) {
    const long long v = to_integer(key, text);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ConfigError("--" + key + ": value out of range");
    return static_cast<int>(v);
}

std::uint64_t to_seed(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError("--" + key + ": '" + text + "' is not a non-negative integer");
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
    return out;
}

bool to_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    throw ConfigError("--" + key + ": expected true or false, got '" + text + "'");
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

// ---------------------------------------------------------------- output dir

void prepare_output(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream t(probe);
        if (!t) throw ConfigError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

fs::path output_dir(const Settings& s) {
    if (s.empty("out")) throw ConfigError("--out is required");
    return fs::path(s.text("out"));
}

class Log {
public:
    explicit Log(const fs::path& path) : out_(path) {
        if (!out_) throw DataError("cannot open " + path.string());
    }
    template <class T>
    Log& operator<<(const T& v) {
        out_ << v;
        return *this;
    }

private:
    std::ofstream out_;
};

void log_fit(Log& log, const FitResult& r) {
    log << "rho_hat = " << format_double(r.rho_hat) << "\nphi_hat = " << format_double(r.phi_hat)
        << "\nloglik = " << format_double(r.loglik) << "\nelbo = " << format_double(r.elbo) << '\n';
    for (const auto& d : r.per_rho) {
        log << "\n[rho " << format_double(d.rho) << "]\n";
        if (!d.ok) {
            log << "failed: " << d.error << '\n';
            continue;
        }
        log << "step1_iterations = " << d.step1_iterations << "\nstep1_objective = " << format_double(d.step1_objective)
            << "\nbest_start = " << d.best_start + 1 << "\nrefinements = " << d.refinements
            << "\nloglik = " << format_double(d.loglik) << "\nphi = " << format_double(d.phi)
            << "\nconverged = " << (d.converged ? 1 : 0) << "\nphi_at_boundary = " << (d.phi_at_boundary ? 1 : 0)
            << "\niteration,elbo\n";
        for (std::size_t i = 0; i < d.trace.size(); ++i) log << i << ',' << format_double(d.trace[i]) << '\n';
    }
}

void write_beta_t(const fs::path& path, const std::vector<double>& times, const Eigen::MatrixXd& beta) {
    std::vector<std::string> header{"t"};
    for (Eigen::Index u = 0; u < beta.cols(); ++u) header.push_back("beta_" + std::to_string(u + 1));
    Eigen::MatrixXd table(static_cast<Eigen::Index>(times.size()), beta.cols() + 1);
    for (std::size_t v = 0; v < times.size(); ++v) {
        table(static_cast<Eigen::Index>(v), 0) = times[v];
        table.row(static_cast<Eigen::Index>(v)).tail(beta.cols()) = beta.row(static_cast<Eigen::Index>(v));
    }
    io::write_table(path, header, table);
}

// ---------------------------------------------------------------- data options

void add_data_options(CLI::App& app, Settings& s) {
    s.add(app, "manifest", "", "CSV of (time, network file) rows");
    s.add(app, "covariates", "", "comma-separated covariate CSV files");
    s.add(app, "symmetrize", "true", "replace each network by (Y + Y^T)/2");
    s.add(app, "threshold", "", "keep entries above this value as log(entry), zero the rest");
}

void add_fit_options(CLI::App& app, Settings& s) {
    s.add(app, "K", "3", "number of communities");
    s.add(app, "rho-grid", join(default_rho_grid()), "comma-separated Tweedie powers to search");
    s.add(app, "lambda", "", "smoothing weight (one value, or one per covariate); default 0.5");
    s.add(app, "starts", "0", "random starts per rho (0: 30 without covariates, else 10)");
    s.add(app, "max-iter", "200", "coordinate-ascent iterations per start");
    s.add(app, "tol", "1e-8", "relative ELBO change for convergence");
    s.add(app, "split-merge", "5", "rounds of merge-then-split refinement (0 disables)");
}

void add_common(CLI::App& app, Settings& s, bool threads = true) {
    s.add(app, "out", "", "output directory");
    s.add(app, "seed", "1", "random seed");
    if (threads) s.add(app, "threads", std::to_string(default_threads()), "worker threads");
}

NetworkData load_data(const Settings& s) {
    if (s.empty("manifest")) throw ConfigError("--manifest is required");
    const fs::path manifest(s.text("manifest"));
    if (!fs::exists(manifest)) throw ConfigError("manifest " + manifest.string() + " does not exist");
    std::vector<fs::path> covs;
    for (const auto& c : split_list(s.text("covariates"))) {
        if (!fs::exists(c)) throw ConfigError("covariate file " + c + " does not exist");
        covs.emplace_back(c);
    }
    const bool sym = to_bool("symmetrize", s.text("symmetrize"));
    std::optional<double> threshold;
    if (!s.empty("threshold")) threshold = to_double("threshold", s.text("threshold"));
    if (threshold && *threshold < 1.0) throw ConfigError("--threshold must be >= 1");
    NetworkData data = io::load_csv(manifest, covs, sym);
    if (threshold) data.network = preprocess_trade(data.network, *threshold);
    return data;
}

FitConfig fit_config(const Settings& s) {
    FitConfig c;
    c.communities = to_int("K", s.text("K"));
    c.rho_grid = to_doubles("rho-grid", s.text("rho-grid"));
    const auto lambda = to_doubles("lambda", s.text("lambda"));
    c.lambda = Eigen::Map<const Eigen::VectorXd>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
    c.starts = to_int("starts", s.text("starts"));
    c.max_iter = to_int("max-iter", s.text("max-iter"));
    c.tol = to_double("tol", s.text("tol"));
    c.split_merge_rounds = to_int("split-merge", s.text("split-merge"));
    c.seed = to_seed("seed", s.text("seed"));
    c.threads = to_int("threads", s.text("threads"));
    if (c.threads < 1) throw ConfigError("--threads must be >= 1");
    c.validate();
    return c;
}

void write_inputs(const fs::path& path, const Settings& s) {
    std::ofstream out(path);
    out << "manifest = " << fs::absolute(s.text("manifest")).string() << '\n';
    for (const auto& c : split_list(s.text("covariates"))) out << "covariate = " << fs::absolute(c).string() << '\n';
    for (const auto& e : io::read_manifest(s.text("manifest")))
        out << "network = " << format_double(e.time) << ',' << fs::absolute(e.path).string() << '\n';
}

void write_fit_outputs(const fs::path& dir, const FitResult& r) {
    write_result(dir / "result.txt", r);
    io::write_labels(dir / "labels.csv", r.labels);
    write_beta_t(dir / "beta_t.csv", r.times, r.beta_t);
}

// ---------------------------------------------------------------- simulate

void add_simulate(CLI::App& app, Settings& s) {
    add_common(app, s, false);
    s.add(app, "n", "50", "number of nodes");
    s.add(app, "K", "3", "number of communities");
    s.add(app, "pi", "0.2,0.3,0.5", "community proportions");
    s.add(app, "scenario", "1", "block-intercept preset 1..6");
    s.add(app, "beta0-diag", "", "diagonal block intercept (overrides the scenario)");
    s.add(app, "beta0-offdiag", "", "off-diagonal block intercept (overrides the scenario)");
    s.add(app, "phi", "1", "dispersion");
    s.add(app, "rho", "1.5", "Tweedie power in (1,2)");
    s.add(app, "T", "1", "number of equally spaced time points on [0,1]");
    s.add(app, "beta", "", "comma-separated coefficient curves: a number, 2t-1, sin, 2t, sin+1, 0.5(2t-1), 0.5sin");
    s.add(app, "covariate-law", "uniform", "uniform (on [-1,1]) or normal");
}

int cmd_simulate(const Settings& s, std::ostream& out) {
    SimulationConfig c;
    c.n = to_int("n", s.text("n"));
    c.communities = to_int("K", s.text("K"));
    c.pi = to_doubles("pi", s.text("pi"));
    const int scenario = to_int("scenario", s.text("scenario"));
    std::tie(c.beta0_diag, c.beta0_offdiag) = SimulationConfig::scenario(scenario);
    if (!s.empty("beta0-diag")) c.beta0_diag = to_double("beta0-diag", s.text("beta0-diag"));
    if (!s.empty("beta0-offdiag")) c.beta0_offdiag = to_double("beta0-offdiag", s.text("beta0-offdiag"));
    c.phi = to_double("phi", s.text("phi"));
    c.rho = to_double("rho", s.text("rho"));
    c.grid = TimeGrid::uniform(to_int("T", s.text("T")));
    for (const auto& b : split_list(s.text("beta"))) c.beta.push_back(BetaCurve::parse(b));
    const std::string law = trim(s.text("covariate-law"));
    if (law == "uniform")
        c.law = CovariateLaw::Uniform;
    else if (law == "normal")
        c.law = CovariateLaw::Normal;
    else
        throw ConfigError("--covariate-law must be uniform or normal");
    c.seed = to_seed("seed", s.text("seed"));
    c.validate();

    const fs::path dir = output_dir(s);
    prepare_output(dir);
    const SimulatedData sim = generate(c);

    std::ofstream manifest(dir / "manifest.csv");
    manifest << "time,path\n";
    for (int t = 0; t < c.grid.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "Y_%03d.csv", t + 1);
        io::write_matrix(dir / name, sim.data.network.at(t));
        manifest << format_double(c.grid[t]) << ',' << name << '\n';
    }
    manifest.close();
    for (int u = 0; u < c.covariate_count(); ++u)
        io::write_matrix(dir / ("X_" + std::to_string(u + 1) + ".csv"), sim.data.covariates.at(u));
    io::write_labels(dir / "labels_true.csv", sim.labels.values());
    write_beta_t(dir / "beta_true.csv", c.grid.points(), c.beta_on_grid());

    std::ofstream truth(dir / "truth.cfg");
    std::string curves;
    for (std::size_t u = 0; u < c.beta.size(); ++u) curves += (u ? "," : "") + c.beta[u].name();
    truth << "n = " << c.n << "\nK = " << c.communities << "\npi = " << join(c.pi)
          << "\nbeta0_diag = " << format_double(c.beta0_diag) << "\nbeta0_offdiag = " << format_double(c.beta0_offdiag)
          << "\nphi = " << format_double(c.phi) << "\nrho = " << format_double(c.rho) << "\nT = " << c.grid.size()
          << "\nbeta = " << curves << "\nseed = " << c.seed << '\n';
    truth.close();

    s.write_resolved(dir / "config.resolved");
    Log log(dir / "log.txt");
    log << "simulated n = " << c.n << ", T = " << c.grid.size() << ", p = " << c.covariate_count() << '\n';
    out << "wrote " << dir.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------- fit

int cmd_fit(const Settings& s, std::ostream& out) {
    const FitConfig config = fit_config(s);
    const NetworkData data = load_data(s);
    config.lambda_for(data.covariate_count());
    if (config.communities > data.nodes()) throw ConfigError("K exceeds the number of nodes");

    const fs::path dir = output_dir(s);
    prepare_output(dir);
    s.write_resolved(dir / "config.resolved");
    write_inputs(dir / "inputs.txt", s);

    const FitResult r = fit(data, config);
    write_fit_outputs(dir, r);
    Log log(dir / "log.txt");
    log_fit(log, r);
    out << "rho_hat = " << format_double(r.rho_hat) << ", phi_hat = " << format_double(r.phi_hat) << '\n';
    return kOk;
}

// ---------------------------------------------------------------- cv

int cmd_cv(const Settings& s, std::ostream& out) {
    FitConfig config = fit_config(s);
    const auto grid = to_doubles("lambda-grid", s.text("lambda-grid"));
    if (grid.empty()) throw ConfigError("--lambda-grid is empty");
    for (double l : grid)
        if (!(l >= 0.0)) throw ConfigError("--lambda-grid values must be non-negative");
    const NetworkData data = load_data(s);
    if (data.times() < 4) throw ConfigError("cross-validation needs at least 4 time points");
    if (data.covariate_count() == 0) throw ConfigError("cross-validation needs at least one covariate");

    const fs::path dir = output_dir(s);
    prepare_output(dir);
    s.write_resolved(dir / "config.resolved");
    write_inputs(dir / "inputs.txt", s);

    const CvReport report = cross_validate(data, config, grid);

    std::ofstream folds(dir / "cv.csv");
    folds << "lambda,fold,held_out_time,loss,ok,rho_hat,phi_hat\n";
    const int F = report.folds_per_lambda;
    for (std::size_t l = 0; l < report.lambda_grid.size(); ++l) {
        for (int f = 0; f < F; ++f) {
            const auto& fold = report.folds[l * static_cast<std::size_t>(F) + static_cast<std::size_t>(f)];
            folds << format_double(fold.lambda) << ',' << f + 1 << ','
                  << format_double(data.network.grid()[fold.held_out]) << ','
                  << (fold.ok ? format_double(fold.loss) : "nan") << ',' << (fold.ok ? 1 : 0) << ','
                  << (fold.ok ? format_double(fold.rho_hat) : "nan") << ','
                  << (fold.ok ? format_double(fold.phi_hat) : "nan") << '\n';
        }
        folds << format_double(report.lambda_grid[l]) << ",mean,," << format_double(report.cv_error[l]) << ",,,\n";
    }
    folds.close();

    std::ofstream summary(dir / "cv_summary.csv");
    summary << "lambda,cv_error,selected\n";
    for (std::size_t l = 0; l < report.lambda_grid.size(); ++l)
        summary << format_double(report.lambda_grid[l]) << ',' << format_double(report.cv_error[l]) << ','
                << (report.lambda_grid[l] == report.lambda_star ? 1 : 0) << '\n';
    summary.close();
    std::ofstream(dir / "lambda_star.txt") << format_double(report.lambda_star) << '\n';

    Log log(dir / "log.txt");
    log << "loss parameters: " << report.loss_parameters << "\nlambda_star = " << format_double(report.lambda_star)
        << '\n';
    for (const auto& fold : report.folds)
        if (!fold.ok)
            log << "fold lambda = " << format_double(fold.lambda) << ", held out " << fold.held_out + 1
                << " failed: " << fold.error << '\n';

    config.lambda = Eigen::VectorXd::Constant(1, report.lambda_star);
    log << "\nrefit at lambda_star on all time points\n";
    const FitResult r = fit(data, config);
    write_fit_outputs(dir, r);
    log_fit(log, r);
    out << "lambda_star = " << format_double(report.lambda_star) << '\n';
    return kOk;
}

// ---------------------------------------------------------------- eval

std::map<std::string, std::string> read_truth(const fs::path& path) {
    std::map<std::string, std::string> out;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

double truth_value(const std::map<std::string, std::string>& t, const std::string& key, const fs::path& path) {
    const auto it = t.find(key);
    if (it == t.end()) throw DataError(path.string() + " lacks '" + key + "'");
    try {
        return to_double(key, it->second);
    } catch (const ConfigError&) {
        throw DataError(path.string() + ": '" + key + "' is not a number");
    }
}

Eigen::MatrixXd beta_columns(const io::Table& t, const fs::path& path) {
    if (t.header.empty() || t.header.front() != "t") throw DataError(path.string() + ": expected a 't' column first");
    return t.values.rightCols(t.values.cols() - 1);
}

Eigen::VectorXd checked_err(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
    if (est.rows() != truth.rows() || est.cols() != truth.cols())
        throw DataError("estimated beta(t) is " + std::to_string(est.rows()) + " x " + std::to_string(est.cols()) +
                        " but the truth is " + std::to_string(truth.rows()) + " x " + std::to_string(truth.cols()));
    return err_beta(est, truth);
}

std::vector<int> checked_labels(const fs::path& path, std::size_t n) {
    auto l = io::read_labels(path).values();
    if (n && l.size() != n)
        throw DataError(path.string() + " has " + std::to_string(l.size()) + " nodes, expected " + std::to_string(n));
    return l;
}

void write_summary_row(std::ostream& out, const std::string& name, double truth, const ParameterSummary& p) {
    out << name << ',' << format_double(truth) << ',' << p.runs << ',' << format_double(p.mean) << ','
        << format_double(p.bias) << ',' << (p.se ? format_double(*p.se) : "") << '\n';
}

int eval_single(const Settings& s, std::ostream& out) {
    if (s.empty("labels") || s.empty("truth-labels")) throw ConfigError("--labels and --truth-labels are required");
    const auto truth = checked_labels(s.text("truth-labels"), 0);
    const auto est = checked_labels(s.text("labels"), truth.size());
    std::optional<Eigen::VectorXd> err;
    if (!s.empty("beta") || !s.empty("truth-beta")) {
        if (s.empty("beta") || s.empty("truth-beta")) throw ConfigError("--beta and --truth-beta go together");
        const fs::path bp(s.text("beta")), tp(s.text("truth-beta"));
        err = checked_err(beta_columns(io::read_table(bp), bp), beta_columns(io::read_table(tp), tp));
    }
    const fs::path dir = output_dir(s);
    prepare_output(dir);
    s.write_resolved(dir / "config.resolved");
    const double score = nmi(est, truth).nmi;
    std::ofstream scores(dir / "scores.csv");
    scores << "metric,value\nnmi," << format_double(score) << '\n';
    if (err)
        for (Eigen::Index u = 0; u < err->size(); ++u)
            scores << "err_beta_" << u + 1 << ',' << format_double((*err)(u)) << '\n';
    scores.close();
    Log(dir / "log.txt") << "single evaluation\n";
    out << "nmi = " << format_double(score) << '\n';
    return kOk;
}

int eval_runs(const Settings& s, std::ostream& out) {
    const fs::path root(s.text("runs-dir"));
    if (!fs::is_directory(root)) throw ConfigError("--runs-dir " + root.string() + " is not a directory");
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) runs.push_back(e.path());
    std::sort(runs.begin(), runs.end());
    if (runs.empty()) throw DataError(root.string() + " contains no run directories");

    std::vector<RunRecord> records;
    std::optional<double> phi_true, rho_true;
    for (const auto& run : runs) {
        const fs::path truth_dir = run / "truth", fit_dir = run / "fit";
        const auto truth = read_truth(truth_dir / "truth.cfg");
        const double phi = truth_value(truth, "phi", truth_dir / "truth.cfg");
        const double rho = truth_value(truth, "rho", truth_dir / "truth.cfg");
        if ((phi_true && *phi_true != phi) || (rho_true && *rho_true != rho))
            throw DataError(run.string() + ": true phi/rho differ from earlier runs");
        phi_true = phi;
        rho_true = rho;
        const FitResult r = read_result(fit_dir / "result.txt");
        const auto labels = checked_labels(truth_dir / "labels_true.csv", static_cast<std::size_t>(r.nodes()));
        RunRecord rec;
        rec.phi_hat = r.phi_hat;
        rec.rho_hat = r.rho_hat;
        rec.nmi = nmi(r.labels, labels).nmi;
        const fs::path bt = truth_dir / "beta_true.csv";
        if (r.covariates() > 0) rec.err = checked_err(r.beta_t, beta_columns(io::read_table(bt), bt));
        if (!records.empty() && rec.err.size() != records.front().err.size())
            throw DataError(run.string() + ": covariate count differs from earlier runs");
        records.push_back(std::move(rec));
    }

    const fs::path dir = output_dir(s);
    prepare_output(dir);
    s.write_resolved(dir / "config.resolved");

    std::ofstream per_run(dir / "runs.csv");
    per_run << "run,phi_hat,rho_hat,nmi";
    for (Eigen::Index u = 0; u < records.front().err.size(); ++u) per_run << ",err_beta_" << u + 1;
    per_run << '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        per_run << runs[i].filename().string() << ',' << format_double(records[i].phi_hat) << ','
                << format_double(records[i].rho_hat) << ',' << format_double(records[i].nmi);
        for (Eigen::Index u = 0; u < records[i].err.size(); ++u) per_run << ',' << format_double(records[i].err(u));
        per_run << '\n';
    }
    per_run.close();

    const ParameterReport rep = parameter_report(records, *phi_true, *rho_true);
    std::ofstream params(dir / "params.csv");
    params << "parameter,truth,runs,mean,bias,se\n";
    write_summary_row(params, "phi", *phi_true, rep.phi);
    write_summary_row(params, "rho", *rho_true, rep.rho);
    write_summary_row(params, "nmi", 1.0, rep.nmi);
    for (std::size_t u = 0; u < rep.err.size(); ++u)
        write_summary_row(params, "err_beta_" + std::to_string(u + 1), 0.0, rep.err[u]);
    params.close();
    Log(dir / "log.txt") << "evaluated " << records.size() << " runs under " << root.string() << '\n';
    out << "mean nmi = " << format_double(rep.nmi.mean) << " over " << records.size() << " runs\n";
    return kOk;
}

int cmd_eval(const Settings& s, std::ostream& out) {
    if (!s.empty("runs-dir")) {
        if (!s.empty("labels") || !s.empty("beta")) throw ConfigError("--runs-dir excludes --labels and --beta");
        return eval_runs(s, out);
    }
    return eval_single(s, out);
}

// ---------------------------------------------------------------- density

int cmd_density(const Settings& s, std::ostream& out) {
    const auto ys = to_doubles("y", s.text("y"));
    if (ys.empty()) throw ConfigError("--y needs at least one value");
    const double mu = to_double("mu", s.text("mu"));
    const double phi = to_double("phi", s.text("phi"));
    const double rho = to_double("rho", s.text("rho"));
    const TweedieParams p(mu, phi, rho);
    for (double y : ys)
        if (y < 0.0) throw ConfigError("--y values must be non-negative");
    out << "y,mu,phi,rho,log_density\n";
    for (double y : ys)
        out << format_double(y) << ',' << format_double(mu) << ',' << format_double(phi) << ','
            << format_double(rho) << ',' << format_double(log_density(y, p)) << '\n';
    return kOk;
}

// ---------------------------------------------------------------- dispatch

struct Command {
    CLI::App* app;
    Settings settings;
    int (*handler)(const Settings&, std::ostream&);
};

void report(std::ostream& err, const char* kind, const std::string& stage, const std::string& message) {
    const nlohmann::json record{{"error", kind}, {"stage", stage}, {"message", message}};
    err << record.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weighted dynamic network clustering with a Tweedie stochastic block model"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::map<std::string, Command> commands;
    auto make = [&](const std::string& name, const std::string& help, auto handler) -> Command& {
        auto& c = commands[name];
        c.app = app.add_subcommand(name, help);
        c.app->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        c.handler = handler;
        c.app->add_option("--config", "key = value file; command-line flags take precedence");
        return c;
    };

    {
        auto& c = make("simulate", "generate a synthetic dynamic network", cmd_simulate);
        add_simulate(*c.app, c.settings);
    }
    {
        auto& c = make("fit", "fit the model at every rho in the grid", cmd_fit);
        add_common(*c.app, c.settings);
        add_data_options(*c.app, c.settings);
        add_fit_options(*c.app, c.settings);
    }
    {
        auto& c = make("cv", "leave-one-time-out cross-validation of the smoothing weight", cmd_cv);
        add_common(*c.app, c.settings);
        add_data_options(*c.app, c.settings);
        add_fit_options(*c.app, c.settings);
        std::string grid;
        for (double l : default_lambda_grid()) grid += (grid.empty() ? "" : ",") + format_double(l);
        c.settings.add(*c.app, "lambda-grid", grid, "comma-separated smoothing weights");
    }
    {
        auto& c = make("eval", "score estimates against the truth", cmd_eval);
        c.settings.add(*c.app, "out", "", "output directory");
        c.settings.add(*c.app, "labels", "", "estimated labels (node,label)");
        c.settings.add(*c.app, "truth-labels", "", "true labels (node,label)");
        c.settings.add(*c.app, "beta", "", "estimated beta(t) table");
        c.settings.add(*c.app, "truth-beta", "", "true beta(t) table");
        c.settings.add(*c.app, "runs-dir", "", "directory of runs, each with truth/ and fit/ subdirectories");
    }
    {
        auto& c = make("density", "print Tweedie log-densities", cmd_density);
        c.settings.add(*c.app, "y", "", "comma-separated responses");
        c.settings.add(*c.app, "mu", "1", "mean");
        c.settings.add(*c.app, "phi", "1", "dispersion");
        c.settings.add(*c.app, "rho", "1.5", "Tweedie power in (1,2)");
    }

    std::string stage = "arguments";
    try {
        // Config-file entries are parsed first as --key=value, so later
        // command-line occurrences win under TakeLast.
        std::vector<std::string> argv(args.begin(), args.end());
        if (argv.empty()) argv.emplace_back("twsbm");
        std::vector<std::string> expanded{argv.front()};
        std::optional<std::string> sub;
        std::optional<std::string> config_path;
        for (std::size_t i = 1; i < argv.size(); ++i) {
            const std::string& a = argv[i];
            if (!sub && commands.count(a)) sub = a;
            if (a == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
            if (a.rfind("--config=", 0) == 0) config_path = a.substr(9);
        }
        for (std::size_t i = 1; i < argv.size(); ++i) {
            expanded.push_back(argv[i]);
            if (sub && argv[i] == *sub && config_path) {
                for (const auto& [key, value] : read_config_file(*config_path)) {
                    if (key == "config" || !commands.at(*sub).settings.has(key))
                        throw ConfigError("unknown key '" + key + "' in " + *config_path + " for '" + *sub + "'");
                    expanded.push_back("--" + key + "=" + value);
                }
                sub.reset();
            }
        }
        std::vector<const char*> cargv;
        for (const auto& a : expanded) cargv.push_back(a.c_str());
        try {
            app.parse(static_cast<int>(cargv.size()), cargv.data());
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            throw ConfigError(e.what());
        }
        for (auto& [name, c] : commands) {
            if (!c.app->parsed()) continue;
            stage = name;
            return c.handler(c.settings, out);
        }
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        report(err, "config", stage, e.what());
        return kConfigError;
    } catch (const DataError& e) {
        report(err, "data", stage, e.what());
        return kDataError;
    } catch (const NumericalError& e) {
        report(err, "numerical", stage, e.what());
        return kNumericalError;
    } catch (const std::domain_error& e) {
        report(err, "config", stage, e.what());
        return kConfigError;
    }
}

}  // namespace twsbm::cli
