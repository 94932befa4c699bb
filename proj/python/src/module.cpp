#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "twsbm/cv.hpp"
#include "twsbm/errors.hpp"
#include "twsbm/evaluation.hpp"
#include "twsbm/fit.hpp"
#include "twsbm/io.hpp"
#include "twsbm/tweedie.hpp"

namespace py = pybind11;
using namespace twsbm;

namespace {

NetworkData make_data(const std::vector<Eigen::MatrixXd>& networks, const std::vector<Eigen::MatrixXd>& covariates,
                      std::optional<std::vector<double>> times, bool symmetrize) {
    if (networks.empty()) throw DataError("at least one network matrix is required");
    TimeGrid grid = times ? TimeGrid(*times) : TimeGrid::uniform(static_cast<int>(networks.size()));
    DynamicNetwork net = symmetrize ? validate_and_symmetrize(grid, networks) : DynamicNetwork(grid, networks);
    const int n = net.nodes();
    NetworkData data{std::move(net), covariates.empty() ? CovariateSet() : CovariateSet(n, covariates)};
    data.validate();
    return data;
}

struct Simulation {
    std::vector<Eigen::MatrixXd> networks;
    std::vector<Eigen::MatrixXd> covariates;
    std::vector<double> times;
    std::vector<int> labels;
    Eigen::MatrixXd beta_true;
    Eigen::MatrixXd beta0_true;
};

}  // namespace

PYBIND11_MODULE(_twsbm, m) {
    m.doc() = "Tweedie stochastic block models for weighted dynamic networks";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    m.def(
        "log_density",
        [](const Eigen::VectorXd& y, double mu, double phi, double rho) {
            const TweedieParams params(mu, phi, rho);
            Eigen::VectorXd out(y.size());
            for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = log_density(y(i), params);
            return out;
        },
        py::arg("y"), py::arg("mu"), py::arg("phi"), py::arg("rho"));

    m.def(
        "sample",
        [](int count, double mu, double phi, double rho, std::uint64_t seed) {
            const TweedieParams params(mu, phi, rho);
            Rng rng(seed);
            Eigen::VectorXd out(count);
            for (int i = 0; i < count; ++i) out(i) = sample(params, rng);
            return out;
        },
        py::arg("count"), py::arg("mu"), py::arg("phi"), py::arg("rho"), py::arg("seed") = 1);

    py::class_<Simulation>(m, "Simulation")
        .def_readonly("networks", &Simulation::networks)
        .def_readonly("covariates", &Simulation::covariates)
        .def_readonly("times", &Simulation::times)
        .def_readonly("labels", &Simulation::labels)
        .def_readonly("beta_true", &Simulation::beta_true)
        .def_readonly("beta0_true", &Simulation::beta0_true);

    m.def(
        "simulate",
        [](int n, int K, std::vector<double> pi, int scenario, std::optional<double> beta0_diag,
           std::optional<double> beta0_offdiag, double phi, double rho, int T, std::vector<std::string> beta,
           const std::string& covariate_law, std::uint64_t seed) {
            SimulationConfig c;
            c.n = n;
            c.communities = K;
            c.pi = std::move(pi);
            std::tie(c.beta0_diag, c.beta0_offdiag) = SimulationConfig::scenario(scenario);
            if (beta0_diag) c.beta0_diag = *beta0_diag;
            if (beta0_offdiag) c.beta0_offdiag = *beta0_offdiag;
            c.phi = phi;
            c.rho = rho;
            c.grid = TimeGrid::uniform(T);
            for (const auto& b : beta) c.beta.push_back(BetaCurve::parse(b));
            if (covariate_law == "uniform") c.law = CovariateLaw::Uniform;
            else if (covariate_law == "normal") c.law = CovariateLaw::Normal;
            else throw ConfigError("covariate_law must be 'uniform' or 'normal'");
            c.seed = seed;
            const SimulatedData sim = generate(c);
            return Simulation{sim.data.network.weights(), sim.data.covariates.matrices(), c.grid.points(),
                              sim.labels.values(), c.beta_on_grid(), c.beta0()};
        },
        py::arg("n") = 50, py::arg("K") = 3, py::arg("pi") = std::vector<double>{0.2, 0.3, 0.5},
        py::arg("scenario") = 1, py::arg("beta0_diag") = py::none(), py::arg("beta0_offdiag") = py::none(),
        py::arg("phi") = 1.0, py::arg("rho") = 1.5, py::arg("T") = 1, py::arg("beta") = std::vector<std::string>{},
        py::arg("covariate_law") = "uniform", py::arg("seed") = 1);

    py::class_<FitConfig>(m, "FitConfig")
        .def(py::init<>())
        .def_readwrite("K", &FitConfig::communities)
        .def_readwrite("rho_grid", &FitConfig::rho_grid)
        .def_readwrite("lambda_", &FitConfig::lambda)
        .def_readwrite("starts", &FitConfig::starts)
        .def_readwrite("max_iter", &FitConfig::max_iter)
        .def_readwrite("tol", &FitConfig::tol)
        .def_readwrite("split_merge_rounds", &FitConfig::split_merge_rounds)
        .def_readwrite("seed", &FitConfig::seed)
        .def_readwrite("threads", &FitConfig::threads)
        .def("validate", &FitConfig::validate);

    py::class_<RhoDiagnostics>(m, "RhoDiagnostics")
        .def_readonly("rho", &RhoDiagnostics::rho)
        .def_readonly("ok", &RhoDiagnostics::ok)
        .def_readonly("error", &RhoDiagnostics::error)
        .def_readonly("loglik", &RhoDiagnostics::loglik)
        .def_readonly("elbo", &RhoDiagnostics::elbo)
        .def_readonly("phi", &RhoDiagnostics::phi)
        .def_readonly("iterations", &RhoDiagnostics::iterations)
        .def_readonly("converged", &RhoDiagnostics::converged);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("rho_hat", &FitResult::rho_hat)
        .def_readonly("phi_hat", &FitResult::phi_hat)
        .def_readonly("beta0", &FitResult::beta0)
        .def_readonly("eta", &FitResult::eta)
        .def_readonly("beta_t", &FitResult::beta_t)
        .def_readonly("tau", &FitResult::tau)
        .def_readonly("pi", &FitResult::pi)
        .def_readonly("labels", &FitResult::labels)
        .def_readonly("loglik", &FitResult::loglik)
        .def_readonly("elbo", &FitResult::elbo)
        .def_readonly("times", &FitResult::times)
        .def_readonly("per_rho", &FitResult::per_rho)
        .def("beta_at", &FitResult::beta_at, py::arg("t"));

    m.def("default_rho_grid", &default_rho_grid);
    m.def("default_lambda_grid", &default_lambda_grid);

    m.def(
        "fit",
        [](const std::vector<Eigen::MatrixXd>& networks, const std::vector<Eigen::MatrixXd>& covariates,
           std::optional<std::vector<double>> times, const FitConfig& config, bool symmetrize) {
            const NetworkData data = make_data(networks, covariates, std::move(times), symmetrize);
            py::gil_scoped_release release;
            return fit(data, config);
        },
        py::arg("networks"), py::arg("covariates") = std::vector<Eigen::MatrixXd>{}, py::arg("times") = py::none(),
        py::arg("config") = FitConfig(), py::arg("symmetrize") = true);

    py::class_<CvFold>(m, "CvFold")
        .def_readonly("lambda_", &CvFold::lambda)
        .def_readonly("held_out", &CvFold::held_out)
        .def_readonly("ok", &CvFold::ok)
        .def_readonly("loss", &CvFold::loss);

    py::class_<CvReport>(m, "CvReport")
        .def_readonly("lambda_grid", &CvReport::lambda_grid)
        .def_readonly("cv_error", &CvReport::cv_error)
        .def_readonly("folds", &CvReport::folds)
        .def_readonly("lambda_star", &CvReport::lambda_star);

    m.def(
        "cross_validate",
        [](const std::vector<Eigen::MatrixXd>& networks, const std::vector<Eigen::MatrixXd>& covariates,
           std::optional<std::vector<double>> times, const FitConfig& config, std::vector<double> lambda_grid) {
            const NetworkData data = make_data(networks, covariates, std::move(times), true);
            py::gil_scoped_release release;
            return cross_validate(data, config, lambda_grid);
        },
        py::arg("networks"), py::arg("covariates"), py::arg("times") = py::none(), py::arg("config") = FitConfig(),
        py::arg("lambda_grid") = default_lambda_grid());

    m.def(
        "load_csv",
        [](const std::filesystem::path& manifest, const std::vector<std::filesystem::path>& covariates, bool symmetrize) {
            const NetworkData data = io::load_csv(manifest, covariates, symmetrize);
            return py::make_tuple(data.network.weights(), data.covariates.matrices(), data.network.grid().points());
        },
        py::arg("manifest"), py::arg("covariates") = std::vector<std::filesystem::path>{}, py::arg("symmetrize") = true,
        "Returns (networks, covariates, times).");

    m.def("nmi", [](const std::vector<int>& a, const std::vector<int>& b) { return nmi(a, b).nmi; }, py::arg("a"),
          py::arg("b"));
    m.def("err_beta", &err_beta, py::arg("est"), py::arg("truth"));

    m.def("write_result", &write_result, py::arg("path"), py::arg("result"));
    m.def("read_result", &read_result, py::arg("path"));
}
