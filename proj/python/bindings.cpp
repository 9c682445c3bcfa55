#include "mixmom/errors.hpp"
#include "mixmom/estimator.hpp"
#include "mixmom/moments.hpp"
#include "mixmom/simbench.hpp"
#include "mixmom/spectral.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace mixmom;

namespace {

Dataset to_dataset(const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.rows() != y.size()) throw std::invalid_argument("X and y have different numbers of rows");
    Dataset data;
    data.x = x;
    data.y.resize(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw std::invalid_argument("y must contain only 0 and 1");
        data.y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(y[i]);
    }
    return data;
}

py::array_t<double> tensor_array(const Tensor3& t) {
    const py::ssize_t d = t.dim();
    py::array_t<double> out({d, d, d});
    auto a = out.mutable_unchecked<3>();
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l) a(j, k, l) = t(j, k, l);
    return out;
}

py::dict moment_dict(const MomentSet& ms) {
    py::dict out;
    out["m1"] = ms.m1;
    out["m2"] = ms.m2;
    out["m3"] = tensor_array(ms.m3);
    out["flat"] = flatten(ms);
    return out;
}

Link link_of(const std::string& s) { return parse_link(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Moment estimators for mixtures of binary regressions";

    py::class_<Parameters>(m, "Parameters")
        .def(py::init([](const Eigen::VectorXd& omega, const Eigen::MatrixXd& beta, const Eigen::VectorXd& b) {
                 Parameters p{omega, beta, b};
                 p.validate();
                 return p;
             }),
             py::arg("omega"), py::arg("beta"), py::arg("b"))
        .def_readwrite("omega", &Parameters::omega)
        .def_readwrite("beta", &Parameters::beta)
        .def_readwrite("b", &Parameters::b)
        .def_property_readonly("d", &Parameters::dim)
        .def_property_readonly("K", &Parameters::components)
        .def("to_vector", &Parameters::to_vector)
        .def("__repr__", [](const Parameters& p) {
            return "Parameters(d=" + std::to_string(p.dim()) + ", K=" + std::to_string(p.components()) + ")";
        });

    m.def("builtin_experiment", [](int id, const std::string& link) {
        return builtin_experiment(id, link_of(link)).theta_star;
    }, py::arg("id"), py::arg("link") = "logit");

    m.def("generate", [](const Parameters& theta, const std::string& link, int n, std::uint64_t seed) {
        const Dataset data = generate(theta, link_of(link), n, seed);
        Eigen::VectorXd y(data.size());
        for (int i = 0; i < data.size(); ++i) y[i] = data.y[static_cast<std::size_t>(i)];
        return py::make_tuple(data.x, y);
    }, py::arg("theta"), py::arg("link"), py::arg("n"), py::arg("seed") = 1);

    m.def("empirical_moments", [](const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
        return moment_dict(empirical_moments(to_dataset(x, y)));
    }, py::arg("X"), py::arg("y"));

    m.def("theoretical_moments", [](const Parameters& theta, const std::string& link) {
        return moment_dict(theoretical_moments(theta, link_of(link)));
    }, py::arg("theta"), py::arg("link"));

    m.def("init_directions", [](const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                                int k) {
        const DirectionEstimate est = init_directions(empirical_moments(to_dataset(x, y)), k);
        py::dict out;
        out["mu"] = est.mu;
        out["signal"] = est.signal;
        out["criterion"] = est.diagonalization.criterion;
        out["warnings"] = est.warnings;
        return out;
    }, py::arg("X"), py::arg("y"), py::arg("K"));

    m.def("m3ls", [](const Eigen::Ref<const RowMatrix>& x, const Eigen::Ref<const Eigen::VectorXd>& y, int k,
                     const std::string& link, int random_starts, int w_updates, bool covariance, std::uint64_t seed) {
        const Dataset data = to_dataset(x, y);
        EstimateOptions opts;
        opts.w_updates = w_updates;
        opts.covariance = covariance;
        opts.seed = seed;
        EstimateReport rep;
        {
            py::gil_scoped_release release;
            rep = random_starts > 0 ? m3ls_random_starts(data, k, link_of(link), random_starts, opts)
                                    : m3ls(data, k, link_of(link), opts);
        }
        py::dict out;
        out["theta"] = rep.theta_hat;
        out["theta_init"] = rep.theta_init;
        out["objective"] = rep.objective_value;
        out["gradient_norm"] = rep.gradient_norm;
        out["converged"] = rep.converged;
        out["iterations"] = rep.iterations;
        out["covariance"] = rep.sigma_hat ? py::cast(*rep.sigma_hat) : py::none();
        out["h4_ok"] = rep.regularity.h4_ok;
        out["h5_ok"] = rep.regularity.h5_ok;
        out["warnings"] = rep.warnings;
        return out;
    }, py::arg("X"), py::arg("y"), py::arg("K"), py::arg("link") = "logit", py::arg("random_starts") = 0,
       py::arg("w_updates") = 1, py::arg("covariance") = true, py::arg("seed") = 0);

    m.def("summed_errors", [](const Parameters& estimate, const Parameters& truth) {
        const Parameters aligned = apply_permutation(estimate, align(estimate, truth));
        const SummedErrors e = summed_errors(aligned, truth);
        py::dict out;
        out["p"] = e.p;
        out["b"] = e.b;
        out["beta"] = e.beta;
        out["total"] = e.total();
        return out;
    }, py::arg("estimate"), py::arg("truth"));

    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
}
