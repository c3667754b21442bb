#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sofari/sofari.hpp"

namespace py = pybind11;
using namespace sofari;
using namespace sofari::sphere;

namespace {

Variant to_variant(const std::string& v) {
  if (v == "strong") return Variant::Strong;
  if (v == "weak") return Variant::Weak;
  if (v == "split") return Variant::Split;
  throw InvalidArgument("variant must be strong, weak or split");
}

VariantChoice to_choice(const std::string& v) {
  if (v == "auto") return VariantChoice::Auto;
  switch (to_variant(v)) {
    case Variant::Strong: return VariantChoice::Strong;
    case Variant::Split: return VariantChoice::Split;
    default: return VariantChoice::Weak;
  }
}

py::dict triple_dict(const SvdTriple& t) {
  py::dict d;
  d["l"] = t.l;
  d["d"] = t.d;
  d["v"] = t.v;
  d["u"] = t.u();
  return d;
}

SvdTriple triple_from(const MatrixXd& l, const VectorXd& d, const MatrixXd& v) {
  SvdTriple t{l, d, v};
  t.validate();
  return t;
}

SofariConfig make_config(const std::string& variant, int rank, double sofar_c, double nodewise_c, double delta,
                         int workers, std::uint64_t seed) {
  SofariConfig c;
  c.variant = to_choice(variant);
  c.sofar.rank = rank;
  c.sofar.lambda_c = sofar_c;
  c.nodewise.c = nodewise_c;
  c.nodewise.workers = workers;
  c.delta = delta;
  c.workers = workers;
  c.split_seed = seed;
  return c;
}

py::dict simulate(int setting, std::uint64_t seed, std::optional<int> n, std::optional<double> snr) {
  SimSetting s = preset(setting);
  s.seed = seed;
  if (n) s.n = *n;
  if (snr) s.snr = *snr;
  const SimInstance in = gen_instance(s);
  py::dict d;
  d["x"] = in.data.x();
  d["y"] = in.data.y();
  d["truth"] = triple_dict(in.truth);
  d["sigma_e"] = in.sigma_e;
  d["components"] = tabulated_components(s);
  return d;
}

py::dict fit(const MatrixXd& x, const MatrixXd& y, int rank, double sofar_c) {
  SofarConfig c;
  c.rank = rank;
  c.lambda_c = sofar_c;
  const SofarEstimate e = fit_sofar(RegressionData(x, y), c);
  py::dict d = triple_dict(e.triple);
  d["c"] = e.c_tilde;
  d["lambda_u"] = e.lambda_u;
  d["lambda_v"] = e.lambda_v;
  d["iterations"] = e.iterations;
  d["converged"] = e.converged;
  d["objective"] = e.objective_trace;
  return d;
}

py::dict infer(const MatrixXd& x, const MatrixXd& y, const std::string& variant, int rank, double sofar_c,
               double nodewise_c, double delta, int workers, std::uint64_t seed) {
  const RegressionData data(x, y);
  const SofariConfig c = make_config(variant, rank, sofar_c, nodewise_c, delta, workers, seed);
  SofariResult r;
  {
    py::gil_scoped_release release;
    r = c.variant == VariantChoice::Split ? run_sofari_split(data, c) : run_sofari(data, c);
  }
  py::dict d;
  d["variant"] = variant_name(r.variant);
  d["rank"] = r.estimate.r();
  d["n_used"] = r.n_used;
  d["estimate"] = triple_dict(r.estimate.triple);
  d["theta"] = r.theta.theta;
  d["sigma_e"] = r.sigma_e.sigma;
  py::list layers;
  for (const auto& L : r.layers) {
    py::dict l;
    l["k"] = L.k;
    l["ok"] = L.ok;
    l["failure"] = L.failure;
    l["u_hat"] = L.u_hat;
    l["var_u"] = L.var_u;
    l["d2_hat"] = L.d2_hat;
    l["var_d2"] = L.var_d2;
    l["used_fallback"] = L.used_fallback;
    layers.append(l);
  }
  d["layers"] = layers;
  return d;
}

py::dict diagnose(const MatrixXd& x, const MatrixXd& y, const MatrixXd& l, const VectorXd& dv, const MatrixXd& v) {
  const OrthogonalityReport r = diagnose_orthogonality(triple_from(l, dv, v), RegressionData(x, y));
  py::dict d;
  d["strong"] = r.strong;
  d["weak"] = r.weak;
  d["eigengap"] = r.eigengap;
  d["threshold"] = r.threshold;
  d["recommended"] = variant_name(r.recommended);
  return d;
}

py::dict coverage(int setting, int reps, std::uint64_t seed, double alpha, const std::string& variant, int workers,
                  bool rank_auto) {
  CoverageConfig cfg;
  cfg.setting = preset(setting);
  cfg.setting.seed = seed;
  cfg.replications = reps;
  cfg.alpha = alpha;
  cfg.workers = workers;
  cfg.rank_auto = rank_auto;
  cfg.sofari.variant = to_choice(variant);
  CoverageResult res;
  {
    py::gil_scoped_release release;
    res = coverage_run(cfg);
  }
  py::list rows;
  for (size_t c = 0; c < res.summaries.size(); ++c) {
    const auto& s = res.summaries[c];
    py::dict row;
    row["component"] = s.component;
    row["layer"] = s.layer;
    row["coord"] = s.coord;
    row["cp"] = s.cp;
    row["covered"] = s.covered;
    row["mean_len"] = s.mean_len;
    row["replications"] = s.replications;
    row["stats"] = res.stats(c);
    rows.append(row);
  }
  py::dict d;
  d["summaries"] = rows;
  d["failed_replications"] = res.failed_replications;
  return d;
}

}  // namespace

PYBIND11_MODULE(_sofari, m) {
  m.doc() = "Debiased inference for sparse reduced-rank regression layers";

  // Later registrations are tried first, so the subclasses go after the base.
  auto& base = py::register_exception<Error>(m, "SofariError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<SingularInnerMatrix>(m, "SingularInnerMatrix", base.ptr());

  m.def("simulate", &simulate, py::arg("setting") = 1, py::arg("seed") = 1, py::arg("n") = py::none(),
        py::arg("snr") = py::none(), "Draw one instance of a simulation setting (1-5).");
  m.def("fit", &fit, py::arg("x"), py::arg("y"), py::arg("rank") = 0, py::arg("sofar_c") = SofarConfig{}.lambda_c,
        "Sparse SVD fit; rank 0 estimates the rank.");
  m.def("infer", &infer, py::arg("x"), py::arg("y"), py::arg("variant") = "weak", py::arg("rank") = 0,
        py::arg("sofar_c") = SofarConfig{}.lambda_c, py::arg("nodewise_c") = NodewiseConfig{}.c,
        py::arg("delta") = 2.0, py::arg("workers") = 1, py::arg("seed") = 0,
        "Debiased layer estimates and their variances.");
  m.def("diagnose", &diagnose, py::arg("x"), py::arg("y"), py::arg("l"), py::arg("d"), py::arg("v"),
        "Cross-layer orthogonality statistics of an SVD triple.");
  m.def("coverage", &coverage, py::arg("setting") = 1, py::arg("reps") = 200, py::arg("seed") = 1,
        py::arg("alpha") = 0.05, py::arg("variant") = "weak", py::arg("workers") = 1, py::arg("rank_auto") = false,
        "Monte-Carlo coverage study.");

  m.def("ci", [](double center, double variance, int n, double alpha) {
    const ConfidenceInterval c = ci(center, variance, n, alpha);
    return py::make_tuple(c.lower, c.upper);
  }, py::arg("center"), py::arg("variance"), py::arg("n"), py::arg("alpha") = 0.05);
  m.def("standardized_stat", &standardized_stat, py::arg("est"), py::arg("truth"), py::arg("variance"), py::arg("n"));
  m.def("pvalue_two_sided", &pvalue_two_sided, py::arg("t"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def("bh_fdr", &bh_fdr, py::arg("pvalues"), py::arg("q"));
  m.def("kde", [](const std::vector<double>& x, int points, std::optional<std::pair<double, double>> range) {
    const Kde k = range ? kde_export(x, points, range->first, range->second) : kde_export(x, points);
    return py::make_tuple(k.grid, k.density, k.bandwidth);
  }, py::arg("samples"), py::arg("points") = 201, py::arg("range") = py::none());

  m.def("nodewise_precision", [](const MatrixXd& x, double c) {
    NodewiseConfig cfg;
    cfg.c = c;
    const MatrixXd y = MatrixXd::Zero(x.rows(), 1);
    const ApproxInverse a = nodewise_precision(RegressionData(x, y), cfg);
    return py::make_tuple(a.theta, a.max_violation);
  }, py::arg("x"), py::arg("c") = NodewiseConfig{}.c);
  m.def("exp_map", [](const VectorXd& v, const VectorXd& xi) {
    const SpherePoint p(v);
    if (std::abs(p.v.dot(xi)) > 1e-10 * std::max(1.0, xi.norm())) throw InvalidArgument("xi is not tangent at v");
    return exp_map(p, TangentVector{p.v, xi}).v;
  }, py::arg("v"), py::arg("xi"));
  m.def("log_map", [](const VectorXd& v, const VectorXd& w) {
    return log_map(SpherePoint(v), SpherePoint(w)).xi;
  }, py::arg("v"), py::arg("w"));
}
