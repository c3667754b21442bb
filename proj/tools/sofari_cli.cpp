// sofari: simulate | fit | infer | diagnose
// Exit codes: 0 ok, 2 usage/config/input error, 3 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "csv_io.hpp"
#include "sofari/sofari.hpp"

#ifndef SOFARI_VERSION
#define SOFARI_VERSION "unknown"
#endif

using nlohmann::json;
namespace fs = std::filesystem;
using namespace sofari;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  int setting = 1;
  int reps = 200;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::string variant = "weak";
  std::string rank;  // "auto", a positive integer, or empty for the command default
  double fdr = 0.05;
  int workers = 1;
  std::string out = ".";
  std::string config;
  std::string x, y;
  bool header = false;
  double sofar_c = SofarConfig{}.lambda_c;
  double nodewise_c = NodewiseConfig{}.c;
  double delta = 2.0;
  int kde_points = 201;
  bool export_data = false;
};

// Config fields recorded in the provenance record per command. Paths and the
// worker count do not change results and are left out.
const std::vector<std::string> kSimulateKeys = {"setting", "reps",    "seed",       "alpha", "variant",
                                                "rank",    "sofar_c", "nodewise_c", "delta", "kde_points"};
const std::vector<std::string> kDataKeys = {"seed",    "alpha",      "variant", "rank",  "fdr",
                                            "sofar_c", "nodewise_c", "delta",   "header"};

std::string flag_for(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

void add_common(CLI::App* c, Options& o) {
  c->add_option("--seed", o.seed, "Master seed (falls back to SOFARI_SEED)");
  c->add_option("--alpha", o.alpha, "Interval level is 1 - alpha");
  c->add_option("--variant", o.variant, "strong, weak, split or auto");
  c->add_option("--rank", o.rank, "auto or a positive integer");
  c->add_option("--workers", o.workers, "Worker threads");
  c->add_option("--out", o.out, "Output directory");
  c->add_option("--config", o.config, "JSON config; flags override its fields");
  c->add_option("--sofar-c", o.sofar_c, "SOFAR penalty constant");
  c->add_option("--nodewise-c", o.nodewise_c, "Nodewise Lasso penalty constant");
  c->add_option("--delta", o.delta, "Error-covariance threshold constant");
}

void add_data(CLI::App* c, Options& o) {
  c->add_option("--x", o.x, "Design CSV (rows are observations)");
  c->add_option("--y", o.y, "Response CSV");
  c->add_flag("--header", o.header, "CSV files start with a header row");
}

// Fill fields not given on the command line from the config file, then the
// seed from SOFARI_SEED if still unset.
void resolve(CLI::App* c, Options& o) {
  auto given = [&](const std::string& key) {
    try {
      return c->get_option(flag_for(key))->count() > 0;
    } catch (const CLI::OptionNotFound&) {
      return true;  // not applicable to this command
    }
  };
  bool seed_set = given("seed");
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw UsageError("cannot open config " + o.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("config " + o.config + ": " + e.what());
    }
    if (j.contains("config") && j["config"].is_object()) j = j["config"];  // a provenance record
    try {
      static const std::set<std::string> known = {"setting", "reps",    "seed",       "alpha", "variant",
                                                  "rank",    "fdr",     "workers",    "out",   "x",
                                                  "y",       "header",  "sofar_c",    "nodewise_c", "delta",
                                                  "kde_points"};
      for (auto& [key, v] : j.items()) {
        if (!known.count(key)) throw UsageError("config " + o.config + ": unknown key '" + key + "'");
        if (given(key)) continue;
        if (key == "setting") o.setting = v.get<int>();
        else if (key == "reps") o.reps = v.get<int>();
        else if (key == "seed") o.seed = v.get<std::uint64_t>(), seed_set = true;
        else if (key == "alpha") o.alpha = v.get<double>();
        else if (key == "variant") o.variant = v.get<std::string>();
        else if (key == "rank") o.rank = v.is_number() ? std::to_string(v.get<int>()) : v.get<std::string>();
        else if (key == "fdr") o.fdr = v.get<double>();
        else if (key == "workers") o.workers = v.get<int>();
        else if (key == "out") o.out = v.get<std::string>();
        else if (key == "x") o.x = v.get<std::string>();
        else if (key == "y") o.y = v.get<std::string>();
        else if (key == "header") o.header = v.get<bool>();
        else if (key == "sofar_c") o.sofar_c = v.get<double>();
        else if (key == "nodewise_c") o.nodewise_c = v.get<double>();
        else if (key == "delta") o.delta = v.get<double>();
        else if (key == "kde_points") o.kde_points = v.get<int>();
      }
    } catch (const json::exception& e) {
      throw UsageError("config " + o.config + ": " + e.what());
    }
  }
  if (!seed_set)
    if (const char* env = std::getenv("SOFARI_SEED")) {
      const std::string s = env;
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw UsageError("SOFARI_SEED must be a non-negative integer");
      o.seed = std::stoull(s);
    }
}

VariantChoice parse_variant(const std::string& v) {
  if (v == "strong") return VariantChoice::Strong;
  if (v == "weak") return VariantChoice::Weak;
  if (v == "split") return VariantChoice::Split;
  if (v == "auto") return VariantChoice::Auto;
  throw UsageError("--variant must be strong, weak, split or auto");
}

// 0 means estimate the rank.
int parse_rank(const std::string& r) {
  if (r.empty() || r == "auto") return 0;
  if (r.find_first_not_of("0123456789") != std::string::npos || std::stoi(r) < 1)
    throw UsageError("--rank must be 'auto' or a positive integer");
  return std::stoi(r);
}

void validate(const Options& o) {
  if (!(o.alpha > 0 && o.alpha < 1)) throw UsageError("--alpha must lie in (0, 1)");
  if (!(o.fdr > 0 && o.fdr < 1)) throw UsageError("--fdr must lie in (0, 1)");
  if (o.workers < 1) throw UsageError("--workers must be at least 1");
  if (!(o.sofar_c > 0)) throw UsageError("--sofar-c must be positive");
  if (!(o.nodewise_c >= 0)) throw UsageError("--nodewise-c must be non-negative");
  if (!(o.delta >= 0)) throw UsageError("--delta must be non-negative");
  parse_variant(o.variant);
  parse_rank(o.rank);
}

SofariConfig sofari_config(const Options& o) {
  SofariConfig c;
  c.variant = parse_variant(o.variant);
  c.sofar.rank = parse_rank(o.rank);
  c.sofar.lambda_c = o.sofar_c;
  c.nodewise.c = o.nodewise_c;
  c.nodewise.workers = o.workers;
  c.delta = o.delta;
  c.split_seed = o.seed;
  c.workers = o.workers;
  return c;
}

json provenance(const std::string& command, const Options& o) {
  const json all = {{"setting", o.setting}, {"reps", o.reps},       {"seed", o.seed},
                    {"alpha", o.alpha},     {"variant", o.variant}, {"rank", o.rank.empty() ? "default" : o.rank},
                    {"fdr", o.fdr},         {"sofar_c", o.sofar_c}, {"nodewise_c", o.nodewise_c},
                    {"delta", o.delta},     {"kde_points", o.kde_points}, {"header", o.header}};
  json cfg = json::object();
  for (const auto& k : command == "simulate" ? kSimulateKeys : kDataKeys)
    if (!(k == "rank" && o.rank.empty())) cfg[k] = all[k];
  json p = {{"tool", "sofari"},
            {"command", command},
            {"config", cfg},
            {"seed", o.seed},
            {"versions",
             {{"sofari", SOFARI_VERSION},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"compiler", __VERSION__}}}};
  if (!o.x.empty()) p["inputs"] = {{"x", fs::path(o.x).filename().string()}, {"y", fs::path(o.y).filename().string()}};
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path.string() + ": cannot write");
  f << text;
}

fs::path out_dir(const Options& o) {
  fs::path d(o.out);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw UsageError("cannot create output directory " + o.out);
  return d;
}

RegressionData load_data(const Options& o) {
  if (o.x.empty() || o.y.empty()) throw UsageError("--x and --y are required");
  MatrixXd x, y;
  try {
    x = cli::read_csv(o.x, o.header);
    y = cli::read_csv(o.y, o.header);
  } catch (const cli::CsvError& e) {
    throw UsageError(e.what());
  }
  if (x.rows() != y.rows())
    throw UsageError("row count mismatch: " + o.x + " has " + std::to_string(x.rows()) + " data rows, " + o.y +
                     " has " + std::to_string(y.rows()));
  return RegressionData(x, y);
}

// "u1,3" -> "u1_3", "d1^2" -> "d1sq"
std::string safe_name(std::string component) {
  std::replace(component.begin(), component.end(), ',', '_');
  if (const auto at = component.find("^2"); at != std::string::npos) component.replace(at, 2, "sq");
  return component;
}

int cmd_simulate(const Options& o) {
  if (o.setting < 1 || o.setting > 5) throw UsageError("--setting must be 1-5");
  if (o.reps < 1) throw UsageError("--reps must be at least 1");
  if (o.kde_points < 2) throw UsageError("--kde-points must be at least 2");
  CoverageConfig cfg;
  cfg.setting = preset(o.setting);
  cfg.setting.seed = o.seed;
  cfg.replications = o.reps;
  cfg.alpha = o.alpha;
  cfg.workers = o.workers;
  cfg.sofari = sofari_config(o);
  cfg.sofari.workers = 1;
  cfg.sofari.nodewise.workers = 1;
  cfg.rank_auto = o.rank == "auto";
  if (!cfg.rank_auto && !o.rank.empty() && parse_rank(o.rank) != cfg.setting.r)
    throw UsageError("--rank must be 'auto' or the true rank " + std::to_string(cfg.setting.r));
  const fs::path dir = out_dir(o);
  const std::string prov = "provenance: provenance.json";
  write_text(dir / "provenance.json", provenance("simulate", o).dump(2) + "\n");

  if (o.export_data) {
    const SimInstance in = gen_instance(cfg.setting);
    cli::write_csv((dir / "x.csv").string(), in.data.x(), prov);
    cli::write_csv((dir / "y.csv").string(), in.data.y(), prov);
  }

  const CoverageResult res = coverage_run(cfg);
  std::string tsv = "# " + prov + "\ncomponent\tCP\tLen\treps\n";
  char buf[256];
  for (const auto& s : res.summaries) {
    std::snprintf(buf, sizeof buf, "%s\t%.3f\t%.4f\t%d\n", s.component.c_str(), s.cp, s.mean_len, s.replications);
    tsv += buf;
  }
  write_text(dir / "coverage.tsv", tsv);

  for (size_t c = 0; c < res.summaries.size(); ++c) {
    const auto t = res.stats(c);
    if (t.size() < 2) continue;
    const Kde k = kde_export(t, o.kde_points, -4.0, 4.0);
    std::string csv = "# " + prov + "\nt,density\n";
    for (size_t i = 0; i < k.grid.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f,%.10g\n", k.grid[i], k.density[i]);
      csv += buf;
    }
    write_text(dir / ("kde_" + safe_name(res.summaries[c].component) + ".csv"), csv);
  }
  std::printf("%s", tsv.c_str());
  if (!res.failed_replications.empty()) {
    std::fprintf(stderr, "%zu of %d replications failed\n", res.failed_replications.size(), o.reps);
    return 3;
  }
  return 0;
}

json matrix_json(const MatrixXd& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

int cmd_fit(const Options& o) {
  const RegressionData d = load_data(o);
  const SofariConfig c = sofari_config(o);
  const SofarEstimate e = fit_sofar(d, c.sofar);
  json rep = provenance("fit", o);
  rep["n"] = d.n();
  rep["rank"] = e.r();
  rep["lambda_u"] = e.lambda_u;
  rep["lambda_v"] = e.lambda_v;
  rep["iterations"] = e.iterations;
  rep["converged"] = e.converged;
  rep["d"] = std::vector<double>(e.triple.d.data(), e.triple.d.data() + e.r());
  rep["u"] = matrix_json(e.u());
  rep["v"] = matrix_json(e.triple.v);
  write_text(out_dir(o) / "fit.json", rep.dump(2) + "\n");
  std::printf("rank %d, %s after %d iterations\n", e.r(), e.converged ? "converged" : "not converged", e.iterations);
  for (int k = 0; k < e.r(); ++k) std::printf("d%d = %.6g\n", k + 1, e.triple.d(k));
  return e.converged ? 0 : 3;
}

int cmd_infer(const Options& o) {
  const RegressionData d = load_data(o);
  const SofariConfig c = sofari_config(o);
  const SofariResult r = c.variant == VariantChoice::Split ? run_sofari_split(d, c) : run_sofari(d, c);
  json rep = provenance("infer", o);
  rep["n"] = d.n();
  rep["n_used"] = r.n_used;
  rep["rank"] = r.estimate.r();
  rep["variant"] = variant_name(r.variant);
  json layers = json::array();
  for (const auto& L : r.layers) {
    json lj = {{"k", L.k + 1}, {"ok", L.ok}};
    if (!L.ok) {
      lj["failure"] = L.failure;
      layers.push_back(lj);
      continue;
    }
    const ConfidenceInterval dci = ci(L.d2_hat, L.var_d2, r.n_used, o.alpha);
    lj["d2_hat"] = L.d2_hat;
    lj["d2_ci"] = {dci.lower, dci.upper};
    lj["variance_fallback"] = L.used_fallback;
    std::vector<double> pv(L.u_hat.size());
    for (int j = 0; j < L.u_hat.size(); ++j)
      pv[j] = pvalue_two_sided(standardized_stat(L.u_hat(j), 0.0, L.var_u(j), r.n_used));
    const std::vector<int> sel = bh_fdr(pv, o.fdr);
    std::vector<char> chosen(pv.size(), 0);
    for (int j : sel) chosen[j] = 1;
    json feats = json::array();
    for (int j = 0; j < L.u_hat.size(); ++j) {
      const ConfidenceInterval fci = ci(L.u_hat(j), L.var_u(j), r.n_used, o.alpha);
      feats.push_back({{"j", j + 1},
                       {"u_hat", L.u_hat(j)},
                       {"ci", {fci.lower, fci.upper}},
                       {"pvalue", pv[j]},
                       {"selected", static_cast<bool>(chosen[j])}});
    }
    lj["features"] = feats;
    layers.push_back(lj);
    std::printf("layer %d: d2_hat %.6g [%.6g, %.6g], %zu features selected\n", L.k + 1, L.d2_hat, dci.lower,
                dci.upper, sel.size());
  }
  rep["layers"] = layers;
  write_text(out_dir(o) / "report.json", rep.dump(2) + "\n");
  if (!r.all_ok()) {
    for (const auto& L : r.layers)
      if (!L.ok) std::fprintf(stderr, "layer %d failed: %s\n", L.k + 1, L.failure.c_str());
    return 3;
  }
  return 0;
}

int cmd_diagnose(const Options& o, bool from_setting) {
  RegressionData d = [&] {
    if (!from_setting) return load_data(o);
    if (o.setting < 1 || o.setting > 5) throw UsageError("--setting must be 1-5");
    SimSetting s = preset(o.setting);
    s.seed = o.seed;
    return gen_instance(s).data;
  }();
  const SofarEstimate e = fit_sofar(d, sofari_config(o).sofar);
  if (e.r() < 2) {
    std::printf("rank %d: a single layer has no cross-layer statistics\n", e.r());
    return 0;
  }
  const OrthogonalityReport rep = diagnose_orthogonality(e.triple, d);
  std::printf("layer\tstrong\tweak\teigengap\n");
  for (int k = 0; k < e.r(); ++k) {
    std::printf("%d\t%.4e\t%.4e\t", k + 1, rep.strong(k), rep.weak(k));
    if (k + 1 < e.r()) std::printf("%.6g\n", rep.eigengap(k));
    else std::printf("-\n");
  }
  std::printf("threshold 1/sqrt(n) = %.4e\n", rep.threshold);
  std::printf("%s recommended\n", rep.recommended == Variant::Strong ? "Strong" : "Weak");
  if (o.out != ".") {
    json j = provenance("diagnose", o);
    j["strong"] = std::vector<double>(rep.strong.data(), rep.strong.data() + rep.strong.size());
    j["weak"] = std::vector<double>(rep.weak.data(), rep.weak.data() + rep.weak.size());
    j["eigengap"] = std::vector<double>(rep.eigengap.data(), rep.eigengap.data() + rep.eigengap.size());
    j["threshold"] = rep.threshold;
    j["recommended"] = variant_name(rep.recommended);
    write_text(out_dir(o) / "diagnose.json", j.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inference for sparse reduced-rank regression layers"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo coverage study");
  sim->add_option("--setting", o.setting, "Simulation setting 1-5");
  sim->add_option("--reps", o.reps, "Replications");
  sim->add_option("--kde-points", o.kde_points, "Grid points of each exported density");
  sim->add_flag("--export-data", o.export_data, "Also write x.csv and y.csv of the instance drawn from --seed");
  add_common(sim, o);

  auto* fitc = app.add_subcommand("fit", "Sparse SVD fit of a CSV data set");
  add_common(fitc, o);
  add_data(fitc, o);

  auto* inf = app.add_subcommand("infer", "Debiased inference on a CSV data set");
  add_common(inf, o);
  add_data(inf, o);
  inf->add_option("--fdr", o.fdr, "Benjamini-Hochberg target level per layer");

  auto* diag = app.add_subcommand("diagnose", "Orthogonality diagnostics");
  add_common(diag, o);
  add_data(diag, o);
  diag->add_option("--setting", o.setting, "Use a simulated instance instead of CSV input");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    resolve(cmd, o);
    validate(o);
    if (cmd == sim) return cmd_simulate(o);
    if (cmd == fitc) return cmd_fit(o);
    if (cmd == inf) return cmd_infer(o);
    const bool from_setting = diag->get_option("--setting")->count() > 0 || (o.x.empty() && o.y.empty());
    return cmd_diagnose(o, from_setting);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const RankTooLarge& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 3;
  }
}
