#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmclab/dbm.hpp"
#include "gmclab/embedded_schemas.hpp"
#include "gmclab/ensembles.hpp"
#include "gmclab/error.hpp"
#include "gmclab/gmcfield.hpp"
#include "gmclab/mc.hpp"
#include "gmclab/mde.hpp"
#include "gmclab/predict.hpp"
#include "gmclab/region.hpp"
#include "gmclab/schema.hpp"
#include "gmclab/special.hpp"
#include "gmclab/stats.hpp"
#include "gmclab/svg.hpp"

namespace gmclab {

inline constexpr const char* artifact_version = "1.0.0";
inline constexpr const char* workers_env_var = "GMCLAB_WORKERS";

struct KindInfo {
  const char* name;
  const char* summary;
};

inline const std::vector<KindInfo>& experiment_kinds() {
  static const std::vector<KindInfo> kinds = {
      {"kpoint", "Monte Carlo E exp(sum gamma_i Phi_N(z_i)) against the K-point asymptotic"},
      {"onepoint", "single-point moment, with the exact Ginibre value at z = 0"},
      {"field-scan", "log-characteristic field on a grid: mean and maximum per draw"},
      {"clt", "Gaussian fluctuations of log|det(X - z)| at a few points"},
      {"thick-points", "area of {Phi_N >= nu log N} across several N"},
      {"free-energy", "free energy of the field on a region"},
      {"dbm-local-factor", "local factor from the folded singular-value flow"},
      {"gmc-sample", "regularized log-correlated field and its chaos measure"},
      {"mde-report", "self-consistent density, edge and quantile profile at one z"},
  };
  return kinds;
}

inline const SchemaValidator& config_validator() {
  static const SchemaValidator v(json::parse(schemas::config_schema));
  return v;
}

inline const SchemaValidator& record_validator() {
  static const SchemaValidator v(json::parse(schemas::record_schema));
  return v;
}

inline json load_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::io_failure, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::schema_invalid, p.string() + ": " + e.what());
  }
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Temp file in the same directory, then rename.
inline void write_atomic(const std::filesystem::path& p, const std::string& text) {
  const auto tmp = std::filesystem::path(p.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(Errc::io_failure, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, p, ec);
  if (ec) throw Error(Errc::io_failure, "rename to " + p.string() + " failed: " + ec.message());
}

inline std::string record_text(const json& record) { return record.dump(2) + "\n"; }

// 64-bit FNV-1a.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Finite doubles pass through; NaN and infinities become null.
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }
inline cplx complex_of(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline std::vector<cplx> points_of(const json& j) {
  std::vector<cplx> out;
  for (const auto& p : j) out.push_back(complex_of(p));
  return out;
}

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> output;
  bool resume = false;
  std::function<void(const json&)> progress;  // receives every progress line
};

struct ResolvedConfig {
  json config;      // defaults expanded, overrides applied
  json overrides;   // what the command line and environment changed
  std::string digest;
};

namespace detail {

inline int default_batch(const std::string& kind) {
  if (kind == "kpoint" || kind == "onepoint") return 500;
  if (kind == "dbm-local-factor") return 50;
  if (kind == "gmc-sample") return 250;
  if (kind == "mde-report") return 1;
  return 20;
}

inline void fill_defaults(json& c) {
  const std::string kind = c["kind"];
  auto& e = c["ensemble"];
  if (!e.contains("law_params")) e["law_params"] = json::array();
  if (!c.contains("workers")) c["workers"] = 1;
  if (!c.contains("output")) c["output"] = "gmclab-out";
  if (!c.contains("batch")) c["batch"] = default_batch(kind);
  auto& p = c["params"];
  auto def = [&p](const char* key, json v) {
    if (!p.contains(key)) p[key] = std::move(v);
  };
  if (kind == "kpoint" || kind == "onepoint") def("eta", 0.0);
  if (kind == "thick-points") def("ns", json::array({e["n"]}));
  if (kind == "dbm-local-factor") {
    const DbmKnobs k;
    def("q1", k.q1);
    def("b_frak", k.b_frak);
    def("delta_m", k.delta_m);
    def("c_star", k.c_star);
    def("steps", k.steps);
    def("a1", DbmConfig{}.a1);
  }
  if (kind == "gmc-sample") def("spacing", 0.5 * p["epsilon"].get<double>());
  if (kind == "mde-report") def("resolution", 256);
}

}  // namespace detail

// Digest of the resolved config without the fields that cannot change results.
inline std::string config_digest(const json& resolved) {
  json c = resolved;
  c.erase("workers");
  c.erase("output");
  return fnv1a_hex(c.dump());
}

inline ResolvedConfig resolve_config(const json& raw, const RunOptions& opt = {}) {
  ResolvedConfig r;
  r.config = raw;
  r.overrides = json::object();
  if (opt.seed) {
    r.config["master_seed"] = *opt.seed;
    r.overrides["seed"] = *opt.seed;
  }
  if (const char* env = std::getenv(workers_env_var); env && *env) {
    const int w = std::atoi(env);
    if (w < 1) throw Error(Errc::invalid_argument, std::string(workers_env_var) + " must be a positive integer");
    r.config["workers"] = w;
    r.overrides["workers_env"] = w;
  }
  if (opt.workers) {
    r.config["workers"] = *opt.workers;
    r.overrides["workers"] = *opt.workers;
  }
  if (opt.output) {
    r.config["output"] = *opt.output;
    r.overrides["output"] = *opt.output;
  }
  config_validator().validate(r.config);
  detail::fill_defaults(r.config);
  config_validator().validate(r.config);
  r.digest = config_digest(r.config);
  return r;
}

inline EnsembleSpec ensemble_of(const json& c) {
  const auto& e = c.at("ensemble");
  EntryLaw law{law_from_name(e.at("law").get<std::string>()), e.at("law_params").get<std::vector<double>>()};
  validate_law(law);
  const Symmetry sym = e.at("symmetry") == "real" ? Symmetry::real : Symmetry::complex;
  EnsembleSpec spec = make_ensemble(sym, law, e.at("n").get<int>());
  validate_ensemble(spec);
  return spec;
}

inline Region region_of(const json& j) {
  return {shape_from_name(j.at("shape").get<std::string>()), j.at("radius").get<double>()};
}

inline DbmConfig dbm_config_of(const json& c) {
  const auto& p = c.at("params");
  DbmKnobs k;
  k.q1 = p.at("q1");
  k.b_frak = p.at("b_frak");
  k.delta_m = p.at("delta_m");
  k.c_star = p.at("c_star");
  k.steps = p.at("steps");
  DbmConfig d = make_dbm_config(c.at("ensemble").at("n").get<int>(), p.at("omega1").get<double>(), k);
  d.a1 = p.at("a1");
  return d;
}

inline KPointQuery query_of(const json& c, const EnsembleSpec& spec) {
  const auto& p = c.at("params");
  KPointQuery q;
  q.n = spec.n;
  q.symmetry = spec.symmetry;
  q.kappa4 = spec.kappa4;
  if (c.at("kind") == "onepoint") {
    q.points = {complex_of(p.at("point"))};
    q.gammas = {cplx(p.at("gamma").get<double>())};
  } else {
    q.points = points_of(p.at("points"));
    for (const auto& g : p.at("gammas")) q.gammas.emplace_back(g.get<double>());
    if (q.points.size() != q.gammas.size()) throw Error(Errc::schema_invalid, "points and gammas differ in length");
  }
  return q;
}

// One experiment as a sequence of independent units (draws, paths) plus a reduction.
struct Plan {
  std::size_t units = 1;
  std::function<json(std::size_t unit)> compute;
  std::function<json(const std::vector<json>& data, json& flags)> finish;
};

namespace detail {

inline std::uint64_t master_of(const json& c) { return c.at("master_seed").get<std::uint64_t>(); }

inline Plan kpoint_plan(const json& c) {
  const EnsembleSpec spec = ensemble_of(c);
  const KPointQuery q = query_of(c, spec);
  check_query(spec, q);
  const double eta = c["params"]["eta"];
  const int samples = c["params"]["samples"];
  const std::uint64_t seed = master_of(c);
  const Prediction pred = kpoint_predict(q);
  auto cent = std::make_shared<std::vector<MdeCenterings>>(kpoint_centerings(q, eta));
  Plan plan;
  plan.units = samples;
  plan.compute = [=](std::size_t s) {
    const auto w = kpoint_log_weight(sample_matrix(spec, {seed, s}), q, eta, *cent);
    return w ? json(*w) : json(nullptr);
  };
  plan.finish = [=](const std::vector<json>& data, json& flags) {
    std::vector<std::optional<double>> per;
    for (const auto& d : data) per.push_back(d.is_null() ? std::nullopt : std::optional<double>(d.get<double>()));
    const MomentEstimate est = summarize_kpoint(q, eta, samples, per);
    flags["low_ess"] = est.flagged;
    flags["unreliable"] = est.unreliable;
    flags["rejected_draws"] = est.rejected;
    json gammas = json::array(), pts = json::array(), refl = json::array();
    for (std::size_t i = 0; i < q.points.size(); ++i) {
      pts.push_back(complex_json(q.points[i]));
      gammas.push_back(q.gammas[i].real());
    }
    for (int r : pred.flags.reflected) refl.push_back(r);
    auto sum_re = [](const std::vector<cplx>& v) {
      double s = 0.0;
      for (const cplx& x : v) s += x.real();
      return s;
    };
    json payload = {
        {"n", spec.n},
        {"beta", beta_of(spec.symmetry)},
        {"kappa4", spec.kappa4},
        {"eta", eta},
        {"query", {{"points", pts}, {"gammas", gammas}}},
        {"estimate",
         {{"log_mean", num(est.log_mean)},
          {"std_error", num(est.std_error)},
          {"ess", num(est.ess)},
          {"samples", est.samples},
          {"accepted", int(est.log_weights.size())},
          {"rejected", est.rejected}}},
        {"prediction",
         {{"log_value", num(pred.log_value.real())},
          {"log_centered", num(pred.log_value.real() - sum_re(pred.parts.leading))},
          {"leading", num(sum_re(pred.parts.leading))},
          {"kappa", num(sum_re(pred.parts.kappa))},
          {"n_power", num(sum_re(pred.parts.n_power))},
          {"barnes", num(sum_re(pred.parts.barnes))},
          {"pair_kappa", num(sum_re(pred.parts.pair_kappa))},
          {"pair_distance", num(sum_re(pred.parts.pair_distance))},
          {"real_correction", num(pred.parts.real_correction.real())}}},
        {"validity",
         {{"min_separation_sqrt_n", num(pred.flags.min_separation_sqrt_n)},
          {"min_axis_distance_sqrt_n", num(pred.flags.min_axis_distance_sqrt_n)},
          {"max_gamma", pred.flags.max_gamma},
          {"reflected", refl}}}};
    if (q.points.size() == 1 && q.points[0] == cplx(0.0) && spec.symmetry == Symmetry::complex &&
        spec.law.kind == LawKind::gaussian && eta == 0.0) {
      const double g = q.gammas[0].real();
      payload["exact_log"] = num(ginibre_exact_moment(spec.n, g).real() + 0.5 * g * spec.n);
    }
    return payload;
  };
  return plan;
}

inline Plan clt_plan(const json& c) {
  const EnsembleSpec spec = ensemble_of(c);
  const auto points = points_of(c["params"]["points"]);
  const int draws = c["params"]["draws"];
  const std::uint64_t seed = master_of(c);
  Plan plan;
  plan.units = draws;
  plan.compute = [=](std::size_t d) { return json(clt_draw(spec, points, {seed, d})); };
  plan.finish = [=](const std::vector<json>& data, json&) {
    std::vector<std::vector<double>> ld(points.size(), std::vector<double>(data.size()));
    for (std::size_t d = 0; d < data.size(); ++d)
      for (std::size_t i = 0; i < points.size(); ++i) ld[i][d] = data[d][i];
    const CltReport rep = clt_summarize(points, spec.n, std::move(ld));
    json cov = json::array(), pred = json::array(), corr = json::array(), pts = json::array(), ratio = json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
      json a = json::array(), b = json::array(), r = json::array();
      for (std::size_t j = 0; j < points.size(); ++j) {
        a.push_back(num(rep.sample_cov(i, j)));
        b.push_back(num(rep.predicted_cov(i, j)));
        r.push_back(num(rep.sample_cov(i, j) / std::sqrt(rep.sample_cov(i, i) * rep.sample_cov(j, j))));
      }
      cov.push_back(a);
      pred.push_back(b);
      corr.push_back(r);
      pts.push_back(complex_json(points[i]));
      ratio.push_back(num(4.0 * rep.sample_cov(i, i)));
    }
    return json{{"n", spec.n},
                {"draws", rep.draws},
                {"points", pts},
                {"separation_exponent", num(rep.separation_exponent)},
                {"sample_cov", cov},
                {"predicted_cov", pred},
                {"sample_corr", corr},
                {"variance_ratio", ratio},
                {"mean", rep.mean},
                {"skewness", rep.skewness},
                {"excess_kurtosis", rep.excess_kurtosis}};
  };
  return plan;
}

inline Plan field_scan_plan(const json& c) {
  const EnsembleSpec spec = ensemble_of(c);
  const auto& p = c["params"];
  const Region reg = region_of(p["region"]);
  check_region(spec, reg);
  const auto grid = std::make_shared<Grid>(make_grid(reg, p["spacing"].get<double>()));
  const std::uint64_t seed = master_of(c);
  Plan plan;
  plan.units = p["draws"].get<int>();
  plan.compute = [=](std::size_t d) {
    const auto f = field_on_grid(sample_matrix(spec, {seed, d}), *grid);
    double mx = -std::numeric_limits<double>::infinity(), s = 0.0, a = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
      mx = std::max(mx, f[j]);
      if (std::isfinite(f[j])) {
        s += f[j] * grid->areas[j];
        a += grid->areas[j];
      }
    }
    return json::array({num(mx), num(s / a)});
  };
  plan.finish = [=](const std::vector<json>& data, json&) {
    std::vector<double> mx, mean;
    for (const auto& d : data) {
      mx.push_back(d[0].is_null() ? std::nan("") : d[0].get<double>());
      mean.push_back(d[1].is_null() ? std::nan("") : d[1].get<double>());
    }
    const double logn = std::log(double(spec.n));
    return json{{"n", spec.n},
                {"grid_points", grid->points.size()},
                {"region_area", region_area(reg)},
                {"mean_field", num(mean_of(mean))},
                {"mean_max", num(mean_of(mx))},
                {"max_std_error", num(std::sqrt(variance_of(mx) / double(mx.size())))},
                {"max_over_log_n", num(mean_of(mx) / logn)}};
  };
  return plan;
}

inline Plan thick_points_plan(const json& c) {
  const EnsembleSpec base = ensemble_of(c);
  const auto& p = c["params"];
  const Region reg = region_of(p["region"]);
  check_region(base, reg);
  const auto grid = std::make_shared<Grid>(make_grid(reg, p["spacing"].get<double>()));
  const double nu = p["nu"];
  if (!(nu >= 0.0 && nu < 1.0 / std::sqrt(2.0))) throw Error(Errc::domain, "nu must lie in [0, 1/sqrt 2)");
  const int draws = p["draws"];
  const auto ns = p["ns"].get<std::vector<int>>();
  const std::uint64_t seed = master_of(c);
  Plan plan;
  plan.units = ns.size() * std::size_t(draws);
  plan.compute = [=](std::size_t u) {
    const std::size_t k = u / draws, d = u % draws;
    EnsembleSpec spec = base;
    spec.n = ns[k];
    const auto f = field_on_grid(sample_matrix(spec, {seed, (std::uint64_t(k) << 40) | d}), *grid);
    return json(exceedance_area(*grid, f, nu * std::log(double(spec.n))));
  };
  plan.finish = [=](const std::vector<json>& data, json&) {
    json rows = json::array();
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < ns.size(); ++k) {
      std::vector<double> a;
      for (int d = 0; d < draws; ++d) a.push_back(data[k * draws + d].get<double>());
      const double m = mean_of(a);
      rows.push_back({{"n", ns[k]}, {"mean_area", m}, {"std_error", num(std::sqrt(variance_of(a) / double(draws)))}});
      if (m > 0.0) {
        lx.push_back(std::log(double(ns[k])));
        ly.push_back(std::log(m));
      }
    }
    json payload = {{"nu", nu}, {"draws", draws}, {"grid_points", grid->points.size()},
                    {"region_area", region_area(reg)}, {"per_n", rows}, {"predicted_slope", -2.0 * nu * nu}};
    if (lx.size() >= 2) {
      const LinearFit fit = linear_fit(lx, ly);
      payload["slope"] = num(fit.slope);
      payload["intercept"] = num(fit.intercept);
      payload["slope_se"] = num(fit.slope_se);
    } else {
      payload["slope"] = nullptr;
      payload["intercept"] = nullptr;
      payload["slope_se"] = nullptr;
    }
    return payload;
  };
  return plan;
}

inline Plan free_energy_plan(const json& c) {
  const EnsembleSpec spec = ensemble_of(c);
  const auto& p = c["params"];
  const Region reg = region_of(p["region"]);
  check_region(spec, reg);
  const auto grid = std::make_shared<Grid>(make_grid(reg, p["spacing"].get<double>()));
  const double gamma = p["gamma"];
  const std::uint64_t seed = master_of(c);
  Plan plan;
  plan.units = p["draws"].get<int>();
  plan.compute = [=](std::size_t d) {
    return num(free_energy_of(*grid, field_on_grid(sample_matrix(spec, {seed, d}), *grid), gamma, spec.n));
  };
  plan.finish = [=](const std::vector<json>& data, json&) {
    std::vector<double> v;
    for (const auto& d : data) v.push_back(d.get<double>());
    return json{{"n", spec.n},
                {"gamma", gamma},
                {"grid_points", grid->points.size()},
                {"mean", num(mean_of(v))},
                {"std_error", num(std::sqrt(variance_of(v) / double(v.size())))},
                {"limit", freezing_limit(gamma)}};
  };
  return plan;
}

inline Plan dbm_plan(const json& c) {
  const DbmConfig cfg = dbm_config_of(c);
  const double lambda = c["params"]["lambda"];
  const std::uint64_t seed = master_of(c);
  Plan plan;
  plan.units = c["params"]["paths"].get<int>();
  plan.compute = [=](std::size_t p) {
    const DbmPath path = reference_flow(cfg, {seed, p});
    const LocalVariables lv = local_variables(path, cfg);
    return json::array({lv.l1, lv.l2, lv.l3, path.halvings});
  };
  plan.finish = [=](const std::vector<json>& data, json& flags) {
    std::vector<LocalVariables> lv;
    int halvings = 0;
    std::vector<double> l2;
    for (const auto& d : data) {
      LocalVariables v;
      v.l1 = d[0];
      v.l2 = d[1];
      v.l3 = d[2];
      set_windows(v, cfg);
      lv.push_back(v);
      l2.push_back(v.l2);
      halvings += d[3].get<int>();
    }
    const LocalFactorResult r = summarize_local_factor(cfg, lambda, std::move(lv), halvings);
    flags["window_violations"] = r.l1_violations + r.l2_violations + r.l3_violations;
    flags["low_ess"] = r.ess < 0.01 * double(data.size());
    return json{{"n", cfg.n},
                {"lambda", lambda},
                {"t1", cfg.t1},
                {"eta_star", cfg.eta_star},
                {"eta_m", cfg.eta_m},
                {"ell1", cfg.ell1},
                {"estimate", num(r.estimate)},
                {"std_error", num(r.std_error)},
                {"prediction", num(r.prediction)},
                {"ratio", num(r.estimate / r.prediction)},
                {"inside_fraction", r.inside_fraction},
                {"ess", num(r.ess)},
                {"violations", {{"l1", r.l1_violations}, {"l2", r.l2_violations}, {"l3", r.l3_violations}}},
                {"halvings", r.halvings},
                {"l2_mean", num(mean_of(l2))},
                {"l2_variance", num(variance_of(l2))}};
  };
  return plan;
}

inline Plan gmc_plan(const json& c) {
  const EnsembleSpec spec = ensemble_of(c);
  const auto& p = c["params"];
  const Region reg = region_of(p["region"]);
  const double gamma = p["gamma"];
  const FieldGrid grid = make_field_grid(reg, p["epsilon"].get<double>(), spec.symmetry, spec.kappa4,
                                         p["spacing"].get<double>());
  const auto fac = std::make_shared<CovarianceFactor>(regularized_covariance(grid));
  const std::uint64_t seed = master_of(c);
  Plan plan;
  plan.units = p["draws"].get<int>();
  plan.compute = [=](std::size_t d) { return json(chaos_measure(*fac, sample_field(*fac, {seed, d}), gamma).total); };
  plan.finish = [=](const std::vector<json>& data, json& flags) {
    std::vector<double> v;
    for (const auto& d : data) v.push_back(d.get<double>());
    const GmcSample first = chaos_measure(*fac, sample_field(*fac, {seed, 0}), gamma);
    flags["supercritical"] = first.supercritical;
    json pts = json::array(), masses = json::array();
    for (std::size_t j = 0; j < grid.points.size(); ++j) {
      pts.push_back(complex_json(grid.points[j]));
      masses.push_back(first.masses[j]);
    }
    const double area = region_area(reg);
    const double se = std::sqrt(variance_of(v) / double(v.size()));
    return json{{"beta", beta_of(spec.symmetry)},
                {"kappa4", spec.kappa4},
                {"epsilon", grid.epsilon},
                {"spacing", grid.spacing},
                {"gamma", gamma},
                {"grid_points", grid.points.size()},
                {"region_area", area},
                {"clip_mass", fac->clip_mass},
                {"min_eigenvalue", fac->min_eigenvalue},
                {"mean_total_mass", num(mean_of(v))},
                {"std_error", num(se)},
                {"z_score", num((mean_of(v) - area) / se)},
                {"first_draw", {{"total_mass", first.total}, {"points", pts}, {"masses", masses}}}};
  };
  return plan;
}

inline Plan mde_plan(const json& c) {
  const auto& p = c["params"];
  const cplx z = complex_of(p["z"]);
  const int res = p["resolution"];
  Plan plan;
  plan.units = 1;
  plan.compute = [=](std::size_t) {
    const DensityProfile prof = density(z, res);
    return json{{"edge", prof.edge}, {"x", prof.x}, {"rho", prof.rho}};
  };
  plan.finish = [=](const std::vector<json>& data, json&) {
    const json& d = data.at(0);
    const double edge = d["edge"];
    return json{{"z", complex_json(z)},
                {"edge", edge},
                {"rho_at_zero", density_at(z, 0.0)},
                {"mass", 2.0 * density_cdf(z, edge, edge)},
                {"log_integral", centering_integral(z, 1e-9).integral},
                {"x", d["x"]},
                {"rho", d["rho"]}};
  };
  return plan;
}

inline Plan plan_for(const json& c) {
  const std::string kind = c.at("kind");
  if (kind == "kpoint" || kind == "onepoint") return kpoint_plan(c);
  if (kind == "clt") return clt_plan(c);
  if (kind == "field-scan") return field_scan_plan(c);
  if (kind == "thick-points") return thick_points_plan(c);
  if (kind == "free-energy") return free_energy_plan(c);
  if (kind == "dbm-local-factor") return dbm_plan(c);
  if (kind == "gmc-sample") return gmc_plan(c);
  if (kind == "mde-report") return mde_plan(c);
  throw Error(Errc::unsupported_kind, "unknown kind '" + kind + "'");
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Batches already on disk for this digest; throws resume-mismatch on a different digest.
inline std::map<std::size_t, json> load_progress(const std::filesystem::path& p, const std::string& digest) {
  std::map<std::size_t, json> done;
  std::ifstream in(p);
  if (!in) return done;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      break;  // torn final line from an interrupted run
    }
    if (header) {
      if (j.value("config_digest", std::string()) != digest)
        throw Error(Errc::resume_mismatch, "existing progress has digest " + j.value("config_digest", std::string("?")) +
                                               ", config has " + digest);
      header = false;
      continue;
    }
    done[j.at("batch").get<std::size_t>()] = j.at("data");
  }
  return done;
}

}  // namespace detail

inline std::filesystem::path record_path(const std::filesystem::path& dir) { return dir / "record.json"; }
inline std::filesystem::path progress_path(const std::filesystem::path& dir) { return dir / "progress.jsonl"; }

inline json run_experiment(const json& raw, const RunOptions& opt = {}) {
  const std::string started = detail::utc_now();
  const ResolvedConfig rc = resolve_config(raw, opt);
  const json& c = rc.config;
  const std::filesystem::path dir = c["output"].get<std::string>();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());

  const Plan plan = detail::plan_for(c);
  const std::size_t batch = c["batch"].get<std::size_t>();
  const std::size_t batches = (plan.units + batch - 1) / batch;
  const int workers = c["workers"];

  std::map<std::size_t, json> done;
  const auto prog = progress_path(dir);
  if (opt.resume) done = detail::load_progress(prog, rc.digest);
  const std::size_t resumed = done.size();
  // Rewritten on resume so a torn final line from an interrupted run is dropped.
  std::ofstream out(prog, std::ios::trunc);
  const json head = {{"config_digest", rc.digest}, {"kind", c["kind"]}, {"units", plan.units}, {"batch", batch}};
  out << head.dump() << "\n";
  for (const auto& [b, data] : done)
    out << json{{"batch", b}, {"first", b * batch}, {"count", data.size()}, {"data", data}}.dump() << "\n";
  out.flush();
  if (opt.progress) opt.progress(head);
  if (!out) throw Error(Errc::io_failure, "cannot write " + prog.string());

  for (std::size_t b = 0; b < batches; ++b) {
    if (done.count(b)) continue;
    const std::size_t first = b * batch;
    const std::size_t count = std::min(batch, plan.units - first);
    std::vector<json> data(count);
    parallel_for(count, workers, [&](std::size_t i) { data[i] = plan.compute(first + i); });
    const json line = {{"batch", b}, {"first", first}, {"count", count}, {"data", data}};
    out << line.dump() << "\n";
    out.flush();
    if (!out) throw Error(Errc::io_failure, "cannot append to " + prog.string());
    if (opt.progress) opt.progress(json{{"batch", b}, {"of", batches}, {"first", first}, {"count", count}});
    done[b] = line["data"];
  }
  out.close();

  std::vector<json> all;
  for (std::size_t b = 0; b < batches; ++b)
    for (const auto& d : done.at(b)) all.push_back(d);
  if (all.size() != plan.units) throw Error(Errc::resume_mismatch, "progress file holds the wrong number of units");

  json flags = json::object();
  json payload = plan.finish(all, flags);
  flags["resumed_batches"] = resumed;
  json record = {{"schema_version", 1},
                 {"artifact_version", artifact_version},
                 {"kind", c["kind"]},
                 {"config_digest", rc.digest},
                 {"config", c},
                 {"overrides", rc.overrides},
                 {"timestamps", {{"started", started}, {"finished", detail::utc_now()}}},
                 {"payload", payload},
                 {"flags", flags}};
  record_validator().validate(record);
  write_atomic(record_path(dir), record_text(record));
  if (c["kind"] == "mde-report") {
    std::ostringstream csv;
    csv << "x,rho\n";
    csv.precision(17);
    for (std::size_t i = 0; i < payload["x"].size(); ++i)
      csv << payload["x"][i].get<double>() << ',' << payload["rho"][i].get<double>() << "\n";
    write_atomic(dir / "density.csv", csv.str());
  }
  return record;
}

inline json load_record(const std::filesystem::path& p) {
  json r = load_json(p);
  record_validator().validate(r);
  return r;
}

struct ComparisonRow {
  std::string label;
  int n = 0;
  double ln_mc = 0.0;
  double ln_prediction = 0.0;  // for the centered field, without the N(|z|^2 - 1)/2 term
  double ln_exact = std::nan("");
  double std_error = 0.0;
  double z_score = 0.0;  // (ln MC - ln prediction) / std error
  double ess = 0.0;
  bool flagged = false;
  json validity;
};

inline ComparisonRow compare_record(const json& record) {
  const std::string kind = record.at("kind");
  if (kind != "kpoint" && kind != "onepoint") throw Error(Errc::kind_mismatch, "compare needs a kpoint or onepoint record");
  const json& p = record.at("payload");
  ComparisonRow row;
  row.label = record.at("config_digest");
  row.n = p.at("n");
  row.ln_mc = p["estimate"]["log_mean"].is_null() ? std::nan("") : p["estimate"]["log_mean"].get<double>();
  row.ln_prediction = p["prediction"]["log_centered"].get<double>();
  if (p.contains("exact_log") && !p["exact_log"].is_null()) row.ln_exact = p["exact_log"];
  row.std_error = p["estimate"]["std_error"].is_null() ? 0.0 : p["estimate"]["std_error"].get<double>();
  const double diff = row.ln_mc - row.ln_prediction;
  row.z_score = diff == 0.0 ? 0.0 : (row.std_error > 0.0 ? diff / row.std_error : std::copysign(INFINITY, diff));
  row.ess = p["estimate"]["ess"].is_null() ? 0.0 : p["estimate"]["ess"].get<double>();
  row.flagged = !(std::abs(row.z_score) <= 3.0) || record["flags"].value("low_ess", false);
  row.validity = p["validity"];
  return row;
}

struct Trend {
  std::vector<int> ns;
  std::vector<double> ln_ratio;
  int decreasing_steps = 0;
};

inline Trend ratio_trend(std::vector<ComparisonRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.n < b.n; });
  Trend t;
  for (const auto& r : rows) {
    t.ns.push_back(r.n);
    t.ln_ratio.push_back(r.ln_mc - r.ln_prediction);
  }
  for (std::size_t i = 1; i < t.ln_ratio.size(); ++i)
    if (std::abs(t.ln_ratio[i]) < std::abs(t.ln_ratio[i - 1])) ++t.decreasing_steps;
  return t;
}

inline json comparison_json(const std::vector<ComparisonRow>& rows) {
  json table = json::array();
  int flagged = 0;
  for (const auto& r : rows) {
    table.push_back({{"record", r.label},
                     {"n", r.n},
                     {"ln_mc", num(r.ln_mc)},
                     {"ln_prediction", num(r.ln_prediction)},
                     {"ln_exact", num(r.ln_exact)},
                     {"std_error", num(r.std_error)},
                     {"z_score", num(r.z_score)},
                     {"ess", num(r.ess)},
                     {"flagged", r.flagged},
                     {"validity", r.validity}});
    flagged += r.flagged;
  }
  json out = {{"rows", table}, {"flagged", flagged}};
  if (rows.size() >= 2) {
    const Trend t = ratio_trend(rows);
    out["trend"] = {{"n", t.ns}, {"ln_ratio", t.ln_ratio}, {"decreasing_steps", t.decreasing_steps}};
  }
  return out;
}

// Writes the plot files for a record into dir and returns their paths.
inline std::vector<std::filesystem::path> plot_record(const json& record, const std::filesystem::path& dir) {
  const std::string kind = record.at("kind");
  const json& p = record.at("payload");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (kind == "mde-report") {
    const auto x = p["x"].get<std::vector<double>>();
    const auto rho = p["rho"].get<std::vector<double>>();
    const auto [ylo, yhi] = svg::range_of(rho);
    svg::Figure fig(0.0, x.back(), std::min(0.0, ylo), yhi);
    fig.axes("singular-value density at z = (" + svg::num(p["z"][0]) + ", " + svg::num(p["z"][1]) + ")", "x", "rho(x)");
    fig.polyline(x, rho, "#1f4e9c");
    fig.note("edge " + svg::num(p["edge"]) + ", rho(0) " + svg::num(p["rho_at_zero"]));
    const auto path = dir / "density.svg";
    write_atomic(path, fig.str());
    return {path};
  }
  if (kind == "thick-points") {
    std::vector<double> lx, ly;
    for (const auto& r : p["per_n"])
      if (r["mean_area"].get<double>() > 0.0) {
        lx.push_back(std::log(r["n"].get<double>()));
        ly.push_back(std::log(r["mean_area"].get<double>()));
      }
    if (lx.empty()) throw Error(Errc::invalid_argument, "no positive areas to plot");
    auto [xlo, xhi] = svg::range_of(lx, 0.1);
    auto [ylo, yhi] = svg::range_of(ly, 0.1);
    svg::Figure fig(xlo, xhi, ylo, yhi);
    fig.axes("thick-point area, nu = " + svg::num(p["nu"]), "ln N", "ln area");
    fig.markers(lx, ly, "#b22222");
    if (!p["slope"].is_null()) {
      const double s = p["slope"], b = p["intercept"];
      fig.polyline({xlo, xhi}, {b + s * xlo, b + s * xhi}, "#444444");
      fig.note("fitted slope " + svg::num(s) + " (predicted " + svg::num(p["predicted_slope"]) + ")");
    }
    const auto path = dir / "thick-points.svg";
    write_atomic(path, fig.str());
    return {path};
  }
  if (kind == "gmc-sample") {
    const auto& d = p["first_draw"];
    const double h = p["spacing"];
    std::vector<double> m = d["masses"].get<std::vector<double>>();
    double lo = INFINITY, hi = -INFINITY, xlo = INFINITY, xhi = -INFINITY, yl = INFINITY, yh = -INFINITY;
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double v = std::log(m[j] / (h * h));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      const double x = d["points"][j][0], y = d["points"][j][1];
      xlo = std::min(xlo, x - h / 2);
      xhi = std::max(xhi, x + h / 2);
      yl = std::min(yl, y - h / 2);
      yh = std::max(yh, y + h / 2);
    }
    svg::Figure fig(xlo, xhi, yl, yh);
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double x = d["points"][j][0], y = d["points"][j][1];
      const double t = hi > lo ? (std::log(m[j] / (h * h)) - lo) / (hi - lo) : 0.5;
      fig.cell(x - h / 2, y - h / 2, h, h, svg::ramp(t));
    }
    fig.axes("chaos mass, gamma = " + svg::num(p["gamma"]) + ", eps = " + svg::num(p["epsilon"]), "Re z", "Im z");
    fig.note("total mass " + svg::exact(d["total_mass"]));
    const auto path = dir / "gmc-heatmap.svg";
    write_atomic(path, fig.str());
    return {path};
  }
  throw Error(Errc::unsupported_kind, "no plot for kind '" + kind + "'");
}

}  // namespace gmclab
