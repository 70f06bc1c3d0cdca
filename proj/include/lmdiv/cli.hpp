#pragma once

/**
 * @file cli.hpp
 * @brief The lmdiv command line: lmoments, fit, test, simulate and dist.
 *
 * Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
 * Tables print 6 significant digits; JSON keeps full precision.
 *
 * Simulation config (JSON object, unknown keys rejected):
 *   scenario       1..4, loads the preset before other keys apply
 *   family         "gpd" | "weibull"
 *   sigma, nu      true parameters
 *   n              sample size
 *   contamination  outlier fraction in [0, 1)
 *   outlier        value of the outlier atom
 *   replicates     number of Monte Carlo runs
 *   seed           master seed
 *   estimators     list of chi2, kl, klm, power:<g>, lmom, moment, mle, wasserstein
 *   threads        worker threads, 0 = all cores
 *   output         path prefix for <prefix>_replicates.csv, _summary.json, _density.csv
 */

#include "lmdiv/estimator.hpp"
#include "lmdiv/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace lmdiv::cli {

using json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kUsage = 2, kNumeric = 3 };

/// Input or configuration problem; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV input

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\"");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\"");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

/**
 * Reads one numeric column. `col` is a header name or a 1-based index; empty
 * selects the first column. A first row that does not parse as a number is a
 * header. Non-numeric or non-finite cells are reported with their line numbers.
 */
inline std::vector<double> read_column(std::istream& in, const std::string& col = "") {
  std::string line;
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    rows.emplace_back(lineno, split_fields(line));
  }
  if (rows.empty()) throw UsageError("input has no data rows");

  std::size_t idx = 0;
  bool header = false;
  {
    double tmp;
    const auto& first = rows.front().second;
    header = !first.empty() && !parse_number(first.front(), tmp);
    if (!col.empty()) {
      double as_num;
      if (parse_number(col, as_num) && as_num >= 1 && as_num == std::floor(as_num)) {
        idx = static_cast<std::size_t>(as_num) - 1;
      } else {
        if (!header) throw UsageError("column '" + col + "' requested but the input has no header");
        const auto it = std::find(first.begin(), first.end(), col);
        if (it == first.end()) throw UsageError("no column named '" + col + "'");
        idx = static_cast<std::size_t>(it - first.begin());
      }
    }
    if (header) {
      bool any_text = false;
      for (std::size_t k = 0; k < first.size(); ++k) any_text |= !parse_number(first[k], tmp);
      header = any_text;
    }
  }

  std::vector<double> out;
  std::vector<int> bad;
  for (std::size_t k = header ? 1 : 0; k < rows.size(); ++k) {
    const auto& [ln, f] = rows[k];
    double v;
    if (idx >= f.size() || !parse_number(f[idx], v) || !std::isfinite(v)) {
      bad.push_back(ln);
      continue;
    }
    out.push_back(v);
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "non-numeric or non-finite values on line" << (bad.size() > 1 ? "s" : "");
    for (std::size_t k = 0; k < bad.size() && k < 20; ++k) os << (k ? ", " : " ") << bad[k];
    if (bad.size() > 20) os << " and " << bad.size() - 20 << " more";
    throw UsageError(os.str());
  }
  if (out.empty()) throw UsageError("input has no data rows");
  return out;
}

inline std::vector<double> read_column_file(const std::string& path, const std::string& col = "") {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  return read_column(in, col);
}

inline SortedSample load_sample(const std::string& path, const std::string& col) {
  auto v = read_column_file(path, col);
  if (v.size() < 2) throw UsageError("need at least two observations");
  return SortedSample(std::move(v));
}

// ---------------------------------------------------------------------------
// JSON helpers

inline json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

inline json to_json(const ConfidenceStat& t) {
  return json{{"statistic", t.statistic}, {"df", t.df},       {"nominal_df", t.nominal_df},
              {"rank", t.rank},           {"p_value", t.p_value}, {"pseudo_inverse", t.pseudo_inverse}};
}

inline json to_json(const FitReport& r) {
  json j;
  j["method"] = r.method;
  j["model"] = r.model;
  j["divergence"] = r.divergence;
  j["failed"] = r.failed;
  json th = json::object();
  for (std::size_t k = 0; k < r.param_names.size() && static_cast<Eigen::Index>(k) < r.theta.size(); ++k) {
    th[r.param_names[k]] = r.theta[static_cast<Eigen::Index>(k)];
  }
  j["theta"] = th;
  if (r.location) j["location"] = *r.location;
  j["xi"] = to_json(r.xi);
  j["criterion"] = r.criterion;
  j["status"] = to_string(r.inner_status);
  j["diagnostics"] = {{"outer_evaluations", r.outer_evaluations},
                      {"outer_converged", r.outer_converged},
                      {"inner_failures", r.inner_failures},
                      {"starts", r.starts},
                      {"boundary", r.boundary},
                      {"message", r.message}};
  if (r.asymptotics) {
    const auto& a = *r.asymptotics;
    j["asymptotics"] = {{"plugin", to_string(a.plugin)},
                        {"cov_theta", to_json(a.cov_theta)},
                        {"cov_xi", to_json(a.cov_xi)},
                        {"sigma", to_json(a.sigma)},
                        {"omega", to_json(a.omega)},
                        {"jacobian", to_json(a.jacobian)},
                        {"M", to_json(a.m)},
                        {"H", to_json(a.h)},
                        {"P", to_json(a.p)},
                        {"omega_condition", a.omega_condition},
                        {"jacobian_condition", a.jacobian_condition}};
  }
  if (r.test) j["test"] = to_json(*r.test);
  return j;
}

inline json to_json(const Summary& s) {
  return json{{"mean", s.mean}, {"median", s.median}, {"std", s.std}, {"count", s.count}, {"degenerate", s.degenerate}};
}

inline json config_to_json(const ScenarioConfig& c) {
  return json{{"scenario", c.scenario},
              {"family", family_name(c.family)},
              {"sigma", c.sigma},
              {"nu", c.nu},
              {"n", c.n},
              {"contamination", c.contamination},
              {"outlier", c.outlier},
              {"replicates", c.replicates},
              {"seed", c.seed},
              {"estimators", c.estimators}};
}

/// Rows per estimator x parameter (mean, median, std) plus the mean L1 distance per estimator.
inline json summary_to_json(const SimSummary& s) {
  json rows = json::array(), l1 = json::array(), fails = json::object();
  for (const char* par : {"sigma", "nu"}) {
    for (const auto& e : s.estimators) {
      const auto& sm = std::string(par) == "sigma" ? e.sigma : e.nu;
      if (!sm) continue;
      json row = to_json(*sm);
      row["estimator"] = e.estimator;
      row["parameter"] = par;
      rows.push_back(row);
    }
  }
  for (const auto& e : s.estimators) {
    if (e.mean_l1) l1.push_back({{"estimator", e.estimator}, {"mean_l1", *e.mean_l1}});
    fails[e.estimator] = {{"failures", e.failures}, {"boundary", e.boundary}};
  }
  return json{{"config", config_to_json(s.config)}, {"rows", rows}, {"l1", l1}, {"failures", fails}};
}

// ---------------------------------------------------------------------------
// Simulation config

inline ScenarioConfig parse_scenario_config(const json& j, std::string* output = nullptr) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  static const std::set<std::string> known{"scenario", "family",     "sigma", "nu",         "n",       "contamination",
                                           "outlier",  "replicates", "seed",  "estimators", "threads", "output"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw UsageError("unknown config key '" + k + "'");
  }
  try {
    ScenarioConfig c = j.contains("scenario") ? scenario_preset(j.at("scenario").get<int>()) : ScenarioConfig{};
    if (j.contains("family")) c.family = parse_family(j.at("family").get<std::string>());
    if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
    if (j.contains("nu")) c.nu = j.at("nu").get<double>();
    if (j.contains("n")) {
      const auto n = j.at("n").get<long long>();
      if (n < 0) throw UsageError("n must be positive");
      c.n = static_cast<std::size_t>(n);
    }
    if (j.contains("contamination")) c.contamination = j.at("contamination").get<double>();
    if (j.contains("outlier")) c.outlier = j.at("outlier").get<double>();
    if (j.contains("replicates")) {
      const auto r = j.at("replicates").get<long long>();
      if (r < 0) throw UsageError("replicates must be nonnegative");
      c.replicates = static_cast<std::size_t>(r);
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("estimators")) c.estimators = j.at("estimators").get<std::vector<std::string>>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (output && j.contains("output")) *output = j.at("output").get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Subcommands

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline int cmd_lmoments(const std::string& input, const std::string& col, int order, const std::string& format,
                        Streams io) {
  if (order < 2 || order > kMaxOrder) {
    throw UsageError("--order must lie in 2.." + std::to_string(kMaxOrder));
  }
  const SortedSample x = load_sample(input, col);
  const auto v = sample_lmoments_v(x, order);
  const int uorder = std::min<int>(order, static_cast<int>(x.n()));
  const auto u = sample_lmoments_u(x, uorder);
  const auto ratios = lmoment_ratios(v);

  if (format == "json") {
    json j;
    j["n"] = x.n();
    j["v"] = v.values;
    j["u"] = u.values;
    json tau = json::object();
    for (int r = 3; r <= order; ++r) tau["tau" + std::to_string(r)] = ratios(r);
    j["ratios"] = tau;
    io.out << j.dump(2) << "\n";
    return kOk;
  }
  const bool csv = format == "csv";
  io.out << (csv ? "r,l_v,l_u,tau\n" : "r      l_r(V)        l_r(U)        tau_r\n");
  for (int r = 1; r <= order; ++r) {
    const std::string lu = r <= uorder ? fmt6(u(r)) : "";
    const std::string tr = r >= 3 ? fmt6(ratios(r)) : "";
    if (csv) {
      io.out << r << ',' << fmt6(v(r)) << ',' << lu << ',' << tr << "\n";
    } else {
      char line[128];
      std::snprintf(line, sizeof line, "%-6d %-13s %-13s %s\n", r, fmt6(v(r)).c_str(), lu.c_str(), tr.c_str());
      io.out << line;
    }
  }
  return kOk;
}

struct FitOptions {
  std::string input;
  std::string col;
  std::string model = "gpd-l234";
  std::string div = "chi2";
  std::string method = "divergence";
  std::string plugin = "parametric";
  std::string format = "table";
  bool asymptotics = false;
};

inline void print_fit_table(const FitReport& r, std::ostream& os) {
  os << "model " << r.model << "  divergence " << r.divergence << "  status " << to_string(r.inner_status) << "\n";
  for (std::size_t k = 0; k < r.param_names.size(); ++k) {
    os << "  " << r.param_names[k] << " = " << fmt6(r.theta[static_cast<Eigen::Index>(k)]);
    if (r.asymptotics) {
      const double se = std::sqrt(std::max(0.0, r.asymptotics->cov_theta(static_cast<Eigen::Index>(k),
                                                                          static_cast<Eigen::Index>(k))));
      os << "  (se " << fmt6(se) << ")";
    }
    os << "\n";
  }
  if (r.location) os << "  location = " << fmt6(*r.location) << "\n";
  os << "  criterion = " << fmt6(r.criterion) << "\n";
  if (r.test) {
    os << "  S_n = " << fmt6(r.test->statistic) << "  df = " << r.test->df << "  p = " << fmt6(r.test->p_value);
    if (r.test->pseudo_inverse) os << "  (pseudo-inverse, rank " << r.test->rank << " of " << r.test->nominal_df << ")";
    os << "\n";
  }
  if (!r.message.empty()) os << "  note: " << r.message << "\n";
}

inline Plugin parse_plugin(const std::string& s) {
  if (s == "parametric") return Plugin::parametric;
  if (s == "empirical") return Plugin::empirical;
  throw UsageError("--plugin must be parametric or empirical");
}

inline int cmd_fit(const FitOptions& o, bool test_only, Streams io) {
  SplqModel model = [&] {
    try {
      return make_model(o.model);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  Divergence div = Divergence::chi2();
  try {
    div = Divergence::parse(o.div);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Plugin plugin = parse_plugin(o.plugin);
  const SortedSample x = load_sample(o.input, o.col);

  if (o.method != "divergence") {
    if (test_only) throw UsageError("test needs the divergence method");
    if (o.model != "gpd-l234") throw UsageError("--method " + o.method + " is defined for the gpd-l234 model only");
    json j;
    j["method"] = o.method;
    j["model"] = o.model;
    Eigen::Vector2d th;
    bool boundary = false;
    if (o.method == "lmom") {
      th = fit_lmoment_method_gpd(x).theta;
    } else if (o.method == "moment") {
      th = fit_moment_method_gpd(x).theta;
    } else if (o.method == "mle") {
      const auto r = fit_mle_gpd(x);
      th = r.theta;
      boundary = r.boundary;
    } else if (o.method == "wasserstein") {
      const auto r = fit_transport(x, model);
      if (r.failed) throw EstimationError("transport fit failed");
      th = r.theta;
      j["cost"] = r.cost;
      j["monotone"] = r.monotone;
    } else {
      throw UsageError("--method must be divergence, lmom, moment, mle or wasserstein");
    }
    j["theta"] = {{"sigma", th[0]}, {"nu", th[1]}};
    j["boundary"] = boundary;
    if (o.format == "json") {
      io.out << j.dump(2) << "\n";
    } else {
      io.out << "method " << o.method << "\n  sigma = " << fmt6(th[0]) << "\n  nu = " << fmt6(th[1]) << "\n";
      if (boundary) io.out << "  note: likelihood maximized at the support or box edge\n";
    }
    return kOk;
  }

  FitReport rep = fit_divergence(x, model, div);
  if (!rep.failed && (o.asymptotics || test_only)) {
    attach_asymptotics(rep, x, model, model.has_law() ? plugin : Plugin::empirical);
  }
  if (o.format == "json") {
    if (test_only) {
      json j = rep.test ? to_json(*rep.test) : json::object();
      j["status"] = to_string(rep.inner_status);
      j["failed"] = rep.failed;
      io.out << j.dump(2) << "\n";
    } else {
      io.out << to_json(rep).dump(2) << "\n";
    }
  } else if (test_only && rep.test) {
    const auto& t = *rep.test;
    io.out << "S_n = " << fmt6(t.statistic) << "\ndf = " << t.df << "\np_value = " << fmt6(t.p_value) << "\n";
    if (t.pseudo_inverse) {
      io.out << "note: singular middle matrix, pseudo-inverse of rank " << t.rank << " (nominal df " << t.nominal_df
             << ")\n";
    }
  } else {
    print_fit_table(rep, io.out);
  }
  if (rep.failed) {
    io.err << "error: " << rep.message << "\n";
    return kNumeric;
  }
  return kOk;
}

inline int cmd_simulate(const std::string& config_path, const std::string& out_override, int threads, Streams io) {
  std::ifstream in(config_path);
  if (!in) throw UsageError("cannot open config '" + config_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  std::string output;
  ScenarioConfig c = parse_scenario_config(j, &output);
  if (!out_override.empty()) output = out_override;
  if (threads >= 0) c.threads = static_cast<unsigned>(threads);

  const SimSummary s = run_scenario(c);
  const json summary = summary_to_json(s);

  io.out << "estimator     param  mean         median       std          count\n";
  for (const auto& row : summary["rows"]) {
    char line[160];
    std::snprintf(line, sizeof line, "%-13s %-6s %-12s %-12s %-12s %zu\n",
                  row["estimator"].get<std::string>().c_str(), row["parameter"].get<std::string>().c_str(),
                  fmt6(row["mean"].get<double>()).c_str(), fmt6(row["median"].get<double>()).c_str(),
                  fmt6(row["std"].get<double>()).c_str(), row["count"].get<std::size_t>());
    io.out << line;
  }
  for (const auto& row : summary["l1"]) {
    io.out << "L1 " << row["estimator"].get<std::string>() << " " << fmt6(row["mean_l1"].get<double>()) << "\n";
  }
  for (const auto& e : s.estimators) {
    if (e.failures) io.out << "failures " << e.estimator << " " << e.failures << "\n";
  }

  if (!output.empty()) {
    std::ofstream csv(output + "_replicates.csv");
    std::ofstream js(output + "_summary.json");
    std::ofstream dens(output + "_density.csv");
    if (!csv || !js || !dens) throw UsageError("cannot write outputs with prefix '" + output + "'");
    write_replicates_csv(csv, s);
    js << summary.dump(2) << "\n";
    dens.precision(17);
    dens << "curve,x,density\n";
    for (const auto& cv : density_curves(s)) {
      for (std::size_t k = 0; k < cv.x.size(); ++k) dens << cv.label << ',' << cv.x[k] << ',' << cv.density[k] << "\n";
    }
  } else {
    io.out << summary.dump(2) << "\n";
  }
  return kOk;
}

/// "gpd:3:0.7" or "weibull:3:0.4".
inline ParametricFamily parse_law(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw UsageError("law must look like family:sigma:nu, got '" + text + "'");
  double s, n;
  if (!parse_number(text.substr(a + 1, b - a - 1), s) || !parse_number(text.substr(b + 1), n)) {
    throw UsageError("cannot parse parameters in '" + text + "'");
  }
  try {
    return ParametricFamily(parse_family(text.substr(0, a)), s, n);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline int cmd_dist(const std::string& first, const std::string& second, const std::string& format, Streams io) {
  const auto a = parse_law(first), b = parse_law(second);
  const double d = l1_density_distance(a, b);
  if (format == "json") {
    io.out << json{{"first", first}, {"second", second}, {"l1", d}}.dump(2) << "\n";
  } else {
    io.out << "L1 = " << fmt6(d) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"L-moment minimum-divergence estimation"};
  app.require_subcommand(1);
  Streams io{out, err};

  std::string input, col, format = "table";
  int order = 4;
  auto* lm = app.add_subcommand("lmoments", "sample L-moments (V and U statistics) and ratios");
  lm->add_option("input", input, "CSV file")->required();
  lm->add_option("--col", col, "column name or 1-based index");
  lm->add_option("--order", order, "highest order");
  lm->add_option("--format", format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));

  FitOptions fo;
  auto add_fit_opts = [&](CLI::App* sc) {
    sc->add_option("input", fo.input, "CSV file")->required();
    sc->add_option("--col", fo.col, "column name or 1-based index");
    sc->add_option("--model", fo.model, "gpd-l234, weibull-l234 or orderstat3");
    sc->add_option("--div", fo.div, "chi2, kl, klm or power:<gamma>");
    sc->add_option("--plugin", fo.plugin, "parametric or empirical covariance plug-in");
    sc->add_option("--format", fo.format, "table or json")->check(CLI::IsMember({"table", "json"}));
  };
  auto* fit = app.add_subcommand("fit", "minimum-divergence fit");
  add_fit_opts(fit);
  fit->add_option("--method", fo.method, "divergence, lmom, moment, mle or wasserstein");
  fit->add_flag("--asymptotics", fo.asymptotics, "add covariance blocks and S_n");
  auto* test = app.add_subcommand("test", "fit and report the S_n confidence statistic");
  add_fit_opts(test);

  std::string config, out_prefix;
  int threads = -1;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo scenario from a JSON config");
  sim->add_option("config", config, "JSON config file")->required();
  sim->add_option("--out", out_prefix, "output path prefix");
  sim->add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string first, second;
  auto* dist = app.add_subcommand("dist", "L1 distance between two densities, e.g. gpd:3:0.7 weibull:3:0.4");
  dist->add_option("first", first, "family:sigma:nu")->required();
  dist->add_option("second", second, "family:sigma:nu")->required();
  dist->add_option("--format", format, "table or json")->check(CLI::IsMember({"table", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*lm) return cmd_lmoments(input, col, order, format, io);
    if (*fit) return cmd_fit(fo, false, io);
    if (*test) return cmd_fit(fo, true, io);
    if (*sim) return cmd_simulate(config, out_prefix, threads, io);
    if (*dist) return cmd_dist(first, second, format, io);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const EstimationError& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}

}  // namespace lmdiv::cli
