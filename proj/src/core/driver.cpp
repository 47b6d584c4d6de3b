#include "core/driver.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "core/kotlarski.hpp"
#include "core/mc_harness.hpp"
#include "core/score_test.hpp"
#include "core/sha256.hpp"
#include "core/teacher_va.hpp"

namespace uhm::driver {

namespace {

std::string basename(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

std::string fmt_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_real(v[i]);
  }
  return out;
}

std::string fmt_dims(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string fmt_ints(const std::vector<int>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_real(v[i]);
  }
  return out;
}

// Raw bytes, so the hash commits to the exact file and not a re-rendering.
std::string hashed_input(const io::RunConfig& cfg, const std::string& command,
                         std::string* text) {
  if (!cfg.data)
    throw io::ConfigError(command + " requires a data file (key 'data')");
  *text = io::read_file(*cfg.data);
  return sha256_hex(*text);
}

void echo_header(Report& rep, const std::string& command,
                 const io::RunConfig& cfg, const std::string& sha) {
  rep.add("command", command);
  rep.add("version", kVersion);
  rep.add("data", basename(*cfg.data));
  rep.add("data_sha256", sha);
}

Report run_fit(const std::string& command, const io::RunConfig& cfg) {
  const std::string tname = command == "fit-beta"  ? "beta"
                            : command == "fit-ame" ? "ame"
                                                   : "variance";
  if (cfg.target && *cfg.target != tname)
    throw io::ConfigError("target '" + *cfg.target +
                          "' conflicts with command " + command);

  std::string text;
  const std::string sha = hashed_input(cfg, command, &text);
  const io::ParsedPanel pp = io::parse_panel_text(text, *cfg.data);
  const panel::Dataset& d = pp.data;

  panel::TargetKind kind;
  std::string shape_key, shape_val;
  if (tname == "beta") {
    if (d.p < 1)
      throw io::ConfigError("fit-beta needs at least one w_ column");
    Eigen::MatrixXd C1 =
        cfg.C1 ? *cfg.C1 : Eigen::MatrixXd::Identity(d.p, d.p);
    shape_key = "c1";
    shape_val = fmt_dims(C1);
    kind = panel::BetaCombination{std::move(C1)};
  } else if (tname == "ame") {
    Eigen::MatrixXd C2 =
        cfg.C2 ? *cfg.C2 : Eigen::MatrixXd::Identity(d.q, d.q);
    shape_key = "c2";
    shape_val = fmt_dims(C2);
    kind = panel::AlphaMean{std::move(C2)};
  } else {
    Eigen::MatrixXd Omega =
        cfg.Omega ? *cfg.Omega : Eigen::MatrixXd::Identity(d.q, d.q);
    Eigen::MatrixXd S2 = cfg.S2 ? *cfg.S2
                         : (cfg.s2_preset && *cfg.s2_preset == "nonstationary")
                             ? panel::s2_nonstationary(d.T)
                             : panel::s2_iid(d.T);
    shape_key = "omega";
    shape_val = fmt_dims(Omega);
    kind = panel::AlphaQuadratic{std::move(Omega), std::move(S2)};
  }
  panel::validate_target(kind, d.T, d.p, d.q);
  const int k = panel::target_dim(kind);

  Eigen::VectorXd psi0 =
      cfg.psi0 ? *cfg.psi0 : Eigen::VectorXd::Zero(k).eval();
  if (int(psi0.size()) != k)
    throw io::ConfigError("psi0 has length " + std::to_string(psi0.size()) +
                          ", target dimension is " + std::to_string(k));
  if (cfg.folds > d.n)
    throw io::ConfigError("folds (" + std::to_string(cfg.folds) +
                          ") exceed the number of units (" +
                          std::to_string(d.n) + ")");

  panel::Config pcfg;
  pcfg.lasso = cfg.lasso;
  pcfg.nu_M = cfg.nu_M;
  pcfg.nu_B = cfg.nu_B;
  const score::FoldAssignment folds =
      score::make_folds(d.n, cfg.folds, cfg.seed);
  const score::PreparedTarget prep = score::prepare(d, kind, folds, pcfg);

  score::Options opts;
  opts.zeta = cfg.zeta;
  opts.nu = cfg.nu;
  const score::ScoreTestResult res = prep.test_at(psi0, opts);

  Report rep;
  echo_header(rep, command, cfg, sha);
  rep.add("n", d.n);
  rep.add("t", d.T);
  rep.add("p", d.p);
  rep.add("q", d.q);
  rep.add("target", tname);
  rep.add(shape_key, shape_val);
  if (tname == "variance")
    rep.add("s2", cfg.S2 ? fmt_dims(*cfg.S2)
                         : cfg.s2_preset.value_or("iid"));
  rep.add("folds", cfg.folds);
  rep.add_seed("seed", cfg.seed);
  rep.add("zeta", cfg.zeta);
  rep.add("psi0", fmt_vector(psi0));
  rep.add("estimate", fmt_vector(prep.cf.psi_plugin));
  rep.add("statistic", res.statistic);
  rep.add("rank", res.rank);
  rep.add("p_value", res.p_value);
  rep.add("critical_value", res.critical_value);
  rep.add("reject", res.reject);
  rep.add("nu_used", res.nu_used);
  rep.add("degenerate_rank", res.degenerate_rank);
  if (k == 1) {
    const score::ConfidenceRegion ci = score::confidence_interval(prep, opts);
    rep.add("ci_level", ci.level);
    rep.add("ci_lo", ci.lo);
    rep.add("ci_hi", ci.hi);
    rep.add("ci_empty", ci.empty);
    rep.add("ci_unbounded", ci.unbounded);
  }
  bool lasso_ok = true, b_deficient = false;
  for (const auto& nu : prep.cf.nuisance) {
    lasso_ok = lasso_ok && nu.lasso_converged;
    b_deficient = b_deficient || nu.B_rank_deficient;
  }
  rep.add("lasso_converged", lasso_ok);
  if (tname == "variance") rep.add("b_rank_deficient", b_deficient);
  rep.add("overparameterized_units",
          int(d.overparameterized_units().size()));
  return rep;
}

Report run_kotlarski(const io::RunConfig& cfg) {
  std::string text;
  const std::string sha = hashed_input(cfg, "kotlarski-moments", &text);
  const Eigen::MatrixXd tab =
      io::parse_table_text(text, *cfg.data, {"y1", "y2"});
  kotlarski::Sample s{tab.col(0), tab.col(1)};
  const kotlarski::MomentFit fit =
      kotlarski::estimate_moments(s, cfg.beta0, cfg.K);

  Report rep;
  echo_header(rep, "kotlarski-moments", cfg, sha);
  rep.add("n", int(tab.rows()));
  rep.add("beta0", cfg.beta0);
  rep.add("k", cfg.K);
  rep.add("psi", fmt_vector(fit.psi));
  rep.add("moment_residual", fmt_vector(fit.moment));
  rep.add("slope", fmt_vector(fit.slope));
  return rep;
}

Report run_tva(const io::RunConfig& cfg) {
  std::string text;
  const std::string sha = hashed_input(cfg, "tva-moment", &text);
  const Eigen::MatrixXd tab = io::parse_table_text(text, *cfg.data, {"y"});
  const Eigen::VectorXd y = tab.col(0);
  const int n = int(y.size());

  if (!cfg.theta) throw io::ConfigError("tva-moment requires key 'theta'");
  if (!cfg.tva_r)
    throw io::ConfigError("tva-moment requires key 'r' (functional "
                          "coefficients)");
  tva::Functional f;
  f.r = *cfg.tva_r;
  if (cfg.tva_r_dtheta) f.r_dtheta = *cfg.tva_r_dtheta;
  f.R = cfg.tva_radius;
  const double theta = *cfg.theta;

  const double mu_y = cfg.mu_y ? *cfg.mu_y : y.mean();
  const double var_y = (y.array() - y.mean()).square().sum() / n;
  const double sig_a = cfg.sigma_alpha_sq
                           ? *cfg.sigma_alpha_sq
                           : std::max(var_y - theta * theta, 0.0);
  double psi0 = 0.0;
  if (cfg.psi0) {
    if (cfg.psi0->size() != 1)
      throw io::ConfigError("tva-moment takes a scalar psi0");
    psi0 = (*cfg.psi0)[0];
  }

  const tva::AdmissibilityReport adm = tva::check_admissibility(f, theta);
  const tva::Auxiliary aux = tva::variance_auxiliary(mu_y, sig_a);
  const tva::Orthogonalized orth = tva::orthogonalize(f, aux, y, theta, psi0);

  Eigen::MatrixXd g(n, 1);
  for (int i = 0; i < n; ++i) g(i, 0) = tva::eval_lr(f, aux, orth, y[i]);
  const Eigen::VectorXd mean = g.colwise().mean().transpose();
  const Eigen::MatrixXd W = score::weighting_matrix(g, true);
  const score::ScoreTestResult res =
      score::score_statistic(mean, W, cfg.nu, n, cfg.zeta);

  Report rep;
  echo_header(rep, "tva-moment", cfg, sha);
  rep.add("n", n);
  rep.add("theta", theta);
  rep.add("mu_y", mu_y);
  rep.add("sigma_alpha_sq", sig_a);
  rep.add("radius", f.R);
  rep.add("r", fmt_vector(f.r));
  rep.add("psi0", psi0);
  rep.add("admissible", adm.pass);
  rep.add("keysum", adm.keysum);
  rep.add("tail_ratio", adm.tail_ratio);
  rep.add("truncation",
          tva::adaptive_truncation(f, theta, y.cwiseAbs().maxCoeff()));
  rep.add("gamma0", orth.gamma0);
  rep.add("estimate", psi0 + mean[0]);
  rep.add("statistic", res.statistic);
  rep.add("rank", res.rank);
  rep.add("p_value", res.p_value);
  rep.add("critical_value", res.critical_value);
  rep.add("reject", res.reject);
  rep.add("nu_used", res.nu_used);
  if (res.rank == 1) {
    const double half = std::sqrt(res.critical_value * W(0, 0) / n);
    rep.add("ci_level", 1.0 - cfg.zeta);
    rep.add("ci_lo", psi0 + mean[0] - half);
    rep.add("ci_hi", psi0 + mean[0] + half);
    rep.add("ci_unbounded", false);
  } else {
    rep.add("ci_level", 1.0 - cfg.zeta);
    rep.add("ci_lo", "-inf");
    rep.add("ci_hi", "inf");
    rep.add("ci_unbounded", true);
  }
  return rep;
}

mc::ExperimentConfig experiment_config(const io::RunConfig& cfg) {
  mc::ExperimentConfig mcfg;
  mcfg.n = cfg.n;
  mcfg.reps = cfg.reps;
  mcfg.beta0 = cfg.beta0;
  mcfg.levels = cfg.levels;
  mcfg.L = cfg.folds;
  mcfg.proj = cfg.proj;
  mcfg.seed = cfg.seed;
  mcfg.fd_grids = cfg.fd_grids;
  mcfg.lambda = cfg.lambda;
  mcfg.threads = cfg.threads;
  return mcfg;
}

void echo_experiment(Report& rep, const mc::ExperimentConfig& mcfg) {
  rep.add("n", mcfg.n);
  rep.add("reps", mcfg.reps);
  rep.add("beta0", mcfg.beta0);
  rep.add("levels", fmt_reals(mcfg.levels));
  rep.add("folds", mcfg.L);
  rep.add_seed("seed", mcfg.seed);
  rep.add("fd_grids", fmt_ints(mcfg.fd_grids));
  rep.add("lambda", mcfg.lambda);
  rep.add("proj_nz", mcfg.proj.n_z);
  rep.add("proj_nalpha", mcfg.proj.n_alpha);
  rep.add("proj_ks", mcfg.proj.ks);
}

Report run_mc_size(const io::RunConfig& cfg) {
  const mc::ExperimentConfig mcfg = experiment_config(cfg);
  const mc::SizeRun run = mc::run_size(mcfg);
  const mc::RejectionTable tab = mc::tabulate(run);

  Report rep;
  rep.add("command", "mc-size");
  rep.add("version", kVersion);
  echo_experiment(rep, mcfg);
  rep.add("failures", run.failures);
  rep.add("annihilation_ok", run.annihilation_ok);

  std::string body = "arm,level,rate,mc_se,reps\n";
  for (const auto& row : tab.rows)
    body += row.arm + "," + format_real(row.level) + "," +
            format_real(row.rate) + "," + format_real(row.mc_se) + "," +
            std::to_string(row.reps) + "\n";
  rep.tables.emplace_back("size", body);
  return rep;
}

Report run_mc_power(const io::RunConfig& cfg) {
  if (!cfg.deltas || cfg.deltas->empty())
    throw io::ConfigError("mc-power requires key 'deltas'");
  const mc::ExperimentConfig mcfg = experiment_config(cfg);
  const mc::PowerCurves curves = mc::run_power(mcfg, *cfg.deltas);

  Report rep;
  rep.add("command", "mc-power");
  rep.add("version", kVersion);
  echo_experiment(rep, mcfg);
  rep.add("deltas", fmt_reals(curves.deltas));

  std::string crit = "arm,level,critical_value\n";
  for (std::size_t a = 0; a < curves.arm_names.size(); ++a)
    for (std::size_t l = 0; l < curves.levels.size(); ++l)
      crit += curves.arm_names[a] + "," + format_real(curves.levels[l]) +
              "," + format_real(curves.critical_values[a][l]) + "\n";
  rep.tables.emplace_back("critical_values", crit);

  std::string body = "arm,delta,level,rate\n";
  for (std::size_t a = 0; a < curves.arm_names.size(); ++a)
    for (std::size_t d = 0; d < curves.deltas.size(); ++d)
      for (std::size_t l = 0; l < curves.levels.size(); ++l)
        body += curves.arm_names[a] + "," + format_real(curves.deltas[d]) +
                "," + format_real(curves.levels[l]) + "," +
                format_real(curves.rates[a][d][l]) + "\n";
  rep.tables.emplace_back("power", body);
  return rep;
}

}  // namespace

void Report::add(const std::string& key, const std::string& value) {
  fields.emplace_back(key, value);
}
void Report::add(const std::string& key, const char* value) {
  fields.emplace_back(key, std::string(value));
}
void Report::add(const std::string& key, double value) {
  fields.emplace_back(key, format_real(value));
}
void Report::add(const std::string& key, int value) {
  fields.emplace_back(key, std::to_string(value));
}
void Report::add(const std::string& key, bool value) {
  fields.emplace_back(key, value ? "true" : "false");
}
void Report::add_seed(const std::string& key, std::uint64_t value) {
  fields.emplace_back(key, std::to_string(value));
}

std::string Report::text() const {
  std::string out;
  for (const auto& [k, v] : fields) out += k + ": " + v + "\n";
  for (const auto& [name, body] : tables)
    out += "\n[table " + name + "]\n" + body;
  return out;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // fold away the sign of zero
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> cmds{
      "fit-beta",          "fit-ame",    "fit-variance",
      "kotlarski-moments", "tva-moment", "mc-size",
      "mc-power"};
  return cmds;
}

Report run(const std::string& command, const io::RunConfig& cfg) {
  if (command == "fit-beta" || command == "fit-ame" ||
      command == "fit-variance")
    return run_fit(command, cfg);
  if (command == "kotlarski-moments") return run_kotlarski(cfg);
  if (command == "tva-moment") return run_tva(cfg);
  if (command == "mc-size") return run_mc_size(cfg);
  if (command == "mc-power") return run_mc_power(cfg);
  std::string known;
  for (const auto& c : commands()) known += (known.empty() ? "" : ", ") + c;
  throw std::invalid_argument("unknown command '" + command +
                              "' (known: " + known + ")");
}

}  // namespace uhm::driver
