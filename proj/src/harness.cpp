#include "vbsl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vbsl/matrix_calculus.hpp"
#include "vbsl/models/alpha_stable.hpp"
#include "vbsl/models/g_and_k.hpp"
#include "vbsl/models/normal_location.hpp"
#include "vbsl/stats.hpp"

namespace vbsl {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::vector<std::string>& problems) {
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

MatrixXd parse_matrix(const json& j, int dim, const std::string& field,
                      std::vector<std::string>& problems) {
  MatrixXd m = MatrixXd::Zero(dim, dim);
  if (j.is_object() && j.contains("diag")) {
    const auto d = j.at("diag");
    if (!d.is_array() || static_cast<int>(d.size()) != dim) {
      problems.push_back(field + ".diag: expected an array of length " + std::to_string(dim));
      return m;
    }
    for (int i = 0; i < dim; ++i) m(i, i) = d[i].get<double>();
    return m;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    problems.push_back(field + ": expected a " + std::to_string(dim) + "x" +
                       std::to_string(dim) + " matrix or {\"diag\": [...]}");
    return m;
  }
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != dim) {
      problems.push_back(field + ": row " + std::to_string(i) + " has wrong length");
      return m;
    }
    for (int c = 0; c < dim; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

MatrixXd read_delimited_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    std::vector<double> row;
    row.push_back(std::stod(first));
    double v;
    while (ls >> v) row.push_back(v);
    if (!rows.empty() && rows.back().size() != row.size())
      throw ConfigError("ragged rows in data file: " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("empty data file: " + path);
  MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[0].size(); ++c) m(i, c) = rows[i][c];
  return m;
}

std::unique_ptr<SimulatorModel> build_model(const json& spec, const std::string& base_dir) {
  if (!spec.is_object() || !spec.contains("id")) fail({"model.id: missing"});
  const std::string id = spec.at("id").get<std::string>();

  const auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path.string() : (fs::path(base_dir) / path).string();
  };
  const auto load_column = [&](int expected_cols) -> MatrixXd {
    if (spec.contains("data")) {
      const auto& d = spec.at("data");
      MatrixXd m(d.size(), 1);
      for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<long>(i), 0) = d[i].get<double>();
      return m;
    }
    if (!spec.contains("data_file")) fail({"model.data_file: missing (or inline model.data)"});
    MatrixXd m = read_delimited_matrix(resolve(spec.at("data_file").get<std::string>()));
    if (expected_cols > 0 && m.cols() != expected_cols)
      fail({"model.data_file: expected " + std::to_string(expected_cols) + " columns"});
    return m;
  };

  if (id == "normal_location") {
    if (spec.contains("y")) {
      const auto& y = spec.at("y");
      VectorXd v(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) v[static_cast<long>(i)] = y[i].get<double>();
      return std::make_unique<NormalLocationModel>(v);
    }
    if (!spec.contains("n")) fail({"model.n: missing (or give model.y)"});
    const int n = spec.at("n").get<int>();
    if (n < 1) fail({"model.n: must be >= 1"});
    return std::make_unique<NormalLocationModel>(NormalLocationModel::zeros(n));
  }
  if (id == "alpha_stable") {
    MatrixXd m = load_column(1);
    std::vector<double> data(m.data(), m.data() + m.rows());
    return std::make_unique<AlphaStableModel>(std::move(data));
  }
  if (id == "g_and_k") {
    if (!spec.contains("q")) fail({"model.q: missing"});
    const int q = spec.at("q").get<int>();
    if (q < 1 || q > 3) fail({"model.q: must be 1, 2 or 3"});
    MatrixXd m = load_column(q);
    return std::make_unique<GAndKModel>(std::move(m), q);
  }
  fail({"model.id: unknown model '" + id + "'"});
}

namespace {
RunConfig parse_impl(const json& j, const std::string& base_dir);
}  // namespace

RunConfig RunConfig::parse(const json& j, const std::string& base_dir) {
  try {
    return parse_impl(j, base_dir);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid configuration:\n  - config: ") + e.what());
  }
}

namespace {
RunConfig parse_impl(const json& j, const std::string& base_dir) {
  std::vector<std::string> problems;
  RunConfig cfg;
  json echo;

  if (!j.contains("model") || !j.at("model").is_object())
    problems.push_back("model: missing section");
  else
    cfg.model_spec = j.at("model");

  cfg.estimator = j.value("estimator", std::string());
  if (cfg.estimator != "vbsl" && cfg.estimator != "vbil" && cfg.estimator != "exact" &&
      cfg.estimator != "pm-mh")
    problems.push_back("estimator: must be one of vbsl, vbil, exact, pm-mh (got '" +
                       cfg.estimator + "')");

  // Build the model early: several fields are validated against p.
  std::unique_ptr<SimulatorModel> model;
  if (problems.empty()) {
    try {
      model = build_model(cfg.model_spec, base_dir);
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) fail(problems);
  const int p = model->param_dim();

  OptimizerConfig& oc = cfg.optimizer;
  if (cfg.estimator == "vbsl") oc.estimator = EstimatorKind::vbsl;
  if (cfg.estimator == "vbil") oc.estimator = EstimatorKind::vbil;
  if (cfg.estimator == "exact") oc.estimator = EstimatorKind::exact;

  const std::string par = j.value("parametrization", std::string("natural"));
  if (par == "natural")
    oc.parametrization = ParametrizationKind::natural;
  else if (par == "cholesky")
    oc.parametrization = ParametrizationKind::cholesky;
  else
    problems.push_back("parametrization: must be natural or cholesky");

  json step = j.value("step_rule", json{{"type", "fixed"}, {"offset", 5.0}});
  const std::string step_type = step.value("type", std::string("fixed"));
  if (step_type == "fixed") {
    oc.step_rule = StepRuleKind::fixed;
    oc.fixed_rate_offset = step.value("offset", 5.0);
    if (!(oc.fixed_rate_offset >= 0.0)) problems.push_back("step_rule.offset: must be >= 0");
    step = json{{"type", "fixed"}, {"offset", oc.fixed_rate_offset}};
  } else if (step_type == "adaptive") {
    oc.step_rule = StepRuleKind::adaptive;
    oc.rate_init_count = step.value("init_count", 5);
    oc.cap_uses_param_dim = step.value("cap_uses_param_dim", false);
    if (oc.rate_init_count < 1) problems.push_back("step_rule.init_count: must be >= 1");
    step = json{{"type", "adaptive"},
                {"init_count", oc.rate_init_count},
                {"cap_uses_param_dim", oc.cap_uses_param_dim}};
  } else if (step_type == "adadelta") {
    oc.step_rule = StepRuleKind::adadelta;
    oc.adadelta_decay = step.value("decay", 0.95);
    oc.adadelta_epsilon = step.value("epsilon", 1e-6);
    if (!(oc.adadelta_decay > 0.0 && oc.adadelta_decay < 1.0))
      problems.push_back("step_rule.decay: must be in (0, 1)");
    if (!(oc.adadelta_epsilon > 0.0)) problems.push_back("step_rule.epsilon: must be > 0");
    if (par == "natural")
      problems.push_back("step_rule: adadelta requires parametrization = cholesky");
    step = json{{"type", "adadelta"},
                {"decay", oc.adadelta_decay},
                {"epsilon", oc.adadelta_epsilon}};
  } else {
    problems.push_back("step_rule.type: must be fixed, adaptive or adadelta");
  }

  oc.sample_count = j.value("sample_count", 100);
  if (oc.sample_count < 2) problems.push_back("sample_count: must be >= 2");

  json npol = j.value("n_policy", json{{"type", "fixed"}, {"n", 50}});
  const std::string npol_type = npol.value("type", std::string("fixed"));
  if (npol_type == "fixed") {
    oc.n_policy.adaptive = false;
    oc.n_policy.n_fixed = npol.value("n", 50);
    if (oc.n_policy.n_fixed < 1) problems.push_back("n_policy.n: must be >= 1");
    npol = json{{"type", "fixed"}, {"n", oc.n_policy.n_fixed}};
  } else if (npol_type == "adaptive") {
    oc.n_policy.adaptive = true;
    auto& ad = oc.n_policy.adapt;
    ad.n_min = npol.value("n_min", 50);
    ad.target_var = npol.value("target_var", 0.1);
    ad.increment = npol.value("increment", 50);
    ad.hard_cap = npol.value("cap", 0L);
    if (ad.n_min < 1) problems.push_back("n_policy.n_min: must be >= 1");
    if (!(ad.target_var > 0.0)) problems.push_back("n_policy.target_var: must be > 0");
    if (ad.increment < 1) problems.push_back("n_policy.increment: must be >= 1");
    if (ad.hard_cap < 0) problems.push_back("n_policy.cap: must be >= 0");
    npol = json{{"type", "adaptive"},
                {"n_min", ad.n_min},
                {"target_var", ad.target_var},
                {"increment", ad.increment},
                {"cap", ad.hard_cap > 0 ? ad.hard_cap : 100L * ad.n_min}};
  } else {
    problems.push_back("n_policy.type: must be fixed or adaptive");
  }

  oc.abc_epsilon = j.value("abc_epsilon", 0.0);
  if (cfg.estimator == "vbil" && !(oc.abc_epsilon > 0.0))
    problems.push_back("abc_epsilon: must be > 0 for the vbil estimator");

  oc.iterations = j.value("iterations", 100);
  if (oc.iterations < 0) problems.push_back("iterations: must be >= 0");
  oc.seed = j.value("seed", 1ULL);
  oc.threads = j.value("threads", 1);
  if (oc.threads < 1) problems.push_back("threads: must be >= 1");
  oc.max_nonfinite_iters = j.value("max_nonfinite_iters", 10);

  json stopping = j.value("stopping", json{{"type", "iterations"}});
  const std::string stop_type = stopping.value("type", std::string("iterations"));
  if (stop_type == "iterations") {
    oc.stopping.plateau = false;
    stopping = json{{"type", "iterations"}};
  } else if (stop_type == "lb_plateau") {
    oc.stopping.plateau = true;
    oc.stopping.window = stopping.value("window", 10);
    oc.stopping.tolerance = stopping.value("tolerance", 0.01);
    oc.stopping.consecutive = stopping.value("consecutive", 3);
    if (oc.stopping.window < 2) problems.push_back("stopping.window: must be >= 2");
    if (!(oc.stopping.tolerance > 0.0)) problems.push_back("stopping.tolerance: must be > 0");
    if (oc.stopping.consecutive < 1) problems.push_back("stopping.consecutive: must be >= 1");
    stopping = json{{"type", "lb_plateau"},
                    {"window", oc.stopping.window},
                    {"tolerance", oc.stopping.tolerance},
                    {"consecutive", oc.stopping.consecutive}};
  } else {
    problems.push_back("stopping.type: must be iterations or lb_plateau");
  }

  // Initial variational distribution.
  json init = j.value("init", json::object());
  oc.init_mean = VectorXd::Zero(p);
  if (init.contains("mean")) {
    const auto& m = init.at("mean");
    if (m.is_string() && m.get<std::string>() == "from_summary") {
      if (model->summary_dim() != p)
        problems.push_back("init.mean: from_summary requires summary dimension == p");
      else
        cfg.init_mean_from_summary = true;
    } else if (m.is_array() && static_cast<int>(m.size()) == p) {
      for (int i = 0; i < p; ++i) oc.init_mean[i] = m[i].get<double>();
    } else {
      problems.push_back("init.mean: expected array of length " + std::to_string(p) +
                         " or \"from_summary\"");
    }
  }
  if (cfg.init_mean_from_summary) oc.init_mean = model->observed_summary();
  if (init.contains("cov")) {
    oc.init_cov = parse_matrix(init.at("cov"), p, "init.cov", problems);
  } else {
    oc.init_cov = MatrixXd::Identity(p, p);
  }
  if (problems.empty() && !matcalc::is_positive_definite(oc.init_cov))
    problems.push_back("init.cov: must be positive definite");
  init = json{{"mean", cfg.init_mean_from_summary ? json("from_summary")
                                                  : vector_to_json(oc.init_mean)},
              {"cov", matrix_to_json(oc.init_cov)}};

  // pm-mh section.
  if (cfg.estimator == "pm-mh") {
    if (!j.contains("pm") || !j.at("pm").is_object()) {
      problems.push_back("pm: missing section (required for pm-mh)");
    } else {
      const json& pm = j.at("pm");
      if (!pm.contains("proposal_cov"))
        problems.push_back("pm.proposal_cov: missing");
      else
        cfg.pm_proposal_cov = parse_matrix(pm.at("proposal_cov"), p, "pm.proposal_cov", problems);
      cfg.pm_burn_in = pm.value("burn_in", oc.iterations / 5);
      if (cfg.pm_burn_in < 0 || cfg.pm_burn_in >= oc.iterations)
        problems.push_back("pm.burn_in: must be in [0, iterations)");
      if (oc.n_policy.adaptive)
        problems.push_back("n_policy.type: pm-mh requires a fixed particle count");
      else if (oc.n_policy.n_fixed <= model->summary_dim() + 3)
        problems.push_back("n_policy.n: pm-mh requires N > d + 3");
    }
  }

  json output = j.value("output", json::object());
  cfg.out_dir = output.value("dir", std::string("."));
  cfg.prefix = output.value("prefix", std::string("run"));
  output = json{{"dir", cfg.out_dir}, {"prefix", cfg.prefix}};

  if (!problems.empty()) fail(problems);

  echo["model"] = cfg.model_spec;
  echo["estimator"] = cfg.estimator;
  echo["parametrization"] = par;
  echo["step_rule"] = step;
  echo["sample_count"] = oc.sample_count;
  echo["n_policy"] = npol;
  if (cfg.estimator == "vbil") echo["abc_epsilon"] = oc.abc_epsilon;
  echo["iterations"] = oc.iterations;
  echo["seed"] = oc.seed;
  echo["threads"] = oc.threads;
  echo["max_nonfinite_iters"] = oc.max_nonfinite_iters;
  echo["stopping"] = stopping;
  echo["init"] = init;
  if (cfg.estimator == "pm-mh")
    echo["pm"] = json{{"proposal_cov", matrix_to_json(cfg.pm_proposal_cov)},
                      {"burn_in", cfg.pm_burn_in}};
  echo["output"] = output;
  cfg.echo = std::move(echo);
  return cfg;
}
}  // namespace

namespace {

struct GridFiles {
  std::vector<std::string> paths;
  json natural_scale = json::array();
};

// Writes one normalized density grid per parameter: 512 points spanning
// mean +/- 4 sd on the working scale, mapped to the reporting scale by
// change of variables.  `density` evaluates the working-scale marginal.
GridFiles write_grids(const SimulatorModel& model, const VectorXd& mean, const VectorXd& sd,
                      const std::function<double(int, double)>& density,
                      const std::string& out_dir, const std::string& prefix) {
  constexpr int kPoints = 512;
  GridFiles out;
  const auto& transforms = model.transforms();
  for (int i = 0; i < mean.size(); ++i) {
    const auto& tr = transforms[static_cast<std::size_t>(i)];
    std::vector<double> xs(kPoints), fs(kPoints);
    const double lo = mean[i] - 4.0 * sd[i];
    const double step = 8.0 * sd[i] / (kPoints - 1);
    for (int g = 0; g < kPoints; ++g) {
      const double u = lo + g * step;
      xs[g] = tr.natural_from_working(u);
      fs[g] = density(i, u) * tr.dworking_dnatural(xs[g]);
    }
    double integral = 0.0;
    for (int g = 1; g < kPoints; ++g)
      integral += 0.5 * (fs[g] + fs[g - 1]) * (xs[g] - xs[g - 1]);
    double nat_mean = 0.0, nat_m2 = 0.0;
    for (int g = 1; g < kPoints; ++g) {
      const double dx = xs[g] - xs[g - 1];
      nat_mean += 0.5 * (fs[g] * xs[g] + fs[g - 1] * xs[g - 1]) * dx;
      nat_m2 += 0.5 * (fs[g] * xs[g] * xs[g] + fs[g - 1] * xs[g - 1] * xs[g - 1]) * dx;
    }
    nat_mean /= integral;
    nat_m2 /= integral;
    out.natural_scale.push_back(
        json{{"mean", nat_mean}, {"sd", std::sqrt(std::max(0.0, nat_m2 - nat_mean * nat_mean))}});

    const std::string path =
        (fs::path(out_dir) / (prefix + "_density_" + std::to_string(i) + ".tsv")).string();
    std::ofstream f(path);
    for (int g = 0; g < kPoints; ++g)
      f << fmt_double(xs[g]) << '\t' << fmt_double(fs[g] / integral) << '\n';
    out.paths.push_back(path);
  }
  return out;
}

std::vector<double> lb_column(const OptimizerTrace& trace) {
  std::vector<double> lb;
  lb.reserve(trace.records.size());
  for (std::size_t i = 1; i < trace.records.size(); ++i) lb.push_back(trace.records[i].lb);
  return lb;
}

}  // namespace

double smoothed_final_lb(const std::vector<double>& lb, int window) {
  if (lb.empty()) return -std::numeric_limits<double>::infinity();
  const int w = std::min<int>(window, static_cast<int>(lb.size()));
  double avg = 0.0;
  for (int i = 0; i < w; ++i) avg += lb[lb.size() - 1 - i];
  return avg / w;
}

RunOutputs run_experiment(const std::string& config_path, const RunOverrides& overrides) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  const std::string base_dir = fs::path(config_path).parent_path().string();
  RunConfig cfg = RunConfig::parse(j, base_dir.empty() ? "." : base_dir);
  if (overrides.seed) {
    cfg.optimizer.seed = *overrides.seed;
    cfg.echo["seed"] = *overrides.seed;
  }
  if (overrides.threads) {
    cfg.optimizer.threads = std::max(1, *overrides.threads);
    cfg.echo["threads"] = cfg.optimizer.threads;
  }
  if (overrides.out_dir) {
    cfg.out_dir = *overrides.out_dir;
    cfg.echo["output"]["dir"] = cfg.out_dir;
  }
  fs::create_directories(cfg.out_dir);

  auto model = build_model(cfg.model_spec, base_dir.empty() ? "." : base_dir);
  const int p = model->param_dim();

  RunOutputs out;
  json report;
  report["config"] = cfg.echo;
  report["model_info"] =
      json{{"id", model->id()}, {"p", p}, {"d", model->summary_dim()}};

  const std::string trace_path =
      (fs::path(cfg.out_dir) / (cfg.prefix + "_trace.tsv")).string();

  if (cfg.estimator == "pm-mh") {
    PmMhConfig pc;
    pc.iterations = cfg.optimizer.iterations;
    pc.proposal_cov = cfg.pm_proposal_cov;
    pc.n_particles = cfg.optimizer.n_policy.n_fixed;
    pc.seed = cfg.optimizer.seed;
    pc.theta0 = cfg.optimizer.init_mean;
    const auto chain = pm_mh(*model, pc);

    {
      std::ofstream f(trace_path);
      f << "iteration\taccepted\tlog_like\tlog_prior";
      for (int i = 0; i < p; ++i) f << "\ttheta_" << i;
      f << '\n';
      for (std::size_t it = 0; it < chain.size(); ++it) {
        f << it << '\t' << (chain[it].accepted ? 1 : 0) << '\t'
          << fmt_double(chain[it].log_like) << '\t' << fmt_double(chain[it].log_prior);
        for (int i = 0; i < p; ++i) f << '\t' << fmt_double(chain[it].theta[i]);
        f << '\n';
      }
    }

    const long kept = static_cast<long>(chain.size()) - cfg.pm_burn_in;
    MatrixXd draws(p, kept);
    for (long i = 0; i < kept; ++i) draws.col(i) = chain[cfg.pm_burn_in + i].theta;
    const VectorXd mean = draws.rowwise().mean();
    const MatrixXd centered = draws.colwise() - mean;
    const MatrixXd cov = centered * centered.transpose() / double(kept - 1);
    const VectorXd sd = cov.diagonal().cwiseSqrt();

    // Batch-means standard error of the chain mean.
    const int batches = 50;
    const long blen = kept / batches;
    VectorXd mc_err = VectorXd::Zero(p);
    if (blen >= 2) {
      MatrixXd bm(p, batches);
      for (int b = 0; b < batches; ++b)
        bm.col(b) = draws.middleCols(b * blen, blen).rowwise().mean();
      const VectorXd bmean = bm.rowwise().mean();
      const MatrixXd bc = bm.colwise() - bmean;
      mc_err = (bc.array().square().rowwise().sum() / (batches - 1.0) / batches).sqrt();
    }

    // Gaussian KDE on a thinned chain for the density grids.
    const long thin_target = 20000;
    const long stride = std::max(1L, kept / thin_target);
    std::vector<VectorXd> thinned;
    for (long i = 0; i < kept; i += stride) thinned.push_back(draws.col(i));
    const auto kde = [&](int dim_i, double u) {
      const double n = static_cast<double>(thinned.size());
      const double h = std::max(1e-12, 0.9 * sd[dim_i] * std::pow(n, -0.2));
      double acc = 0.0;
      for (const auto& x : thinned) {
        const double z = (u - x[dim_i]) / h;
        acc += std::exp(-0.5 * z * z);
      }
      return acc / (n * h * std::sqrt(2.0 * M_PI));
    };
    const auto grids = write_grids(*model, mean, sd, kde, cfg.out_dir, cfg.prefix);

    double acc_rate = 0.0;
    for (std::size_t i = 1; i < chain.size(); ++i) acc_rate += chain[i].accepted ? 1.0 : 0.0;
    acc_rate /= static_cast<double>(chain.size() - 1);

    report["final"] = json{{"mean_working", vector_to_json(mean)},
                           {"sd_working", vector_to_json(sd)},
                           {"cov_working", matrix_to_json(cov)},
                           {"natural_scale", grids.natural_scale},
                           {"mc_error", vector_to_json(mc_err)}};
    report["chain"] = json{{"acceptance_rate", acc_rate},
                           {"burn_in", cfg.pm_burn_in},
                           {"kept", kept}};
    report["budget"] = json{{"total_simulations",
                             static_cast<long>(chain.size()) * pc.n_particles},
                            {"iterations", cfg.optimizer.iterations}};
    out.grid_paths = grids.paths;
  } else {
    const OptimizerTrace trace = run_vb(cfg.optimizer, *model);

    {
      std::ofstream f(trace_path);
      f << "iteration\tlb\trho\tsims\tcum_sims\trejected\tfailed_draws";
      const int lam_dim = static_cast<int>(trace.records.front().lambda.size());
      for (int i = 0; i < lam_dim; ++i) f << "\tlambda_" << i;
      f << '\n';
      for (const auto& r : trace.records) {
        f << r.iteration << '\t' << fmt_double(r.lb) << '\t' << fmt_double(r.rho) << '\t'
          << r.sims << '\t' << r.cum_sims << '\t' << (r.rejected ? 1 : 0) << '\t'
          << r.failed_draws;
        for (int i = 0; i < r.lambda.size(); ++i) f << '\t' << fmt_double(r.lambda[i]);
        f << '\n';
      }
    }
    if (trace.aborted)
      throw std::runtime_error("optimizer aborted: " + trace.abort_reason +
                               " (partial trace written to " + trace_path + ")");

    const VectorXd mean = trace.final_mean;
    const MatrixXd cov = trace.final_cov;
    const VectorXd sd = cov.diagonal().cwiseSqrt();

    // Stochastic-approximation wobble of the variational mean over the tail
    // of the trace, used as a rough per-parameter Monte Carlo error.
    const int n_rec = static_cast<int>(trace.records.size());
    const int tail = std::min(n_rec - 1, std::max(10, cfg.optimizer.iterations / 5));
    VectorXd mc_err = VectorXd::Zero(p);
    if (tail >= 2) {
      MatrixXd tail_means(p, tail);
      for (int i = 0; i < tail; ++i) tail_means.col(i) = trace.records[n_rec - tail + i].mean;
      const VectorXd tmean = tail_means.rowwise().mean();
      const MatrixXd tc = tail_means.colwise() - tmean;
      mc_err = (tc.array().square().rowwise().sum() / (tail - 1.0)).sqrt();
    }

    const auto density = [&](int i, double u) { return std::exp(norm_logpdf(u, mean[i], sd[i] * sd[i])); };
    const auto grids = write_grids(*model, mean, sd, density, cfg.out_dir, cfg.prefix);

    const std::vector<double> lb = lb_column(trace);
    report["final"] = json{{"mean_working", vector_to_json(mean)},
                           {"sd_working", vector_to_json(sd)},
                           {"cov_working", matrix_to_json(cov)},
                           {"natural_scale", grids.natural_scale},
                           {"mc_error", vector_to_json(mc_err)}};
    report["lb"] = json{{"final", lb.empty() ? trace.records.front().lb : lb.back()},
                        {"final_smoothed", smoothed_final_lb(lb)},
                        {"window", 10}};
    report["budget"] =
        json{{"total_simulations", trace.total_sims}, {"iterations", cfg.optimizer.iterations}};
    out.grid_paths = grids.paths;
  }

  report["files"] = json{{"trace", fs::path(trace_path).filename().string()}};
  {
    json names = json::array();
    for (const auto& g : out.grid_paths) names.push_back(fs::path(g).filename().string());
    report["files"]["grids"] = names;
  }

  const std::string report_path =
      (fs::path(cfg.out_dir) / (cfg.prefix + "_report.json")).string();
  std::ofstream rf(report_path);
  rf << report.dump(2) << '\n';

  out.report_path = report_path;
  out.trace_path = trace_path;
  out.report = std::move(report);
  return out;
}

std::vector<std::string> validate_config_file(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) return {"cannot open config file: " + config_path};
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    return {std::string("config is not valid JSON: ") + e.what()};
  }
  const std::string base_dir = fs::path(config_path).parent_path().string();
  try {
    RunConfig::parse(j, base_dir.empty() ? "." : base_dir);
  } catch (const ConfigError& e) {
    std::vector<std::string> problems;
    std::istringstream ss(e.what());
    std::string line;
    std::getline(ss, line);  // drop the header line
    while (std::getline(ss, line)) {
      if (line.rfind("  - ", 0) == 0) line = line.substr(4);
      if (!line.empty()) problems.push_back(line);
    }
    if (problems.empty()) problems.push_back(e.what());
    return problems;
  }
  return {};
}

std::string compare_runs(const std::vector<std::string>& report_paths, double delta) {
  if (report_paths.size() < 2)
    throw std::invalid_argument("compare_runs: at least two reports required");

  struct Entry {
    std::string name;
    json report;
    std::vector<double> lb;
  };
  std::vector<Entry> entries;
  for (const auto& path : report_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    Entry e;
    e.name = fs::path(path).stem().string();
    in >> e.report;
    const auto dir = fs::path(path).parent_path();
    if (e.report.contains("files") && e.report["files"].contains("trace") &&
        e.report.contains("lb")) {
      const std::string trace_path = (dir / e.report["files"]["trace"].get<std::string>()).string();
      std::ifstream tf(trace_path);
      std::string line;
      std::getline(tf, line);  // header
      while (std::getline(tf, line)) {
        std::istringstream ls(line);
        long it;
        double lb;
        if (ls >> it >> lb && it > 0) e.lb.push_back(lb);
      }
    }
    entries.push_back(std::move(e));
  }
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].report["model_info"] != entries[0].report["model_info"] ||
        entries[i].report["config"]["model"] != entries[0].report["config"]["model"])
      throw std::runtime_error("compare_runs: reports come from different models");
  }

  double best_lb = -std::numeric_limits<double>::infinity();
  std::vector<double> finals(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    finals[i] = entries[i].lb.empty() && entries[i].report.contains("lb")
                    ? entries[i].report["lb"]["final_smoothed"].get<double>()
                    : smoothed_final_lb(entries[i].lb);
    if (entries[i].report.contains("lb")) best_lb = std::max(best_lb, finals[i]);
  }

  std::ostringstream table;
  table << "run\tfinal_lb\titers_to_within_" << delta << "_of_best\ttotal_sims";
  const auto np = entries[0].report["final"]["mean_working"].size();
  for (std::size_t i = 0; i < np; ++i)
    table << "\tmean_" << i << "\tsd_" << i << "\tmc_error_" << i;
  table << '\n';
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    table << e.name << '\t';
    if (e.report.contains("lb")) {
      table << fmt_double(finals[i]) << '\t';
      long hit = -1;
      for (std::size_t t = 0; t < e.lb.size(); ++t) {
        std::vector<double> head(e.lb.begin(), e.lb.begin() + t + 1);
        if (smoothed_final_lb(head) >= best_lb - delta) {
          hit = static_cast<long>(t + 1);
          break;
        }
      }
      table << (hit < 0 ? std::string("-") : std::to_string(hit)) << '\t';
    } else {
      table << "-\t-\t";
    }
    table << e.report["budget"]["total_simulations"].get<long>();
    for (std::size_t c = 0; c < np; ++c) {
      table << '\t' << fmt_double(e.report["final"]["mean_working"][c].get<double>()) << '\t'
            << fmt_double(e.report["final"]["sd_working"][c].get<double>()) << '\t'
            << fmt_double(e.report["final"]["mc_error"][c].get<double>());
    }
    table << '\n';
  }
  return table.str();
}

}  // namespace vbsl
