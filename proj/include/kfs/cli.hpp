#pragma once

// Command-line front end: select, hier, experiment, gradcheck.
//
// Exit codes: 0 success, 1 gradcheck tolerance failure, 2 malformed input or
// flags, 3 solver failure.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kfs/experiments.hpp"
#include "kfs/gradient.hpp"
#include "kfs/io.hpp"
#include "kfs/kernels.hpp"
#include "kfs/optimize.hpp"
#include "kfs/parallel.hpp"
#include "kfs/signals.hpp"

namespace kfs::cli {

enum ExitCode : int { kOk = 0, kToleranceFailure = 1, kUsage = 2, kSolverFailure = 3 };

/// Raised for solver failures; `stage` names the step that failed.
struct StageError : std::runtime_error {
  StageError(std::string stage_name, const std::string& what)
      : std::runtime_error(what), stage(std::move(stage_name)) {}
  std::string stage;
};

/// laplace | gaussian | mixture:t1:w1,t2:w2,... ; q overrides the default
/// exponent (1 for laplace and mixtures, 2 for gaussian).
inline KernelSpec parse_kernel(const std::string& name, std::optional<int> q) {
  if (name == "laplace") return KernelSpec(q.value_or(1), {{1.0, 1.0}});
  if (name == "gaussian") return KernelSpec(q.value_or(2), {{1.0, 1.0}});
  const std::string prefix = "mixture:";
  if (name.rfind(prefix, 0) == 0) {
    std::vector<Atom> atoms;
    std::stringstream ss(name.substr(prefix.size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("mixture atom '" + item + "' must be t:w");
      double t = 0.0, w = 0.0;
      if (!detail::parse_double(item.substr(0, colon), t) || !detail::parse_double(item.substr(colon + 1), w)) {
        throw std::invalid_argument("mixture atom '" + item + "' is not numeric");
      }
      atoms.push_back({t, w});
    }
    return KernelSpec(q.value_or(1), std::move(atoms));
  }
  throw std::invalid_argument("unknown kernel '" + name + "' (expected laplace, gaussian or mixture:t:w,...)");
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class Manifest {
 public:
  explicit Manifest(std::string command)
      : command_(std::move(command)), started_(std::chrono::steady_clock::now()), started_at_(utc_timestamp()) {}

  nlohmann::json& config() { return config_; }
  void add_input(const std::string& path) { inputs_.push_back({{"path", path}, {"sha256", file_sha256(path)}}); }
  void add_output(const std::string& path) { outputs_.push_back(path); }
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  void write(const std::string& path) const {
    nlohmann::json j;
    j["schema"] = kSchema;
    j["command"] = command_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["version"] = kVersion;
    j["threads"] = current_threads();
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    j["started_at"] = started_at_;
    j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    write_text(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point started_;
  std::string started_at_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
};

inline std::string manifest_path(const std::string& output) {
  const auto dot = output.rfind('.');
  const auto slash = output.find_last_of('/');
  const std::string stem =
      (dot != std::string::npos && (slash == std::string::npos || dot > slash)) ? output.substr(0, dot) : output;
  return stem + ".manifest.json";
}

struct SelectArgs {
  std::string input;
  std::string target;
  std::string out = "selection.json";
  std::string kernel = "laplace";
  std::optional<int> q;
  double lambda = 0.0;
  double gamma = 0.0;
  double M = 10.0;
  std::string step = "auto";
  int max_iters = 2000;
  double tol = 1e-7;
  double support_eps = 1e-8;
  double tau = 1.0;
  int max_rounds = 0;
  std::uint64_t seed = 0;
};

struct ExperimentArgs {
  std::string protocol;
  std::string out = "experiment";
  Eigen::Index n = 200;
  std::optional<Eigen::Index> p;
  int trials = 20;
  std::uint64_t seed = 1;
  std::optional<double> lambda;
  std::optional<double> sigma2;
  std::vector<double> gammas;
  std::vector<std::string> kernels{"laplace", "gaussian"};
  int max_iters = 300;
  double tol = 1e-6;
  double M = 10.0;
  double tau = 1.0;
  int max_rounds = 4;
  std::vector<Eigen::Index> n_list{100, 200, 400, 800};
  Eigen::Index n_ref = 3200;
  int seeds = 10;
};

struct GradcheckArgs {
  Eigen::Index n = 40;
  Eigen::Index p = 8;
  int q = 0;  // 0 runs both
  double lambda = 0.1;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double grad_tol = 1e-5;
  double nsd_tol = 1e-10;
};

inline SelectionConfig to_selection_config(const SelectArgs& a) {
  SelectionConfig c;
  c.lambda = a.lambda;
  c.gamma = a.gamma;
  c.M = a.M;
  if (a.step != "auto") {
    double v = 0.0;
    if (!detail::parse_double(a.step, v)) throw std::invalid_argument("--step must be a number or 'auto'");
    c.stepsize = v;
  }
  c.max_iters = a.max_iters;
  c.tol = a.tol;
  c.support_eps = a.support_eps;
  c.tau = a.tau;
  c.max_rounds = a.max_rounds;
  c.seed = a.seed;
  c.validate();
  return c;
}

inline int do_select(const SelectArgs& a, bool hierarchical, std::ostream& out) {
  Manifest manifest(hierarchical ? "hier" : "select");
  const KernelSpec spec = parse_kernel(a.kernel, a.q);
  const SelectionConfig config = to_selection_config(a);
  const CsvTable table = read_csv_file(a.input, a.target);
  manifest.add_input(a.input);

  SelectionResult result;
  try {
    const GradientEngine engine(spec, table.data, config.lambda);
    result = hierarchical ? hier_select(engine, config)
                          : pgd_select(engine, config, Beta::zeros(table.data.p(), config.M));
  } catch (const SolverError& e) {
    throw StageError(hierarchical ? "hierarchical selection" : "projected gradient descent", e.what());
  }

  nlohmann::json j = to_json(result);
  j["command"] = hierarchical ? "hier" : "select";
  j["kernel"] = spec.describe();
  j["q"] = spec.q();
  j["features"] = table.feature_names;
  j["target"] = table.target;
  j["y_mean"] = table.data.y_mean;
  write_text(a.out, j.dump(2) + "\n");

  manifest.config() = to_json(config);
  manifest.config()["kernel"] = spec.describe();
  manifest.config()["q"] = spec.q();
  manifest.config()["target"] = a.target;
  manifest.set("y_mean", table.data.y_mean);
  manifest.add_output(a.out);
  const std::string mpath = manifest_path(a.out);
  manifest.add_output(mpath);
  manifest.write(mpath);

  out << "support:";
  for (auto l : result.support) out << ' ' << table.feature_names[static_cast<std::size_t>(l)];
  out << "\nwrote " << a.out << " and " << mpath << '\n';
  return kOk;
}

inline int do_experiment(const ExperimentArgs& a, std::ostream& out) {
  Manifest manifest("experiment");
  const std::string csv_path = a.out + ".csv";
  const std::string json_path = a.out + ".json";
  const std::string mpath = a.out + ".manifest.json";
  nlohmann::json cfg_json;
  cfg_json["protocol"] = a.protocol;
  cfg_json["seed"] = a.seed;
  std::string csv;
  nlohmann::json results = nlohmann::json::array();

  try {
    if (a.protocol == "fig1" || a.protocol == "fig2") {
      ExperimentConfig cfg;
      cfg.n = a.n;
      cfg.trials = a.trials;
      cfg.seed = a.seed;
      cfg.lambda = a.lambda.value_or(0.01);
      cfg.gamma_grid = !a.gammas.empty() ? a.gammas : (a.protocol == "fig1" ? fig1_gamma_grid() : fig2_gamma_grid());
      cfg.selection.M = a.M;
      cfg.selection.max_iters = a.max_iters;
      cfg.selection.tol = a.tol;
      cfg.selection.tau = a.tau;
      cfg.selection.max_rounds = a.max_rounds;
      cfg.selection.lambda = cfg.lambda;
      cfg.selection.validate();
      const Eigen::Index p = a.p.value_or(200);
      ExperimentReport report;
      if (a.protocol == "fig1") {
        const double sigma2 = a.sigma2.value_or(4.0);
        std::vector<KernelSpec> kernels;
        for (const auto& k : a.kernels) kernels.push_back(parse_kernel(k, std::nullopt));
        report = run_roc(ModelSpec::main_effect(p, sigma2), kernels, cfg);
        cfg_json["sigma2"] = sigma2;
        cfg_json["kernels"] = a.kernels;
      } else {
        const double sigma2 = a.sigma2.value_or(1.0);
        report = run_hier_experiment(p, sigma2, cfg);
        cfg_json["sigma2"] = sigma2;
        cfg_json["kernels"] = {"laplace"};
      }
      cfg_json["n"] = cfg.n;
      cfg_json["p"] = p;
      cfg_json["trials"] = cfg.trials;
      cfg_json["lambda"] = cfg.lambda;
      cfg_json["gamma_grid"] = cfg.gamma_grid;
      cfg_json["selection"] = to_json(cfg.selection);
      csv = roc_csv(report.points);
      for (const auto& pt : report.points) results.push_back(to_json(pt));
    } else if (a.protocol == "trend") {
      TrendConfig cfg;
      cfg.lambda = a.lambda.value_or(0.1);
      cfg.n_list = a.n_list;
      cfg.seeds = a.seeds;
      cfg.n_ref = a.n_ref;
      cfg.seed = a.seed;
      const Eigen::Index p = a.p.value_or(10);
      const double sigma2 = a.sigma2.value_or(4.0);
      const KernelSpec kernel = parse_kernel(a.kernels.front(), std::nullopt);
      const auto points = run_concentration_trend(ModelSpec::main_effect(p, sigma2), kernel, cfg);
      cfg_json["p"] = p;
      cfg_json["sigma2"] = sigma2;
      cfg_json["lambda"] = cfg.lambda;
      cfg_json["n_list"] = cfg.n_list;
      cfg_json["n_ref"] = cfg.n_ref;
      cfg_json["seeds"] = cfg.seeds;
      cfg_json["kernel"] = kernel.describe();
      csv = trend_csv(points);
      for (const auto& pt : points) results.push_back(to_json(pt));
    } else {
      throw std::invalid_argument("unknown protocol '" + a.protocol + "' (expected fig1, fig2 or trend)");
    }
  } catch (const SolverError& e) {
    throw StageError("experiment " + a.protocol, e.what());
  }

  write_text(csv_path, csv);
  nlohmann::json j;
  j["schema"] = kSchema;
  j["command"] = "experiment";
  j["config"] = cfg_json;
  j["results"] = results;
  write_text(json_path, j.dump(2) + "\n");

  manifest.config() = cfg_json;
  manifest.add_output(csv_path);
  manifest.add_output(json_path);
  manifest.add_output(mpath);
  manifest.write(mpath);
  out << csv << "wrote " << csv_path << ", " << json_path << " and " << mpath << '\n';
  return kOk;
}

struct GradcheckOutcome {
  double max_rel_error = 0.0;
  double nsd_max = 0.0;  // max of sum r_i r_j h'(d_ij) / (n^2 |h'(0)| max r^2)
};

/// Finite-difference and NSD checks on a synthetic main-effect dataset with
/// beta drawn from (0.1, 1)^p.
inline GradcheckOutcome gradcheck(const KernelSpec& spec, const GradcheckArgs& a) {
  const ModelSpec model = a.p >= 2 ? ModelSpec::main_effect(a.p, 1.0)
                                   : ModelSpec::additive(a.p, 1.0, {{0, ComponentKind::linear}});
  const Dataset data = generate(model, a.n, a.seed);
  Rng rng(a.seed, Stream::beta_probe);
  Vector beta(a.p);
  for (Eigen::Index l = 0; l < a.p; ++l) beta[l] = rng.uniform(0.1, 1.0);

  GradcheckOutcome res;
  const GradientReport rep = full_gradient(spec, data, beta, a.lambda);
  const Vector fd = finite_diff_gradient(spec, data, beta, a.lambda, a.step);
  for (Eigen::Index l = 0; l < a.p; ++l) {
    res.max_rel_error = std::max(res.max_rel_error, std::abs(rep.grad[l] - fd[l]) / (1.0 + std::abs(rep.grad[l])));
  }
  const double hp0 = std::abs(spec.h_prime0());
  const double nn = static_cast<double>(a.n) * static_cast<double>(a.n);
  res.nsd_max = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    Vector r(a.n);
    for (Eigen::Index i = 0; i < a.n; ++i) r[i] = rng.normal();
    const double scale = nn * hp0 * r.cwiseAbs2().maxCoeff();
    res.nsd_max = std::max(res.nsd_max, pairwise_nsd_sum(spec, data.X, r, beta) / scale);
  }
  return res;
}

inline int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (a.n < 1 || a.p < 1) throw std::invalid_argument("--n and --p must be >= 1");
  if (!(a.lambda > 0.0)) throw std::invalid_argument("--lambda must be > 0");
  std::vector<int> qs = a.q == 0 ? std::vector<int>{1, 2} : std::vector<int>{a.q};
  bool ok = true;
  for (int q : qs) {
    const KernelSpec spec = q == 1 ? KernelSpec::laplace() : KernelSpec::gaussian();
    GradcheckOutcome res;
    try {
      res = gradcheck(spec, a);
    } catch (const SolverError& e) {
      throw StageError("gradcheck q=" + std::to_string(q), e.what());
    }
    const bool grad_ok = res.max_rel_error <= a.grad_tol;
    const bool nsd_ok = res.nsd_max <= a.nsd_tol;
    ok = ok && grad_ok && nsd_ok;
    out << "q=" << q << " kernel=" << spec.describe() << " max_rel_grad_err=" << std::scientific
        << std::setprecision(3) << res.max_rel_error << (grad_ok ? " ok" : " FAIL") << " nsd_max=" << res.nsd_max
        << (nsd_ok ? " ok" : " FAIL") << std::defaultfloat << '\n';
  }
  return ok ? kOk : kToleranceFailure;
}

inline void add_common_selection_flags(CLI::App* cmd, SelectArgs& a) {
  cmd->add_option("--input", a.input, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  cmd->add_option("--target", a.target, "response column name")->required();
  cmd->add_option("--out", a.out, "output JSON path");
  cmd->add_option("--kernel", a.kernel, "laplace | gaussian | mixture:t:w,...");
  cmd->add_option("--q", a.q, "kernel exponent")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--lambda", a.lambda, "KRR ridge parameter")->required();
  cmd->add_option("--gamma", a.gamma, "l1 penalty");
  cmd->add_option("--M", a.M, "l1 budget");
  cmd->add_option("--step", a.step, "stepsize or 'auto'");
  cmd->add_option("--max-iters", a.max_iters);
  cmd->add_option("--tol", a.tol, "sup-norm iterate change for stopping");
  cmd->add_option("--support-eps", a.support_eps);
  cmd->add_option("--seed", a.seed);
}

/// Entry point shared by the kfs binary and the tests.
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"kernel feature selection by projected gradient descent", "kfs"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file; command-line flags override it");
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: KFS_THREADS or hardware)");

  SelectArgs sel;
  auto* select_cmd = app.add_subcommand("select", "projected gradient descent from beta = 0");
  add_common_selection_flags(select_cmd, sel);

  SelectArgs hier;
  auto* hier_cmd = app.add_subcommand("hier", "hierarchical selection with pinned rounds");
  add_common_selection_flags(hier_cmd, hier);
  hier_cmd->add_option("--tau", hier.tau, "value for pinned coordinates");
  hier_cmd->add_option("--max-rounds", hier.max_rounds, "round cap (0 = p)");

  ExperimentArgs ex;
  auto* ex_cmd = app.add_subcommand("experiment", "synthetic ROC and trend protocols");
  ex_cmd->add_option("--protocol", ex.protocol, "fig1 | fig2 | trend")->required();
  ex_cmd->add_option("--out", ex.out, "output prefix for .csv/.json/.manifest.json");
  ex_cmd->add_option("--n", ex.n);
  ex_cmd->add_option("--p", ex.p);
  ex_cmd->add_option("--trials", ex.trials);
  ex_cmd->add_option("--seed", ex.seed);
  ex_cmd->add_option("--lambda", ex.lambda);
  ex_cmd->add_option("--sigma2", ex.sigma2);
  ex_cmd->add_option("--gammas", ex.gammas, "gamma grid")->delimiter(',');
  ex_cmd->add_option("--kernels", ex.kernels, "kernels for fig1 (first one for trend)")->delimiter(',');
  ex_cmd->add_option("--max-iters", ex.max_iters);
  ex_cmd->add_option("--tol", ex.tol);
  ex_cmd->add_option("--M", ex.M);
  ex_cmd->add_option("--tau", ex.tau);
  ex_cmd->add_option("--max-rounds", ex.max_rounds);
  ex_cmd->add_option("--n-list", ex.n_list)->delimiter(',');
  ex_cmd->add_option("--n-ref", ex.n_ref);
  ex_cmd->add_option("--seeds", ex.seeds);

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference and NSD self-check");
  gc_cmd->add_option("--n", gc.n);
  gc_cmd->add_option("--p", gc.p);
  gc_cmd->add_option("--q", gc.q, "1, 2, or 0 for both")->check(CLI::IsMember({0, 1, 2}));
  gc_cmd->add_option("--lambda", gc.lambda);
  gc_cmd->add_option("--seed", gc.seed);
  gc_cmd->add_option("--step", gc.step);

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  set_threads(threads);
  try {
    if (*select_cmd) return do_select(sel, false, out);
    if (*hier_cmd) return do_select(hier, true, out);
    if (*ex_cmd) return do_experiment(ex, out);
    if (*gc_cmd) return do_gradcheck(gc, out);
  } catch (const StageError& e) {
    err << "solver failure in " << e.stage << ": " << e.what() << '\n';
    return kSolverFailure;
  } catch (const SolverError& e) {
    err << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace kfs::cli
