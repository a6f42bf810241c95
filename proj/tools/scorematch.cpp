// Command-line front end: fit, simulate, mc-table, bootstrap, pit, predict-eval.

#include "scorematch/amle.hpp"
#include "scorematch/experiments.hpp"
#include "scorematch/inference.hpp"
#include "scorematch/io.hpp"
#include "scorematch/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace sm = scorematch;
using Json = nlohmann::ordered_json;

namespace {

struct RunConfig {
  std::string command;
  std::string model;
  std::vector<std::string> estimators;
  std::string input;
  std::string out;
  std::uint64_t seed = 1;
  std::vector<std::size_t> n;
  int replicates = 200;
  double level = 0.95;
  int bootstrap_samples = 1000;
  std::vector<std::string> z_modes{"hybrid"};
  double train_frac = 0.7;
  std::vector<std::string> response;
  std::vector<std::string> covariates;
  bool no_intercept = false;
  bool derandomized = false;
  int max_iter = 5000;
  double f_tol = 1e-10;
  double x_tol = 1e-8;
  int restarts = 2;
};

[[noreturn]] void usage(const std::string& msg) { sm::fail(sm::ErrorCode::invalid_argument, msg); }

sm::Setting parse_model(const RunConfig& c) {
  if (c.model == "tg") return sm::Setting::tg;
  if (c.model == "cmp") return sm::Setting::cmp;
  usage("--model must be tg or cmp");
}

sm::FitOptions fit_options(const RunConfig& c) {
  sm::FitOptions o;
  o.nm.max_iter = c.max_iter;
  o.nm.f_tol = c.f_tol;
  o.nm.x_tol = c.x_tol;
  o.restarts = c.restarts;
  return o;
}

std::unique_ptr<sm::Estimator> make_estimator(sm::Setting model, const std::string& name, const std::string& z_mode,
                                              const RunConfig& c) {
  if (model == sm::Setting::tg) {
    if (name != "sm") usage("model tg supports only --estimator sm");
    return std::make_unique<sm::SmEstimator>(fit_options(c));
  }
  if (name == "gsm") return std::make_unique<sm::GsmEstimator>(fit_options(c));
  if (name == "amle") {
    sm::AmleConfig a;
    a.z_mode = sm::parse_z_mode(z_mode);
    a.nm = fit_options(c).nm;
    a.restarts = c.restarts;
    return std::make_unique<sm::AmleEstimator>(a);
  }
  usage("model cmp supports --estimator gsm or amle");
}

void require(bool ok, const std::string& what) {
  if (!ok) usage(what);
}

void validate(const RunConfig& c) {
  require(!c.model.empty(), "--model is required");
  parse_model(c);
  require(!c.out.empty(), "--out is required");
  require(c.level > 0.0 && c.level < 1.0, "--level must be in (0, 1)");
  require(c.max_iter >= 1 && c.restarts >= 0, "optimizer overrides out of range");
  for (const auto& z : c.z_modes) sm::parse_z_mode(z);
  const bool needs_input = c.command == "fit" || c.command == "bootstrap" || c.command == "pit" ||
                           c.command == "predict-eval";
  if (needs_input) {
    require(!c.input.empty(), "--input is required for " + c.command);
    require(!c.response.empty(), "--response is required for " + c.command);
  }
  if (c.command == "fit" || c.command == "bootstrap") require(c.estimators.size() == 1, "give exactly one --estimator");
  if (c.command == "pit" || c.command == "predict-eval") require(c.model == "cmp", c.command + " needs --model cmp");
  if (c.command == "pit") require(c.estimators.size() == 1, "give exactly one --estimator");
  if (c.command == "simulate") require(c.n.size() == 1 && c.n[0] >= 1, "simulate needs a single --n >= 1");
  if (c.command == "mc-table") {
    require(c.replicates >= 2, "--replicates must be >= 2");
    for (std::size_t v : c.n) require(v >= 1, "--n values must be >= 1");
  }
  if (c.command == "bootstrap") require(c.bootstrap_samples >= 2, "--bootstrap-samples must be >= 2");
  if (c.command == "predict-eval") require(c.train_frac > 0.0 && c.train_frac < 1.0, "--train-frac must be in (0, 1)");
}

Json config_echo(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["model"] = c.model;
  j["estimator"] = c.estimators;
  if (!c.input.empty()) j["input"] = c.input;
  j["seed"] = c.seed;
  if (!c.n.empty()) j["n"] = c.n;
  j["replicates"] = c.replicates;
  j["level"] = c.level;
  j["bootstrap_samples"] = c.bootstrap_samples;
  j["z_mode"] = c.z_modes;
  j["train_frac"] = c.train_frac;
  j["response"] = c.response;
  j["covariates"] = c.covariates;
  j["intercept"] = !c.no_intercept;
  j["derandomized"] = c.derandomized;
  j["max_iter"] = c.max_iter;
  j["f_tol"] = c.f_tol;
  j["x_tol"] = c.x_tol;
  j["restarts"] = c.restarts;
  return j;
}

/// Loads the input; truncated Gaussian responses are log-transformed.
sm::Dataset load_input(const RunConfig& c, sm::Setting model) {
  const bool counts = model == sm::Setting::cmp;
  sm::Dataset raw = sm::load_csv(c.input, c.response, c.covariates, !c.no_intercept, counts);
  if (counts) return raw;
  const sm::RowMatrix& y = raw.y_cont();
  if (!(y.array() > 0.0).all()) sm::fail(sm::ErrorCode::domain, c.input + ": truncated Gaussian responses must be > 0");
  return sm::Dataset::continuous(raw.x(), y.array().log().matrix());
}

std::vector<std::string> covariate_names(const RunConfig& c) {
  std::vector<std::string> names;
  if (!c.no_intercept) names.emplace_back("intercept");
  names.insert(names.end(), c.covariates.begin(), c.covariates.end());
  return names;
}

/// Replaces the generic beta/B labels with input column names.
void relabel(sm::CiTable& table, sm::Setting model, const RunConfig& c, std::size_t d) {
  const auto cov = covariate_names(c);
  if (model == sm::Setting::cmp) {
    for (std::size_t k = 0; k < cov.size(); ++k) table[k].parameter = "beta_" + cov[k];
    return;
  }
  for (std::size_t k = 0; k < cov.size(); ++k)
    for (std::size_t j = 0; j < d; ++j) table[j + k * d].parameter = "B_" + c.response[j] + "_" + cov[k];
}

void write_meta(const RunConfig& c, Json extra, double seconds) {
  Json meta;
  meta["seed"] = c.seed;
  meta["config"] = config_echo(c);
  for (auto& [k, v] : extra.items()) meta[k] = v;
  meta["runtime_seconds"] = seconds;
  sm::write_text((std::filesystem::path(c.out) / "meta.json").string(), meta.dump(2) + "\n");
}

Json fit_and_write(const RunConfig& c, bool bootstrap) {
  const sm::Setting model = parse_model(c);
  const sm::Dataset data = load_input(c, model);
  const auto est = make_estimator(model, c.estimators[0], c.z_modes.at(0), c);
  const sm::Estimate e = est->estimate(data, sm::Exec::parallel);
  const sm::ParamVector theta = sm::make_param_vector(model == sm::Setting::tg ? sm::Layout::truncated_gaussian : sm::Layout::cmp,
                                                      data.response_dim(), data.covariates(), e.theta);
  Json extra;
  extra["n"] = data.rows();
  extra["estimator"] = est->name();
  if (!est->variant().empty()) extra["variant"] = est->variant();
  extra["objective"] = e.objective;
  extra["converged"] = e.converged;
  extra["iterations"] = e.iterations;
  extra["function_evals"] = e.function_evals;
  if (model == sm::Setting::tg) extra["lambda_positive_definite"] = sm::is_positive_definite(sm::unpack_tg(theta).Lambda);

  sm::CiTable table;
  if (bootstrap) {
    sm::BootstrapOptions bo;
    bo.replicates = c.bootstrap_samples;
    bo.level = c.level;
    bo.seed = c.seed;
    const sm::BootstrapResult br = sm::model_bootstrap(model, *est, data, theta, bo);
    table = br.table;
    extra["bootstrap_failed"] = br.failed;
    std::string draws;
    const auto names = sm::parameter_names(theta.layout, theta.response_dim, theta.covariates);
    for (std::size_t k = 0; k < names.size(); ++k) draws += (k ? "," : "") + names[k];
    draws += "\n";
    for (Eigen::Index r = 0; r < br.draws.rows(); ++r) {
      for (Eigen::Index k = 0; k < br.draws.cols(); ++k) draws += (k ? "," : "") + sm::format_double(br.draws(r, k));
      draws += "\n";
    }
    sm::write_text((std::filesystem::path(c.out) / "bootstrap_draws.csv").string(), draws);
  } else {
    table = sm::wald_table(theta, e.se, c.level);
  }
  relabel(table, model, c, data.response_dim());
  sm::write_text((std::filesystem::path(c.out) / "coefficients.csv").string(), sm::coefficients_csv(table));
  return extra;
}

Json cmd_simulate(const RunConfig& c) {
  const sm::Setting model = parse_model(c);
  const std::size_t n = c.n[0];
  const sm::RowMatrix x = sm::setting_design(model, n, c.seed);
  sm::RngStream rng(c.seed, sm::replicate_stream(n, 0));
  std::string csv;
  if (model == sm::Setting::tg) {
    sm::RowMatrix y = sm::tg_sample(x, sm::tg_truth(), rng);
    csv = sm::dataset_csv(sm::Dataset::continuous(x, std::move(y)), {"y1", "y2"}, {"x2"}, true);
  } else {
    const sm::Dataset d = sm::CmpSimulator(x, sm::cmp_truth()).draw(rng);
    csv = sm::dataset_csv(d, {"y"}, {"gender", "married", "kid5", "phd", "mentor"}, true);
  }
  sm::write_text((std::filesystem::path(c.out) / "data.csv").string(), csv);
  Json extra;
  extra["n"] = n;
  const Eigen::VectorXd truth = sm::setting_truth(model).theta;
  extra["truth"] = std::vector<double>(truth.data(), truth.data() + truth.size());
  return extra;
}

Json cmd_mc(const RunConfig& c) {
  const sm::Setting model = parse_model(c);
  std::vector<std::unique_ptr<sm::Estimator>> owned;
  for (const auto& name : c.estimators) {
    if (name == "amle")
      for (const auto& z : c.z_modes) owned.push_back(make_estimator(model, name, z, c));
    else
      owned.push_back(make_estimator(model, name, "hybrid", c));
  }
  std::vector<const sm::Estimator*> ests;
  for (const auto& e : owned) ests.push_back(e.get());
  sm::McOptions mo;
  mo.level = c.level;
  const sm::McReport report = sm::run_mc(model, ests, c.n, c.replicates, c.seed, mo);
  sm::write_text((std::filesystem::path(c.out) / "mc_report.csv").string(), sm::mc_report_csv(report));
  Json extra;
  extra["rows"] = report.rows.size();
  return extra;
}

Json cmd_pit(const RunConfig& c) {
  const sm::Setting model = parse_model(c);
  const sm::Dataset data = load_input(c, model);
  const auto est = make_estimator(model, c.estimators[0], c.z_modes.at(0), c);
  const sm::Estimate e = est->estimate(data, sm::Exec::parallel);
  sm::RngStream rng(c.seed, 0);
  const Eigen::VectorXd u = sm::pit_values(data, sm::unpack_cmp(sm::make_param_vector(sm::Layout::cmp, 1, data.covariates(), e.theta)),
                                           c.derandomized ? nullptr : &rng);
  sm::write_text((std::filesystem::path(c.out) / "pit.csv").string(), sm::pit_csv(u));
  Json extra;
  extra["n"] = data.rows();
  extra["ks_distance"] = sm::ks_uniform_distance(u);
  return extra;
}

Json cmd_predict(const RunConfig& c) {
  const sm::Setting model = parse_model(c);
  const sm::Dataset data = load_input(c, model);
  std::string csv = "estimator,variant,mse,train_rows,test_rows\n";
  Json extra;
  for (const auto& name : c.estimators) {
    const auto est = make_estimator(model, name, c.z_modes.at(0), c);
    const sm::CmpFitter fitter = [&](const sm::Dataset& d) {
      const sm::Estimate e = est->estimate(d, sm::Exec::parallel);
      return sm::unpack_cmp(sm::make_param_vector(sm::Layout::cmp, 1, d.covariates(), e.theta));
    };
    const sm::TrainTestResult r = sm::train_test_mse(data, c.seed, c.train_frac, fitter);
    csv += est->name() + "," + est->variant() + "," + sm::format_double(r.mse) + "," + std::to_string(r.train_rows) +
           "," + std::to_string(r.test_rows) + "\n";
    extra["mse_" + est->name()] = r.mse;
  }
  sm::write_text((std::filesystem::path(c.out) / "predict_eval.csv").string(), csv);
  return extra;
}

void apply_thread_env() {
  const char* env = std::getenv("SCOREMATCH_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long k = std::strtol(env, &end, 10);
  if (*end != '\0' || k < 1 || k > 4096) usage("SCOREMATCH_THREADS must be a positive integer");
  sm::set_max_threads(static_cast<int>(k));
}

void add_common(CLI::App* sub, RunConfig& c, bool data_opts) {
  sub->add_option("--model", c.model, "tg or cmp")->required();
  sub->add_option("--out", c.out, "output directory")->required();
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--max-iter", c.max_iter, "Nelder-Mead iteration cap");
  sub->add_option("--f-tol", c.f_tol, "Nelder-Mead function tolerance");
  sub->add_option("--x-tol", c.x_tol, "Nelder-Mead simplex tolerance");
  sub->add_option("--restarts", c.restarts, "Nelder-Mead restarts from the optimum");
  if (data_opts) {
    sub->add_option("--input", c.input, "input CSV")->required();
    sub->add_option("--response", c.response, "response column(s)")->delimiter(',')->required();
    sub->add_option("--covariates", c.covariates, "covariate columns")->delimiter(',');
    sub->add_flag("--no-intercept", c.no_intercept, "do not prepend an intercept column");
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Score matching estimation for regression models with intractable normalizing constants"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "fit a model to a CSV and report Wald intervals");
  add_common(fit, c, true);
  fit->add_option("--estimator", c.estimators, "sm, gsm or amle")->required();
  fit->add_option("--level", c.level, "confidence level");
  fit->add_option("--z-mode", c.z_modes, "AMLE normalizer: truncated, asymptotic or hybrid");

  auto* sim = app.add_subcommand("simulate", "draw a dataset at the built-in truth");
  add_common(sim, c, false);
  sim->add_option("--n", c.n, "rows")->required();

  auto* mc = app.add_subcommand("mc-table", "Monte Carlo bias/SD/ASD/RMSE/coverage table");
  add_common(mc, c, false);
  mc->add_option("--estimator", c.estimators, "comma-separated estimators")->delimiter(',')->required();
  mc->add_option("--n", c.n, "comma-separated sample sizes")->delimiter(',')->required();
  mc->add_option("--replicates", c.replicates, "Monte Carlo replicates");
  mc->add_option("--level", c.level, "confidence level");
  mc->add_option("--z-mode", c.z_modes, "AMLE normalizer(s)")->delimiter(',');

  auto* boot = app.add_subcommand("bootstrap", "parametric bootstrap percentile intervals");
  add_common(boot, c, true);
  boot->add_option("--estimator", c.estimators, "sm, gsm or amle")->required();
  boot->add_option("--level", c.level, "confidence level");
  boot->add_option("--bootstrap-samples", c.bootstrap_samples, "bootstrap replicates");
  boot->add_option("--z-mode", c.z_modes, "AMLE normalizer");

  auto* pit = app.add_subcommand("pit", "randomized PIT values of a fitted CMP model");
  add_common(pit, c, true);
  pit->add_option("--estimator", c.estimators, "gsm or amle")->required();
  pit->add_option("--z-mode", c.z_modes, "AMLE normalizer");
  pit->add_flag("--derandomized", c.derandomized, "use mid-cdf values instead of uniform draws");

  auto* pred = app.add_subcommand("predict-eval", "train/test mean squared error of CMP predictions");
  add_common(pred, c, true);
  pred->add_option("--estimator", c.estimators, "comma-separated estimators")->delimiter(',')->required();
  pred->add_option("--train-frac", c.train_frac, "training fraction");
  pred->add_option("--z-mode", c.z_modes, "AMLE normalizer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: invalid_argument: " << e.what() << "\n";
    return 1;
  }

  try {
    apply_thread_env();
    c.command = app.get_subcommands().front()->get_name();
    if (c.n.empty() && c.command == "mc-table") c.n = {1000};
    validate(c);
    sm::ensure_directory(c.out);
    const auto start = std::chrono::steady_clock::now();
    Json extra;
    if (c.command == "fit")
      extra = fit_and_write(c, false);
    else if (c.command == "bootstrap")
      extra = fit_and_write(c, true);
    else if (c.command == "simulate")
      extra = cmd_simulate(c);
    else if (c.command == "mc-table")
      extra = cmd_mc(c);
    else if (c.command == "pit")
      extra = cmd_pit(c);
    else
      extra = cmd_predict(c);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_meta(c, std::move(extra), seconds);
    return 0;
  } catch (const sm::Error& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "error: " << sm::error_code_name(e.code()) << ": " << msg << "\n";
    return e.internal() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 2;
  }
}
