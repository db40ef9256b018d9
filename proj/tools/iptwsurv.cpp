#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "iptwsurv/harness.hpp"
#include "iptwsurv/io.hpp"

using namespace iptwsurv;

namespace {

std::vector<double> parse_times(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    const auto v = parse_number(item);
    if (!v) throw ConfigError("bad time '" + item + "' in list '" + text + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Common {
  int boot = 500;
  std::uint64_t seed = 20240901;
  std::string estimators = "cox,ctv_lt,ctv_pwc,aft_gg,aft_wbl_ls,pseudo,wtd_km";
  std::string eval_times = "2,5,10";
  double horizon = 10.0;
  bool center_weights = true;
  int threads = 1;
  std::string out = "out";

  void add_to(CLI::App* app, bool with_boot = true) {
    if (with_boot) {
      app->add_option("--boot", boot, "Bootstrap iterations")->check(CLI::Range(2, 1000000));
      app->add_option("--estimators", estimators, "Comma-separated estimator labels");
      app->add_flag("--center-weights,!--no-center-weights", center_weights,
                    "Pseudo-observation means with arm-centered weights (default on)");
      app->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    }
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--eval-times", eval_times, "Comma-separated evaluation times (years)");
    app->add_option("--horizon", horizon, "Restriction horizon for RMS (years)");
  }

  AnalysisConfig analysis() const {
    AnalysisConfig a;
    a.estimators.clear();
    for (const auto& label : split(estimators)) a.estimators.push_back(parse_estimator(label));
    a.eval_times = parse_times(eval_times);
    a.horizon = horizon;
    a.center_weights = center_weights;
    a.bootstrap.iterations = boot;
    a.bootstrap.seed = seed;
    a.bootstrap.threads = threads;
    a.validate();
    return a;
  }
};

void print_truth(const std::string& source, const AnalysisConfig& a) {
  const auto spec = resolve_scenario(source);
  const auto x = gen_covariates(spec.covariates, spec.n_total, spec.covariate_seed).x;
  const auto truth = true_estimands(x, spec, a.eval_times, a.horizon);
  const auto labels = a.estimand_names();
  const auto v = truth.vector();
  std::cout << "scenario,estimand,truth\n";
  for (std::size_t k = 0; k < labels.size(); ++k) {
    std::cout << spec.name << ',' << labels[k] << ',' << format_number(v[static_cast<Index>(k)]) << '\n';
  }
}

void print_scenarios() {
  std::cout << "name,n_total,beta1,effect,kappa,cut,lambda,gamma,censoring\n";
  for (const auto& name : scenario_names()) {
    const auto s = named_scenario(name);
    std::cout << name << ',' << s.n_total << ',' << format_number(s.beta1) << ',' << to_string(s.effect.form) << ','
              << format_number(s.effect.kappa) << ',' << format_number(s.effect.cut) << ','
              << format_number(s.lambda) << ',' << format_number(s.gamma) << ",administrative@"
              << format_number(s.censoring.tau) << '\n';
  }
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidArgument*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const OutOfRange*>(&e)) return 3;
  if (dynamic_cast<const EstimationError*>(&e) || dynamic_cast<const ContractError*>(&e)) return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IPTW survival treatment effects under non-proportional hazards"};
  app.require_subcommand(1);
  const std::vector<std::string> command_line(argv, argv + argc);

  Common sim_opts;
  std::string scenario = "base";
  int replicates = 1000;
  std::string manifest;
  auto* simulate = app.add_subcommand("simulate", "Run simulation scenarios and write metrics tables");
  sim_opts.add_to(simulate);
  simulate->add_option("--scenario", scenario, "Scenario names or JSON config paths, comma-separated");
  simulate->add_option("--replicates", replicates, "Simulation replicates")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_opts.out, "Output directory");
  simulate->add_option("--from-manifest", manifest, "Rerun the configuration stored in a manifest.json");

  Common an_opts;
  std::string data;
  auto* analyze = app.add_subcommand("analyze", "Analyze a subject CSV (id,time,event,treatment,x1..xp)");
  an_opts.add_to(analyze);
  analyze->add_option("data", data, "Subject CSV")->required();
  analyze->add_option("--out", an_opts.out, "Output directory");

  Common truth_opts;
  std::string truth_scenario = "base";
  auto* truth = app.add_subcommand("truth", "Print a scenario's true treatment effects");
  truth_opts.add_to(truth, false);
  truth->add_option("--scenario", truth_scenario, "Scenario name or JSON config path");

  app.add_subcommand("scenarios", "List the scenario registry");

  std::string gen_scenario = "base", gen_out = "cohort.csv";
  std::uint64_t gen_seed = 1;
  bool randomize = false;
  auto* generate = app.add_subcommand("generate", "Write one simulated cohort as a subject CSV");
  generate->add_option("--scenario", gen_scenario, "Scenario name or JSON config path");
  generate->add_option("--seed", gen_seed, "Replicate seed");
  generate->add_option("--out", gen_out, "Output CSV");
  generate->add_flag("--randomize", randomize, "Assign treatment with probability 0.5 regardless of covariates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) {
      RunConfig config;
      if (!manifest.empty()) {
        config = load_manifest(manifest);
        config.threads = sim_opts.threads;
      } else {
        config.scenarios = split(scenario);
        config.replicates = replicates;
        config.seed = sim_opts.seed;
        config.threads = sim_opts.threads;
        config.analysis = sim_opts.analysis();
      }
      const auto result = run_simulation(config);
      emit_reports(result, sim_opts.out, command_line);
      std::cerr << "wrote " << result.metrics.rows.size() << " metric rows to " << sim_opts.out << '\n';
    } else if (analyze->parsed()) {
      const auto file = read_cohort_csv(data);
      const auto result = analyze_cohort(file.cohort, an_opts.analysis());
      emit_analysis(result, an_opts.out, file.covariate_names, command_line);
      std::cerr << "wrote report for " << result.estimators.size() << " estimators to " << an_opts.out << '\n';
      for (const auto& e : result.estimators) {
        if (e.degenerate) {
          std::cerr << "error: bootstrap degenerate for " << to_string(e.kind) << ": " << e.bootstrap.n_failed
                    << " failed replicates\n";
          return 4;
        }
      }
    } else if (truth->parsed()) {
      AnalysisConfig a;
      a.eval_times = parse_times(truth_opts.eval_times);
      a.horizon = truth_opts.horizon;
      a.validate();
      print_truth(truth_scenario, a);
    } else if (generate->parsed()) {
      auto spec = resolve_scenario(gen_scenario);
      if (randomize) {
        spec.treatment_coeffs.setZero();
        spec.calibrate_intercept = false;
        spec.treatment_intercept = 0.0;
      }
      const auto x = gen_covariates(spec.covariates, spec.n_total, spec.covariate_seed).x;
      const auto sim = simulate_cohort(spec, x, scenario_intercept(spec, x), gen_seed);
      write_cohort_csv(gen_out, sim.cohort, spec.covariates.column_names());
    } else {
      print_scenarios();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  return 0;
}
