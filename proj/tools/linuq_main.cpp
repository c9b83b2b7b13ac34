#include <iostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "linuq/experiments.hpp"

namespace {

// Exit codes: 0 success, 1 validation/configuration error, 2 numerical
// failure.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "linuq - probabilistic linear solver experiments: CG with calibrated "
      "posterior error estimates on the system inverse"};

  linuq::ExperimentConfig config;
  std::string config_path;
  std::string matrix_path, rhs_path, model_path, b_test_path;

  app.add_option("--experiment", config.experiment,
                 "fig1 | fig2to5 | solve | predict");
  app.add_option("--n", config.n, "problem dimension");
  app.add_option("--trials", config.trials, "number of trials");
  app.add_option("--spectrum", config.spectrum,
                 "uniform:lo:hi | exponential:scale | "
                 "structured:L:hlo:hhi:tlo:thi");
  app.add_option("--estimator", config.estimator,
                 "stationary | linear | structured:L:mult");
  app.add_option("--prior", config.prior, "standardized_norm | bfgs_cg");
  app.add_option("--seed", config.seed, "random seed");
  app.add_option("--out", config.out_dir, "output directory");
  app.add_option("--eval-stride", config.eval_stride,
                 "steps between posterior evaluations (fig2to5)");
  app.add_option("--residual-tol", config.residual_tol,
                 "CG relative residual tolerance");
  app.add_option("--alpha-safety", config.alpha_safety,
                 "safety factor for the prior-mean scale");
  app.add_option("--omega-mode", config.omega_mode,
                 "retrospective | predictive | geometric");
  app.add_option("--config", config_path,
                 "JSON config file (overrides the flags above)");
  app.add_option("--matrix", matrix_path, "matrix file (solve)");
  app.add_option("--rhs", rhs_path, "right-hand-side file (solve)");
  app.add_option("--model", model_path, "model file (predict)");
  app.add_option("--b-test", b_test_path, "test right-hand side (predict)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      config = linuq::ExperimentConfig::load_json(config_path, config);
    }
    config.validate();

    if (config.experiment == "fig1") {
      const auto result = linuq::run_fig1(config);
      std::cout << "fig1 written to " << config.out_dir << "/fig1.csv\n";
      const linuq::Index mid = config.n / 2;
      for (std::size_t k = 0; k < result.estimators.size(); ++k) {
        std::cout << "  mean error at M=" << mid + 1 << " "
                  << result.estimators[k] << ": "
                  << result.mean_error(mid, k) << '\n';
      }
    } else if (config.experiment == "fig2to5") {
      const auto result = linuq::run_fig2to5(config);
      std::cout << "fig2-fig5 CSV written to " << config.out_dir << '\n';
      for (const auto& s : result.per_spectrum) {
        std::cout << "  " << s.spectrum
                  << ": median |err|/sd H-elements sn=" << s.sn_element_ratio
                  << " bfgs=" << s.bfgs_element_ratio
                  << "; x_test sn=" << s.sn_xtest_ratio
                  << " bfgs=" << s.bfgs_xtest_ratio << '\n';
      }
    } else if (config.experiment == "solve") {
      if (matrix_path.empty() || rhs_path.empty()) {
        std::cerr << "solve requires --matrix and --rhs\n";
        return kExitValidation;
      }
      linuq::run_solve(config, matrix_path, rhs_path, std::cout);
    } else if (config.experiment == "predict") {
      if (model_path.empty() || b_test_path.empty()) {
        std::cerr << "predict requires --model and --b-test\n";
        return kExitValidation;
      }
      linuq::run_predict(model_path, b_test_path, std::cout);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
