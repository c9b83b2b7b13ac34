#include "linuq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "linuq/gaussian.hpp"
#include "linuq/secant.hpp"
#include "linuq/text_io.hpp"
#include "nlohmann/json.hpp"

namespace linuq {

namespace {

using nlohmann::json;

constexpr std::uint64_t kExperimentFig1 = 1;
constexpr std::uint64_t kExperimentFig2to5 = 2;
constexpr std::uint64_t kExperimentSolve = 3;

// Stream purposes within a trial.
constexpr std::uint64_t kPurposeMatrix = 0;
constexpr std::uint64_t kPurposeRhs = 1;
constexpr std::uint64_t kPurposeXtest = 2;
constexpr std::uint64_t kPurposeElements = 3;
constexpr std::uint64_t kPurposeProjections = 4;

double median_of(std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double m = values[mid];
  if (values.size() % 2 == 0) {
    std::nth_element(values.begin(), values.begin() + mid - 1,
                     values.begin() + mid);
    m = 0.5 * (m + values[mid - 1]);
  }
  return m;
}

std::ofstream open_csv(const ExperimentConfig& config,
                       const std::string& name, const std::string& header) {
  std::filesystem::create_directories(config.out_dir);
  const auto path = std::filesystem::path(config.out_dir) / name;
  std::ofstream out(path);
  if (!out) {
    throw std::invalid_argument("cannot open " + path.string() +
                                " for writing");
  }
  out << "# config_hash=" << std::hex << config.hash() << std::dec
      << " seed=" << config.seed << '\n';
  out << header << '\n';
  return out;
}

std::vector<std::pair<Index, Index>> sample_elements(RandomStream& stream,
                                                     Index n, Index count) {
  std::set<std::pair<Index, Index>> seen;
  std::vector<std::pair<Index, Index>> out;
  while (static_cast<Index>(out.size()) < count) {
    const Index i = static_cast<Index>(stream.uniform() * n);
    const Index j = static_cast<Index>(stream.uniform() * n);
    if (i >= n || j >= n) continue;
    if (seen.insert({i, j}).second) out.push_back({i, j});
  }
  return out;
}

OmegaSeries slice_series(const OmegaSeries& full, Index count) {
  OmegaSeries out;
  out.values = full.values.head(std::min<Index>(count, full.values.size()));
  return out;
}

// The linear-trend rule needs two points; early steps fall back to the
// stationary baseline.
double estimate_omega_early_safe(const OmegaSeries& series,
                                 const OmegaEstimator& rule) {
  if (rule.rule == OmegaEstimator::Rule::kLinearTrend &&
      series.values.size() < 2) {
    return estimate_omega(series, OmegaEstimator::stationary());
  }
  return estimate_omega(series, rule);
}

}  // namespace

void ExperimentConfig::validate() const {
  static const std::set<std::string> kExperiments{"fig1", "fig2to5", "solve",
                                                  "predict"};
  if (!kExperiments.count(experiment)) {
    throw std::invalid_argument("config: unknown experiment '" + experiment +
                                "'");
  }
  if (n < 1) throw std::invalid_argument("config: n must be positive");
  if (trials < 1) throw std::invalid_argument("config: trials must be positive");
  if (eval_stride < 1) {
    throw std::invalid_argument("config: eval_stride must be positive");
  }
  if (residual_tol < 0 || residual_tol >= 1) {
    throw std::invalid_argument("config: residual_tol must be in [0,1)");
  }
  if (alpha_safety <= 0 || alpha_safety >= 1) {
    throw std::invalid_argument("config: alpha_safety must be in (0,1)");
  }
  if (prior != "standardized_norm" && prior != "bfgs_cg") {
    throw std::invalid_argument("config: prior must be standardized_norm or bfgs_cg");
  }
  SpectrumSpec::parse(spectrum, n);       // throws on malformed spec
  parse_estimator(estimator, n);          // throws on malformed rule
  parse_omega_mode(omega_mode);
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << "experiment=" << experiment << ";n=" << n << ";trials=" << trials
      << ";spectrum=" << spectrum << ";estimator=" << estimator
      << ";prior=" << prior << ";seed=" << seed << ";stride=" << eval_stride
      << ";tol=" << format_double(residual_tol)
      << ";safety=" << format_double(alpha_safety) << ";omega=" << omega_mode;
  return out.str();
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(canonical()); }

ExperimentConfig ExperimentConfig::load_json(const std::string& path,
                                             ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  if (j.contains("experiment")) base.experiment = j["experiment"];
  if (j.contains("n")) base.n = j["n"];
  if (j.contains("trials")) base.trials = j["trials"];
  if (j.contains("spectrum")) base.spectrum = j["spectrum"];
  if (j.contains("estimator")) base.estimator = j["estimator"];
  if (j.contains("prior")) base.prior = j["prior"];
  if (j.contains("seed")) base.seed = j["seed"];
  if (j.contains("out")) base.out_dir = j["out"];
  if (j.contains("eval_stride")) base.eval_stride = j["eval_stride"];
  if (j.contains("residual_tol")) base.residual_tol = j["residual_tol"];
  if (j.contains("alpha_safety")) base.alpha_safety = j["alpha_safety"];
  if (j.contains("omega_mode")) base.omega_mode = j["omega_mode"];
  return base;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["n"] = n;
  j["trials"] = trials;
  j["spectrum"] = spectrum;
  j["estimator"] = estimator;
  j["prior"] = prior;
  j["seed"] = seed;
  j["out"] = out_dir;
  j["eval_stride"] = eval_stride;
  j["residual_tol"] = residual_tol;
  j["alpha_safety"] = alpha_safety;
  j["omega_mode"] = omega_mode;
  return j.dump(2);
}

OmegaEstimator parse_estimator(const std::string& text, Index horizon) {
  if (text == "stationary") return OmegaEstimator::stationary();
  if (text == "linear") return OmegaEstimator::linear_trend(horizon);
  if (text.rfind("structured", 0) == 0) {
    std::istringstream in(text);
    std::string token;
    std::getline(in, token, ':');
    Index head = 20;
    double mult = 100.0;
    if (std::getline(in, token, ':')) head = std::stol(token);
    if (std::getline(in, token, ':')) mult = std::stod(token);
    return OmegaEstimator::structured(head, mult);
  }
  throw std::invalid_argument("unknown estimator rule '" + text + "'");
}

OmegaMode parse_omega_mode(const std::string& text) {
  if (text == "retrospective") return OmegaMode::kRetrospective;
  if (text == "predictive") return OmegaMode::kPredictive;
  if (text == "geometric") return OmegaMode::kPredictiveGeometric;
  throw std::invalid_argument("unknown omega mode '" + text + "'");
}

Fig1Result run_fig1(const ExperimentConfig& config) {
  config.validate();
  const Index n = config.n;
  const SpectrumSpec spec = SpectrumSpec::parse(config.spectrum, n);

  Fig1Result result;
  result.estimators = {"psb", "dfp", "bfgs", "exact_w_identity",
                       "exact_w_truth"};
  result.mean_error = Matrix::Zero(n, 5);
  result.mean_uncertainty = Matrix::Zero(n, 2);

  auto csv = open_csv(config, "fig1.csv", "step,trial,estimator,metric,value");

  const SpdMatrix identity(Matrix::Identity(n, n));
  for (Index trial = 0; trial < config.trials; ++trial) {
    RandomStream mat_stream = RandomStream::derive(config.seed, kExperimentFig1,
                                                   trial, kPurposeMatrix);
    const SpdProblem problem = random_spd(spec, mat_stream);
    RandomStream proj_stream = RandomStream::derive(
        config.seed, kExperimentFig1, trial, kPurposeProjections);
    const Matrix s_full = random_projections(n, n, proj_stream);
    const Matrix y_full = problem.b * s_full;

    const Matrix b0 = Matrix::Identity(n, n);
    const double err0 = (b0 - problem.b).norm();
    const SpdMatrix w_truth(problem.b);

    // Iterated rank-2 rules, applied incrementally.
    struct Iterated {
      DennisRule rule;
      Matrix estimate;
      int column;
    };
    std::vector<Iterated> iterated;
    iterated.push_back({DennisRule::psb(), b0, 0});
    iterated.push_back({DennisRule::dfp(), b0, 1});
    iterated.push_back({DennisRule::bfgs(), b0, 2});

    for (Index m = 1; m <= n; ++m) {
      const Vector s = s_full.col(m - 1);
      const Vector y = y_full.col(m - 1);
      for (auto& it : iterated) {
        const Vector c = named_direction(it.rule, s, y, it.estimate, b0);
        auto next = dennis_update(it.estimate, s, y, c);
        if (next.has_value()) it.estimate = std::move(*next);
        const double err = (it.estimate - problem.b).norm() / err0;
        result.mean_error(m - 1, it.column) += err;
        csv << m << ',' << trial << ',' << result.estimators[it.column]
            << ",norm_error," << format_double(err) << '\n';
      }
      // Exact posteriors with W = I and W = B (ground truth, analysis only).
      const ObservationSet obs(s_full.leftCols(m), y_full.leftCols(m));
      const struct {
        const SpdMatrix* w;
        int column;
      } exact[] = {{&identity, 3}, {&w_truth, 4}};
      for (const auto& e : exact) {
        const MatrixGaussian post = posterior_symmetric(
            MatrixGaussian::prior(b0, *e.w, CovStructure::kSymmetricKronecker),
            obs);
        const double err = (post.mean - problem.b).norm() / err0;
        const double unc = expected_frobenius_error(post.cov_factor) / err0;
        result.mean_error(m - 1, e.column) += err;
        result.mean_uncertainty(m - 1, e.column - 3) += unc;
        csv << m << ',' << trial << ',' << result.estimators[e.column]
            << ",norm_error," << format_double(err) << '\n';
        csv << m << ',' << trial << ',' << result.estimators[e.column]
            << ",expected_error," << format_double(unc) << '\n';
      }
    }
  }
  result.mean_error /= static_cast<double>(config.trials);
  result.mean_uncertainty /= static_cast<double>(config.trials);
  return result;
}

Fig2to5Result run_fig2to5(const ExperimentConfig& config) {
  config.validate();
  const Index n = config.n;
  const OmegaMode mode = parse_omega_mode(config.omega_mode);

  struct SpectrumCase {
    std::string name;
    SpectrumSpec spec;
    OmegaEstimator matched;
  };
  const std::vector<SpectrumCase> cases = {
      {"uniform", SpectrumSpec::uniform(n, 0.0, 10.0),
       OmegaEstimator::stationary()},
      {"exponential", SpectrumSpec::exponential(n, 10.0 / std::log(2.0)),
       OmegaEstimator::linear_trend(n)},
      {"structured",
       SpectrumSpec::structured(n, std::min<Index>(20, n), 0.0, 1e3, 0.0, 10.0),
       OmegaEstimator::structured(std::min<Index>(20, n), 100.0)},
  };

  auto csv_res = open_csv(config, "fig2_residuals.csv",
                          "spectrum,trial,step,residual_norm");
  auto csv_omega =
      open_csv(config, "fig2_omega.csv", "spectrum,trial,step,omega_sq");
  auto csv_elems =
      open_csv(config, "fig3_elements.csv",
               "spectrum,trial,step,element,i,j,prior,abs_error,sd");
  auto csv_norm =
      open_csv(config, "fig4_norm.csv",
               "spectrum,trial,step,prior,true_norm_error,expected_norm_error");
  auto csv_xtest = open_csv(config, "fig5_xtest.csv",
                            "spectrum,trial,step,prior,omega_rule,"
                            "median_abs_error,median_sd,median_ratio");
  auto csv_xelem = open_csv(config, "fig5_elements.csv",
                            "spectrum,trial,step,prior,omega_rule,element,"
                            "abs_error,sd");

  Fig2to5Result result;
  std::vector<double> pooled_bfgs_x, pooled_sn_h;

  for (std::size_t c = 0; c < cases.size(); ++c) {
    const SpectrumCase& sc = cases[c];
    std::vector<double> sn_h, bfgs_h, sn_x, bfgs_x, sn_band, bfgs_band;

    for (Index trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t trial_id = c * 10000 + trial;
      RandomStream mat_stream = RandomStream::derive(
          config.seed, kExperimentFig2to5, trial_id, kPurposeMatrix);
      const SpdProblem problem = random_spd(sc.spec, mat_stream);
      RandomStream rhs_stream = RandomStream::derive(
          config.seed, kExperimentFig2to5, trial_id, kPurposeRhs);
      const Vector rhs = rhs_stream.gaussian_vector(n);
      RandomStream x_stream = RandomStream::derive(
          config.seed, kExperimentFig2to5, trial_id, kPurposeXtest);
      const Vector x_test = std::sqrt(10.0) * x_stream.gaussian_vector(n);
      const Vector b_test = problem.b * x_test;
      RandomStream elem_stream = RandomStream::derive(
          config.seed, kExperimentFig2to5, trial_id, kPurposeElements);
      const auto elements = sample_elements(elem_stream, n, 40);

      CgOptions options;
      options.residual_tol = config.residual_tol;
      auto trace = std::make_shared<CgTrace>(
          cg_solve(LinearOperator::dense(problem.b), rhs, options));
      const Index m_total = trace->steps;

      for (Index i = 0; i <= m_total; ++i) {
        csv_res << sc.name << ',' << trial << ',' << i << ','
                << format_double(trace->residual_norms(i)) << '\n';
      }
      const OmegaSeries series = omega_series(*trace, mode);
      for (Index i = 0; i < series.values.size(); ++i) {
        csv_omega << sc.name << ',' << trial << ',' << i + 1 << ','
                  << format_double(series.values(i)) << '\n';
      }

      for (Index m = 2; m <= m_total; m += config.eval_stride) {
        auto sub = std::make_shared<CgTrace>(trace->head(m));
        const OmegaSeries sub_series = slice_series(series, m - 1);
        if (sub_series.values.size() == 0) continue;
        const double om_matched = estimate_omega_early_safe(sub_series, sc.matched);
        const double om_stationary =
            estimate_omega(sub_series, OmegaEstimator::stationary());
        const double alpha = estimate_alpha(*sub, config.alpha_safety);

        const PosteriorModel sn_model =
            standardized_norm_posterior(sub, alpha, om_matched);
        const PosteriorModel bfgs_model =
            bfgs_cg_posterior(sub, om_matched, 1.0);

        const struct {
          const PosteriorModel* model;
          const char* name;
          std::vector<double>* h_pool;
          std::vector<double>* x_pool;
          std::vector<double>* band_pool;
        } priors[] = {
            {&sn_model, "standardized_norm", &sn_h, &sn_x, &sn_band},
            {&bfgs_model, "bfgs_cg", &bfgs_h, &bfgs_x, &bfgs_band},
        };

        for (const auto& p : priors) {
          // H-element marginals (fig 3).
          int elem_id = 0;
          for (const auto& [ei, ej] : elements) {
            const auto marg = p.model->element_marginal(ei, ej);
            const double err = std::abs(problem.h(ei, ej) - marg.mean);
            const double sd = std::sqrt(std::max(marg.variance, 0.0));
            csv_elems << sc.name << ',' << trial << ',' << m << ','
                      << elem_id++ << ',' << ei << ',' << ej << ',' << p.name
                      << ',' << format_double(err) << ','
                      << format_double(sd) << '\n';
            if (sd > 0.0) {
              p.h_pool->push_back(err / sd);
              p.band_pool->push_back(sd);
              if (p.model == &sn_model) pooled_sn_h.push_back(err / sd);
            }
          }
          // Norm error (fig 4).
          const double est_norm = p.model->expected_frobenius_error();
          const double true_norm = (problem.h - p.model->mean_dense()).norm();
          csv_norm << sc.name << ',' << trial << ',' << m << ',' << p.name
                   << ',' << format_double(true_norm) << ','
                   << format_double(est_norm) << '\n';
          // x_test prediction (fig 5), matched and stationary omega rules.
          const struct {
            double omega;
            const char* rule;
          } rules[] = {{om_matched, "matched"}, {om_stationary, "stationary"}};
          for (const auto& r : rules) {
            const PosteriorModel model_r = p.model->with_omega(r.omega);
            const auto pred = model_r.predict_solution(b_test);
            std::vector<double> errs, sds, ratios;
            errs.reserve(n);
            for (Index i = 0; i < n; ++i) {
              const double err = std::abs(x_test(i) - pred.mean(i));
              const double sd =
                  std::sqrt(std::max(pred.marginal_variances(i), 0.0));
              errs.push_back(err);
              if (sd > 0.0) {
                sds.push_back(sd);
                ratios.push_back(err / sd);
              }
            }
            for (const auto& [ei, ej] : elements) {
              const double sd_e =
                  std::sqrt(std::max(pred.marginal_variances(ei), 0.0));
              csv_xelem << sc.name << ',' << trial << ',' << m << ',' << p.name
                        << ',' << r.rule << ',' << ei << ','
                        << format_double(std::abs(x_test(ei) - pred.mean(ei)))
                        << ',' << format_double(sd_e) << '\n';
            }
            const double med_err = median_of(errs);
            const double med_sd = median_of(sds);
            const double med_ratio = median_of(ratios);
            csv_xtest << sc.name << ',' << trial << ',' << m << ',' << p.name
                      << ',' << r.rule << ',' << format_double(med_err) << ','
                      << format_double(med_sd) << ','
                      << format_double(med_ratio) << '\n';
            if (std::string(r.rule) == "matched") {
              for (const double v : ratios) {
                p.x_pool->push_back(v);
                if (p.model == &bfgs_model) pooled_bfgs_x.push_back(v);
              }
            }
          }
        }
      }
    }
    CalibrationSummary summary;
    summary.spectrum = sc.name;
    summary.sn_element_ratio = median_of(sn_h);
    summary.bfgs_element_ratio = median_of(bfgs_h);
    summary.sn_xtest_ratio = median_of(sn_x);
    summary.bfgs_xtest_ratio = median_of(bfgs_x);
    summary.sn_band_median = median_of(sn_band);
    summary.bfgs_band_median = median_of(bfgs_band);
    result.per_spectrum.push_back(summary);
  }
  result.pooled_bfgs_xtest_ratio = median_of(pooled_bfgs_x);
  result.pooled_sn_element_ratio = median_of(pooled_sn_h);
  return result;
}

SolveReport run_solve(const ExperimentConfig& config,
                      const std::string& matrix_path,
                      const std::string& rhs_path, std::ostream& out) {
  config.validate();
  const Matrix raw = read_matrix_file(matrix_path);
  const SpdMatrix b(raw);  // certification happens here
  const Vector rhs = read_vector_file(rhs_path);
  if (rhs.size() != b.order()) {
    throw std::invalid_argument("run_solve: matrix/rhs dimension mismatch");
  }

  CgOptions options;
  options.residual_tol = config.residual_tol;
  auto trace = std::make_shared<CgTrace>(
      cg_solve(LinearOperator::dense(b.matrix()), rhs, options));

  double omega_sq = 0.0;
  if (trace->steps >= 2) {
    const OmegaSeries series =
        omega_series(*trace, parse_omega_mode(config.omega_mode));
    if (series.values.size() > 0) {
      omega_sq = estimate_omega_early_safe(
          series, parse_estimator(config.estimator, b.order()));
    }
  }
  ModelFile model_file;
  model_file.trace = trace;
  model_file.omega_sq = omega_sq;
  if (config.prior == "bfgs_cg") {
    model_file.prior_kind = PriorKind::kBfgsCg;
    model_file.alpha = 1.0;
  } else {
    model_file.prior_kind = PriorKind::kStandardizedNorm;
    model_file.alpha = trace->steps > 0
                           ? estimate_alpha(*trace, config.alpha_safety)
                           : 0.0;
  }
  const PosteriorModel model = model_file.build();

  SolveReport report;
  report.solution = trace->iterates.col(trace->steps);
  report.residual_norm = trace->residual_norms(trace->steps);
  report.expected_error = model.expected_frobenius_error();
  report.steps = trace->steps;
  report.converged = trace->converged;

  std::filesystem::create_directories(config.out_dir);
  report.model_path =
      (std::filesystem::path(config.out_dir) / "model.txt").string();
  write_model_file(report.model_path, model_file);

  out << "steps " << report.steps << (report.converged ? " (converged)" : "")
      << '\n';
  const auto invariants = check_trace_invariants(*trace);
  if (!invariants.clean()) {
    out << "# warning: trace invariants degraded (orthogonality "
        << format_double(invariants.residual_orthogonality) << ", gram "
        << format_double(invariants.gram_off_diagonal) << ")\n";
  }
  out << "residual_norm " << format_double(report.residual_norm) << '\n';
  out << "expected_frobenius_error " << format_double(report.expected_error)
      << '\n';
  out << "model " << report.model_path << '\n';
  out << "solution\n";
  for (Index i = 0; i < report.solution.size(); ++i) {
    out << format_double(report.solution(i)) << '\n';
  }
  return report;
}

void run_predict(const std::string& model_path, const std::string& b_test_path,
                 std::ostream& out) {
  const ModelFile model_file = read_model_file(model_path);
  const Vector b_test = read_vector_file(b_test_path);
  const PosteriorModel model = model_file.build();
  if (b_test.size() != model.dimension()) {
    throw std::invalid_argument("run_predict: b_test dimension mismatch");
  }
  const auto pred = model.predict_solution(b_test);
  out << "element,mean,sd\n";
  for (Index i = 0; i < b_test.size(); ++i) {
    out << i << ',' << format_double(pred.mean(i)) << ','
        << format_double(std::sqrt(std::max(pred.marginal_variances(i), 0.0)))
        << '\n';
  }
}

}  // namespace linuq
