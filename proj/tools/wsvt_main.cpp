// Command-line front end: solve, weights, synth, pipeline, metrics, bench.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"
#include "wsvt/image_io.hpp"
#include "wsvt/metrics.hpp"
#include "wsvt/pipeline.hpp"
#include "wsvt/solvers.hpp"
#include "wsvt/weight_learning.hpp"

namespace fs = std::filesystem;
using namespace wsvt;

namespace {

// WSVT flags shared by several subcommands. A preset supplies the starting
// values; flags given explicitly on the command line take precedence.
struct WsvtFlags {
  std::string preset = "background";
  double tau = 4500.0;
  double mu0 = 5.0;
  double rho = 1.1;
  double epsilon = 1e-7;
  int max_iter = 30;
  CLI::Option* tau_opt = nullptr;
  CLI::Option* mu0_opt = nullptr;
  CLI::Option* rho_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--preset", preset, "Parameter bundle: background (tau 4500, mu0 5, rho 1.1) or shadow (tau 500, mu0 15, rho 3, W = I)")
        ->check(CLI::IsMember({"background", "shadow"}));
    tau_opt = app->add_option("--tau", tau, "Nuclear-norm weight tau")->check(CLI::PositiveNumber);
    mu0_opt = app->add_option("--mu0", mu0, "Initial penalty mu0")->check(CLI::PositiveNumber);
    rho_opt = app->add_option("--rho", rho, "Penalty growth factor rho (> 1)");
    app->add_option("--epsilon", epsilon, "Stopping tolerance on |L_k - L_(k-1)|; 0 disables")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--max-iter", max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  }

  bool shadow() const { return preset == "shadow"; }

  WsvtParams resolve() const {
    WsvtParams p;
    if (shadow()) {
      p.tau = 500.0;
      p.mu0 = 15.0;
      p.rho = 3.0;
    }
    if (tau_opt->count() > 0) p.tau = tau;
    if (mu0_opt->count() > 0) p.mu0 = mu0;
    if (rho_opt->count() > 0) p.rho = rho;
    p.epsilon = epsilon;
    p.max_iter = max_iter;
    p.validate();
    return p;
  }
};

struct RpcaFlags {
  std::optional<double> lambda;
  double mu = 1.5;
  double rho = 1.25;
  int max_iter = 1000;

  void add(CLI::App* app) {
    app->add_option("--lambda", lambda, "RPCA sparsity weight (default 1/sqrt(max(m,n)))")->check(CLI::PositiveNumber);
    app->add_option("--rpca-mu", mu, "RPCA initial penalty coefficient, scaled by 1/||X||_2")
        ->check(CLI::PositiveNumber);
    app->add_option("--rpca-rho", rho, "RPCA penalty growth factor");
    app->add_option("--rpca-max-iter", max_iter, "RPCA iteration cap")->check(CLI::PositiveNumber);
  }

  RpcaParams resolve(double epsilon) const {
    RpcaParams p;
    p.lambda = lambda;
    p.mu = mu;
    p.rho = rho;
    p.epsilon = epsilon;
    p.max_iter = max_iter;
    p.validate();
    return p;
  }
};

struct SynthFlags {
  SynthConfig cfg;
  CLI::Option* seed_opt = nullptr;

  void add(CLI::App* app, bool with_frames = true) {
    seed_opt = app->add_option("--seed", cfg.seed, "RNG seed (WSVT_SEED applies when this flag is absent)");
    app->add_option("--width", cfg.width, "Frame width");
    app->add_option("--height", cfg.height, "Frame height");
    if (with_frames) app->add_option("--frames", cfg.n_frames, "Number of frames");
    app->add_option("--pure", cfg.n_pure_background, "Number of pure-background frames");
    app->add_option("--amplitude", cfg.object_amplitude, "Foreground object intensity offset");
    app->add_option("--noise", cfg.noise_sigma, "Gaussian noise standard deviation");
    app->add_option("--drift", cfg.illumination_drift, "Relative illumination drift");
    app->add_option("--static-begin", cfg.static_begin, "First frame with the static object");
    app->add_option("--static-end", cfg.static_end, "One past the last frame with the static object");
  }

  SynthConfig resolve() const {
    SynthConfig c = cfg;
    if (seed_opt->count() == 0) {
      if (const char* env = std::getenv("WSVT_SEED")) {
        try {
          std::size_t used = 0;
          c.seed = std::stoull(env, &used);
          if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
          throw_invalid(std::string("WSVT_SEED is not an unsigned integer: '") + env + "'");
        }
      }
    }
    c.validate();
    return c;
  }
};

std::optional<std::pair<int, int>> parse_size(const std::string& text) {
  if (text == "none") return std::nullopt;
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t a = 0, b = 0;
    const int w = std::stoi(text.substr(0, x), &a);
    const int h = std::stoi(text.substr(x + 1), &b);
    if (a != x || b != text.size() - x - 1 || w < 1 || h < 1) throw std::invalid_argument(text);
    return std::pair{w, h};
  } catch (const std::exception&) {
    throw_invalid("--resize expects WIDTHxHEIGHT or 'none', got '" + text + "'");
  }
}

void write_synthetic(const fs::path& out, const SynthConfig& cfg, const SyntheticScene& scene) {
  save_frames(out / "frames", scene.sequence.frames);
  save_frames(out / "masks", *scene.sequence.masks);
  save_frames(out / "background", scene.clean_background);
  nlohmann::json j;
  j["config"] = {{"width", cfg.width},
                 {"height", cfg.height},
                 {"n_frames", cfg.n_frames},
                 {"n_pure_background", cfg.n_pure_background},
                 {"object_amplitude", cfg.object_amplitude},
                 {"noise_sigma", cfg.noise_sigma},
                 {"illumination_drift", cfg.illumination_drift},
                 {"static_begin", cfg.static_begin},
                 {"static_end", cfg.static_end},
                 {"seed", cfg.seed}};
  j["pure_indices"] = scene.pure_indices;
  write_file_atomic(out / "synth.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Weighted singular value thresholding for low-rank background estimation"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  // solve ------------------------------------------------------------------
  auto* solve = app.add_subcommand("solve", "Run one solver on a CSV matrix");
  std::string solve_method = "wsvt";
  std::string solve_input, solve_output, solve_weights, solve_trace, solve_sparse;
  int solve_rank = 1;
  bool solve_audit = false;
  WsvtFlags solve_wsvt;
  RpcaFlags solve_rpca;
  solve->add_option("--method", solve_method, "wsvt | svt | pca | rpca-iealm | rpca-apg")
      ->check(CLI::IsMember({"wsvt", "svt", "pca", "rpca-iealm", "rpca-apg"}));
  solve->add_option("--input", solve_input, "Data matrix X (CSV)")->required();
  solve->add_option("--output", solve_output, "Low-rank result B (CSV)")->required();
  solve->add_option("--weights", solve_weights, "Weight matrix W (CSV, n x n); identity when omitted");
  solve->add_option("--trace", solve_trace, "Per-iteration trace (CSV)");
  solve->add_option("--sparse-output", solve_sparse, "Sparse component for RPCA methods (CSV)");
  solve->add_option("--rank", solve_rank, "Rank kept by pca")->check(CLI::NonNegativeNumber);
  solve->add_flag("--audit", solve_audit, "Recompute trace quantities with independent SVDs");
  solve_wsvt.add(solve);
  solve_rpca.add(solve);
  solve->footer("For svt, --tau is the singular value threshold itself.");

  // weights ----------------------------------------------------------------
  auto* weights = app.add_subcommand("weights", "Learn the diagonal weight matrix from data");
  std::string weights_input, weights_frames, weights_output, weights_matrix_out, weights_resize = "80x64";
  double lambda_tilde = 5.0;
  int eps1_bins = 10;
  WsvtFlags weights_wsvt;
  auto* wi = weights->add_option("--input", weights_input, "Data matrix X (CSV)");
  auto* wf = weights->add_option("--frames", weights_frames, "Directory of frames instead of a CSV matrix");
  wi->excludes(wf);
  weights->add_option("--resize", weights_resize, "Resize frames to WIDTHxHEIGHT, or 'none'");
  weights->add_option("--lambda-tilde", lambda_tilde, "Weight given to background frames")->check(CLI::Range(1.0, 1e12));
  weights->add_option("--eps1-bins", eps1_bins, "Histogram bins for epsilon1")->check(CLI::Range(2, 1 << 20));
  weights->add_option("--output", weights_output, "JSON report; stdout when omitted");
  weights->add_option("--weight-matrix", weights_matrix_out, "Also write W (CSV)");
  weights_wsvt.add(weights);

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  std::string synth_output;
  SynthFlags synth_flags;
  synth->add_option("--output", synth_output, "Output directory (frames/, masks/, background/, synth.json)")
      ->required();
  synth_flags.add(synth);

  // pipeline ---------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "End-to-end background estimation");
  std::string pipe_input, pipe_masks, pipe_output, pipe_method = "wsvt", pipe_resize = "80x64";
  bool pipe_synth = false, pipe_invert = false, pipe_learn = false, pipe_no_matrices = false;
  double pipe_lambda_tilde = 5.0;
  std::optional<double> pipe_eps1, pipe_svt_tau;
  int pipe_bins = 10, pipe_rank = 1;
  WsvtFlags pipe_wsvt;
  RpcaFlags pipe_rpca;
  SynthFlags pipe_synth_flags;
  auto* pi = pipe->add_option("--input", pipe_input, "Directory of frames (PGM or PNG)");
  auto* ps = pipe->add_flag("--synthetic", pipe_synth, "Use the synthetic generator instead of --input");
  pi->excludes(ps);
  pipe->add_option("--masks", pipe_masks, "Directory of ground-truth masks")->needs(pi);
  pipe->add_flag("--invert-masks", pipe_invert, "Treat zero mask pixels as foreground");
  pipe->add_option("--method", pipe_method, "wsvt | svt | pca | rpca-iealm | rpca-apg")
      ->check(CLI::IsMember({"wsvt", "svt", "pca", "rpca-iealm", "rpca-apg"}));
  pipe->add_flag("--learn-weights", pipe_learn, "Learn W from a coarse estimate");
  pipe->add_option("--lambda-tilde", pipe_lambda_tilde, "Weight given to background frames")
      ->check(CLI::Range(1.0, 1e12));
  pipe->add_option("--eps1", pipe_eps1, "Foreground threshold; learned from the data when omitted")
      ->check(CLI::PositiveNumber);
  pipe->add_option("--eps1-bins", pipe_bins, "Histogram bins for epsilon1")->check(CLI::Range(2, 1 << 20));
  pipe->add_option("--svt-tau", pipe_svt_tau, "Threshold of the svt method (default tau / mu0)")
      ->check(CLI::PositiveNumber);
  pipe->add_option("--rank", pipe_rank, "Rank kept by pca")->check(CLI::NonNegativeNumber);
  pipe->add_option("--resize", pipe_resize, "Resize frames to WIDTHxHEIGHT, or 'none'");
  pipe->add_option("--output", pipe_output, "Output directory")->required();
  pipe->add_flag("--no-matrices", pipe_no_matrices, "Skip B.csv and F.csv");
  pipe_wsvt.add(pipe);
  pipe_rpca.add(pipe);
  pipe_synth_flags.add(pipe);

  // metrics ----------------------------------------------------------------
  auto* met = app.add_subcommand("metrics", "Score foreground frames against ground-truth masks");
  std::string met_estimate, met_truth, met_output, met_roc;
  double met_eps1 = 0.0;
  bool met_invert = false;
  met->add_option("--estimate", met_estimate, "Directory of foreground frames")->required();
  met->add_option("--truth", met_truth, "Directory of ground-truth masks")->required();
  met->add_option("--eps1", met_eps1, "Zero estimate pixels below this value before PSNR/SSIM")
      ->check(CLI::NonNegativeNumber);
  met->add_flag("--invert-masks", met_invert, "Treat zero mask pixels as foreground");
  met->add_option("--output", met_output, "JSON report; stdout when omitted");
  met->add_option("--roc-csv", met_roc, "ROC curve (CSV)");

  // bench ------------------------------------------------------------------
  auto* ben = app.add_subcommand("bench", "Time several methods on the same data");
  std::string ben_input, ben_output, ben_resize = "80x64";
  std::vector<std::string> ben_methods{"wsvt", "rpca-iealm"};
  int ben_repeats = 3;
  bool ben_learn = false;
  double ben_lambda_tilde = 5.0;
  std::optional<double> ben_svt_tau;
  WsvtFlags ben_wsvt;
  RpcaFlags ben_rpca;
  SynthFlags ben_synth;
  ben->add_option("--input", ben_input, "Directory of frames; synthetic data when omitted");
  ben->add_option("--methods", ben_methods, "Methods to time")
      ->check(CLI::IsMember({"wsvt", "svt", "pca", "rpca-iealm", "rpca-apg"}))
      ->delimiter(',');
  ben->add_option("--repeats", ben_repeats, "Timed runs per method")->check(CLI::PositiveNumber);
  ben->add_flag("--learn-weights", ben_learn, "Time WSVT with a learned W");
  ben->add_option("--lambda-tilde", ben_lambda_tilde, "Weight given to background frames")
      ->check(CLI::Range(1.0, 1e12));
  ben->add_option("--svt-tau", ben_svt_tau, "Threshold of the svt method (default tau / mu0)")
      ->check(CLI::PositiveNumber);
  ben->add_option("--resize", ben_resize, "Resize frames to WIDTHxHEIGHT, or 'none'");
  ben->add_option("--output", ben_output, "JSON timing table");
  ben_wsvt.add(ben);
  ben_rpca.add(ben);
  ben_synth.cfg.n_frames = 600;
  ben_synth.add(ben);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error:usage: " << e.what() << "\n";
    return 2;
  }

  if (solve->parsed()) {
    const Method method = parse_method(solve_method);
    const WsvtParams params = solve_wsvt.resolve();
    const Matrix X = read_matrix_csv(solve_input);
    nlohmann::json summary{{"method", solve_method}};
    switch (method) {
      case Method::Wsvt: {
        WsvtParams p = params;
        p.audit = solve_audit;
        const Matrix W = solve_weights.empty() || solve_wsvt.shadow() ? Matrix(Matrix::Identity(X.cols(), X.cols()))
                                                                       : read_matrix_csv(solve_weights);
        const WsvtSolution sol = wsvt_solve(X, W, p);
        write_matrix_csv(solve_output, sol.B);
        if (!solve_trace.empty()) write_trace_csv(solve_trace, sol.trace);
        summary["iterations"] = sol.iterations();
        summary["converged"] = sol.converged;
        break;
      }
      case Method::Svt:
        write_matrix_csv(solve_output, svt_solve(X, params.tau));
        break;
      case Method::Pca:
        write_matrix_csv(solve_output, pca_solve(X, solve_rank));
        break;
      case Method::RpcaIealm:
      case Method::RpcaApg: {
        const RpcaParams rp = solve_rpca.resolve(params.epsilon > 0 ? params.epsilon : 1e-7);
        const RpcaSolution sol = method == Method::RpcaIealm ? rpca_iealm(X, rp) : rpca_apg(X, rp);
        write_matrix_csv(solve_output, sol.lowrank);
        if (!solve_sparse.empty()) write_matrix_csv(solve_sparse, sol.sparse);
        if (!solve_trace.empty()) write_rpca_trace_csv(solve_trace, sol.trace);
        summary["iterations"] = sol.trace.size();
        summary["converged"] = sol.converged;
        break;
      }
    }
    std::cout << summary.dump() << "\n";
    return 0;
  }

  if (weights->parsed()) {
    if (weights_input.empty() && weights_frames.empty()) throw_invalid("weights: give --input or --frames");
    Matrix X;
    if (!weights_input.empty()) {
      X = read_matrix_csv(weights_input);
    } else {
      FrameSequence seq = load_sequence(weights_frames);
      if (const auto size = parse_size(weights_resize)) seq = resize(seq, size->first, size->second);
      X = to_matrix(seq);
    }
    WeightLearningOptions opts;
    opts.lambda_tilde = lambda_tilde;
    opts.eps1_bins = eps1_bins;
    const LearnedWeights learned = learn_weights(X, weights_wsvt.resolve(), opts);
    if (learned.identity_fallback) std::cerr << "warning: " << learned.warning << "\n";
    const std::string json = weights_json(learned);
    if (weights_output.empty())
      std::cout << json;
    else
      write_file_atomic(weights_output, json);
    if (!weights_matrix_out.empty()) write_matrix_csv(weights_matrix_out, learned.weight_matrix());
    return 0;
  }

  if (synth->parsed()) {
    const SynthConfig cfg = synth_flags.resolve();
    write_synthetic(synth_output, cfg, generate_synthetic(cfg));
    return 0;
  }

  if (pipe->parsed()) {
    if (pipe_input.empty() && !pipe_synth) throw_invalid("pipeline: give --input or --synthetic");
    RunConfig cfg;
    cfg.method = parse_method(pipe_method);
    cfg.wsvt = pipe_wsvt.resolve();
    cfg.svt_tau = pipe_svt_tau;
    cfg.pca_rank = pipe_rank;
    cfg.rpca = pipe_rpca.resolve(cfg.wsvt.epsilon > 0 ? cfg.wsvt.epsilon : 1e-7);
    cfg.learn_weights = pipe_learn && !pipe_wsvt.shadow();
    cfg.weights.lambda_tilde = pipe_lambda_tilde;
    cfg.weights.eps1_bins = pipe_bins;
    cfg.weights.eps1_override = pipe_eps1;
    cfg.resize = parse_size(pipe_resize);
    cfg.output_dir = pipe_output;
    cfg.write_matrices = !pipe_no_matrices;
    const FrameSequence seq =
        pipe_synth ? generate_synthetic(pipe_synth_flags.resolve()).sequence
                   : load_sequence(pipe_input, pipe_masks.empty() ? std::nullopt : std::optional<fs::path>(pipe_masks),
                                   pipe_invert);
    const RunReport report = run_pipeline(cfg, seq);
    if (report.weights && report.weights->identity_fallback) std::cerr << "warning: " << report.weights->warning << "\n";
    std::cout << nlohmann::json{{"output", pipe_output},
                                {"iterations", report.outcome.iterations},
                                {"converged", report.outcome.converged},
                                {"epsilon1", report.epsilon1}}
                     .dump()
              << "\n";
    return 0;
  }

  if (met->parsed()) {
    const FrameSequence est = load_sequence(met_estimate);
    const FrameSequence truth = load_sequence(met_truth);
    if (est.frames.size() != truth.frames.size())
      throw_invalid("metrics: " + std::to_string(est.frames.size()) + " estimates for " +
                    std::to_string(truth.frames.size()) + " masks");
    std::vector<Frame> masks, thresholded;
    for (const auto& m : truth.frames) {
      std::vector<double> px(m.size());
      for (std::size_t i = 0; i < px.size(); ++i) px[i] = ((m.pixels()[i] != 0.0) != met_invert) ? 255.0 : 0.0;
      masks.emplace_back(m.width(), m.height(), std::move(px));
    }
    for (const auto& f : est.frames) {
      std::vector<double> px = f.pixels();
      for (double& p : px)
        if (p < met_eps1) p = 0.0;
      thresholded.emplace_back(f.width(), f.height(), std::move(px));
    }
    const MetricsReport report = evaluate(thresholded, est.frames, masks, default_roc_thresholds());
    const std::string json = metrics_json(report);
    if (met_output.empty())
      std::cout << json;
    else
      write_file_atomic(met_output, json);
    if (!met_roc.empty()) write_roc_csv(met_roc, report.roc);
    return 0;
  }

  if (ben->parsed()) {
    RunConfig cfg;
    cfg.wsvt = ben_wsvt.resolve();
    cfg.svt_tau = ben_svt_tau;
    cfg.rpca = ben_rpca.resolve(cfg.wsvt.epsilon > 0 ? cfg.wsvt.epsilon : 1e-7);
    cfg.learn_weights = ben_learn && !ben_wsvt.shadow();
    cfg.weights.lambda_tilde = ben_lambda_tilde;
    Matrix X;
    if (ben_input.empty()) {
      X = to_matrix(generate_synthetic(ben_synth.resolve()).sequence);
    } else {
      FrameSequence seq = load_sequence(ben_input);
      if (const auto size = parse_size(ben_resize)) seq = resize(seq, size->first, size->second);
      X = to_matrix(seq);
    }
    std::vector<Method> methods;
    for (const auto& m : ben_methods) methods.push_back(parse_method(m));
    const auto rows = bench(methods, X, cfg, ben_repeats);
    std::printf("%-12s %8s %12s %12s %6s\n", "method", "repeats", "mean_s", "stddev_s", "iters");
    for (const auto& r : rows)
      std::printf("%-12s %8d %12.4f %12.4f %6d\n", to_string(r.method).c_str(), ben_repeats, r.mean, r.stddev,
                  r.iterations);
    if (!ben_output.empty()) write_file_atomic(ben_output, bench_json(rows));
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error:" << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error:io: " << e.what() << "\n";
    return exit_code(ErrorKind::Io);
  } catch (const std::exception& e) {
    std::cerr << "error:internal: " << e.what() << "\n";
    return 1;
  }
}
