#include "wsvt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"
#include "wsvt/image_io.hpp"

namespace wsvt {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> image_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw_io(dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  if (ec) throw_io(dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

Frame binarize(const Frame& f, bool invert, double cut) {
  std::vector<double> px(f.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const bool on = f.pixels()[i] > cut;
    px[i] = (on != invert) ? 255.0 : 0.0;
  }
  return Frame(f.width(), f.height(), std::move(px));
}

template <class Fn>
auto staged(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + stage + ": " + e.what(), e.iteration());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Frame> abs_frames(const Matrix& F, int w, int h, std::optional<double> floor) {
  Matrix a = F.cwiseAbs();
  if (floor) a = (a.array() >= *floor).select(a, 0.0);
  return from_matrix(a, w, h).frames;
}

nlohmann::json optional_number(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

nlohmann::json config_json(const RunConfig& cfg, const FrameSequence& seq, int w, int h) {
  nlohmann::json c;
  c["method"] = to_string(cfg.method);
  c["wsvt"] = {{"tau", cfg.wsvt.tau},           {"mu0", cfg.wsvt.mu0},           {"rho", cfg.wsvt.rho},
               {"epsilon", cfg.wsvt.epsilon},   {"max_iter", cfg.wsvt.max_iter}, {"mu_max", cfg.wsvt.mu_max}};
  c["svt_tau"] = cfg.resolved_svt_tau();
  c["pca_rank"] = cfg.pca_rank;
  c["rpca"] = {{"lambda", optional_number(cfg.rpca.lambda)},
               {"mu", cfg.rpca.mu},
               {"rho", cfg.rpca.rho},
               {"epsilon", cfg.rpca.epsilon},
               {"max_iter", cfg.rpca.max_iter}};
  c["learn_weights"] = cfg.learn_weights;
  c["lambda_tilde"] = cfg.weights.lambda_tilde;
  c["eps1_bins"] = cfg.weights.eps1_bins;
  c["eps1_override"] = optional_number(cfg.weights.eps1_override);
  if (cfg.resize)
    c["resize"] = {cfg.resize->first, cfg.resize->second};
  else
    c["resize"] = nullptr;
  c["roc_thresholds"] = cfg.roc_thresholds;
  c["write_matrices"] = cfg.write_matrices;
  c["input"] = {{"frames", seq.frames.size()},
                {"width", seq.width()},
                {"height", seq.height()},
                {"masks", seq.masks.has_value()},
                {"meta", seq.meta}};
  c["frame_width"] = w;
  c["frame_height"] = h;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------

void FrameSequence::validate() const {
  if (frames.empty()) throw_invalid("sequence has no frames");
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].width() != width() || frames[i].height() != height())
      throw_invalid("frame " + std::to_string(i) + " is " + std::to_string(frames[i].width()) + "x" +
                    std::to_string(frames[i].height()) + ", expected " + std::to_string(width()) + "x" +
                    std::to_string(height()));
  if (masks) {
    if (masks->size() != frames.size())
      throw_invalid(std::to_string(masks->size()) + " masks for " + std::to_string(frames.size()) + " frames");
    for (std::size_t i = 0; i < masks->size(); ++i)
      if ((*masks)[i].width() != width() || (*masks)[i].height() != height())
        throw_invalid("mask " + std::to_string(i) + " dimensions differ from the frames");
  }
}

FrameSequence load_sequence(const fs::path& dir, const std::optional<fs::path>& mask_dir, bool invert_masks) {
  FrameSequence seq;
  const auto files = image_files(dir);
  if (files.empty()) throw_io(dir.string() + ": no .pgm/.pnm/.png frames found");
  for (const auto& f : files) seq.frames.push_back(read_image(f));
  seq.meta = dir.string();

  if (mask_dir) {
    const auto mfiles = image_files(*mask_dir);
    if (mfiles.size() != files.size())
      throw_io(mask_dir->string() + ": " + std::to_string(mfiles.size()) + " masks for " +
               std::to_string(files.size()) + " frames");
    seq.masks.emplace();
    for (const auto& f : mfiles) seq.masks->push_back(binarize(read_image(f), invert_masks, 0.0));
  }
  try {
    seq.validate();
  } catch (const Error& e) {
    throw_io(dir.string() + ": " + e.what());
  }
  return seq;
}

void save_frames(const fs::path& dir, const std::vector<Frame>& frames) {
  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%04zu.pgm", i);
    write_pgm(dir / name, frames[i]);
  }
}

Frame resize_frame(const Frame& frame, int width, int height) {
  if (width < 1 || height < 1) throw_invalid("resize: target must be at least 1x1");
  if (width == frame.width() && height == frame.height()) return frame;

  const int sw = frame.width(), sh = frame.height();
  const double sx = static_cast<double>(sw) / width, sy = static_cast<double>(sh) / height;
  std::vector<double> px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(sh - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(sw - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const double tx = fx - x0;
      const double top = frame(x0, y0) * (1.0 - tx) + frame(x1, y0) * tx;
      const double bottom = frame(x0, y1) * (1.0 - tx) + frame(x1, y1) * tx;
      px[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] =
          top * (1.0 - ty) + bottom * ty;
    }
  }
  return Frame(width, height, std::move(px));
}

FrameSequence resize(const FrameSequence& seq, int width, int height) {
  FrameSequence out;
  out.meta = seq.meta;
  for (const auto& f : seq.frames) out.frames.push_back(resize_frame(f, width, height));
  if (seq.masks) {
    out.masks.emplace();
    for (const auto& m : *seq.masks) {
      const Frame r = resize_frame(m, width, height);
      out.masks->push_back(binarize(r, false, 127.5 - 1e-9));
    }
  }
  return out;
}

Matrix to_matrix(const FrameSequence& seq) {
  seq.validate();
  const int w = seq.width(), h = seq.height();
  Matrix m(static_cast<Eigen::Index>(w) * h, static_cast<Eigen::Index>(seq.frames.size()));
  for (std::size_t j = 0; j < seq.frames.size(); ++j) {
    const Frame& f = seq.frames[j];
    for (int x = 0; x < w; ++x)
      for (int y = 0; y < h; ++y)
        m(static_cast<Eigen::Index>(x) * h + y, static_cast<Eigen::Index>(j)) = f(x, y);
  }
  return m;
}

FrameSequence from_matrix(const Matrix& m, int width, int height) {
  if (width < 1 || height < 1) throw_invalid("from_matrix: dimensions must be positive");
  if (m.rows() != static_cast<Eigen::Index>(width) * height)
    throw_invalid("from_matrix: " + std::to_string(m.rows()) + " rows do not match " + std::to_string(width) + "x" +
                  std::to_string(height) + " frames");
  FrameSequence seq;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    std::vector<double> px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (int x = 0; x < width; ++x)
      for (int y = 0; y < height; ++y)
        px[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] =
            m(static_cast<Eigen::Index>(x) * height + y, j);
    seq.frames.emplace_back(width, height, std::move(px));
  }
  return seq;
}

// ---------------------------------------------------------------------------

std::string to_string(Method m) {
  switch (m) {
    case Method::Wsvt: return "wsvt";
    case Method::Svt: return "svt";
    case Method::Pca: return "pca";
    case Method::RpcaIealm: return "rpca-iealm";
    case Method::RpcaApg: return "rpca-apg";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::Wsvt, Method::Svt, Method::Pca, Method::RpcaIealm, Method::RpcaApg})
    if (to_string(m) == name) return m;
  throw_invalid("unknown method '" + name + "' (expected wsvt, svt, pca, rpca-iealm or rpca-apg)");
}

void RunConfig::validate() const {
  wsvt.validate();
  rpca.validate();
  if (svt_tau && !(*svt_tau > 0.0)) throw_invalid("svt_tau must be positive");
  if (pca_rank < 0) throw_invalid("pca_rank must be nonnegative");
  if (!(weights.lambda_tilde >= 1.0)) throw_invalid("lambda_tilde must be >= 1");
  if (weights.eps1_bins < 2) throw_invalid("eps1_bins must be at least 2");
  if (weights.eps1_override && !(*weights.eps1_override > 0.0)) throw_invalid("eps1 override must be positive");
  if (resize && (resize->first < 1 || resize->second < 1)) throw_invalid("resize target must be at least 1x1");
  if (roc_thresholds.empty() || !std::is_sorted(roc_thresholds.begin(), roc_thresholds.end()))
    throw_invalid("ROC thresholds must be a nonempty ascending list");
}

SolveOutcome solve_background(const Matrix& X, const RunConfig& cfg, const Matrix& W) {
  SolveOutcome out;
  switch (cfg.method) {
    case Method::Wsvt: {
      const Matrix weight = W.size() == 0 ? Matrix(Matrix::Identity(X.cols(), X.cols())) : W;
      WsvtSolution sol = wsvt_solve(X, weight, cfg.wsvt);
      out.iterations = sol.iterations();
      out.converged = sol.converged;
      out.B = std::move(sol.B);
      out.wsvt_trace = std::move(sol.trace);
      break;
    }
    case Method::Svt:
      out.B = svt_solve(X, cfg.resolved_svt_tau());
      break;
    case Method::Pca:
      out.B = pca_solve(X, cfg.pca_rank);
      break;
    case Method::RpcaIealm:
    case Method::RpcaApg: {
      RpcaSolution sol = cfg.method == Method::RpcaIealm ? rpca_iealm(X, cfg.rpca) : rpca_apg(X, cfg.rpca);
      out.iterations = static_cast<int>(sol.trace.size());
      out.converged = sol.converged;
      out.B = std::move(sol.lowrank);
      out.rpca_trace = std::move(sol.trace);
      break;
    }
  }
  return out;
}

RunReport run_pipeline(const RunConfig& cfg, const FrameSequence& input) {
  staged("config", [&] {
    cfg.validate();
    input.validate();
    return 0;
  });
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  RunReport report;

  auto t0 = clock::now();
  const FrameSequence seq = cfg.resize ? resize(input, cfg.resize->first, cfg.resize->second) : input;
  const int w = seq.width(), h = seq.height();
  report.X = to_matrix(seq);
  report.timings["prepare"] = seconds_since(t0);

  Matrix W;
  t0 = clock::now();
  if (cfg.learn_weights) {
    report.weights = staged("weights", [&] { return learn_weights(report.X, cfg.wsvt, cfg.weights); });
    report.epsilon1 = report.weights->epsilon1;
    W = report.weights->weight_matrix();
  } else if (cfg.weights.eps1_override) {
    report.epsilon1 = *cfg.weights.eps1_override;
  } else {
    report.epsilon1 = staged("epsilon1", [&] {
      return epsilon1_from_histogram(coarse_estimate(report.X, cfg.wsvt).F_in, cfg.weights.eps1_bins);
    });
  }
  report.timings["weights"] = seconds_since(t0);

  t0 = clock::now();
  report.outcome = staged("solve", [&] { return solve_background(report.X, cfg, W); });
  report.B = report.outcome.B;
  report.F = report.X - report.B;
  report.timings["solve"] = seconds_since(t0);

  t0 = clock::now();
  const std::vector<Frame> scores = abs_frames(report.F, w, h, std::nullopt);
  const std::vector<Frame> thresholded = abs_frames(report.F, w, h, report.epsilon1);
  if (seq.masks)
    report.metrics = staged("metrics", [&] { return evaluate(thresholded, scores, *seq.masks, cfg.roc_thresholds); });
  report.timings["metrics"] = seconds_since(t0);

  nlohmann::json manifest;
  manifest["config"] = config_json(cfg, input, w, h);
  manifest["epsilon1"] = report.epsilon1;
  manifest["epsilon2"] = report.weights ? nlohmann::json(report.weights->epsilon2) : nlohmann::json(nullptr);
  manifest["indices"] = report.weights ? report.weights->spec.indices : std::vector<Eigen::Index>{};
  manifest["weight_fallback"] = report.weights && report.weights->identity_fallback;
  manifest["iterations"] = report.outcome.iterations;
  manifest["converged"] = report.outcome.converged;
  if (report.metrics) manifest["auc"] = report.metrics->auc;

  if (!cfg.output_dir.empty()) {
    t0 = clock::now();
    staged("write", [&] {
      const fs::path& out = cfg.output_dir;
      save_frames(out / "background", from_matrix(report.B, w, h).frames);
      save_frames(out / "foreground", scores);
      std::vector<Frame> masks;
      for (const auto& f : scores) masks.push_back(foreground_mask(f, report.epsilon1));
      save_frames(out / "masks", masks);
      if (cfg.write_matrices) {
        write_matrix_csv(out / "B.csv", report.B);
        write_matrix_csv(out / "F.csv", report.F);
      }
      if (report.outcome.wsvt_trace)
        write_trace_csv(out / "trace.csv", *report.outcome.wsvt_trace);
      else if (!report.outcome.rpca_trace.empty())
        write_rpca_trace_csv(out / "trace.csv", report.outcome.rpca_trace);
      else
        write_trace_csv(out / "trace.csv", SolveTrace{});
      if (report.weights) write_file_atomic(out / "weights.json", weights_json(*report.weights));
      if (report.metrics) {
        write_file_atomic(out / "metrics.json", metrics_json(*report.metrics));
        write_roc_csv(out / "roc.csv", report.metrics->roc);
      }
      return 0;
    });
    report.timings["write"] = seconds_since(t0);
  }
  report.timings["total"] = seconds_since(t_start);
  manifest["timings"] = report.timings;
  report.manifest = manifest.dump(2) + "\n";
  if (!cfg.output_dir.empty())
    staged("write", [&] {
      write_file_atomic(cfg.output_dir / "manifest.json", report.manifest);
      return 0;
    });
  return report;
}

}  // namespace wsvt
