#pragma once

// Frame sequences, the synthetic scene generator, and the end-to-end
// background-estimation run.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsvt/frame.hpp"
#include "wsvt/matrix_core.hpp"
#include "wsvt/metrics.hpp"
#include "wsvt/solvers.hpp"
#include "wsvt/weight_learning.hpp"

namespace wsvt {

struct FrameSequence {
  std::vector<Frame> frames;
  /// Ground truth aligned with `frames`; 255 marks foreground.
  std::optional<std::vector<Frame>> masks;
  std::string meta;

  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
  /// Throws InvalidArgument on empty input, mixed dimensions or misaligned masks.
  void validate() const;
};

/// Loads every .pgm / .pnm / .png file of `dir` in lexicographic order. Mask
/// files (same count, same dimensions) are binarized: nonzero is foreground,
/// or background when `invert_masks` is set.
FrameSequence load_sequence(const std::filesystem::path& dir,
                            const std::optional<std::filesystem::path>& mask_dir = std::nullopt,
                            bool invert_masks = false);

/// Writes frames as dir/frame_%04d.pgm (8-bit).
void save_frames(const std::filesystem::path& dir, const std::vector<Frame>& frames);

/// Bilinear interpolation with pixel centres at half-integer positions and
/// edge clamping. Masks are resized the same way and re-binarized at 127.5.
Frame resize_frame(const Frame& frame, int width, int height);
FrameSequence resize(const FrameSequence& seq, int width, int height);

/// Column j is frame j vectorized column by column: pixel (x, y) lands in
/// row x * height + y.
Matrix to_matrix(const FrameSequence& seq);
/// Inverse of to_matrix. Values are clamped into [0, 255].
FrameSequence from_matrix(const Matrix& m, int width, int height);

// ---------------------------------------------------------------------------

struct SynthConfig {
  int width = 80;
  int height = 64;
  int n_frames = 120;
  int n_pure_background = 30;
  double object_amplitude = 120.0;
  double noise_sigma = 1.5;
  double illumination_drift = 0.1;
  /// Frames [static_begin, static_end) carry a motionless foreground object.
  int static_begin = 90;
  int static_end = 120;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Rect {
  int x = 0, y = 0, width = 0, height = 0;
  long area() const { return static_cast<long>(width) * height; }
  bool contains(int px, int py) const { return px >= x && px < x + width && py >= y && py < y + height; }
};

/// Moving box geometry of frame j (inside the image). Frames that are pure
/// background do not draw it.
Rect moving_object_rect(const SynthConfig& cfg, int j);
Rect static_object_rect(const SynthConfig& cfg);

struct SyntheticScene {
  FrameSequence sequence;                ///< noisy frames with masks
  std::vector<Frame> clean_background;   ///< noiseless illuminated background per frame
  std::vector<int> pure_indices;         ///< frames without any foreground, ascending
};

/// Deterministic for a given config: equal seeds give bit-identical output.
SyntheticScene generate_synthetic(const SynthConfig& cfg);

// ---------------------------------------------------------------------------

enum class Method { Wsvt, Svt, Pca, RpcaIealm, RpcaApg };

std::string to_string(Method m);
/// Accepts wsvt, svt, pca, rpca-iealm, rpca-apg.
Method parse_method(const std::string& name);

struct RunConfig {
  Method method = Method::Wsvt;
  WsvtParams wsvt;
  /// Threshold of the closed-form SVT baseline; defaults to tau / mu0.
  std::optional<double> svt_tau;
  int pca_rank = 1;
  RpcaParams rpca;

  bool learn_weights = false;
  WeightLearningOptions weights;

  /// Target width x height; nullopt keeps the input size.
  std::optional<std::pair<int, int>> resize = std::pair{80, 64};
  std::vector<double> roc_thresholds = default_roc_thresholds();

  /// Empty path: nothing is written.
  std::filesystem::path output_dir;
  bool write_matrices = true;

  double resolved_svt_tau() const { return svt_tau ? *svt_tau : wsvt.tau / wsvt.mu0; }
  void validate() const;
};

/// Background estimate from any of the supported methods.
struct SolveOutcome {
  Matrix B;
  int iterations = 1;
  bool converged = true;
  std::optional<SolveTrace> wsvt_trace;
  std::vector<RpcaRecord> rpca_trace;
};

/// `W` is used by WSVT only (identity when empty).
SolveOutcome solve_background(const Matrix& X, const RunConfig& cfg, const Matrix& W = {});

struct RunReport {
  Matrix X;
  Matrix B;
  Matrix F;  ///< X - B
  double epsilon1 = 0.0;
  std::optional<LearnedWeights> weights;
  SolveOutcome outcome;
  std::optional<MetricsReport> metrics;
  std::map<std::string, double> timings;  ///< seconds per stage
  std::string manifest;  ///< JSON text written as manifest.json
};

/// Stages: resize, optional weight learning, solve, foreground and masks,
/// metrics when ground truth is present, persistence. Errors carry the stage
/// name in their message.
RunReport run_pipeline(const RunConfig& cfg, const FrameSequence& seq);

// ---------------------------------------------------------------------------

struct BenchRow {
  Method method = Method::Wsvt;
  std::vector<double> seconds;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation; 0 for a single repeat
  int iterations = 0;
};

/// Wall-clock timing of each method on the same data matrix. Weight learning
/// (if enabled) runs once, untimed, before the WSVT repeats.
std::vector<BenchRow> bench(const std::vector<Method>& methods, const Matrix& X, const RunConfig& cfg, int repeats);

std::string bench_json(const std::vector<BenchRow>& rows);

}  // namespace wsvt
