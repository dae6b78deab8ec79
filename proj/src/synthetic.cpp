#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "wsvt/errors.hpp"
#include "wsvt/pipeline.hpp"

namespace wsvt {

namespace {

// Draws are built directly from mt19937_64 output, whose sequence is fixed by
// the standard, rather than from std:: distributions, whose algorithms are
// implementation-defined.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) {
    // Rejection sampling keeps the index unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return static_cast<std::size_t>(v % n);
  }

  double normal() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  bool cached_ = false;
  double spare_ = 0.0;
};

Rect clip(Rect r, int width, int height) {
  r.width = std::min(r.width, width);
  r.height = std::min(r.height, height);
  r.x = std::clamp(r.x, 0, width - r.width);
  r.y = std::clamp(r.y, 0, height - r.height);
  return r;
}

}  // namespace

void SynthConfig::validate() const {
  if (width < 4 || height < 4) throw_invalid("synth: frames must be at least 4x4");
  if (n_frames < 1) throw_invalid("synth: n_frames must be positive");
  if (n_pure_background < 0 || n_pure_background > n_frames)
    throw_invalid("synth: n_pure_background must lie in [0, n_frames]");
  if (!(object_amplitude >= 0.0) || !(noise_sigma >= 0.0) || !(illumination_drift >= 0.0))
    throw_invalid("synth: amplitude, noise and drift must be nonnegative");
  if (illumination_drift >= 1.0) throw_invalid("synth: illumination_drift must be below 1");
  if (static_begin < 0 || static_end < static_begin || static_end > n_frames)
    throw_invalid("synth: static span must satisfy 0 <= begin <= end <= n_frames");
  const int available = n_frames - (static_end - static_begin);
  if (n_pure_background > available)
    throw_invalid("synth: only " + std::to_string(available) + " frames lie outside the static span, cannot make " +
                  std::to_string(n_pure_background) + " pure background frames");
}

Rect moving_object_rect(const SynthConfig& cfg, int j) {
  const double W = cfg.width, H = cfg.height;
  Rect r;
  r.width = std::max(1, static_cast<int>(W / 10) + static_cast<int>(W / 20 * (1.0 + std::sin(j / 7.0))));
  r.height = std::max(1, static_cast<int>(H / 10) + static_cast<int>(H / 20 * (1.0 + std::cos(j / 5.0))));
  const double span = std::max(1.0, W - r.width);
  r.x = static_cast<int>(std::fmod(j * 0.02875 * W, span));
  r.y = static_cast<int>(H / 2 - r.height / 2.0 + H / 6.4 * std::sin(j / 13.0));
  return clip(r, cfg.width, cfg.height);
}

Rect static_object_rect(const SynthConfig& cfg) {
  Rect r;
  r.x = static_cast<int>(0.625 * cfg.width);
  r.y = static_cast<int>(0.125 * cfg.height);
  r.width = std::max(1, static_cast<int>(0.825 * cfg.width) - r.x);
  r.height = std::max(1, static_cast<int>(0.3125 * cfg.height) - r.y);
  return clip(r, cfg.width, cfg.height);
}

SyntheticScene generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SceneRng rng(cfg.seed);
  const int W = cfg.width, H = cfg.height, n = cfg.n_frames;

  double phase[4];
  for (double& p : phase) p = 2.0 * std::numbers::pi * rng.uniform();

  std::vector<int> candidates;
  for (int j = 0; j < n; ++j)
    if (j < cfg.static_begin || j >= cfg.static_end) candidates.push_back(j);
  for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng.below(i)]);
  std::vector<int> pure(candidates.begin(), candidates.begin() + cfg.n_pure_background);
  std::sort(pure.begin(), pure.end());

  std::vector<double> base(static_cast<std::size_t>(W) * static_cast<std::size_t>(H));
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      base[static_cast<std::size_t>(y) * static_cast<std::size_t>(W) + static_cast<std::size_t>(x)] =
          110.0 + 50.0 * std::sin(x / (W / 7.3) + phase[0]) * std::cos(y / (H / 8.0) + phase[1]) +
          20.0 * std::sin((x + y) / (W / 4.7) + phase[2]);

  const Rect fixed = static_object_rect(cfg);
  SyntheticScene scene;
  scene.pure_indices = pure;
  scene.sequence.masks.emplace();
  scene.sequence.meta = "synthetic seed=" + std::to_string(cfg.seed);

  for (int j = 0; j < n; ++j) {
    const double light = 1.0 + cfg.illumination_drift * std::sin(2.0 * std::numbers::pi * j / n + phase[3]);
    const bool is_pure = std::binary_search(pure.begin(), pure.end(), j);
    const bool has_static = j >= cfg.static_begin && j < cfg.static_end;
    const Rect moving = moving_object_rect(cfg, j);

    std::vector<double> clean(base.size()), noisy(base.size()), mask(base.size());
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(W) + static_cast<std::size_t>(x);
        const bool object = (!is_pure && moving.contains(x, y)) || (has_static && fixed.contains(x, y));
        clean[i] = base[i] * light;
        mask[i] = object ? 255.0 : 0.0;
        noisy[i] = clean[i] + (object ? cfg.object_amplitude : 0.0);
      }
    // Noise is drawn in row-major order after the frame is laid out.
    if (cfg.noise_sigma > 0.0)
      for (double& v : noisy) v += cfg.noise_sigma * rng.normal();

    scene.clean_background.emplace_back(W, H, std::move(clean));
    scene.sequence.frames.emplace_back(W, H, std::move(noisy));
    scene.sequence.masks->emplace_back(W, H, std::move(mask));
  }
  return scene;
}

}  // namespace wsvt
