#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "test_support.hpp"
#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"
#include "wsvt/image_io.hpp"
#include "wsvt/pipeline.hpp"

using namespace wsvt;
namespace fs = std::filesystem;

namespace {

FrameSequence random_sequence(std::mt19937_64& rng, int w, int h, int n) {
  std::uniform_int_distribution<int> u(0, 255);
  FrameSequence s;
  for (int k = 0; k < n; ++k) {
    std::vector<double> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (double& v : px) v = u(rng);
    s.frames.emplace_back(w, h, std::move(px));
  }
  return s;
}

SynthConfig small_scene(std::uint64_t seed = 0) {
  SynthConfig c;
  c.width = 24;
  c.height = 20;
  c.n_frames = 30;
  c.n_pure_background = 8;
  c.static_begin = 22;
  c.static_end = 30;
  c.seed = seed;
  return c;
}

SynthConfig noiseless_scene() {
  SynthConfig c = small_scene();
  c.noise_sigma = 0;
  c.object_amplitude = 0;
  c.illumination_drift = 0;
  return c;
}

double second_ratio(const Matrix& B) {
  const Vector s = svd(B).sigma;
  return s(1) / s(0);
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

}  // namespace

TEST_SUITE("image io and loading") {
  TEST_CASE("pgm round trip through a directory") {
    testing::TempDir dir;
    std::mt19937_64 rng(1);
    const FrameSequence s = random_sequence(rng, 7, 5, 3);
    save_frames(dir / "frames", s.frames);
    CHECK(fs::exists(dir / "frames" / "frame_0002.pgm"));
    const FrameSequence back = load_sequence(dir / "frames");
    REQUIRE(back.frames.size() == 3);
    CHECK(back.width() == 7);
    CHECK(back.height() == 5);
    for (std::size_t k = 0; k < 3; ++k) CHECK(back.frames[k] == s.frames[k]);
  }

  TEST_CASE("ascii and 16-bit pgm variants") {
    testing::TempDir dir;
    std::ofstream(dir / "a.pgm") << "P2\n# comment\n3 1\n15\n0 15 5\n";
    CHECK(read_pgm(dir / "a.pgm") == Frame(3, 1, {0.0, 255.0, 85.0}));
    {
      std::ofstream out(dir / "b.pgm", std::ios::binary);
      out << "P5\n2 1\n65535\n";
      const unsigned char bytes[] = {0xFF, 0xFF, 0x00, 0x00};
      out.write(reinterpret_cast<const char*>(bytes), 4);
    }
    CHECK(read_pgm(dir / "b.pgm") == Frame(2, 1, {255.0, 0.0}));
    std::ofstream(dir / "c.pgm") << "P5\n4 4\n255\nab";
    CHECK_THROWS_AS(read_pgm(dir / "c.pgm"), Error);
  }

  TEST_CASE("masks are binarized and optionally inverted") {
    testing::TempDir dir;
    save_frames(dir / "f", {Frame(2, 1, 10.0), Frame(2, 1, 20.0)});
    save_frames(dir / "m", {Frame(2, 1, {0.0, 3.0}), Frame(2, 1, {200.0, 0.0})});
    const FrameSequence s = load_sequence(dir / "f", dir / "m");
    REQUIRE(s.masks);
    CHECK((*s.masks)[0] == Frame(2, 1, {0.0, 255.0}));
    CHECK((*s.masks)[1] == Frame(2, 1, {255.0, 0.0}));
    const FrameSequence inv = load_sequence(dir / "f", dir / "m", true);
    CHECK((*inv.masks)[0] == Frame(2, 1, {255.0, 0.0}));
  }

  TEST_CASE("loading errors") {
    testing::TempDir dir;
    fs::create_directories(dir / "empty");
    auto kind_of = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.kind();
      }
      FAIL("expected an error");
      return ErrorKind::Numerical;
    };
    CHECK(kind_of([&] { load_sequence(dir / "empty"); }) == ErrorKind::Io);
    CHECK(kind_of([&] { load_sequence(dir / "missing"); }) == ErrorKind::Io);
    save_frames(dir / "f", {Frame(2, 2), Frame(2, 2)});
    save_frames(dir / "m", {Frame(2, 2)});
    CHECK(kind_of([&] { load_sequence(dir / "f", dir / "m"); }) == ErrorKind::Io);
    save_frames(dir / "mixed", {Frame(2, 2)});
    write_pgm(dir / "mixed" / "frame_0001.pgm", Frame(3, 2));
    CHECK(kind_of([&] { load_sequence(dir / "mixed"); }) == ErrorKind::Io);
  }

  TEST_CASE("png reading when available") {
    if (!png_supported()) return;
    // 1x1 8-bit gray PNG with value 0x7f.
    const unsigned char png[] = {0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D, 0x49, 0x48,
                                 0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
                                 0x00, 0x3A, 0x7E, 0x9B, 0x55, 0x00, 0x00, 0x00, 0x0A, 0x49, 0x44, 0x41, 0x54, 0x78,
                                 0x9C, 0x63, 0xA8, 0x07, 0x00, 0x00, 0x81, 0x00, 0x80, 0xD3, 0x94, 0x53, 0x4A, 0x00,
                                 0x00, 0x00, 0x00, 0x49, 0x45, 0x4E, 0x44, 0xAE, 0x42, 0x60, 0x82};
    testing::TempDir dir;
    {
      std::ofstream out(dir / "p.png", std::ios::binary);
      out.write(reinterpret_cast<const char*>(png), sizeof png);
    }
    CHECK(read_image(dir / "p.png") == Frame(1, 1, 127.0));
  }
}

TEST_SUITE("resize and vectorization") {
  TEST_CASE("identity resize is bit-equal") {
    std::mt19937_64 rng(2);
    const FrameSequence s = random_sequence(rng, 9, 6, 2);
    const FrameSequence r = resize(s, 9, 6);
    CHECK(r.frames == s.frames);
  }

  TEST_CASE("constant frames stay constant") {
    const Frame r = resize_frame(Frame(13, 7, 42.5), 5, 11);
    CHECK(r.width() == 5);
    CHECK(r.height() == 11);
    for (double v : r.pixels()) CHECK(v == doctest::Approx(42.5).epsilon(1e-12));
  }

  TEST_CASE("checkerboard downscale preserves the mean") {
    Frame f(16, 12);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 16; ++x) f.set(x, y, (x + y) % 2 ? 200.0 : 40.0);
    const Frame r = resize_frame(f, 8, 6);
    double mean = 0;
    for (double v : r.pixels()) mean += v / static_cast<double>(r.size());
    CHECK(std::abs(mean - 120.0) <= 1e-6);
  }

  TEST_CASE("resized masks stay binary") {
    FrameSequence s;
    s.frames = {Frame(10, 10, 50.0)};
    Frame m(10, 10);
    for (int x = 0; x < 5; ++x) m.set(x, 3, 255);
    s.masks = std::vector<Frame>{m};
    const FrameSequence r = resize(s, 7, 7);
    for (double v : r.masks->front().pixels()) CHECK((v == 0.0 || v == 255.0));
  }

  TEST_CASE("column-major vectorization") {
    FrameSequence s;
    s.frames = {Frame(2, 2, {1.0, 2.0, 3.0, 4.0})};
    const Matrix X = to_matrix(s);
    CHECK(X.col(0) == (Vector(4) << 1, 3, 2, 4).finished());

    FrameSequence big;
    big.frames = {Frame(64, 80), Frame(64, 80)};
    CHECK(to_matrix(big).rows() == 5120);
  }

  TEST_CASE("round trip is exact") {
    std::mt19937_64 rng(3);
    const FrameSequence s = random_sequence(rng, 11, 4, 5);
    CHECK(from_matrix(to_matrix(s), 11, 4).frames == s.frames);
    CHECK_THROWS_AS(from_matrix(Matrix::Zero(10, 2), 3, 3), Error);
  }
}

TEST_SUITE("synthetic scenes") {
  TEST_CASE("equal seeds give identical scenes") {
    const SyntheticScene a = generate_synthetic(small_scene(5)), b = generate_synthetic(small_scene(5));
    CHECK(a.sequence.frames == b.sequence.frames);
    CHECK(*a.sequence.masks == *b.sequence.masks);
    CHECK(a.pure_indices == b.pure_indices);
    CHECK(generate_synthetic(small_scene(6)).sequence.frames != a.sequence.frames);
  }

  TEST_CASE("noiseless flat scene has rank one") {
    const Matrix X = to_matrix(generate_synthetic(noiseless_scene()).sequence);
    CHECK(numerical_rank(X) == 1);
  }

  TEST_CASE("mask geometry") {
    const SynthConfig cfg = small_scene(7);
    const SyntheticScene s = generate_synthetic(cfg);
    REQUIRE(static_cast<int>(s.pure_indices.size()) == cfg.n_pure_background);
    const std::set<int> pure(s.pure_indices.begin(), s.pure_indices.end());
    for (int j = 0; j < cfg.n_frames; ++j) {
      const Frame& m = (*s.sequence.masks)[static_cast<std::size_t>(j)];
      long on = 0;
      for (double v : m.pixels()) on += v > 0;
      if (pure.count(j)) {
        CHECK(on == 0);
        CHECK(j < cfg.static_begin);
      } else if (j < cfg.static_begin || j >= cfg.static_end) {
        CHECK(on == moving_object_rect(cfg, j).area());
      } else {
        CHECK(on >= static_object_rect(cfg).area());
      }
    }
  }

  TEST_CASE("invalid configurations") {
    SynthConfig c = small_scene();
    c.n_pure_background = 25;
    CHECK_THROWS_AS(generate_synthetic(c), Error);
    c = small_scene();
    c.static_end = 40;
    CHECK_THROWS_AS(generate_synthetic(c), Error);
  }
}

TEST_SUITE("solve_background") {
  TEST_CASE("every method returns a rank-one background on a flat scene") {
    const SyntheticScene s = generate_synthetic(noiseless_scene());
    const Matrix X = to_matrix(s.sequence);
    const double smax = spectral_norm(X);
    RunConfig cfg;
    cfg.wsvt.tau = 1e-3 * smax;
    cfg.svt_tau = 1e-3 * smax;
    for (Method m : {Method::Wsvt, Method::Svt, Method::Pca, Method::RpcaIealm, Method::RpcaApg}) {
      cfg.method = m;
      const SolveOutcome out = solve_background(X, cfg);
      INFO(to_string(m));
      CHECK(second_ratio(out.B) <= 1e-6);
    }
  }

  TEST_CASE("identity-weighted wsvt matches svt") {
    const Matrix X = to_matrix(generate_synthetic(small_scene(9)).sequence);
    RunConfig cfg;
    cfg.wsvt.tau = 0.02 * spectral_norm(X);
    cfg.wsvt.mu0 = 0.1;
    cfg.wsvt.epsilon = 1e-12;
    cfg.wsvt.max_iter = 2000;
    cfg.svt_tau = cfg.wsvt.tau;
    const Matrix wsvt = solve_background(X, cfg).B;
    cfg.method = Method::Svt;
    const Matrix svt = solve_background(X, cfg).B;
    CHECK((wsvt - svt).norm() / svt.norm() <= 1e-5);
  }

  TEST_CASE("method names") {
    for (Method m : {Method::Wsvt, Method::Svt, Method::Pca, Method::RpcaIealm, Method::RpcaApg})
      CHECK(parse_method(to_string(m)) == m);
    CHECK(to_string(Method::RpcaIealm) == "rpca-iealm");
    CHECK_THROWS_AS(parse_method("nmf"), Error);
  }
}

TEST_SUITE("run_pipeline") {
  TEST_CASE("svt recovers a noiseless background") {
    const SyntheticScene s = generate_synthetic(noiseless_scene());
    FrameSequence seq = s.sequence;
    seq.masks.reset();
    RunConfig cfg;
    cfg.method = Method::Svt;
    cfg.svt_tau = 1.0;
    cfg.resize.reset();
    cfg.weights.eps1_override = 10.0;
    const RunReport r = run_pipeline(cfg, seq);
    FrameSequence clean;
    clean.frames = s.clean_background;
    const Matrix truth = to_matrix(clean);
    const double rmse = (r.B - truth).norm() / std::sqrt(static_cast<double>(truth.size()));
    CHECK(rmse <= 1e-3 * 255);
    CHECK_FALSE(r.metrics);
  }

  TEST_CASE("artifacts, manifest and exact decomposition") {
    testing::TempDir dir;
    RunConfig cfg;
    cfg.learn_weights = true;
    cfg.weights.lambda_tilde = 20;
    cfg.resize = std::pair{16, 12};
    cfg.output_dir = dir / "out";
    const RunReport r = run_pipeline(cfg, generate_synthetic(small_scene(3)).sequence);

    CHECK(r.X.rows() == 16 * 12);
    CHECK((r.F.array() == (r.X - r.B).array()).all());
    CHECK((r.B + r.F - r.X).norm() <= 1e-12 * r.X.norm());
    REQUIRE(r.weights);
    REQUIRE(r.metrics);

    const fs::path out = dir / "out";
    for (const char* sub : {"background", "foreground", "masks"}) {
      CHECK(fs::exists(out / sub / "frame_0000.pgm"));
      CHECK(fs::exists(out / sub / "frame_0029.pgm"));
    }
    for (const char* file : {"trace.csv", "metrics.json", "roc.csv", "manifest.json", "weights.json", "B.csv", "F.csv"})
      CHECK(fs::exists(out / file));
    CHECK(read_matrix_csv(out / "F.csv").isApprox(r.F));

    const auto m = read_json(out / "manifest.json");
    CHECK(m.at("epsilon1").get<double>() == r.epsilon1);
    CHECK(m.at("epsilon2").get<double>() == r.weights->epsilon2);
    CHECK(m.at("indices").size() > 0);
    CHECK(m.at("config").at("lambda_tilde") == 20.0);
    CHECK(m.at("config").at("method") == "wsvt");
    CHECK(m.at("iterations") == r.outcome.iterations);
    CHECK(m.at("converged").is_boolean());
    CHECK(m.at("timings").contains("solve"));
    CHECK(m.dump() == nlohmann::json::parse(r.manifest).dump());

    const Frame fg = read_pgm(out / "foreground" / "frame_0005.pgm");
    CHECK(fg.width() == 16);
    const Frame mask = read_pgm(out / "masks" / "frame_0005.pgm");
    for (double v : mask.pixels()) CHECK((v == 0.0 || v == 255.0));
  }

  TEST_CASE("nothing is written without an output directory") {
    RunConfig cfg;
    cfg.method = Method::Pca;
    cfg.resize = std::pair{16, 12};
    const RunReport r = run_pipeline(cfg, generate_synthetic(small_scene(4)).sequence);
    CHECK(r.metrics);
    CHECK_FALSE(r.manifest.empty());
  }

  TEST_CASE("stage labels on failure") {
    RunConfig cfg;
    cfg.resize.reset();
    FrameSequence seq;
    seq.frames = {Frame(4, 4), Frame(4, 4)};
    try {
      run_pipeline(cfg, seq);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateInput);
      CHECK(std::string(e.what()).find("stage epsilon1") != std::string::npos);
    }
  }

  TEST_CASE("config validation") {
    RunConfig cfg;
    cfg.roc_thresholds = {5, 1};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = RunConfig{};
    cfg.svt_tau = -1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(RunConfig{}.resolved_svt_tau() == 900.0);
  }
}

TEST_SUITE("bench") {
  TEST_CASE("one row per method with repeat statistics") {
    const Matrix X = to_matrix(generate_synthetic(small_scene(8)).sequence);
    RunConfig cfg;
    cfg.rpca.epsilon = 1e-7;
    const auto rows = bench({Method::Wsvt, Method::Svt}, X, cfg, 2);
    REQUIRE(rows.size() == 2);
    for (const BenchRow& r : rows) {
      CHECK(r.seconds.size() == 2);
      CHECK(r.mean == doctest::Approx((r.seconds[0] + r.seconds[1]) / 2));
      CHECK(r.stddev >= 0);
      CHECK(r.iterations >= 1);
    }
    const auto j = nlohmann::json::parse(bench_json(rows));
    CHECK(j.size() == 2);
    CHECK_THROWS_AS(bench({Method::Wsvt}, X, cfg, 0), Error);
  }
}
