#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "test_support.hpp"
#include "wsvt/errors.hpp"
#include "wsvt/file_util.hpp"
#include "wsvt/metrics.hpp"

using namespace wsvt;

namespace {

Frame random_frame(std::mt19937_64& rng, int w, int h, double lo = 0, double hi = 255) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (double& v : px) v = u(rng);
  return Frame(w, h, std::move(px));
}

Frame shifted(const Frame& f, double delta) {
  std::vector<double> px = f.pixels();
  for (double& v : px) v += delta;
  return Frame(f.width(), f.height(), std::move(px));
}

// SSIM evaluated window by window with explicit double sums.
double direct_mssim(const Frame& a, const Frame& b) {
  double g[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double sum = 0;
  int count = 0;
  for (int y0 = 0; y0 + 11 <= a.height(); ++y0)
    for (int x0 = 0; x0 + 11 <= a.width(); ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i][j] / total, pa = a(x0 + j, y0 + i), pb = b(x0 + j, y0 + i);
          ma += w * pa;
          mb += w * pb;
          saa += w * pa * pa;
          sbb += w * pb * pb;
          sab += w * pa * pb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return sum / count;
}

// Mann-Whitney statistic with ties counted as one half.
double rank_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double wins = 0;
  long pos = 0, neg = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    ++pos;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  for (auto v : y) neg += v ? 0 : 1;
  return wins / static_cast<double>(pos * neg);
}

std::vector<double> exhaustive_thresholds(const std::vector<double>& s) {
  std::set<double> u(s.begin(), s.end());
  std::vector<double> t(u.begin(), u.end());
  t.push_back(std::nextafter(t.back(), INFINITY));
  return t;
}

}  // namespace

TEST_SUITE("psnr") {
  TEST_CASE("closed-form values") {
    std::mt19937_64 rng(1);
    const Frame g = random_frame(rng, 20, 15, 20, 200);
    CHECK(std::isinf(psnr(g, g)));
    CHECK(psnr(shifted(g, 1), g) == doctest::Approx(10 * std::log10(255.0 * 255.0)).epsilon(1e-12));
    CHECK(psnr(shifted(g, 16), g) == doctest::Approx(10 * std::log10(255.0 * 255.0 / 256.0)).epsilon(1e-12));
    CHECK(psnr(shifted(g, 1), g) == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(psnr(shifted(g, 16), g) == doctest::Approx(24.0484).epsilon(1e-5));
  }

  TEST_CASE("symmetric and decreasing in noise amplitude") {
    std::mt19937_64 rng(2);
    const Frame g = random_frame(rng, 32, 32, 60, 190);
    std::normal_distribution<double> n01;
    std::vector<double> noise(g.size());
    for (double& v : noise) v = n01(rng);
    double previous = INFINITY;
    for (double amp : {1.0, 4.0, 16.0}) {
      std::vector<double> px = g.pixels();
      for (std::size_t i = 0; i < px.size(); ++i) px[i] += amp * noise[i];
      const Frame e(32, 32, px);
      CHECK(psnr(e, g) == psnr(g, e));
      CHECK(psnr(e, g) < previous);
      previous = psnr(e, g);
    }
  }

  TEST_CASE("dimension mismatch") { CHECK_THROWS_AS(psnr(Frame(4, 4), Frame(4, 5)), Error); }
}

TEST_SUITE("ssim") {
  TEST_CASE("identical images score exactly one") {
    std::mt19937_64 rng(3);
    const Frame g = random_frame(rng, 30, 25);
    CHECK(mssim(g, g) == 1.0);
    const SsimMap m = ssim_map(g, g);
    CHECK(m.width == 20);
    CHECK(m.height == 15);
    CHECK(m.values.size() == 300);
  }

  TEST_CASE("inverted image scores below one") {
    std::mt19937_64 rng(4);
    const Frame g = random_frame(rng, 24, 24);
    std::vector<double> px = g.pixels();
    for (double& v : px) v = 255 - v;
    CHECK(mssim(Frame(24, 24, px), g) < 1.0);
  }

  TEST_CASE("agrees with direct window summation") {
    std::mt19937_64 rng(5);
    const Frame g = random_frame(rng, 40, 32, 30, 220);
    CHECK(std::abs(mssim(shifted(g, 7), g) - direct_mssim(shifted(g, 7), g)) <= 1e-10);
    const Frame e = random_frame(rng, 40, 32);
    CHECK(std::abs(mssim(e, g) - direct_mssim(e, g)) <= 1e-10);
  }

  TEST_CASE("symmetric") {
    std::mt19937_64 rng(6);
    const Frame a = random_frame(rng, 16, 20), b = random_frame(rng, 16, 20);
    CHECK(std::abs(mssim(a, b) - mssim(b, a)) <= 1e-12);
  }

  TEST_CASE("too small or mismatched") {
    CHECK_THROWS_AS(mssim(Frame(10, 20), Frame(10, 20)), Error);
    CHECK_THROWS_AS(mssim(Frame(12, 12), Frame(12, 13)), Error);
  }
}

TEST_SUITE("foreground mask") {
  TEST_CASE("threshold is inclusive") {
    const Frame f(3, 1, {4.9, 5.0, 200.0});
    CHECK(foreground_mask(f, 5.0) == Frame(3, 1, {0.0, 255.0, 255.0}));
  }
}

TEST_SUITE("roc") {
  TEST_CASE("default thresholds") {
    const auto t = default_roc_thresholds();
    REQUIRE(t.size() == 95);
    CHECK(t[0] == 0.0);
    CHECK(t[4] == 30.0);
    CHECK(t[5] == 31.0);
    CHECK(t[6] == 33.5);
    CHECK(t.back() == 253.5);
    CHECK(std::is_sorted(t.begin(), t.end()));
  }

  TEST_CASE("extreme thresholds") {
    std::mt19937_64 rng(7);
    const Frame f = random_frame(rng, 10, 10);
    Frame mask(10, 10);
    for (int x = 0; x < 4; ++x) mask.set(x, 2, 255);
    const auto pts = roc_curve({f}, {mask}, {0.0, 256.0});
    CHECK(pts[0].tpr == 1.0);
    CHECK(pts[0].fpr == 1.0);
    CHECK(pts[1].tpr == 0.0);
    CHECK(pts[1].fpr == 0.0);
    CHECK(pts[0].tp + pts[0].fp + pts[0].tn + pts[0].fn == 100);
  }

  TEST_CASE("perfect detector passes through the corner") {
    Frame mask(12, 8), f(12, 8);
    for (int y = 2; y < 5; ++y)
      for (int x = 3; x < 9; ++x) {
        mask.set(x, y, 255);
        f.set(x, y, 255);
      }
    for (double t : {0.5, 31.0, 128.0, 255.0}) {
      const auto p = roc_curve({f}, {mask}, {t}).front();
      CHECK(p.tpr == 1.0);
      CHECK(p.fpr == 0.0);
    }
    CHECK(auc(roc_curve({f}, {mask}, default_roc_thresholds())) == doctest::Approx(1.0));
  }

  TEST_CASE("counts are pooled across frames") {
    const Frame s1(2, 1, {100.0, 0.0}), s2(2, 1, {100.0, 100.0});
    const Frame m1(2, 1, {255.0, 0.0}), m2(2, 1, {0.0, 255.0});
    const auto p = roc_curve({s1, s2}, {m1, m2}, {50.0}).front();
    CHECK(p.tp == 2);
    CHECK(p.fp == 1);
    CHECK(p.tn == 1);
    CHECK(p.fn == 0);
    CHECK(p.fpr == 0.5);
  }

  TEST_CASE("monotone in threshold") {
    std::mt19937_64 rng(8);
    std::vector<Frame> scores, masks;
    for (int i = 0; i < 4; ++i) {
      scores.push_back(random_frame(rng, 16, 16));
      masks.push_back(Frame(16, 16));
      for (int x = 0; x < 16; x += 3) masks.back().set(x, i, 255);
    }
    const auto pts = roc_curve(scores, masks, default_roc_thresholds());
    for (std::size_t i = 1; i < pts.size(); ++i) {
      CHECK(pts[i].tpr <= pts[i - 1].tpr);
      CHECK(pts[i].fpr <= pts[i - 1].fpr);
    }
  }

  TEST_CASE("area equals the rank statistic and survives monotone rescaling") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    std::vector<double> s;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 300; ++i) {
      const bool pos = i % 3 == 0;
      y.push_back(pos ? 1 : 0);
      s.push_back(std::round(10 * (n01(rng) + (pos ? 1.2 : 0.0))) / 10);
    }
    const double a = auc(roc_curve(s, y, exhaustive_thresholds(s)));
    CHECK(std::abs(a - rank_auc(s, y)) <= 1e-12);
    std::vector<double> r = s;
    for (double& v : r) v = std::exp(v) + v * v * v;
    CHECK(std::abs(auc(roc_curve(r, y, exhaustive_thresholds(r))) - a) <= 1e-12);
  }

  TEST_CASE("degenerate and invalid inputs") {
    const std::vector<double> s{1, 2, 3};
    auto kind_of = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.kind();
      }
      FAIL("expected an error");
      return ErrorKind::Io;
    };
    CHECK(kind_of([&] { roc_curve(s, std::vector<std::uint8_t>{0, 0, 0}, {1.0}); }) == ErrorKind::DegenerateInput);
    CHECK(kind_of([&] { roc_curve(s, std::vector<std::uint8_t>{1, 1, 1}, {1.0}); }) == ErrorKind::DegenerateInput);
    CHECK(kind_of([&] { roc_curve(s, std::vector<std::uint8_t>{1, 0, 1}, {2.0, 1.0}); }) ==
          ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { roc_curve(s, std::vector<std::uint8_t>{1, 0}, {1.0}); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { auc({RocPoint{}}); }) != ErrorKind::Io);
  }
}

TEST_SUITE("evaluate and export") {
  TEST_CASE("report aggregates and json sentinels") {
    Frame m1(16, 16), m2(16, 16);
    for (int x = 2; x < 9; ++x) {
      m1.set(x, 4, 255);
      m2.set(x, 9, 255);
    }
    const Frame noisy = shifted(m2, 3);
    const MetricsReport r = evaluate({m1, noisy}, {m1, noisy}, {m1, m2}, default_roc_thresholds());
    REQUIRE(r.psnr.size() == 2);
    CHECK(std::isinf(r.psnr[0]));
    CHECK(r.inf_count == 1);
    CHECK(r.mean_psnr_finite == doctest::Approx(psnr(noisy, m2)));
    CHECK(r.mssim[0] == 1.0);
    CHECK(r.mean_mssim == doctest::Approx((1.0 + mssim(noisy, m2)) / 2));
    CHECK(r.auc == doctest::Approx(1.0));

    const auto j = nlohmann::json::parse(metrics_json(r));
    CHECK(j.at("psnr")[0].is_null());
    CHECK(j.at("inf_count") == 1);
    CHECK(j.at("roc").size() == 95);
  }

  TEST_CASE("all-exact psnr mean is null") {
    Frame mask(12, 12);
    mask.set(0, 0, 255);
    const MetricsReport r = evaluate({mask}, {mask}, {mask}, {0.0, 100.0});
    CHECK(std::isnan(r.mean_psnr_finite));
    CHECK(nlohmann::json::parse(metrics_json(r)).at("mean_psnr_finite").is_null());
  }

  TEST_CASE("roc csv") {
    testing::TempDir dir;
    RocPoint p;
    p.threshold = 31;
    p.tpr = 0.5;
    p.fpr = 0.25;
    p.tp = 1;
    p.fp = 2;
    p.tn = 6;
    p.fn = 1;
    write_roc_csv(dir / "roc.csv", {p});
    CHECK(read_file(dir / "roc.csv") == "threshold,tpr,fpr,tp,fp,tn,fn\n31,0.5,0.25,1,2,6,1\n");
  }
}
