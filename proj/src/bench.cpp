#include <chrono>
#include <cmath>

#include <json.hpp>

#include "wsvt/errors.hpp"
#include "wsvt/pipeline.hpp"

namespace wsvt {

std::vector<BenchRow> bench(const std::vector<Method>& methods, const Matrix& X, const RunConfig& cfg, int repeats) {
  if (repeats < 1) throw_invalid("bench: repeats must be at least 1");
  if (methods.empty()) throw_invalid("bench: no methods given");
  cfg.validate();

  Matrix W;
  if (cfg.learn_weights) W = learn_weights(X, cfg.wsvt, cfg.weights).weight_matrix();

  std::vector<BenchRow> rows;
  for (Method m : methods) {
    RunConfig run = cfg;
    run.method = m;
    BenchRow row;
    row.method = m;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const SolveOutcome out = solve_background(X, run, W);
      row.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      row.iterations = out.iterations;
    }
    double sum = 0.0;
    for (double s : row.seconds) sum += s;
    row.mean = sum / repeats;
    if (repeats > 1) {
      double ss = 0.0;
      for (double s : row.seconds) ss += (s - row.mean) * (s - row.mean);
      row.stddev = std::sqrt(ss / (repeats - 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string bench_json(const std::vector<BenchRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"method", to_string(r.method)},
                   {"seconds", r.seconds},
                   {"mean", r.mean},
                   {"stddev", r.stddev},
                   {"iterations", r.iterations}});
  return out.dump(2) + "\n";
}

}  // namespace wsvt
