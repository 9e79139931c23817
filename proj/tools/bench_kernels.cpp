// Compares the serial reference kernels against the OpenMP versions and
// checks that both produce bit-identical results.
#include <omp.h>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "lrpx/kernels.hpp"
#include "lrpx/rng.hpp"

namespace {

using lrpx::Rng;

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = omp_get_wtime();
    f();
    best = std::min(best, omp_get_wtime() - t0);
  }
  return best;
}

struct Case {
  std::string name;
  double t_serial;
  double t_omp;
  bool identical;
};

Case bench_matmul(Rng& rng, int m, int k, int n, int reps) {
  auto a = random_vec(rng, static_cast<std::size_t>(m) * k);
  auto b = random_vec(rng, static_cast<std::size_t>(k) * n);
  std::vector<double> c_serial(static_cast<std::size_t>(m) * n, 0.0);
  std::vector<double> c_omp(c_serial);
  Case out;
  out.name = "matmul " + std::to_string(m) + "x" + std::to_string(k) + "x" + std::to_string(n);
  out.t_serial = time_best_of(reps, [&] {
    std::fill(c_serial.begin(), c_serial.end(), 0.0);
    lrpx::kernels::matmul_nn_serial(a.data(), b.data(), c_serial.data(), m, k, n);
  });
  out.t_omp = time_best_of(reps, [&] {
    std::fill(c_omp.begin(), c_omp.end(), 0.0);
    lrpx::kernels::matmul_nn_omp(a.data(), b.data(), c_omp.data(), m, k, n);
  });
  out.identical = bits_equal(c_serial, c_omp);
  return out;
}

Case bench_axpy(Rng& rng, std::size_t n, int reps) {
  auto x = random_vec(rng, n);
  auto y0 = random_vec(rng, n);
  std::vector<double> y_serial(y0), y_omp(y0);
  Case out;
  out.name = "axpy n=" + std::to_string(n);
  out.t_serial = time_best_of(reps, [&] {
    y_serial = y0;
    lrpx::kernels::axpy_serial(0.5, x.data(), y_serial.data(), n);
  });
  out.t_omp = time_best_of(reps, [&] {
    y_omp = y0;
    lrpx::kernels::axpy_omp(0.5, x.data(), y_omp.data(), n);
  });
  out.identical = bits_equal(y_serial, y_omp);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) {
    reps = std::atoi(argv[1]);
    if (reps < 1) {
      std::fprintf(stderr, "usage: %s [reps >= 1]\n", argv[0]);
      return 2;
    }
  }
  Rng rng(1234);

  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("%-24s %12s %12s %8s %s\n", "case", "serial (s)", "omp (s)", "speedup", "identical");

  std::vector<Case> cases;
  cases.push_back(bench_matmul(rng, 64, 64, 64, reps));
  cases.push_back(bench_matmul(rng, 256, 256, 256, reps));
  cases.push_back(bench_matmul(rng, 512, 512, 512, reps));
  cases.push_back(bench_axpy(rng, 1 << 16, reps));
  cases.push_back(bench_axpy(rng, 1 << 22, reps));

  bool all_identical = true;
  for (const auto& c : cases) {
    std::printf("%-24s %12.6f %12.6f %8.2fx %s\n", c.name.c_str(), c.t_serial, c.t_omp,
                c.t_serial / c.t_omp, c.identical ? "yes" : "NO");
    all_identical = all_identical && c.identical;
  }
  if (!all_identical) {
    std::fprintf(stderr, "error: OpenMP kernels diverged from serial reference\n");
    return 1;
  }
  return 0;
}
