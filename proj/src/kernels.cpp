#include "lrpx/kernels.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>

namespace lrpx::kernels {

namespace {

std::atomic<bool> g_threading{true};
std::atomic<bool> g_env_read{false};

void read_env_once() {
  bool expected = false;
  if (g_env_read.compare_exchange_strong(expected, true)) {
    const char* v = std::getenv("LRPX_SERIAL");
    if (v != nullptr && v[0] == '1') g_threading = false;
  }
}

// Below this many multiply-adds the fork/join overhead dominates.
constexpr long long kParallelThreshold = 64LL * 1024LL;

bool use_omp(long long work) {
  read_env_once();
  return g_threading.load() && work >= kParallelThreshold && !omp_in_parallel() &&
         omp_get_max_threads() > 1;
}

}  // namespace

bool threading_enabled() {
  read_env_once();
  return g_threading.load();
}

void set_threading(bool enabled) {
  read_env_once();
  g_threading = enabled;
}

void matmul_nn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_nn_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (use_omp(1LL * m * k * n)) {
    matmul_nn_omp(a, b, c, m, k, n);
  } else {
    matmul_nn_serial(a, b, c, m, k, n);
  }
}

void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
      c[i * n + j] += acc;
    }
  }
}

void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
      c[i * n + j] += acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  if (use_omp(1LL * m * k * n)) {
    matmul_nt_omp(a, b, c, m, k, n);
  } else {
    matmul_nt_serial(a, b, c, m, k, n);
  }
}

void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
      c[i * n + j] += acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (use_omp(1LL * m * k * n)) {
    matmul_tn_omp(a, b, c, m, k, n);
  } else {
    matmul_tn_serial(a, b, c, m, k, n);
  }
}

void add_serial(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void add_omp(const double* a, const double* b, double* out, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = a[i] + b[i];
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  if (use_omp(static_cast<long long>(n))) {
    add_omp(a, b, out, n);
  } else {
    add_serial(a, b, out, n);
  }
}

void mul_serial(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_omp(const double* a, const double* b, double* out, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = a[i] * b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  if (use_omp(static_cast<long long>(n))) {
    mul_omp(a, b, out, n);
  } else {
    mul_serial(a, b, out, n);
  }
}

void axpy_serial(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_omp(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  if (use_omp(static_cast<long long>(n))) {
    axpy_omp(alpha, x, y, n);
  } else {
    axpy_serial(alpha, x, y, n);
  }
}

}  // namespace lrpx::kernels
