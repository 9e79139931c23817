#pragma once

#include <cstddef>

// Dense row-major kernels used by the autodiff ops. Every kernel has a serial
// reference implementation and an OpenMP variant that partitions output rows;
// each output element is a single serially-accumulated dot product in both
// variants, so results are bit-identical regardless of thread count.
namespace lrpx::kernels {

// Enable/disable the OpenMP variants at runtime (reads LRPX_SERIAL=1 from the
// environment on first use; default enabled).
bool threading_enabled();
void set_threading(bool enabled);

// c[m x n] += a[m x k] * b[k x n]
void matmul_nn_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nn_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] += a[m x k] * b[n x k]^T
void matmul_nt_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);

// c[m x n] += a[k x m]^T * b[k x n]
void matmul_tn_serial(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn_omp(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);

// out[i] = a[i] + b[i] / out[i] = a[i] * b[i] / y[i] += alpha * x[i]
void add_serial(const double* a, const double* b, double* out, std::size_t n);
void add_omp(const double* a, const double* b, double* out, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);

void mul_serial(const double* a, const double* b, double* out, std::size_t n);
void mul_omp(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);

void axpy_serial(double alpha, const double* x, double* y, std::size_t n);
void axpy_omp(double alpha, const double* x, double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

}  // namespace lrpx::kernels
