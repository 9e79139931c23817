#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace lrpx {

// Plain row-major matrix for code that lives outside the autodiff graph
// (attention-matrix baselines, flow graphs, report tables).
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

  static Mat eye(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  Mat operator*(const Mat& o) const {
    if (cols != o.rows) throw std::invalid_argument("Mat: inner dimensions disagree");
    Mat out(rows, o.cols);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < cols; ++k) {
        const double a = at(i, k);
        for (int j = 0; j < o.cols; ++j) out.at(i, j) += a * o.at(k, j);
      }
    return out;
  }
};

}  // namespace lrpx
