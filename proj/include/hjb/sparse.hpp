#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjb {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix.
struct CsrMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  /// Entry (i, j) or 0 when not stored.
  double at(int i, int j) const {
    const auto first = col_idx.begin() + row_ptr[i], last = col_idx.begin() + row_ptr[i + 1];
    const auto it = std::lower_bound(first, last, j);
    return (it != last && *it == j) ? values[it - col_idx.begin()] : 0.0;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += values[k] * x[col_idx[k]];
      y[i] = s;
    }
  }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(rows);
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(rows, 0.0);
    for (int i = 0; i < rows; ++i) d[i] = at(i, i);
    return d;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  /// Largest |a_ij - a_ji| over stored entries.
  double asymmetry() const {
    double m = 0.0;
    for (int i = 0; i < rows; ++i)
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        m = std::max(m, std::abs(values[k] - at(col_idx[k], i)));
    return m;
  }
};

/// Merges a coordinate list into CSR. Duplicates are summed in (row, col,
/// insertion) order, so the result does not depend on hash or thread order.
inline CsrMatrix build_csr(int rows, int cols, std::vector<Triplet> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  for (std::size_t k = 0; k < entries.size();) {
    const int r = entries[k].row, c = entries[k].col;
    if (r < 0 || r >= rows || c < 0 || c >= cols) throw std::out_of_range("build_csr: index out of range");
    double sum = 0.0;
    for (; k < entries.size() && entries[k].row == r && entries[k].col == c; ++k) sum += entries[k].value;
    m.col_idx.push_back(c);
    m.values.push_back(sum);
    ++m.row_ptr[r + 1];
  }
  for (int i = 0; i < rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  return m;
}

/// Coordinate text export: one "row col value" line per stored entry.
inline void write_coordinate(const CsrMatrix& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_coordinate: cannot open " + path);
  os << std::setprecision(17);
  for (int i = 0; i < m.rows; ++i)
    for (int k = m.row_ptr[i]; k < m.row_ptr[i + 1]; ++k) os << i << ' ' << m.col_idx[k] << ' ' << m.values[k] << '\n';
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace hjb
