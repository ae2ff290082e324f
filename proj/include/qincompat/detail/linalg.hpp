#pragma once

// Tiny dense helpers for the fixed-size systems that show up in the
// feasibility and discrimination solvers (n <= 8 throughout).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qincompat::detail {

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// A is row-major n x n.  Throws on (near-)singular systems.
inline std::vector<double> gauss_solve(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw std::invalid_argument("gauss_solve: size mismatch");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(a[r * n + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best < 1e-13) throw std::runtime_error("gauss_solve: singular system");
    if (piv != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[piv * n + k], a[col * n + k]);
      std::swap(b[piv], b[col]);
    }
    const double diag = a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / diag;
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t k = ri + 1; k < n; ++k) s -= a[ri * n + k] * x[k];
    x[ri] = s / a[ri * n + ri];
  }
  return x;
}

// Lawson-Hanson nonnegative least squares for a column-major m x ncols
// system (m rows).  Small sizes only; used to assemble primal witnesses.
inline std::vector<double> nnls(const std::vector<std::vector<double>>& cols,
                                const std::vector<double>& rhs, int max_passes = 200) {
  const std::size_t m = rhs.size();
  const std::size_t nc = cols.size();
  std::vector<double> x(nc, 0.0);
  std::vector<bool> passive(nc, false);

  auto residual = [&]() {
    std::vector<double> r = rhs;
    for (std::size_t j = 0; j < nc; ++j) {
      if (x[j] == 0.0) continue;
      for (std::size_t i = 0; i < m; ++i) r[i] -= cols[j][i] * x[j];
    }
    return r;
  };

  auto solve_passive = [&](std::vector<double>& z) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < nc; ++j)
      if (passive[j]) idx.push_back(j);
    const std::size_t k = idx.size();
    if (k == 0) return idx;
    std::vector<double> ata(k * k, 0.0), atb(k, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = 0; q < k; ++q) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += cols[idx[p]][i] * cols[idx[q]][i];
        ata[p * k + q] = s;
      }
      ata[p * k + p] += 1e-12;  // guard against rank-deficient passive sets
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += cols[idx[p]][i] * rhs[i];
      atb[p] = s;
    }
    z = gauss_solve(ata, atb);
    return idx;
  };

  for (int pass = 0; pass < max_passes; ++pass) {
    const std::vector<double> r = residual();
    double best_w = 0.0;
    std::size_t best_j = nc;
    for (std::size_t j = 0; j < nc; ++j) {
      if (passive[j]) continue;
      double w = 0.0;
      for (std::size_t i = 0; i < m; ++i) w += cols[j][i] * r[i];
      if (w > best_w + 1e-14) {
        best_w = w;
        best_j = j;
      }
    }
    if (best_j == nc || best_w <= 1e-12) break;
    passive[best_j] = true;

    for (int inner = 0; inner < max_passes; ++inner) {
      std::vector<double> z;
      const std::vector<std::size_t> idx = solve_passive(z);
      bool all_pos = true;
      for (std::size_t p = 0; p < idx.size(); ++p) {
        if (z[p] <= 1e-14) {
          all_pos = false;
          break;
        }
      }
      if (all_pos) {
        for (std::size_t p = 0; p < idx.size(); ++p) x[idx[p]] = z[p];
        break;
      }
      double alpha = 1.0;
      for (std::size_t p = 0; p < idx.size(); ++p) {
        if (z[p] <= 1e-14) {
          const double denom = x[idx[p]] - z[p];
          if (denom > 0.0) alpha = std::min(alpha, x[idx[p]] / denom);
        }
      }
      for (std::size_t p = 0; p < idx.size(); ++p) {
        x[idx[p]] += alpha * (z[p] - x[idx[p]]);
        if (x[idx[p]] <= 1e-14) {
          x[idx[p]] = 0.0;
          passive[idx[p]] = false;
        }
      }
    }
  }
  return x;
}

}  // namespace qincompat::detail
