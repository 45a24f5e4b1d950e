#pragma once

// Hand-coded reference computations. Nothing here goes through the symbolic
// engine or the rule tables: residuals are written out directly and Newton
// steps come from finite differences of the summed squares.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

/// Solves a tridiagonal system; a is the sub-diagonal (a[0] unused), c the
/// super-diagonal (c[n-1] unused).
inline std::vector<double> thomas(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                                  std::vector<double> d) {
  const std::size_t n = b.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = d[n - 1] / b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
  return x;
}

/// Discrete solution of (phi[i-1] - 2 phi[i] + phi[i+1]) / h^2 = rho[i] with fixed ends.
inline std::vector<double> poisson1d_direct(int n, double h, const std::vector<double>& rho, double left,
                                            double right) {
  const int m = n - 2;
  std::vector<double> a(m, 1.0), b(m, -2.0), c(m, 1.0), d(m);
  for (int i = 0; i < m; ++i) d[i] = h * h * rho[i + 1];
  d[0] -= left;
  d[m - 1] -= right;
  std::vector<double> inner = thomas(a, b, c, d);
  std::vector<double> phi(n);
  phi[0] = left;
  phi[n - 1] = right;
  for (int i = 0; i < m; ++i) phi[i + 1] = inner[i];
  return phi;
}

inline double poisson1d_error(const std::vector<double>& phi, double h, const std::vector<double>& rho) {
  double e = 0;
  for (std::size_t i = 1; i + 1 < phi.size(); ++i) {
    const double r = (phi[i - 1] - 2 * phi[i] + phi[i + 1]) / (h * h) - rho[i];
    e += r * r;
  }
  return e;
}

struct Box {
  int nx, ny, nz;
  std::size_t at(int x, int y, int z) const { return (static_cast<std::size_t>(x) * ny + y) * nz + z; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
};

inline double poisson3d_error(const std::vector<double>& phi, const Box& b, double h, const std::vector<double>& rho) {
  double e = 0;
  for (int x = 1; x + 1 < b.nx; ++x)
    for (int y = 1; y + 1 < b.ny; ++y)
      for (int z = 1; z + 1 < b.nz; ++z) {
        const double lap = phi[b.at(x + 1, y, z)] + phi[b.at(x - 1, y, z)] + phi[b.at(x, y + 1, z)] +
                           phi[b.at(x, y - 1, z)] + phi[b.at(x, y, z + 1)] + phi[b.at(x, y, z - 1)] -
                           6 * phi[b.at(x, y, z)];
        const double r = lap / (h * h) - rho[b.at(x, y, z)];
        e += r * r;
      }
  return e;
}

struct BeamCoefficients {
  double h, hz, k, n;
  std::vector<double> dn;  // per cell
};

/// Complex residual dE/dz - (i/2k) Lap_t E - (ik/n) dn E at an interior cell,
/// with E = u + i v stored as (u, v) pairs per cell.
inline std::complex<double> beam_residual(const std::vector<double>& uv, const Box& b, const BeamCoefficients& c, int x,
                                          int y, int z) {
  auto E = [&](int i, int j, int l) {
    const std::size_t cell = b.at(i, j, l);
    return std::complex<double>(uv[2 * cell], uv[2 * cell + 1]);
  };
  const std::complex<double> I(0, 1);
  const auto dz = (E(x, y, z) - E(x, y, z - 1)) / c.hz;
  const auto lap = (E(x + 1, y, z) + E(x - 1, y, z) + E(x, y + 1, z) + E(x, y - 1, z) - 4.0 * E(x, y, z)) / (c.h * c.h);
  return dz - I / (2 * c.k) * lap - I * c.k / c.n * c.dn[b.at(x, y, z)] * E(x, y, z);
}

inline double beam_error(const std::vector<double>& uv, const Box& b, const BeamCoefficients& c) {
  double e = 0;
  for (int x = 1; x + 1 < b.nx; ++x)
    for (int y = 1; y + 1 < b.ny; ++y)
      for (int z = 1; z < b.nz; ++z) e += std::norm(beam_residual(uv, b, c, x, y, z));
  return e;
}

/// Newton step on the m components of `cell` from central differences of `error`.
inline std::vector<double> fd_newton(const std::function<double(const std::vector<double>&)>& error,
                                     std::vector<double> state, std::size_t cell, int m, double step = 1e-2) {
  const std::size_t base = cell * m;
  std::vector<double> eps(m);
  for (int i = 0; i < m; ++i) eps[i] = step * std::max(1.0, std::abs(state[base + i]));
  auto shifted = [&](int i, double di, int j, double dj) {
    std::vector<double> s = state;
    s[base + i] += di;
    if (j >= 0) s[base + j] += dj;
    return error(s);
  };
  const double e0 = error(state);
  Eigen::VectorXd g(m);
  Eigen::MatrixXd H(m, m);
  for (int i = 0; i < m; ++i) {
    const double p = shifted(i, eps[i], -1, 0), q = shifted(i, -eps[i], -1, 0);
    g(i) = (p - q) / (2 * eps[i]);
    H(i, i) = (p - 2 * e0 + q) / (eps[i] * eps[i]);
    for (int j = 0; j < i; ++j) {
      H(i, j) = H(j, i) = (shifted(i, eps[i], j, eps[j]) - shifted(i, eps[i], j, -eps[j]) -
                           shifted(i, -eps[i], j, eps[j]) + shifted(i, -eps[i], j, -eps[j])) /
                          (4 * eps[i] * eps[j]);
    }
  }
  Eigen::VectorXd d = H.fullPivLu().solve(g);
  std::vector<double> out(m);
  for (int i = 0; i < m; ++i) out[i] = state[base + i] - d(i);
  return out;
}

/// Marches the backward-difference beam scheme plane by plane: each plane
/// solves (I - hz (i/2k) Lap_t - hz (ik/n) dn) E_z = E_{z-1} with zero walls.
inline std::vector<std::complex<double>> beam_march(const Box& b, const BeamCoefficients& c,
                                                    const std::vector<std::complex<double>>& inlet) {
  const int mx = b.nx - 2, my = b.ny - 2;
  const int s = mx * my;
  const std::complex<double> I(0, 1);
  auto idx = [&](int x, int y) { return (x - 1) * my + (y - 1); };
  std::vector<std::complex<double>> field(b.size());
  for (int x = 0; x < b.nx; ++x)
    for (int y = 0; y < b.ny; ++y) field[b.at(x, y, 0)] = inlet[static_cast<std::size_t>(x) * b.ny + y];
  Eigen::VectorXcd e(s);
  for (int x = 1; x <= mx; ++x)
    for (int y = 1; y <= my; ++y) e(idx(x, y)) = field[b.at(x, y, 0)];
  auto same_plane = [&](int z) {
    for (int x = 1; x <= mx; ++x)
      for (int y = 1; y <= my; ++y)
        if (c.dn[b.at(x, y, z)] != c.dn[b.at(x, y, z - 1)]) return false;
    return true;
  };
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
  for (int z = 1; z < b.nz; ++z) {
    if (z == 1 || !same_plane(z)) {
      Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(s, s);
      const std::complex<double> t = -c.hz * I / (2 * c.k) / (c.h * c.h);
      for (int x = 1; x <= mx; ++x)
        for (int y = 1; y <= my; ++y) {
          const int r = idx(x, y);
          A(r, r) += -4.0 * t - c.hz * I * c.k / c.n * c.dn[b.at(x, y, z)];
          if (x > 1) A(r, idx(x - 1, y)) += t;
          if (x < mx) A(r, idx(x + 1, y)) += t;
          if (y > 1) A(r, idx(x, y - 1)) += t;
          if (y < my) A(r, idx(x, y + 1)) += t;
        }
      lu.compute(A);
    }
    e = lu.solve(e);
    for (int x = 1; x <= mx; ++x)
      for (int y = 1; y <= my; ++y) field[b.at(x, y, z)] = e(idx(x, y));
  }
  return field;
}

}  // namespace oracle
