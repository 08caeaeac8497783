// svlab - quadrature: Gauss-Legendre panels, adaptive Gauss-Kronrod, Sobol
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace svlab {

// Gauss-Legendre nodes/weights on [-1,1], computed once by Newton iteration
// on the Legendre polynomial.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

struct PanelRule {
  std::vector<double> x, w;  // nodes/weights on [-1,1]
  explicit PanelRule(int pts = 8) { gauss_legendre(pts, x, w); }
};

// Composite Gauss-Legendre over [a,b] with `panels` equal panels.
inline double integrate_panels(const std::function<double(double)>& f, double a, double b,
                               int panels, const PanelRule& rule) {
  double s = 0.0;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * h;
    for (std::size_t i = 0; i < rule.x.size(); ++i)
      s += 0.5 * h * rule.w[i] * f(c + 0.5 * h * rule.x[i]);
  }
  return s;
}

// Adaptive Gauss(7)-Kronrod(15).
namespace gk {
inline constexpr std::array<double, 8> xk = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr std::array<double, 8> wk = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr std::array<double, 4> wg = {0.129484966168870, 0.279705391489277,
                                             0.381830050505119, 0.417959183673469};
}  // namespace gk

inline void gk15(const std::function<double(double)>& f, double a, double b, double& result,
                 double& err) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double resk = 0.0, resg = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double fv = (i == 7) ? f(c) : f(c - h * gk::xk[i]) + f(c + h * gk::xk[i]);
    resk += gk::wk[i] * fv;
    if (i % 2 == 1) resg += gk::wg[i / 2] * fv;
  }
  resk *= h;
  resg *= h;
  result = resk;
  err = std::abs(resk - resg);
}

inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 double abs_tol, int max_depth = 48) {
  struct Seg {
    double a, b;
    int depth;
  };
  std::vector<Seg> stack{{a, b, 0}};
  double total = 0.0;
  while (!stack.empty()) {
    const Seg s = stack.back();
    stack.pop_back();
    double r, e;
    gk15(f, s.a, s.b, r, e);
    // allocation proportional to segment length, floored at the rounding
    // noise of the segment value itself
    const double tol_seg =
        abs_tol * std::abs((s.b - s.a) / (b - a)) * 2.0 + 1e-14 * std::abs(r);
    if (e < tol_seg || s.depth >= max_depth) {
      total += r;
    } else {
      const double m = 0.5 * (s.a + s.b);
      stack.push_back({s.a, m, s.depth + 1});
      stack.push_back({m, s.b, s.depth + 1});
    }
  }
  return total;
}

// Sobol sequence, up to 8 dimensions, Gray-code construction with an optional
// digital shift (xor scramble) for error estimation.
class Sobol {
 public:
  Sobol(int dim, std::uint32_t shift_seed = 0) : dim_(dim), x_(dim, 0), shift_(dim, 0) {
    if (dim < 1 || dim > 8) throw std::invalid_argument("Sobol: dim must be 1..8");
    static const int s_tab[8] = {0, 1, 2, 3, 3, 4, 4, 5};
    static const int a_tab[8] = {0, 0, 1, 1, 2, 1, 4, 2};
    static const int m_tab[8][5] = {{0},       {1},          {1, 3},       {1, 3, 1},
                                    {1, 1, 1}, {1, 1, 3, 3}, {1, 3, 5, 13}, {1, 1, 5, 5}};
    v_.assign(dim_, std::vector<std::uint32_t>(32, 0));
    for (int j = 0; j < 32; ++j) v_[0][j] = 1u << (31 - j);
    for (int d = 1; d < dim_; ++d) {
      const int s = s_tab[d], a = a_tab[d];
      for (int j = 0; j < s; ++j) v_[d][j] = std::uint32_t(m_tab[d][j]) << (31 - j);
      for (int j = s; j < 32; ++j) {
        std::uint32_t vj = v_[d][j - s] ^ (v_[d][j - s] >> s);
        for (int k = 1; k < s; ++k)
          if ((a >> (s - 1 - k)) & 1) vj ^= v_[d][j - k];
        v_[d][j] = vj;
      }
    }
    if (shift_seed) {
      std::uint64_t z = shift_seed;
      for (int d = 0; d < dim_; ++d) {
        z = z * 6364136223846793005ULL + 1442695040888963407ULL;
        shift_[d] = std::uint32_t(z >> 32);
      }
    }
  }

  // Fills out[0..dim) with the next point in [0,1)^dim.
  void next(double* out) {
    if (count_ > 0) {
      std::uint32_t c = count_;
      int j = 0;
      while (c & 1) {
        c >>= 1;
        ++j;
      }
      for (int d = 0; d < dim_; ++d) x_[d] ^= v_[d][j];
    }
    ++count_;
    for (int d = 0; d < dim_; ++d) out[d] = (x_[d] ^ shift_[d]) * 0x1p-32;
  }

 private:
  int dim_;
  std::uint32_t count_ = 0;
  std::vector<std::uint32_t> x_, shift_;
  std::vector<std::vector<std::uint32_t>> v_;
};

}  // namespace svlab
