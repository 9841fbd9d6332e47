#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace inflab::opt {

/// Open interval (lo, hi) for one parameter. Infinite ends leave that side unconstrained.
struct Bound {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct Options {
  int max_evaluations = 40000;
  int simplex_restarts = 2;
  double simplex_step = 0.1;  // initial simplex edge, relative to each coordinate's scale
  double simplex_ftol = 1e-14;
  double simplex_xtol = 1e-10;
  int bfgs_iterations = 500;
  double gradient_tol = 1e-9;     // on the gradient in transformed coordinates, relative to 1 + |f|
  double fd_relative_step = 1e-6;
};

struct Result {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int evaluations = 0;
};

/// Smooth one-to-one map between the real line and a Bound.
class BoxTransform {
 public:
  explicit BoxTransform(std::vector<Bound> bounds) : bounds_(std::move(bounds)) {}

  [[nodiscard]] Eigen::VectorXd to_box(const Eigen::VectorXd& u) const {
    Eigen::VectorXd x(u.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) x(k) = forward(bounds_[k], u(k));
    return x;
  }

  [[nodiscard]] Eigen::VectorXd to_free(const Eigen::VectorXd& x) const {
    Eigen::VectorXd u(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) u(k) = inverse(bounds_[k], x(k));
    return u;
  }

  [[nodiscard]] bool inside(const Eigen::VectorXd& x) const {
    for (Eigen::Index k = 0; k < x.size(); ++k)
      if (!(x(k) > bounds_[k].lo && x(k) < bounds_[k].hi)) return false;
    return true;
  }

 private:
  static double forward(const Bound& b, double u) {
    const bool has_lo = std::isfinite(b.lo), has_hi = std::isfinite(b.hi);
    if (has_lo && has_hi) return b.lo + (b.hi - b.lo) / (1.0 + std::exp(-u));
    if (has_lo) return b.lo + std::exp(u);
    if (has_hi) return b.hi - std::exp(-u);
    return u;
  }
  static double inverse(const Bound& b, double x) {
    const bool has_lo = std::isfinite(b.lo), has_hi = std::isfinite(b.hi);
    if (has_lo && has_hi) {
      const double s = (x - b.lo) / (b.hi - b.lo);
      return std::log(s / (1.0 - s));
    }
    if (has_lo) return std::log(x - b.lo);
    if (has_hi) return -std::log(b.hi - x);
    return x;
  }

  std::vector<Bound> bounds_;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

namespace detail {

inline double safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); }

/// Nelder-Mead with standard coefficients (1, 2, 0.5, 0.5).
inline Result nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                          const Options& opt, int budget) {
  const auto n = x0.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> fv(static_cast<std::size_t>(n + 1));
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    return safe(f(x));
  };
  fv[0] = eval(x0);
  for (Eigen::Index k = 0; k < n; ++k) {
    pts[k + 1](k) += step(k);
    fv[k + 1] = eval(pts[k + 1]);
  }
  std::vector<std::size_t> idx(pts.size());
  bool converged = false;
  while (evals < budget) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const auto best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];

    double xspread = 0.0;
    for (const auto& p : pts) xspread = std::max(xspread, (p - pts[best]).cwiseAbs().maxCoeff());
    if (std::fabs(fv[worst] - fv[best]) <= opt.simplex_ftol * (std::fabs(fv[best]) + 1e-300) + 1e-300 &&
        xspread <= opt.simplex_xtol * (1.0 + pts[best].cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
    if (xspread <= 1e-15 * (1.0 + pts[best].cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (auto i : idx)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        fv[worst] = fe;
      } else {
        pts[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      pts[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                   : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
      } else {
        for (auto i : idx) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          fv[i] = eval(pts[i]);
        }
      }
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {pts[best], fv[best], converged, evals};
}

inline Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double rel, int& evals) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel * std::max(1.0, std::fabs(x(k)));
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (safe(f(xp)) - safe(f(xm))) / (2.0 * h);
    evals += 2;
  }
  return g;
}

/// BFGS with backtracking Armijo line search and finite-difference gradients.
inline Result bfgs(const Objective& f, const Eigen::VectorXd& x0, const Options& opt, int budget) {
  const auto n = x0.size();
  int evals = 0;
  Eigen::VectorXd x = x0;
  double fx = safe(f(x));
  ++evals;
  Eigen::VectorXd g = central_gradient(f, x, opt.fd_relative_step, evals);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool converged = false;
  for (int it = 0; it < opt.bfgs_iterations && evals < budget; ++it) {
    if (g.cwiseAbs().maxCoeff() <= opt.gradient_tol * (1.0 + std::fabs(fx))) {
      converged = true;
      break;
    }
    Eigen::VectorXd d = -H * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      H.setIdentity();
      d = -g;
      slope = g.dot(d);
    }
    double step = 1.0, fnew = fx;
    Eigen::VectorXd xnew = x;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xnew = x + step * d;
      fnew = safe(f(xnew));
      ++evals;
      if (fnew <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no descent possible at finite-difference resolution
      converged = std::fabs(slope) <= 1e-10 * (1.0 + std::fabs(fx)) || H.isIdentity();
      if (!H.isIdentity()) {
        H.setIdentity();
        continue;
      }
      break;
    }
    Eigen::VectorXd gnew = central_gradient(f, xnew, opt.fd_relative_step, evals);
    Eigen::VectorXd s = xnew - x, y = gnew - g;
    const double sy = s.dot(y);
    const double fprev = fx;
    x = xnew;
    fx = fnew;
    g = gnew;
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    if (std::fabs(fprev - fx) <= 1e-15 * (std::fabs(fx) + 1e-300) && s.cwiseAbs().maxCoeff() < 1e-12) {
      converged = true;
      break;
    }
  }
  return {x, fx, converged, evals};
}

}  // namespace detail

/// Minimizes f over the box by an unconstrained search in transformed coordinates: Nelder-Mead
/// (restarted from its own optimum) followed by a BFGS polish with central-difference gradients.
/// Non-convergence is reported through the flag, not by throwing.
inline Result minimize(const Objective& f, const Eigen::VectorXd& x0, const std::vector<Bound>& bounds,
                       const Options& opt = {}) {
  if (static_cast<std::size_t>(x0.size()) != bounds.size())
    throw std::invalid_argument("minimize: bounds and start point differ in dimension");
  BoxTransform box(bounds);
  if (!box.inside(x0)) throw std::invalid_argument("minimize: start point outside bounds");
  const double f0 = f(x0);
  if (!std::isfinite(f0)) throw std::domain_error("minimize: objective is not finite at the start point");

  auto g = [&](const Eigen::VectorXd& u) { return f(box.to_box(u)); };
  Eigen::VectorXd u = box.to_free(x0);
  int evals = 1;
  double best = f0;
  bool nm_converged = false;
  for (int round = 0; round <= opt.simplex_restarts; ++round) {
    Eigen::VectorXd step = (opt.simplex_step * u.cwiseAbs().cwiseMax(1.0)).eval();
    auto r = detail::nelder_mead(g, u, step, opt, opt.max_evaluations - evals);
    evals += r.evaluations;
    nm_converged = r.converged;
    if (r.value < best) {
      const double gain = best - r.value;
      u = r.x;
      best = r.value;
      if (gain <= 1e-14 * (std::fabs(best) + 1e-300)) break;
    } else {
      break;
    }
  }
  auto polish = detail::bfgs(g, u, opt, opt.max_evaluations - evals);
  evals += polish.evaluations;
  if (polish.value <= best) {
    u = polish.x;
    best = polish.value;
  }
  Result out;
  out.x = box.to_box(u);
  out.value = best;
  out.evaluations = evals;
  out.converged = (polish.converged || nm_converged) && evals < opt.max_evaluations;
  if (!(best < f0)) {
    // nothing better than the start: keep it exactly
    out.x = x0;
    out.value = f0;
  }
  return out;
}

}  // namespace inflab::opt
