#include "symts/optimizer.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "symts/error.hpp"
#include "symts/reward.hpp"

namespace symts {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGolden = 0.3819660112501051;  // 2 - phi
constexpr double kZeps = 1e-12;
constexpr int kMaxDoublings = 50;
constexpr int kMaxBrentIters = 100;

double sanitize(double v) noexcept { return std::isfinite(v) ? v : kInf; }

struct Counted {
  const std::function<double(double)>& g;
  std::size_t evaluations = 0;
  double operator()(double x) {
    ++evaluations;
    return sanitize(g(x));
  }
};

// Brent's method on the bracket (lo, mid, hi) with f(mid) <= f(lo), f(hi).
LineMinimum brent(Counted& g, double lo, double mid, double hi, double fmid, double tol) {
  double a = std::min(lo, hi);
  double b = std::max(lo, hi);
  double x = mid;
  double w = mid;
  double v = mid;
  double fx = fmid;
  double fw = fmid;
  double fv = fmid;
  double d = 0.0;
  double e = 0.0;
  for (int iter = 0; iter < kMaxBrentIters; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + kZeps;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool golden = true;
    if (std::abs(e) > tol1 && std::isfinite(fx) && std::isfinite(fw) && std::isfinite(fv)) {
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
    const double fu = g(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, 0};
}

}  // namespace

void OptimizerConfig::validate() const {
  if (max_outer_iters < 1) throw Error(ErrorKind::Configuration, "max_outer_iters must be >= 1");
  if (!(f_tol > 0.0)) throw Error(ErrorKind::Configuration, "f_tol must be positive");
  if (!(line_search_tol > 0.0)) {
    throw Error(ErrorKind::Configuration, "line_search_tol must be positive");
  }
  if (n_restarts < 0) throw Error(ErrorKind::Configuration, "n_restarts must be >= 0");
  if (!(init_scale > 0.0)) throw Error(ErrorKind::Configuration, "init_scale must be positive");
}

LineMinimum line_minimize(const std::function<double(double)>& fn, double hint, double tol) {
  Counted g{fn};
  const double f0 = g(0.0);
  auto finish = [&](LineMinimum m) {
    m.evaluations = g.evaluations;
    if (!(m.value < f0)) return LineMinimum{0.0, f0, g.evaluations};
    return m;
  };
  if (!std::isfinite(f0)) return finish({0.0, f0, 0});

  const double h = (hint != 0.0 && std::isfinite(hint)) ? std::abs(hint) : 1.0;
  double a = 0.0;
  double fa = f0;
  double b = h;
  double fb = g(b);
  if (fb > fa) {
    const double fneg = g(-h);
    if (fneg >= fa) return finish(brent(g, -h, 0.0, h, f0, tol));
    b = -h;
    fb = fneg;
  }
  // Walk downhill, doubling the distance from the origin each time.
  for (int i = 0; i < kMaxDoublings; ++i) {
    const double c = 2.0 * b;
    const double fc = g(c);
    if (fc > fb) return finish(brent(g, a, b, c, fb, tol));
    a = b;
    fa = fb;
    b = c;
    fb = fc;
  }
  return finish({0.0, f0, 0});
}

MinimizeResult powell_minimize(const Objective& objective, std::vector<double> x0,
                               const OptimizerConfig& cfg) {
  const std::size_t n = x0.size();
  if (n == 0) throw Error(ErrorKind::EmptyProblem, "cannot minimize over zero dimensions");

  MinimizeResult result;
  auto f = [&](std::span<const double> x) {
    ++result.evaluations;
    return sanitize(objective(x));
  };

  std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) dirs[i][i] = 1.0;

  std::vector<double> x = std::move(x0);
  std::vector<double> scratch(n);
  double fret = f(x);

  // Minimizes along `dir` from x, moving x and updating fret in place.
  auto line_search = [&](const std::vector<double>& dir) {
    auto along = [&](double alpha) {
      for (std::size_t j = 0; j < n; ++j) scratch[j] = x[j] + alpha * dir[j];
      return f(scratch);
    };
    const LineMinimum m = line_minimize(along, 1.0, cfg.line_search_tol);
    if (m.step != 0.0 && m.value < fret) {
      for (std::size_t j = 0; j < n; ++j) x[j] += m.step * dir[j];
      fret = m.value;
    }
  };

  std::vector<double> pt = x;
  std::vector<double> ptt(n);
  std::vector<double> xit(n);
  int iter = 0;
  while (iter < cfg.max_outer_iters) {
    ++iter;
    const double fp = fret;
    std::size_t ibig = 0;
    double del = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double before = fret;
      line_search(dirs[i]);
      if (before - fret > del) {
        del = before - fret;
        ibig = i;
      }
    }
    if (!std::isfinite(fret)) break;
    if (2.0 * (fp - fret) <= cfg.f_tol * (std::abs(fp) + std::abs(fret)) + 1e-25) break;

    for (std::size_t j = 0; j < n; ++j) {
      ptt[j] = 2.0 * x[j] - pt[j];
      xit[j] = x[j] - pt[j];
      pt[j] = x[j];
    }
    const double fptt = f(ptt);
    if (fptt < fp) {
      const double t = 2.0 * (fp - 2.0 * fret + fptt) * std::pow(fp - fret - del, 2) -
                       del * std::pow(fp - fptt, 2);
      if (t < 0.0) {
        line_search(xit);
        dirs[ibig] = dirs[n - 1];
        dirs[n - 1] = xit;
      }
    }
  }
  result.x = std::move(x);
  result.f = fret;
  result.iterations = iter;
  return result;
}

CoefficientFit fit_coefficients(const ExpressionTree& tree, const TimeSeries& series,
                                const OptimizerConfig& cfg) {
  const std::size_t dim = tree.coefficient_count();
  if (dim == 0) return {{}, total_absolute_error(tree, {}, series)};

  auto ts = series.timestamps();
  auto vs = series.values();
  Objective objective = [&](std::span<const double> c) {
    double err = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      err += std::abs(vs[i] - tree.evaluate(c, ts[i]));
    }
    return std::isfinite(err) ? err : kInf;
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> draw(-cfg.init_scale, cfg.init_scale);

  CoefficientFit best{std::vector<double>(dim, 1.0), kInf};
  for (int start = 0; start <= cfg.n_restarts; ++start) {
    std::vector<double> x0(dim, 1.0);
    if (start > 0) {
      double f_x0 = kInf;
      std::vector<double> candidate(dim);
      for (int s = 0; s < std::max(cfg.screen_samples, 1); ++s) {
        for (double& c : candidate) c = draw(rng);
        const double fc = objective(candidate);
        if (s == 0 || fc < f_x0) {
          f_x0 = fc;
          x0 = candidate;
        }
      }
    }
    MinimizeResult r = powell_minimize(objective, std::move(x0), cfg);
    if (r.f < best.abs_error) best = {std::move(r.x), r.f};
  }
  return best;
}

}  // namespace symts
