#include "lockin/optim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace lockin {

double golden_max(const std::function<double(double)>& f, double lo, double hi,
                  int iters) {
    const double phi = 0.6180339887498949;
    double a = lo, d = hi;
    double x1 = d - phi * (d - a), x2 = a + phi * (d - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 > f2) {
            d = x2; x2 = x1; f2 = f1;
            x1 = d - phi * (d - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + phi * (d - a); f2 = f(x2);
        }
    }
    return 0.5 * (x1 + x2);
}

MinimizeResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& x0,
                           const std::vector<double>& scale,
                           int max_evals, double tol_f) {
    const int n = int(x0.size());
    struct Vert { std::vector<double> x; double f; };
    std::vector<Vert> sx(n + 1);
    int evals = 0;
    auto eval = [&](const std::vector<double>& x) { ++evals; return f(x); };
    sx[0] = {x0, eval(x0)};
    for (int i = 0; i < n; ++i) {
        auto x = x0;
        x[i] += scale[i];
        sx[i + 1] = {x, eval(x)};
    }
    auto by_f = [](const Vert& a, const Vert& b) { return a.f < b.f; };
    std::sort(sx.begin(), sx.end(), by_f);
    while (evals < max_evals) {
        if (sx[n].f - sx[0].f < tol_f * (1.0 + std::fabs(sx[0].f)))
            return {sx[0].x, sx[0].f, evals, true};
        std::vector<double> cen(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) cen[j] += sx[i].x[j] / n;
        auto blend = [&](double t) {
            std::vector<double> x(n);
            for (int j = 0; j < n; ++j) x[j] = cen[j] + t * (sx[n].x[j] - cen[j]);
            return x;
        };
        auto xr = blend(-1.0);
        double fr = eval(xr);
        if (fr < sx[0].f) {
            auto xe = blend(-2.0);
            double fe = eval(xe);
            if (fe < fr) sx[n] = {xe, fe}; else sx[n] = {xr, fr};
        } else if (fr < sx[n - 1].f) {
            sx[n] = {xr, fr};
        } else {
            auto xc = blend(fr < sx[n].f ? -0.5 : 0.5);
            double fc = eval(xc);
            if (fc < std::min(fr, sx[n].f)) {
                sx[n] = {xc, fc};
            } else {  // shrink toward the best vertex
                for (int i = 1; i <= n; ++i) {
                    for (int j = 0; j < n; ++j)
                        sx[i].x[j] = sx[0].x[j] + 0.5 * (sx[i].x[j] - sx[0].x[j]);
                    sx[i].f = eval(sx[i].x);
                }
            }
        }
        std::sort(sx.begin(), sx.end(), by_f);
    }
    return {sx[0].x, sx[0].f, evals, false};
}

MinimizeResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& resid,
    const std::vector<double>& x0, int max_iters, double tol_f, double tol_x) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int n = int(x0.size());
    VectorXd x = Eigen::Map<const VectorXd>(x0.data(), n);
    int evals = 0;
    auto call = [&](const VectorXd& xv) {
        std::vector<double> xs(xv.data(), xv.data() + n);
        auto r = resid(xs);
        ++evals;
        return Eigen::Map<const VectorXd>(r.data(), long(r.size())).eval();
    };
    VectorXd r = call(x);
    double f = r.squaredNorm();
    const int m = int(r.size());
    double lambda = 1e-3;
    bool converged = false;
    for (int it = 0; it < max_iters; ++it) {
        MatrixXd J(m, n);
        for (int j = 0; j < n; ++j) {
            double hstep = 1e-7 * std::max(1.0, std::fabs(x[j]));
            VectorXd xp = x;
            xp[j] += hstep;
            J.col(j) = (call(xp) - r) / hstep;
        }
        MatrixXd JtJ = J.transpose() * J;
        VectorXd Jtr = J.transpose() * r;
        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            MatrixXd A = JtJ;
            for (int j = 0; j < n; ++j) A(j, j) += lambda * (JtJ(j, j) + 1e-12);
            VectorXd dx = A.ldlt().solve(-Jtr);
            VectorXd xn = x + dx;
            VectorXd rn = call(xn);
            double fn = rn.squaredNorm();
            if (fn < f) {
                double df = f - fn, dxn = dx.norm();
                x = xn; r = rn; f = fn;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (df < tol_f * (1.0 + f) || dxn < tol_x * (1.0 + x.norm()))
                    converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!stepped || converged) {
            converged = converged || !stepped;
            break;
        }
    }
    return {std::vector<double>(x.data(), x.data() + n), f, evals, converged};
}

}  // namespace lockin
