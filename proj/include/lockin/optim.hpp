#pragma once

#include <functional>
#include <vector>

namespace lockin {

/** Golden-section maximizer on [lo, hi] for unimodal f. */
double golden_max(const std::function<double(double)>& f, double lo, double hi,
                  int iters = 80);

struct MinimizeResult {
    std::vector<double> x;
    double f = 0.0;
    int evals = 0;
    bool converged = false;
};

/** Nelder-Mead minimizer. `scale` sets the initial simplex edge per
 *  coordinate. Stops when the simplex f-spread falls below tol_f or the
 *  eval budget runs out. */
MinimizeResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& x0,
                           const std::vector<double>& scale,
                           int max_evals, double tol_f);

/** Levenberg-Marquardt on a residual vector r(x); minimizes |r|^2 with a
 *  forward-difference Jacobian. Stops on objective decrease < tol_f or
 *  step < tol_x. */
MinimizeResult levenberg_marquardt(
    const std::function<std::vector<double>(const std::vector<double>&)>& resid,
    const std::vector<double>& x0, int max_iters, double tol_f, double tol_x);

}  // namespace lockin
