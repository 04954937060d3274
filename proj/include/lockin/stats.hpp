#pragma once

namespace lockin {

/** Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a),
 *  series for x < a+1, Lentz continued fraction otherwise. */
double gamma_q(double a, double x);

/** P(X > x) for X ~ chi-square with df degrees of freedom. */
double chi2_tail(double x, int df);

}  // namespace lockin
