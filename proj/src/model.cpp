#include "lockin/model.hpp"

#include <algorithm>
#include <cmath>

namespace lockin {

void validate(const ModelParams& p) {
    auto bad = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (!(p.delta_C >= 0.0 && p.delta_C < 1.0)) bad("delta_C must lie in [0,1)");
    if (!(p.delta_F >= 0.0 && p.delta_F < 1.0)) bad("delta_F must lie in [0,1)");
    if (!(p.rho >= 0.0 && p.rho <= 1.0)) bad("rho must lie in [0,1]");
    if (!(p.mu >= 0.0 && p.mu <= 1.0)) bad("mu must lie in [0,1]");
    if (!(p.s >= 0.0)) bad("s must be nonnegative");
    if (!std::isfinite(p.c)) bad("c must be finite");
    if (p.r && !std::isfinite(*p.r)) bad("r must be finite");
}

double price_at(const Equilibrium& eq, double sigma) {
    return eq.policy.d + eq.policy.e * sigma;
}

double value_at(const Equilibrium& eq, double sigma) {
    return eq.value.k + eq.value.l * sigma + eq.value.m * sigma * sigma;
}

double next_share(const Equilibrium& eq, double sigma) {
    return eq.dyn.eta - eq.dyn.theta * sigma;
}

DynamicsCoefficients dynamics_from_slope(const ModelParams& p, double e) {
    double a = p.delta_C * (1.0 - p.rho);
    double b = 1.0 / (2.0 * (1.0 + a * (1.0 - p.mu + p.mu * p.s * e +
                                        (1.0 - p.mu) * e)));
    double be = b * e;
    return {b, 0.5 + be, 2.0 * be};
}

Cutoffs demand_cutoffs(const Equilibrium& eq, double P_A, double P_B) {
    double gap = P_B - P_A;
    return {0.5 + eq.dyn.b * gap, (gap + 1.0 + eq.params.s) / 2.0,
            (gap + 1.0 - eq.params.s) / 2.0};
}

Cutoffs cutoffs_at_share(const Equilibrium& eq, double sigma) {
    // the rival's state is 1 - sigma, so P_B - P_A = e (1 - 2 sigma)
    double gap = eq.policy.e * (1.0 - 2.0 * sigma);
    return {next_share(eq, sigma), (1.0 + eq.params.s + gap) / 2.0,
            (1.0 - eq.params.s + gap) / 2.0};
}

CohortDemand cohort_demand(const Equilibrium& eq, double sigma) {
    const ModelParams& p = eq.params;
    double M = p.mu * (1.0 - p.rho);
    double N = (1.0 - p.mu) * (1.0 - p.rho);
    CohortDemand out;
    out.cut = cutoffs_at_share(eq, sigma);
    out.young = out.cut.x_A;
    out.relocated_from_A = M * sigma * out.cut.x_AB;
    out.relocated_from_B = M * (1.0 - sigma) * out.cut.x_BA;
    out.loyal_A = N * sigma;
    out.loyal_B = 0.0;
    auto in01 = [](double v) { return v >= -1e-12 && v <= 1.0 + 1e-12; };
    out.in_range = in01(out.cut.x_A) && in01(out.cut.x_AB) && in01(out.cut.x_BA) &&
                   out.young >= -1e-12 && out.relocated_from_A >= -1e-12 &&
                   out.relocated_from_B >= -1e-12 && out.loyal_A >= -1e-12;
    return out;
}

namespace {

// shared pieces of the per-period profit (d - c + e sigma)(Q0 + Q1 sigma)
struct ProfitPieces {
    double M, N, Q0, Q1;
};

ProfitPieces profit_pieces(const Equilibrium& eq) {
    const ModelParams& p = eq.params;
    double M = p.mu * (1.0 - p.rho);
    double N = (1.0 - p.mu) * (1.0 - p.rho);
    double e = eq.policy.e;
    double Q0 = eq.dyn.eta + M * (1.0 - p.s + e) / 2.0;
    double Q1 = -eq.dyn.theta + M * (p.s - e) + N;
    return {M, N, Q0, Q1};
}

}  // namespace

BellmanResiduals bellman_residuals(const Equilibrium& eq) {
    const ModelParams& p = eq.params;
    auto [M, N, Q0, Q1] = profit_pieces(eq);
    double dF = p.delta_F;
    double phi = eq.policy.d - p.c;
    double e = eq.policy.e;
    double k = eq.value.k, l = eq.value.l, m = eq.value.m;
    double eta = eq.dyn.eta, theta = eq.dyn.theta;
    BellmanResiduals out;
    out.res_k = phi * Q0 + dF * (k + l * eta + m * eta * eta) - k;
    out.res_l = phi * Q1 + e * Q0 - dF * theta * (l + 2.0 * m * eta) - l;
    out.res_m = e * Q1 + dF * m * theta * theta - m;
    return out;
}

OptimalityDiagnostics optimality_diagnostics(const Equilibrium& eq, double sigma) {
    const ModelParams& p = eq.params;
    auto [M, N, Q0, Q1] = profit_pieces(eq);
    double b = eq.dyn.b;
    double xa = next_share(eq, sigma);
    OptimalityDiagnostics out;
    out.foc_residual = (price_at(eq, sigma) - p.c) * (-b - M / 2.0) + Q0 +
                       Q1 * sigma -
                       p.delta_F * b * (eq.value.l + 2.0 * eq.value.m * xa);
    out.soc_value = 2.0 * (-b - M / 2.0) + 2.0 * p.delta_F * eq.value.m * b * b;
    return out;
}

namespace {

// next-period prices when today's state is sigma
struct NextPrices {
    double pa, pb, x_ab, x_ba, cut_free;  // cut_free: best-firm cutoff, no s
};

NextPrices next_prices(const Equilibrium& eq, double sigma) {
    double sp = next_share(eq, sigma);
    double pa = price_at(eq, sp);
    double pb = eq.policy.d + eq.policy.e * (1.0 - sp);
    double gap = pb - pa;
    return {pa, pb, (gap + 1.0 + eq.params.s) / 2.0,
            (gap + 1.0 - eq.params.s) / 2.0, (gap + 1.0) / 2.0};
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// expected cost (price + distance + any switching charge) of a relocated old
// consumer attached to A: stays on [0, cut], switches above
double relocated_cost_from_A(double pa, double pb, double s, double cut_raw) {
    double cut = clamp01(cut_raw);
    double stay = pa * cut + cut * cut / 2.0;
    double leave = (pb + s) * (1.0 - cut) + (1.0 - cut) * (1.0 - cut) / 2.0;
    return stay + leave;
}

}  // namespace

double young_buy_utility(const Equilibrium& eq, double sigma, double x, bool from_A) {
    const ModelParams& p = eq.params;
    NextPrices np = next_prices(eq, sigma);
    double surv = p.delta_C * (1.0 - p.rho);
    double price_now = from_A ? price_at(eq, sigma)
                              : eq.policy.d + eq.policy.e * (1.0 - sigma);
    double dist_now = from_A ? x : 1.0 - x;
    double reloc_cost =
        from_A ? relocated_cost_from_A(np.pa, np.pb, p.s, np.x_ab)
               // mirror image: attached to B, switching to A costs s
               : relocated_cost_from_A(np.pb, np.pa, p.s, 1.0 - np.x_ba);
    double stay_cost = from_A ? np.pa + x : np.pb + (1.0 - x);
    return eq.r - price_now - dist_now +
           surv * (eq.r - p.mu * reloc_cost - (1.0 - p.mu) * stay_cost);
}

double young_wait_utility(const Equilibrium& eq, double sigma, double x) {
    const ModelParams& p = eq.params;
    NextPrices np = next_prices(eq, sigma);
    double surv = p.delta_C * (1.0 - p.rho);
    double cut = clamp01(np.cut_free);
    double reloc_cost = np.pa * cut + cut * cut / 2.0 + np.pb * (1.0 - cut) +
                        (1.0 - cut) * (1.0 - cut) / 2.0;
    double stay_cost = std::min(np.pa + x, np.pb + 1.0 - x);
    return surv * (eq.r - p.mu * reloc_cost - (1.0 - p.mu) * stay_cost);
}

ValidityReport validity_checks(const Equilibrium& eq) {
    const double sigma = 0.5;  // every accepted path settles here
    Cutoffs cut = cutoffs_at_share(eq, sigma);
    ValidityReport out;
    const double tol = 1e-12;
    out.lock_in = cut.x_BA <= sigma + tol && sigma <= cut.x_AB + tol;
    out.cutoffs_interior = cut.x_A >= -tol && cut.x_A <= 1.0 + tol &&
                           cut.x_AB >= -tol && cut.x_AB <= 1.0 + tol &&
                           cut.x_BA >= -tol && cut.x_BA <= 1.0 + tol;
    out.coverage = eq.r >= price_at(eq, sigma) + 1.0 - tol;
    double xa = cut.x_A;
    double buy = young_buy_utility(eq, sigma, xa, true);
    out.young_rationality =
        buy >= young_wait_utility(eq, sigma, xa) - tol && buy >= -tol;
    return out;
}

}  // namespace lockin
