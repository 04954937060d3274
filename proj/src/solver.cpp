#include "lockin/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace lockin {

namespace {

// dense polynomial helpers, ascending coefficients
using Poly = std::vector<double>;

Poly pmul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

Poly padd(Poly a, const Poly& b) {
    if (b.size() > a.size()) a.resize(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += b[i];
    return a;
}

Poly pscale(Poly a, double t) {
    for (double& v : a) v *= t;
    return a;
}

// building blocks shared by the residual system and the eliminant
struct Blocks {
    double A, b0, b1, M, N;
};

Blocks blocks(const ModelParams& p) {
    double A = p.delta_C * (1.0 - p.rho);
    return {A, 1.0 + A * (1.0 - p.mu), A * (p.mu * p.s + 1.0 - p.mu),
            p.mu * (1.0 - p.rho), (1.0 - p.mu) * (1.0 - p.rho)};
}

/** The slope system reduces to a single polynomial in theta: substituting
 *  e(theta) = theta b0 / (1 - theta b1), the exact inverse of
 *  theta = 2 b(e) e, into the quadratic (in e) form of R1 and clearing
 *  (1 - theta b1)^2 leaves a quartic (the degree-5 term cancels). */
Poly theta_eliminant(const ModelParams& p) {
    auto [A, b0, b1, M, N] = blocks(p);
    double dF = p.delta_F;
    Poly D{1.0, 0.0, -dF};          // 1 - dF theta^2
    Poly g0{M * p.s + N, -1.0};     // G at e = 0
    Poly th{0.0, 1.0};
    Poly q2 = padd(pscale(D, 3.0 * M * b1), pscale(th, 2.0 * dF * M));
    Poly q1 = padd(pmul(D, padd(Poly{1.0 + 3.0 * M * b0}, pscale(g0, -2.0 * b1))),
                   pscale(pmul(th, g0), -2.0 * dF));
    Poly q0 = pscale(pmul(D, g0), -2.0 * b0);
    Poly lin{1.0, -b1};             // 1 - b1 theta
    Poly P = padd(padd(pscale(pmul(Poly{0.0, 0.0, 1.0}, q2), b0 * b0),
                       pscale(pmul(th, pmul(lin, q1)), b0)),
                  pmul(pmul(lin, lin), q0));
    return P;
}

std::vector<double> real_roots(Poly p) {
    double scale = 0.0;
    for (double c : p) scale = std::max(scale, std::fabs(c));
    if (scale == 0.0) return {};
    while (p.size() > 1 && std::fabs(p.back()) < 1e-13 * scale) p.pop_back();
    const int n = int(p.size()) - 1;
    if (n < 1) return {};
    if (n == 1) return {-p[0] / p[1]};
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -p[i] / p[n];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        auto z = es.eigenvalues()[i];
        if (std::fabs(z.imag()) < 1e-8 * (1.0 + std::fabs(z.real())))
            out.push_back(z.real());
    }
    return out;
}

}  // namespace

double m_from(const ModelParams& p, double e, double theta) {
    auto [A, b0, b1, M, N] = blocks(p);
    double G = -theta + M * (p.s - e) + N;
    double den = 1.0 - p.delta_F * theta * theta;
    if (std::fabs(den) < 1e-12)
        throw SolveError("singular_value_recursion",
                         "value recursion has no finite quadratic coefficient at "
                         "theta^2 = 1/delta_F");
    return e * G / den;
}

SystemResidual residual_system(const ModelParams& p, double e, double theta) {
    auto [A, b0, b1, M, N] = blocks(p);
    double b = 1.0 / (2.0 * (b0 + b1 * e));
    double G = -theta + M * (p.s - e) + N;
    double m = m_from(p, e, theta);
    SystemResidual out;
    out.R1 = e * (b + M / 2.0) - (G + 2.0 * p.delta_F * m * theta * b);
    out.R2 = theta - 2.0 * b * e;
    return out;
}

namespace {

// damped Newton on (R1, R2) with a forward-difference Jacobian
bool polish_root(const ModelParams& p, double& e, double& th) {
    for (int it = 0; it < 60; ++it) {
        SystemResidual r;
        try {
            r = residual_system(p, e, th);
        } catch (const SolveError&) {
            return false;
        }
        double nr = std::fabs(r.R1) + std::fabs(r.R2);
        if (nr < 1e-13) return true;
        double he = 1e-7 * (1.0 + std::fabs(e)), ht = 1e-7 * (1.0 + std::fabs(th));
        SystemResidual re, rt;
        try {
            re = residual_system(p, e + he, th);
            rt = residual_system(p, e, th + ht);
        } catch (const SolveError&) {
            return false;
        }
        double j11 = (re.R1 - r.R1) / he, j12 = (rt.R1 - r.R1) / ht;
        double j21 = (re.R2 - r.R2) / he, j22 = (rt.R2 - r.R2) / ht;
        double det = j11 * j22 - j12 * j21;
        if (std::fabs(det) < 1e-300) return false;
        double de = -(r.R1 * j22 - j12 * r.R2) / det;
        double dt = -(j11 * r.R2 - r.R1 * j21) / det;
        double step = 1.0;
        for (int half = 0; half < 25; ++half) {
            double en = e + step * de, tn = th + step * dt;
            try {
                SystemResidual rn = residual_system(p, en, tn);
                if (std::fabs(rn.R1) + std::fabs(rn.R2) < nr) {
                    e = en;
                    th = tn;
                    break;
                }
            } catch (const SolveError&) {
            }
            step *= 0.5;
            if (half == 24) return nr < 1e-10;
        }
    }
    SystemResidual r = residual_system(p, e, th);
    return std::fabs(r.R1) + std::fabs(r.R2) < 1e-10;
}

}  // namespace

std::vector<CandidateRoot> find_candidates(const ModelParams& p) {
    validate(p);
    if (p.mu <= 0.0)
        throw SolveError("degenerate_no_relocation",
                         "mu = 0 leaves no relocated consumers; the switching "
                         "margin never binds and the slope system degenerates");
    auto [A, b0, b1, M, N] = blocks(p);
    std::vector<CandidateRoot> out;
    for (double th0 : real_roots(theta_eliminant(p))) {
        double den = 1.0 - th0 * b1;
        if (std::fabs(den) < 1e-12) continue;
        double e = th0 * b0 / den, th = th0;
        if (std::fabs(1.0 - p.delta_F * th * th) < 1e-10) continue;
        if (!polish_root(p, e, th)) continue;
        SystemResidual r = residual_system(p, e, th);
        if (std::fabs(r.R1) > 1e-10 || std::fabs(r.R2) > 1e-10) continue;
        bool dup = false;
        for (const auto& c : out)
            dup = dup || (std::fabs(c.e - e) < 1e-8 && std::fabs(c.theta - th) < 1e-8);
        if (dup) continue;
        out.push_back({e, th, r.R1, r.R2, std::fabs(th) <= 1.0 + 1e-12});
    }
    if (out.size() > 6)
        throw SolveError("root_audit_failed",
                         "more than six distinct slope-system roots");
    return out;
}

Equilibrium build_equilibrium(const ModelParams& p, const CandidateRoot& root) {
    auto [A, b0, b1, M, N] = blocks(p);
    double e = root.e, theta = root.theta, dF = p.delta_F;
    Equilibrium eq;
    eq.params = p;
    eq.policy.e = e;
    eq.dyn = dynamics_from_slope(p, e);
    double b = eq.dyn.b, eta = eq.dyn.eta;
    double m = m_from(p, e, theta);
    double Q0 = eta + M * (1.0 - p.s + e) / 2.0;
    double Q1 = -theta + M * (p.s - e) + N;
    // price level and linear value coefficient solve jointly:
    //   phi (b + M/2) + dF b l = Q0 - 2 dF b m eta          (level optimality)
    //   -phi Q1 + (1 + dF theta) l = e Q0 - 2 dF m eta theta (value matching)
    double a11 = b + M / 2.0, a12 = dF * b;
    double a21 = -Q1, a22 = 1.0 + dF * theta;
    double r1 = Q0 - 2.0 * dF * b * m * eta;
    double r2 = e * Q0 - 2.0 * dF * m * eta * theta;
    double det = a11 * a22 - a12 * a21;
    double phi = (r1 * a22 - a12 * r2) / det;
    double l = (a11 * r2 - r1 * a21) / det;
    double k = (phi * Q0 + dF * (l * eta + m * eta * eta)) / (1.0 - dF);
    eq.policy.d = p.c + phi;
    eq.value = {k, l, m};
    eq.r = p.r ? *p.r : price_at(eq, 0.5) + p.s + 2.0;
    return eq;
}

SolveReport solve(const ModelParams& p) {
    validate(p);
    if (p.s > 1.0 + 1e-12)
        throw SolveError("complete_lock_in_regime",
                         "s > 1 pushes the switching cutoffs outside the city; "
                         "no interior equilibrium exists");
    SolveReport rep;
    rep.params = p;
    for (const CandidateRoot& root : find_candidates(p)) {
        CandidateReport cr;
        cr.root = root;
        cr.eq = build_equilibrium(p, root);
        cr.validity = validity_checks(cr.eq);
        cr.soc_value = optimality_diagnostics(cr.eq, 0.5).soc_value;
        cr.steady_profit = value_at(cr.eq, 0.5);
        cr.markup = steady_state_markup(cr.eq);
        rep.stable_count += root.stable;
        if (!root.stable)
            cr.rejection = "unstable transition";
        else if (cr.soc_value >= 0.0)
            cr.rejection = "objective not concave";
        else if (!cr.validity.all())
            cr.rejection = "validity checks failed";
        cr.viable = cr.rejection.empty();
        rep.candidates.push_back(std::move(cr));
    }
    for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
        const auto& c = rep.candidates[i];
        if (!c.viable) continue;
        if (rep.accepted_index < 0) {
            rep.accepted_index = int(i);
            continue;
        }
        const auto& best = rep.candidates[rep.accepted_index];
        if (c.steady_profit > best.steady_profit + 1e-12 ||
            (std::fabs(c.steady_profit - best.steady_profit) <= 1e-12 &&
             c.root.theta > best.root.theta))
            rep.accepted_index = int(i);
    }
    return rep;
}

const CandidateReport& SolveReport::accepted() const {
    if (accepted_index < 0)
        throw SolveError("no_stable_equilibrium",
                         "no stable valid equilibrium at this parameter point");
    return candidates[accepted_index];
}

Equilibrium solve_equilibrium(const ModelParams& p) { return solve(p).accepted().eq; }

double steady_state_markup(const Equilibrium& eq) {
    return eq.policy.d + eq.policy.e / 2.0 - eq.params.c;
}

std::vector<PathPoint> simulate_path(const Equilibrium& eq, double sigma0,
                                     int periods) {
    if (sigma0 < 0.0 || sigma0 > 1.0)
        throw std::invalid_argument("sigma0 must lie in [0,1]");
    std::vector<PathPoint> out;
    out.reserve(std::size_t(periods) + 1);
    double sigma = sigma0;
    for (int t = 0; t <= periods; ++t) {
        out.push_back({sigma, price_at(eq, sigma)});
        sigma = next_share(eq, sigma);
    }
    return out;
}

}  // namespace lockin
