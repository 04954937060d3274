#pragma once

#include <string>
#include <vector>

#include "lockin/model.hpp"

namespace lockin {

/** m implied by (e, theta) through the quadratic value coefficient:
 *  m = e G / (1 - delta_F theta^2) with G = -theta + mu(1-rho)(s-e)
 *  + (1-mu)(1-rho). Throws SolveError("singular_value_recursion") when the
 *  denominator vanishes. */
double m_from(const ModelParams& p, double e, double theta);

/** Residuals of the two-equation slope system.
 *  R1: pricing-slope optimality with m eliminated, cleared of its
 *      denominator;
 *  R2: consistency of the anticipated transition, theta - 2 b(e) e. */
struct SystemResidual {
    double R1 = 0.0, R2 = 0.0;
};
SystemResidual residual_system(const ModelParams& p, double e, double theta);

struct CandidateRoot {
    double e = 0.0, theta = 0.0;
    double res1 = 0.0, res2 = 0.0;  // back-substituted residuals
    bool stable = false;            // |theta| <= 1
};

/** All real solutions of the slope system. Eliminating e turns the system
 *  into one quartic in theta; its real roots (companion-matrix eigenvalues)
 *  are polished with damped Newton on (R1, R2) and deduped at 1e-8. Audits
 *  that at most six distinct roots survive and that every reported root has
 *  residuals below 1e-10. Requires mu > 0. */
std::vector<CandidateRoot> find_candidates(const ModelParams& p);

/** Completes a root into the full equilibrium: b/eta/theta from e, m from
 *  the quadratic value-coefficient equation, then (d - c, l) from the
 *  linear 2x2 system formed by the price-level optimality condition and
 *  the linear value-coefficient equation, and k from the constant one. */
Equilibrium build_equilibrium(const ModelParams& p, const CandidateRoot& root);

struct CandidateReport {
    CandidateRoot root;
    Equilibrium eq;
    ValidityReport validity;
    double soc_value = 0.0;
    double steady_profit = 0.0;  // pi at sigma = 1/2
    double markup = 0.0;         // d + e/2 - c
    bool viable = false;         // stable, concave and valid
    std::string rejection;       // why not viable (empty when viable)
};

struct SolveReport {
    ModelParams params;
    std::vector<CandidateReport> candidates;
    int stable_count = 0;
    int accepted_index = -1;  // -1 when no viable candidate

    bool ok() const { return accepted_index >= 0; }
    const CandidateReport& accepted() const;
};

/** Solves one parameter point. Among viable candidates the one with the
 *  highest steady-state profit wins; exact ties go to the larger theta.
 *  Never throws for an unsolvable point; inspect ok(). Throws SolveError
 *  for degenerate inputs (mu = 0, s > 1). */
SolveReport solve(const ModelParams& p);

/** solve() that insists on success. */
Equilibrium solve_equilibrium(const ModelParams& p);

double steady_state_markup(const Equilibrium& eq);

struct PathPoint {
    double sigma = 0.0, price = 0.0;
};
std::vector<PathPoint> simulate_path(const Equilibrium& eq, double sigma0,
                                     int periods);

}  // namespace lockin
