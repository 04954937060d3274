#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace lockin {

/** Primitives of the infinite-horizon duopoly on the unit line.
 *
 * Each period a unit mass of new consumers arrives uniformly on [0,1] with
 * the firms at the endpoints. Old consumers exit with probability rho; the
 * survivors redraw their location with probability mu and keep their old
 * attachment otherwise. A survivor who changes provider pays the switching
 * cost s. delta_C discounts consumers, delta_F firms, c is the common
 * marginal cost, and r is the gross valuation of one period of service.
 * When r is unset, accepted equilibria get r = steady-state price + s + 2,
 * which covers the market with slack (the consumer at distance 1 keeps
 * surplus s + 1).
 */
struct ModelParams {
    double delta_C = 0.5;
    double delta_F = 0.5;
    double rho = 0.2;
    double mu = 0.5;
    double s = 0.5;
    double c = 0.0;
    std::optional<double> r;
};

/** Throws std::invalid_argument when a field is outside its domain. */
void validate(const ModelParams& p);

/** Markov pricing rule P(sigma) = d + e * sigma in own lagged share. */
struct PolicyCoefficients {
    double d = 0.0, e = 0.0;
};

/** Firm value pi(sigma) = k + l * sigma + m * sigma^2. */
struct ValueCoefficients {
    double k = 0.0, l = 0.0, m = 0.0;
};

/** Young-cohort demand slope b, and the share transition
 *  sigma' = eta - theta * sigma induced by the linear policies. */
struct DynamicsCoefficients {
    double b = 0.0, eta = 0.0, theta = 0.0;
};

struct Equilibrium {
    ModelParams params;
    PolicyCoefficients policy;
    ValueCoefficients value;
    DynamicsCoefficients dyn;
    double r = 0.0;  // effective valuation (params.r or the default above)
};

double price_at(const Equilibrium& eq, double sigma);
double value_at(const Equilibrium& eq, double sigma);
double next_share(const Equilibrium& eq, double sigma);

/** b from the anticipated next-period slope e, then eta = 1/2 + b e and
 *  theta = 2 b e. eta and theta are built from the same b*e product so that
 *  eta - theta/2 == 1/2 holds exactly in floating point. */
DynamicsCoefficients dynamics_from_slope(const ModelParams& p, double e);

struct Cutoffs {
    double x_A;   // young consumers on [0, x_A] buy from firm A
    double x_AB;  // relocated old A-customers at positions <= x_AB stay with A
    double x_BA;  // relocated old B-customers at positions < x_BA switch to A
};

/** Cutoffs at arbitrary prices (x_A uses the equilibrium demand slope b). */
Cutoffs demand_cutoffs(const Equilibrium& eq, double P_A, double P_B);

/** Cutoffs with both equilibrium prices substituted in, as functions of the
 *  state alone. */
Cutoffs cutoffs_at_share(const Equilibrium& eq, double sigma);

/** Firm A demand at state sigma split into the five cohorts. */
struct CohortDemand {
    Cutoffs cut;
    double young = 0.0;             // x_A
    double relocated_from_A = 0.0;  // mu(1-rho) sigma x_AB
    double relocated_from_B = 0.0;  // mu(1-rho)(1-sigma) x_BA
    double loyal_A = 0.0;           // (1-mu)(1-rho) sigma
    double loyal_B = 0.0;           // B loyalists never cross: 0
    bool in_range = true;           // quantities >= 0, cutoffs within [0,1]
    double total() const {
        return young + relocated_from_A + relocated_from_B + loyal_A + loyal_B;
    }
};
CohortDemand cohort_demand(const Equilibrium& eq, double sigma);

/** Residuals of the three value-coefficient equations, each written as
 *  RHS(coefficient matching) minus the coefficient itself; all vanish at a
 *  solved equilibrium. */
struct BellmanResiduals {
    double res_k = 0.0, res_l = 0.0, res_m = 0.0;
};
BellmanResiduals bellman_residuals(const Equilibrium& eq);

struct OptimalityDiagnostics {
    double foc_residual = 0.0;  // derivative of the firm objective at P(sigma)
    double soc_value = 0.0;     // second derivative; negative when concave
};
OptimalityDiagnostics optimality_diagnostics(const Equilibrium& eq, double sigma);

/** Expected lifetime utility of a young consumer at position x in state
 *  sigma who buys now from A (from_A) or from B. The old-age continuation
 *  spells out the relocation integrals and keeps non-relocated consumers
 *  with their provider. */
double young_buy_utility(const Equilibrium& eq, double sigma, double x, bool from_A);

/** Utility of skipping the first purchase and buying old with no
 *  attachment and no switching cost. */
double young_wait_utility(const Equilibrium& eq, double sigma, double x);

struct ValidityReport {
    bool lock_in = false;           // x_BA <= sigma <= x_AB at the steady state
    bool coverage = false;          // r covers price plus a full unit of distance
    bool young_rationality = false; // marginal young consumer buys now
    bool cutoffs_interior = false;  // all three cutoffs within [0,1]
    bool all() const {
        return lock_in && coverage && young_rationality && cutoffs_interior;
    }
};
ValidityReport validity_checks(const Equilibrium& eq);

/** Runtime failure with a stable machine-readable code, e.g.
 *  "degenerate_no_relocation", "complete_lock_in_regime",
 *  "no_stable_equilibrium". */
struct SolveError : std::runtime_error {
    std::string code;
    SolveError(std::string code_, const std::string& msg)
        : std::runtime_error(msg), code(std::move(code_)) {}
};

}  // namespace lockin
