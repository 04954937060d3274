#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "lockin/dataset.hpp"

namespace lockin {

/** Parameters of the estimated pricing/switching system.
 *  alpha drives the switching-cost index, beta the pricing equation,
 *  m_logit/r_logit are the logit transforms of mu and rho, (d, e) the
 *  pricing-rule coefficients. The discount factors and the fallback horizon
 *  h are held fixed during estimation (defaults 0.909 and 1); each
 *  observation's own duration supplies its horizon. */
struct StructuralParams {
    std::array<double, 5> alpha{};
    std::array<double, 6> beta{};
    double m_logit = 0.0;
    double r_logit = 0.0;
    double d = 0.0;
    double e = 0.0;

    double delta_F = 0.909;
    double delta_C = 0.909;
    int h = 1;

    double mu() const;
    double rho() const;
};

constexpr int kParamCount = 15;

/** Free-parameter packing order: alpha1..5, beta1..6, m_logit, r_logit, d,
 *  e. Fixed fields (discounts, h) come from `fixed`. */
std::array<double, kParamCount> pack(const StructuralParams& p);
StructuralParams unpack(const std::array<double, kParamCount>& x,
                        const StructuralParams& fixed);
std::array<std::string, kParamCount> param_names();

/** gamma: share of an h-periods-older cohort that relocated at least once
 *  and survived; varpi: survived without relocating; v: the horizon
 *  discount adjustment (exactly 1 at h = 1). */
struct HorizonWeights {
    double gamma = 0.0, varpi = 0.0, v = 1.0;
};
HorizonWeights horizon_weights(double mu, double rho, int h, double delta_C);

/** s = alpha1 + alpha2 dport*tfrac + alpha3 vremot + alpha4 dremot
 *      + alpha5 iremot. The estimator counts s <= 0 rows instead of
 *  accepting them silently. */
double switching_cost(const std::array<double, 5>& alpha, double dport_tfrac,
                      double vremot, double dremot, double iremot);
double switching_cost(const Observation& o, const std::array<double, 5>& alpha);

/** Pricing rule: d + e sigma_prev + c_norm + beta1 h + beta2 vremot
 *  + beta3 dremot + beta4 iremot + beta5 tport + beta6 tport*tfrac. */
double predicted_price(const Observation& o, const StructuralParams& p);

/** Forward demand slope b = 1/(2(v(1 + delta_C^h varpi)
 *  + e delta_C^h (gamma s_future / v + varpi))). Throws on a vanishing
 *  bracket. */
double forward_b(const StructuralParams& p, const HorizonWeights& hw, double s_future);

/** Inverts the aggregate-share identity
 *  g y = g sigma + sigma_prev (gamma/v (s - e) + varpi)
 *        + gamma/2v (e - s + v)
 *  for the latent new-cohort share sigma. */
double recover_sigma(double y, double g, double s, double sigma_prev,
                     const StructuralParams& p, const HorizonWeights& hw);

/** The four residual families for one observation. euler_ok is false when
 *  the forward block is missing; the euler field is then 0 and the row is
 *  excluded from Euler moments (but counted in diagnostics). sigma and
 *  sigma_fwd are the recovered latent shares, s the period-t switching
 *  cost. */
struct Residuals {
    double pricing = 0.0;
    double euler = 0.0;
    double retain = 0.0;
    double steal = 0.0;
    bool euler_ok = false;
    double sigma = 0.0, sigma_fwd = 0.0;
    double s = 0.0;
};
Residuals residuals(const Observation& o, const StructuralParams& p);

/** Instrument registry. Known names: c1, c3, c4, c5, c1_lag, c3_lag,
 *  c4_lag, sigma_lag2, and id_noise (a deterministic pseudo-random column
 *  keyed on the row id, useful for degrees-of-freedom tests). */
double instrument_value(const Observation& o, const std::string& name);
std::vector<std::string> default_instruments();

/** Moment design: every residual family interacted with a constant plus
 *  each named instrument, so count = 4 * (1 + #instruments); the default
 *  scheme gives 36. */
struct MomentSpec {
    std::vector<std::string> instruments = default_instruments();
    int count() const { return 4 * (1 + int(instruments.size())); }
};

/** Stacked sample moments. Rows are processed in id order and summed in
 *  fixed-size blocks, so the result is identical for any worker count and
 *  any input permutation. Euler-family moments average over euler_ok rows
 *  only; `contributions` is scaled so its column mean equals gbar. */
struct MomentSummary {
    Eigen::VectorXd gbar;
    Eigen::MatrixXd contributions;  // n x count
    long long rows = 0;
    long long euler_rows = 0;
    int negative_s = 0;
    bool instrument_rank_deficient = false;
};
MomentSummary stack_moments(const std::vector<Observation>& data,
                            const StructuralParams& p, const MomentSpec& spec,
                            int workers = 1);

struct SampleMeans {
    double c_norm = 0.0, margin = 0.0, tfrac = 0.0, tport = 0.0, duration = 0.0;
    double vremot = 0.0, dremot = 0.0, iremot = 0.0, sigma_prev = 0.0;
    long long rows = 0;
};
SampleMeans sample_means(const std::vector<Observation>& data);

struct EstimateConfig {
    MomentSpec moments;
    StructuralParams init;       // start 0; also carries the fixed fields
    int starts = 32;             // multi-start budget
    int stop_after_flat = 8;     // early stop: consecutive non-improving starts
    std::uint64_t seed = 424243; // jitter stream
    bool two_step = true;
    double tol_f = 1e-12;
    double tol_x = 1e-9;
    int workers = 1;

    static EstimateConfig from_json(const nlohmann::json& j);
};

struct GMMResult {
    StructuralParams params;
    std::array<double, kParamCount> estimates{};
    std::array<double, kParamCount> std_errors{};
    double J = 0.0;
    int df = 0;
    double p_value = 0.0;
    std::string weight_step;  // "step-1-identity" or "step-2-optimal"
    int starts_used = 0;
    int best_start = -1;
    double objective = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
    long long n = 0;
    long long euler_rows = 0;
    int negative_s = 0;
    bool rank_deficient_G = false;
    bool instrument_rank_deficient = false;
    SampleMeans means;

    nlohmann::json to_json() const;
    static GMMResult from_json(const nlohmann::json& j);
};

/** Typed failure for an exhausted start budget; carries the best attempt. */
struct EstimateError : std::runtime_error {
    GMMResult best;
    EstimateError(const std::string& msg, GMMResult b)
        : std::runtime_error(msg), best(std::move(b)) {}
};

/** Two-step GMM. Step 1 minimizes g'g; step 2 rebuilds the weight from the
 *  inverse moment covariance at the step-1 estimate (ridge lambda =
 *  1e-10 trace/n when near-singular; identity fallback when the covariance
 *  is numerically zero, as on noiseless data). Each start runs Nelder-Mead
 *  then a Levenberg-Marquardt polish on the Cholesky-whitened moments,
 *  twice. s <= 0 rows add a smooth penalty steering the search back to the
 *  admissible region and are reported in negative_s. */
GMMResult estimate(const std::vector<Observation>& data, const EstimateConfig& cfg);

enum class Scenario { steady_state_average, all_contracts_no_transition };

struct CounterfactualReport {
    Scenario scenario = Scenario::steady_state_average;
    double margin_base = 0.0;
    double margin_cf = 0.0;
    double pct_ratio_of_averages = 0.0;  // 100 * (avg cf - avg base)/avg base
    double pct_average_of_ratios = 0.0;  // mean of per-contract pct changes
    long long contracts = 0;

    nlohmann::json to_json() const;
};

/** Immediate-portability substitution tport -> 0, dport -> 1 holding sigma
 *  paths fixed, so each margin moves by -tport (beta5 + beta6 tfrac).
 *  Scenario steady_state_average evaluates the pricing rule at the sample-
 *  mean contract (means from the estimation result); all_contracts_no_
 *  transition averages per-contract changes and needs the dataset. */
CounterfactualReport counterfactual_margins(const StructuralParams& p,
                                            const SampleMeans& means, Scenario scenario,
                                            const std::vector<Observation>* data = nullptr);

/** Percent change between two margins, e.g. (0.429, 0.324) -> -24.5. */
double counterfactual_from_margins(double margin_base, double margin_cf);

/** Price (= margin) response to one 100-day portability delay, relative to
 *  a contract with no toll-free share: beta6 * tfrac. */
double relative_margin_effect_per_100_days(const StructuralParams& p, double tfrac);

}  // namespace lockin
