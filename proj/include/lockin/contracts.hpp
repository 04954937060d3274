#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lockin/dataset.hpp"
#include "lockin/gmm.hpp"
#include "lockin/io.hpp"

namespace lockin {

/** One tariff option as ingested: per-minute prices for the five voice
 *  services (1 dedicated toll, 2-3 switched toll, 4 dedicated toll-free,
 *  5 switched toll-free; 4 and 5 may be absent), the monthly commitment and
 *  fixed fee, the duration, measured/remote port counts, monthly voice-port
 *  and data-line costs, and the three remoteness ratios. Prices are $/min
 *  already net of the volume-discount schedule. */
struct TariffOption {
    std::string id;
    Date effective_date{};
    bool revised = false;
    std::array<std::optional<double>, 5> price{};
    double commitment = 0.0;  // r_i, $/month
    double fee = 0.0;         // F_i, $/month
    double duration = 3.0;    // h_i, years
    double ports_measured = 0.0;
    double ports_remote1 = 0.0;
    double ports_remote2 = 0.0;
    double cost_voice_port = 0.0;  // c_v, $/month
    double cost_data_line = 0.0;   // c_d, $/month
    double vremot = 0.0, dremot = 0.0, iremot = 0.0;
};

/** Throws std::invalid_argument naming the option id on any breach:
 *  commitment > fee >= 0, duration in [3,5], prices positive where present,
 *  port counts and costs nonnegative, remoteness ratios in [0,1]. */
void validate(const TariffOption& t);

/** Marginal-cost model: per-service operational cost plus the dated access
 *  fee, both cents/min, with toll-free services (4, 5) carrying a per-query
 *  surcharge of query_fee / avg_call_minutes once portability is
 *  implemented. */
struct AccessFeeRow {
    Date from{};
    std::array<double, 5> cents_per_min{};
};

struct CostTable {
    std::array<double, 5> operational_cents{};  // per minute
    std::vector<AccessFeeRow> access;           // sorted by date
    double query_fee_cents = 0.61;              // per lookup; LEC range 0.22..1.0
    double avg_call_minutes = 3.6;

    static CostTable defaults();
    static CostTable from_json(const nlohmann::json& j);
    static CostTable load(const std::string& path);
    void validate(bool allow_unusual_query_fee = false) const;

    /** cents/min for each service as of date t. */
    std::array<double, 5> marginal_cents(const Date& t, bool query_surcharge) const;
};

/** Appendix-style weight solver. The port identities give
 *  u2 = u4 = 3.25 u1, u3 = 0.75 u1, u5 = r2, and the measured-port equation
 *  pins u1 = (m + r1)/7.25 (the printed form; the config switch uses the
 *  2w1 + w2 + w4 reading, divisor 8.5). Weights are u normalized to sum 1.
 *  Throws when any count is negative or all are zero. */
struct WeightConfig {
    bool first_equation_as_printed = true;
};
std::array<double, 5> solve_weights(double ports_measured, double ports_remote1,
                                    double ports_remote2, const WeightConfig& cfg = {});

/** Expected-portability schedule: announcement regimes mapping the tariff
 *  date to the expected implementation date, plus the actual implementation
 *  date. Defaults encode the four historical regimes. */
struct PortabilityTimeline {
    Date earliest{};      // dates before this are an error
    Date regime2_from{};  // expectation becomes t + lag_months
    Date regime3_from{};  // fixed expectation expected3
    Date regime4_from{};  // fixed expectation = implemented
    Date expected1{};
    int lag_months = 15;
    Date expected3{};
    Date implemented{};

    static PortabilityTimeline defaults();
};

struct PortabilityVars {
    Date expected{};
    double tport = 0.0;  // max(days until expected, 0)/100
    int dport = 0;       // 1 once implemented
};
PortabilityVars portability_vars(const Date& t,
                                 const PortabilityTimeline& timeline =
                                     PortabilityTimeline::defaults());

struct DerivedContract {
    std::string id;
    Date effective_date{};
    bool revised = false;
    std::array<double, 5> weights{};
    double tfrac = 0.0;      // weights 4 + 5
    double avg_price = 0.0;  // $/min
    double avg_cost = 0.0;   // $/min
    double minutes = 0.0;    // q_i per month
    double c_norm = 0.0;
    double margin = 0.0;     // 1 - c_norm under the price-to-one normalization
    double duration = 0.0;
    double vremot = 0.0, dremot = 0.0, iremot = 0.0;
    PortabilityVars port;
};

/** Weight solve, price/cost aggregation, q = (r - F)/avg_price, then
 *  c_norm = (c_d + c_v + q avg_cost)/r. Scale-consistent: a common factor
 *  on (r, F, c_d, c_v) cancels. Throws on a missing price with positive
 *  weight or q <= 0. */
DerivedContract derive_contract(const TariffOption& t, const CostTable& costs,
                                const PortabilityTimeline& timeline =
                                    PortabilityTimeline::defaults(),
                                const WeightConfig& cfg = {});

/** contracts.csv row order: id, effective_date, revis, p1..p5 (blank for
 *  absent), r_i, F_i, h_i, m, r1, r2, c_v, c_d, vremot, dremot, iremot. */
std::vector<TariffOption> read_tariffs(const std::string& path);
std::string derived_csv(const std::vector<DerivedContract>& rows);

struct MarketRow {
    Date t{};
    double size = 0.0;   // L
    double share = 0.0;  // y
    double retain = 0.0, steal = 0.0;  // NaN when the file leaves them blank
};

struct MarketSeries {
    std::vector<MarketRow> rows;  // sorted by date

    const MarketRow* at_or_before(const Date& t) const;
    /** L(t)/L(t - years); NaN when either endpoint is missing. */
    double growth(const Date& t, int years) const;
};

/** market.csv columns: t, L, y, retain, steal (the last two may be empty).
 *  Malformed rows are reported with 1-based line numbers; invariants
 *  L > 0 and y, retain, steal in [0,1] are enforced. */
MarketSeries load_market_series(const std::string& path);

/** Pre-portability (0.99, 0.02); post (0.95, 0.05). */
std::pair<double, double> default_retention(int dport);

/** Synthetic-data noise and coverage knobs. Noise draws are per-record
 *  streams of the seed, so records are independent of n and of each
 *  other. */
struct SynthOptions {
    double price_noise = 0.0;
    double retention_noise = 0.0;
    double share_noise = 0.0;
    double forward_fraction = 1.0;  // share of rows carrying the t+h block
};

/** Model-consistent generator: covariates match the observed-contract
 *  moments (tfrac mean 0.404, duration mean 3.63, the remoteness mixes),
 *  prices follow the pricing rule, shares follow the aggregate-share
 *  identity, and retention follows its two model equations, so with zero
 *  noise every residual family vanishes identically at `truth`. Market
 *  growth comes from `series` when it covers the drawn dates and from a
 *  documented uniform draw otherwise. Draw combinations that push a latent
 *  share outside [0,1] are redrawn from the record's own stream; a truth
 *  that breaches persistently (inadmissible switching costs, shares) throws
 *  std::invalid_argument. */
std::vector<Observation> synthesize_dataset(const StructuralParams& truth,
                                            const MarketSeries& series, int n,
                                            std::uint64_t seed,
                                            const SynthOptions& opt = {});

}  // namespace lockin
