#pragma once

#include <string>
#include <vector>

namespace lockin {

/** One estimator-ready row: a contract observed at period t, its t+h
 *  follow-up when available, and the instrument block.
 *
 *  Shares and rates live in [0,1]; g is the market growth factor over the
 *  contract horizon; sigma_prev is the firm's own-contract share one horizon
 *  back, sigma_lag2 the share one period before that (instrument only).
 *  c1..c5 are per-service marginal costs at t; the _lag columns repeat
 *  services 1, 3 and 4 one horizon back. tport counts 100-day units until
 *  the expected portability date; dport flags implemented portability
 *  (tport and dport at t+h and t+2h carry their own suffixes). */
struct Observation {
    long long id = 0;

    double price = 0.0;
    double c_norm = 0.0;
    double y = 0.0;
    double g = 1.0;
    double retain = 0.0;
    double steal = 0.0;
    double sigma_prev = 0.0;

    double vremot = 0.0, dremot = 0.0, iremot = 0.0;
    double tfrac = 0.0;
    double duration = 3.0;  // h_i, years
    double tport = 0.0;
    double dport = 0.0;

    bool has_forward = false;
    double price_fwd = 0.0;
    double c_norm_fwd = 0.0;
    double y_fwd = 0.0;
    double g_fwd = 1.0;
    double tport_fwd = 0.0, dport_fwd = 0.0;
    double tport_fwd2 = 0.0, dport_fwd2 = 0.0;

    double c1 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
    double c1_lag = 0.0, c3_lag = 0.0, c4_lag = 0.0;
    double sigma_lag2 = 0.0;
};

/** Throws std::invalid_argument naming the row id and field on any
 *  invariant breach (shares/rates outside [0,1], g <= 0, negative tport,
 *  dport outside {0,1}, tport*dport != 0, duration outside [3,5]). */
void validate(const Observation& o);
void validate_dataset(const std::vector<Observation>& data);

/** CSV with the documented 32-column order (see dataset.cpp kHeader),
 *  numbers at 17 significant digits. read_observations validates every row
 *  and reports failures with 1-based line numbers. */
std::string observations_csv(const std::vector<Observation>& data);
void write_observations(const std::vector<Observation>& data, const std::string& path);
std::vector<Observation> read_observations(const std::string& path);

}  // namespace lockin
