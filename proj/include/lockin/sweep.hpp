#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "lockin/solver.hpp"

namespace lockin {

/** Cartesian parameter grid. The default grid crosses
 *  delta_C, delta_F in {0.3, 0.5, 0.7}, rho in {0.0, 0.2, ..., 0.8},
 *  mu in {0.1, ..., 0.9} and s in {0.0, 0.1, ..., 1.0} at c = 0
 *  (3*3*5*9*11 = 4455 points). */
struct GridSpec {
    std::vector<double> delta_C, delta_F, rho, mu, s;
    double c = 0.0;

    static GridSpec default_grid();
    static GridSpec from_json(const nlohmann::json& j);
    static GridSpec load(const std::string& path);

    /** Throws std::invalid_argument on empty lists or values outside the
     *  ModelParams invariants. */
    void validate() const;
    std::size_t size() const;
};

/** One grid point's outcome. Unsolved points keep NaN outputs and carry the
 *  failure code in `error`; they are never dropped from the record list. */
struct SweepRecord {
    double delta_C = 0.0, delta_F = 0.0, rho = 0.0, mu = 0.0, s = 0.0;
    double c = 0.0;
    bool solved = false;
    int stable_count = 0;
    double e = 0.0, theta = 0.0, markup = 0.0;
    bool valid = false;
    std::string error;
};

/** Solves every grid point, lexicographic order (delta_C, delta_F, rho, mu,
 *  s). Workers split the index range; each writes only its own slots, so the
 *  result is identical for any worker count. workers <= 0 picks the hardware
 *  concurrency. */
std::vector<SweepRecord> run_sweep(const GridSpec& grid, int workers = 0);

enum class SweepTrend { increasing, decreasing, non_monotone, incomplete };

std::string to_string(SweepTrend t);

/** Direction of the markup in s over one base combo (all other parameters
 *  fixed). `flat` marks the zero-amplitude sub-case of non_monotone where
 *  every successive difference sits inside the tolerance band. */
struct EffectOfS {
    double delta_C = 0.0, delta_F = 0.0, rho = 0.0, mu = 0.0;
    SweepTrend label = SweepTrend::incomplete;
    bool flat = false;
    double amplitude = 0.0;  // max - min markup over solved s points
    int points = 0;          // solved s points in the combo
};

/** Groups records by (delta_C, delta_F, rho, mu), orders each group by s and
 *  classifies the sign pattern of successive markup differences. Differences
 *  inside [-tol, tol] count as flat; both signs present -> non_monotone; any
 *  unsolved point -> incomplete. tol = 1e-9 sits well below solver residual
 *  noise amplified through the coefficients. */
std::vector<EffectOfS> classify_effect_of_s(const std::vector<SweepRecord>& records,
                                            double tol = 1e-9);

struct PairTally {
    long long decreasing = 0, increasing = 0, flat = 0;
    long long total() const { return decreasing + increasing + flat; }
    double weak_decreasing_share() const;
    double weak_increasing_share() const;
};

/** Adjacent solved pairs differing in exactly one of mu, delta_F, delta_C,
 *  rho (every other parameter equal), tallied by markup direction at the
 *  same tolerance as classify_effect_of_s. */
struct MonotonicityReport {
    PairTally mu, delta_F, delta_C, rho;
};

MonotonicityReport monotonicity_report(const std::vector<SweepRecord>& records,
                                       double tol = 1e-9);

struct LevelFraction {
    double level = 0.0;
    long long decreasing = 0;  // combos classified decreasing at this level
    long long combos = 0;      // all combos at this level
    double fraction() const { return combos ? double(decreasing) / double(combos) : 0.0; }
};

/** Fraction of base combos whose markup falls in s, split by the level of
 *  each remaining parameter. The trend flags check weak monotonicity of the
 *  fraction across levels: falling in delta_C, rising in delta_F, mu and
 *  rho. */
struct RegimeWidthReport {
    std::vector<LevelFraction> delta_C, delta_F, mu, rho;
    bool delta_C_falls = false;
    bool delta_F_rises = false;
    bool mu_rises = false;
    bool rho_rises = false;
};

RegimeWidthReport regime_width_report(const std::vector<EffectOfS>& classes);

enum class ExportFormat { csv, json };

/** Deterministic serialization: fixed column order, 17 significant digits,
 *  records in their run_sweep order. Re-import reproduces the records
 *  exactly (NaN outputs of unsolved points round-trip as NaN). */
std::string to_csv(const std::vector<SweepRecord>& records);
nlohmann::json to_json(const std::vector<SweepRecord>& records);

/** Writes the chosen format to path. Throws std::runtime_error with the
 *  path on I/O failure or when records is empty (no file is created). */
void export_records(const std::vector<SweepRecord>& records, ExportFormat format,
                    const std::string& path);

std::vector<SweepRecord> import_csv(const std::string& path);
std::vector<SweepRecord> import_json(const std::string& path);

/** Full machine-checkable report: coverage, per-combo classification tallies
 *  with first witnesses of each direction, monotonicity tallies and the
 *  per-level falling-markup fractions with their trend flags. */
nlohmann::json sweep_report(const std::vector<SweepRecord>& records,
                            double tol = 1e-9);

}  // namespace lockin
