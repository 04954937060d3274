#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lockin {

/** Format a double with 17 significant digits, enough for exact
 *  binary64 round-trips through text. */
std::string fmt17(double x);

/** Strict parse of a whole string as double; throws std::invalid_argument
 *  with the offending text otherwise. */
double parse_double(const std::string& s);

/** Split one CSV line on commas. No quoting: none of the file formats here
 *  carry embedded commas. */
std::vector<std::string> split_csv_line(const std::string& line);

using Date = std::chrono::year_month_day;

Date parse_date(const std::string& iso);            // "YYYY-MM-DD"
std::string date_to_string(const Date& d);
long days_between(const Date& from, const Date& to); // to - from in days
Date add_months_clamped(const Date& d, int months);  // clamps to end of month
Date add_years(const Date& d, int years);
bool date_less(const Date& a, const Date& b);

/** Deterministic RNG used everywhere randomness is needed. splitmix64 keeps
 *  streams bit-stable across compilers and library versions, and lets a
 *  (seed, index) pair address an independent stream per record. */
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);
    double normal();                        // Box-Muller, one value per call
    int pick(const std::vector<double>& cumulative_weights);
};

}  // namespace lockin
