#include "lockin/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace lockin {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_double(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("empty numeric field");
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw std::invalid_argument("bad numeric field: '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') { out.push_back(cur); cur.clear(); }
        else if (ch != '\r') cur.push_back(ch);
    }
    out.push_back(cur);
    return out;
}

Date parse_date(const std::string& iso) {
    int y, m, d;
    char dash1, dash2;
    std::istringstream ss(iso);
    if (!(ss >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-' ||
        !ss.eof())
        throw std::invalid_argument("bad date: '" + iso + "' (want YYYY-MM-DD)");
    Date out{std::chrono::year{y}, std::chrono::month{unsigned(m)},
             std::chrono::day{unsigned(d)}};
    if (!out.ok()) throw std::invalid_argument("invalid calendar date: '" + iso + "'");
    return out;
}

std::string date_to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()),
                  unsigned(d.month()), unsigned(d.day()));
    return buf;
}

long days_between(const Date& from, const Date& to) {
    using std::chrono::sys_days;
    return (sys_days(to) - sys_days(from)).count();
}

Date add_months_clamped(const Date& d, int months) {
    auto ym = d.year() / d.month() + std::chrono::months{months};
    Date out{ym.year(), ym.month(), d.day()};
    if (!out.ok()) out = ym.year() / ym.month() / std::chrono::last;
    return out;
}

Date add_years(const Date& d, int years) {
    Date out{d.year() + std::chrono::years{years}, d.month(), d.day()};
    if (!out.ok()) out = out.year() / out.month() / std::chrono::last;  // Feb 29
    return out;
}

bool date_less(const Date& a, const Date& b) {
    return std::chrono::sys_days(a) < std::chrono::sys_days(b);
}

static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    // mix the pair so per-record streams are independent of iteration order
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x);
    x = stream ^ 0x6a09e667f3bcc909ULL;
    std::uint64_t b = splitmix64(x);
    state = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

std::uint64_t Rng::next_u64() { return splitmix64(state); }

double Rng::uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    // Box-Muller; discard the second variate to keep call sites simple
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

int Rng::pick(const std::vector<double>& cumulative_weights) {
    double u = uniform() * cumulative_weights.back();
    for (std::size_t i = 0; i < cumulative_weights.size(); ++i)
        if (u < cumulative_weights[i]) return int(i);
    return int(cumulative_weights.size()) - 1;
}

}  // namespace lockin
