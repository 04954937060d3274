#include "lockin/contracts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lockin {

namespace {

[[noreturn]] void bad_option(const std::string& id, const std::string& what) {
    throw std::invalid_argument("tariff option " + id + ": " + what);
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

}  // namespace

void validate(const TariffOption& t) {
    if (t.id.empty()) throw std::invalid_argument("tariff option without id");
    if (!(t.fee >= 0.0)) bad_option(t.id, "fixed fee negative");
    if (!(t.commitment > t.fee)) bad_option(t.id, "commitment must exceed the fee");
    if (!(t.duration >= 3.0 && t.duration <= 5.0))
        bad_option(t.id, "duration outside [3,5]");
    for (int j = 0; j < 5; ++j)
        if (t.price[j] && !(*t.price[j] > 0.0))
            bad_option(t.id, "price " + std::to_string(j + 1) + " not positive");
    if (!t.price[0] || !t.price[1] || !t.price[2])
        bad_option(t.id, "prices 1-3 are required");
    if (t.ports_measured < 0 || t.ports_remote1 < 0 || t.ports_remote2 < 0)
        bad_option(t.id, "negative port count");
    if (t.cost_voice_port < 0 || t.cost_data_line < 0)
        bad_option(t.id, "negative monthly cost");
    for (double x : {t.vremot, t.dremot, t.iremot})
        if (!(x >= 0.0 && x <= 1.0)) bad_option(t.id, "remoteness outside [0,1]");
}

CostTable CostTable::defaults() {
    CostTable c;
    c.operational_cents = {1.30, 1.01, 1.01, 1.29, 1.08};
    AccessFeeRow row;
    row.from = parse_date("1989-01-01");
    row.cents_per_min = {2.41, 3.99, 7.05, 3.56, 7.05};
    c.access = {row};
    c.query_fee_cents = 0.61;
    c.avg_call_minutes = 3.6;
    return c;
}

CostTable CostTable::from_json(const nlohmann::json& j) {
    CostTable c = defaults();
    if (j.contains("operational_cents")) {
        auto v = j.at("operational_cents").get<std::vector<double>>();
        if (v.size() != 5)
            throw std::invalid_argument("cost table: operational_cents needs 5 values");
        std::copy(v.begin(), v.end(), c.operational_cents.begin());
    }
    if (j.contains("access")) {
        c.access.clear();
        for (const auto& rj : j.at("access")) {
            AccessFeeRow row;
            row.from = parse_date(rj.at("from").get<std::string>());
            auto v = rj.at("cents_per_min").get<std::vector<double>>();
            if (v.size() != 5)
                throw std::invalid_argument("cost table: access row needs 5 values");
            std::copy(v.begin(), v.end(), row.cents_per_min.begin());
            c.access.push_back(row);
        }
        std::sort(c.access.begin(), c.access.end(),
                  [](const AccessFeeRow& a, const AccessFeeRow& b) {
                      return date_less(a.from, b.from);
                  });
    }
    c.query_fee_cents = j.value("query_fee_cents", c.query_fee_cents);
    c.avg_call_minutes = j.value("avg_call_minutes", c.avg_call_minutes);
    c.validate(j.value("allow_unusual_query_fee", false));
    return c;
}

CostTable CostTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cost table: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

void CostTable::validate(bool allow_unusual_query_fee) const {
    for (double x : operational_cents)
        if (!(x >= 0.0)) throw std::invalid_argument("cost table: negative cost");
    if (access.empty()) throw std::invalid_argument("cost table: empty access schedule");
    for (const AccessFeeRow& r : access)
        for (double x : r.cents_per_min)
            if (!(x >= 0.0)) throw std::invalid_argument("cost table: negative access fee");
    if (!(avg_call_minutes > 0.0))
        throw std::invalid_argument("cost table: average call length must be positive");
    if (!(query_fee_cents >= 0.0))
        throw std::invalid_argument("cost table: negative query fee");
    if (!allow_unusual_query_fee &&
        (query_fee_cents < 0.22 || query_fee_cents > 1.0))
        throw std::invalid_argument(
            "cost table: query fee outside the 0.22..1.0 cent range "
            "(set allow_unusual_query_fee to override)");
}

std::array<double, 5> CostTable::marginal_cents(const Date& t, bool query_surcharge) const {
    const AccessFeeRow* pick = nullptr;
    for (const AccessFeeRow& r : access)
        if (!date_less(t, r.from)) pick = &r;
    if (!pick)
        throw std::invalid_argument("cost table: no access row on or before " +
                                    date_to_string(t));
    std::array<double, 5> out;
    for (int j = 0; j < 5; ++j) out[j] = operational_cents[j] + pick->cents_per_min[j];
    if (query_surcharge) {
        double per_min = query_fee_cents / avg_call_minutes;
        out[3] += per_min;
        out[4] += per_min;
    }
    return out;
}

std::array<double, 5> solve_weights(double ports_measured, double ports_remote1,
                                    double ports_remote2, const WeightConfig& cfg) {
    if (ports_measured < 0 || ports_remote1 < 0 || ports_remote2 < 0)
        throw std::invalid_argument("solve_weights: negative port count");
    double mr = ports_measured + ports_remote1;
    if (mr <= 0.0 && ports_remote2 <= 0.0)
        throw std::invalid_argument("solve_weights: all port counts zero");
    double u1 = mr / (cfg.first_equation_as_printed ? 7.25 : 8.5);
    std::array<double, 5> u{u1, 3.25 * u1, 0.75 * u1, 3.25 * u1, ports_remote2};
    double sum = 0.0;
    for (double x : u) sum += x;
    for (double& x : u) x /= sum;
    return u;
}

PortabilityTimeline PortabilityTimeline::defaults() {
    PortabilityTimeline t;
    t.earliest = parse_date("1989-03-31");
    t.regime2_from = parse_date("1990-05-22");
    t.regime3_from = parse_date("1991-08-02");
    t.regime4_from = parse_date("1992-11-21");
    t.expected1 = parse_date("1991-06-30");
    t.lag_months = 15;
    t.expected3 = parse_date("1993-03-01");
    t.implemented = parse_date("1993-05-01");
    return t;
}

PortabilityVars portability_vars(const Date& t, const PortabilityTimeline& tl) {
    if (date_less(t, tl.earliest))
        throw std::invalid_argument("portability_vars: no expectation before " +
                                    date_to_string(tl.earliest) + " (got " +
                                    date_to_string(t) + ")");
    PortabilityVars out;
    if (date_less(t, tl.regime2_from))
        out.expected = tl.expected1;
    else if (date_less(t, tl.regime3_from))
        out.expected = add_months_clamped(t, tl.lag_months);
    else if (date_less(t, tl.regime4_from))
        out.expected = tl.expected3;
    else
        out.expected = tl.implemented;
    long days = days_between(t, out.expected);
    out.tport = days > 0 ? double(days) / 100.0 : 0.0;
    out.dport = date_less(t, tl.implemented) ? 0 : 1;
    return out;
}

DerivedContract derive_contract(const TariffOption& t, const CostTable& costs,
                                const PortabilityTimeline& timeline,
                                const WeightConfig& cfg) {
    validate(t);
    DerivedContract d;
    d.id = t.id;
    d.effective_date = t.effective_date;
    d.revised = t.revised;
    d.duration = t.duration;
    d.vremot = t.vremot;
    d.dremot = t.dremot;
    d.iremot = t.iremot;
    d.port = portability_vars(t.effective_date, timeline);
    d.weights = solve_weights(t.ports_measured, t.ports_remote1, t.ports_remote2, cfg);
    d.tfrac = d.weights[3] + d.weights[4];

    auto cents = costs.marginal_cents(t.effective_date, d.port.dport == 1);
    d.avg_price = 0.0;
    d.avg_cost = 0.0;
    for (int j = 0; j < 5; ++j) {
        if (d.weights[j] <= 0.0) continue;
        if (!t.price[j])
            bad_option(t.id, "service " + std::to_string(j + 1) +
                                 " has weight but no price");
        d.avg_price += d.weights[j] * *t.price[j];
        d.avg_cost += d.weights[j] * cents[j] / 100.0;
    }
    if (!(d.avg_price > 0.0)) bad_option(t.id, "average price not positive");
    d.minutes = (t.commitment - t.fee) / d.avg_price;
    if (!(d.minutes > 0.0)) bad_option(t.id, "no variable usage (commitment <= fee)");
    d.c_norm = (t.cost_data_line + t.cost_voice_port + d.minutes * d.avg_cost) /
               t.commitment;
    d.margin = 1.0 - d.c_norm;
    return d;
}

std::vector<TariffOption> read_tariffs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    const std::string header =
        "id,effective_date,revis,p1,p2,p3,p4,p5,r_i,F_i,h_i,m,r1,r2,c_v,c_d,"
        "vremot,dremot,iremot";
    if (!std::getline(in, line) || line != header)
        throw std::runtime_error(path + ": unexpected header");
    std::vector<TariffOption> out;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 19)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 19 columns");
        try {
            TariffOption t;
            t.id = f[0];
            t.effective_date = parse_date(f[1]);
            t.revised = f[2] == "1";
            for (int j = 0; j < 5; ++j)
                if (!f[3 + j].empty()) t.price[j] = parse_double(f[3 + j]);
            t.commitment = parse_double(f[8]);
            t.fee = parse_double(f[9]);
            t.duration = parse_double(f[10]);
            t.ports_measured = parse_double(f[11]);
            t.ports_remote1 = parse_double(f[12]);
            t.ports_remote2 = parse_double(f[13]);
            t.cost_voice_port = parse_double(f[14]);
            t.cost_data_line = parse_double(f[15]);
            t.vremot = parse_double(f[16]);
            t.dremot = parse_double(f[17]);
            t.iremot = parse_double(f[18]);
            validate(t);
            out.push_back(std::move(t));
        } catch (const std::exception& ex) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                                     ex.what());
        }
    }
    return out;
}

std::string derived_csv(const std::vector<DerivedContract>& rows) {
    std::ostringstream out;
    out << "id,effective_date,revis,w1,w2,w3,w4,w5,tfrac,avg_price,avg_cost,"
           "minutes,c_norm,margin,duration,vremot,dremot,iremot,expected_port,"
           "tport,dport\n";
    for (const DerivedContract& d : rows) {
        out << d.id << ',' << date_to_string(d.effective_date) << ','
            << (d.revised ? 1 : 0);
        for (double w : d.weights) out << ',' << fmt17(w);
        out << ',' << fmt17(d.tfrac) << ',' << fmt17(d.avg_price) << ','
            << fmt17(d.avg_cost) << ',' << fmt17(d.minutes) << ',' << fmt17(d.c_norm)
            << ',' << fmt17(d.margin) << ',' << fmt17(d.duration) << ','
            << fmt17(d.vremot) << ',' << fmt17(d.dremot) << ',' << fmt17(d.iremot)
            << ',' << date_to_string(d.port.expected) << ',' << fmt17(d.port.tport)
            << ',' << d.port.dport << '\n';
    }
    return out.str();
}

const MarketRow* MarketSeries::at_or_before(const Date& t) const {
    const MarketRow* pick = nullptr;
    for (const MarketRow& r : rows)
        if (!date_less(t, r.t)) pick = &r;
    return pick;
}

double MarketSeries::growth(const Date& t, int years) const {
    const MarketRow* now = at_or_before(t);
    const MarketRow* then = at_or_before(add_years(t, -years));
    if (!now || !then || now == then) return std::numeric_limits<double>::quiet_NaN();
    return now->size / then->size;
}

MarketSeries load_market_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "t,L,y,retain,steal")
        throw std::runtime_error(path + ": unexpected header");
    MarketSeries out;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 5)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 5 columns");
        try {
            MarketRow r;
            r.t = parse_date(f[0]);
            r.size = parse_double(f[1]);
            r.share = parse_double(f[2]);
            r.retain = f[3].empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : parse_double(f[3]);
            r.steal = f[4].empty() ? std::numeric_limits<double>::quiet_NaN()
                                   : parse_double(f[4]);
            if (!(r.size > 0.0)) throw std::invalid_argument("L not positive");
            if (!(r.share >= 0.0 && r.share <= 1.0))
                throw std::invalid_argument("y outside [0,1]");
            for (double x : {r.retain, r.steal})
                if (!std::isnan(x) && !(x >= 0.0 && x <= 1.0))
                    throw std::invalid_argument("retention outside [0,1]");
            out.rows.push_back(r);
        } catch (const std::exception& ex) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                                     ex.what());
        }
    }
    std::sort(out.rows.begin(), out.rows.end(),
              [](const MarketRow& a, const MarketRow& b) { return date_less(a.t, b.t); });
    return out;
}

std::pair<double, double> default_retention(int dport) {
    return dport ? std::pair<double, double>{0.95, 0.05}
                 : std::pair<double, double>{0.99, 0.02};
}

namespace {

/** Latent-share or rate outside its domain means the structural parameters
 *  cannot generate a consistent dataset. */
void check_range(double x, const char* what, long long id) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument(std::string("synthesize_dataset: ") + what +
                                    " = " + fmt17(x) + " outside [0,1] at record " +
                                    std::to_string(id) +
                                    " (structural parameters inconsistent)");
}

}  // namespace

std::vector<Observation> synthesize_dataset(const StructuralParams& truth,
                                            const MarketSeries& series, int n,
                                            std::uint64_t seed,
                                            const SynthOptions& opt) {
    if (n < 1) throw std::invalid_argument("synthesize_dataset: n must be >= 1");
    if (opt.forward_fraction < 0.0 || opt.forward_fraction > 1.0)
        throw std::invalid_argument("synthesize_dataset: forward_fraction outside [0,1]");
    const double mu = truth.mu(), rho = truth.rho();
    const Date start = parse_date("1989-06-01");
    const long span = days_between(start, parse_date("1993-12-31"));
    // Figure-1-scale mean service costs, dollars/min
    const std::array<double, 5> cbase{0.0371, 0.0500, 0.0806, 0.0485, 0.0813};
    const std::array<double, 5> wref = [] {
        std::array<double, 5> w{1.0, 3.25, 0.75, 0.0, 0.0};
        double tf = 0.404;
        for (int j = 0; j < 3; ++j) w[j] *= (1.0 - tf) / 5.0;
        w[3] = w[4] = tf / 2.0;
        return w;
    }();
    double cref = 0.0;
    for (int j = 0; j < 5; ++j) cref += wref[j] * cbase[j];

    auto make_record = [&](Rng& rng, long long id) {
        Observation o;
        o.id = id;

        Date t(std::chrono::sys_days(start) +
               std::chrono::days(long(rng.uniform() * double(span + 1))));
        int h = rng.pick({0.55, 0.82, 1.0}) + 3;
        o.duration = h;
        o.tfrac = std::min(0.98, std::max(0.02, 0.404 + 0.148 * rng.normal()));
        o.vremot = clamp01(0.168 + 0.10 * rng.normal());
        o.dremot = clamp01(0.636 + 0.15 * rng.normal());
        double u_i = rng.uniform(), u_tail = rng.uniform();
        o.iremot = u_i < 0.8 ? 0.0 : std::min(1.0, -0.026 * std::log(1.0 - u_tail));

        PortabilityVars pv = portability_vars(t);
        PortabilityVars pv1 = portability_vars(add_months_clamped(t, 12 * h));
        PortabilityVars pv2 = portability_vars(add_months_clamped(t, 24 * h));
        o.tport = pv.tport;
        o.dport = pv.dport;
        o.tport_fwd = pv1.tport;
        o.dport_fwd = pv1.dport;
        o.tport_fwd2 = pv2.tport;
        o.dport_fwd2 = pv2.dport;

        std::array<double, 5> c{}, cfwd{};
        for (int j = 0; j < 5; ++j)
            c[j] = cbase[j] * std::max(0.2, 1.0 + 0.2 * rng.normal());
        for (int j = 0; j < 5; ++j)
            cfwd[j] = cbase[j] * std::max(0.2, 1.0 + 0.2 * rng.normal());
        o.c1 = c[0];
        o.c3 = c[2];
        o.c4 = c[3];
        o.c5 = c[4];
        o.c1_lag = c[0] * std::max(0.2, 1.0 + 0.1 * rng.normal());
        o.c3_lag = c[2] * std::max(0.2, 1.0 + 0.1 * rng.normal());
        o.c4_lag = c[3] * std::max(0.2, 1.0 + 0.1 * rng.normal());
        o.sigma_lag2 = rng.uniform(0.3, 0.8);

        std::array<double, 5> w{1.0, 3.25, 0.75, 0.0, 0.0};
        for (int j = 0; j < 3; ++j) w[j] *= (1.0 - o.tfrac) / 5.0;
        w[3] = w[4] = o.tfrac / 2.0;
        double cbar = 0.0, cbar_fwd = 0.0;
        for (int j = 0; j < 5; ++j) {
            cbar += w[j] * c[j];
            cbar_fwd += w[j] * cfwd[j];
        }
        o.c_norm = std::min(0.95, std::max(0.05, 0.56 * cbar / cref));
        o.c_norm_fwd = std::min(0.95, std::max(0.05, 0.56 * cbar_fwd / cref));

        o.sigma_prev = rng.uniform(0.4, 0.9);
        double sigma_fwd = rng.uniform(0.4, 0.9);
        double g_draw = rng.uniform(1.05, 1.45);
        double g_fwd_draw = rng.uniform(1.05, 1.45);
        double g_series = series.growth(t, h);
        double g_fwd_series = series.growth(add_months_clamped(t, 12 * h), h);
        o.g = std::isnan(g_series) ? g_draw : g_series;
        o.g_fwd = std::isnan(g_fwd_series) ? g_fwd_draw : g_fwd_series;

        HorizonWeights hw = horizon_weights(mu, rho, h, truth.delta_C);
        double s_t = switching_cost(truth.alpha, o.dport * o.tfrac, o.vremot,
                                    o.dremot, o.iremot);
        double s_f = switching_cost(truth.alpha, o.dport_fwd * o.tfrac, o.vremot,
                                    o.dremot, o.iremot);
        double s_f2 = switching_cost(truth.alpha, o.dport_fwd2 * o.tfrac, o.vremot,
                                     o.dremot, o.iremot);
        for (double s : {s_t, s_f, s_f2})
            if (!(s > 0.0))
                throw std::invalid_argument(
                    "synthesize_dataset: switching cost not positive at record " +
                    std::to_string(o.id));
        StructuralParams pt = truth;
        pt.h = h;
        double b1 = forward_b(pt, hw, s_f);
        double b2 = forward_b(pt, hw, s_f2);
        double dFh = std::pow(truth.delta_F, h);
        const double e = truth.e, gamma = hw.gamma, varpi = hw.varpi, v = hw.v;

        double price_t = truth.d + e * o.sigma_prev + o.c_norm + truth.beta[0] * h +
                         truth.beta[1] * o.vremot + truth.beta[2] * o.dremot +
                         truth.beta[3] * o.iremot + truth.beta[4] * o.tport +
                         truth.beta[5] * o.tport * o.tfrac;
        double base_fwd = truth.d + o.c_norm_fwd + truth.beta[0] * h +
                          truth.beta[1] * o.vremot + truth.beta[2] * o.dremot +
                          truth.beta[3] * o.iremot + truth.beta[4] * o.tport_fwd +
                          truth.beta[5] * o.tport_fwd * o.tfrac;

        double D2 = 2.0 * e * b1 * dFh;
        double K = -(o.g * b1 + gamma / (2.0 * v)) * (price_t - o.c_norm);
        double fwd_factor = D2 * o.g * (o.g_fwd * b2 + gamma / (2.0 * v));
        K += fwd_factor * (base_fwd - o.c_norm_fwd);
        double L = fwd_factor * e;
        L += o.g;
        K += -D2 * o.g * o.g_fwd * sigma_fwd;
        K += gamma / (2.0 * v) *
             ((e + v) * (1.0 - D2 * o.g) - (s_t - D2 * s_f * o.g));
        K += o.sigma_prev * (gamma / v * (s_t - e) + varpi);
        L += -D2 * o.g * (gamma / v * (s_f - e) + varpi);
        double sigma_t = -K / L;
        check_range(sigma_t, "latent share", o.id);

        o.y = (o.g * sigma_t + o.sigma_prev * (gamma / v * (s_t - e) + varpi) +
               gamma / (2.0 * v) * (e - s_t + v)) /
              o.g;
        o.y_fwd = (o.g_fwd * sigma_fwd + sigma_t * (gamma / v * (s_f - e) + varpi) +
                   gamma / (2.0 * v) * (e - s_f + v)) /
                  o.g_fwd;
        check_range(o.y, "aggregate share", o.id);
        check_range(o.y_fwd, "forward aggregate share", o.id);

        o.retain = gamma / (2.0 * v) * (e * (1.0 - 2.0 * o.sigma_prev) + s_t + v) +
                   varpi;
        o.steal = gamma / (2.0 * v) * (e * (1.0 - 2.0 * o.sigma_prev) - s_t + v);
        check_range(o.retain, "retain", o.id);
        check_range(o.steal, "steal", o.id);

        o.price = price_t;
        o.price_fwd = base_fwd + e * sigma_t;
        o.has_forward = rng.uniform() < opt.forward_fraction;

        if (opt.price_noise > 0.0) {
            o.price += opt.price_noise * rng.normal();
            o.price_fwd += opt.price_noise * rng.normal();
        }
        if (opt.retention_noise > 0.0) {
            o.retain = clamp01(o.retain + opt.retention_noise * rng.normal());
            o.steal = clamp01(o.steal + opt.retention_noise * rng.normal());
        }
        if (opt.share_noise > 0.0) {
            o.y = clamp01(o.y + opt.share_noise * rng.normal());
            o.y_fwd = clamp01(o.y_fwd + opt.share_noise * rng.normal());
        }
        validate(o);
        return o;
    };

    // Some draw combinations put the Euler-consistent latent share outside
    // [0,1] (typically when t + h crosses a portability regime and the
    // forward price jumps). Those records are redrawn from their own stream,
    // so the dataset stays a pure function of (seed, id); a truth that fails
    // persistently is structurally inadmissible and the breach propagates.
    constexpr int kMaxAttempts = 200;
    std::vector<Observation> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rng(seed, std::uint64_t(i) + 1);
        for (int attempt = 0;; ++attempt) {
            try {
                out.push_back(make_record(rng, i + 1));
                break;
            } catch (const std::invalid_argument&) {
                if (attempt + 1 >= kMaxAttempts) throw;
            }
        }
    }
    return out;
}

}  // namespace lockin
