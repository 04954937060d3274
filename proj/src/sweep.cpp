#include "lockin/sweep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "lockin/io.hpp"

namespace lockin {

GridSpec GridSpec::default_grid() {
    GridSpec g;
    g.delta_C = {0.3, 0.5, 0.7};
    g.delta_F = {0.3, 0.5, 0.7};
    g.rho = {0.0, 0.2, 0.4, 0.6, 0.8};
    g.mu = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    g.s = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    g.c = 0.0;
    return g;
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
    GridSpec g;
    g.delta_C = j.at("delta_C").get<std::vector<double>>();
    g.delta_F = j.at("delta_F").get<std::vector<double>>();
    g.rho = j.at("rho").get<std::vector<double>>();
    g.mu = j.at("mu").get<std::vector<double>>();
    g.s = j.at("s").get<std::vector<double>>();
    g.c = j.value("c", 0.0);
    g.validate();
    return g;
}

GridSpec GridSpec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

void GridSpec::validate() const {
    auto need = [](const std::vector<double>& v, const char* name) {
        if (v.empty())
            throw std::invalid_argument(std::string("grid: empty list for ") + name);
    };
    need(delta_C, "delta_C");
    need(delta_F, "delta_F");
    need(rho, "rho");
    need(mu, "mu");
    need(s, "s");
    for (double dC : delta_C)
        for (double dF : delta_F)
            for (double r : rho)
                for (double m : mu)
                    for (double sv : s) {
                        ModelParams p;
                        p.delta_C = dC;
                        p.delta_F = dF;
                        p.rho = r;
                        p.mu = m;
                        p.s = sv;
                        p.c = c;
                        lockin::validate(p);
                    }
}

std::size_t GridSpec::size() const {
    return delta_C.size() * delta_F.size() * rho.size() * mu.size() * s.size();
}

namespace {

SweepRecord solve_one(const ModelParams& p) {
    SweepRecord rec;
    rec.delta_C = p.delta_C;
    rec.delta_F = p.delta_F;
    rec.rho = p.rho;
    rec.mu = p.mu;
    rec.s = p.s;
    rec.c = p.c;
    rec.e = rec.theta = rec.markup = std::numeric_limits<double>::quiet_NaN();
    try {
        SolveReport rep = solve(p);
        rec.stable_count = rep.stable_count;
        if (rep.ok()) {
            const CandidateReport& acc = rep.accepted();
            rec.solved = true;
            rec.e = acc.root.e;
            rec.theta = acc.root.theta;
            rec.markup = acc.markup;
            rec.valid = acc.validity.all();
        } else {
            rec.error = "no_stable_equilibrium";
        }
    } catch (const SolveError& err) {
        rec.error = err.code;
    }
    return rec;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const GridSpec& grid, int workers) {
    grid.validate();
    std::vector<ModelParams> points;
    points.reserve(grid.size());
    for (double dC : grid.delta_C)
        for (double dF : grid.delta_F)
            for (double r : grid.rho)
                for (double m : grid.mu)
                    for (double sv : grid.s) {
                        ModelParams p;
                        p.delta_C = dC;
                        p.delta_F = dF;
                        p.rho = r;
                        p.mu = m;
                        p.s = sv;
                        p.c = grid.c;
                        points.push_back(p);
                    }

    std::vector<SweepRecord> records(points.size());
    if (workers <= 0) workers = int(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = std::min<int>(workers, int(points.size()));

    if (workers == 1) {
        for (std::size_t i = 0; i < points.size(); ++i) records[i] = solve_one(points[i]);
        return records;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (points.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        std::size_t lo = std::size_t(w) * chunk;
        std::size_t hi = std::min(points.size(), lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) records[i] = solve_one(points[i]);
        });
    }
    for (auto& t : pool) t.join();
    return records;
}

std::string to_string(SweepTrend t) {
    switch (t) {
        case SweepTrend::increasing: return "increasing";
        case SweepTrend::decreasing: return "decreasing";
        case SweepTrend::non_monotone: return "non_monotone";
        case SweepTrend::incomplete: return "incomplete";
    }
    return "?";
}

std::vector<EffectOfS> classify_effect_of_s(const std::vector<SweepRecord>& records,
                                            double tol) {
    using Key = std::array<double, 4>;
    std::map<Key, std::vector<const SweepRecord*>> groups;
    std::vector<Key> order;
    for (const SweepRecord& r : records) {
        Key k{r.delta_C, r.delta_F, r.rho, r.mu};
        auto [it, fresh] = groups.try_emplace(k);
        if (fresh) order.push_back(k);
        it->second.push_back(&r);
    }
    std::vector<EffectOfS> out;
    out.reserve(order.size());
    for (const Key& k : order) {
        auto& g = groups[k];
        std::sort(g.begin(), g.end(),
                  [](const SweepRecord* a, const SweepRecord* b) { return a->s < b->s; });
        EffectOfS c;
        c.delta_C = k[0];
        c.delta_F = k[1];
        c.rho = k[2];
        c.mu = k[3];
        bool complete = true;
        double lo = 0.0, hi = 0.0;
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!g[i]->solved) {
                complete = false;
                continue;
            }
            double mk = g[i]->markup;
            if (c.points == 0) lo = hi = mk;
            lo = std::min(lo, mk);
            hi = std::max(hi, mk);
            ++c.points;
        }
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            if (!g[i]->solved || !g[i + 1]->solved) continue;
            double d = g[i + 1]->markup - g[i]->markup;
            if (d > tol) pos = true;
            if (d < -tol) neg = true;
        }
        c.amplitude = c.points ? hi - lo : 0.0;
        if (!complete)
            c.label = SweepTrend::incomplete;
        else if (pos && neg)
            c.label = SweepTrend::non_monotone;
        else if (pos)
            c.label = SweepTrend::increasing;
        else if (neg)
            c.label = SweepTrend::decreasing;
        else {
            c.label = SweepTrend::non_monotone;
            c.flat = true;
            c.amplitude = 0.0;
        }
        out.push_back(c);
    }
    return out;
}

double PairTally::weak_decreasing_share() const {
    long long n = total();
    return n ? double(decreasing + flat) / double(n) : 0.0;
}

double PairTally::weak_increasing_share() const {
    long long n = total();
    return n ? double(increasing + flat) / double(n) : 0.0;
}

namespace {

/** Tally adjacent solved pairs along one parameter axis, everything else
 *  fixed. `key` drops the moving parameter; `axis` reads it. */
template <typename KeyFn, typename AxisFn>
PairTally tally_axis(const std::vector<SweepRecord>& records, KeyFn key, AxisFn axis,
                     double tol) {
    using Key = std::array<double, 5>;
    std::map<Key, std::vector<const SweepRecord*>> groups;
    for (const SweepRecord& r : records)
        if (r.solved) groups[key(r)].push_back(&r);
    PairTally t;
    for (auto& [k, g] : groups) {
        (void)k;
        std::sort(g.begin(), g.end(), [&](const SweepRecord* a, const SweepRecord* b) {
            return axis(*a) < axis(*b);
        });
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            double d = g[i + 1]->markup - g[i]->markup;
            if (d < -tol)
                ++t.decreasing;
            else if (d > tol)
                ++t.increasing;
            else
                ++t.flat;
        }
    }
    return t;
}

}  // namespace

MonotonicityReport monotonicity_report(const std::vector<SweepRecord>& records,
                                       double tol) {
    MonotonicityReport rep;
    rep.mu = tally_axis(
        records,
        [](const SweepRecord& r) {
            return std::array<double, 5>{r.delta_C, r.delta_F, r.rho, r.s, r.c};
        },
        [](const SweepRecord& r) { return r.mu; }, tol);
    rep.delta_F = tally_axis(
        records,
        [](const SweepRecord& r) {
            return std::array<double, 5>{r.delta_C, r.rho, r.mu, r.s, r.c};
        },
        [](const SweepRecord& r) { return r.delta_F; }, tol);
    rep.delta_C = tally_axis(
        records,
        [](const SweepRecord& r) {
            return std::array<double, 5>{r.delta_F, r.rho, r.mu, r.s, r.c};
        },
        [](const SweepRecord& r) { return r.delta_C; }, tol);
    rep.rho = tally_axis(
        records,
        [](const SweepRecord& r) {
            return std::array<double, 5>{r.delta_C, r.delta_F, r.mu, r.s, r.c};
        },
        [](const SweepRecord& r) { return r.rho; }, tol);
    return rep;
}

namespace {

std::vector<LevelFraction> fractions_along(const std::vector<EffectOfS>& classes,
                                           double EffectOfS::* field) {
    std::map<double, LevelFraction> by_level;
    for (const EffectOfS& c : classes) {
        LevelFraction& f = by_level[c.*field];
        f.level = c.*field;
        ++f.combos;
        if (c.label == SweepTrend::decreasing) ++f.decreasing;
    }
    std::vector<LevelFraction> out;
    out.reserve(by_level.size());
    for (auto& [lv, f] : by_level) {
        (void)lv;
        out.push_back(f);
    }
    return out;
}

bool weakly_monotone(const std::vector<LevelFraction>& f, int sign) {
    for (std::size_t i = 0; i + 1 < f.size(); ++i)
        if (sign * (f[i + 1].fraction() - f[i].fraction()) < -1e-12) return false;
    return true;
}

}  // namespace

RegimeWidthReport regime_width_report(const std::vector<EffectOfS>& classes) {
    RegimeWidthReport rep;
    rep.delta_C = fractions_along(classes, &EffectOfS::delta_C);
    rep.delta_F = fractions_along(classes, &EffectOfS::delta_F);
    rep.mu = fractions_along(classes, &EffectOfS::mu);
    rep.rho = fractions_along(classes, &EffectOfS::rho);
    rep.delta_C_falls = weakly_monotone(rep.delta_C, -1);
    rep.delta_F_rises = weakly_monotone(rep.delta_F, +1);
    rep.mu_rises = weakly_monotone(rep.mu, +1);
    rep.rho_rises = weakly_monotone(rep.rho, +1);
    return rep;
}

namespace {

constexpr const char* kCsvHeader =
    "delta_C,delta_F,rho,mu,s,c,solved,stable_count,e,theta,markup,valid,error";

}  // namespace

std::string to_csv(const std::vector<SweepRecord>& records) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const SweepRecord& r : records) {
        out << fmt17(r.delta_C) << ',' << fmt17(r.delta_F) << ',' << fmt17(r.rho) << ','
            << fmt17(r.mu) << ',' << fmt17(r.s) << ',' << fmt17(r.c) << ','
            << (r.solved ? 1 : 0) << ',' << r.stable_count << ',' << fmt17(r.e) << ','
            << fmt17(r.theta) << ',' << fmt17(r.markup) << ',' << (r.valid ? 1 : 0)
            << ',' << r.error << '\n';
    }
    return out.str();
}

nlohmann::json to_json(const std::vector<SweepRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const SweepRecord& r : records) {
        nlohmann::json j;
        j["delta_C"] = r.delta_C;
        j["delta_F"] = r.delta_F;
        j["rho"] = r.rho;
        j["mu"] = r.mu;
        j["s"] = r.s;
        j["c"] = r.c;
        j["solved"] = r.solved;
        j["stable_count"] = r.stable_count;
        if (std::isnan(r.e)) {
            j["e"] = nullptr;
            j["theta"] = nullptr;
            j["markup"] = nullptr;
        } else {
            j["e"] = r.e;
            j["theta"] = r.theta;
            j["markup"] = r.markup;
        }
        j["valid"] = r.valid;
        j["error"] = r.error;
        arr.push_back(std::move(j));
    }
    return arr;
}

void export_records(const std::vector<SweepRecord>& records, ExportFormat format,
                    const std::string& path) {
    if (records.empty()) throw std::runtime_error("export: no records (" + path + ")");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export: cannot open " + path);
    if (format == ExportFormat::csv)
        out << to_csv(records);
    else
        out << to_json(records).dump(2) << '\n';
    if (!out) throw std::runtime_error("export: write failed on " + path);
}

std::vector<SweepRecord> import_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("import: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("import: empty file " + path);
    if (line != kCsvHeader)
        throw std::runtime_error("import: unexpected header in " + path);
    std::vector<SweepRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 13)
            throw std::runtime_error("import: bad column count in " + path);
        SweepRecord r;
        r.delta_C = parse_double(f[0]);
        r.delta_F = parse_double(f[1]);
        r.rho = parse_double(f[2]);
        r.mu = parse_double(f[3]);
        r.s = parse_double(f[4]);
        r.c = parse_double(f[5]);
        r.solved = f[6] == "1";
        r.stable_count = int(parse_double(f[7]));
        r.e = parse_double(f[8]);
        r.theta = parse_double(f[9]);
        r.markup = parse_double(f[10]);
        r.valid = f[11] == "1";
        r.error = f[12];
        out.push_back(r);
    }
    return out;
}

std::vector<SweepRecord> import_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("import: cannot open " + path);
    nlohmann::json arr;
    in >> arr;
    std::vector<SweepRecord> out;
    out.reserve(arr.size());
    for (const auto& j : arr) {
        SweepRecord r;
        r.delta_C = j.at("delta_C").get<double>();
        r.delta_F = j.at("delta_F").get<double>();
        r.rho = j.at("rho").get<double>();
        r.mu = j.at("mu").get<double>();
        r.s = j.at("s").get<double>();
        r.c = j.at("c").get<double>();
        r.solved = j.at("solved").get<bool>();
        r.stable_count = j.at("stable_count").get<int>();
        auto num = [&](const char* k) {
            return j.at(k).is_null() ? std::numeric_limits<double>::quiet_NaN()
                                     : j.at(k).get<double>();
        };
        r.e = num("e");
        r.theta = num("theta");
        r.markup = num("markup");
        r.valid = j.at("valid").get<bool>();
        r.error = j.at("error").get<std::string>();
        out.push_back(r);
    }
    return out;
}

nlohmann::json sweep_report(const std::vector<SweepRecord>& records, double tol) {
    nlohmann::json rep;
    long long solved = 0, failed = 0, valid = 0;
    for (const SweepRecord& r : records) {
        if (r.solved) {
            ++solved;
            if (r.valid) ++valid;
        } else {
            ++failed;
        }
    }
    rep["coverage"] = {{"points", records.size()},
                       {"solved", solved},
                       {"failed", failed},
                       {"valid", valid}};

    auto classes = classify_effect_of_s(records, tol);
    std::map<std::string, long long> tally;
    long long flat = 0;
    nlohmann::json inc_witness, dec_witness;
    for (const EffectOfS& c : classes) {
        ++tally[to_string(c.label)];
        if (c.flat) ++flat;
        auto combo = nlohmann::json{{"delta_C", c.delta_C},
                                    {"delta_F", c.delta_F},
                                    {"rho", c.rho},
                                    {"mu", c.mu},
                                    {"amplitude", c.amplitude}};
        if (c.label == SweepTrend::increasing && inc_witness.is_null())
            inc_witness = combo;
        if (c.label == SweepTrend::decreasing && dec_witness.is_null())
            dec_witness = combo;
    }
    rep["effect_of_s"] = {{"combos", classes.size()},
                          {"tally", tally},
                          {"flat", flat},
                          {"first_increasing", inc_witness},
                          {"first_decreasing", dec_witness}};

    MonotonicityReport mono = monotonicity_report(records, tol);
    auto tj = [](const PairTally& t) {
        return nlohmann::json{{"decreasing", t.decreasing},
                              {"increasing", t.increasing},
                              {"flat", t.flat},
                              {"weak_decreasing_share", t.weak_decreasing_share()},
                              {"weak_increasing_share", t.weak_increasing_share()}};
    };
    rep["monotonicity"] = {{"mu", tj(mono.mu)},
                           {"delta_F", tj(mono.delta_F)},
                           {"delta_C", tj(mono.delta_C)},
                           {"rho", tj(mono.rho)}};

    RegimeWidthReport rw = regime_width_report(classes);
    auto fj = [](const std::vector<LevelFraction>& fs) {
        nlohmann::json a = nlohmann::json::array();
        for (const LevelFraction& f : fs)
            a.push_back({{"level", f.level},
                         {"decreasing", f.decreasing},
                         {"combos", f.combos},
                         {"fraction", f.fraction()}});
        return a;
    };
    rep["falling_markup_fraction"] = {{"delta_C", fj(rw.delta_C)},
                                      {"delta_F", fj(rw.delta_F)},
                                      {"mu", fj(rw.mu)},
                                      {"rho", fj(rw.rho)},
                                      {"delta_C_falls", rw.delta_C_falls},
                                      {"delta_F_rises", rw.delta_F_rises},
                                      {"mu_rises", rw.mu_rises},
                                      {"rho_rises", rw.rho_rises}};
    return rep;
}

}  // namespace lockin
