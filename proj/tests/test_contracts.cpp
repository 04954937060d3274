#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "lockin/contracts.hpp"
#include "lockin/dataset.hpp"

using namespace lockin;

namespace {

TariffOption sample_option() {
    TariffOption t;
    t.id = "opt-1";
    t.effective_date = parse_date("1990-06-01");
    t.price = {0.10, 0.09, 0.12, 0.11, 0.13};
    t.commitment = 100.0;
    t.fee = 13.0;
    t.duration = 3.0;
    t.ports_measured = 6.0;
    t.ports_remote1 = 1.25;
    t.ports_remote2 = 0.75;
    t.cost_voice_port = 4.0;
    t.cost_data_line = 6.0;
    t.vremot = 0.2;
    t.dremot = 0.6;
    t.iremot = 0.0;
    return t;
}

StructuralParams truth_params() {
    StructuralParams p;
    p.alpha = {0.85, 0.05, -0.25, 0.30, -1.0};
    p.beta = {-0.05, 0.1, 0.15, -0.5, -0.187, 0.564};
    p.m_logit = 0.0;
    p.r_logit = -1.386294361;
    p.d = 0.2;
    p.e = 0.347;
    return p;
}

}  // namespace

TEST_CASE("port identities pin the service weights") {
    auto w = solve_weights(6.0, 1.25, 0.75, {});
    CHECK(w[0] == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(3.25 / 9.0).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(0.75 / 9.0).epsilon(1e-12));
    CHECK(w[3] == doctest::Approx(3.25 / 9.0).epsilon(1e-12));
    CHECK(w[4] == doctest::Approx(0.75 / 9.0).epsilon(1e-12));
    double sum = w[0] + w[1] + w[2] + w[3] + w[4];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

    WeightConfig alt;
    alt.first_equation_as_printed = false;
    auto wa = solve_weights(6.0, 1.25, 0.75, alt);
    CHECK(wa[0] == doctest::Approx(0.10953729933899904).epsilon(1e-12));
    CHECK(wa[3] + wa[4] == doctest::Approx(0.45231350330500469).epsilon(1e-12));

    CHECK_THROWS_AS(solve_weights(-1.0, 0.0, 0.0, {}), std::invalid_argument);
    CHECK_THROWS_AS(solve_weights(0.0, 0.0, 0.0, {}), std::invalid_argument);
}

TEST_CASE("tariff option validation names the offending field") {
    TariffOption t = sample_option();
    CHECK_NOTHROW(validate(t));
    t.fee = 120.0;  // commitment must exceed the fee
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    t = sample_option();
    t.duration = 7.0;
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    t = sample_option();
    t.price[0].reset();
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    t = sample_option();
    t.vremot = 1.5;
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
}

TEST_CASE("cost table defaults reproduce the observed service means") {
    CostTable c = CostTable::defaults();
    auto plain = c.marginal_cents(parse_date("1990-01-01"), false);
    CHECK(plain[0] == doctest::Approx(3.71).epsilon(1e-12));
    CHECK(plain[1] == doctest::Approx(5.00).epsilon(1e-12));
    CHECK(plain[2] == doctest::Approx(8.06).epsilon(1e-12));
    CHECK(plain[3] == doctest::Approx(4.85).epsilon(1e-12));
    CHECK(plain[4] == doctest::Approx(8.13).epsilon(1e-12));
    auto taxed = c.marginal_cents(parse_date("1993-06-01"), true);
    CHECK(taxed[0] == plain[0]);  // toll services carry no query fee
    CHECK(taxed[3] == doctest::Approx(4.85 + 0.61 / 3.6).epsilon(1e-12));
    CHECK(taxed[4] == doctest::Approx(8.13 + 0.61 / 3.6).epsilon(1e-12));
}

TEST_CASE("cost table json round trip and validation") {
    CostTable c = CostTable::defaults();
    nlohmann::json j{{"operational_cents", {1.0, 1.0, 1.0, 1.0, 1.0}},
                     {"access",
                      {{{"from", "1989-01-01"}, {"cents_per_min", {1, 2, 3, 4, 5}}},
                       {{"from", "1992-01-01"}, {"cents_per_min", {2, 3, 4, 5, 6}}}}},
                     {"query_fee_cents", 0.30}};
    CostTable parsed = CostTable::from_json(j);
    CHECK(parsed.marginal_cents(parse_date("1991-12-31"), false)[0] ==
          doctest::Approx(2.0));
    CHECK(parsed.marginal_cents(parse_date("1992-01-01"), false)[0] ==
          doctest::Approx(3.0));
    CHECK_THROWS_AS(parsed.marginal_cents(parse_date("1988-01-01"), false),
                    std::invalid_argument);

    c.query_fee_cents = 0.05;  // outside the LEC query-fee range
    CHECK_THROWS_AS(c.validate(false), std::invalid_argument);
    CHECK_NOTHROW(c.validate(true));
}

TEST_CASE("portability schedule regimes") {
    PortabilityVars v = portability_vars(parse_date("1992-11-21"));
    CHECK(v.tport == doctest::Approx(1.61).epsilon(1e-12));
    CHECK(v.dport == 0);
    CHECK(date_to_string(v.expected) == "1993-05-01");

    v = portability_vars(parse_date("1990-06-01"));
    CHECK(v.tport == doctest::Approx(4.57).epsilon(1e-12));
    CHECK(date_to_string(v.expected) == "1991-09-01");

    v = portability_vars(parse_date("1993-06-01"));
    CHECK(v.tport == 0.0);
    CHECK(v.dport == 1);

    v = portability_vars(parse_date("1989-06-01"));
    CHECK(date_to_string(v.expected) == "1991-06-30");
    CHECK(v.dport == 0);

    v = portability_vars(parse_date("1991-09-01"));  // third regime: fixed date
    CHECK(date_to_string(v.expected) == "1993-03-01");

    CHECK_THROWS_AS(portability_vars(parse_date("1989-01-01")), std::invalid_argument);
}

TEST_CASE("contract derivation matches the hand computation") {
    DerivedContract d = derive_contract(sample_option(), CostTable::defaults());
    CHECK(d.tfrac == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
    CHECK(d.avg_price == doctest::Approx(0.10416666666666667).epsilon(1e-12));
    CHECK(d.avg_cost == doctest::Approx(0.053183333333333332).epsilon(1e-12));
    CHECK(d.minutes == doctest::Approx(835.19999999999993).epsilon(1e-12));
    CHECK(d.c_norm == doctest::Approx(0.54418719999999998).epsilon(1e-12));
    CHECK(d.margin == doctest::Approx(0.45581280000000002).epsilon(1e-12));
    CHECK(d.port.dport == 0);

    // after implementation: query surcharge raises the toll-free costs
    TariffOption late = sample_option();
    late.effective_date = parse_date("1993-06-01");
    DerivedContract dl = derive_contract(late, CostTable::defaults());
    CHECK(dl.port.dport == 1);
    CHECK(dl.c_norm == doctest::Approx(0.55047697777777771).epsilon(1e-12));
}

TEST_CASE("derivation is scale-consistent in the money unit") {
    TariffOption t = sample_option();
    DerivedContract base = derive_contract(t, CostTable::defaults());
    t.commitment *= 3.0;
    t.fee *= 3.0;
    t.cost_voice_port *= 3.0;
    t.cost_data_line *= 3.0;
    DerivedContract scaled = derive_contract(t, CostTable::defaults());
    CHECK(scaled.c_norm == doctest::Approx(base.c_norm).epsilon(1e-12));
}

TEST_CASE("tariff csv reader reports the offending line") {
    const char* path = "tariffs_test.csv";
    {
        std::ofstream out(path);
        out << "id,effective_date,revis,p1,p2,p3,p4,p5,r_i,F_i,h_i,m,r1,r2,c_v,c_d,"
               "vremot,dremot,iremot\n";
        out << "opt-1,1990-06-01,0,0.10,0.09,0.12,0.11,0.13,100,13,3,6,1.25,0.75,4,6,"
               "0.2,0.6,0\n";
        out << "opt-2,1991-07-15,1,0.10,0.09,0.12,0.11,,90,10,4,5,1.0,0,3,5,0.1,0.5,0\n";
    }
    auto opts = read_tariffs(path);
    REQUIRE(opts.size() == 2);
    CHECK(opts[0].id == "opt-1");
    CHECK_FALSE(opts[0].revised);
    CHECK(opts[1].revised);
    CHECK_FALSE(opts[1].price[4].has_value());
    // r2 = 0: service 5 gets no weight, so its missing price is fine,
    // and tfrac reduces to 3.25 u1 / 8.25 u1
    auto derived = derive_contract(opts[1], CostTable::defaults());
    CHECK(derived.weights[4] == 0.0);
    CHECK(derived.tfrac == doctest::Approx(3.25 / 8.25).epsilon(1e-12));
    std::string csv = derived_csv({derived});
    CHECK(csv.find("opt-2") != std::string::npos);

    // a positively weighted service with no price cannot be derived
    TariffOption gap = opts[1];
    gap.price[3].reset();
    CHECK_THROWS_AS(derive_contract(gap, CostTable::defaults()),
                    std::invalid_argument);
    std::remove(path);

    {
        std::ofstream out(path);
        out << "id,effective_date,revis,p1,p2,p3,p4,p5,r_i,F_i,h_i,m,r1,r2,c_v,c_d,"
               "vremot,dremot,iremot\n";
        out << "bad,1990-06-01,0,0.10,0.09,0.12,,,5,10,4,5,1.0,0,3,5,0.1,0.5,0\n";
    }
    try {
        read_tariffs(path);
        FAIL("expected a line-numbered error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    std::remove(path);
}

TEST_CASE("market series growth over the contract horizon") {
    const char* path = "market_test.csv";
    {
        std::ofstream out(path);
        out << "t,L,y,retain,steal\n";
        out << "1989-07-01,100,0.5,0.99,0.02\n";
        out << "1990-07-01,120,0.5,,\n";
        out << "1992-07-01,180,0.5,0.95,0.05\n";
    }
    MarketSeries m = load_market_series(path);
    REQUIRE(m.rows.size() == 3);
    CHECK(std::isnan(m.rows[1].retain));
    CHECK(m.growth(parse_date("1990-08-01"), 1) == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(m.growth(parse_date("1992-07-01"), 2) ==
          doctest::Approx(180.0 / 120.0).epsilon(1e-12));
    CHECK(std::isnan(m.growth(parse_date("1989-08-01"), 1)));  // no left endpoint
    std::remove(path);

    {
        std::ofstream out(path);
        out << "t,L,y,retain,steal\n";
        out << "1989-07-01,-5,0.5,,\n";
    }
    CHECK_THROWS_AS(load_market_series(path), std::runtime_error);
    std::remove(path);
}

TEST_CASE("default retention shifts at implementation") {
    auto pre = default_retention(0);
    CHECK(pre.first == 0.99);
    CHECK(pre.second == 0.02);
    auto post = default_retention(1);
    CHECK(post.first == 0.95);
    CHECK(post.second == 0.05);
}

TEST_CASE("synthetic records validate and hit the covariate targets") {
    auto data = synthesize_dataset(truth_params(), MarketSeries{}, 400, 99);
    REQUIRE(data.size() == 400);
    CHECK_NOTHROW(validate_dataset(data));
    double tfrac = 0.0, iremot = 0.0, duration = 0.0;
    for (const auto& o : data) {
        tfrac += o.tfrac;
        iremot += o.iremot;
        duration += o.duration;
    }
    CHECK(tfrac / 400 == doctest::Approx(0.404).epsilon(0.08));
    CHECK(iremot / 400 == doctest::Approx(0.00525).epsilon(1.0));
    CHECK(duration / 400 == doctest::Approx(3.63).epsilon(0.05));
}

TEST_CASE("synthetic records are per-record deterministic streams") {
    auto d50 = synthesize_dataset(truth_params(), MarketSeries{}, 50, 7);
    auto d100 = synthesize_dataset(truth_params(), MarketSeries{}, 100, 7);
    // records depend only on (seed, index): a longer run extends, never reshuffles
    std::string a = observations_csv(d50);
    std::string b = observations_csv({d100.begin(), d100.begin() + 50});
    CHECK(a == b);
    auto other = synthesize_dataset(truth_params(), MarketSeries{}, 50, 8);
    CHECK(observations_csv(other) != a);
}

TEST_CASE("synthetic market growth comes from the series when covered") {
    const char* path = "market_growth_test.csv";
    {
        std::ofstream out(path);
        out << "t,L,y,retain,steal\n";
        for (int y = 1980; y <= 2005; ++y)
            out << y << "-01-01," << fmt17(100.0 * std::pow(1.25, y - 1980))
                << ",0.5,,\n";
    }
    MarketSeries m = load_market_series(path);
    auto data = synthesize_dataset(truth_params(), m, 30, 11);
    for (const auto& o : data) {
        int h = int(std::lround(o.duration));
        CHECK(o.g == doctest::Approx(std::pow(1.25, h)).epsilon(1e-9));
    }
    std::remove(path);
}

TEST_CASE("inconsistent truth parameters are rejected") {
    StructuralParams bad = truth_params();
    bad.alpha[0] = -2.0;  // switching cost forced negative
    CHECK_THROWS_AS(synthesize_dataset(bad, MarketSeries{}, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("observation csv round trip with validation errors located") {
    auto data = synthesize_dataset(truth_params(), MarketSeries{}, 25, 3);
    const char* path = "observations_test.csv";
    write_observations(data, path);
    auto back = read_observations(path);
    CHECK(observations_csv(back) == observations_csv(data));
    std::remove(path);

    Observation broken = data[0];
    broken.y = 1.5;
    CHECK_THROWS_AS(validate(broken), std::invalid_argument);
    broken = data[0];
    broken.dport = 1.0;
    broken.tport = 2.0;  // implemented means no waiting time
    CHECK_THROWS_AS(validate(broken), std::invalid_argument);
}
