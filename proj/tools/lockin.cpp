#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lockin/contracts.hpp"
#include "lockin/dataset.hpp"
#include "lockin/gmm.hpp"
#include "lockin/io.hpp"
#include "lockin/model.hpp"
#include "lockin/solver.hpp"
#include "lockin/sweep.hpp"

namespace {

using nlohmann::json;

void write_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

json validity_json(const lockin::ValidityReport& v) {
    return json{{"lock_in", v.lock_in},
                {"coverage", v.coverage},
                {"young_rationality", v.young_rationality},
                {"cutoffs_interior", v.cutoffs_interior},
                {"all", v.all()}};
}

json candidate_json(const lockin::CandidateReport& c) {
    return json{{"e", c.root.e},
                {"theta", c.root.theta},
                {"stable", c.root.stable},
                {"d", c.eq.policy.d},
                {"k", c.eq.value.k},
                {"l", c.eq.value.l},
                {"m", c.eq.value.m},
                {"b", c.eq.dyn.b},
                {"eta", c.eq.dyn.eta},
                {"r", c.eq.r},
                {"markup", c.markup},
                {"steady_profit", c.steady_profit},
                {"soc_value", c.soc_value},
                {"validity", validity_json(c.validity)},
                {"viable", c.viable},
                {"rejection", c.rejection}};
}

json solve_json(const lockin::SolveReport& rep) {
    json cands = json::array();
    for (const auto& c : rep.candidates) cands.push_back(candidate_json(c));
    json j{{"params",
            {{"delta_C", rep.params.delta_C},
             {"delta_F", rep.params.delta_F},
             {"rho", rep.params.rho},
             {"mu", rep.params.mu},
             {"s", rep.params.s},
             {"c", rep.params.c}}},
           {"candidates", cands},
           {"stable_count", rep.stable_count},
           {"accepted_index", rep.accepted_index},
           {"ok", rep.ok()}};
    if (rep.params.r) j["params"]["r"] = *rep.params.r;
    return j;
}

lockin::ExportFormat format_for(const std::string& name, const std::string& path) {
    if (name == "csv") return lockin::ExportFormat::csv;
    if (name == "json") return lockin::ExportFormat::json;
    if (name != "auto") throw CLI::ValidationError("--format must be csv, json or auto");
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
        return lockin::ExportFormat::json;
    return lockin::ExportFormat::csv;
}

struct ParamFlags {
    lockin::ModelParams p;
    double r = -1.0;  // <0 means unset

    void attach(CLI::App* cmd) {
        cmd->add_option("--delta-c", p.delta_C, "consumer discount factor")
            ->capture_default_str();
        cmd->add_option("--delta-f", p.delta_F, "firm discount factor")
            ->capture_default_str();
        cmd->add_option("--rho", p.rho, "exit probability")->capture_default_str();
        cmd->add_option("--mu", p.mu, "relocation probability")->capture_default_str();
        cmd->add_option("--s", p.s, "switching cost")->capture_default_str();
        cmd->add_option("--c", p.c, "marginal cost")->capture_default_str();
        cmd->add_option("--r", r, "gross valuation (default: covered-market value)");
    }
    lockin::ModelParams params() const {
        lockin::ModelParams q = p;
        if (r >= 0.0) q.r = r;
        return q;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Switching-cost duopoly: equilibrium solver, comparative statics, "
                 "contract derivation and GMM estimation"};
    app.require_subcommand(1);
    std::string out = "-";

    // ---- solve ----
    auto* solve_cmd = app.add_subcommand("solve", "solve one parameter point");
    ParamFlags solve_flags;
    solve_flags.attach(solve_cmd);
    solve_cmd->add_option("-o,--output", out, "output path or - for stdout");

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "solve a parameter grid");
    std::string grid_path, report_path, sweep_format = "auto";
    int workers = 0;
    double tol = 1e-9;
    sweep_cmd->add_option("--grid", grid_path, "grid spec JSON (default: built-in grid)");
    sweep_cmd->add_option("-o,--output", out, "records output path or -");
    sweep_cmd->add_option("--format", sweep_format, "csv, json or auto (by extension)")
        ->capture_default_str();
    sweep_cmd->add_option("--report", report_path, "also write the summary report JSON");
    sweep_cmd->add_option("--workers", workers, "worker threads (0 = all cores)")
        ->capture_default_str();
    sweep_cmd->add_option("--tol", tol, "flatness tolerance for trend classification")
        ->capture_default_str();

    // ---- simulate ----
    auto* sim_cmd = app.add_subcommand("simulate", "share/price path from sigma0");
    ParamFlags sim_flags;
    sim_flags.attach(sim_cmd);
    double sigma0 = 0.9;
    int periods = 40;
    sim_cmd->add_option("--sigma0", sigma0, "initial own-cohort share")
        ->capture_default_str();
    sim_cmd->add_option("--periods", periods, "path length")->capture_default_str();
    sim_cmd->add_option("-o,--output", out, "output path or -");

    // ---- derive ----
    auto* derive_cmd = app.add_subcommand(
        "derive", "tariff options -> weights, tfrac, c_norm, portability");
    std::string contracts_path, costs_path;
    bool alt_weights = false;
    derive_cmd->add_option("--contracts", contracts_path, "tariff options CSV")
        ->required();
    derive_cmd->add_option("--costs", costs_path,
                           "cost table JSON (default: built-in table)");
    derive_cmd->add_flag("--alt-weights", alt_weights,
                         "use the 2w1+w2+w4 reading of the first weight equation");
    derive_cmd->add_option("-o,--output", out, "output path or -");

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "model-consistent synthetic dataset");
    std::string truth_path, market_path;
    int synth_n = 1000;
    std::uint64_t synth_seed = 20260814;
    lockin::SynthOptions synth_opt;
    synth_cmd->add_option("--truth", truth_path,
                          "JSON with an init block holding the true parameters")
        ->required();
    synth_cmd->add_option("--market", market_path, "market series CSV for growth");
    synth_cmd->add_option("--n", synth_n, "records")->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
    synth_cmd->add_option("--price-noise", synth_opt.price_noise, "sd of price noise")
        ->capture_default_str();
    synth_cmd
        ->add_option("--retention-noise", synth_opt.retention_noise,
                     "sd of retain/steal noise")
        ->capture_default_str();
    synth_cmd->add_option("--share-noise", synth_opt.share_noise, "sd of share noise")
        ->capture_default_str();
    synth_cmd
        ->add_option("--forward-fraction", synth_opt.forward_fraction,
                     "share of rows with the t+h block")
        ->capture_default_str();
    synth_cmd->add_option("-o,--output", out, "output path or -");

    // ---- estimate ----
    auto* est_cmd = app.add_subcommand("estimate", "two-step GMM on a dataset");
    std::string data_path, config_path;
    int est_workers = -1, est_starts = -1;
    est_cmd->add_option("--data", data_path, "observations CSV")->required();
    est_cmd->add_option("--config", config_path, "estimation config JSON");
    est_cmd->add_option("--workers", est_workers, "override config worker count");
    est_cmd->add_option("--starts", est_starts, "override config start budget");
    est_cmd->add_option("-o,--output", out, "result JSON path or -");

    // ---- counterfactual ----
    auto* cf_cmd = app.add_subcommand(
        "counterfactual", "immediate-portability margins from an estimate");
    std::string result_path, scenario_name = "steady_state_average", cf_data_path;
    cf_cmd->add_option("--result", result_path, "estimate result JSON")->required();
    cf_cmd
        ->add_option("--scenario", scenario_name,
                     "steady_state_average or all_contracts_no_transition")
        ->capture_default_str();
    cf_cmd->add_option("--data", cf_data_path,
                       "observations CSV (required for all_contracts_no_transition)");
    cf_cmd->add_option("-o,--output", out, "report JSON path or -");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (app.got_subcommand(solve_cmd)) {
        lockin::SolveReport rep = lockin::solve(solve_flags.params());
        write_output(out, solve_json(rep).dump(2) + "\n");
        if (!rep.ok()) {
            std::cerr << "no viable stable equilibrium at this point\n";
            return 1;
        }
        return 0;
    }

    if (app.got_subcommand(sweep_cmd)) {
        lockin::GridSpec grid = grid_path.empty() ? lockin::GridSpec::default_grid()
                                                  : lockin::GridSpec::load(grid_path);
        auto records = lockin::run_sweep(grid, workers);
        if (out == "-") {
            lockin::ExportFormat f = format_for(sweep_format, "");
            write_output(out, f == lockin::ExportFormat::csv
                                  ? lockin::to_csv(records)
                                  : lockin::to_json(records).dump(2) + "\n");
        } else {
            lockin::export_records(records, format_for(sweep_format, out), out);
        }
        if (!report_path.empty())
            write_output(report_path, lockin::sweep_report(records, tol).dump(2) + "\n");
        long long unsolved = 0;
        for (const auto& r : records) unsolved += r.solved ? 0 : 1;
        if (unsolved) {
            std::cerr << unsolved << " of " << records.size()
                      << " grid points left unsolved\n";
            return 1;
        }
        return 0;
    }

    if (app.got_subcommand(sim_cmd)) {
        lockin::Equilibrium eq = lockin::solve_equilibrium(sim_flags.params());
        auto path = lockin::simulate_path(eq, sigma0, periods);
        std::string csv = "t,sigma,price\n";
        for (std::size_t t = 0; t < path.size(); ++t)
            csv += std::to_string(t) + "," + lockin::fmt17(path[t].sigma) + "," +
                   lockin::fmt17(path[t].price) + "\n";
        write_output(out, csv);
        return 0;
    }

    if (app.got_subcommand(derive_cmd)) {
        auto tariffs = lockin::read_tariffs(contracts_path);
        lockin::CostTable costs = costs_path.empty() ? lockin::CostTable::defaults()
                                                     : lockin::CostTable::load(costs_path);
        lockin::WeightConfig wc;
        wc.first_equation_as_printed = !alt_weights;
        std::vector<lockin::DerivedContract> rows;
        rows.reserve(tariffs.size());
        for (const auto& t : tariffs)
            rows.push_back(lockin::derive_contract(t, costs,
                                                   lockin::PortabilityTimeline::defaults(),
                                                   wc));
        write_output(out, lockin::derived_csv(rows));
        return 0;
    }

    if (app.got_subcommand(synth_cmd)) {
        std::ifstream in(truth_path);
        if (!in) throw std::runtime_error("cannot open " + truth_path);
        json jt;
        in >> jt;
        lockin::StructuralParams truth = lockin::EstimateConfig::from_json(jt).init;
        lockin::MarketSeries series;
        if (!market_path.empty()) series = lockin::load_market_series(market_path);
        auto data = lockin::synthesize_dataset(truth, series, synth_n, synth_seed,
                                               synth_opt);
        write_output(out, lockin::observations_csv(data));
        return 0;
    }

    if (app.got_subcommand(est_cmd)) {
        auto data = lockin::read_observations(data_path);
        lockin::EstimateConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw std::runtime_error("cannot open " + config_path);
            json jc;
            in >> jc;
            cfg = lockin::EstimateConfig::from_json(jc);
        }
        if (est_workers >= 0) cfg.workers = est_workers;
        if (est_starts > 0) cfg.starts = est_starts;
        try {
            lockin::GMMResult res = lockin::estimate(data, cfg);
            write_output(out, res.to_json().dump(2) + "\n");
        } catch (const lockin::EstimateError& e) {
            write_output(out, e.best.to_json().dump(2) + "\n");
            std::cerr << e.what() << "\n";
            return 1;
        }
        return 0;
    }

    if (app.got_subcommand(cf_cmd)) {
        std::ifstream in(result_path);
        if (!in) throw std::runtime_error("cannot open " + result_path);
        json jr;
        in >> jr;
        lockin::GMMResult res = lockin::GMMResult::from_json(jr);
        lockin::Scenario sc;
        if (scenario_name == "steady_state_average")
            sc = lockin::Scenario::steady_state_average;
        else if (scenario_name == "all_contracts_no_transition")
            sc = lockin::Scenario::all_contracts_no_transition;
        else
            throw std::invalid_argument("unknown scenario: " + scenario_name);
        std::optional<std::vector<lockin::Observation>> data;
        if (!cf_data_path.empty()) data = lockin::read_observations(cf_data_path);
        auto rep = lockin::counterfactual_margins(res.params, res.means, sc,
                                                  data ? &*data : nullptr);
        write_output(out, rep.to_json().dump(2) + "\n");
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const lockin::SolveError& e) {
        std::cerr << "error [" << e.code << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
