#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "lockin/dataset.hpp"

#ifdef __unix__
#include <sys/wait.h>
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "lockin_cli_tests";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

CliRun cli(const std::string& args) {
    static int seq = 0;
    fs::path o = work_dir() / ("stdout_" + std::to_string(++seq) + ".txt");
    fs::path e = work_dir() / ("stderr_" + std::to_string(seq) + ".txt");
    std::string cmd = std::string(LOCKIN_CLI_PATH) + " " + args + " >" + o.string() +
                      " 2>" + e.string();
    int raw = std::system(cmd.c_str());
    CliRun r;
#ifdef __unix__
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
#else
    r.code = raw;
#endif
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

}  // namespace

TEST_CASE("cli solve prints the accepted equilibrium as json") {
    CliRun r = cli("solve --delta-c 0.5 --delta-f 0.5 --rho 0.2 --mu 0.5 --s 0.3");
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["ok"] == true);
    CHECK(j["stable_count"] == 1);
    CHECK(j["candidates"].size() == 4);
    int idx = j["accepted_index"];
    CHECK(j["candidates"][idx]["markup"].get<double>() ==
          doctest::Approx(1.3730919244319821).epsilon(1e-9));
    CHECK(j["params"]["s"] == 0.3);
}

TEST_CASE("cli solve exits 1 when the point is degenerate") {
    CliRun r = cli("solve --mu 0");
    CHECK(r.code == 1);
    CHECK(r.err.find("degenerate_no_relocation") != std::string::npos);
}

TEST_CASE("cli usage errors exit 2") {
    CHECK(cli("solve --no-such-flag 1").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("").code == 2);
}

TEST_CASE("cli sweep writes records and a summary report") {
    fs::path grid = work_dir() / "grid.json";
    spit(grid, R"({"delta_C":[0.5],"delta_F":[0.5],"rho":[0.2],"mu":[0.5],
                   "s":[0.1,0.3],"c":0.0})");
    fs::path csv = work_dir() / "records.csv";
    fs::path rep = work_dir() / "report.json";
    CliRun r = cli("sweep --grid " + grid.string() + " -o " + csv.string() +
                   " --report " + rep.string() + " --workers 1");
    REQUIRE(r.code == 0);
    std::string body = slurp(csv);
    CHECK(body.rfind("delta_C,", 0) == 0);
    CHECK(std::count(body.begin(), body.end(), '\n') == 3);  // header + 2 rows
    json jr = json::parse(slurp(rep));
    CHECK(jr["coverage"]["points"] == 2);
    CHECK(jr["coverage"]["solved"] == 2);
    CHECK(jr.contains("effect_of_s"));
    CHECK(jr.contains("monotonicity"));

    fs::path out_json = work_dir() / "records.json";
    CliRun r2 = cli("sweep --grid " + grid.string() + " -o " + out_json.string() +
                    " --workers 1");
    REQUIRE(r2.code == 0);
    json recs = json::parse(slurp(out_json));
    CHECK(recs.size() == 2);
    CHECK(recs[0]["solved"] == true);
}

TEST_CASE("cli simulate emits one row per period") {
    CliRun r = cli("simulate --delta-c 0.5 --delta-f 0.5 --rho 0.2 --mu 0.5 --s 0.3 "
                   "--sigma0 0.8 --periods 5");
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "t,sigma,price");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 6);
    CHECK(r.out.find("\n0,0.8") != std::string::npos);
}

TEST_CASE("cli derive reproduces the worked contract") {
    fs::path tariffs = work_dir() / "tariffs.csv";
    spit(tariffs,
         "id,effective_date,revis,p1,p2,p3,p4,p5,r_i,F_i,h_i,m,r1,r2,c_v,c_d,"
         "vremot,dremot,iremot\n"
         "1,1990-06-01,0,0.10,0.09,0.12,0.11,0.13,100,13,3,6,1.25,0.75,4,6,"
         "0.2,0.5,0.0\n");
    CliRun r = cli("derive --contracts " + tariffs.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("0.4558128") != std::string::npos);       // margin
    CHECK(r.out.find("0.54418719999999998") != std::string::npos);  // c_norm
}

TEST_CASE("cli synth, estimate and counterfactual chain") {
    fs::path truth = work_dir() / "truth.json";
    spit(truth, R"({"init":{
        "alpha":[0.85,0.05,-0.25,0.30,-1.0],
        "beta":[-0.05,0.1,0.15,-0.5,-0.187,0.564],
        "m_logit":0.0,"r_logit":-1.386294361,"d":0.2,"e":0.347}})");
    fs::path data = work_dir() / "synth.csv";
    CliRun r1 = cli("synth --truth " + truth.string() + " --n 150 --seed 11 -o " +
                    data.string());
    REQUIRE(r1.code == 0);
    auto rows = lockin::read_observations(data.string());
    CHECK(rows.size() == 150);

    fs::path cfg = work_dir() / "estimate.json";
    spit(cfg, R"({"starts":1,"workers":2,"init":{
        "alpha":[0.82,0.07,-0.22,0.27,-0.9],
        "beta":[-0.04,0.08,0.17,-0.45,-0.2,0.5],
        "m_logit":0.1,"r_logit":-1.3,"d":0.23,"e":0.32}})");
    fs::path res = work_dir() / "result.json";
    CliRun r2 = cli("estimate --data " + data.string() + " --config " + cfg.string() +
                    " -o " + res.string());
    REQUIRE(r2.code == 0);
    json jr = json::parse(slurp(res));
    CHECK(jr["df"] == 21);
    CHECK(jr["converged"] == true);
    CHECK(jr["J"].get<double>() < 1e-6);
    CHECK(jr["estimates"]["e"].get<double>() == doctest::Approx(0.347).epsilon(1e-3));

    fs::path cf = work_dir() / "counterfactual.json";
    CliRun r3 = cli("counterfactual --result " + res.string() + " -o " + cf.string());
    REQUIRE(r3.code == 0);
    json jc = json::parse(slurp(cf));
    CHECK(jc["scenario"] == "steady_state_average");
    CHECK(jc["margin_base"].get<double>() > 0.0);
    CHECK(jc["pct_ratio_of_averages"].get<double>() < 0.0);

    CliRun r4 = cli("counterfactual --result " + res.string() +
                    " --scenario all_contracts_no_transition --data " + data.string());
    REQUIRE(r4.code == 0);
    json jc2 = json::parse(r4.out);
    CHECK(jc2["contracts"] == 150);
}
