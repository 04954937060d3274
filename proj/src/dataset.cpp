#include "lockin/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lockin/io.hpp"

namespace lockin {

namespace {

constexpr const char* kHeader =
    "id,price,c_norm,y,g,retain,steal,sigma_prev,vremot,dremot,iremot,tfrac,"
    "duration,tport,dport,has_forward,price_fwd,c_norm_fwd,y_fwd,g_fwd,"
    "tport_fwd,dport_fwd,tport_fwd2,dport_fwd2,c1,c3,c4,c5,c1_lag,c3_lag,"
    "c4_lag,sigma_lag2";
constexpr int kColumns = 32;

[[noreturn]] void bad(long long id, const std::string& what) {
    throw std::invalid_argument("observation " + std::to_string(id) + ": " + what);
}

void check_unit(long long id, const char* name, double x) {
    if (!(x >= 0.0 && x <= 1.0))
        bad(id, std::string(name) + " outside [0,1]");
}

void check_flag(long long id, const char* name, double x) {
    if (x != 0.0 && x != 1.0) bad(id, std::string(name) + " not in {0,1}");
}

void check_port(long long id, const char* name, double tport, double dport) {
    if (!(tport >= 0.0)) bad(id, std::string(name) + " negative");
    if (dport == 1.0 && tport != 0.0)
        bad(id, std::string(name) + " positive under implemented portability");
}

}  // namespace

void validate(const Observation& o) {
    if (!std::isfinite(o.price)) bad(o.id, "price not finite");
    check_unit(o.id, "y", o.y);
    check_unit(o.id, "retain", o.retain);
    check_unit(o.id, "steal", o.steal);
    check_unit(o.id, "sigma_prev", o.sigma_prev);
    check_unit(o.id, "sigma_lag2", o.sigma_lag2);
    check_unit(o.id, "vremot", o.vremot);
    check_unit(o.id, "dremot", o.dremot);
    check_unit(o.id, "iremot", o.iremot);
    check_unit(o.id, "tfrac", o.tfrac);
    if (!(o.g > 0.0)) bad(o.id, "g not positive");
    if (!(o.duration >= 3.0 && o.duration <= 5.0)) bad(o.id, "duration outside [3,5]");
    check_flag(o.id, "dport", o.dport);
    check_port(o.id, "tport", o.tport, o.dport);
    if (o.has_forward) {
        if (!std::isfinite(o.price_fwd)) bad(o.id, "price_fwd not finite");
        check_unit(o.id, "y_fwd", o.y_fwd);
        if (!(o.g_fwd > 0.0)) bad(o.id, "g_fwd not positive");
        check_flag(o.id, "dport_fwd", o.dport_fwd);
        check_port(o.id, "tport_fwd", o.tport_fwd, o.dport_fwd);
        check_flag(o.id, "dport_fwd2", o.dport_fwd2);
        check_port(o.id, "tport_fwd2", o.tport_fwd2, o.dport_fwd2);
    }
}

void validate_dataset(const std::vector<Observation>& data) {
    for (const Observation& o : data) validate(o);
}

std::string observations_csv(const std::vector<Observation>& data) {
    std::ostringstream out;
    out << kHeader << '\n';
    for (const Observation& o : data) {
        out << o.id << ',' << fmt17(o.price) << ',' << fmt17(o.c_norm) << ','
            << fmt17(o.y) << ',' << fmt17(o.g) << ',' << fmt17(o.retain) << ','
            << fmt17(o.steal) << ',' << fmt17(o.sigma_prev) << ',' << fmt17(o.vremot)
            << ',' << fmt17(o.dremot) << ',' << fmt17(o.iremot) << ',' << fmt17(o.tfrac)
            << ',' << fmt17(o.duration) << ',' << fmt17(o.tport) << ',' << fmt17(o.dport)
            << ',' << (o.has_forward ? 1 : 0) << ',' << fmt17(o.price_fwd) << ','
            << fmt17(o.c_norm_fwd) << ',' << fmt17(o.y_fwd) << ',' << fmt17(o.g_fwd)
            << ',' << fmt17(o.tport_fwd) << ',' << fmt17(o.dport_fwd) << ','
            << fmt17(o.tport_fwd2) << ',' << fmt17(o.dport_fwd2) << ',' << fmt17(o.c1)
            << ',' << fmt17(o.c3) << ',' << fmt17(o.c4) << ',' << fmt17(o.c5) << ','
            << fmt17(o.c1_lag) << ',' << fmt17(o.c3_lag) << ',' << fmt17(o.c4_lag)
            << ',' << fmt17(o.sigma_lag2) << '\n';
    }
    return out.str();
}

void write_observations(const std::vector<Observation>& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << observations_csv(data);
    if (!out) throw std::runtime_error("write failed on " + path);
}

std::vector<Observation> read_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kHeader)
        throw std::runtime_error(path + ": unexpected header");
    std::vector<Observation> data;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (int(f.size()) != kColumns)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(kColumns) +
                                     " columns, got " + std::to_string(f.size()));
        try {
            Observation o;
            int i = 0;
            o.id = std::stoll(f[i++]);
            o.price = parse_double(f[i++]);
            o.c_norm = parse_double(f[i++]);
            o.y = parse_double(f[i++]);
            o.g = parse_double(f[i++]);
            o.retain = parse_double(f[i++]);
            o.steal = parse_double(f[i++]);
            o.sigma_prev = parse_double(f[i++]);
            o.vremot = parse_double(f[i++]);
            o.dremot = parse_double(f[i++]);
            o.iremot = parse_double(f[i++]);
            o.tfrac = parse_double(f[i++]);
            o.duration = parse_double(f[i++]);
            o.tport = parse_double(f[i++]);
            o.dport = parse_double(f[i++]);
            o.has_forward = f[i++] == "1";
            o.price_fwd = parse_double(f[i++]);
            o.c_norm_fwd = parse_double(f[i++]);
            o.y_fwd = parse_double(f[i++]);
            o.g_fwd = parse_double(f[i++]);
            o.tport_fwd = parse_double(f[i++]);
            o.dport_fwd = parse_double(f[i++]);
            o.tport_fwd2 = parse_double(f[i++]);
            o.dport_fwd2 = parse_double(f[i++]);
            o.c1 = parse_double(f[i++]);
            o.c3 = parse_double(f[i++]);
            o.c4 = parse_double(f[i++]);
            o.c5 = parse_double(f[i++]);
            o.c1_lag = parse_double(f[i++]);
            o.c3_lag = parse_double(f[i++]);
            o.c4_lag = parse_double(f[i++]);
            o.sigma_lag2 = parse_double(f[i++]);
            validate(o);
            data.push_back(o);
        } catch (const std::exception& ex) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                                     ex.what());
        }
    }
    return data;
}

}  // namespace lockin
