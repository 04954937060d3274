#include "lockin/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

#include "lockin/io.hpp"
#include "lockin/optim.hpp"
#include "lockin/stats.hpp"

namespace lockin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

nlohmann::json num_or_null(double x) {
    if (std::isnan(x)) return nullptr;
    return x;
}

double num_from(const nlohmann::json& j) {
    if (j.is_null()) return kNaN;
    return j.get<double>();
}

}  // namespace

double StructuralParams::mu() const { return logistic(m_logit); }
double StructuralParams::rho() const { return logistic(r_logit); }

std::array<double, kParamCount> pack(const StructuralParams& p) {
    std::array<double, kParamCount> x{};
    for (int i = 0; i < 5; ++i) x[i] = p.alpha[i];
    for (int i = 0; i < 6; ++i) x[5 + i] = p.beta[i];
    x[11] = p.m_logit;
    x[12] = p.r_logit;
    x[13] = p.d;
    x[14] = p.e;
    return x;
}

StructuralParams unpack(const std::array<double, kParamCount>& x,
                        const StructuralParams& fixed) {
    StructuralParams p = fixed;
    for (int i = 0; i < 5; ++i) p.alpha[i] = x[i];
    for (int i = 0; i < 6; ++i) p.beta[i] = x[5 + i];
    p.m_logit = x[11];
    p.r_logit = x[12];
    p.d = x[13];
    p.e = x[14];
    return p;
}

std::array<std::string, kParamCount> param_names() {
    return {"alpha1", "alpha2", "alpha3", "alpha4", "alpha5",
            "beta1",  "beta2",  "beta3",  "beta4",  "beta5", "beta6",
            "m_logit", "r_logit", "d", "e"};
}

HorizonWeights horizon_weights(double mu, double rho, int h, double delta_C) {
    if (!(mu >= 0.0 && mu <= 1.0) || !(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("horizon_weights: mu, rho must be in [0,1]");
    if (h < 1) throw std::invalid_argument("horizon_weights: h must be >= 1");
    if (!(delta_C > 0.0 && delta_C < 1.0))
        throw std::invalid_argument("horizon_weights: delta_C must be in (0,1)");
    HorizonWeights w;
    double keep = std::pow(1.0 - mu, h) * std::pow(1.0 - rho, h);
    w.varpi = keep;
    w.gamma = std::pow(1.0 - rho, h) - keep;
    double den = 1.0 - delta_C * (1.0 - rho) * (1.0 - mu);
    w.v = (1.0 - delta_C * keep) / den;
    return w;
}

double switching_cost(const std::array<double, 5>& alpha, double dport_tfrac,
                      double vremot, double dremot, double iremot) {
    return alpha[0] + alpha[1] * dport_tfrac + alpha[2] * vremot +
           alpha[3] * dremot + alpha[4] * iremot;
}

double switching_cost(const Observation& o, const std::array<double, 5>& alpha) {
    return switching_cost(alpha, o.dport * o.tfrac, o.vremot, o.dremot, o.iremot);
}

double predicted_price(const Observation& o, const StructuralParams& p) {
    return p.d + p.e * o.sigma_prev + o.c_norm + p.beta[0] * o.duration +
           p.beta[1] * o.vremot + p.beta[2] * o.dremot + p.beta[3] * o.iremot +
           p.beta[4] * o.tport + p.beta[5] * o.tport * o.tfrac;
}

double forward_b(const StructuralParams& p, const HorizonWeights& hw, double s_future) {
    double dCh = std::pow(p.delta_C, p.h);
    double den = 2.0 * (hw.v * (1.0 + dCh * hw.varpi) +
                        p.e * dCh * (hw.gamma * s_future / hw.v + hw.varpi));
    if (!(std::abs(den) > 1e-12))
        throw std::invalid_argument("forward_b: demand-slope bracket vanishes");
    return 1.0 / den;
}

double recover_sigma(double y, double g, double s, double sigma_prev,
                     const StructuralParams& p, const HorizonWeights& hw) {
    double carry = sigma_prev * (hw.gamma / hw.v * (s - p.e) + hw.varpi);
    double young = hw.gamma / (2.0 * hw.v) * (p.e - s + hw.v);
    return (g * y - carry - young) / g;
}

Residuals residuals(const Observation& o, const StructuralParams& p) {
    Residuals r;
    int h = int(std::lround(o.duration));
    HorizonWeights hw = horizon_weights(p.mu(), p.rho(), h, p.delta_C);
    const double gamma = hw.gamma, varpi = hw.varpi, v = hw.v, e = p.e;

    r.s = switching_cost(o, p.alpha);
    r.pricing = o.price - predicted_price(o, p);
    double common = gamma / (2.0 * v) * (e * (1.0 - 2.0 * o.sigma_prev) + v);
    r.retain = o.retain - (common + gamma / (2.0 * v) * r.s + varpi);
    r.steal = o.steal - (common - gamma / (2.0 * v) * r.s);
    r.sigma = recover_sigma(o.y, o.g, r.s, o.sigma_prev, p, hw);

    if (o.has_forward) {
        StructuralParams ph = p;
        ph.h = h;
        double s_f = switching_cost(p.alpha, o.dport_fwd * o.tfrac, o.vremot,
                                    o.dremot, o.iremot);
        double s_f2 = switching_cost(p.alpha, o.dport_fwd2 * o.tfrac, o.vremot,
                                     o.dremot, o.iremot);
        double b1 = forward_b(ph, hw, s_f);
        double b2 = forward_b(ph, hw, s_f2);
        r.sigma_fwd = recover_sigma(o.y_fwd, o.g_fwd, s_f, r.sigma, p, hw);
        double D2 = 2.0 * e * b1 * std::pow(p.delta_F, h);
        double t1 = -(o.g * b1 + gamma / (2.0 * v)) * (o.price - o.c_norm);
        double t2 = D2 * o.g * (o.g_fwd * b2 + gamma / (2.0 * v)) *
                    (o.price_fwd - o.c_norm_fwd);
        double t3 = o.g * (r.sigma - D2 * o.g_fwd * r.sigma_fwd);
        double t4 = gamma / (2.0 * v) *
                    ((e + v) * (1.0 - D2 * o.g) - (r.s - D2 * s_f * o.g));
        double t5 = o.sigma_prev * (gamma / v * (r.s - e) + varpi);
        double t6 = -D2 * o.g * r.sigma * (gamma / v * (s_f - e) + varpi);
        r.euler = t1 + t2 + t3 + t4 + t5 + t6;
        r.euler_ok = true;
    }
    return r;
}

double instrument_value(const Observation& o, const std::string& name) {
    if (name == "c1") return o.c1;
    if (name == "c3") return o.c3;
    if (name == "c4") return o.c4;
    if (name == "c5") return o.c5;
    if (name == "c1_lag") return o.c1_lag;
    if (name == "c3_lag") return o.c3_lag;
    if (name == "c4_lag") return o.c4_lag;
    if (name == "sigma_lag2") return o.sigma_lag2;
    if (name == "id_noise") {
        Rng rng(0x1d9015eULL, std::uint64_t(o.id));
        return rng.uniform();
    }
    throw std::invalid_argument("unknown instrument: " + name);
}

std::vector<std::string> default_instruments() {
    return {"c1", "c3", "c4", "c5", "c1_lag", "c3_lag", "c4_lag", "sigma_lag2"};
}

MomentSummary stack_moments(const std::vector<Observation>& data,
                            const StructuralParams& p, const MomentSpec& spec,
                            int workers) {
    const long long n = (long long)data.size();
    if (n == 0) throw std::invalid_argument("stack_moments: empty dataset");
    const int m = int(spec.instruments.size());
    const int K = spec.count();

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return data[a].id < data[b].id; });

    MomentSummary out;
    out.rows = n;
    out.contributions = Eigen::MatrixXd::Zero(n, K);
    std::vector<char> euler_ok(n, 0);
    std::vector<char> neg_s(n, 0);

    auto fill_rows = [&](long long lo, long long hi) {
        std::vector<double> z(1 + m);
        z[0] = 1.0;
        for (long long r = lo; r < hi; ++r) {
            const Observation& o = data[order[r]];
            Residuals res = residuals(o, p);
            for (int j = 0; j < m; ++j) z[1 + j] = instrument_value(o, spec.instruments[j]);
            double fam[4] = {res.pricing, res.euler_ok ? res.euler : 0.0, res.retain,
                             res.steal};
            for (int f = 0; f < 4; ++f)
                for (int j = 0; j <= m; ++j)
                    out.contributions(r, f * (1 + m) + j) = fam[f] * z[j];
            euler_ok[r] = res.euler_ok ? 1 : 0;
            neg_s[r] = res.s <= 0.0 ? 1 : 0;
        }
    };

    int nw = workers <= 0 ? int(std::thread::hardware_concurrency()) : workers;
    nw = int(std::max<long long>(1, std::min<long long>(nw, n)));
    if (nw == 1) {
        fill_rows(0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(nw);
        long long chunk = (n + nw - 1) / nw;
        for (int w = 0; w < nw; ++w) {
            long long lo = w * chunk, hi = std::min<long long>(n, lo + chunk);
            pool.emplace_back([&, w, lo, hi] {
                try {
                    fill_rows(lo, hi);
                } catch (...) {
                    errs[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }

    for (long long r = 0; r < n; ++r) {
        out.euler_rows += euler_ok[r];
        out.negative_s += neg_s[r];
    }
    if (out.euler_rows > 0 && out.euler_rows < n) {
        double scale = double(n) / double(out.euler_rows);
        out.contributions.middleCols(1 * (1 + m), 1 + m) *= scale;
    }

    // Fixed-block serial reduction: identical bits for any worker count or
    // input permutation.
    constexpr long long kBlock = 256;
    Eigen::VectorXd total = Eigen::VectorXd::Zero(K);
    for (long long lo = 0; lo < n; lo += kBlock) {
        long long hi = std::min(n, lo + kBlock);
        Eigen::VectorXd part = Eigen::VectorXd::Zero(K);
        for (long long r = lo; r < hi; ++r) part += out.contributions.row(r).transpose();
        total += part;
    }
    out.gbar = total / double(n);

    Eigen::MatrixXd Z(n, 1 + m);
    for (long long r = 0; r < n; ++r) {
        Z(r, 0) = 1.0;
        for (int j = 0; j < m; ++j)
            Z(r, 1 + j) = instrument_value(data[order[r]], spec.instruments[j]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
    out.instrument_rank_deficient = qr.rank() < 1 + m;
    return out;
}

SampleMeans sample_means(const std::vector<Observation>& data) {
    if (data.empty()) throw std::invalid_argument("sample_means: empty dataset");
    SampleMeans s;
    for (const Observation& o : data) {
        s.c_norm += o.c_norm;
        s.margin += o.price - o.c_norm;
        s.tfrac += o.tfrac;
        s.tport += o.tport;
        s.duration += o.duration;
        s.vremot += o.vremot;
        s.dremot += o.dremot;
        s.iremot += o.iremot;
        s.sigma_prev += o.sigma_prev;
    }
    double n = double(data.size());
    s.c_norm /= n;
    s.margin /= n;
    s.tfrac /= n;
    s.tport /= n;
    s.duration /= n;
    s.vremot /= n;
    s.dremot /= n;
    s.iremot /= n;
    s.sigma_prev /= n;
    s.rows = (long long)data.size();
    return s;
}

EstimateConfig EstimateConfig::from_json(const nlohmann::json& j) {
    EstimateConfig c;
    if (j.contains("instruments"))
        c.moments.instruments = j.at("instruments").get<std::vector<std::string>>();
    c.starts = j.value("starts", c.starts);
    c.stop_after_flat = j.value("stop_after_flat", c.stop_after_flat);
    c.seed = j.value("seed", c.seed);
    c.two_step = j.value("two_step", c.two_step);
    c.tol_f = j.value("tol_f", c.tol_f);
    c.tol_x = j.value("tol_x", c.tol_x);
    c.workers = j.value("workers", c.workers);
    if (j.contains("init")) {
        const auto& ji = j.at("init");
        if (ji.contains("alpha")) {
            auto v = ji.at("alpha").get<std::vector<double>>();
            if (v.size() != 5) throw std::invalid_argument("init.alpha needs 5 values");
            std::copy(v.begin(), v.end(), c.init.alpha.begin());
        }
        if (ji.contains("beta")) {
            auto v = ji.at("beta").get<std::vector<double>>();
            if (v.size() != 6) throw std::invalid_argument("init.beta needs 6 values");
            std::copy(v.begin(), v.end(), c.init.beta.begin());
        }
        c.init.m_logit = ji.value("m_logit", c.init.m_logit);
        c.init.r_logit = ji.value("r_logit", c.init.r_logit);
        c.init.d = ji.value("d", c.init.d);
        c.init.e = ji.value("e", c.init.e);
        c.init.delta_F = ji.value("delta_F", c.init.delta_F);
        c.init.delta_C = ji.value("delta_C", c.init.delta_C);
        c.init.h = ji.value("h", c.init.h);
    }
    return c;
}

namespace {

constexpr double kPenaltyKappa = 100.0;
constexpr double kFailObjective = 1e12;

struct StartOutcome {
    std::array<double, kParamCount> x{};
    double f = kFailObjective;
    bool converged = false;
};

/** Smooth inadmissibility penalty: mean positive part of -s across rows. */
double negative_s_penalty(const std::vector<Observation>& data,
                          const std::array<double, 5>& alpha) {
    double acc = 0.0;
    for (const Observation& o : data) acc += std::max(0.0, -switching_cost(o, alpha));
    return kPenaltyKappa * acc / double(data.size());
}

StartOutcome polish_start(const std::vector<Observation>& data,
                          const EstimateConfig& cfg, const Eigen::MatrixXd& Lt,
                          const std::array<double, kParamCount>& x0) {
    const int K = cfg.moments.count();
    auto resid = [&](const std::vector<double>& xv) {
        std::array<double, kParamCount> x{};
        std::copy(xv.begin(), xv.end(), x.begin());
        StructuralParams p = unpack(x, cfg.init);
        std::vector<double> r(K + 1, 0.0);
        try {
            MomentSummary ms = stack_moments(data, p, cfg.moments, cfg.workers);
            Eigen::VectorXd w = Lt * ms.gbar;
            for (int i = 0; i < K; ++i) r[i] = w[i];
            r[K] = negative_s_penalty(data, p.alpha);
        } catch (const std::exception&) {
            std::fill(r.begin(), r.end(), std::sqrt(kFailObjective / (K + 1)));
        }
        return r;
    };
    auto objective = [&](const std::vector<double>& xv) {
        auto r = resid(xv);
        double q = 0.0;
        for (double v : r) q += v * v;
        return std::isfinite(q) ? q : kFailObjective;
    };

    std::vector<double> x(x0.begin(), x0.end());
    StartOutcome out;
    for (int round = 0; round < 2; ++round) {
        std::vector<double> scale(kParamCount);
        for (int j = 0; j < kParamCount; ++j) scale[j] = 0.1 * (1.0 + std::abs(x[j]));
        MinimizeResult nm = nelder_mead(objective, x, scale, 6000, cfg.tol_f);
        MinimizeResult lm = levenberg_marquardt(resid, nm.x, 200, cfg.tol_f, cfg.tol_x);
        x = lm.f <= nm.f ? lm.x : nm.x;
        out.f = std::min(lm.f, nm.f);
        out.converged = lm.converged;
    }
    std::copy(x.begin(), x.end(), out.x.begin());
    return out;
}

struct MultiStartResult {
    StartOutcome best;
    int starts_used = 0;
    int best_start = -1;
};

MultiStartResult multi_start(const std::vector<Observation>& data,
                             const EstimateConfig& cfg, const Eigen::MatrixXd& Lt,
                             const std::array<double, kParamCount>& x0) {
    MultiStartResult r;
    int flat = 0;
    for (int k = 0; k < cfg.starts; ++k) {
        std::array<double, kParamCount> xk = x0;
        if (k > 0) {
            Rng rng(cfg.seed, std::uint64_t(k));
            for (int j = 0; j < kParamCount; ++j)
                xk[j] = x0[j] + 0.3 * (1.0 + std::abs(x0[j])) * rng.normal();
        }
        StartOutcome o = polish_start(data, cfg, Lt, xk);
        r.starts_used = k + 1;
        if (o.f < r.best.f - 1e-15) {
            r.best = o;
            r.best_start = k;
            flat = 0;
        } else {
            ++flat;
        }
        if (r.best.f < kFailObjective && flat >= cfg.stop_after_flat) break;
    }
    return r;
}

/** Centered moment covariance from per-row contributions. */
Eigen::MatrixXd moment_covariance(const MomentSummary& ms) {
    Eigen::MatrixXd C = ms.contributions.rowwise() - ms.gbar.transpose();
    return C.transpose() * C / double(ms.rows);
}

/** W = (Omega + lambda I)^-1 with an escalating ridge; identity when the
 *  covariance is numerically zero (noiseless data). */
Eigen::MatrixXd optimal_weight(const Eigen::MatrixXd& omega, long long n) {
    const int K = int(omega.rows());
    double tr = omega.trace();
    if (!(tr > 1e-14)) return Eigen::MatrixXd::Identity(K, K);
    double lambda = 1e-10 * tr / double(n);
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd reg = omega + lambda * Eigen::MatrixXd::Identity(K, K);
        Eigen::LLT<Eigen::MatrixXd> llt(reg);
        if (llt.info() == Eigen::Success)
            return llt.solve(Eigen::MatrixXd::Identity(K, K));
        lambda *= 100.0;
    }
    return Eigen::MatrixXd::Identity(K, K);
}

/** Upper-triangular factor Lt with W = Lt' Lt, so |Lt g|^2 = g'Wg. */
Eigen::MatrixXd whitening_factor(const Eigen::MatrixXd& W) {
    Eigen::LLT<Eigen::MatrixXd> llt(W);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("weight matrix is not positive definite");
    return Eigen::MatrixXd(llt.matrixL()).transpose();
}

}  // namespace

GMMResult estimate(const std::vector<Observation>& data, const EstimateConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("estimate: empty dataset");
    const int K = cfg.moments.count();
    if (K < kParamCount)
        throw std::invalid_argument("estimate: fewer moments than parameters");

    GMMResult res;
    res.df = K - kParamCount;
    res.means = sample_means(data);
    res.std_errors.fill(kNaN);

    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(K, K);
    Eigen::MatrixXd Lt = W;
    res.weight_step = "step-1-identity";

    std::array<double, kParamCount> x0 = pack(cfg.init);
    MultiStartResult stage = multi_start(data, cfg, Lt, x0);

    if (cfg.two_step && stage.best.f < kFailObjective) {
        StructuralParams p1 = unpack(stage.best.x, cfg.init);
        MomentSummary ms1 = stack_moments(data, p1, cfg.moments, cfg.workers);
        W = optimal_weight(moment_covariance(ms1), ms1.rows);
        Lt = whitening_factor(W);
        res.weight_step = "step-2-optimal";
        MultiStartResult stage2 = multi_start(data, cfg, Lt, stage.best.x);
        stage2.starts_used += stage.starts_used;
        stage = stage2;
    }

    res.starts_used = stage.starts_used;
    res.best_start = stage.best_start;
    res.objective = stage.best.f;
    res.converged = stage.best.converged && stage.best.f < kFailObjective;
    res.estimates = stage.best.x;
    res.params = unpack(stage.best.x, cfg.init);

    if (!(stage.best.f < kFailObjective))
        throw EstimateError("estimate: no start produced a finite objective", res);

    MomentSummary ms = stack_moments(data, res.params, cfg.moments, cfg.workers);
    res.n = ms.rows;
    res.euler_rows = ms.euler_rows;
    res.negative_s = ms.negative_s;
    res.instrument_rank_deficient = ms.instrument_rank_deficient;
    res.J = double(ms.rows) * ms.gbar.dot(W * ms.gbar);
    res.p_value = chi2_tail(res.J, res.df);

    // Jacobian of gbar by central differences.
    Eigen::MatrixXd G(K, kParamCount);
    bool jac_ok = true;
    for (int j = 0; j < kParamCount && jac_ok; ++j) {
        double step = 1e-6 * (1.0 + std::abs(res.estimates[j]));
        auto xp = res.estimates, xm = res.estimates;
        xp[j] += step;
        xm[j] -= step;
        try {
            Eigen::VectorXd gp =
                stack_moments(data, unpack(xp, cfg.init), cfg.moments, cfg.workers).gbar;
            Eigen::VectorXd gm =
                stack_moments(data, unpack(xm, cfg.init), cfg.moments, cfg.workers).gbar;
            G.col(j) = (gp - gm) / (2.0 * step);
        } catch (const std::exception&) {
            jac_ok = false;
        }
    }

    if (!jac_ok) {
        res.rank_deficient_G = true;
        return res;
    }
    res.grad_norm = (2.0 * G.transpose() * W * ms.gbar).norm();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
    if (qr.rank() < kParamCount) {
        res.rank_deficient_G = true;
        return res;  // SEs stay NaN: a pseudo-inverse would fake precision
    }
    Eigen::MatrixXd omega = moment_covariance(ms);
    Eigen::MatrixXd A = G.transpose() * W * G;
    Eigen::MatrixXd Ainv = A.inverse();
    Eigen::MatrixXd B = G.transpose() * W * omega * W * G;
    Eigen::MatrixXd cov = Ainv * B * Ainv / double(ms.rows);
    for (int j = 0; j < kParamCount; ++j)
        res.std_errors[j] = std::sqrt(std::max(0.0, cov(j, j)));
    return res;
}

nlohmann::json GMMResult::to_json() const {
    nlohmann::json je, js;
    auto names = param_names();
    for (int j = 0; j < kParamCount; ++j) {
        je[names[j]] = num_or_null(estimates[j]);
        js[names[j]] = num_or_null(std_errors[j]);
    }
    return nlohmann::json{
        {"estimates", je},
        {"std_errors", js},
        {"fixed",
         {{"delta_F", params.delta_F}, {"delta_C", params.delta_C}, {"h", params.h}}},
        {"J", num_or_null(J)},
        {"df", df},
        {"p_value", num_or_null(p_value)},
        {"weight_step", weight_step},
        {"starts_used", starts_used},
        {"best_start", best_start},
        {"objective", num_or_null(objective)},
        {"grad_norm", num_or_null(grad_norm)},
        {"converged", converged},
        {"n", n},
        {"euler_rows", euler_rows},
        {"negative_s", negative_s},
        {"rank_deficient_G", rank_deficient_G},
        {"instrument_rank_deficient", instrument_rank_deficient},
        {"means",
         {{"c_norm", means.c_norm},
          {"margin", means.margin},
          {"tfrac", means.tfrac},
          {"tport", means.tport},
          {"duration", means.duration},
          {"vremot", means.vremot},
          {"dremot", means.dremot},
          {"iremot", means.iremot},
          {"sigma_prev", means.sigma_prev},
          {"rows", means.rows}}}};
}

GMMResult GMMResult::from_json(const nlohmann::json& j) {
    GMMResult r;
    auto names = param_names();
    for (int i = 0; i < kParamCount; ++i) {
        r.estimates[i] = num_from(j.at("estimates").at(names[i]));
        r.std_errors[i] = num_from(j.at("std_errors").at(names[i]));
    }
    StructuralParams fixed;
    fixed.delta_F = j.at("fixed").at("delta_F").get<double>();
    fixed.delta_C = j.at("fixed").at("delta_C").get<double>();
    fixed.h = j.at("fixed").at("h").get<int>();
    r.params = unpack(r.estimates, fixed);
    r.J = num_from(j.at("J"));
    r.df = j.at("df").get<int>();
    r.p_value = num_from(j.at("p_value"));
    r.weight_step = j.at("weight_step").get<std::string>();
    r.starts_used = j.at("starts_used").get<int>();
    r.best_start = j.at("best_start").get<int>();
    r.objective = num_from(j.at("objective"));
    r.grad_norm = num_from(j.at("grad_norm"));
    r.converged = j.at("converged").get<bool>();
    r.n = j.at("n").get<long long>();
    r.euler_rows = j.at("euler_rows").get<long long>();
    r.negative_s = j.at("negative_s").get<int>();
    r.rank_deficient_G = j.at("rank_deficient_G").get<bool>();
    r.instrument_rank_deficient = j.at("instrument_rank_deficient").get<bool>();
    const auto& jm = j.at("means");
    r.means.c_norm = jm.at("c_norm").get<double>();
    r.means.margin = jm.at("margin").get<double>();
    r.means.tfrac = jm.at("tfrac").get<double>();
    r.means.tport = jm.at("tport").get<double>();
    r.means.duration = jm.at("duration").get<double>();
    r.means.vremot = jm.at("vremot").get<double>();
    r.means.dremot = jm.at("dremot").get<double>();
    r.means.iremot = jm.at("iremot").get<double>();
    r.means.sigma_prev = jm.at("sigma_prev").get<double>();
    r.means.rows = jm.at("rows").get<long long>();
    return r;
}

nlohmann::json CounterfactualReport::to_json() const {
    return nlohmann::json{
        {"scenario", scenario == Scenario::steady_state_average
                         ? "steady_state_average"
                         : "all_contracts_no_transition"},
        {"margin_base", margin_base},
        {"margin_cf", margin_cf},
        {"pct_ratio_of_averages", pct_ratio_of_averages},
        {"pct_average_of_ratios", pct_average_of_ratios},
        {"contracts", contracts}};
}

CounterfactualReport counterfactual_margins(const StructuralParams& p,
                                            const SampleMeans& means, Scenario scenario,
                                            const std::vector<Observation>* data) {
    CounterfactualReport r;
    r.scenario = scenario;
    if (scenario == Scenario::steady_state_average) {
        double price = p.d + p.e * 0.5 + means.c_norm + p.beta[0] * means.duration +
                       p.beta[1] * means.vremot + p.beta[2] * means.dremot +
                       p.beta[3] * means.iremot + p.beta[4] * means.tport +
                       p.beta[5] * means.tport * means.tfrac;
        r.margin_base = price - means.c_norm;
        r.margin_cf =
            r.margin_base - means.tport * (p.beta[4] + p.beta[5] * means.tfrac);
        r.pct_ratio_of_averages = counterfactual_from_margins(r.margin_base, r.margin_cf);
        r.pct_average_of_ratios = r.pct_ratio_of_averages;
        r.contracts = means.rows;
        return r;
    }
    if (!data)
        throw std::invalid_argument(
            "counterfactual_margins: all_contracts_no_transition needs the dataset");
    if (data->empty())
        throw std::invalid_argument("counterfactual_margins: empty dataset");
    double sum_base = 0.0, sum_cf = 0.0, sum_pct = 0.0;
    for (const Observation& o : *data) {
        double base = o.price - o.c_norm;
        double cf = base - o.tport * (p.beta[4] + p.beta[5] * o.tfrac);
        sum_base += base;
        sum_cf += cf;
        sum_pct += counterfactual_from_margins(base, cf);
    }
    double n = double(data->size());
    r.margin_base = sum_base / n;
    r.margin_cf = sum_cf / n;
    r.pct_ratio_of_averages = counterfactual_from_margins(r.margin_base, r.margin_cf);
    r.pct_average_of_ratios = sum_pct / n;
    r.contracts = (long long)data->size();
    return r;
}

double counterfactual_from_margins(double margin_base, double margin_cf) {
    if (margin_base == 0.0)
        throw std::invalid_argument("counterfactual_from_margins: zero base margin");
    return 100.0 * (margin_cf - margin_base) / margin_base;
}

double relative_margin_effect_per_100_days(const StructuralParams& p, double tfrac) {
    return p.beta[5] * tfrac;
}

}  // namespace lockin
