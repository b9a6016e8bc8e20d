#include "mikado/reports.hpp"

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>

#include "mikado/norms.hpp"

namespace mikado {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void take(const json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::parameter, std::string("config key '") + key + "': " + e.what());
    }
}

const std::set<std::string> known_keys = {
    "d",         "alpha",       "scheme",      "mode",        "schedule",    "steps",      "eps",
    "delta",     "p",           "theta",       "grid_cap",    "l2_grid_cap", "l2_resolution",
    "gamma_start", "seeds",     "amplitude",   "seed_grid",   "tolerances",  "lambda",     "audit_p",
    "audit_theta", "source",    "depth",       "grid",        "shear_mode",  "shear_amplitude",
    "random_seed", "random_band", "h",         "T",           "integrator",  "K",          "padding",
    "nonlinear", "gap_s",       "record_every", "q",          "out",         "snapshots",  "threads"};

bool pow2(long n) { return n > 0 && (n & (n - 1)) == 0; }

double unit_draw(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::parameter, "cannot create output directory " + dir + ": " + ec.message());
}

void write_params(const RunConfig& c, const std::string& command) {
    json j = to_json(c);
    j["command"] = command;
    std::ofstream os(fs::path(c.out) / "params.json");
    os << j.dump(2) << "\n";
}

std::string yes_no(bool b) { return b ? "1" : "0"; }

}  // namespace

RunConfig parse_config(const json& j) {
    if (!j.is_object()) fail(ErrorKind::parameter, "config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known_keys.count(it.key())) fail(ErrorKind::parameter, "unknown config key '" + it.key() + "'");
    RunConfig c;
    take(j, "d", c.d);
    take(j, "alpha", c.alpha);
    std::string s;
    if (j.contains("scheme")) {
        take(j, "scheme", s);
        if (s == "besov")
            c.scheme = Scheme::besov;
        else if (s == "l2")
            c.scheme = Scheme::l2;
        else
            fail(ErrorKind::parameter, "scheme must be besov or l2");
    }
    if (j.contains("mode")) {
        take(j, "mode", s);
        if (s == "strict")
            c.mode = StepMode::strict;
        else if (s == "empirical")
            c.mode = StepMode::empirical;
        else
            fail(ErrorKind::parameter, "mode must be strict or empirical");
    }
    if (j.contains("integrator")) {
        take(j, "integrator", s);
        if (s == "if-euler")
            c.integrator = Integrator::if_euler;
        else if (s == "if-rk2")
            c.integrator = Integrator::if_rk2;
        else
            fail(ErrorKind::parameter, "integrator must be if-euler or if-rk2");
    }
    take(j, "schedule", c.schedule);
    take(j, "steps", c.steps);
    take(j, "eps", c.eps);
    take(j, "delta", c.delta);
    take(j, "p", c.p);
    take(j, "theta", c.theta);
    take(j, "grid_cap", c.grid_cap);
    take(j, "l2_grid_cap", c.l2_grid_cap);
    take(j, "l2_resolution", c.l2_resolution);
    take(j, "gamma_start", c.gamma_start);
    take(j, "seeds", c.seeds);
    take(j, "amplitude", c.amplitude);
    take(j, "seed_grid", c.seed_grid);
    if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        if (!t.is_object()) fail(ErrorKind::parameter, "tolerances must be an object");
        for (auto it = t.begin(); it != t.end(); ++it) {
            static const std::set<std::string> tk = {"div_w", "support", "decomposition", "master", "reassembly", "wpl"};
            if (!tk.count(it.key())) fail(ErrorKind::parameter, "unknown tolerance '" + it.key() + "'");
        }
        take(t, "div_w", c.tol.div_w);
        take(t, "support", c.tol.support);
        take(t, "decomposition", c.tol.decomposition);
        take(t, "master", c.tol.master);
        take(t, "reassembly", c.tol.reassembly);
        take(t, "wpl", c.tol.wpl);
    }
    take(j, "lambda", c.lambda);
    take(j, "audit_p", c.audit_p);
    take(j, "audit_theta", c.audit_theta);
    take(j, "source", c.source);
    take(j, "depth", c.depth);
    take(j, "grid", c.grid);
    take(j, "shear_mode", c.shear_mode);
    take(j, "shear_amplitude", c.shear_amplitude);
    take(j, "random_seed", c.random_seed);
    take(j, "random_band", c.random_band);
    take(j, "h", c.h);
    take(j, "T", c.T);
    take(j, "K", c.K);
    take(j, "padding", c.padding);
    take(j, "nonlinear", c.nonlinear);
    take(j, "gap_s", c.gap_s);
    take(j, "record_every", c.record_every);
    take(j, "q", c.q);
    take(j, "out", c.out);
    take(j, "snapshots", c.snapshots);
    take(j, "threads", c.threads);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::parameter, "cannot open config " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        fail(ErrorKind::parameter, "config " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& c) {
    json j;
    j["d"] = c.d;
    j["alpha"] = c.alpha;
    j["scheme"] = scheme_name(c.scheme);
    j["mode"] = mode_name(c.mode);
    j["schedule"] = c.schedule;
    j["steps"] = c.steps;
    j["eps"] = c.eps;
    j["delta"] = c.delta;
    j["p"] = c.p;
    j["theta"] = c.theta;
    j["grid_cap"] = c.grid_cap;
    j["l2_grid_cap"] = c.l2_grid_cap;
    j["l2_resolution"] = c.l2_resolution;
    j["gamma_start"] = c.gamma_start;
    j["seeds"] = c.seeds;
    j["amplitude"] = c.amplitude;
    j["seed_grid"] = c.seed_grid;
    j["tolerances"] = {{"div_w", c.tol.div_w},   {"support", c.tol.support},       {"decomposition", c.tol.decomposition},
                       {"master", c.tol.master}, {"reassembly", c.tol.reassembly}, {"wpl", c.tol.wpl}};
    j["lambda"] = c.lambda;
    j["audit_p"] = c.audit_p;
    j["audit_theta"] = c.audit_theta;
    j["source"] = c.source;
    j["depth"] = c.depth;
    j["grid"] = c.grid;
    j["shear_mode"] = c.shear_mode;
    j["shear_amplitude"] = c.shear_amplitude;
    j["random_seed"] = c.random_seed;
    j["random_band"] = c.random_band;
    j["h"] = c.h;
    j["T"] = c.T;
    j["integrator"] = integrator_name(c.integrator);
    j["K"] = c.K;
    j["padding"] = c.padding;
    j["nonlinear"] = c.nonlinear;
    j["gap_s"] = c.gap_s;
    j["record_every"] = c.record_every;
    j["q"] = c.q;
    j["out"] = c.out;
    j["snapshots"] = c.snapshots;
    j["threads"] = c.threads;
    return j;
}

void validate(const RunConfig& c, const std::string& command) {
    auto bad = [](const std::string& m) { fail(ErrorKind::parameter, m); };
    if (c.d != 2 && c.d != 3) bad("d must be 2 or 3");
    if (!(c.alpha > 0)) bad("alpha must be positive");
    if (c.scheme == Scheme::l2 && !(c.alpha < (c.d + 1) / 4.0))
        bad("scheme l2 needs alpha < (d+1)/4, got alpha = " + fmt_num(c.alpha));
    if (c.steps < 0) bad("steps must be >= 0");
    if (c.schedule != "main" && c.schedule != "perturbative") bad("schedule must be main or perturbative");
    if (c.schedule == "perturbative" && !(c.eps > 0)) bad("perturbative schedule needs eps > 0");
    for (const auto* v : {&c.delta, &c.p, &c.theta})
        if (!v->empty() && int(v->size()) != c.steps) bad("schedule override arrays must have one entry per step");
    for (double x : c.delta)
        if (!(x > 0)) bad("delta overrides must be positive");
    for (double x : c.p)
        if (!(x > 1)) bad("p overrides must exceed 1");
    for (double x : c.theta)
        if (!(x > 0 && x < 1)) bad("theta overrides must lie in (0,1)");
    if (!pow2(c.grid_cap) || c.grid_cap < 16) bad("grid_cap must be a power of two >= 16");
    if (!pow2(c.l2_grid_cap) || c.l2_grid_cap < 16) bad("l2_grid_cap must be a power of two >= 16");
    if (c.l2_resolution < 1 || c.gamma_start < 1) bad("l2_resolution and gamma_start must be >= 1");
    if (c.seeds.empty()) bad("need at least one seed id");
    if (!(c.amplitude > 0)) bad("amplitude must be positive");
    if (!pow2(c.seed_grid) || c.seed_grid < 8) bad("seed_grid must be a power of two >= 8");
    for (double t : {c.tol.div_w, c.tol.support, c.tol.decomposition, c.tol.master, c.tol.reassembly, c.tol.wpl})
        if (!(t >= DBL_EPSILON)) bad("tolerances must be >= machine epsilon");
    if (c.threads < 1) bad("threads must be >= 1");

    if (command == "audit") {
        if (!is_power_of_four(c.lambda)) bad("lambda must be a power of 4, got " + std::to_string(c.lambda));
        if (!(c.audit_p > 1)) bad("audit_p must exceed 1");
        if (!(c.audit_theta > 0 && c.audit_theta < 1)) bad("audit_theta must lie in (0,1)");
    }
    if (command == "simulate" || command == "flux") {
        static const std::set<std::string> src = {"seed", "shear", "zero", "random", "iterate"};
        if (!src.count(c.source)) bad("source must be one of seed, shear, zero, random, iterate");
        if (!pow2(c.grid) || c.grid < 8) bad("grid must be a power of two >= 8");
        if (c.depth < 0) bad("depth must be >= 0");
        if (c.source == "shear" && (c.shear_mode < 1 || c.shear_mode >= c.grid / 2))
            bad("shear_mode must lie in [1, grid/2)");
        if (c.source == "random" && (c.random_band < 1 || 2 * c.random_band >= c.grid / 2))
            bad("random_band must satisfy 4 band < grid");
    }
    if (command == "simulate") {
        if (!(c.h > 0)) bad("h must be positive");
        if (!(c.T >= 0)) bad("T must be >= 0");
        if (c.K < 0 || c.K > c.grid / 2) bad("K must lie in [0, grid/2]");
        if (c.padding < 1) bad("padding must be >= 1");
        if (c.record_every < 1) bad("record_every must be >= 1");
    }
    if (command == "flux" && c.q != 0 && !(c.q >= 1)) bad("q must be >= 1 (or 0 for the default)");
}

Schedule make_schedule(const RunConfig& c) {
    Schedule s = c.schedule == "main" ? Schedule::main(c.steps) : Schedule::perturbative(c.steps, c.eps, 0.5);
    if (!c.delta.empty()) s.delta = c.delta;
    if (!c.p.empty()) s.p = c.p;
    if (!c.theta.empty()) s.theta = c.theta;
    return s;
}

std::string fmt_num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9e", x);
    return buf;
}

void CsvTable::write(std::ostream& os) const {
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << "\n";
    }
}

void CsvTable::write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::resource, "cannot write " + path);
    write(os);
}

CsvTable report_table(const std::vector<RunReport>& reports) {
    CsvTable t;
    t.header = {"seed[id]",        "n[step]",          "scheme[-]",           "mode[-]",
                "status[-]",       "lambda[freq]",     "mu[concentration]",   "gamma[oscillation]",
                "sigma[freq]",     "G[points/axis]",   "R_prev_hs[H^-s]",     "R_hs[H^-s]",
                "R_l1[L^1]",       "R_prev_l1[L^1]",   "w_lp[L^p]",           "w_besov[B^-theta_inf1]",
                "w_l2[L^2]",       "w_linf[L^inf]",    "para_sum[H^-s]",      "para_bound[H^-s]",
                "div_w[rel L^2]",  "support_leak[rel L^2]", "decomposition[rel]", "master_residual[rel H^-s]",
                "master_residual_l2[rel L^2]", "amp_reassembly[abs]", "A_meas[-]", "accepted[bool]"};
    for (const auto& r : reports) {
        t.rows.push_back({std::to_string(r.seed), std::to_string(r.n), r.scheme, r.mode, r.status,
                          std::to_string(r.lambda), fmt_num(r.mu), fmt_num(r.gamma), std::to_string(r.sigma),
                          std::to_string(r.G), fmt_num(r.R_prev_hs), fmt_num(r.R_hs), fmt_num(r.R_l1),
                          fmt_num(r.R_prev_l1), fmt_num(r.w_lp), fmt_num(r.w_besov), fmt_num(r.w_l2),
                          fmt_num(r.w_linf), fmt_num(r.para_sum), fmt_num(r.para_bound), fmt_num(r.div_w),
                          fmt_num(r.support_leak), fmt_num(r.decomposition), fmt_num(r.master_residual),
                          fmt_num(r.master_residual_l2), fmt_num(r.amp_reassembly), fmt_num(r.A_meas),
                          yes_no(r.accepted)});
    }
    return t;
}

CsvTable timing_table(const std::vector<RunReport>& reports) {
    CsvTable t;
    t.header = {"seed[id]", "n[step]", "wall[s]"};
    for (const auto& r : reports) t.rows.push_back({std::to_string(r.seed), std::to_string(r.n), fmt_num(r.wall_seconds)});
    return t;
}

CsvTable tidy_table(const std::vector<RunReport>& reports) {
    CsvTable t;
    t.header = {"seed[id]", "n[step]", "metric[-]", "value[see metric]"};
    for (const auto& r : reports) {
        const std::pair<const char*, double> m[] = {
            {"R_hs", r.R_hs},     {"R_l1", r.R_l1},       {"w_lp", r.w_lp},     {"w_besov", r.w_besov},
            {"w_l2", r.w_l2},     {"para_sum", r.para_sum}, {"osc_l1", r.osc_l1}, {"dis_l1", r.dis_l1},
            {"off_l1", r.off_l1}, {"cor_l1", r.cor_l1},   {"lin_l1", r.lin_l1}, {"trunc_l1", r.trunc_l1},
            {"osc_hs", r.osc_hs}, {"dis_hs", r.dis_hs},   {"off_hs", r.off_hs}, {"cor_hs", r.cor_hs},
            {"lin_hs", r.lin_hs}};
        for (const auto& [k, v] : m) t.rows.push_back({std::to_string(r.seed), std::to_string(r.n), k, fmt_num(v)});
    }
    return t;
}

CsvTable audit_table(const ParameterAudit& a) {
    CsvTable t;
    t.header = {"id[-]", "lhs[log2]", "rhs[log2]", "slack[log2]", "pass[bool]"};
    for (const auto& r : a.rows) t.rows.push_back({r.id, fmt_num(r.lhs), fmt_num(r.rhs), fmt_num(r.slack), yes_no(r.pass)});
    return t;
}

CsvTable plan_table(const FrequencyPlan& plan, const DirectionCatalog& cat) {
    CsvTable t;
    t.header = {"quantity[-]", "value[exact integer or bool]"};
    t.rows.push_back({"lambda", std::to_string(plan.lambda)});
    t.rows.push_back({"e", std::to_string(plan.e)});
    t.rows.push_back({"c_lambda_sq", std::to_string(plan.c_lambda_sq)});
    t.rows.push_back({"b", plan.b.str()});
    t.rows.push_back({"sigma", plan.sigma.str()});
    for (std::size_t i = 0; i < plan.sigma_k.size(); ++i) {
        const Mode& k = cat.k[i];
        std::string name = "sigma_k(" + std::to_string(k[0]);
        for (int a = 1; a < cat.d; ++a) name += " " + std::to_string(k[a]);
        t.rows.push_back({name + ")", plan.sigma_k[i].str()});
    }
    t.rows.push_back({"sigma_gt_50_lambda_e", yes_no(plan.sigma_gt_50)});
    t.rows.push_back({"b_ge_45", yes_no(plan.b_ge_45)});
    t.rows.push_back({"interval_11_9_to_9_5", yes_no(plan.interval)});
    t.rows.push_back({"annulus_containment", yes_no(plan.containment)});
    return t;
}

CsvTable gap_table(const GapCurve& g) {
    CsvTable t;
    t.header = {"t[time]", "l2[L^2]", "hs[H^-s]", "gap[H^-s]"};
    for (std::size_t i = 0; i < g.t.size(); ++i)
        t.rows.push_back({fmt_num(g.t[i]), fmt_num(g.l2[i]), fmt_num(g.hs[i]), fmt_num(g.gap[i])});
    return t;
}

CsvTable flux_csv(const std::vector<FluxRow>& rows) {
    CsvTable t;
    t.header = {"N[freq]",          "transport[energy/time]",   "commutator[energy/time]", "identity_gap[energy/time]",
                "cancellation[energy/time]", "dissipation[energy/time]", "scale[energy/time]"};
    for (const auto& r : rows)
        t.rows.push_back({std::to_string(r.N), fmt_num(r.transport), fmt_num(r.commutator), fmt_num(r.identity_gap()),
                          fmt_num(r.cancellation), fmt_num(r.dissipation), fmt_num(r.scale)});
    return t;
}

CsvTable bn_table(const BnSequences& b) {
    CsvTable t;
    t.header = {"N[freq]", "block[L^q]", "b_N[-]", "B_N0[-]"};
    for (std::size_t i = 0; i < b.N.size(); ++i)
        t.rows.push_back({std::to_string(b.N[i]), fmt_num(b.block[i]), fmt_num(b.b[i]), fmt_num(b.B[i])});
    return t;
}

void write_snapshot(const std::string& path, const SpectralField& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail(ErrorKind::resource, "cannot write snapshot " + path);
    os.write("MKF1", 4);
    const std::uint32_t hdr[3] = {std::uint32_t(f.grid.d), std::uint32_t(f.grid.G), std::uint32_t(f.rank)};
    os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    const std::uint8_t domain = 0;  // 0 spectral, 1 physical
    os.write(reinterpret_cast<const char*>(&domain), 1);
    for (const auto& c : f.comp) os.write(reinterpret_cast<const char*>(c.data()), std::streamsize(c.size() * sizeof(cplx)));
    if (!os) fail(ErrorKind::resource, "short write on snapshot " + path);
}

SpectralField read_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) fail(ErrorKind::parameter, "cannot open snapshot " + path);
    char magic[4];
    std::uint32_t hdr[3];
    std::uint8_t domain = 0;
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(hdr), sizeof hdr);
    is.read(reinterpret_cast<char*>(&domain), 1);
    if (!is || std::string(magic, 4) != "MKF1") fail(ErrorKind::parameter, path + " is not an MKF1 snapshot");
    if ((hdr[0] != 2 && hdr[0] != 3) || hdr[1] < 4 || hdr[1] % 2 || hdr[2] > 2)
        fail(ErrorKind::parameter, path + ": corrupt snapshot header");
    const TorusGrid g{int(hdr[0]), int(hdr[1])};
    const Rank r = Rank(hdr[2]);
    if (domain == 1) {
        GridField gf(g, r);
        for (auto& c : gf.comp) is.read(reinterpret_cast<char*>(c.data()), std::streamsize(c.size() * sizeof(double)));
        if (!is) fail(ErrorKind::parameter, path + ": truncated snapshot");
        return forward_transform(gf);
    }
    if (domain != 0) fail(ErrorKind::parameter, path + ": unknown domain flag");
    SpectralField f(g, r);
    for (auto& c : f.comp) is.read(reinterpret_cast<char*>(c.data()), std::streamsize(c.size() * sizeof(cplx)));
    if (!is) fail(ErrorKind::parameter, path + ": truncated snapshot");
    return f;
}

SpectralField shear_flow(int d, int G, int mode, double amplitude) {
    // u_1 = A sin(2 pi m x_d)
    SpectralField u(TorusGrid(d, G), Rank::vector);
    u.comp[0][std::size_t(mode)] = cplx(0.0, -0.5 * amplitude);
    return u;
}

SpectralField random_solenoidal(int d, int G, int band, unsigned seed) {
    TorusGrid g(d, G);
    std::mt19937_64 rng(0x6d696b61646fULL ^ seed);
    SpectralField f(g, Rank::vector);
    const double b2 = double(band) * band;
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool nyq, double) {
        double m2 = mode_norm2(m, d);
        for (int c = 0; c < d; ++c) {
            double re = unit_draw(rng), im = unit_draw(rng);
            if (!nyq && m2 > 0 && m2 <= b2) f.comp[c][i] = cplx(re, im) / (1.0 + m2);
        }
    });
    // round trip through physical space enforces the conjugate symmetry of real fields
    f = forward_transform(inverse_transform(f));
    f = leray_project(f);
    for (auto& c : f.comp) c[0] = 0;
    return f;
}

SpectralField source_field(const RunConfig& c) {
    if (c.source == "zero") return SpectralField(TorusGrid(c.d, c.grid), Rank::vector);
    if (c.source == "shear") return shear_flow(c.d, c.grid, c.shear_mode, c.shear_amplitude);
    if (c.source == "random") return random_solenoidal(c.d, c.grid, c.random_band, c.random_seed);
    ReynoldsState seed = seed_state(c.d, c.alpha, c.amplitude, c.seeds.front(), c.seed_grid);
    if (c.source == "seed" || c.depth == 0) return seed.u.grid.G == c.grid ? seed.u : resample(seed.u, c.grid);
    StepOptions opt;
    opt.alpha = c.alpha;
    opt.mode = c.mode;
    opt.grid_cap = c.grid_cap;
    RunConfig cc = c;
    cc.steps = c.depth;
    if (int(cc.delta.size()) != cc.depth) cc.delta.clear(), cc.p.clear(), cc.theta.clear();
    L2Options l2;
    l2.alpha = c.alpha;
    l2.grid_cap = c.l2_grid_cap;
    l2.resolution = c.l2_resolution;
    ScheduleRun run = run_schedule(seed, make_schedule(cc), c.scheme, opt, l2);
    for (const auto& r : run.reports)
        if (!r.accepted) fail(ErrorKind::resource, "iterate source: step " + std::to_string(r.n) + " was not accepted");
    return run.final_state.u;
}

int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::parameter:
        case ErrorKind::hypothesis:
        case ErrorKind::domain:
        case ErrorKind::precondition:
        case ErrorKind::unsupported:
            return kExitConfig;
        case ErrorKind::resource:
        case ErrorKind::resolution:
            return kExitResource;
        default:
            return kExitAssertion;
    }
}

bool step_assertions_hold(const RunReport& r, const Tolerances& tol) {
    if (r.master_residual > tol.master || r.amp_reassembly > tol.reassembly) return false;
    if (r.scheme == "besov")
        return r.div_w <= tol.div_w && r.support_leak <= tol.support && r.decomposition <= tol.decomposition &&
               r.wpl_identity <= tol.wpl;
    return true;
}

int cmd_iterate(const RunConfig& c) {
    validate(c, "iterate");
    ensure_dir(c.out);
    write_params(c, "iterate");
    StepOptions opt;
    opt.alpha = c.alpha;
    opt.mode = c.mode;
    opt.grid_cap = c.grid_cap;
    L2Options l2;
    l2.alpha = c.alpha;
    l2.grid_cap = c.l2_grid_cap;
    l2.resolution = c.l2_resolution;
    const Schedule sched = make_schedule(c);

    std::vector<RunReport> all;
    int code = kExitOk;
    for (int sid : c.seeds) {
        ReynoldsState seed = seed_state(c.d, c.alpha, c.amplitude, sid, c.seed_grid);
        StateObserver snap;
        if (c.snapshots)
            snap = [&](int n, const ReynoldsState& st) {
                std::string stem = "seed" + std::to_string(sid) + "_n" + std::to_string(n);
                write_snapshot((fs::path(c.out) / (stem + "_u.mkf")).string(), st.u);
                write_snapshot((fs::path(c.out) / (stem + "_R.mkf")).string(), st.R);
            };
        ScheduleRun run = c.steps > 0 ? run_schedule(seed, sched, c.scheme, opt, l2, snap) : ScheduleRun{};
        for (auto r : run.reports) {
            r.seed = sid;
            if (r.infeasible)
                code = std::max(code, kExitResource);
            else if (!r.accepted || !step_assertions_hold(r, c.tol))
                code = std::max(code, kExitAssertion);
            all.push_back(r);
        }
    }
    report_table(all).write((fs::path(c.out) / "reports.csv").string());
    tidy_table(all).write((fs::path(c.out) / "tidy.csv").string());
    timing_table(all).write((fs::path(c.out) / "timing.csv").string());
    return code;
}

int cmd_audit(const RunConfig& c) {
    validate(c, "audit");
    ensure_dir(c.out);
    write_params(c, "audit");
    ParameterAudit a = audit_parameters(c.lambda, c.audit_p, c.audit_theta, c.d, c.alpha);
    audit_table(a).write((fs::path(c.out) / "audit.csv").string());
    plan_table(a.plan, build_catalog(c.d)).write((fs::path(c.out) / "plan.csv").string());
    return a.all_pass() ? kExitOk : kExitAssertion;
}

int cmd_simulate(const RunConfig& c) {
    validate(c, "simulate");
    ensure_dir(c.out);
    write_params(c, "simulate");
    SpectralField u0 = source_field(c);
    EvolutionConfig ec;
    ec.alpha = c.alpha;
    ec.K = c.K;
    ec.h = c.h;
    ec.T = c.T;
    ec.integrator = c.integrator;
    ec.nonlinear = c.nonlinear;
    ec.padding = c.padding;
    ec.record_every = c.record_every;
    const double s = c.gap_s >= 0 ? c.gap_s : c.d / 2.0 + 2 * c.alpha + 2;
    Observer snap;
    if (c.snapshots)
        snap = [&](int n, double, const SpectralField& u) {
            write_snapshot((fs::path(c.out) / ("traj_" + std::to_string(n) + "_u.mkf")).string(), u);
        };
    GapCurve g = nonuniqueness_gap(u0, ec, s, snap);
    gap_table(g).write((fs::path(c.out) / "trajectory.csv").string());
    CsvTable sum;
    sum.header = {"s[order]", "drift_rate[H^-s/time]", "forcing[H^-s/time]"};
    sum.rows.push_back({fmt_num(g.s), fmt_num(g.drift_rate), fmt_num(g.forcing)});
    sum.write((fs::path(c.out) / "gap_summary.csv").string());
    return kExitOk;
}

int cmd_flux(const RunConfig& c) {
    validate(c, "flux");
    ensure_dir(c.out);
    write_params(c, "flux");
    SpectralField u = source_field(c);
    auto rows = flux_table(u, c.alpha);
    flux_csv(rows).write((fs::path(c.out) / "flux.csv").string());
    bn_table(bN_sequences(u, c.alpha, c.q)).write((fs::path(c.out) / "bn.csv").string());
    // the cancellation identity holds for any divergence-free field
    for (const auto& r : rows)
        if (r.identity_gap() > 1e-8 * std::max(r.scale, 1e-300) && r.identity_gap() > 1e-14) return kExitAssertion;
    return kExitOk;
}

}  // namespace mikado
