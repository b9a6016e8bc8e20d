#include "mikado/convex.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "mikado/antidiv.hpp"
#include "mikado/norms.hpp"

namespace mikado {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

// integer coordinates of every sample
template <class F>
void for_each_index(const TorusGrid& g, F&& f) {
    const int G = g.G;
    std::size_t idx = 0;
    if (g.d == 2) {
        for (int i0 = 0; i0 < G; ++i0)
            for (int i1 = 0; i1 < G; ++i1, ++idx) f(idx, std::array<long, 3>{i0, i1, 0});
    } else {
        for (int i0 = 0; i0 < G; ++i0)
            for (int i1 = 0; i1 < G; ++i1)
                for (int i2 = 0; i2 < G; ++i2, ++idx) f(idx, std::array<long, 3>{i0, i1, i2});
    }
}

// cos(2 pi freq k.x) at grid points through an exact integer phase
struct CosWave {
    int G;
    long freq;
    Mode k;
    int d;
    const std::vector<double>* table;
    double operator()(const std::array<long, 3>& i) const {
        long s = 0;
        for (int a = 0; a < d; ++a) s += long(k[a]) * i[a];
        s %= G;
        if (s < 0) s += G;
        long ph = ((freq % G) * s) % G;
        return (*table)[ph];
    }
};

std::vector<double> cos_table(int G) {
    std::vector<double> t(G);
    for (int r = 0; r < G; ++r) t[r] = std::cos(kTwoPi * r / G);
    return t;
}

int pow2_at_least(double v) {
    int G = 4;
    while (G < v) G *= 2;
    return G;
}

void scale_leq(const TorusGrid& g, CplxVec& c, long N) {
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double) {
        c[i] *= chi(std::sqrt(mode_norm2(m, g.d)) / double(N));
    });
}

// inverse transform of zeta_a c (zeta = 2 pi i m); Nyquist dropped
RealVec inverse_derivative(const TorusGrid& g, const CplxVec& c, int a, bool inv_lap = false) {
    CplxVec t(c.size());
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (nyq) return;
        cplx z(0, kTwoPi * m[a]);
        if (inv_lap) {
            double m2 = mode_norm2(m, g.d);
            if (m2 == 0) return;
            z /= -4 * std::numbers::pi * std::numbers::pi * m2;
        }
        t[i] = z * c[i];
    });
    return inverse_component(g, t);
}

double frob_sym(const double* v, int d) {
    // v holds the packed upper triangle
    double s = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            double x = v[SymField::idx(i, j, d)];
            s += (i == j ? 1.0 : 2.0) * x * x;
        }
    return std::sqrt(s);
}

double sym_hs(const SymField& S, double s) {
    const TorusGrid& g = S.grid;
    const int d = g.d;
    double acc = 0;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            SpectralField f;
            f.grid = g;
            f.comp.push_back(forward_component(g, S.c[SymField::idx(i, j, d)]));
            double v = sobolev_norm(f, -s, false);
            acc += (i == j ? 1.0 : 2.0) * v * v;
        }
    return std::sqrt(acc);
}

bool is_zero(const SpectralField& f) {
    for (const auto& c : f.comp)
        for (const auto& z : c)
            if (z != cplx(0, 0)) return false;
    return true;
}

double leray_hs(const SpectralField& v, double s) { return sobolev_norm(leray_project(v), -s, false); }

}  // namespace

const char* mode_name(StepMode m) { return m == StepMode::strict ? "strict" : "empirical"; }
const char* scheme_name(Scheme s) { return s == Scheme::besov ? "besov" : "l2"; }

// ---------- symmetric storage

SymField::SymField(const TorusGrid& g) : grid(g) {
    const int n = g.d * (g.d + 1) / 2;
    c.assign(n, RealVec(g.points(), 0.0));
}

int SymField::idx(int i, int j, int d) {
    if (i > j) std::swap(i, j);
    return i * d - i * (i - 1) / 2 + (j - i);
}

SymField to_sym(const SpectralField& R) {
    if (R.rank != Rank::matrix) fail(ErrorKind::structural, "to_sym needs a matrix field");
    const int d = R.grid.d;
    SymField S;
    S.grid = R.grid;
    S.c.resize(d * (d + 1) / 2);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            if (i == j) {
                S.c[SymField::idx(i, j, d)] = inverse_component(R.grid, R.at(i, i));
            } else {
                CplxVec t(R.at(i, j).size());
                for (std::size_t m = 0; m < t.size(); ++m) t[m] = 0.5 * (R.at(i, j)[m] + R.at(j, i)[m]);
                S.c[SymField::idx(i, j, d)] = inverse_component(R.grid, t);
            }
        }
    return S;
}

SpectralField from_sym(const SymField& S) {
    const int d = S.grid.d;
    SpectralField R(S.grid, Rank::matrix);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            R.at(i, j) = forward_component(S.grid, S.c[SymField::idx(i, j, d)]);
            if (i != j) R.at(j, i) = R.at(i, j);
        }
    return R;
}

double frobenius_at(const SymField& S, std::size_t p) {
    const int d = S.grid.d;
    double v[6];
    for (std::size_t c = 0; c < S.c.size(); ++c) v[c] = S.c[c][p];
    return frob_sym(v, d);
}

double sym_l1(const SymField& S) {
    const std::size_t n = S.grid.points();
    double acc = 0;
    for (std::size_t p = 0; p < n; ++p) acc += frobenius_at(S, p);
    return acc / double(n);
}

double sym_sup(const SymField& S) {
    const std::size_t n = S.grid.points();
    double m = 0;
    for (std::size_t p = 0; p < n; ++p) m = std::max(m, frobenius_at(S, p));
    return m;
}

// ---------- schedules

Schedule Schedule::main(int steps) {
    Schedule s;
    for (int n = 1; n <= steps; ++n) {
        double t = std::ldexp(1.0, -n);
        s.delta.push_back(t);
        s.p.push_back(2 - t);
        s.theta.push_back(t);
    }
    return s;
}

Schedule Schedule::perturbative(int steps, double eps, double theta) {
    Schedule s;
    for (int n = 1; n <= steps; ++n) {
        s.delta.push_back(std::ldexp(eps, -n - 2));
        s.p.push_back(1.5);
        s.theta.push_back(theta);
    }
    return s;
}

// ---------- seeds

SpectralField seed_velocity(int d, int G, double amplitude, double phase) {
    if (d != 2 && d != 3) fail(ErrorKind::unsupported, "d must be 2 or 3");
    TorusGrid g(d, G);
    GridField u(g, Rank::vector);
    // component i depends on x_{i+1} only: divergence free, supported on |m| = 1
    for_each_point(g, [&](std::size_t p, const std::array<double, 3>& x) {
        for (int i = 0; i < d; ++i) u[i][p] = amplitude * std::cos(kTwoPi * x[(i + 1) % d] + phase * (i + 1));
    });
    SpectralField f = forward_transform(u);
    // drop roundoff off the unit sphere so the support is exact
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double) {
        if (mode_norm2(m, d) != 1)
            for (auto& c : f.comp) c[i] = 0;
    });
    return f;
}

static SpectralField seed_stress(const SpectralField& u, double alpha) {
    SpectralField uu = pointwise_product(u, u, 1);
    SpectralField rhs = divergence(uu);
    rhs += fractional_laplacian(alpha, u);
    return antidiv(rhs);
}

ReynoldsState seed_state(int d, double alpha, double amplitude, int seed_id, int G) {
    if (!(alpha > 0)) fail(ErrorKind::parameter, "alpha must be positive");
    ReynoldsState s;
    const double phase = kTwoPi * std::fmod(0.6180339887498949 * seed_id, 1.0);
    s.u = seed_velocity(d, G, amplitude, phase);
    s.R = seed_stress(s.u, alpha);
    s.alpha = alpha;
    s.n = 0;
    s.N = 2;
    s.bands = {2};
    return s;
}

std::vector<ReynoldsState> seed_family(int d, double alpha, int count, double amplitude, int G) {
    std::vector<ReynoldsState> out;
    for (int i = 0; i < count; ++i) {
        ReynoldsState s;
        s.u = seed_velocity(d, G, amplitude, kTwoPi * i / count);
        s.R = seed_stress(s.u, alpha);
        s.alpha = alpha;
        s.N = 2;
        s.bands = {2};
        out.push_back(std::move(s));
    }
    return out;
}

double min_pairwise_l1(const std::vector<ReynoldsState>& seeds) {
    double best = kInf;
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t j = i + 1; j < seeds.size(); ++j) best = std::min(best, lp_norm(seeds[i].u - seeds[j].u, 1));
    return best;
}

double stress_hs(const SpectralField& R, double alpha) {
    const double s = R.grid.d / 2.0 + 2 * alpha + 1;
    return sobolev_norm(R, -s, false);
}

double reynolds_residual(const ReynoldsState& st, int padding) {
    const double s = st.u.grid.d / 2.0 + 2 * st.alpha + 1;
    SpectralField a = divergence(pointwise_product(st.u, st.u, padding));
    SpectralField b = fractional_laplacian(st.alpha, st.u);
    SpectralField c = divergence(st.R);
    double scale = std::max({leray_hs(a, s), leray_hs(b, s), leray_hs(c, s)});
    if (scale == 0) return 0;
    return leray_hs(a + b - c, s) / scale;
}

// ---------- Besov scheme

std::vector<RealVec> besov_amplitudes(const SymField& R, const DirectionCatalog& cat, double* Rinf_out,
                                      double* reassembly) {
    const int d = R.grid.d;
    const std::size_t n = R.grid.points();
    const double Rinf = sym_sup(R);
    if (Rinf_out) *Rinf_out = Rinf;
    std::vector<RealVec> a(cat.size(), RealVec(n, 0.0));
    if (reassembly) *reassembly = 0;
    if (Rinf == 0) return a;
    const double c = 4.0 * d * d * Rinf;
    double worst = 0;
    for (std::size_t p = 0; p < n; ++p) {
        double M[9], x[9];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) M[i * d + j] = (i == j ? 1.0 : 0.0) - R.at(i, j, p) / c;
        gamma_squared_raw(cat, M, x);
        double E[9] = {0};
        for (int k = 0; k < cat.size(); ++k) {
            if (x[k] < 0) fail(ErrorKind::internal, "Nash coefficient left its domain");
            a[k][p] = std::sqrt(2 * c * x[k]);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) E[i * d + j] += 0.5 * a[k][p] * a[k][p] * cat.k[k][i] * cat.k[k][j];
        }
        if (reassembly)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    double want = (i == j ? c : 0.0) - R.at(i, j, p);
                    worst = std::max(worst, std::abs(E[i * d + j] - want));
                }
    }
    if (reassembly) *reassembly = worst / c;
    return a;
}

ParameterSet besov_parameters(long lambda, double delta, double p, double theta, int d, double alpha,
                              const StepOptions& opt, const DirectionCatalog& cat) {
    ParameterAudit au = audit_parameters(lambda, p, theta, d, alpha);
    ParameterSet ps;
    ps.mode = opt.mode;
    ps.lambda = lambda;
    ps.eps = au.eps;
    ps.beta = au.beta;
    ps.s = au.s;
    ps.delta = delta;
    ps.p = p;
    ps.theta = theta;
    ps.gamma = std::sqrt(double(lambda));
    FrequencyPlan plan;
    if (opt.mode == StepMode::strict) {
        ps.e = au.e;
        ps.mu = au.mu;
        plan = au.plan;
    } else {
        ps.e = opt.e_eff;
        ps.mu = opt.mu_override > 0 ? opt.mu_override : std::max(au.mu, mu_min(cat));
        plan = select_sigma(lambda, opt.e_eff, cat);
    }
    if (!plan.valid()) fail(ErrorKind::internal, "frequency plan failed its exact checks");
    const BigInt lim = BigInt(1) << 40;
    if (plan.sigma > lim) {
        ps.sigma = -1;  // far beyond any grid
    } else {
        ps.sigma = plan.sigma.convert_to<long>();
        for (const auto& sk : plan.sigma_k) ps.sigma_k.push_back(sk.convert_to<long>());
    }
    return ps;
}

namespace {

struct BesovCtx {
    TorusGrid g;
    const DirectionCatalog* cat;
    TubeProfile prof;
    ParameterSet ps;
    double Rinf = 0;
    double c = 0;
    std::vector<double> table;
};

// a_k at one sample, from the packed stress
void amplitudes_at(const BesovCtx& cx, const SymField& R, std::size_t p, double* a) {
    const int d = cx.g.d;
    double M[9], x[9];
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M[i * d + j] = (i == j ? 1.0 : 0.0) - R.at(i, j, p) / cx.c;
    gamma_squared_raw(*cx.cat, M, x);
    for (int k = 0; k < cx.cat->size(); ++k) a[k] = std::sqrt(2 * cx.c * std::max(x[k], 0.0));
}

RealVec psi_samples(const BesovCtx& cx, int k) {
    SpectralField f = tube_spectrum(*cx.cat, k, cx.ps.mu, static_cast<int>(cx.ps.gamma), cx.g, cx.prof);
    return inverse_component(cx.g, f.comp[0]);
}

CosWave wave(const BesovCtx& cx, int k, int mult) {
    return CosWave{cx.g.G, mult * cx.ps.sigma_k[k], cx.cat->kperp[k], cx.g.d, &cx.table};
}

PerturbationBundle perturb(const BesovCtx& cx, const SymField& R) {
    const TorusGrid& g = cx.g;
    const int d = g.d;
    const std::size_t n = g.points();
    const auto& cat = *cx.cat;
    const long lam = cx.ps.lambda;
    PerturbationBundle pb;
    pb.Rinf = cx.Rinf;
    pb.wp = GridField(g, Rank::vector);
    pb.wl = GridField(g, Rank::vector);
    pb.wd = GridField(g, Rank::vector);
    const int na = d * (d - 1) / 2;  // antisymmetric potential, (i<j) packed
    std::vector<RealVec> A(na, RealVec(n, 0.0));
    auto aidx = [d](int i, int j) { return SymField::idx(i, j, d) - (i + 1); };
    double ident = 0, scale = 0;

    for (int k = 0; k < cat.size(); ++k) {
        const Mode& kv = cat.k[k];
        RealVec psi = psi_samples(cx, k);
        RealVec Ppsi;
        {
            CplxVec h = forward_component(g, psi);
            scale_leq(g, h, lam);
            Ppsi = inverse_component(g, h);
        }
        RealVec a(n);
        {
            double buf[9];
            for (std::size_t p = 0; p < n; ++p) {
                amplitudes_at(cx, R, p, buf);
                a[p] = buf[k];
            }
        }
        RealVec Pa;
        std::vector<RealVec> dPa;
        {
            CplxVec h = forward_component(g, a);
            scale_leq(g, h, lam);
            Pa = inverse_component(g, h);
            for (int j = 0; j < d; ++j) dPa.push_back(inverse_derivative(g, h, j));
        }
        // Psi_k = P psi(gamma .) cos(2 pi sigma_k kperp.x); g = grad Lap^{-1} Psi_k
        std::vector<RealVec> gv;
        const CosWave cw = wave(cx, k, 1);
        {
            RealVec Psi(n);
            for_each_index(g, [&](std::size_t p, const std::array<long, 3>& i) { Psi[p] = Ppsi[p] * cw(i); });
            CplxVec h = forward_component(g, Psi);
            for (int j = 0; j < d; ++j) gv.push_back(inverse_derivative(g, h, j, true));
        }
        for_each_index(g, [&](std::size_t p, const std::array<long, 3>& i) {
            const double cs = cw(i);
            const double wpk = a[p] * psi[p] * cs;
            const double wlk = -a[p] * (psi[p] - Ppsi[p]) * cs - (a[p] - Pa[p]) * Ppsi[p] * cs;
            const double direct = Pa[p] * Ppsi[p] * cs;
            ident = std::max(ident, std::abs(wpk + wlk - direct));
            scale = std::max(scale, std::abs(wpk));
            double gdot = 0, kdot = 0;
            for (int j = 0; j < d; ++j) {
                gdot += dPa[j][p] * gv[j][p];
                kdot += kv[j] * dPa[j][p];
            }
            for (int c = 0; c < d; ++c) {
                pb.wp[c][p] += wpk * kv[c];
                pb.wl[c][p] += wlk * kv[c];
                pb.wd[c][p] += kv[c] * gdot - gv[c][p] * kdot;
            }
            for (int r = 0; r < d; ++r)
                for (int s = r + 1; s < d; ++s) A[aidx(r, s)][p] += Pa[p] * (kv[r] * gv[s][p] - gv[r][p] * kv[s]);
        });
    }
    pb.wpl_identity = scale > 0 ? ident / scale : 0.0;

    // w = Div A, A antisymmetric; then the exact annulus
    SpectralField w(g, Rank::vector);
    for (int r = 0; r < d; ++r)
        for (int s = r + 1; s < d; ++s) {
            CplxVec h = forward_component(g, A[aidx(r, s)]);
            A[aidx(r, s)] = RealVec();
            for_each_mode(g, [&](std::size_t i, const Mode& m, bool nyq, double) {
                if (nyq) return;
                // w_r += d_s A_rs, w_s += d_r A_sr = -d_r A_rs
                w.comp[r][i] += cplx(0, kTwoPi * m[s]) * h[i];
                w.comp[s][i] -= cplx(0, kTwoPi * m[r]) * h[i];
            });
        }
    const double sig = double(cx.ps.sigma);
    double kept = 0, leak = 0;
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double wt) {
        const double m2 = mode_norm2(m, d);
        const bool inside = 4 * m2 > sig * sig && 100 * m2 < 81 * sig * sig;
        double e = 0;
        for (int c = 0; c < d; ++c) e += std::norm(w.comp[c][i]);
        if (inside) {
            kept += wt * e;
        } else {
            leak += wt * e;
            for (int c = 0; c < d; ++c) w.comp[c][i] = 0;
        }
    });
    pb.support_leak = kept > 0 ? std::sqrt(leak / kept) : 0.0;

    GridField wx = inverse_transform(w);
    double gap = 0, wmax = 0;
    for (std::size_t p = 0; p < n; ++p)
        for (int c = 0; c < d; ++c) {
            gap = std::max(gap, std::abs(wx[c][p] - pb.wp[c][p] - pb.wl[c][p] - pb.wd[c][p]));
            wmax = std::max(wmax, std::abs(wx[c][p]));
        }
    pb.assembly_gap = wmax > 0 ? gap / wmax : 0.0;
    pb.w = std::move(w);
    return pb;
}

enum Piece { kOsc = 0, kDis, kOff, kCor };

StressBundle stress(const BesovCtx& cx, const SpectralField& u, const SymField& R, PerturbationBundle& pb,
                    double alpha, bool keep) {
    const TorusGrid& g = cx.g;
    const int d = g.d;
    const int ns = d * (d + 1) / 2;
    const std::size_t n = g.points();
    const auto& cat = *cx.cat;
    const int K = cat.size();
    const double s = d / 2.0 + 2 * alpha + 1;
    StressBundle sb;

    GridField wx = inverse_transform(pb.w);
    std::vector<RealVec> psi;
    for (int k = 0; k < K; ++k) psi.push_back(psi_samples(cx, k));
    std::vector<CosWave> c1, c2;
    for (int k = 0; k < K; ++k) {
        c1.push_back(wave(cx, k, 1));
        c2.push_back(wave(cx, k, 2));
    }

    // all four quadratic pieces at one sample, packed upper triangles
    auto eval = [&](std::size_t p, const std::array<long, 3>& ix, double out[4][6]) {
        double a[9], cs[9], cs2[9];
        amplitudes_at(cx, R, p, a);
        for (int k = 0; k < K; ++k) {
            cs[k] = c1[k](ix);
            cs2[k] = c2[k](ix);
        }
        for (int q = 0; q < 4; ++q)
            for (int c = 0; c < ns; ++c) out[q][c] = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                const int c = SymField::idx(i, j, d);
                double osc = 0, dis = 0, off = 0;
                for (int k = 0; k < K; ++k) {
                    const double kk = cat.k[k][i] * cat.k[k][j];
                    const double a2 = a[k] * a[k], p2 = psi[k][p] * psi[k][p];
                    osc += 0.5 * a2 * (p2 - 1) * kk;
                    dis += 0.5 * a2 * cs2[k] * p2 * kk;
                    const double sk = a[k] * cs[k] * psi[k][p];
                    for (int l = 0; l < K; ++l) {
                        if (l == k) continue;
                        off += sk * a[l] * cs[l] * psi[l][p] * cat.k[k][i] * cat.k[l][j];
                    }
                }
                const double wpi = pb.wp[i][p], wpj = pb.wp[j][p];
                const double wci = wx[i][p] - wpi, wcj = wx[j][p] - wpj;
                // w_p (x) w_c + w_c (x) w, symmetric as a whole
                const double cor = 0.5 * (wpi * wcj + wci * wx[j][p] + wpj * wci + wcj * wx[i][p]);
                out[kOsc][c] = osc;
                out[kDis][c] = dis;
                out[kOff][c] = off;
                out[kCor][c] = cor;
            }
    };

    SymField S(g), T(g);
    double dec = 0, lhs_max = 0;
    double l1[4] = {0, 0, 0, 0};
    double* hs[4] = {&sb.osc_hs, &sb.dis_hs, &sb.off_hs, &sb.cor_hs};
    SpectralField* kept[4] = {&sb.osc, &sb.dis, &sb.off, &sb.cor};
    for (int q = 0; q < 4; ++q) {
        for_each_index(g, [&](std::size_t p, const std::array<long, 3>& ix) {
            double out[4][6];
            eval(p, ix, out);
            for (int c = 0; c < ns; ++c) T.c[c][p] = out[q][c];
            if (q == 0) {
                double diff[6], lhs[6];
                for (int i = 0; i < d; ++i)
                    for (int j = i; j < d; ++j) {
                        const int c = SymField::idx(i, j, d);
                        double sum = out[0][c] + out[1][c] + out[2][c] + out[3][c];
                        S.c[c][p] = sum;
                        lhs[c] = R.c[c][p] + wx[i][p] * wx[j][p];
                        diff[c] = lhs[c] - (i == j ? cx.c : 0.0) - sum;
                    }
                dec = std::max(dec, frob_sym(diff, d));
                lhs_max = std::max(lhs_max, frob_sym(lhs, d));
                for (int r = 0; r < 4; ++r) l1[r] += frob_sym(out[r], d);
            }
        });
        *hs[q] = sym_hs(T, s);
        if (keep) *kept[q] = from_sym(T);
    }
    sb.osc_l1 = l1[0] / n;
    sb.dis_l1 = l1[1] / n;
    sb.off_l1 = l1[2] / n;
    sb.cor_l1 = l1[3] / n;
    sb.decomposition = lhs_max > 0 ? dec / lhs_max : 0.0;
    psi.clear();
    psi.shrink_to_fit();

    // R_lin = R((-Lap)^a w + Div(u (x) w + w (x) u)), collocation products
    SpectralField lin;
    {
        GridField ux = inverse_transform(u);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                auto& t = T.c[SymField::idx(i, j, d)];
                for (std::size_t p = 0; p < n; ++p) t[p] = ux[i][p] * wx[j][p] + wx[i][p] * ux[j][p];
            }
        SpectralField rhs = divergence(from_sym(T));
        rhs += fractional_laplacian(alpha, pb.w);
        lin = antidiv(rhs);
    }
    sb.lin_hs = sobolev_norm(lin, -s, false);
    {
        SymField L = to_sym(lin);
        double acc = 0;
        for (std::size_t p = 0; p < n; ++p) {
            acc += frobenius_at(L, p);
            for (int c = 0; c < ns; ++c) S.c[c][p] += L.c[c][p];
        }
        sb.lin_l1 = acc / n;
    }
    if (keep) sb.lin = std::move(lin);
    lin = SpectralField();
    sb.Rbar = from_sym(S);
    S = SymField();

    // master residual after Leray projection
    {
        GridField ux = inverse_transform(u);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                const int c = SymField::idx(i, j, d);
                for (std::size_t p = 0; p < n; ++p)
                    T.c[c][p] = R.c[c][p] + wx[i][p] * wx[j][p] + ux[i][p] * wx[j][p] + wx[i][p] * ux[j][p];
            }
    }
    SpectralField D1 = divergence(from_sym(T));
    T = SymField();
    D1 += fractional_laplacian(alpha, pb.w);
    SpectralField D2 = divergence(sb.Rbar);
    SpectralField r = leray_project(D2 - D1);
    const double sc = std::max(leray_hs(D1, s), leray_hs(D2, s));
    const double sc2 = std::max(lp_norm(leray_project(D1), 2), lp_norm(leray_project(D2), 2));
    sb.master_residual = sc > 0 ? sobolev_norm(r, -s, false) / sc : 0.0;
    sb.master_residual_l2 = sc2 > 0 ? lp_norm(r, 2) / sc2 : 0.0;
    return sb;
}

BesovCtx make_ctx(const TorusGrid& g, const DirectionCatalog& cat, const ParameterSet& ps, const SymField& R) {
    BesovCtx cx;
    cx.g = g;
    cx.cat = &cat;
    cx.prof = make_profile(g.d);
    cx.ps = ps;
    cx.Rinf = sym_sup(R);
    cx.c = 4.0 * g.d * g.d * cx.Rinf;
    cx.table = cos_table(g.G);
    if (ps.sigma <= 0 || 10 * (g.G / 2) <= 9 * ps.sigma)
        fail(ErrorKind::resolution, "grid cannot hold frequencies up to 9 sigma / 10");
    if (ps.gamma != std::floor(ps.gamma) || g.G % static_cast<int>(ps.gamma))
        fail(ErrorKind::parameter, "gamma must be an integer dividing G");
    return cx;
}

TorusGrid working_grid(const ReynoldsState& st, const ParameterSet& ps, const DirectionCatalog& cat, int want) {
    int G = std::max(st.u.grid.G, want);
    if (ps.sigma > 0) {
        int need = pow2_at_least(1.8 * ps.sigma + 1);  // G/2 > 9 sigma / 10
        G = std::max(G, need);
    }
    G = std::max(G, pow2_at_least(required_grid(cat, ps.mu, static_cast<int>(ps.gamma))));
    return TorusGrid(st.u.grid.d, G);
}

}  // namespace

PerturbationBundle besov_perturbation(const ReynoldsState& st, const ParameterSet& ps, const DirectionCatalog& cat) {
    TorusGrid g = working_grid(st, ps, cat, ps.G);
    SymField R = to_sym(resample(st.R, g.G));
    BesovCtx cx = make_ctx(g, cat, ps, R);
    if (cx.Rinf == 0) {
        PerturbationBundle pb;
        pb.wp = pb.wl = pb.wd = GridField(g, Rank::vector);
        pb.w = SpectralField(g, Rank::vector);
        return pb;
    }
    return perturb(cx, R);
}

StressBundle besov_stress(const ReynoldsState& st, PerturbationBundle& pb, const ParameterSet& ps,
                          const DirectionCatalog& cat, const StepOptions& opt) {
    const TorusGrid g = pb.w.grid;
    SymField R = to_sym(resample(st.R, g.G));
    BesovCtx cx = make_ctx(g, cat, ps, R);
    if (cx.Rinf == 0) {
        StressBundle sb;
        sb.Rbar = SpectralField(g, Rank::matrix);
        return sb;
    }
    return stress(cx, resample(st.u, g.G), R, pb, st.alpha, opt.keep_pieces);
}

namespace {

long smallest_power_of_four_above(double v) {
    long l = 4;
    while (double(l) <= v && l < (1L << 60)) l *= 4;
    return l;
}

void fill_common(RunReport& rep, const ReynoldsState& st, const ParameterSet& ps) {
    rep.n = st.n + 1;
    rep.scheme = "besov";
    rep.mode = mode_name(ps.mode);
    rep.lambda = ps.lambda;
    rep.mu = ps.mu;
    rep.gamma = ps.gamma;
    rep.sigma = ps.sigma;
    rep.N_prev = st.N;
}

}  // namespace

StepResult besov_step(ReynoldsState st, double delta, double p, double theta, const StepOptions& opt) {
    const double t0 = now_seconds();
    const int d = st.u.grid.d;
    const double alpha = st.alpha;
    const double s = d / 2.0 + 2 * alpha + 1;
    DirectionCatalog cat = build_catalog(d);
    StepResult res;
    RunReport& rep = res.report;
    rep.R_prev_hs = stress_hs(st.R, alpha);

    if (is_zero(st.R)) {
        res.params.mode = opt.mode;
        fill_common(rep, st, res.params);
        rep.status = "trivial";
        rep.accepted = true;
        rep.G = st.u.grid.G;
        res.state = std::move(st);
        rep.wall_seconds = now_seconds() - t0;
        return res;
    }

    if (opt.mode == StepMode::strict) {
        // lambda > max(C^{1/eps} delta^{-1/eps}, 4N) with the unknown constant C set to 1
        const double eps = (2 - p) / 12;
        const double lam_min = std::max(std::pow(delta, -1 / eps), 4.0 * st.N);
        long lambda = smallest_power_of_four_above(lam_min);
        ParameterAudit au = audit_parameters(lambda, p, theta, d, alpha);
        res.audit = au.rows;
        res.params = besov_parameters(lambda, delta, p, theta, d, alpha, opt, cat);
        fill_common(rep, st, res.params);
        TorusGrid g = working_grid(st, res.params, cat, 0);
        rep.G = res.params.sigma > 0 ? g.G : -1;
        rep.infeasible = res.params.sigma <= 0 || g.G > opt.grid_cap;
        rep.status = rep.infeasible ? "infeasible" : "audit";
        rep.accepted = false;
        rep.R_hs = rep.R_prev_hs;
        res.state = std::move(st);
        rep.wall_seconds = now_seconds() - t0;
        return res;
    }

    // empirical: lambda from the band condition sigma/2 >= N, then escalate
    long lambda = opt.lambda_start;
    if (lambda == 0) {
        lambda = 4;
        for (;;) {
            FrequencyPlan pl = select_sigma(lambda, opt.e_eff, cat);
            if (pl.sigma >= 2 * BigInt(st.N)) break;
            lambda *= 4;
        }
    }
    if (!is_power_of_four(lambda)) fail(ErrorKind::parameter, "lambda must be a power of 4");

    SpectralField R_in = std::move(st.R);
    for (int esc = 0; esc <= opt.max_escalations; ++esc, lambda *= 4) {
        ParameterSet ps = besov_parameters(lambda, delta, p, theta, d, alpha, opt, cat);
        rep = RunReport();
        rep.R_prev_hs = stress_hs(R_in, alpha);
        rep.R_prev_l1 = lp_norm(R_in, 1);
        fill_common(rep, st, ps);
        TorusGrid g = working_grid(st, ps, cat, opt.work_grid);
        ps.G = g.G;
        rep.G = g.G;
        res.params = ps;
        if (ps.sigma <= 0 || g.G > opt.grid_cap) {
            rep.status = "grid-cap";
            rep.infeasible = true;
            break;
        }
        SpectralField u = resample(st.u, g.G);
        SymField Rs = to_sym(resample(R_in, g.G));
        BesovCtx cx = make_ctx(g, cat, ps, Rs);
        PerturbationBundle pb = perturb(cx, Rs);
        rep.wl_linf = sup_norm(pb.wl);
        if (!opt.keep_pieces) {
            pb.wl = GridField();
            pb.wd = GridField();
        }
        rep.support_leak = pb.support_leak;
        rep.wpl_identity = pb.wpl_identity;
        {
            double reas = 0;
            besov_amplitudes(Rs, cat, nullptr, &reas);
            rep.amp_reassembly = reas;
        }
        StressBundle sb = stress(cx, u, Rs, pb, alpha, opt.keep_pieces);
        Rs = SymField();
        pb.wp = GridField();

        rep.decomposition = sb.decomposition;
        rep.master_residual = sb.master_residual;
        rep.master_residual_l2 = sb.master_residual_l2;
        rep.osc_l1 = sb.osc_l1;
        rep.dis_l1 = sb.dis_l1;
        rep.off_l1 = sb.off_l1;
        rep.cor_l1 = sb.cor_l1;
        rep.lin_l1 = sb.lin_l1;
        rep.osc_hs = sb.osc_hs;
        rep.dis_hs = sb.dis_hs;
        rep.off_hs = sb.off_hs;
        rep.cor_hs = sb.cor_hs;
        rep.lin_hs = sb.lin_hs;

        const SpectralField& w = pb.w;
        {
            double dv = 0, sc = 0;
            for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double) {
                cplx z = 0;
                double a = 0;
                for (int c = 0; c < d; ++c) {
                    z += double(m[c]) * w.comp[c][i];
                    a += std::norm(w.comp[c][i]);
                }
                dv = std::max(dv, std::abs(z));
                sc = std::max(sc, std::sqrt(a * mode_norm2(m, d)));
            });
            rep.div_w = sc > 0 ? dv / sc : 0.0;
        }
        rep.w_lp = lp_norm(w, p);
        rep.w_l2 = lp_norm(w, 2);
        rep.w_linf = lp_norm(w, kInf);
        rep.w_besov = besov_norm(w, -theta, kInf, 1);
        rep.R_hs_raw = stress_hs(sb.Rbar, alpha);
        SpectralField Rnew = opt.normalize_trace ? trace_free(sb.Rbar) : std::move(sb.Rbar);
        sb = StressBundle();
        rep.R_hs = stress_hs(Rnew, alpha);
        rep.R_l1 = lp_norm(Rnew, 1);

        if (opt.measure_paraproduct) {
            double sum = 0;
            for (long M : nonzero_bands(u)) {
                if (M > 2 * st.N) continue;
                // |P_M u (x) w| and |w (x) P_M u| agree: transposes
                sum += 2 * tensor_sobolev_norm(project_band(M, u), w, -s, true);
            }
            sum += tensor_sobolev_norm(w, w, -s, true);
            rep.para_sum = sum;
        }
        rep.para_bound = delta + rep.R_prev_hs;

        rep.D = ps.sigma / st.N;
        rep.D_gt_50N = double(rep.D) > 50.0 * st.N;

        const bool structural = rep.div_w <= 1e-12 && rep.decomposition <= 1e-8 && rep.master_residual <= 1e-6 &&
                                rep.amp_reassembly <= 1e-10 && rep.wpl_identity <= 1e-12;
        const bool targets = rep.R_hs < delta && rep.w_lp < delta && rep.w_besov < delta &&
                             (!opt.measure_paraproduct || rep.para_sum < rep.para_bound);
        rep.accepted = structural && targets;
        rep.status = rep.accepted ? "accepted" : (structural ? "targets-missed" : "structural-failure");
        if (rep.accepted) {
            ReynoldsState next;
            next.u = u + w;
            next.R = std::move(Rnew);
            next.n = st.n + 1;
            next.N = ps.sigma;
            next.D = st.D;
            next.D.push_back(rep.D);
            next.bands = st.bands;
            next.bands.push_back(ps.sigma);
            next.alpha = alpha;
            res.state = std::move(next);
            break;
        }
        if (!structural) break;  // escalation cannot repair an identity
    }
    if (!rep.accepted) {
        st.R = std::move(R_in);
        res.state = std::move(st);
    }
    rep.wall_seconds = now_seconds() - t0;
    return res;
}

// ---------- L^2 scheme

double zeta_cutoff(double X, double L) {
    if (X <= L) return 4 * L;
    if (X >= 2 * L) return 4 * X;
    const double h = smooth_step(X / L - 1);
    return 4 * L * (1 - h) + 4 * X * h;
}

void l2_amplitudes(const SymField& R, const DirectionCatalog& cat, std::vector<RealVec>& a, RealVec& rho,
                   double* R_l1, double* reassembly) {
    const int d = R.grid.d;
    const std::size_t n = R.grid.points();
    const double L = sym_l1(R);
    if (R_l1) *R_l1 = L;
    a.assign(cat.size(), RealVec(n, 0.0));
    rho.assign(n, 0.0);
    if (reassembly) *reassembly = 0;
    if (L == 0) return;
    double worst = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const double X = frobenius_at(R, p);
        const double r = zeta_cutoff(X, L);
        rho[p] = r;
        double M[9], x[9];
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) M[i * d + j] = (i == j ? 1.0 : 0.0) - R.at(i, j, p) / r;
        gamma_squared_raw(cat, M, x);
        double E[9] = {0};
        for (int k = 0; k < cat.size(); ++k) {
            if (!(x[k] > 0)) fail(ErrorKind::internal, "Nash coefficient left its domain");
            a[k][p] = std::sqrt(r * x[k]);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) E[i * d + j] += r * x[k] * cat.k[k][i] * cat.k[k][j];
        }
        if (reassembly)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    worst = std::max(worst, std::abs(E[i * d + j] - ((i == j ? r : 0.0) - R.at(i, j, p))) / r);
    }
    if (reassembly) *reassembly = worst;
}

namespace {

// Products on the doubled grid, truncated back: operands are lifted once and reused.
struct Pad {
    TorusGrid g, gp;
    explicit Pad(const TorusGrid& g_) : g(g_), gp(g_.d, 2 * g_.G) {}
    RealVec up(const CplxVec& c) const {
        SpectralField s;
        s.grid = g;
        s.comp.push_back(c);
        return inverse_component(gp, resample(s, gp.G).comp[0]);
    }
    CplxVec down(const RealVec& v) const {
        SpectralField s;
        s.grid = gp;
        s.comp.push_back(forward_component(gp, v));
        return resample(s, g.G).comp[0];
    }
    RealVec mul(const RealVec& a, const RealVec& b) const {
        RealVec r(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
        return r;
    }
};

CplxVec spectral_derivative(const TorusGrid& g, const CplxVec& c, int a) {
    CplxVec t(c.size());
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (!nyq) t[i] = cplx(0, kTwoPi * m[a]) * c[i];
    });
    return t;
}

}  // namespace

SpectralField rank_one_antidiv(const SpectralField& f, const SpectralField& tau, const Mode& k) {
    // X = tau k(x)k: M^l = k_l R(tau k), so B1 = (k.f) M and g_m = sum_j d_j(k.f) M_mj
    const int d = f.grid.d;
    const TorusGrid& g = f.grid;
    const Pad pad(g);
    CplxVec kf(f.comp[0].size());
    for (int l = 0; l < d; ++l)
        for (std::size_t i = 0; i < kf.size(); ++i) kf[i] += double(k[l]) * f.comp[l][i];
    SpectralField tk(g, Rank::vector);
    for (int l = 0; l < d; ++l)
        for (std::size_t i = 0; i < tk.comp[l].size(); ++i) tk.comp[l][i] = double(k[l]) * tau.comp[0][i];
    SpectralField M = antidiv(tk);
    tk = SpectralField();
    std::vector<RealVec> PM(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) PM[i * d + j] = pad.up(M.at(i, j));
    auto pm = [&](int i, int j) -> const RealVec& { return i <= j ? PM[i * d + j] : PM[j * d + i]; };
    SpectralField out(g, Rank::matrix);
    {
        RealVec Pkf = pad.up(kf);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                out.at(i, j) = pad.down(pad.mul(Pkf, pm(i, j)));
                if (i != j) out.at(j, i) = out.at(i, j);
            }
    }
    SpectralField gv(g, Rank::vector);
    {
        std::vector<RealVec> Pd;
        for (int j = 0; j < d; ++j) Pd.push_back(pad.up(spectral_derivative(g, kf, j)));
        RealVec acc(pad.gp.points());
        for (int m = 0; m < d; ++m) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int j = 0; j < d; ++j) {
                const RealVec& b = pm(m, j);
                for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += Pd[j][p] * b[p];
            }
            gv.comp[m] = pad.down(acc);
        }
    }
    return out - antidiv(gv);
}

L2Result l2_build(const ReynoldsState& st, int gamma, const L2Options& opt) {
    const double t0 = now_seconds();
    const int d = st.u.grid.d;
    const double alpha = st.alpha;
    if (!(alpha > 0 && alpha < (d + 1) / 4.0))
        fail(ErrorKind::hypothesis, "the L^2 step needs 0 < alpha < (d+1)/4");
    if (gamma < 1) fail(ErrorKind::parameter, "gamma must be a positive integer");
    const double s = d / 2.0 + 2 * alpha + 1;
    DirectionCatalog cat = build_catalog(d);
    L2Result res;
    RunReport& rep = res.report;
    rep.n = st.n + 1;
    rep.scheme = "l2";
    rep.mode = "empirical";
    rep.gamma = gamma;
    const double eps = std::min(1.0, (d - 1) / 2.0 - (2 * alpha - 1)) / 3;
    res.mu_strict = std::pow(double(gamma), 2 * std::ceil(alpha / eps - 1e-12));
    const double mu = opt.mu > 0 ? opt.mu : mu_min(cat);
    rep.mu = mu;
    rep.R_prev_l1 = lp_norm(st.R, 1);
    rep.R_prev_hs = stress_hs(st.R, alpha);

    int G = std::max(st.u.grid.G, pow2_at_least(double(opt.resolution) * gamma * mu * cat.max_k_norm() - 1e-9));
    G = std::max(G, pow2_at_least(required_grid(cat, mu, gamma)));
    while (G % gamma) G *= 2;
    rep.G = G;
    if (G > opt.grid_cap) {
        rep.status = "grid-cap";
        rep.infeasible = true;
        res.state = st;
        rep.wall_seconds = now_seconds() - t0;
        return res;
    }
    TorusGrid g(d, G);
    const Pad pad(g);
    const std::size_t n = g.points();
    SpectralField u = resample(st.u, G);
    SpectralField R = resample(st.R, G);
    std::vector<RealVec> a;
    RealVec rho;
    double L = 0, reas = 0;
    {
        SymField Rs = to_sym(R);
        l2_amplitudes(Rs, cat, a, rho, &L, &reas);
    }
    rep.amp_reassembly = reas;
    if (L == 0) {
        rep.status = "trivial";
        rep.accepted = true;
        res.state = st;
        res.stress.Rbar = SpectralField(st.R.grid, Rank::matrix);
        rep.wall_seconds = now_seconds() - t0;
        return res;
    }
    TubeProfile prof = make_profile(d);

    SpectralField wp(g, Rank::vector), w(g, Rank::vector), wc_direct(g, Rank::vector);
    SpectralField osc(g, Rank::matrix), off(g, Rank::matrix), trunc(g, Rank::matrix);
    std::vector<CplxVec> V;
    for (int k = 0; k < cat.size(); ++k) {
        const Mode& kv = cat.k[k];
        SpectralField psi = tube_spectrum(cat, k, mu, gamma, g, prof);
        const CplxVec ak = forward_component(g, a[k]);
        RealVec Ppsi = pad.up(psi.comp[0]);
        {
            RealVec Pa = pad.up(ak);
            V.push_back(pad.down(pad.mul(Pa, Ppsi)));
            for (int c = 0; c < d; ++c)
                for (std::size_t i = 0; i < V.back().size(); ++i) wp.comp[c][i] += double(kv[c]) * V.back()[i];
            // w = Div(sum a_k O_k), O_k antisymmetric with Div O_k = psi_k(gamma .) k
            SpectralField O = omega_from(kv, psi);
            std::vector<RealVec> PO(d * d);
            for (int i = 0; i < d; ++i)
                for (int j = i + 1; j < d; ++j) PO[i * d + j] = pad.up(O.at(i, j));
            O = SpectralField();
            auto po = [&](int i, int j, std::size_t p) {
                return i == j ? 0.0 : (i < j ? PO[i * d + j][p] : -PO[j * d + i][p]);
            };
            for (int i = 0; i < d; ++i)
                for (int j = i + 1; j < d; ++j) {
                    CplxVec aO = pad.down(pad.mul(Pa, PO[i * d + j]));
                    const CplxVec di = spectral_derivative(g, aO, i), dj = spectral_derivative(g, aO, j);
                    for (std::size_t m = 0; m < aO.size(); ++m) {
                        w.comp[i][m] += dj[m];
                        w.comp[j][m] -= di[m];
                    }
                }
            // w_c = sum grad a_k : O_k, the product rule's other half
            std::vector<RealVec> Pda;
            for (int j = 0; j < d; ++j) Pda.push_back(pad.up(spectral_derivative(g, ak, j)));
            RealVec acc(pad.gp.points());
            for (int i = 0; i < d; ++i) {
                for (std::size_t p = 0; p < acc.size(); ++p) {
                    double t = 0;
                    for (int j = 0; j < d; ++j) t += Pda[j][p] * po(i, j, p);
                    acc[p] = t;
                }
                CplxVec c = pad.down(acc);
                for (std::size_t m = 0; m < c.size(); ++m) wc_direct.comp[i][m] += c[m];
            }
        }
        // T_k = (psi psi - mean) k (x) k; R_osc += B(grad a_k^2, T_k)
        SpectralField tau(g, Rank::scalar);
        tau.comp[0] = pad.down(pad.mul(Ppsi, Ppsi));
        Ppsi = RealVec();
        RealVec a2(n);
        for (std::size_t p = 0; p < n; ++p) a2[p] = a[k][p] * a[k][p];
        SpectralField A2(g, Rank::scalar);
        A2.comp[0] = forward_component(g, a2);
        {
            // truncated products do not associate: (a psi)(a psi) vs a^2 (psi psi)
            RealVec PV = pad.up(V.back());
            CplxVec vv = pad.down(pad.mul(PV, PV));
            PV = pad.up(A2.comp[0]);
            CplxVec at = pad.down(pad.mul(PV, pad.up(tau.comp[0])));
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    const double c = double(kv[i]) * kv[j];
                    if (c == 0) continue;
                    auto& o = trunc.at(i, j);
                    for (std::size_t m = 0; m < o.size(); ++m) o[m] += c * (vv[m] - at[m]);
                }
        }
        tau.comp[0][0] = 0;
        osc += rank_one_antidiv(gradient(A2), tau, kv);
    }
    a.clear();
    {
        std::vector<RealVec> PV;
        for (auto& v : V) PV.push_back(pad.up(v));
        V.clear();
        for (int k = 0; k < cat.size(); ++k)
            for (int l = k + 1; l < cat.size(); ++l) {
                CplxVec P = pad.down(pad.mul(PV[k], PV[l]));
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j) {
                        const double c = double(cat.k[k][i]) * cat.k[l][j] + double(cat.k[l][i]) * cat.k[k][j];
                        if (c == 0) continue;
                        auto& o = off.at(i, j);
                        for (std::size_t m = 0; m < o.size(); ++m) o[m] += c * P[m];
                    }
            }
    }
    SpectralField wc = w - wp;
    {
        double gap = 0, sc = 0;
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < wc.comp[c].size(); ++i) {
                gap = std::max(gap, std::abs(wc.comp[c][i] - wc_direct.comp[c][i]));
                sc = std::max(sc, std::abs(wc.comp[c][i]));
            }
        rep.wpl_identity = sc > 0 ? gap / sc : 0.0;
    }
    wc_direct = SpectralField();
    // quadratic terms in w: cor, u(x)w + w(x)u, w(x)w
    SpectralField cor(g, Rank::matrix), uw(g, Rank::matrix), ww(g, Rank::matrix);
    {
        std::vector<RealVec> Pw, Pp, Pu;
        for (int c = 0; c < d; ++c) {
            Pw.push_back(pad.up(w.comp[c]));
            Pp.push_back(pad.up(wp.comp[c]));
            Pu.push_back(pad.up(u.comp[c]));
        }
        RealVec buf(pad.gp.points());
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                // w_p (x) w_c + w_c (x) w with w_c = w - w_p
                for (std::size_t p = 0; p < buf.size(); ++p) {
                    const double wci = Pw[i][p] - Pp[i][p], wcj = Pw[j][p] - Pp[j][p];
                    buf[p] = Pp[i][p] * wcj + wci * Pw[j][p];
                }
                cor.at(i, j) = pad.down(buf);
                if (j < i) continue;
                for (std::size_t p = 0; p < buf.size(); ++p) buf[p] = Pu[i][p] * Pw[j][p] + Pw[i][p] * Pu[j][p];
                uw.at(i, j) = pad.down(buf);
                for (std::size_t p = 0; p < buf.size(); ++p) buf[p] = Pw[i][p] * Pw[j][p];
                ww.at(i, j) = pad.down(buf);
                if (i != j) {
                    uw.at(j, i) = uw.at(i, j);
                    ww.at(j, i) = ww.at(i, j);
                }
            }
    }
    SpectralField lin;
    {
        SpectralField rhs = fractional_laplacian(alpha, w);
        rhs += divergence(uw);
        lin = antidiv(rhs);
    }
    SpectralField Rbar = osc + off + cor + lin + trunc;
    rep.trunc_l1 = lp_norm(trunc, 1);
    rep.osc_l1 = lp_norm(osc, 1);
    rep.off_l1 = lp_norm(off, 1);
    rep.cor_l1 = lp_norm(cor, 1);
    rep.lin_l1 = lp_norm(lin, 1);
    rep.osc_hs = stress_hs(osc, alpha);
    rep.off_hs = stress_hs(off, alpha);
    rep.cor_hs = stress_hs(cor, alpha);
    rep.lin_hs = stress_hs(lin, alpha);

    // master residual; the pressure -rho is a gradient and vanishes under Leray
    {
        SpectralField D1 = divergence(R + ww + uw);
        D1 += fractional_laplacian(alpha, w);
        SpectralField D2 = divergence(Rbar);
        SpectralField r = leray_project(D2 - D1);
        const double sc = std::max(leray_hs(D1, s), leray_hs(D2, s));
        const double sc2 = std::max(lp_norm(leray_project(D1), 2), lp_norm(leray_project(D2), 2));
        rep.master_residual = sc > 0 ? sobolev_norm(r, -s, false) / sc : 0.0;
        rep.master_residual_l2 = sc2 > 0 ? lp_norm(r, 2) / sc2 : 0.0;
        // the same residual with the truncation commutator left out of R-bar
        r = leray_project(D2 - divergence(trunc) - D1);
        rep.master_residual_raw = sc > 0 ? sobolev_norm(r, -s, false) / sc : 0.0;
    }
    {
        double dv = 0, sc = 0;
        for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double) {
            cplx z = 0;
            double e = 0;
            for (int c = 0; c < d; ++c) {
                z += double(m[c]) * w.comp[c][i];
                e += std::norm(w.comp[c][i]);
            }
            dv = std::max(dv, std::abs(z));
            sc = std::max(sc, std::sqrt(e * mode_norm2(m, d)));
        });
        rep.div_w = sc > 0 ? dv / sc : 0.0;
    }
    rep.w_l2 = lp_norm(w, 2);
    rep.w_linf = lp_norm(w, kInf);
    rep.R_l1 = lp_norm(Rbar, 1);
    rep.R_hs = rep.R_hs_raw = stress_hs(Rbar, alpha);
    rep.A_meas = rep.w_l2 / std::sqrt(L);
    rep.status = "built";

    if (opt.keep_pieces) {
        res.stress.osc = std::move(osc);
        res.stress.off = std::move(off);
        res.stress.cor = std::move(cor);
        res.stress.lin = std::move(lin);
        res.stress.trunc = std::move(trunc);
    }
    res.stress.master_residual = rep.master_residual;
    res.stress.master_residual_l2 = rep.master_residual_l2;
    res.stress.Rbar = Rbar;

    res.state.u = u + w;
    res.state.R = std::move(Rbar);
    res.state.n = st.n + 1;
    res.state.N = std::max(st.N, 2L * bandwidth(res.state.u));
    res.state.D = st.D;
    res.state.bands = st.bands;
    res.state.alpha = alpha;
    rep.wall_seconds = now_seconds() - t0;
    return res;
}

L2Result l2_step(const ReynoldsState& st, double delta, const L2Options& opt, int gamma_start) {
    L2Result last;
    for (int gamma = gamma_start;; gamma *= 2) {
        L2Result r = l2_build(st, gamma, opt);
        if (r.report.status == "trivial") return r;
        if (r.report.status == "grid-cap") {
            if (last.report.status.empty()) {
                r.report.accepted = false;
                return r;
            }
            last.report.status = "grid-cap";
            last.report.accepted = false;
            last.state = st;
            return last;
        }
        const bool ok = r.report.master_residual <= 1e-6 && r.report.R_l1 < delta * delta;
        r.report.accepted = ok;
        if (ok) {
            r.report.status = "accepted";
            return r;
        }
        last = std::move(r);
    }
}

// ---------- driver

bool band_structure_exact(const ReynoldsState& s) {
    const TorusGrid& g = s.u.grid;
    const int d = g.d;
    // annulus of each band: seed shell |m| = 1, then sigma/2 < |m| < 9 sigma/10
    auto in_band = [&](std::size_t b, double m2) {
        if (b == 0) return m2 == 1;
        const double sg = double(s.bands[b]);
        return 4 * m2 > sg * sg && 100 * m2 < 81 * sg * sg;
    };
    for (std::size_t b = 0; b < s.bands.size(); ++b)
        for (std::size_t c = b + 1; c < s.bands.size(); ++c)
            if (s.bands[c] <= s.bands[b]) return false;
    bool ok = true;
    // every coefficient lies in exactly one recorded band
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double) {
        double e = 0;
        for (const auto& c : s.u.comp) e += std::norm(c[i]);
        if (e == 0) return;
        int hits = 0;
        for (std::size_t b = 0; b < s.bands.size(); ++b) hits += in_band(b, mode_norm2(m, d));
        if (hits != 1) ok = false;
    });
    if (!ok) return false;
    for (std::size_t b = 0; b < s.bands.size(); ++b) {
        SpectralField P = project_band(s.bands[b], s.u);
        for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double) {
            const bool inside = in_band(b, mode_norm2(m, d));
            for (int c = 0; c < s.u.ncomp(); ++c) {
                cplx want = inside ? s.u.comp[c][i] : cplx(0, 0);
                if (P.comp[c][i] != want) ok = false;
            }
        });
    }
    return ok;
}

bool low_modes_match(const ReynoldsState& s, const ReynoldsState& seed) {
    SpectralField u0 = resample(seed.u, s.u.grid.G);
    bool ok = true;
    for_each_mode(s.u.grid, [&](std::size_t i, const Mode& m, bool, double) {
        if (mode_norm2(m, s.u.grid.d) != 1) return;
        for (int c = 0; c < s.u.ncomp(); ++c)
            if (s.u.comp[c][i] != u0.comp[c][i]) ok = false;
    });
    return ok;
}

ScheduleRun run_schedule(const ReynoldsState& seed, const Schedule& sched, Scheme scheme, const StepOptions& opt,
                         const L2Options& l2opt, const StateObserver& on_state) {
    ScheduleRun out;
    ReynoldsState st = seed;
    if (on_state) on_state(0, st);
    StepOptions o = opt;
    if (o.work_grid == 0) o.work_grid = o.grid_cap;  // one grid for the whole run keeps products consistent
    bool all_ok = true;
    for (int i = 0; i < sched.steps(); ++i) {
        if (scheme == Scheme::besov) {
            StepResult r = besov_step(std::move(st), sched.delta[i], sched.p[i], sched.theta[i], o);
            r.report.n = i + 1;
            out.reports.push_back(r.report);
            st = std::move(r.state);
            if (!r.report.accepted) {
                all_ok = false;
                break;
            }
            if (on_state) on_state(i + 1, st);
        } else {
            L2Result r = l2_step(st, sched.delta[i], l2opt);
            r.report.n = i + 1;
            out.reports.push_back(r.report);
            if (!r.report.accepted) {
                all_ok = false;
                break;
            }
            st = std::move(r.state);
            if (on_state) on_state(i + 1, st);
        }
    }
    (void)all_ok;
    if (scheme == Scheme::besov) {
        out.bands_exact = band_structure_exact(st);
        out.low_modes_preserved = low_modes_match(st, seed);
    }
    out.final_state = std::move(st);
    return out;
}

}  // namespace mikado
