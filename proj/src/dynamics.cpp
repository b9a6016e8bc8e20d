#include "mikado/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mikado/norms.hpp"

namespace mikado {

namespace {

constexpr double two_pi = 6.283185307179586476925286766559;

std::vector<double> mode_symbol(const TorusGrid& g, double (*fn)(double, double, double), double a, double b) {
    std::vector<double> out(g.modes());
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double) { out[i] = fn(mode_norm2(m, g.d), a, b); });
    return out;
}

double heat_symbol(double m2, double t, double alpha) {
    if (m2 == 0) return 1.0;
    return std::exp(-t * std::pow(two_pi * two_pi * m2, alpha));
}

void multiply(SpectralField& f, const std::vector<double>& sym) {
    for (auto& c : f.comp)
        for (std::size_t i = 0; i < c.size(); ++i) c[i] *= sym[i];
}

// sum_m w(m) |(-Lap)^{alpha/2} f^(m)|^2
double dissipation_of(const SpectralField& f, double alpha) {
    double acc = 0;
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool, double w) {
        double m2 = mode_norm2(m, f.grid.d);
        if (m2 == 0) return;
        double e = 0;
        for (const auto& c : f.comp) e += std::norm(c[i]);
        acc += w * std::pow(two_pi * two_pi * m2, alpha) * e;
    });
    return acc;
}

double l2_of(const SpectralField& f) { return sobolev_norm(f, 0, false); }

double relative_divergence(const SpectralField& u) {
    double gu = l2_of(gradient(u));
    if (gu == 0) return 0;
    return l2_of(divergence(u)) / gu;
}

SpectralField exact_product(const SpectralField& a, const SpectralField& b) {
    int pad = product_padding(a, b);
    SpectralField p = pointwise_product(a, b, pad);
    if (p.aliased) fail(ErrorKind::resolution, "product does not fit the padded lattice");
    return p;
}

std::vector<long> dyadic_range(long lo, long hi) {
    std::vector<long> out;
    for (long N = lo; N <= hi; N *= 2) out.push_back(N);
    return out;
}

long top_band(const SpectralField& u) {
    auto b = nonzero_bands(u);
    if (!b.empty()) return std::max(2L, b.back());
    long N = 2;
    while (N < u.grid.G / 2) N *= 2;
    return N;
}

}  // namespace

const char* integrator_name(Integrator i) { return i == Integrator::if_euler ? "if-euler" : "if-rk2"; }

SpectralField heat_semigroup(const SpectralField& u0, double t, double alpha) {
    if (!(alpha > 0)) fail(ErrorKind::parameter, "alpha must be positive");
    if (!(t >= 0)) fail(ErrorKind::parameter, "semigroup time must be nonnegative");
    SpectralField out = u0;
    multiply(out, mode_symbol(u0.grid, heat_symbol, t, alpha));
    return out;
}

int default_cutoff(const TorusGrid& g) { return g.G / 2 - 1; }

SpectralField galerkin_truncate(const SpectralField& u, int K) {
    SpectralField out = u;
    const double K2 = double(K) * K;
    for_each_mode(u.grid, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (nyq || mode_norm2(m, u.grid.d) > K2)
            for (auto& c : out.comp) c[i] = 0;
    });
    return out;
}

SpectralField nonlinear_term(const SpectralField& u, int K, int padding) {
    SpectralField uu = pointwise_product(u, u, padding);
    if (padding > 1 && uu.aliased) fail(ErrorKind::resolution, "nonlinear product aliased; raise padding");
    SpectralField v = leray_project(divergence(uu));
    v *= -1.0;
    return galerkin_truncate(v, K);
}

Trajectory evolve(const SpectralField& u_init, const EvolutionConfig& cfg, const Observer& obs) {
    if (u_init.rank != Rank::vector) fail(ErrorKind::structural, "evolution needs a vector field");
    if (!(cfg.h > 0) || !(cfg.T >= 0)) fail(ErrorKind::parameter, "need h > 0 and T >= 0");
    if (!(cfg.alpha > 0)) fail(ErrorKind::parameter, "alpha must be positive");
    if (cfg.padding < 1 || cfg.record_every < 1) fail(ErrorKind::parameter, "padding and record stride must be >= 1");
    const int K = cfg.K > 0 ? cfg.K : default_cutoff(u_init.grid);
    if (K > u_init.grid.G / 2) fail(ErrorKind::parameter, "cutoff K exceeds the grid Nyquist frequency");

    const double u0 = l2_of(u_init);
    if (relative_divergence(u_init) > 1e-10) fail(ErrorKind::precondition, "initial datum is not divergence-free");
    for (int c = 0; c < u_init.ncomp(); ++c)
        if (std::abs(mean_of(u_init, c)) > 1e-12 * std::max(1.0, u0))
            fail(ErrorKind::precondition, "initial datum is not mean-free");

    const long steps = std::max(1L, long(std::ceil(cfg.T / cfg.h - 1e-9)));
    const double h = cfg.T > 0 ? cfg.T / double(steps) : cfg.h;
    const long nsteps = cfg.T > 0 ? steps : 0;
    const auto E = mode_symbol(u_init.grid, heat_symbol, h, cfg.alpha);

    Trajectory tr;
    SpectralField u = galerkin_truncate(u_init, K);
    const double energy0 = 0.5 * std::pow(l2_of(u), 2);
    double D_prev = dissipation_of(u, cfg.alpha), D_int = 0;

    auto record = [&](long n) {
        double t = n * h;
        tr.t.push_back(t);
        tr.l2.push_back(l2_of(u));
        tr.dissipation.push_back(dissipation_of(u, cfg.alpha));
        tr.max_divergence = std::max(tr.max_divergence, relative_divergence(u));
        if (cfg.keep_states) tr.u.push_back(u);
        if (obs) obs(int(n), t, u);
    };
    record(0);

    for (long n = 1; n <= nsteps; ++n) {
        if (!cfg.nonlinear) {
            multiply(u, E);
        } else if (cfg.integrator == Integrator::if_euler) {
            SpectralField N0 = nonlinear_term(u, K, cfg.padding);
            u += h * N0;
            multiply(u, E);
        } else {
            SpectralField N0 = nonlinear_term(u, K, cfg.padding);
            SpectralField a = u + h * N0;
            multiply(a, E);
            SpectralField Na = nonlinear_term(a, K, cfg.padding);
            multiply(N0, E);
            multiply(u, E);
            N0 += Na;
            u += (0.5 * h) * N0;
        }
        double norm = l2_of(u);
        if (!std::isfinite(norm) || (u0 > 0 && norm > cfg.blowup_factor * u0))
            fail(ErrorKind::resource, "blow-up guard: ||u||_L2 = " + std::to_string(norm) + " at t = " +
                                          std::to_string(n * h) + " (initial " + std::to_string(u0) + ")");
        double D = dissipation_of(u, cfg.alpha);
        D_int += 0.5 * h * (D + D_prev);
        D_prev = D;
        if (n % cfg.record_every == 0 || n == nsteps) record(n);
    }
    tr.steps = int(nsteps);
    double energy = 0.5 * std::pow(l2_of(u), 2);
    tr.energy_defect = energy0 > 0 ? std::abs(energy - energy0 + D_int) / energy0 : 0.0;
    return tr;
}

GapCurve nonuniqueness_gap(const SpectralField& u_init, const EvolutionConfig& cfg, double s, const Observer& also) {
    GapCurve gc;
    gc.s = s;
    const int K = cfg.K > 0 ? cfg.K : default_cutoff(u_init.grid);
    {
        SpectralField u = galerkin_truncate(u_init, K);
        SpectralField rate = fractional_laplacian(cfg.alpha, u);
        rate *= -1.0;
        if (cfg.nonlinear) rate += nonlinear_term(u, K, cfg.padding);
        gc.forcing = sobolev_norm(rate, -s, false);
    }
    EvolutionConfig c = cfg;
    c.keep_states = false;
    evolve(u_init, c, [&](int n, double t, const SpectralField& u) {
        if (also) also(n, t, u);
        gc.t.push_back(t);
        gc.gap.push_back(sobolev_norm(u - u_init, -s, false));
        gc.l2.push_back(l2_of(u));
        gc.hs.push_back(sobolev_norm(u, -s, false));
    });
    if (gc.t.size() > 1 && gc.t[1] > 0) gc.drift_rate = gc.gap[1] / gc.t[1];
    return gc;
}

double spectral_inner(const SpectralField& a, const SpectralField& b) {
    if (a.grid != b.grid || a.ncomp() != b.ncomp()) fail(ErrorKind::structural, "inner product of mismatched fields");
    double acc = 0;
    for_each_mode(a.grid, [&](std::size_t i, const Mode&, bool, double w) {
        double e = 0;
        for (int c = 0; c < a.ncomp(); ++c) e += (a.comp[c][i] * std::conj(b.comp[c][i])).real();
        acc += w * e;
    });
    return acc;
}

double FluxRow::identity_gap() const { return std::abs(transport - commutator); }

SpectralField commutator_stress(const SpectralField& u, long N) {
    SpectralField uN = project_leq(N, u);
    return project_leq(N, exact_product(u, u)) - exact_product(uN, uN);
}

SpectralField commutator_kernel_form(const SpectralField& u, long N) {
    if (u.rank != Rank::vector) fail(ErrorKind::structural, "commutator needs a vector field");
    const int d = u.grid.d;
    const long b = bandwidth(u);
    long need = std::max(2 * b + N + 2, 2 * N + 2);
    int Gk = 2;
    while (Gk < need) Gk *= 2;
    Gk = std::max(Gk, u.grid.G);
    TorusGrid g(d, Gk);
    const std::size_t P = g.points();
    if (double(P) * double(P) > 4e8) fail(ErrorKind::resource, "kernel convolution too large for direct summation");

    SpectralField uf = resample(u, Gk);
    GridField U = inverse_transform(uf);
    GridField UN = inverse_transform(project_leq(N, uf));
    SpectralField one(g, Rank::scalar);
    std::fill(one.comp[0].begin(), one.comp[0].end(), cplx(1.0, 0.0));
    RealVec kernel = inverse_component(g, project_leq(N, one).comp[0]);

    // lattice offsets so that x - y wraps per axis
    std::vector<std::array<int, 3>> coord(P);
    for (std::size_t i = 0; i < P; ++i) {
        std::size_t r = i;
        for (int a = d - 1; a >= 0; --a) {
            coord[i][a] = int(r % Gk);
            r /= Gk;
        }
    }
    auto flat = [&](const std::array<int, 3>& c) {
        std::size_t idx = 0;
        for (int a = 0; a < d; ++a) idx = idx * Gk + std::size_t(c[a]);
        return idx;
    };

    GridField R(g, Rank::matrix);
    std::vector<double> diff(d);
    for (std::size_t x = 0; x < P; ++x) {
        std::vector<double> acc(d * d, 0.0);
        for (std::size_t y = 0; y < P; ++y) {
            std::array<int, 3> c{0, 0, 0};
            for (int a = 0; a < d; ++a) c[a] = (coord[x][a] - coord[y][a] + Gk) % Gk;
            std::size_t xy = flat(c);
            for (int i = 0; i < d; ++i) diff[i] = U[i][xy] - UN[i][x];
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) acc[i * d + j] += kernel[y] * diff[i] * diff[j];
        }
        for (int c = 0; c < d * d; ++c) R[c][x] = acc[c] / double(P);
    }
    return resample(forward_transform(R), u.grid.G);
}

FluxRow flux_forms(const SpectralField& u, long N, double alpha) {
    if (u.rank != Rank::vector) fail(ErrorKind::structural, "flux needs a vector field");
    FluxRow row;
    row.N = N;
    SpectralField uN = project_leq(N, u);
    SpectralField grad = gradient(uN);
    SpectralField PNuu = project_leq(N, exact_product(u, u));
    SpectralField uNuN = exact_product(uN, uN);
    row.transport = spectral_inner(PNuu, grad);
    row.cancellation = spectral_inner(uNuN, grad);
    row.commutator = spectral_inner(PNuu - uNuN, grad);
    row.dissipation = dissipation_of(uN, alpha);
    row.scale = l2_of(PNuu) * l2_of(grad);
    return row;
}

std::vector<FluxRow> flux_table(const SpectralField& u, double alpha) {
    std::vector<FluxRow> out;
    for (long N : dyadic_range(2, 2 * top_band(u))) out.push_back(flux_forms(u, N, alpha));
    return out;
}

BnSequences bN_sequences(const SpectralField& u, double alpha, double q) {
    if (!(alpha > 0)) fail(ErrorKind::parameter, "alpha must be positive");
    BnSequences bs;
    bs.which_case = alpha <= 1 ? 1 : 2;
    if (bs.which_case == 1)
        bs.q = kInf;
    else
        bs.q = q > 0 ? q : u.grid.d / (2 * alpha - 2);
    if (!(bs.q >= 1)) fail(ErrorKind::parameter, "block norm exponent q must be >= 1");

    bs.N = dyadic_range(2, top_band(u));
    for (long M : bs.N) bs.block.push_back(lp_norm(project_band(M, u), bs.q));
    const std::size_t n = bs.N.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double N = double(bs.N[i]);
        double acc = 0;
        for (std::size_t j = 0; j <= i; ++j) {
            const double M = double(bs.N[j]);
            if (bs.which_case == 1)
                acc += std::pow(M / N, 2 * alpha) * std::pow(M, 1 - 2 * alpha) * bs.block[j];
            else
                acc += (M / N) * (M / N) / M * bs.block[j];
        }
        bs.b.push_back(acc);
    }
    if (bs.which_case == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const double N0 = double(bs.N[i]);
            double acc = 0;
            for (std::size_t j = 0; j < n; ++j) {
                const double M = double(bs.N[j]);
                acc += std::min(1.0, std::pow(M / N0, 2 * alpha)) * std::pow(M, 1 - 2 * alpha) * bs.block[j];
            }
            bs.B.push_back(acc);
        }
    } else {
        // beyond the top band no block enters, so b_N = b_top (top/N)^2 and the tail is b_top / 3
        double tail = n ? bs.b.back() / 3.0 : 0.0;
        bs.B.assign(n, 0.0);
        double acc = tail;
        for (std::size_t i = n; i-- > 0;) {
            acc += bs.b[i];
            bs.B[i] = acc;
        }
    }
    bs.B_decreasing = n > 1;
    for (std::size_t i = 1; i < n; ++i)
        if (!(bs.B[i] < bs.B[i - 1])) bs.B_decreasing = false;
    return bs;
}

}  // namespace mikado
