#include "mikado/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>

namespace mikado {

const char* kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::structural: return "structural error";
        case ErrorKind::parameter: return "parameter error";
        case ErrorKind::domain: return "domain error";
        case ErrorKind::resolution: return "resolution error";
        case ErrorKind::precondition: return "precondition error";
        case ErrorKind::hypothesis: return "hypothesis error";
        case ErrorKind::unsupported: return "unsupported dimension";
        case ErrorKind::resource: return "resource cap";
        case ErrorKind::internal: return "internal error";
    }
    return "error";
}

TorusGrid::TorusGrid(int d_, int G_) : d(d_), G(G_) {
    if (d != 2 && d != 3) fail(ErrorKind::unsupported, "d must be 2 or 3, got " + std::to_string(d));
    if (G < 4 || G % 2) fail(ErrorKind::structural, "G must be even and >= 4, got " + std::to_string(G));
}

std::size_t TorusGrid::points() const {
    std::size_t n = 1;
    for (int a = 0; a < d; ++a) n *= std::size_t(G);
    return n;
}

std::size_t TorusGrid::modes() const { return points() / std::size_t(G) * std::size_t(half()); }

int component_count(Rank r, int d) {
    switch (r) {
        case Rank::scalar: return 1;
        case Rank::vector: return d;
        case Rank::matrix: return d * d;
    }
    return 1;
}

GridField::GridField(const TorusGrid& g, Rank r) : grid(g), rank(r) {
    comp.assign(component_count(r, g.d), RealVec(g.points(), 0.0));
}

SpectralField::SpectralField(const TorusGrid& g, Rank r) : grid(g), rank(r) {
    comp.assign(component_count(r, g.d), CplxVec(g.modes(), cplx(0, 0)));
}

static void check_same(const SpectralField& a, const SpectralField& b) {
    if (a.grid != b.grid || a.rank != b.rank) fail(ErrorKind::structural, "field shape mismatch");
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    check_same(*this, o);
    for (int c = 0; c < ncomp(); ++c)
        for (std::size_t i = 0; i < comp[c].size(); ++i) comp[c][i] += o.comp[c][i];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    check_same(*this, o);
    for (int c = 0; c < ncomp(); ++c)
        for (std::size_t i = 0; i < comp[c].size(); ++i) comp[c][i] -= o.comp[c][i];
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    for (auto& v : comp)
        for (auto& z : v) z *= s;
    return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

// ---- FFTW plumbing -------------------------------------------------------

namespace {

struct PlanCache {
    std::mutex mu;
    std::map<std::tuple<int, int, int>, fftw_plan> plans;
    int threads = 1;
    bool threads_ready = false;

    fftw_plan get(const TorusGrid& g, bool fwd) {
        std::lock_guard<std::mutex> lock(mu);
        auto key = std::make_tuple(g.d, g.G, fwd ? 1 : 0);
        auto it = plans.find(key);
        if (it != plans.end()) return it->second;
        int n[3] = {g.G, g.G, g.G};
        RealVec r(g.points());
        CplxVec c(g.modes());
        auto* cp = reinterpret_cast<fftw_complex*>(c.data());
        fftw_plan p = fwd ? fftw_plan_dft_r2c(g.d, n, r.data(), cp, FFTW_ESTIMATE)
                          : fftw_plan_dft_c2r(g.d, n, cp, r.data(), FFTW_ESTIMATE);
        if (!p) fail(ErrorKind::internal, "fftw planning failed");
        plans.emplace(key, p);
        return p;
    }
};

PlanCache& cache() {
    static PlanCache pc;
    return pc;
}

}  // namespace

void set_fft_threads(int n) {
    auto& pc = cache();
    std::lock_guard<std::mutex> lock(pc.mu);
    n = std::max(1, n);
    if (!pc.threads_ready) {
        fftw_init_threads();
        pc.threads_ready = true;
    }
    if (n == pc.threads) return;
    for (auto& kv : pc.plans) fftw_destroy_plan(kv.second);
    pc.plans.clear();
    fftw_plan_with_nthreads(n);
    pc.threads = n;
}

int fft_threads() { return cache().threads; }

CplxVec forward_component(const TorusGrid& g, const RealVec& a) {
    if (a.size() != g.points()) fail(ErrorKind::structural, "sample array does not match grid");
    fftw_plan p = cache().get(g, true);
    CplxVec out(g.modes());
    // r2c does not modify its input, but the API wants non-const
    fftw_execute_dft_r2c(p, const_cast<double*>(a.data()), reinterpret_cast<fftw_complex*>(out.data()));
    const double s = 1.0 / double(g.points());
    for (auto& z : out) z *= s;
    return out;
}

RealVec inverse_component(const TorusGrid& g, const CplxVec& c) {
    if (c.size() != g.modes()) fail(ErrorKind::structural, "coefficient array does not match grid");
    fftw_plan p = cache().get(g, false);
    CplxVec scratch(c);  // c2r clobbers its input
    RealVec out(g.points());
    fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
    return out;
}

SpectralField forward_transform(const GridField& a) {
    if (a.ncomp() != component_count(a.rank, a.grid.d))
        fail(ErrorKind::structural, "component count does not match rank");
    SpectralField f;
    f.grid = a.grid;
    f.rank = a.rank;
    for (const auto& c : a.comp) f.comp.push_back(forward_component(a.grid, c));
    return f;
}

GridField inverse_transform(const SpectralField& f) {
    GridField a;
    a.grid = f.grid;
    a.rank = f.rank;
    for (const auto& c : f.comp) a.comp.push_back(inverse_component(f.grid, c));
    return a;
}

// ---- cutoff and projections ---------------------------------------------

static double bump_exp(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }

double smooth_step(double t) {
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    double a = bump_exp(t), b = bump_exp(1 - t);
    return a / (a + b);
}

double chi(double r) {
    if (r <= 0.9) return 1.0;
    if (r >= 1.0) return 0.0;
    return smooth_step((1.0 - r) / 0.1);
}

bool is_dyadic(long n) { return n >= 1 && (n & (n - 1)) == 0; }

template <class Sym>
static SpectralField apply_radial(const SpectralField& f, Sym&& sym) {
    SpectralField out(f.grid, f.rank);
    const int d = f.grid.d;
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool, double) {
        double s = sym(std::sqrt(mode_norm2(m, d)));
        if (s == 0) return;
        for (int c = 0; c < f.ncomp(); ++c) out.comp[c][i] = s * f.comp[c][i];
    });
    return out;
}

SpectralField project_leq(long N, const SpectralField& f) {
    if (!is_dyadic(N)) fail(ErrorKind::parameter, "projection index must be dyadic, got " + std::to_string(N));
    const double inv = 1.0 / double(N);
    return apply_radial(f, [&](double r) { return chi(r * inv); });
}

SpectralField project_gt(long N, const SpectralField& f) {
    if (!is_dyadic(N)) fail(ErrorKind::parameter, "projection index must be dyadic, got " + std::to_string(N));
    const double inv = 1.0 / double(N);
    return apply_radial(f, [&](double r) { return 1.0 - chi(r * inv); });
}

SpectralField project_band(long N, const SpectralField& f) {
    if (!is_dyadic(N)) fail(ErrorKind::parameter, "band index must be dyadic, got " + std::to_string(N));
    if (N == 1) return project_leq(1, f);
    const double a = 1.0 / double(N), b = 2.0 / double(N);
    return apply_radial(f, [&](double r) { return chi(r * a) - chi(r * b); });
}

std::vector<long> nonzero_bands(const SpectralField& f) {
    std::vector<bool> hit(64, false);
    const int d = f.grid.d;
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool, double) {
        bool nz = false;
        for (int c = 0; c < f.ncomp() && !nz; ++c) nz = f.comp[c][i] != cplx(0, 0);
        if (!nz) return;
        double r = std::sqrt(mode_norm2(m, d));
        for (int j = 0; j < 62; ++j) {
            double N = std::ldexp(1.0, j);
            double w = j == 0 ? chi(r / N) : chi(r / N) - chi(2 * r / N);
            if (w != 0) hit[j] = true;
            if (r <= 0.45 * N) break;
        }
    });
    std::vector<long> out;
    for (int j = 0; j < 62; ++j)
        if (hit[j]) out.push_back(1L << j);
    return out;
}

// ---- multipliers ----------------------------------------------------------

static constexpr double two_pi = 6.283185307179586476925286766559;

SpectralField fractional_laplacian(double alpha, const SpectralField& f) {
    if (!(alpha > 0)) fail(ErrorKind::parameter, "alpha must be positive");
    return apply_radial(f, [&](double r) { return r == 0 ? 0.0 : std::pow(two_pi * r, 2 * alpha); });
}

SpectralField inverse_laplacian(const SpectralField& f) {
    return apply_radial(f, [&](double r) { return r == 0 ? 0.0 : -1.0 / (two_pi * two_pi * r * r); });
}

// Odd or direction-dependent symbols cannot be made Hermitian on Nyquist
// modes (m_a = G/2 has no partner -G/2 in the lattice); those modes are dropped.

SpectralField leray_project(const SpectralField& f) {
    if (f.rank != Rank::vector) fail(ErrorKind::structural, "Leray projection needs a vector field");
    SpectralField out(f.grid, f.rank);
    const int d = f.grid.d;
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (nyq) return;
        double m2 = mode_norm2(m, d);
        if (m2 == 0) {
            for (int c = 0; c < d; ++c) out.comp[c][i] = f.comp[c][i];
            return;
        }
        cplx dot = 0;
        for (int c = 0; c < d; ++c) dot += double(m[c]) * f.comp[c][i];
        dot /= m2;
        for (int c = 0; c < d; ++c) out.comp[c][i] = f.comp[c][i] - double(m[c]) * dot;
    });
    return out;
}

SpectralField gradient(const SpectralField& f) {
    const int d = f.grid.d;
    Rank r;
    if (f.rank == Rank::scalar)
        r = Rank::vector;
    else if (f.rank == Rank::vector)
        r = Rank::matrix;
    else
        fail(ErrorKind::structural, "gradient of a matrix field is not supported");
    SpectralField out(f.grid, r);
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (nyq) return;
        for (int c = 0; c < f.ncomp(); ++c) {
            cplx v = f.comp[c][i];
            for (int j = 0; j < d; ++j) out.comp[c * d + j][i] = cplx(0, two_pi * m[j]) * v;
        }
    });
    return out;
}

SpectralField divergence(const SpectralField& f) {
    const int d = f.grid.d;
    Rank r;
    if (f.rank == Rank::vector)
        r = Rank::scalar;
    else if (f.rank == Rank::matrix)
        r = Rank::vector;
    else
        fail(ErrorKind::structural, "divergence of a scalar field is not defined");
    SpectralField out(f.grid, r);
    const int rows = r == Rank::scalar ? 1 : d;
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (nyq) return;
        for (int a = 0; a < rows; ++a) {
            cplx s = 0;
            for (int j = 0; j < d; ++j) s += double(m[j]) * f.comp[a * d + j][i];
            out.comp[a][i] = cplx(0, two_pi) * s;
        }
    });
    return out;
}

SpectralField directional_derivative(const std::array<int, 3>& k, const SpectralField& f) {
    const int d = f.grid.d;
    SpectralField out(f.grid, f.rank);
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (nyq) return;
        double km = 0;
        for (int a = 0; a < d; ++a) km += double(k[a]) * m[a];
        for (int c = 0; c < f.ncomp(); ++c) out.comp[c][i] = cplx(0, two_pi * km) * f.comp[c][i];
    });
    return out;
}

// ---- resampling and products ----------------------------------------------

static std::size_t mode_index(const TorusGrid& g, const Mode& m) {
    const int G = g.G, H = g.half();
    auto wrap = [G](int v) { return std::size_t(v >= 0 ? v : v + G); };
    if (g.d == 2) return wrap(m[0]) * H + std::size_t(m[1]);
    return (wrap(m[0]) * G + wrap(m[1])) * H + std::size_t(m[2]);
}

SpectralField resample(const SpectralField& f, int G_new) {
    if (G_new == f.grid.G) return f;
    TorusGrid gn(f.grid.d, G_new);
    SpectralField out(gn, f.rank);
    const int lim = std::min(G_new, f.grid.G) / 2;  // exclusive: Nyquist modes are ambiguous
    const int d = f.grid.d;
    for_each_mode(gn, [&](std::size_t i, const Mode& m, bool, double) {
        for (int a = 0; a < d; ++a)
            if (std::abs(m[a]) >= lim) return;
        std::size_t j = mode_index(f.grid, m);
        for (int c = 0; c < f.ncomp(); ++c) out.comp[c][i] = f.comp[c][j];
    });
    out.aliased = f.aliased;
    out.truncated = f.truncated;
    return out;
}

int bandwidth(const SpectralField& f) {
    double mx = 0;
    for (const auto& v : f.comp)
        for (const auto& z : v) mx = std::max(mx, std::abs(z));
    if (mx == 0) return 0;
    const double tol = 1e-13 * mx;
    int bw = 0;
    const int d = f.grid.d;
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool, double) {
        int b = 0;
        for (int a = 0; a < d; ++a) b = std::max(b, std::abs(m[a]));
        if (b <= bw) return;
        for (int c = 0; c < f.ncomp(); ++c)
            if (std::abs(f.comp[c][i]) > tol) {
                bw = b;
                return;
            }
    });
    return bw;
}

int product_padding(const SpectralField& f, const SpectralField& g) {
    return bandwidth(f) + bandwidth(g) < f.grid.G / 2 ? 1 : 2;
}

SpectralField pointwise_product(const SpectralField& f, const SpectralField& g, int padding) {
    if (f.grid != g.grid) fail(ErrorKind::structural, "product operands live on different grids");
    if (padding < 1) fail(ErrorKind::parameter, "padding factor must be >= 1");
    const int d = f.grid.d;
    Rank r;
    std::vector<std::pair<int, int>> pairs;
    if (f.rank == Rank::scalar) {
        r = g.rank;
        for (int c = 0; c < g.ncomp(); ++c) pairs.emplace_back(0, c);
    } else if (g.rank == Rank::scalar) {
        r = f.rank;
        for (int c = 0; c < f.ncomp(); ++c) pairs.emplace_back(c, 0);
    } else if (f.rank == Rank::vector && g.rank == Rank::vector) {
        r = Rank::matrix;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) pairs.emplace_back(i, j);
    } else {
        fail(ErrorKind::structural, "unsupported operand ranks for pointwise product");
    }
    const int Gp = f.grid.G * padding;
    const int bsum = bandwidth(f) + bandwidth(g);
    TorusGrid gp(d, Gp);
    auto to_phys = [&](const SpectralField& s) {
        std::vector<RealVec> out;
        SpectralField p = padding == 1 ? s : resample(s, Gp);
        for (const auto& c : p.comp) out.push_back(inverse_component(gp, c));
        return out;
    };
    auto pf = to_phys(f);
    auto pg = to_phys(g);
    SpectralField prod(gp, r);
    RealVec buf(gp.points());
    for (std::size_t c = 0; c < pairs.size(); ++c) {
        const auto& a = pf[pairs[c].first];
        const auto& b = pg[pairs[c].second];
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = a[i] * b[i];
        prod.comp[c] = forward_component(gp, buf);
    }
    SpectralField out = padding == 1 ? std::move(prod) : resample(prod, f.grid.G);
    out.aliased = bsum >= Gp / 2;
    out.truncated = bsum >= f.grid.G / 2;
    return out;
}

SpectralField component(const SpectralField& f, int c) {
    SpectralField out;
    out.grid = f.grid;
    out.rank = Rank::scalar;
    out.comp.push_back(f.comp.at(c));
    return out;
}

SpectralField assemble(const TorusGrid& g, Rank r, std::vector<SpectralField> parts) {
    if (int(parts.size()) != component_count(r, g.d)) fail(ErrorKind::structural, "wrong number of components");
    SpectralField out;
    out.grid = g;
    out.rank = r;
    for (auto& p : parts) {
        if (p.grid != g || p.rank != Rank::scalar) fail(ErrorKind::structural, "assemble expects scalar parts");
        out.comp.push_back(std::move(p.comp[0]));
    }
    return out;
}

SpectralField transpose(const SpectralField& f) {
    if (f.rank != Rank::matrix) fail(ErrorKind::structural, "transpose needs a matrix field");
    SpectralField out = f;
    const int d = f.grid.d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out.comp[i * d + j] = f.comp[j * d + i];
    return out;
}

SpectralField trace_free(const SpectralField& f) {
    if (f.rank != Rank::matrix) fail(ErrorKind::structural, "trace_free needs a matrix field");
    SpectralField out = f;
    const int d = f.grid.d;
    for (std::size_t i = 0; i < f.grid.modes(); ++i) {
        cplx t = 0;
        for (int a = 0; a < d; ++a) t += f.comp[a * d + a][i];
        t /= double(d);
        for (int a = 0; a < d; ++a) out.comp[a * d + a][i] -= t;
    }
    return out;
}

cplx mean_of(const SpectralField& f, int c) { return f.comp.at(c)[0]; }

}  // namespace mikado
