#include "mikado/mikado_flows.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace mikado {

static double bump(double r, double lo, double hi) {
    if (r <= lo || r >= hi) return 0.0;
    double t = (r - lo) / (hi - lo);
    return std::exp(-1.0 / t) * std::exp(-1.0 / (1.0 - t));
}

// squared bump: same support as eta, slower rise, so psi keeps a short spectral tail
static double bump_sq(double r, double lo, double hi) {
    double b = bump(r, lo, hi);
    return b * b;
}

static double integrate(double lo, double hi, int d, double (*f)(double, double, double)) {
    boost::math::quadrature::tanh_sinh<double> ts;
    return ts.integrate([&](double r) { return f(r, lo, hi) * std::pow(r, d - 2); }, lo, hi);
}

double TubeProfile::operator()(double r) const { return bump(r, eta_lo, eta_hi) - ratio * bump_sq(r, tau_lo, tau_hi); }

double TubeProfile::weighted_moment() const {
    boost::math::quadrature::tanh_sinh<double> ts;
    const TubeProfile& self = *this;
    return ts.integrate([&](double r) { return self(r) * std::pow(r, d - 2); }, 0.5, 1.0);
}

TubeProfile make_profile(int d) {
    TubeProfile p;
    p.d = d;
    double Ie = integrate(p.eta_lo, p.eta_hi, d, bump);
    double It = integrate(p.tau_lo, p.tau_hi, d, bump_sq);
    p.ratio = Ie / It;
    return p;
}

double torus_line_distance(const Mode& k, const std::array<double, 3>& p, const std::array<double, 3>& x, int d) {
    double kk = mode_norm2(k, d);
    const int R = static_cast<int>(std::ceil(1.0 + std::sqrt(kk)));
    double best = 1e300;
    int z[3] = {0, 0, 0};
    const int r2 = d == 3 ? R : 0;
    for (z[0] = -R; z[0] <= R; ++z[0])
        for (z[1] = -R; z[1] <= R; ++z[1])
            for (z[2] = -r2; z[2] <= r2; ++z[2]) {
                double v[3], t = 0;
                for (int a = 0; a < d; ++a) {
                    v[a] = x[a] - p[a] - z[a];
                    t += v[a] * k[a];
                }
                t /= kk;
                double s = 0;
                for (int a = 0; a < d; ++a) s += (v[a] - t * k[a]) * (v[a] - t * k[a]);
                best = std::min(best, s);
            }
    return std::sqrt(best);
}

double mu_min(const DirectionCatalog& cat) { return 4.0 * cat.max_k_norm(); }

int required_grid(const DirectionCatalog& cat, double mu, int gamma) {
    return static_cast<int>(std::ceil(8.0 * mu * gamma * cat.max_k_norm() - 1e-9));
}

RealVec sample_tube(const DirectionCatalog& cat, int idx, double mu, int gamma, const TorusGrid& grid,
                    const TubeProfile& prof, double* scale) {
    const int d = grid.d;
    const Mode& k = cat.k[idx];
    const auto& p = cat.offset[idx];
    const double amp = std::pow(mu, 0.5 * (d - 1));
    RealVec out(grid.points());
    if (d == 2) {
        // primitive k: the lines l_k + Z^2 are the level sets n.(y - p) in Z, n = k rotated
        const double n0 = -k[1], n1 = k[0];
        const double kn = std::sqrt(mode_norm2(k, d));
        for_each_point(grid, [&](std::size_t i, const std::array<double, 3>& x) {
            double t = n0 * (gamma * x[0] - p[0]) + n1 * (gamma * x[1] - p[1]);
            t -= std::nearbyint(t);
            out[i] = amp * prof(mu * std::abs(t) / kn);
        });
    } else {
        for_each_point(grid, [&](std::size_t i, const std::array<double, 3>& x) {
            std::array<double, 3> y;
            for (int a = 0; a < 3; ++a) {
                y[a] = gamma * x[a];
                y[a] -= std::floor(y[a]);
            }
            out[i] = amp * prof(mu * torus_line_distance(k, p, y, d));
        });
    }
    const double n = double(grid.points());
    double mean = 0;
    for (double v : out) mean += v;
    mean /= n;
    double ms = 0;
    for (auto& v : out) {
        v -= mean;
        ms += v * v;
    }
    ms /= n;
    if (!(ms > 0)) fail(ErrorKind::resolution, "tube profile vanishes on the grid");
    const double s = 1.0 / std::sqrt(ms);
    for (auto& v : out) v *= s;
    if (scale) *scale = s;
    return out;
}

SpectralField omega_from(const Mode& k, const SpectralField& Psi) {
    const int d = Psi.grid.d;
    SpectralField g = gradient(inverse_laplacian(Psi));
    SpectralField O(Psi.grid, Rank::matrix);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            auto& out = O.comp[i * d + j];
            const auto& gj = g.comp[j];
            const auto& gi = g.comp[i];
            for (std::size_t m = 0; m < out.size(); ++m) out[m] = double(k[i]) * gj[m] - gi[m] * double(k[j]);
        }
    return O;
}

SpectralField MikadoFamily::W(int i) const {
    const int d = grid.d;
    SpectralField w(grid, Rank::vector);
    for (int a = 0; a < d; ++a) {
        double ka = catalog.k[i][a];
        for (std::size_t m = 0; m < w.comp[a].size(); ++m) w.comp[a][m] = ka * psi[i].comp[0][m];
    }
    return w;
}

SpectralField MikadoFamily::Omega(int i) const {
    SpectralField O = omega_from(catalog.k[i], psi[i]);
    O *= double(gamma);
    return O;
}

SpectralField tube_spectrum(const DirectionCatalog& cat, int idx, double mu, int gamma, const TorusGrid& grid,
                            const TubeProfile& prof, double* scale) {
    double s = 0;
    RealVec samples = sample_tube(cat, idx, mu, gamma, grid, prof, &s);
    SpectralField f;
    f.grid = grid;
    f.rank = Rank::scalar;
    f.comp.push_back(forward_component(grid, samples));
    samples = RealVec();
    // Sampling folds tail content onto modes with k.m != 0; those and the Nyquist
    // planes are dropped so that psi is exactly constant along k.
    const Mode& k = cat.k[idx];
    const int d = grid.d;
    auto& c = f.comp[0];
    double e = 0;
    for_each_mode(grid, [&](std::size_t m, const Mode& mm, bool nyq, double w) {
        long dot = 0;
        for (int a = 0; a < d; ++a) dot += long(k[a]) * mm[a];
        if (nyq || dot != 0 || m == 0) {
            c[m] = 0;
            return;
        }
        e += w * std::norm(c[m]);
    });
    if (!(e > 0)) fail(ErrorKind::resolution, "tube profile vanishes on the grid");
    const double r = 1.0 / std::sqrt(e);
    for (auto& z : c) z *= r;
    if (scale) *scale = s * r;
    return f;
}

MikadoFamily build_family(const DirectionCatalog& cat, double mu, const TorusGrid& grid, int gamma) {
    if (mu < mu_min(cat) * (1 - 1e-12))
        fail(ErrorKind::parameter, "mu = " + std::to_string(mu) + " is below mu_min = " + std::to_string(mu_min(cat)));
    if (gamma < 1 || grid.G % gamma) fail(ErrorKind::parameter, "gamma must divide G");
    int need = required_grid(cat, mu, gamma);
    if (grid.G < need)
        fail(ErrorKind::resolution, "tube needs G >= " + std::to_string(need) + ", grid has " + std::to_string(grid.G));
    MikadoFamily fam;
    fam.catalog = cat;
    fam.mu = mu;
    fam.gamma = gamma;
    fam.grid = grid;
    fam.profile = make_profile(grid.d);
    for (int i = 0; i < cat.size(); ++i) {
        double s = 0;
        fam.psi.push_back(tube_spectrum(cat, i, mu, gamma, grid, fam.profile, &s));
        fam.c.push_back(s);
    }
    return fam;
}

}  // namespace mikado
