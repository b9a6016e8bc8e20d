#include "mikado/norms.hpp"

#include <algorithm>
#include <cmath>

namespace mikado {

double lp_norm(const GridField& f, double p) {
    if (!(p >= 1)) fail(ErrorKind::parameter, "L^p needs p >= 1");
    const std::size_t n = f.grid.points();
    if (std::isinf(p)) return sup_norm(f);
    // fixed summation order keeps results bitwise reproducible
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (const auto& c : f.comp) s += c[i] * c[i];
        if (p == 2)
            acc += s;
        else if (p == 1)
            acc += std::sqrt(s);
        else
            acc += std::pow(s, 0.5 * p);
    }
    return std::pow(acc / double(n), 1.0 / p);
}

double sup_norm(const GridField& f) {
    double mx = 0;
    for (std::size_t i = 0; i < f.grid.points(); ++i) {
        double s = 0;
        for (const auto& c : f.comp) s += c[i] * c[i];
        mx = std::max(mx, s);
    }
    return std::sqrt(mx);
}

double lp_norm(const SpectralField& f, double p) {
    if (p == 2) return sobolev_norm(f, 0, false);
    return lp_norm(inverse_transform(f), p);
}

double sobolev_norm(const SpectralField& f, double s, bool homogeneous) {
    const int d = f.grid.d;
    double acc = 0;
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool, double w) {
        double m2 = mode_norm2(m, d);
        double weight;
        if (homogeneous) {
            if (m2 == 0) return;
            weight = s == 0 ? 1.0 : std::pow(m2, s);
        } else {
            weight = s == 0 ? 1.0 : std::pow(1.0 + m2, s);
        }
        double e = 0;
        for (int c = 0; c < f.ncomp(); ++c) e += std::norm(f.comp[c][i]);
        acc += w * weight * e;
    });
    return std::sqrt(acc);
}

double besov_norm(const SpectralField& f, double s, double q, double r) {
    if (!(q >= 1) || !(r >= 1)) fail(ErrorKind::parameter, "Besov indices need q, r >= 1");
    double acc = 0;
    for (long N : nonzero_bands(f)) {
        double b = std::pow(double(N), s) * lp_norm(project_band(N, f), q);
        if (std::isinf(r))
            acc = std::max(acc, b);
        else
            acc += std::pow(b, r);
    }
    return std::isinf(r) ? acc : std::pow(acc, 1.0 / r);
}

static double weighted_energy(const TorusGrid& g, const CplxVec& c, double s, bool homogeneous) {
    double acc = 0;
    const int d = g.d;
    for_each_mode(g, [&](std::size_t i, const Mode& m, bool, double w) {
        double m2 = mode_norm2(m, d);
        double weight;
        if (homogeneous) {
            if (m2 == 0) return;
            weight = s == 0 ? 1.0 : std::pow(m2, s);
        } else {
            weight = s == 0 ? 1.0 : std::pow(1.0 + m2, s);
        }
        acc += w * weight * std::norm(c[i]);
    });
    return acc;
}

double tensor_sobolev_norm(const SpectralField& f, const SpectralField& g, double s, bool homogeneous) {
    if (f.grid != g.grid) fail(ErrorKind::structural, "tensor operands live on different grids");
    const int bsum = bandwidth(f) + bandwidth(g);
    if (bsum == 0 && (sobolev_norm(f, 0, false) == 0 || sobolev_norm(g, 0, false) == 0)) return 0;
    // smallest even padded size holding the product without wrap-around
    int Gp = f.grid.G;
    while (bsum >= Gp / 2) Gp *= 2;
    TorusGrid gp(f.grid.d, Gp);
    double acc = 0;
    for (int i = 0; i < f.ncomp(); ++i) {
        RealVec fi = inverse_component(gp, resample(component(f, i), Gp).comp[0]);
        for (int j = 0; j < g.ncomp(); ++j) {
            RealVec gj = inverse_component(gp, resample(component(g, j), Gp).comp[0]);
            for (std::size_t k = 0; k < gj.size(); ++k) gj[k] *= fi[k];
            acc += weighted_energy(gp, forward_component(gp, gj), s, homogeneous);
        }
    }
    return std::sqrt(acc);
}

ParaproductAudit paraproduct_audit(const SpectralField& u, double s) {
    ParaproductAudit out;
    auto bands = nonzero_bands(u);
    std::vector<SpectralField> blocks;
    for (long N : bands) blocks.push_back(project_band(N, u));
    for (std::size_t a = 0; a < bands.size(); ++a) {
        for (std::size_t b = a; b < bands.size(); ++b) {
            double v = tensor_sobolev_norm(blocks[a], blocks[b], -s, true);
            out.table.push_back({bands[a], bands[b], v});
            out.total += v;
            if (b != a) {
                // P_M u (x) P_N u is the transpose; same norm
                out.table.push_back({bands[b], bands[a], v});
                out.total += v;
            }
        }
    }
    std::sort(out.table.begin(), out.table.end(),
              [](const ParaproductEntry& x, const ParaproductEntry& y) { return x.N != y.N ? x.N < y.N : x.M < y.M; });
    return out;
}

}  // namespace mikado
