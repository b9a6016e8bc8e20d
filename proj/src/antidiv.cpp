#include "mikado/antidiv.hpp"

#include <cmath>

namespace mikado {

static constexpr double two_pi = 6.283185307179586476925286766559;

SpectralField antidiv(const SpectralField& f) {
    if (f.rank != Rank::vector) fail(ErrorKind::structural, "anti-divergence acts on vector fields");
    const int d = f.grid.d;
    if (d < 2) fail(ErrorKind::unsupported, "anti-divergence needs d >= 2");
    const double a = double(2 - d) / double(d - 1);
    const double b = -1.0 / double(d - 1);
    SpectralField out(f.grid, Rank::matrix);
    for_each_mode(f.grid, [&](std::size_t i, const Mode& m, bool nyq, double) {
        if (nyq) return;
        double m2 = mode_norm2(m, d);
        if (m2 == 0) return;
        // zeta_j = 2 pi i m_j, symbol of Delta is L = -4 pi^2 |m|^2
        const double L = -two_pi * two_pi * m2;
        cplx zeta[3];
        cplx z = 0;
        for (int j = 0; j < d; ++j) {
            zeta[j] = cplx(0, two_pi * m[j]);
            z += zeta[j] * f.comp[j][i];
        }
        for (int r = 0; r < d; ++r)
            for (int c = r; c < d; ++c) {
                cplx v = a * zeta[r] * zeta[c] * z / (L * L) + (zeta[r] * f.comp[c][i] + zeta[c] * f.comp[r][i]) / L;
                if (r == c) v += b * z / L;
                out.comp[r * d + c][i] = v;
                out.comp[c * d + r][i] = v;
            }
    });
    return out;
}

SpectralField bilinear_antidiv(const SpectralField& f, const SpectralField& X, int padding) {
    if (f.rank != Rank::vector || X.rank != Rank::matrix)
        fail(ErrorKind::structural, "bilinear anti-divergence takes (vector, matrix)");
    if (f.grid != X.grid) fail(ErrorKind::structural, "operands live on different grids");
    const int d = f.grid.d;
    double mean2 = 0, tot2 = 0;
    for (int c = 0; c < X.ncomp(); ++c) {
        mean2 += std::norm(X.comp[c][0]);
        for (const auto& z : X.comp[c]) tot2 += std::norm(z);
    }
    if (mean2 > 1e-24 * std::max(tot2, 1e-300))
        fail(ErrorKind::precondition, "bilinear anti-divergence needs a mean-free matrix argument");

    SpectralField B1(f.grid, Rank::matrix);
    SpectralField g(f.grid, Rank::vector);
    SpectralField grad_f = gradient(f);  // (l, j) -> d_j f_l
    for (int l = 0; l < d; ++l) {
        std::vector<SpectralField> row;
        for (int k = 0; k < d; ++k) row.push_back(component(X, l * d + k));
        SpectralField Ml = antidiv(assemble(f.grid, Rank::vector, std::move(row)));
        B1 += pointwise_product(component(f, l), Ml, padding);
        for (int mm = 0; mm < d; ++mm)
            for (int j = 0; j < d; ++j) {
                SpectralField t = pointwise_product(component(grad_f, l * d + j), component(Ml, mm * d + j), padding);
                for (std::size_t i = 0; i < t.comp[0].size(); ++i) g.comp[mm][i] += t.comp[0][i];
            }
    }
    return B1 - antidiv(g);
}

}  // namespace mikado
