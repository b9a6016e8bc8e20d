#include "mikado/nash.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace mikado {

double DirectionCatalog::max_k_norm() const {
    double mx = 0;
    for (const auto& v : k) mx = std::max(mx, std::sqrt(mode_norm2(v, d)));
    return mx;
}

double operator_norm_sym(const std::vector<double>& A, int d) {
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = A[i * d + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

int sym_span_rank(const std::vector<Mode>& k, int d) {
    // rows: directions, columns: upper-triangular entries; Bareiss elimination
    const int cols = d * (d + 1) / 2;
    std::vector<std::vector<long long>> A;
    for (const auto& v : k) {
        std::vector<long long> row;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) row.push_back(static_cast<long long>(v[i]) * v[j]);
        A.push_back(row);
    }
    const int rows = static_cast<int>(A.size());
    int rank = 0;
    long long prev = 1;
    for (int c = 0; c < cols && rank < rows; ++c) {
        int piv = -1;
        for (int r = rank; r < rows; ++r)
            if (A[r][c] != 0) {
                piv = r;
                break;
            }
        if (piv < 0) continue;
        std::swap(A[piv], A[rank]);
        for (int r = rank + 1; r < rows; ++r) {
            for (int cc = c + 1; cc < cols; ++cc) A[r][cc] = (A[rank][c] * A[r][cc] - A[r][c] * A[rank][cc]) / prev;
            A[r][c] = 0;
        }
        prev = A[rank][c];
        ++rank;
    }
    return rank;
}

void gamma_squared_raw(const DirectionCatalog& cat, const double* R, double* x) {
    const double b0 = cat.beta0;
    if (cat.d == 2) {
        x[0] = R[0] - b0;
        x[1] = R[3] - b0;
        x[2] = 0.5 * (b0 + R[1]);
        x[3] = 0.5 * (b0 - R[1]);
        return;
    }
    x[0] = R[0] - 2 * b0;
    x[1] = R[4] - 2 * b0;
    x[2] = R[8] - 2 * b0;
    const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int p = 0; p < 3; ++p) {
        double r = R[pairs[p][0] * 3 + pairs[p][1]];
        x[3 + 2 * p] = 0.5 * (b0 + r);
        x[4 + 2 * p] = 0.5 * (b0 - r);
    }
}

std::vector<double> gamma_coefficients(const DirectionCatalog& cat, const std::vector<double>& R) {
    const int d = cat.d;
    if (int(R.size()) != d * d) fail(ErrorKind::structural, "matrix has wrong size");
    std::vector<double> D(R);
    for (int i = 0; i < d; ++i) D[i * d + i] -= 1.0;
    double dist = operator_norm_sym(D, d);
    if (dist > cat.rho_dom * (1 + 1e-14))
        fail(ErrorKind::domain, "|R - I| = " + std::to_string(dist) + " exceeds the catalog domain");
    std::vector<double> x(cat.size());
    gamma_squared_raw(cat, R.data(), x.data());
    for (auto& v : x) v = std::sqrt(v);
    return x;
}

// distance on the torus from q to the line through p with direction k
static double line_gap(const std::array<double, 3>& q, const std::array<double, 3>& p, const Mode& k, int d) {
    double kk = mode_norm2(k, d);
    double best = 1e300;
    for (int z0 = -2; z0 <= 2; ++z0)
        for (int z1 = -2; z1 <= 2; ++z1)
            for (int z2 = (d == 3 ? -2 : 0); z2 <= (d == 3 ? 2 : 0); ++z2) {
                int z[3] = {z0, z1, z2};
                double v[3], t = 0;
                for (int a = 0; a < d; ++a) {
                    v[a] = q[a] - p[a] - z[a];
                    t += v[a] * k[a];
                }
                t /= kk;
                double s = 0;
                for (int a = 0; a < d; ++a) s += (v[a] - t * k[a]) * (v[a] - t * k[a]);
                best = std::min(best, s);
            }
    return std::sqrt(best);
}

DirectionCatalog build_catalog(int d) {
    DirectionCatalog cat;
    cat.d = d;
    if (d == 2) {
        cat.k = {{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, -1, 0}};
        cat.kperp = {{0, 1, 0}, {1, 0, 0}, {1, -1, 0}, {1, 1, 0}};
        cat.beta0 = 3.0 / 8.0;
    } else if (d == 3) {
        cat.k = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, -1, 0}, {1, 0, 1}, {1, 0, -1}, {0, 1, 1}, {0, 1, -1}};
        cat.kperp = {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}, {1, -1, 0}, {1, 1, 0}, {1, 0, -1}, {1, 0, 1}, {0, 1, -1}, {0, 1, 1}};
        // pairs need beta0 > 1/4 (off-diagonals up to 1/4), axes need 2 beta0 < 3/4
        cat.beta0 = 5.0 / 16.0;
    } else {
        fail(ErrorKind::unsupported, "catalog exists for d = 2, 3 only");
    }
    const int n = cat.size();
    for (int i = 0; i < n; ++i) {
        long long dot = 0, kk = 0, pp = 0;
        for (int a = 0; a < d; ++a) {
            dot += static_cast<long long>(cat.k[i][a]) * cat.kperp[i][a];
            kk += static_cast<long long>(cat.k[i][a]) * cat.k[i][a];
            pp += static_cast<long long>(cat.kperp[i][a]) * cat.kperp[i][a];
        }
        if (dot != 0 || pp > kk) fail(ErrorKind::internal, "perpendicular invariant broken");
        cat.c_lambda_sq *= pp;
    }
    if (sym_span_rank(cat.k, d) != d * (d + 1) / 2) fail(ErrorKind::internal, "directions do not span Sym(d)");

    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < n; ++i) {
        std::array<double, 3> p{0, 0, 0};
        double pw = phi;
        for (int a = 0; a < d; ++a) {
            double v = pw * (i + 1);
            p[a] = v - std::floor(v);
            pw *= phi;
        }
        cat.offset.push_back(p);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bool opposite = true;
            for (int a = 0; a < d; ++a) opposite = opposite && cat.k[i][a] == -cat.k[j][a];
            if (i != j && opposite && line_gap(cat.offset[i], cat.offset[j], cat.k[j], d) < 1e-9)
                fail(ErrorKind::internal, "offset lies on the opposite line");
        }

    // sample B_{1/4}(I) in operator norm: random symmetric directions scaled to
    // radii in (0, 1/4], plus the sphere itself
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> nd(0, 1);
    std::uniform_real_distribution<double> ud(0, 1);
    double margin = 1e300, lip = 0;
    std::vector<double> x(n);
    // gradient norm of each affine x_k w.r.t. the independent entries of R
    std::vector<double> grad(n);
    for (int i = 0; i < n; ++i) grad[i] = (i < d) ? 1.0 : 0.5;
    for (int s = 0; s < 4000; ++s) {
        std::vector<double> D(d * d);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) D[i * d + j] = D[j * d + i] = nd(rng);
        double on = operator_norm_sym(D, d);
        double r = s % 4 == 0 ? 0.25 : 0.25 * ud(rng);
        for (auto& v : D) v *= r / on;
        for (int i = 0; i < d; ++i) D[i * d + i] += 1.0;
        gamma_squared_raw(cat, D.data(), x.data());
        for (int i = 0; i < n; ++i) {
            margin = std::min(margin, x[i]);
            if (x[i] > 0) lip = std::max(lip, grad[i] / (2 * std::sqrt(x[i])));
        }
    }
    if (!(margin > 0)) fail(ErrorKind::internal, "catalog positivity fails on B_{1/4}(I)");
    cat.margin = margin;
    cat.lipschitz = lip;
    return cat;
}

}  // namespace mikado
