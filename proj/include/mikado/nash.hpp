#pragma once

#include <array>
#include <vector>

#include "mikado/spectral.hpp"

namespace mikado {

struct DirectionCatalog {
    int d = 2;
    std::vector<Mode> k;
    std::vector<Mode> kperp;
    std::vector<std::array<double, 3>> offset;
    double beta0 = 0;
    double rho_dom = 0.25;
    double margin = 0;     // min Gamma_k^2 over the sampled ball
    double lipschitz = 0;  // max Lipschitz constant of Gamma_k over the sampled ball
    long long c_lambda_sq = 1;  // (prod |k_perp|)^2, exact

    int size() const { return static_cast<int>(k.size()); }
    double max_k_norm() const;
};

DirectionCatalog build_catalog(int d);

// x_k = Gamma_k^2(R) for symmetric R (row-major d x d). No domain check: the
// hot path of the construction guarantees |R - I| <= 1/4 by normalization.
void gamma_squared_raw(const DirectionCatalog& cat, const double* R, double* x);

// Checked version: domain error outside B_{rho_dom}(I) in operator norm.
std::vector<double> gamma_coefficients(const DirectionCatalog& cat, const std::vector<double>& R);

double operator_norm_sym(const std::vector<double>& A, int d);

// exact rank of {k (x) k} in Sym(d)
int sym_span_rank(const std::vector<Mode>& k, int d);

}  // namespace mikado
