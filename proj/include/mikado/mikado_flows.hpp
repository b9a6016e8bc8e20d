#pragma once

#include <array>
#include <vector>

#include "mikado/nash.hpp"
#include "mikado/spectral.hpp"

namespace mikado {

// psi = eta - (I_eta / I_tau) tau on [1/2, 1], weighted moment int psi r^{d-2} = 0
struct TubeProfile {
    int d = 2;
    double eta_lo = 0.5, eta_hi = 1.0;
    double tau_lo = 0.5, tau_hi = 1.0;  // tau is the squared bump
    double ratio = 0;  // I_eta / I_tau
    double operator()(double r) const;
    double weighted_moment() const;  // quadrature check of the vanishing moment
};

TubeProfile make_profile(int d);

double torus_line_distance(const Mode& k, const std::array<double, 3>& p, const std::array<double, 3>& x, int d);

// Samples of psi_k(gamma x) with the discrete constraints mean 0, mean square 1
// imposed on the grid. scale receives the factor c_k (without mu^{(d-1)/2}).
RealVec sample_tube(const DirectionCatalog& cat, int idx, double mu, int gamma, const TorusGrid& grid,
                    const TubeProfile& prof, double* scale = nullptr);

// Spectrum of psi_k(gamma .): mean 0, no Nyquist content, supported on k.m = 0,
// unit Parseval energy.
SpectralField tube_spectrum(const DirectionCatalog& cat, int idx, double mu, int gamma, const TorusGrid& grid,
                            const TubeProfile& prof, double* scale = nullptr);

struct MikadoFamily {
    DirectionCatalog catalog;
    double mu = 0;
    int gamma = 1;
    TorusGrid grid;
    TubeProfile profile;
    std::vector<double> c;    // per-k normalization constant
    std::vector<SpectralField> psi;  // scalar psi_k(gamma .), mean exactly 0

    int size() const { return catalog.size(); }
    SpectralField W(int i) const;      // psi_k(gamma .) k
    SpectralField Omega(int i) const;  // Omega_k(gamma .), Div = gamma W_k(gamma .)
};

double mu_min(const DirectionCatalog& cat);
int required_grid(const DirectionCatalog& cat, double mu, int gamma);

MikadoFamily build_family(const DirectionCatalog& cat, double mu, const TorusGrid& grid, int gamma = 1);

// Omega built from an arbitrary scalar Psi constant along k: k (x) grad Lap^{-1} Psi - transpose
SpectralField omega_from(const Mode& k, const SpectralField& Psi);

}  // namespace mikado
