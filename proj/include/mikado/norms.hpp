#pragma once

#include <limits>
#include <vector>

#include "mikado/spectral.hpp"

namespace mikado {

constexpr double kInf = std::numeric_limits<double>::infinity();

// |f(x)| is the Euclidean (Frobenius for matrices) norm over components.
double lp_norm(const SpectralField& f, double p);
double lp_norm(const GridField& f, double p);
double sup_norm(const GridField& f);

double sobolev_norm(const SpectralField& f, double s, bool homogeneous);
double besov_norm(const SpectralField& f, double s, double q, double r);

// ||f (x) g||_{H^s} (or dot-H^s) with the tensor formed by an exact product,
// one component pair at a time so that padded grids stay affordable.
double tensor_sobolev_norm(const SpectralField& f, const SpectralField& g, double s, bool homogeneous);

struct ParaproductEntry {
    long N;
    long M;
    double value;
};

struct ParaproductAudit {
    double total = 0;
    std::vector<ParaproductEntry> table;
};

ParaproductAudit paraproduct_audit(const SpectralField& u, double s);

}  // namespace mikado
