#pragma once

#include <functional>
#include <vector>

#include "mikado/spectral.hpp"

namespace mikado {

enum class Integrator { if_euler, if_rk2 };
const char* integrator_name(Integrator i);

struct EvolutionConfig {
    double alpha = 1.0;
    int K = 0;  // radial Galerkin cutoff |m| <= K; 0 means the largest non-Nyquist shell
    double h = 1e-3;
    double T = 1e-2;
    Integrator integrator = Integrator::if_rk2;
    bool nonlinear = true;
    int padding = 2;  // 1 reproduces the collocation model of the construction
    double blowup_factor = 1e3;
    int record_every = 1;
    bool keep_states = true;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<SpectralField> u;  // empty unless keep_states
    std::vector<double> l2;
    std::vector<double> dissipation;  // ||(-Lap)^{alpha/2} u||^2 at each record
    double energy_defect = 0;  // |E(T) - E(0) + 2 int D| / E(0), trapezoid in time
    double max_divergence = 0;  // relative L2 of Div u over records
    int steps = 0;
};

using Observer = std::function<void(int step, double t, const SpectralField& u)>;

SpectralField heat_semigroup(const SpectralField& u0, double t, double alpha);

// -P_K Leray Div(u (x) u)
SpectralField nonlinear_term(const SpectralField& u, int K, int padding);
SpectralField galerkin_truncate(const SpectralField& u, int K);
int default_cutoff(const TorusGrid& g);

Trajectory evolve(const SpectralField& u_init, const EvolutionConfig& cfg, const Observer& obs = {});

struct GapCurve {
    std::vector<double> t;
    std::vector<double> gap;   // ||u(t) - u_init||_{H^{-s}}
    std::vector<double> l2;
    std::vector<double> hs;    // ||u(t)||_{H^{-s}}
    double s = 0;
    double drift_rate = 0;     // g(h)/h after the first step
    double forcing = 0;        // ||(-Lap)^alpha u + P Div(u (x) u)||_{H^{-s}} at t = 0
};

GapCurve nonuniqueness_gap(const SpectralField& u_init, const EvolutionConfig& cfg, double s,
                           const Observer& also = {});

struct FluxRow {
    long N = 0;
    double transport = 0;     // int P_{<=N}(u (x) u) : grad u_{<=N}
    double commutator = 0;    // int r_{<=N}(u,u) : grad u_{<=N}
    double cancellation = 0;  // int (u_{<=N} (x) u_{<=N}) : grad u_{<=N}
    double dissipation = 0;   // int |(-Lap)^{alpha/2} u_{<=N}|^2
    double scale = 0;         // ||P_{<=N}(u (x) u)|| ||grad u_{<=N}||, bounds |transport|
    double identity_gap() const;  // |transport - commutator|
};

FluxRow flux_forms(const SpectralField& u, long N, double alpha);
std::vector<FluxRow> flux_table(const SpectralField& u, double alpha);

// r_{<=N} both ways: spectral definition, and the physical convolution of the
// kernel of P_{<=N} against the differences u(x - y) - u_{<=N}(x).
SpectralField commutator_stress(const SpectralField& u, long N);
SpectralField commutator_kernel_form(const SpectralField& u, long N);

struct BnSequences {
    int which_case = 1;  // 1: L^inf weights, 2: L^q weights
    double q = 0;
    std::vector<long> N;
    std::vector<double> block;  // ||P_N u||_{L^q}
    std::vector<double> b;
    std::vector<double> B;      // B_{N0} at N0 = N[i]
    bool B_decreasing = false;
};

// alpha <= 1 gives the L^inf weights; otherwise L^q with q = d/(2 alpha - 2)
// unless q > 0 is passed.
BnSequences bN_sequences(const SpectralField& u, double alpha, double q);

// integral of A : B over the torus for same-shaped real fields given by spectra
double spectral_inner(const SpectralField& a, const SpectralField& b);

}  // namespace mikado
