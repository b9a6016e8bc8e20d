#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mikado/frequency.hpp"
#include "mikado/mikado_flows.hpp"
#include "mikado/nash.hpp"
#include "mikado/spectral.hpp"

namespace mikado {

enum class StepMode { strict, empirical };
enum class Scheme { besov, l2 };

const char* mode_name(StepMode m);
const char* scheme_name(Scheme s);

struct ReynoldsState {
    SpectralField u;  // divergence-free, mean-free
    SpectralField R;  // symmetric
    int n = 0;
    long N = 0;               // dyadic: supp u^ in B(0, N)
    std::vector<long> D;      // D_j history
    std::vector<long> bands;  // band N_j of each increment w_j, bands[0] for u_0
    double alpha = 1;
};

// Symmetric matrix samples, d(d+1)/2 components, (i,j) with i <= j.
struct SymField {
    TorusGrid grid;
    std::vector<RealVec> c;
    SymField() = default;
    explicit SymField(const TorusGrid& g);
    static int idx(int i, int j, int d);
    double& at(int i, int j, std::size_t p) { return c[idx(i, j, grid.d)][p]; }
    double at(int i, int j, std::size_t p) const { return c[idx(i, j, grid.d)][p]; }
};

SymField to_sym(const SpectralField& R);
SpectralField from_sym(const SymField& S);
double frobenius_at(const SymField& S, std::size_t p);
double sym_l1(const SymField& S);
double sym_sup(const SymField& S);

struct Schedule {
    std::vector<double> delta, p, theta;
    static Schedule main(int steps);                               // 2^-n, 2 - 2^-n, 2^-n
    static Schedule perturbative(int steps, double eps, double theta);  // 2^{-n-2} eps, 3/2, theta
    int steps() const { return static_cast<int>(delta.size()); }
};

struct ParameterSet {
    StepMode mode = StepMode::empirical;
    long lambda = 0;
    double mu = 0;
    double gamma = 0;
    long sigma = 0;
    std::vector<long> sigma_k;
    int e = 0;
    double eps = 0, beta = 0, s = 0;
    double delta = 0, p = 0, theta = 0;
    int G = 0;
};

struct StepOptions {
    double alpha = 1;
    StepMode mode = StepMode::empirical;
    int e_eff = 1;
    int grid_cap = 4096;
    bool keep_pieces = false;
    bool normalize_trace = true;  // hand the next state the trace-free part of R-bar
    double mu_override = 0;       // 0: max(lambda^beta, mu_min)
    long lambda_start = 0;        // 0: smallest power of 4 with sigma/2 >= N
    int max_escalations = 4;
    bool measure_paraproduct = true;
    int work_grid = 0;  // 0: smallest admissible grid for the step
};

struct RunReport {
    int seed = 0;
    int n = 0;
    std::string scheme, mode, status;
    long lambda = 0;
    double mu = 0, gamma = 0;
    long sigma = 0;
    int G = 0;
    long N_prev = 0, D = 0;
    bool D_gt_50N = false;
    double R_prev_hs = 0;
    double R_hs = 0, R_hs_raw = 0, R_l1 = 0, R_prev_l1 = 0;
    double w_lp = 0, w_besov = 0, w_l2 = 0, w_linf = 0, wl_linf = 0;
    double para_sum = 0, para_bound = 0;
    double div_w = 0, support_leak = 0, wpl_identity = 0, amp_reassembly = 0;
    double decomposition = 0, master_residual = 0, master_residual_l2 = 0;
    double master_residual_raw = 0;  // L^2 scheme: without the truncation commutator
    double trunc_l1 = 0;
    double osc_l1 = 0, dis_l1 = 0, off_l1 = 0, cor_l1 = 0, lin_l1 = 0;
    double osc_hs = 0, dis_hs = 0, off_hs = 0, cor_hs = 0, lin_hs = 0;
    double A_meas = 0;
    bool accepted = false;
    bool infeasible = false;
    double wall_seconds = 0;
};

struct PerturbationBundle {
    GridField wp, wl, wd;  // physical pieces (wl, wd may be released)
    SpectralField w;       // assembled, Div-free, masked to its annulus
    double support_leak = 0;
    double wpl_identity = 0;
    double assembly_gap = 0;  // |w - (wp + wl + wd)| / |w| on the grid
    double Rinf = 0;
};

struct StressBundle {
    SpectralField osc, dis, off, cor, lin;  // kept only on request
    SpectralField trunc;                     // L^2 scheme: truncation commutator
    SpectralField Rbar;
    double decomposition = 0;
    double master_residual = 0, master_residual_l2 = 0;
    double amp_reassembly = 0;
    double osc_l1 = 0, dis_l1 = 0, off_l1 = 0, cor_l1 = 0, lin_l1 = 0;
    double osc_hs = 0, dis_hs = 0, off_hs = 0, cor_hs = 0, lin_hs = 0;
};

// seeds
SpectralField seed_velocity(int d, int G, double amplitude, double phase);
ReynoldsState seed_state(int d, double alpha, double amplitude, int seed_id, int G = 16);
// relative size of P(Div(u(x)u) + (-Lap)^a u - Div R) in H^{-s}; padding 1 is the
// collocation product of the Besov runs, 2 the truncated product of the L^2 runs
double reynolds_residual(const ReynoldsState& s, int padding);
double stress_hs(const SpectralField& R, double alpha);  // ||R||_{H^{-s}}, s = d/2 + 2 alpha + 1

// Besov scheme
std::vector<RealVec> besov_amplitudes(const SymField& R, const DirectionCatalog& cat, double* Rinf = nullptr,
                                      double* reassembly = nullptr);
ParameterSet besov_parameters(long lambda, double delta, double p, double theta, int d, double alpha,
                              const StepOptions& opt, const DirectionCatalog& cat);
PerturbationBundle besov_perturbation(const ReynoldsState& st, const ParameterSet& ps, const DirectionCatalog& cat);
StressBundle besov_stress(const ReynoldsState& st, PerturbationBundle& pb, const ParameterSet& ps,
                          const DirectionCatalog& cat, const StepOptions& opt);

struct StepResult {
    ReynoldsState state;
    ParameterSet params;
    RunReport report;
    std::vector<AuditRow> audit;
};

StepResult besov_step(ReynoldsState st, double delta, double p, double theta, const StepOptions& opt);

// L^2 scheme
double zeta_cutoff(double X, double R_l1);
// L^2 step's bilinear anti-divergence for X = tau k (x) k
SpectralField rank_one_antidiv(const SpectralField& f, const SpectralField& tau, const Mode& k);
void l2_amplitudes(const SymField& R, const DirectionCatalog& cat, std::vector<RealVec>& a, RealVec& rho,
                   double* R_l1 = nullptr, double* reassembly = nullptr);

struct L2Options {
    double alpha = 0.5;
    double mu = 0;        // 0: mu_min (empirical); the strict value is reported
    int resolution = 8;  // G >= resolution * gamma * mu * max|k|
    int grid_cap = 2048;
    bool keep_pieces = false;
};

struct L2Result {
    ReynoldsState state;
    RunReport report;
    StressBundle stress;
    double mu_strict = 0;
};

L2Result l2_build(const ReynoldsState& st, int gamma, const L2Options& opt);
L2Result l2_step(const ReynoldsState& st, double delta, const L2Options& opt, int gamma_start = 8);

// driver
struct ScheduleRun {
    ReynoldsState final_state;
    std::vector<RunReport> reports;
    bool bands_exact = false;
    bool low_modes_preserved = false;
};

// called with the seed (n = 0) and after every accepted step
using StateObserver = std::function<void(int n, const ReynoldsState& st)>;

ScheduleRun run_schedule(const ReynoldsState& seed, const Schedule& sched, Scheme scheme, const StepOptions& opt,
                         const L2Options& l2opt = {}, const StateObserver& on_state = {});

// seeds u0^(i) with distinct phases; the iteration needs small amplitude, the
// separation ||u0^(i) - u0^(j)||_{L^1} > 3 needs amplitude of order 2
std::vector<ReynoldsState> seed_family(int d, double alpha, int count, double amplitude, int G = 16);
double min_pairwise_l1(const std::vector<ReynoldsState>& seeds);
// P_N u is the restriction of u to the annulus of band N, for every recorded band
bool band_structure_exact(const ReynoldsState& s);
bool low_modes_match(const ReynoldsState& s, const ReynoldsState& seed);

}  // namespace mikado
