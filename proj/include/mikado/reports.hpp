#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mikado/convex.hpp"
#include "mikado/dynamics.hpp"
#include "mikado/frequency.hpp"

namespace mikado {

struct Tolerances {
    double div_w = 1e-12;
    double support = 1e-12;
    double decomposition = 1e-8;
    double master = 1e-6;
    double reassembly = 1e-10;
    double wpl = 1e-12;
};

struct RunConfig {
    int d = 2;
    double alpha = 1.0;
    Scheme scheme = Scheme::besov;
    StepMode mode = StepMode::empirical;

    // schedule: "main" or "perturbative"; explicit arrays override per-step values
    std::string schedule = "main";
    int steps = 2;
    double eps = 1.0;  // perturbative only
    std::vector<double> delta, p, theta;

    int grid_cap = 4096;
    int l2_grid_cap = 2048;
    int l2_resolution = 8;
    int gamma_start = 8;
    std::vector<int> seeds{0};
    double amplitude = 1e-3;
    int seed_grid = 16;
    Tolerances tol;

    // audit
    long lambda = 4096;
    double audit_p = 1.5;
    double audit_theta = 0.5;

    // simulate / flux: field source "seed", "shear", "zero", "random", "iterate"
    std::string source = "seed";
    int depth = 0;  // iterate source: number of convex integration steps
    int grid = 32;
    int shear_mode = 1;
    double shear_amplitude = 1.0;
    unsigned random_seed = 1;
    int random_band = 4;
    double h = 1e-4;
    double T = 1e-2;
    Integrator integrator = Integrator::if_rk2;
    int K = 0;
    int padding = 2;
    bool nonlinear = true;
    double gap_s = -1;  // < 0: d/2 + 2 alpha + 2
    int record_every = 1;
    double q = 0;

    std::string out = "out";
    bool snapshots = false;
    int threads = 1;
};

RunConfig parse_config(const nlohmann::json& j);  // throws ErrorKind::parameter on bad input
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);
void validate(const RunConfig& c, const std::string& command);
Schedule make_schedule(const RunConfig& c);

// fixed-format numbers keep CSVs byte-identical across runs
std::string fmt_num(double x);

struct CsvTable {
    std::vector<std::string> header;  // "name[unit]"
    std::vector<std::vector<std::string>> rows;
    void write(std::ostream& os) const;
    void write(const std::string& path) const;
};

CsvTable report_table(const std::vector<RunReport>& reports);
CsvTable timing_table(const std::vector<RunReport>& reports);
CsvTable tidy_table(const std::vector<RunReport>& reports);  // long format for plotting tools
CsvTable audit_table(const ParameterAudit& a);
CsvTable plan_table(const FrequencyPlan& plan, const DirectionCatalog& cat);
CsvTable gap_table(const GapCurve& g);
CsvTable flux_csv(const std::vector<FluxRow>& rows);
CsvTable bn_table(const BnSequences& b);

// binary snapshot: "MKF1", u32 d, G, rank, u8 domain (0 spectral, 1 physical),
// then little-endian f64 data: (re, im) pairs of the half spectra, or samples
void write_snapshot(const std::string& path, const SpectralField& f);
SpectralField read_snapshot(const std::string& path);

// field sources shared by simulate and flux
SpectralField shear_flow(int d, int G, int mode, double amplitude);
SpectralField random_solenoidal(int d, int G, int band, unsigned seed);
SpectralField source_field(const RunConfig& c);

// exit codes
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAssertion = 3;
constexpr int kExitResource = 4;

int exit_code_for(ErrorKind k);

int cmd_iterate(const RunConfig& c);
int cmd_audit(const RunConfig& c);
int cmd_simulate(const RunConfig& c);
int cmd_flux(const RunConfig& c);

// structural assertions of an accepted step
bool step_assertions_hold(const RunReport& r, const Tolerances& tol);

}  // namespace mikado
