#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mikado/reports.hpp"

using namespace mikado;

int main(int argc, char** argv) {
    CLI::App app{"mikado-forge: stationary convex integration experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool snapshots = false;
    int threads = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_flag("--snapshots", snapshots, "write MKF1 field snapshots");
        sub->add_option("--threads", threads, "FFT threads (fallback: MIKADO_THREADS)")->check(CLI::PositiveNumber);
    };
    auto* it = app.add_subcommand("iterate", "run the convex integration schedule");
    auto* au = app.add_subcommand("audit", "exact audit of the parameter chain and frequency plan");
    auto* si = app.add_subcommand("simulate", "evolve an initial datum and record the gap curve");
    auto* fl = app.add_subcommand("flux", "energy flux forms and b_N sequences");
    for (auto* s : {it, au, si, fl}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.out = out_dir;
        if (snapshots) cfg.snapshots = true;
        if (threads == 0) {
            if (const char* env = std::getenv("MIKADO_THREADS")) {
                try {
                    threads = std::stoi(env);
                } catch (const std::exception&) {
                    threads = 0;
                }
                if (threads < 1) {
                    std::cerr << "MIKADO_THREADS must be a positive integer\n";
                    return kExitConfig;
                }
            }
        }
        if (threads > 0) cfg.threads = threads;
        set_fft_threads(cfg.threads);

        if (it->parsed()) return cmd_iterate(cfg);
        if (au->parsed()) return cmd_audit(cfg);
        if (si->parsed()) return cmd_simulate(cfg);
        return cmd_flux(cfg);
    } catch (const Error& e) {
        std::cerr << "error (" << kind_name(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return kExitResource;
    }
}
