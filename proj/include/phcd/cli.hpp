#ifndef PHCD_CLI_HPP
#define PHCD_CLI_HPP

// Batch entry point: sectioned plain-text configuration, pipeline
// orchestration and artifact persistence with a JSON run manifest.

#include <cstdint>
#include <optional>
#include <string>

#include "phcd/analytic_inverter.hpp"
#include "phcd/bulk_solver.hpp"
#include "phcd/ga_optimizer.hpp"
#include "phcd/lattice.hpp"
#include "phcd/planar_solver.hpp"

namespace phcd {

enum class Command { Bands, Invert2d, PlanarScan, GaOpt };

struct SolverSection {
    int n_g = 61;
    int division = 8;       // Monkhorst-Pack division (n_q = division^2)
    int n_bands = 2;        // bands carried by the variational problem
    int path_resolution = 24;
    Polarization polarization = Polarization::TE;
};

struct ObjectiveSection {
    double beta_I = 1.0;
    double beta_V = 1.0;
    std::optional<double> omega_m; // empty: midgap
    int weight_budget = 12;        // variational solves in the weight search
    double domain_side = 10.0;
    double svd_tol = 1e-8;
    int inversion_bands = 0;       // 0: full plane-wave count
    EigenSelector selector = EigenSelector::SmallestEigenvalue;
};

struct SlabSection {
    double thickness = 0.75;
    int layers = 8;
    int mesh = 12;
    double padding = 5.0;
    Incidence incidence = Incidence::Edge;
    double scan_min = 0.0; // 0: derived from the 2D gap
    double scan_max = 0.0;
    int scan_points = 33;
    double cavity_major = -1.0; // central-hole override; < 0: nominal
    double cavity_minor = -1.0; // 0 fills the hole
};

struct GaSection {
    int population = 10;
    double mutation_rate = 0.15;
    double crossover_rate = 0.85;
    double sigma = 0.02;
    int budget = 5;
    std::uint64_t seed = 1;
    std::string resume; // checkpoint path, empty for a fresh run
};

struct RunConfig {
    Command command = Command::Bands;
    LatticeSpec lattice;
    SolverSection solver;
    ObjectiveSection objective;
    SlabSection slab;
    GaSection ga;
    std::string output_directory = "out";
    std::optional<std::uint64_t> seed_override;
    int verbosity = 0;
    std::string raw_text; // echoed into the manifest
};

/// Parses the sectioned key = value format.  Collects every problem (unknown
/// keys with an edit-distance suggestion, bad values, range violations) and
/// throws a single ConfigError listing all of them.
RunConfig parse_config(const std::string& text);

/// Executes the configured command, writing artifacts and manifest.json into
/// the output directory.  Exceptions propagate to the caller.
void run(const RunConfig& config);

/// Exit code for a failed run: 2 config, 3 solver, 4 no in-gap mode, 5 I/O.
int exit_code_for(const std::exception& e);

/// Edit distance used for key suggestions.
int levenshtein(const std::string& a, const std::string& b);

/// FNV-1a 64-bit content hash, lowercase hex.
std::string fnv1a64_hex(const std::string& bytes);

} // namespace phcd

#endif
