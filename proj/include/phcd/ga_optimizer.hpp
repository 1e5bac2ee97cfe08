#ifndef PHCD_GA_OPTIMIZER_HPP
#define PHCD_GA_OPTIMIZER_HPP

// Steady-state genetic algorithm over the 52-parameter planar hole
// geometry: 13 sites x {center_x, center_y, major, minor}.

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "phcd/objective.hpp"
#include "phcd/planar_solver.hpp"

namespace phcd {

inline constexpr int kGenomeSites = 13;
inline constexpr int kGenomeSize = 4 * kGenomeSites;
inline constexpr double kFailedFitness = -1e9;

/// Gene layout per site: center_x, center_y, major, minor.
struct SlabGenome {
    std::array<double, kGenomeSize> genes{};

    bool operator==(const SlabGenome&) const = default;
};

/// The optimized sites: cavity, its six nearest neighbors, and the x-axis
/// sites (+-2, 0), (+-3, 0), (+-4, 0).
const std::vector<GIndex>& genome_sites();

struct GenomeBounds {
    double axis_min = 0.05, axis_max = 0.45;
    double offset_max = 0.25;
};

SlabGenome clamp_genome(SlabGenome g, const GenomeBounds& b = {});

/// Genome whose holes coincide with the nominal bulk lattice.
SlabGenome nominal_genome(const LatticeSpec& lattice);

/// Hole overrides for the genome sites, clamped to bounds and repaired so no
/// two holes overlap: offending axes shrink until clearance 0.02a.
std::vector<HoleOverride> decode_genome(const SlabGenome& g,
                                        const SlabSpec& base,
                                        const GenomeBounds& b = {});

struct GaConfig {
    int population = 10;
    double mutation_rate = 0.15;  // per gene
    double crossover_rate = 0.85;
    double mutation_sigma = 0.02; // units of a
    std::uint64_t seed = 0;
    int budget = 0; // generations; one generation = population offspring
    GenomeBounds bounds;

    void validate() const;
};

struct GenerationRecord {
    int generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    SlabGenome best;
    double wall_seconds = 0.0;
};

struct GenerationLog {
    std::vector<GenerationRecord> records;
    std::string to_csv() const;
};

using FitnessFn = std::function<double(const SlabGenome&)>;

/// Full GA state; round-trips through checkpoints bit-exactly.
struct GaState {
    GaConfig config;
    std::vector<SlabGenome> population;
    std::vector<double> fitness;
    int generation = 0;
    std::mt19937_64 rng;
    GenerationLog log;
};

/// Random population (uniform within bounds) unless `initial` is given;
/// evaluates everyone and logs generation 0.
GaState init_ga(const GaConfig& config, const FitnessFn& fn,
                const std::vector<SlabGenome>& initial = {});

/// Runs `generations` further generations of steady-state evolution:
/// binary-tournament parents, uniform crossover, per-gene Gaussian
/// mutation, offspring replaces the current worst (the best is never
/// replaced).  Deterministic for a fixed seed.
void evolve(GaState& state, const FitnessFn& fn, int generations);

struct GaResult {
    SlabGenome best;
    double best_fitness = 0.0;
    GenerationLog log;
};

/// init + evolve for config.budget generations.
GaResult run_ga(const GaConfig& config, const FitnessFn& fn,
                const std::vector<SlabGenome>& initial = {});

int best_index(const GaState& state);

void save_checkpoint(const GaState& state, const std::string& path);
GaState load_checkpoint(const std::string& path);

/// Planar cavity fitness J = Q + beta_I I - beta_V V.  Failures (no in-gap
/// resonance, solver errors) yield kFailedFitness.
struct PlanarFitnessConfig {
    SlabSpec base;
    std::pair<double, double> scan_range;
    int scan_points = 24;
    CostWeights weights;
    SimulateOptions sim;
    double interior_halfwidth = 0.0; // 0: whole grid
};

double planar_fitness(const SlabGenome& genome,
                      const PlanarFitnessConfig& cfg);

} // namespace phcd

#endif
