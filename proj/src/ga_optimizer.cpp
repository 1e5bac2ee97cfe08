#include "phcd/ga_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace phcd {

namespace {

bool is_axis_gene(int gene) { return gene % 4 >= 2; }

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

const std::vector<GIndex>& genome_sites() {
    static const std::vector<GIndex> sites = {
        {0, 0},  {1, 0},  {0, 1},  {-1, 1}, {-1, 0}, {0, -1}, {1, -1},
        {2, 0},  {-2, 0}, {3, 0},  {-3, 0}, {4, 0},  {-4, 0}};
    return sites;
}

SlabGenome clamp_genome(SlabGenome g, const GenomeBounds& b) {
    for (int i = 0; i < kGenomeSize; ++i)
        g.genes[i] = is_axis_gene(i)
                         ? std::clamp(g.genes[i], b.axis_min, b.axis_max)
                         : std::clamp(g.genes[i], -b.offset_max, b.offset_max);
    return g;
}

SlabGenome nominal_genome(const LatticeSpec& lattice) {
    SlabGenome g;
    for (int s = 0; s < kGenomeSites; ++s) {
        g.genes[4 * s + 0] = 0.0;
        g.genes[4 * s + 1] = 0.0;
        g.genes[4 * s + 2] = lattice.hole_radius;
        g.genes[4 * s + 3] = lattice.hole_radius;
    }
    return g;
}

std::vector<HoleOverride> decode_genome(const SlabGenome& genome,
                                        const SlabSpec& base,
                                        const GenomeBounds& bounds) {
    const SlabGenome g = clamp_genome(genome, bounds);
    const std::vector<GIndex>& sites = genome_sites();
    std::vector<HoleOverride> overrides(sites.size());
    for (std::size_t s = 0; s < sites.size(); ++s) {
        overrides[s].m1 = sites[s].m1;
        overrides[s].m2 = sites[s].m2;
        overrides[s].center_x = g.genes[4 * s + 0];
        overrides[s].center_y = g.genes[4 * s + 1];
        overrides[s].major = g.genes[4 * s + 2];
        overrides[s].minor = g.genes[4 * s + 3];
    }

    // Repair: shrink conflicting axes until every pair of holes (bounding
    // circles) keeps clearance 0.02a.  Nominal lattice holes never shrink.
    const double clearance = 0.02;
    const double axis_floor = 0.01;
    auto radius = [](const HoleOverride& o) {
        return std::max(o.major, o.minor);
    };
    auto center = [](const HoleOverride& o) {
        const Vec2 p = site_position({o.m1, o.m2});
        return Vec2(p.x() + o.center_x, p.y() + o.center_y);
    };
    auto shrink_to = [&](HoleOverride& o, double r) {
        const double s = std::max(r, axis_floor) / radius(o);
        if (s < 1.0) {
            o.major = std::max(o.major * s, axis_floor);
            o.minor = std::max(o.minor * s, axis_floor);
        }
    };

    std::vector<std::pair<Vec2, double>> nominal; // untouched neighbors
    if (base.layers >= 0)
        for (const GIndex& site : lattice_sites(base.layers)) {
            bool optimized = false;
            for (const GIndex& s : sites)
                if (s.m1 == site.m1 && s.m2 == site.m2)
                    optimized = true;
            if (!optimized)
                nominal.emplace_back(site_position(site),
                                     base.lattice.hole_radius);
        }

    for (int pass = 0; pass < 20; ++pass) {
        bool changed = false;
        for (std::size_t i = 0; i < overrides.size(); ++i) {
            for (std::size_t j = i + 1; j < overrides.size(); ++j) {
                const double d =
                    (center(overrides[i]) - center(overrides[j])).norm();
                const double need =
                    radius(overrides[i]) + radius(overrides[j]) + clearance;
                if (d >= need)
                    continue;
                const double scale =
                    std::max(d - clearance, 2.0 * axis_floor) / (need - clearance);
                shrink_to(overrides[i], radius(overrides[i]) * scale);
                shrink_to(overrides[j], radius(overrides[j]) * scale);
                changed = true;
            }
            for (const auto& [p, r] : nominal) {
                const double d = (center(overrides[i]) - p).norm();
                const double room = d - r - clearance;
                if (radius(overrides[i]) > room)
                    shrink_to(overrides[i], room), changed = true;
            }
        }
        if (!changed)
            break;
    }
    return overrides;
}

void GaConfig::validate() const {
    if (population < 2)
        throw ConfigError("GA population must be >= 2");
    if (mutation_rate < 0.0 || mutation_rate > 1.0 || crossover_rate < 0.0 ||
        crossover_rate > 1.0)
        throw ConfigError("GA rates must lie in [0, 1]");
    if (mutation_sigma <= 0.0)
        throw ConfigError("mutation sigma must be positive");
    if (budget < 0)
        throw ConfigError("GA budget must be >= 0");
}

std::string GenerationLog::to_csv() const {
    std::string s = "generation,best_fitness,mean_fitness,wall_seconds";
    for (int i = 0; i < kGenomeSize; ++i)
        s += ",g" + std::to_string(i);
    s += "\n";
    char buf[128];
    for (const GenerationRecord& r : records) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g", r.generation,
                      r.best_fitness, r.mean_fitness, r.wall_seconds);
        s += buf;
        for (double g : r.best.genes) {
            std::snprintf(buf, sizeof buf, ",%.17g", g);
            s += buf;
        }
        s += "\n";
    }
    return s;
}

int best_index(const GaState& state) {
    return static_cast<int>(
        std::max_element(state.fitness.begin(), state.fitness.end()) -
        state.fitness.begin());
}

namespace {

void append_record(GaState& state, double t0) {
    const int b = best_index(state);
    GenerationRecord rec;
    rec.generation = state.generation;
    rec.best_fitness = state.fitness[b];
    rec.mean_fitness = 0.0;
    for (double f : state.fitness)
        rec.mean_fitness += f;
    rec.mean_fitness /= state.fitness.size();
    rec.best = state.population[b];
    rec.wall_seconds = now_seconds() - t0;
    state.log.records.push_back(rec);
    std::printf("generation %d best %.8g mean %.8g\n", rec.generation,
                rec.best_fitness, rec.mean_fitness);
    std::fflush(stdout);
}

} // namespace

GaState init_ga(const GaConfig& config, const FitnessFn& fn,
                const std::vector<SlabGenome>& initial) {
    config.validate();
    GaState state;
    state.config = config;
    state.rng.seed(config.seed);

    if (!initial.empty()) {
        if (static_cast<int>(initial.size()) != config.population)
            throw ConfigError("initial population size mismatch");
        state.population = initial;
        for (SlabGenome& g : state.population)
            g = clamp_genome(g, config.bounds);
    } else {
        std::uniform_real_distribution<double> axis(config.bounds.axis_min,
                                                    config.bounds.axis_max);
        std::uniform_real_distribution<double> off(-config.bounds.offset_max,
                                                   config.bounds.offset_max);
        state.population.resize(config.population);
        for (SlabGenome& g : state.population)
            for (int i = 0; i < kGenomeSize; ++i)
                g.genes[i] = is_axis_gene(i) ? axis(state.rng) : off(state.rng);
    }

    state.fitness.resize(config.population);
    for (int i = 0; i < config.population; ++i)
        state.fitness[i] = fn(state.population[i]);
    const double t0 = now_seconds();
    append_record(state, t0);
    return state;
}

void evolve(GaState& state, const FitnessFn& fn, int generations) {
    const GaConfig& cfg = state.config;
    const int pop = cfg.population;
    std::uniform_int_distribution<int> pick(0, pop - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, cfg.mutation_sigma);
    const double t0 = now_seconds();

    auto tournament = [&]() {
        const int a = pick(state.rng);
        const int b = pick(state.rng);
        return state.fitness[a] >= state.fitness[b] ? a : b;
    };

    for (int gen = 0; gen < generations; ++gen) {
        // Drop the distribution's cached second variate so the random stream
        // depends only on state.rng at the generation boundary; a run resumed
        // from a checkpoint then reproduces an uninterrupted one exactly.
        gauss.reset();
        for (int step = 0; step < pop; ++step) {
            const int p1 = tournament();
            const int p2 = tournament();
            SlabGenome child = state.population[p1];
            if (unit(state.rng) < cfg.crossover_rate)
                for (int i = 0; i < kGenomeSize; ++i)
                    if (unit(state.rng) < 0.5)
                        child.genes[i] = state.population[p2].genes[i];
            for (int i = 0; i < kGenomeSize; ++i)
                if (unit(state.rng) < cfg.mutation_rate)
                    child.genes[i] += gauss(state.rng);
            child = clamp_genome(child, cfg.bounds);

            const double f = fn(child);
            const int worst = static_cast<int>(
                std::min_element(state.fitness.begin(), state.fitness.end()) -
                state.fitness.begin());
            // Elitist: when everyone ties (worst == best), only an equal or
            // better child may enter.
            if (worst != best_index(state) || f >= state.fitness[worst]) {
                state.population[worst] = child;
                state.fitness[worst] = f;
            }
        }
        ++state.generation;
        append_record(state, t0);
    }
}

GaResult run_ga(const GaConfig& config, const FitnessFn& fn,
                const std::vector<SlabGenome>& initial) {
    GaState state = init_ga(config, fn, initial);
    evolve(state, fn, config.budget);
    GaResult out;
    const int b = best_index(state);
    out.best = state.population[b];
    out.best_fitness = state.fitness[b];
    out.log = std::move(state.log);
    return out;
}

// -------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'P', 'H', 'G', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T> void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T> void get(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
}
void put_string(std::ostream& out, const std::string& s) {
    put(out, static_cast<std::uint64_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::istream& in) {
    std::uint64_t n = 0;
    get(in, n);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

} // namespace

void save_checkpoint(const GaState& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw SolverError("cannot open checkpoint " + path + " for writing");
    out.write(kMagic, sizeof kMagic);
    put(out, kVersion);
    put(out, state.config.population);
    put(out, state.config.mutation_rate);
    put(out, state.config.crossover_rate);
    put(out, state.config.mutation_sigma);
    put(out, state.config.seed);
    put(out, state.config.budget);
    put(out, state.config.bounds.axis_min);
    put(out, state.config.bounds.axis_max);
    put(out, state.config.bounds.offset_max);
    put(out, state.generation);
    put(out, static_cast<std::uint64_t>(state.population.size()));
    for (const SlabGenome& g : state.population)
        out.write(reinterpret_cast<const char*>(g.genes.data()),
                  sizeof g.genes);
    for (double f : state.fitness)
        put(out, f);
    std::ostringstream rng;
    rng << state.rng;
    put_string(out, rng.str());
    put(out, static_cast<std::uint64_t>(state.log.records.size()));
    for (const GenerationRecord& r : state.log.records) {
        put(out, r.generation);
        put(out, r.best_fitness);
        put(out, r.mean_fitness);
        out.write(reinterpret_cast<const char*>(r.best.genes.data()),
                  sizeof r.best.genes);
        put(out, r.wall_seconds);
    }
    if (!out)
        throw SolverError("short write to checkpoint " + path);
}

GaState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw SolverError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kMagic))
        throw ConfigError("not a GA checkpoint: " + path);
    std::uint32_t version = 0;
    get(in, version);
    if (version != kVersion)
        throw ConfigError("incompatible checkpoint version " +
                          std::to_string(version));
    GaState state;
    get(in, state.config.population);
    get(in, state.config.mutation_rate);
    get(in, state.config.crossover_rate);
    get(in, state.config.mutation_sigma);
    get(in, state.config.seed);
    get(in, state.config.budget);
    get(in, state.config.bounds.axis_min);
    get(in, state.config.bounds.axis_max);
    get(in, state.config.bounds.offset_max);
    get(in, state.generation);
    std::uint64_t pop = 0;
    get(in, pop);
    state.population.resize(pop);
    for (SlabGenome& g : state.population)
        in.read(reinterpret_cast<char*>(g.genes.data()), sizeof g.genes);
    state.fitness.resize(pop);
    for (double& f : state.fitness)
        get(in, f);
    std::istringstream rng(get_string(in));
    rng >> state.rng;
    std::uint64_t nrec = 0;
    get(in, nrec);
    state.log.records.resize(nrec);
    for (GenerationRecord& r : state.log.records) {
        get(in, r.generation);
        get(in, r.best_fitness);
        get(in, r.mean_fitness);
        in.read(reinterpret_cast<char*>(r.best.genes.data()),
                sizeof r.best.genes);
        get(in, r.wall_seconds);
    }
    if (!in)
        throw ConfigError("truncated checkpoint " + path);
    return state;
}

// ---------------------------------------------------------- planar fitness

double planar_fitness(const SlabGenome& genome,
                      const PlanarFitnessConfig& cfg) {
    try {
        SlabSpec spec = cfg.base;
        spec.holes = decode_genome(genome, cfg.base, GenomeBounds{});

        const ReflectionSpectrum sp =
            scan_reflection(spec, cfg.scan_range, cfg.scan_points, cfg.sim);
        const std::vector<Resonance> res = find_resonances(sp);
        if (res.empty()) {
            std::fprintf(stderr, "fitness: no in-gap resonance, sentinel\n");
            return kFailedFitness;
        }
        const Resonance& r = *std::max_element(
            res.begin(), res.end(),
            [](const Resonance& a, const Resonance& b) {
                return a.depth < b.depth;
            });

        SimulateOptions sim = cfg.sim;
        sim.want_field = true;
        const SimResult field_run = simulate(spec, r.omega0, sim);
        const FieldGrid3D& fg = *field_run.field;

        Region3D region{0, fg.nx - 1, 0, fg.ny - 1, 0, fg.nz - 1};
        if (cfg.interior_halfwidth > 0.0) {
            auto clip = [&](int n, auto coord, int& i0, int& i1) {
                i0 = 0;
                i1 = n - 1;
                while (i0 + 1 < i1 && coord(i0 + 1) < -cfg.interior_halfwidth)
                    ++i0;
                while (i1 - 1 > i0 && coord(i1 - 1) > cfg.interior_halfwidth)
                    --i1;
            };
            clip(fg.nx, [&](int i) { return fg.x_of(i); }, region.ix0,
                 region.ix1);
            clip(fg.ny, [&](int i) { return fg.y_of(i); }, region.iy0,
                 region.iy1);
        }
        const double volume = mode_volume_3d(fg, region);

        auto nearest = [](double v, double lo, double hi, int n) {
            const double t = (v - lo) / (hi - lo);
            return std::clamp(static_cast<int>(std::lround(t * (n - 1))), 0,
                              n - 1);
        };
        const complexd center =
            fg.at(nearest(0.0, fg.x0, fg.x1, fg.nx),
                  nearest(0.0, fg.y0, fg.y1, fg.ny),
                  nearest(0.0, fg.z0, fg.z1, fg.nz));
        const double intensity =
            fg.max_abs > 0.0 ? std::norm(center) / (fg.max_abs * fg.max_abs)
                             : 0.0;

        return r.q + cfg.weights.beta_I * intensity -
               cfg.weights.beta_V * volume;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fitness: simulation failed (%s), sentinel\n",
                     e.what());
        return kFailedFitness;
    }
}

} // namespace phcd
