#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "phcd/cli.hpp"

namespace {

void apply_thread_env() {
    const char* v = std::getenv("PHCD_THREADS");
    if (!v || !*v)
        return;
    // BLAS backends read their own variables; propagate before first use.
    setenv("OMP_NUM_THREADS", v, 0);
    setenv("OPENBLAS_NUM_THREADS", v, 0);
}

} // namespace

int main(int argc, char** argv) {
    apply_thread_env();

    CLI::App app{"photonic crystal cavity design pipelines"};
    std::string config_path;
    std::string output_dir;
    int seed = -1;
    int verbosity = 0;
    app.add_option("-c,--config", config_path, "configuration file")
        ->required();
    app.add_option("-o,--output", output_dir,
                   "output directory (overrides [output] directory)");
    app.add_option("-s,--seed", seed, "seed override (overrides [run] seed)");
    app.add_flag("-v,--verbose", verbosity, "increase verbosity");
    CLI11_PARSE(app, argc, argv);

    std::string text;
    {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) {
            std::fprintf(stderr, "error (io): cannot read config file %s\n",
                         config_path.c_str());
            return 5;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }

    try {
        phcd::RunConfig cfg = phcd::parse_config(text);
        if (!output_dir.empty())
            cfg.output_directory = output_dir;
        if (seed >= 0)
            cfg.seed_override = static_cast<std::uint64_t>(seed);
        cfg.verbosity = verbosity;
        phcd::run(cfg);
        return 0;
    } catch (const std::exception& e) {
        const int code = phcd::exit_code_for(e);
        const char* category = code == 2   ? "config"
                               : code == 4 ? "no in-gap mode"
                               : code == 5 ? "io"
                                           : "solver";
        std::fprintf(stderr, "error (%s): %s\n", category, e.what());
        if (code == 4)
            std::fprintf(stderr,
                         "hint: widen the gap (larger index contrast) or "
                         "strengthen the defect\n");
        return code;
    }
}
