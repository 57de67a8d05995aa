// SPDX-License-Identifier: Apache-2.0
//
// nfloc: near-field MIMO radar localization toolkit
// ------------------------------------------------------------------------

#include "nfloc/cli.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace nfloc;
using namespace nfloc::cli;

namespace
{
    void write_text(const std::string &path, const std::string &text)
    {
        if (path.empty() || path == "-")
        {
            std::cout << text;
            std::cout.flush();
            return;
        }
        write_file_bytes(path, text);
    }

    int report(int code, const std::string &msg)
    {
        std::cerr << "nfloc: " << msg << '\n';
        return code;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"nfloc: near-field MIMO radar localization toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 1;
    std::optional<std::uint64_t> seed;
    app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
    app.add_option("--seed", seed, "Override the config seed (sweep base_seed, synth noise seed)");

    std::string config, data_path, out, distance_sweep, modes = "exact,constant";
    bool noiseless = false;

    CLI::App *crb = app.add_subcommand("crb", "Cramer-Rao bounds as CSV");
    crb->add_option("config", config, "Scenario config (JSON)")->required();
    crb->add_option("--distance-sweep", distance_sweep, "start:stop:count distances (m) from the Tx centroid");
    crb->add_option("--modes", modes, "Comma-separated amplitude modes")->capture_default_str();
    crb->add_option("--out", out, "Output CSV (default: standard output)");

    CLI::App *synth = app.add_subcommand("synth", "Synthesize received data");
    synth->add_option("config", config, "Scenario config (JSON)")->required();
    synth->add_option("--out", out, "Output data file; a JSON sidecar is written next to it")->required();
    synth->add_flag("--noiseless", noiseless, "Omit the noise term");

    CLI::App *estimate = app.add_subcommand("estimate", "Localize targets in a data file");
    estimate->add_option("data", data_path, "Data file written by synth")->required();
    estimate->add_option("config", config, "Scenario config (JSON)")->required();
    estimate->add_option("--out", out, "Output JSON (default: standard output)");

    CLI::App *sweep = app.add_subcommand("sweep", "Monte Carlo MSE-versus-SNR sweep as CSV");
    sweep->add_option("config", config, "Scenario config (JSON)")->required();
    sweep->add_option("--out", out, "Output CSV (default: standard output)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return exit_config;
    }

    try
    {
        if (crb->parsed())
        {
            const Scenario sc = load_scenario(config);
            CrbOptions opt;
            opt.modes = modes;
            if (!distance_sweep.empty())
                opt.distances = parse_distance_sweep(distance_sweep);
            write_text(out, crb_csv(sc, opt));
        }
        else if (synth->parsed())
        {
            const Scenario sc = load_scenario(config);
            const std::uint64_t noise_seed = seed.value_or(sc.noise.seed);
            const DataContainer c = synth_container(sc, noiseless, noise_seed);
            write_container(out, c);
            write_file_bytes(out + ".json", synth_sidecar(sc, noiseless, noise_seed));
        }
        else if (estimate->parsed())
        {
            const Scenario sc = load_scenario(config);
            const DataContainer d = read_container(data_path);
            write_text(out, estimate_json(sc, d, threads).dump(2) + "\n");
        }
        else if (sweep->parsed())
        {
            const Scenario sc = load_scenario(config);
            const SweepSpec spec = sweep_spec(sc, threads, seed);
            spec.validate();
            if (out.empty() || out == "-")
                run_sweep(spec, std::cout);
            else
            {
                std::ofstream f(out, std::ios::trunc);
                if (!f)
                    throw IoError("cannot open '" + out + "' for writing");
                run_sweep(spec, f);
                if (!f)
                    throw IoError("error writing '" + out + "'");
            }
        }
    }
    catch (const ConfigError &e)
    {
        return report(exit_config, e.what());
    }
    catch (const IoError &e)
    {
        return report(exit_io, e.what());
    }
    catch (const NumericalError &e)
    {
        return report(exit_numerical, e.what());
    }
    catch (const std::invalid_argument &e)
    {
        return report(exit_config, e.what());
    }
    catch (const std::exception &e)
    {
        return report(1, e.what());
    }
    return exit_ok;
}
