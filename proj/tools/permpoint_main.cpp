// Command-line front end: teacher setup, merge-path construction, equal-loss
// exchanges, hyperplane probes, count tables, and width sweeps.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric divergence,
// 4 I/O or format error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "permpoint/checkpoint.hpp"
#include "permpoint/counting.hpp"
#include "permpoint/errors.hpp"
#include "permpoint/experiments.hpp"

namespace {

using namespace permpoint;

struct CommonFlags {
    std::string config_path;
    std::string task = "";
    std::vector<std::size_t> widths;
    std::string activation = "";
    std::string loss = "";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t n_samples = 0;
    std::string output_dir = "";
    std::string images, labels, downsample = "";
    std::size_t limit = 0;
    std::size_t delta_steps = 0;
    std::size_t pair_layer = 0;
    bool pair_layer_set = false;
    long long pair_base = -1, pair_offset = -1;
    bool save_samples = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file; flags override");
    cmd->add_option("--task", flags.task, "toy-fig1 | teacher-student | mnist-regression");
    cmd->add_option("--widths", flags.widths, "layer widths n_0..n_d")->delimiter(',');
    cmd->add_option("--activation", flags.activation, "relu | tanh | softplus");
    cmd->add_option("--loss", flags.loss, "mse | normalized_mse");
    cmd->add_option("--seed", flags.seed, "PRNG seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--samples", flags.n_samples, "synthetic sample count");
    cmd->add_option("--out", flags.output_dir, "output directory");
    cmd->add_option("--images", flags.images, "IDX image file");
    cmd->add_option("--labels", flags.labels, "IDX label file");
    cmd->add_option("--downsample", flags.downsample, "none | 2x | 4x");
    cmd->add_option("--limit", flags.limit, "sample limit for IDX data");
    cmd->add_option("--delta-steps", flags.delta_steps, "log-spaced distance steps");
    cmd->add_option("--pair-layer", flags.pair_layer, "hidden layer of the merge pair")
        ->each([&](const std::string&) { flags.pair_layer_set = true; });
    cmd->add_option("--pair-base", flags.pair_base, "explicit base neuron l");
    cmd->add_option("--pair-offset", flags.pair_offset, "explicit offset neuron m");
    cmd->add_flag("--save-samples", flags.save_samples,
                  "write a JSON checkpoint per path sample");
}

ExperimentConfig resolve_config(const CommonFlags& flags) {
    ExperimentConfig config;
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw IoError("cannot read config " + flags.config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        config = ExperimentConfig::from_json(buf.str());
    }
    if (!flags.task.empty()) config.task = task_from_string(flags.task);
    if (!flags.widths.empty()) config.widths = flags.widths;
    if (!flags.activation.empty())
        config.activation = activation_from_string(flags.activation);
    if (!flags.loss.empty()) config.loss_kind = loss_kind_from_string(flags.loss);
    if (flags.seed_set) config.seed = flags.seed;
    if (flags.n_samples > 0) config.n_samples = flags.n_samples;
    if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
    if (!flags.images.empty()) config.images_path = flags.images;
    if (!flags.labels.empty()) config.labels_path = flags.labels;
    if (!flags.downsample.empty())
        config.downsample = downsample_from_string(flags.downsample);
    if (flags.limit > 0) config.sample_limit = flags.limit;
    if (flags.delta_steps > 0) config.merge.n_delta_steps = flags.delta_steps;
    if (flags.pair_layer_set) config.pair.layer = flags.pair_layer;
    if (flags.save_samples) config.save_sample_checkpoints = true;
    if (flags.pair_base >= 0 && flags.pair_offset >= 0) {
        config.pair.explicit_pair = true;
        config.pair.base = static_cast<std::size_t>(flags.pair_base);
        config.pair.offset = static_cast<std::size_t>(flags.pair_offset);
    }
    config.validate();
    return config;
}

int run(int argc, char** argv) {
    CLI::App app{"permutation-point experiments on multilayer perceptrons"};
    app.require_subcommand(1);

    CommonFlags teacher_flags;
    CLI::App* teacher = app.add_subcommand("teacher", "set up and save a teacher network");
    add_common_flags(teacher, teacher_flags);

    CommonFlags path_flags;
    CLI::App* merge = app.add_subcommand("merge-path", "construct a full permutation path");
    add_common_flags(merge, path_flags);

    CommonFlags exchange_flags;
    std::size_t exchange_target = 0;
    bool exchange_cycle = false;
    std::string exchange_checkpoint;
    CLI::App* exchange =
        app.add_subcommand("exchange", "equal-loss index exchange at a merged point");
    add_common_flags(exchange, exchange_flags);
    exchange->add_option("--target-i", exchange_target, "neuron index to exchange with")
        ->required();
    exchange->add_flag("--cycle", exchange_cycle, "compose a three-cycle");
    exchange->add_option("--checkpoint", exchange_checkpoint,
                         "merged-point checkpoint (default: run merge-path first)");

    CommonFlags probe_flags;
    std::size_t probe_order = 1;
    std::size_t probe_count = 20;
    double probe_radius = 0.5;
    CLI::App* probe = app.add_subcommand("probe", "probe the equal-loss hyperplane");
    add_common_flags(probe, probe_flags);
    probe->add_option("--order-k", probe_order, "merge order K");
    probe->add_option("--probes", probe_count, "number of random probes");
    probe->add_option("--radius", probe_radius, "coefficient radius");

    unsigned count_max_n = 8, count_max_k = 4;
    std::string count_out = "counts.csv";
    CLI::App* count = app.add_subcommand("count", "exact count tables");
    count->add_option("--max-n", count_max_n, "largest layer width");
    count->add_option("--max-k", count_max_k, "largest merge order");
    count->add_option("--out", count_out, "output CSV path");

    CommonFlags sweep_flags;
    std::vector<std::size_t> sweep_widths{4, 8, 12};
    std::size_t sweep_seeds = 3;
    CLI::App* sweep = app.add_subcommand("sweep", "plateau loss across hidden widths");
    add_common_flags(sweep, sweep_flags);
    sweep->add_option("--sweep-widths", sweep_widths, "hidden widths to sweep")
        ->delimiter(',');
    sweep->add_option("--seeds", sweep_seeds, "seeds per width");

    CLI11_PARSE(app, argc, argv);

    if (teacher->parsed()) {
        ExperimentConfig config = resolve_config(teacher_flags);
        PreparedTask prepared = train_teacher(config);
        std::filesystem::create_directories(config.output_dir);
        write_run_json(config, config.output_dir, "teacher");
        save_checkpoint(prepared.teacher, config.output_dir / "teacher.json",
                        {config.seed, "teacher"});
        std::cout << "teacher written to " << (config.output_dir / "teacher.json")
                  << " (loss " << prepared.teacher_training.final_loss << ")\n";
    } else if (merge->parsed()) {
        ExperimentConfig config = resolve_config(path_flags);
        MergePathRun result = run_merge_path(config);
        std::cout << "pair (" << result.pair_layer << "," << result.pair_base << ","
                  << result.pair_offset << ")  samples "
                  << result.full_path.samples.size() << "  plateau loss "
                  << result.full_path.max_loss() << "  endpoint grad "
                  << result.endpoint_report.grad_norm << "  violations "
                  << result.properties.violations.size() << "\n";
    } else if (exchange->parsed()) {
        ExperimentConfig config = resolve_config(exchange_flags);
        NetworkParams at_pp;
        Dataset data;
        if (!exchange_checkpoint.empty()) {
            at_pp = load_checkpoint(exchange_checkpoint).net;
            PreparedTask prepared = train_teacher(config);
            data = std::move(prepared.data);
        } else {
            MergePathRun path_run = run_merge_path(config, false);
            PreparedTask prepared = train_teacher(config);
            data = std::move(prepared.data);
            // Continue from the constructed merged point.
            std::size_t mid = path_run.full_path.samples.size() / 2;
            at_pp = path_run.full_path.samples[mid].params;
            config.pair.layer = path_run.pair_layer;
            config.pair.base = path_run.pair_base;
            config.pair.offset = path_run.pair_offset;
        }
        ExchangeDemoResult result =
            run_exchange_demo(config, at_pp, data, exchange_target, exchange_cycle);
        std::cout << "exchange loss drift " << result.first.max_rel_loss_dev
                  << " (relative); final loss " << result.final_loss << "\n";
    } else if (probe->parsed()) {
        ExperimentConfig config = resolve_config(probe_flags);
        ProbeReport report = run_probe(config, probe_order, probe_count, probe_radius);
        std::cout << "probes " << report.n_probes << "  max deviation "
                  << report.max_rel_loss_dev << "  control deviation "
                  << report.control_deviation << "\n";
    } else if (count->parsed()) {
        run_count_tables(count_max_n, count_max_k, count_out);
        std::cout << "count table written to " << count_out << "\n";
    } else if (sweep->parsed()) {
        ExperimentConfig config = resolve_config(sweep_flags);
        std::vector<std::uint64_t> seeds;
        for (std::size_t s = 0; s < sweep_seeds; ++s)
            seeds.push_back(config.seed + s);
        auto rows = run_width_sweep(config, sweep_widths, seeds);
        for (const SweepRow& r : rows)
            std::cout << "H=" << r.width << " seed=" << r.seed << " plateau="
                      << r.plateau_loss << " mean=" << r.mean_for_width << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const permpoint::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const permpoint::DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const permpoint::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const permpoint::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 4;
    } catch (const permpoint::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const permpoint::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
