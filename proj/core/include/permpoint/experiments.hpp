#pragma once

// Experiment orchestration shared by the CLI: resolved configurations,
// teacher setup, merge-path runs, the width sweep, exchange and hyperplane
// demos, and count tables. Every run directory gets a run.json with the
// fully resolved configuration so results can be reproduced bit-exactly.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "permpoint/idx.hpp"
#include "permpoint/network.hpp"
#include "permpoint/pathfinder.hpp"
#include "permpoint/plateau.hpp"

namespace permpoint {

enum class Task { toy_fig1, teacher_student, mnist_regression };

Task task_from_string(const std::string& name);
std::string to_string(Task task);

struct PairSelection {
    bool explicit_pair = false;  // otherwise: highest cosine similarity
    std::size_t layer = 0;
    std::size_t base = 0;
    std::size_t offset = 1;
};

struct ExperimentConfig {
    Task task = Task::toy_fig1;
    std::vector<std::size_t> widths;  // full n_0..n_d; empty = task default
    Activation activation = Activation::relu;
    std::uint64_t seed = 1;
    LossKind loss_kind = LossKind::mse;
    std::size_t n_samples = 1000;  // synthetic tasks
    MergeSettings merge;
    PairSelection pair;
    // mnist-regression inputs
    std::string images_path;
    std::string labels_path;
    Downsample downsample = Downsample::x4;
    std::size_t sample_limit = 2000;
    // teacher pre-training budget (mnist)
    std::size_t teacher_max_iters = 2000;
    bool save_sample_checkpoints = false;  // sidecar JSON per path sample
    std::filesystem::path output_dir = ".";

    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    void validate() const;
    std::vector<std::size_t> resolved_widths() const;
};

// Ready-to-run task: the teacher parameters and the relabeled dataset
// (targets are the teacher's outputs).
struct PreparedTask {
    NetworkParams teacher;
    Dataset data;
    GdResult teacher_training;  // trivial for synthetic tasks
};

// Samples (synthetic tasks) or trains (mnist) the teacher, then relabels
// the dataset targets with the teacher's outputs.
PreparedTask train_teacher(const ExperimentConfig& config);

void write_run_json(const ExperimentConfig& config, const std::filesystem::path& dir,
                    const std::string& command);

struct MergePathRun {
    PathTrace full_path;
    PathPropertyReport properties;
    CriticalityReport endpoint_report;
    std::size_t pair_layer = 0, pair_base = 0, pair_offset = 0;
    std::vector<double> accuracy;  // per sample; empty without labels
};

// End-to-end path construction: merge descent, output equalization, mirror
// assembly, property verification, endpoint analysis. Writes trace.csv,
// endpoint.json, spectrum.json, run.json and (for 2-d inputs) vectors.json
// into the run directory when `write_outputs` is set.
MergePathRun run_merge_path(const ExperimentConfig& config, bool write_outputs = true);

struct SweepRow {
    std::size_t width = 0;
    std::uint64_t seed = 0;
    double plateau_loss = 0.0;
    double mean_for_width = 0.0;  // filled per width after all seeds ran
};

// Trains one teacher per (width, seed) cell and records the maximum loss
// along the constructed path. Returns |widths| * |seeds| rows; writes
// sweep.csv when an output directory is configured.
std::vector<SweepRow> run_width_sweep(const ExperimentConfig& base,
                                      const std::vector<std::size_t>& hidden_widths,
                                      const std::vector<std::uint64_t>& seeds,
                                      bool write_outputs = true);

// Exchange demo at an existing merged configuration; optionally composes a
// three-cycle. Writes exchange.json.
struct ExchangeDemoResult {
    ExchangePath first;
    std::optional<ExchangePath> second;  // set when a cycle was requested
    double final_loss = 0.0;
};
ExchangeDemoResult run_exchange_demo(const ExperimentConfig& config,
                                     const NetworkParams& net_at_pp,
                                     const Dataset& data, std::size_t target,
                                     bool cycle, bool write_outputs = true);

// CSV of exact ratios, lower bounds and asymptotic limits over a grid:
// K,n,ratio_exact_num,ratio_exact_den,lower_bound_num,lower_bound_den,limit_float
std::string count_table_csv(unsigned max_n, unsigned max_k);
void run_count_tables(unsigned max_n, unsigned max_k, const std::filesystem::path& out);

// Hyperplane probe demo: reduces the prepared task's teacher by K neurons,
// trains the small net to a minimum, rebuilds the merged configuration and
// probes its equal-loss hyperplane. Writes probe.json.
ProbeReport run_probe(const ExperimentConfig& config, std::size_t order_K,
                      std::size_t n_probes, double radius, bool write_outputs = true);

// Fraction of samples whose argmax output matches the label.
double argmax_accuracy(const NetworkParams& net, const Dataset& data);

}  // namespace permpoint
