#include "permpoint/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "permpoint/checkpoint.hpp"
#include "permpoint/counting.hpp"
#include "permpoint/errors.hpp"

namespace permpoint {

Task task_from_string(const std::string& name) {
    if (name == "toy-fig1") return Task::toy_fig1;
    if (name == "teacher-student") return Task::teacher_student;
    if (name == "mnist-regression") return Task::mnist_regression;
    throw ConfigError("unknown task: " + name);
}

std::string to_string(Task task) {
    switch (task) {
        case Task::toy_fig1: return "toy-fig1";
        case Task::teacher_student: return "teacher-student";
        case Task::mnist_regression: return "mnist-regression";
    }
    return "toy-fig1";
}

namespace {

std::string downsample_to_string(Downsample d) {
    switch (d) {
        case Downsample::none: return "none";
        case Downsample::x2: return "2x";
        case Downsample::x4: return "4x";
    }
    return "none";
}

}  // namespace

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["task"] = permpoint::to_string(task);
    j["widths"] = resolved_widths();
    j["activation"] = permpoint::to_string(activation);
    j["seed"] = seed;
    j["loss"] = permpoint::to_string(loss_kind);
    j["n_samples"] = n_samples;
    j["merge"] = {
        {"n_delta_steps", merge.n_delta_steps},
        {"delta_floor_ratio", merge.delta_floor_ratio},
        {"equalization_steps", merge.equalization_steps},
        {"inner",
         {{"max_iters", merge.inner.max_iters},
          {"grad_tolerance", merge.inner.grad_tolerance},
          {"initial_step", merge.inner.initial_step}}},
    };
    j["pair"] = {{"mode", pair.explicit_pair ? "explicit" : "max-cosine"},
                 {"layer", pair.layer},
                 {"base", pair.base},
                 {"offset", pair.offset}};
    j["mnist"] = {{"images", images_path},
                  {"labels", labels_path},
                  {"downsample", downsample_to_string(downsample)},
                  {"limit", sample_limit},
                  {"teacher_max_iters", teacher_max_iters}};
    j["save_sample_checkpoints"] = save_sample_checkpoints;
    j["output_dir"] = output_dir.string();
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    ExperimentConfig c;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        if (j.contains("task")) c.task = task_from_string(j["task"].get<std::string>());
        if (j.contains("widths")) c.widths = j["widths"].get<std::vector<std::size_t>>();
        if (j.contains("activation"))
            c.activation = activation_from_string(j["activation"].get<std::string>());
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("loss")) c.loss_kind = loss_kind_from_string(j["loss"].get<std::string>());
        if (j.contains("n_samples")) c.n_samples = j["n_samples"].get<std::size_t>();
        if (j.contains("merge")) {
            const auto& m = j["merge"];
            if (m.contains("n_delta_steps"))
                c.merge.n_delta_steps = m["n_delta_steps"].get<std::size_t>();
            if (m.contains("delta_floor_ratio"))
                c.merge.delta_floor_ratio = m["delta_floor_ratio"].get<double>();
            if (m.contains("equalization_steps"))
                c.merge.equalization_steps = m["equalization_steps"].get<std::size_t>();
            if (m.contains("inner")) {
                const auto& inner = m["inner"];
                if (inner.contains("max_iters"))
                    c.merge.inner.max_iters = inner["max_iters"].get<std::size_t>();
                if (inner.contains("grad_tolerance"))
                    c.merge.inner.grad_tolerance = inner["grad_tolerance"].get<double>();
                if (inner.contains("initial_step"))
                    c.merge.inner.initial_step = inner["initial_step"].get<double>();
            }
        }
        if (j.contains("pair")) {
            const auto& p = j["pair"];
            if (p.contains("mode"))
                c.pair.explicit_pair = p["mode"].get<std::string>() == "explicit";
            if (p.contains("layer")) c.pair.layer = p["layer"].get<std::size_t>();
            if (p.contains("base")) c.pair.base = p["base"].get<std::size_t>();
            if (p.contains("offset")) c.pair.offset = p["offset"].get<std::size_t>();
        }
        if (j.contains("mnist")) {
            const auto& m = j["mnist"];
            if (m.contains("images")) c.images_path = m["images"].get<std::string>();
            if (m.contains("labels")) c.labels_path = m["labels"].get<std::string>();
            if (m.contains("downsample"))
                c.downsample = downsample_from_string(m["downsample"].get<std::string>());
            if (m.contains("limit")) c.sample_limit = m["limit"].get<std::size_t>();
            if (m.contains("teacher_max_iters"))
                c.teacher_max_iters = m["teacher_max_iters"].get<std::size_t>();
        }
        if (j.contains("save_sample_checkpoints"))
            c.save_sample_checkpoints = j["save_sample_checkpoints"].get<bool>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config json: ") + e.what());
    }
    return c;
}

std::vector<std::size_t> ExperimentConfig::resolved_widths() const {
    if (!widths.empty()) return widths;
    switch (task) {
        case Task::toy_fig1: return {2, 5, 1};
        case Task::teacher_student: return {2, 8, 1};
        case Task::mnist_regression: {
            std::size_t in = 49;  // 28/4 squared
            if (downsample == Downsample::x2) in = 196;
            if (downsample == Downsample::none) in = 784;
            return {in, 10, 10, 10};
        }
    }
    return {2, 5, 1};
}

void ExperimentConfig::validate() const {
    auto w = resolved_widths();
    if (w.size() < 2) throw ConfigError("widths must list input and output sizes");
    for (std::size_t x : w)
        if (x == 0) throw ConfigError("zero width");
    if (task == Task::mnist_regression && (images_path.empty() || labels_path.empty()))
        throw ConfigError("mnist-regression needs --images and --labels");
    if (pair.explicit_pair && pair.base == pair.offset)
        throw ConfigError("pair base and offset must differ");
}

PreparedTask train_teacher(const ExperimentConfig& config) {
    config.validate();
    PreparedTask prepared;
    Rng rng(config.seed);

    if (config.task == Task::mnist_regression) {
        Dataset raw = load_mnist_pair(config.images_path, config.labels_path,
                                      config.downsample, config.sample_limit);
        std::vector<std::size_t> widths = config.resolved_widths();
        widths.front() = raw.inputs.cols;
        widths.back() = 10;
        NetworkParams init = make_network(widths, config.activation, rng);
        // Pre-train against the one-hot labels, budgeted.
        GdSettings settings;
        settings.max_iters = config.teacher_max_iters;
        prepared.teacher_training = gd_minimize(init, raw, LossKind::mse, {}, settings);
        prepared.teacher = prepared.teacher_training.params;
        prepared.data = std::move(raw);
    } else {
        std::vector<std::size_t> widths = config.resolved_widths();
        prepared.teacher = make_network(widths, config.activation, rng);
        Dataset data;
        data.inputs = DenseMatrix(config.n_samples, widths.front());
        for (double& v : data.inputs.entries) v = rng.normal();
        data.targets = DenseMatrix(config.n_samples, widths.back());
        prepared.data = std::move(data);
        prepared.data.targets = forward_all(prepared.teacher, prepared.data.inputs);
        // The teacher reproduces its own targets; training is a no-op and
        // returns immediately.
        prepared.teacher_training =
            gd_minimize(prepared.teacher, prepared.data, config.loss_kind);
        prepared.teacher = prepared.teacher_training.params;
    }

    // Regression targets are the teacher's outputs from here on.
    prepared.data.targets = forward_all(prepared.teacher, prepared.data.inputs);
    return prepared;
}

void write_run_json(const ExperimentConfig& config, const std::filesystem::path& dir,
                    const std::string& command) {
    std::filesystem::create_directories(dir);
    nlohmann::json j = nlohmann::json::parse(config.to_json());
    j["command"] = command;
    std::ofstream out(dir / "run.json");
    if (!out) throw IoError("cannot write " + (dir / "run.json").string());
    out << j.dump(2) << "\n";
}

double argmax_accuracy(const NetworkParams& net, const Dataset& data) {
    if (data.labels.empty()) throw DomainError("argmax_accuracy: dataset has no labels");
    std::size_t hits = 0;
    for (std::size_t mu = 0; mu < data.size(); ++mu) {
        DenseVector y = forward(net, data.inputs.row(mu));
        std::size_t best = 0;
        for (std::size_t j = 1; j < y.size(); ++j)
            if (y[j] > y[best]) best = j;
        if (static_cast<int>(best) == data.labels[mu]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace {

void write_layer_vectors_json(const NetworkParams& net, nlohmann::json& out) {
    const Layer& first = net.layers.front();
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < first.weights.rows; ++i) {
        nlohmann::json r;
        std::vector<double> w(first.weights.cols);
        for (std::size_t c = 0; c < first.weights.cols; ++c) w[c] = first.weights.at(i, c);
        r["w"] = w;
        r["b"] = first.bias[i];
        rows.push_back(std::move(r));
    }
    out = std::move(rows);
}

}  // namespace

MergePathRun run_merge_path(const ExperimentConfig& config, bool write_outputs) {
    PreparedTask prepared = train_teacher(config);
    const NetworkParams& student0 = prepared.teacher;  // student starts at theta*

    MergePathRun run;
    run.pair_layer = config.pair.layer;
    if (config.pair.explicit_pair) {
        run.pair_base = config.pair.base;
        run.pair_offset = config.pair.offset;
    } else {
        auto best = pick_max_cosine_pair(student0, config.pair.layer);
        run.pair_base = best.first;
        run.pair_offset = best.second;
    }

    PathTrace first_half =
        merge_descent(student0, prepared.data, config.loss_kind, run.pair_layer,
                      run.pair_base, run.pair_offset, config.merge);
    PathTrace equalized = equalize_outputs(
        first_half.back().params, prepared.data, config.loss_kind, run.pair_layer,
        run.pair_base, run.pair_offset, config.merge.equalization_steps);
    append_segment(first_half, equalized);
    NetworkParams at_pp = first_half.back().params;
    run.full_path = assemble_full_path(first_half);

    VerifySettings verify;
    verify.check_spectra = parameter_count(student0) <= 60;
    verify.spectrum_stride = 50;
    run.properties =
        verify_path_properties(run.full_path, prepared.data, config.loss_kind, verify);

    if (parameter_count(student0) <= 600) {
        run.endpoint_report = analyze_point(at_pp, prepared.data, config.loss_kind,
                                            run.pair_layer, 1);
    } else {
        // Too large for a dense Hessian; record loss and gradient only.
        CriticalityReport r;
        LossAndGradient lg = loss_and_gradient(at_pp, prepared.data, config.loss_kind);
        r.loss = lg.loss;
        r.grad_norm = lg.gradient.norm();
        r.n_zero_required = student0.layers[run.pair_layer + 1].weights.rows;
        r.classification = Criticality::non_critical;
        run.endpoint_report = r;
    }

    if (!prepared.data.labels.empty()) {
        run.accuracy.reserve(run.full_path.samples.size());
        for (const PathSample& s : run.full_path.samples)
            run.accuracy.push_back(argmax_accuracy(s.params, prepared.data));
    }

    if (write_outputs) {
        const auto dir = config.output_dir;
        std::filesystem::create_directories(dir);
        write_run_json(config, dir, "merge-path");
        write_trace_csv(run.full_path, dir / "trace.csv", run.accuracy);
        save_checkpoint(at_pp, dir / "endpoint.json", {config.seed, "path endpoint"});
        save_checkpoint(student0, dir / "teacher.json", {config.seed, "teacher"});
        {
            std::ofstream out(dir / "spectrum.json");
            out << run.endpoint_report.to_json() << "\n";
        }
        if (student0.input_dim() == 2) {
            nlohmann::json j;
            write_layer_vectors_json(student0, j["start"]);
            write_layer_vectors_json(at_pp, j["endpoint"]);
            std::ofstream out(dir / "vectors.json");
            out << j.dump(2) << "\n";
        }
        if (config.save_sample_checkpoints) {
            auto samples_dir = dir / "samples";
            std::filesystem::create_directories(samples_dir);
            char name[32];
            for (std::size_t i = 0; i < run.full_path.samples.size(); ++i) {
                std::snprintf(name, sizeof(name), "sample_%04zu.json", i);
                save_checkpoint(run.full_path.samples[i].params, samples_dir / name,
                                {config.seed, ""});
            }
        }
    }
    return run;
}

std::vector<SweepRow> run_width_sweep(const ExperimentConfig& base,
                                      const std::vector<std::size_t>& hidden_widths,
                                      const std::vector<std::uint64_t>& seeds,
                                      bool write_outputs) {
    if (hidden_widths.empty() || seeds.empty())
        throw ConfigError("sweep needs at least one width and one seed");
    std::vector<std::size_t> frame = base.resolved_widths();
    std::vector<SweepRow> rows;
    for (std::size_t width : hidden_widths) {
        double sum = 0.0;
        std::size_t first_row = rows.size();
        for (std::uint64_t seed : seeds) {
            ExperimentConfig config = base;
            config.seed = seed;
            config.widths = frame;
            for (std::size_t t = 1; t + 1 < config.widths.size(); ++t)
                config.widths[t] = width;
            MergePathRun run = run_merge_path(config, false);
            SweepRow row;
            row.width = width;
            row.seed = seed;
            row.plateau_loss = run.full_path.max_loss();
            sum += row.plateau_loss;
            rows.push_back(row);
        }
        double mean = sum / static_cast<double>(seeds.size());
        for (std::size_t i = first_row; i < rows.size(); ++i)
            rows[i].mean_for_width = mean;
    }

    if (write_outputs) {
        std::filesystem::create_directories(base.output_dir);
        write_run_json(base, base.output_dir, "sweep");
        std::ofstream out(base.output_dir / "sweep.csv");
        if (!out) throw IoError("cannot write sweep.csv");
        out << "width,seed,plateau_loss,width_mean\n";
        char buf[128];
        for (const SweepRow& r : rows) {
            std::snprintf(buf, sizeof(buf), "%zu,%llu,%.17g,%.17g\n", r.width,
                          static_cast<unsigned long long>(r.seed), r.plateau_loss,
                          r.mean_for_width);
            out << buf;
        }
    }
    return rows;
}

ExchangeDemoResult run_exchange_demo(const ExperimentConfig& config,
                                     const NetworkParams& net_at_pp,
                                     const Dataset& data, std::size_t target,
                                     bool cycle, bool write_outputs) {
    ExchangeDemoResult result;
    const std::size_t layer = config.pair.layer;
    const std::size_t base = config.pair.base;
    const std::size_t offset = config.pair.offset;
    result.first = equal_loss_exchange(net_at_pp, data, config.loss_kind, layer, base,
                                       offset, target);
    const NetworkParams* last = &result.first.endpoint();
    if (cycle) {
        // Continue the cycle with a third index distinct from all involved.
        std::size_t width = net_at_pp.layers[layer].weights.rows;
        std::size_t third = width;
        for (std::size_t c = 0; c < width; ++c)
            if (c != base && c != offset && c != target) {
                third = c;
                break;
            }
        if (third == width)
            throw DomainError("exchange cycle needs at least four neurons in the layer");
        result.second = equal_loss_exchange(*last, data, config.loss_kind, layer, base,
                                            target, third);
        last = &result.second->endpoint();
    }
    result.final_loss = loss(*last, data, config.loss_kind);

    if (write_outputs) {
        std::filesystem::create_directories(config.output_dir);
        write_run_json(config, config.output_dir, "exchange");
        nlohmann::json j;
        j["start_loss"] = result.first.start_loss;
        j["final_loss"] = result.final_loss;
        j["max_rel_loss_dev_first"] = result.first.max_rel_loss_dev;
        if (result.second)
            j["max_rel_loss_dev_second"] = result.second->max_rel_loss_dev;
        j["target"] = target;
        std::ofstream out(config.output_dir / "exchange.json");
        out << j.dump(2) << "\n";
    }
    return result;
}

std::string count_table_csv(unsigned max_n, unsigned max_k) {
    std::string csv =
        "K,n,ratio_exact_num,ratio_exact_den,lower_bound_num,lower_bound_den,"
        "limit_float\n";
    char buf[64];
    for (unsigned n = 2; n <= max_n; ++n) {
        for (unsigned K = 1; K <= std::min(max_k, n / 2); ++K) {
            Ratio exact = ratio_formula(K, n);
            Ratio bound = lower_bound(K, n);
            AsymptoticCheck asym = asymptotic_check(K, n);
            csv += std::to_string(K) + "," + std::to_string(n) + "," +
                   exact.num.to_string() + "," + exact.den.to_string() + "," +
                   bound.num.to_string() + "," + bound.den.to_string() + ",";
            std::snprintf(buf, sizeof(buf), "%.17g\n", asym.limit);
            csv += buf;
        }
    }
    return csv;
}

void run_count_tables(unsigned max_n, unsigned max_k, const std::filesystem::path& out) {
    std::ofstream file(out);
    if (!file) throw IoError("cannot write " + out.string());
    file << count_table_csv(max_n, max_k);
}

ProbeReport run_probe(const ExperimentConfig& config, std::size_t order_K,
                      std::size_t n_probes, double radius, bool write_outputs) {
    PreparedTask prepared = train_teacher(config);
    const std::size_t layer = config.pair.layer;
    std::vector<std::size_t> widths = prepared.teacher.widths();
    if (layer + 2 >= widths.size())
        throw ConfigError("probe: pair layer is not hidden");
    const std::size_t big_width = widths[layer + 1];
    if (big_width < 2 * order_K)
        throw ConfigError("probe: layer too narrow for the requested order");

    // Train a student that is K neurons narrower at the chosen layer, from
    // a fresh seeded initialization, to a minimum of the teacher's task.
    std::vector<std::size_t> small_widths = widths;
    small_widths[layer + 1] = big_width - order_K;
    Rng rng(config.seed + 0x9E37);
    NetworkParams small_init = make_network(small_widths, config.activation, rng);
    GdResult trained = gd_minimize(small_init, prepared.data, config.loss_kind);

    // Duplicate the first K neurons; the rest stay singletons.
    MergePlan plan;
    plan.layer = layer;
    std::size_t next = 0;
    for (std::size_t g = 0; g < big_width - order_K; ++g) {
        std::vector<std::size_t> group{next++};
        if (g < order_K) group.push_back(next++);
        plan.representatives.push_back(group.front());
        plan.groups.push_back(std::move(group));
    }
    NetworkParams big = build_kth_order_point(trained.params, plan);

    HyperplaneFrame frame = constraint_null_basis(big, plan);
    Rng probe_rng(config.seed + 0x51F15EED);
    ProbeReport report = probe_hyperplane(big, prepared.data, config.loss_kind, frame,
                                          n_probes, radius, probe_rng);

    if (write_outputs) {
        std::filesystem::create_directories(config.output_dir);
        write_run_json(config, config.output_dir, "probe");
        std::ofstream out(config.output_dir / "probe.json");
        nlohmann::json j = nlohmann::json::parse(report.to_json());
        j["order_K"] = order_K;
        j["basis_dimension"] = frame.dimension();
        j["small_net_converged"] = trained.converged;
        j["small_net_loss"] = trained.final_loss;
        out << j.dump(2) << "\n";
    }
    return report;
}

}  // namespace permpoint
