#pragma once

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mnemo/data/codebook.hpp"
#include "mnemo/data/mnist.hpp"
#include "mnemo/data/synthetic.hpp"
#include "mnemo/eval/backdoor.hpp"
#include "mnemo/eval/fim_study.hpp"
#include "mnemo/eval/laplace.hpp"
#include "mnemo/eval/metrics.hpp"
#include "mnemo/eval/mia.hpp"
#include "mnemo/harness/config.hpp"
#include "mnemo/harness/manifest.hpp"
#include "mnemo/harness/serialize.hpp"
#include "mnemo/nn/checkpoint.hpp"
#include "mnemo/train/trainer.hpp"
#include "mnemo/unlearn/forget.hpp"

namespace mnemo::harness {

using Clock = std::chrono::steady_clock;

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written by index; the first exception (lowest index) is rethrown.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(workers, n);
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(work);
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

inline data::TrainTestPair load_data(const ExperimentConfig& c) {
    if (c.dataset.kind == "mnist") {
        return data::load_mnist(c.data_dir());
    }
    return data::make_synthetic(c.dataset.classes, c.dataset.per_class, c.dataset.dim, c.dataset.spread, c.seed);
}

inline std::string dataset_name(const ExperimentConfig& c) { return c.dataset.kind; }

struct ModelBundle {
    nn::MlpModel model;
    data::MnemonicCodebook codebook;
    std::optional<train::TrainRecord> record;
};

inline data::MnemonicCodebook make_codebook(const ExperimentConfig& c, std::size_t dim) {
    return data::generate_codebook(c.num_classes(), dim, c.codes_per_class, c.seed);
}

inline train::TrainResult train_model(const ExperimentConfig& c, const data::TrainTestPair& d,
                                      const data::MnemonicCodebook& book, double t_mix) {
    const auto dims = c.layer_dims(d.train.feature_dim(), d.train.num_classes);
    return train::train_with_codes(d.train, book, dims, c.train_config(t_mix, d.train.size()), &d.test);
}

/// The configured checkpoint, or a freshly trained model whose artifacts are
/// added to `out`. A missing codebook is regenerated from the seed.
inline ModelBundle obtain_model(const ExperimentConfig& c, const data::TrainTestPair& d, OutputSet& out) {
    if (!c.checkpoint.empty()) {
        auto model = nn::load_checkpoint(c.checkpoint);
        require<ShapeError>(model.input_dim() == d.train.feature_dim(),
                            "checkpoint input dim " + std::to_string(model.input_dim()) + " differs from dataset dim " +
                                std::to_string(d.train.feature_dim()));
        require<ShapeError>(model.num_classes() == d.train.num_classes, "checkpoint class count differs from dataset");
        auto book = c.codebook.empty() ? make_codebook(c, d.train.feature_dim()) : data::load_codebook(c.codebook);
        require<ShapeError>(book.feature_dim() == model.input_dim(), "codebook dim differs from checkpoint input dim");
        require<ShapeError>(book.num_classes() >= model.num_classes(), "codebook does not cover every class");
        return {std::move(model), std::move(book), std::nullopt};
    }
    auto book = make_codebook(c, d.train.feature_dim());
    auto trained = train_model(c, d, book, c.t_mix);
    out.add("model.ckpt", nn::encode_checkpoint(trained.model));
    out.add("codebook.bin", data::encode_codebook(book));
    out.add_json("train_record.json", to_json(trained.record));
    out.add_text("train_epochs.csv", epochs_csv(trained.record));
    return {std::move(trained.model), std::move(book), std::move(trained.record)};
}

inline json eval_summary(const eval::EvalReport& r) { return {{"a_r", r.a_r}, {"a_f", r.a_f}, {"e_f", r.e_f}}; }

inline RunEntry make_run(const std::string& command, const ExperimentConfig& c, Clock::time_point start) {
    RunEntry run;
    run.command = command;
    run.config = config_to_json(c);
    run.seeds = {{"global", c.seed}, {"fim_study", c.fim_study.seeds}};
    run.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    return run;
}

inline void finish(const std::string& command, const ExperimentConfig& c, OutputSet& out, json metrics,
                   Clock::time_point start) {
    out.add_json(command + "_metrics.json", metrics);
    auto run = make_run(command, c, start);
    run.metrics = std::move(metrics);
    out.commit(std::move(run));
}

inline void cmd_train(const ExperimentConfig& c) {
    validate(c);
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto config = c;
    config.checkpoint.clear();
    config.codebook.clear();
    auto bundle = obtain_model(config, d, out);
    const double acc = nn::accuracy(bundle.model, d.test.inputs, d.test.labels);
    finish("train", c, out,
           {{"test_accuracy", acc},
            {"final_train_loss", bundle.record->epochs.back().train_loss},
            {"replacement_count", bundle.record->replacement_count},
            {"backprop_count", bundle.record->backprop_count}},
           start);
}

inline void cmd_forget(const ExperimentConfig& c) {
    validate(c);
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto bundle = obtain_model(c, d, out);
    const data::ClassPartition partition(d.train.num_classes, c.forget.classes);
    auto before = eval::forgetting_capability(bundle.model, d.test, partition);
    before.dataset = dataset_name(c);
    before.method = "none";
    const auto result = unlearn::forget(bundle.model, bundle.codebook, partition, c.forget.lambda1, c.forget.lambda2);
    auto after = eval::forgetting_capability(result.model, d.test, partition);
    after.dataset = dataset_name(c);
    after.method = "mnemonic";
    after.forget_time = result.report.wall_time;
    after.backprop_count = result.report.backprop_count;
    out.add("forgotten.ckpt", nn::encode_checkpoint(result.model));
    out.add_json("forget_report.json", to_json(result.report));
    out.add_json("eval_before.json", to_json(before));
    out.add_json("eval_after.json", to_json(after));
    finish("forget", c, out,
           {{"before", eval_summary(before)},
            {"after", eval_summary(after)},
            {"chosen_sign", result.report.chosen_sign},
            {"backprop_count", result.report.backprop_count}},
           start);
}

inline void cmd_forget_with_data(const ExperimentConfig& c) {
    validate(c);
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto bundle = obtain_model(c, d, out);
    const data::ClassPartition partition(d.train.num_classes, c.forget.classes);
    auto before = eval::forgetting_capability(bundle.model, d.test, partition);
    before.dataset = dataset_name(c);
    before.method = "none";
    const auto result = unlearn::forget_with_data(bundle.model, d.train, partition, c.forget.lambda1, c.forget.lambda2,
                                                  c.forget.samples_per_class, c.seed);
    auto after = eval::forgetting_capability(result.model, d.test, partition);
    after.dataset = dataset_name(c);
    after.method = "data";
    after.forget_time = result.report.wall_time;
    after.backprop_count = result.report.backprop_count;
    out.add("forgotten_with_data.ckpt", nn::encode_checkpoint(result.model));
    out.add_json("forget_with_data_report.json", to_json(result.report));
    out.add_json("eval_before.json", to_json(before));
    out.add_json("eval_after_with_data.json", to_json(after));
    finish("forget-with-data", c, out,
           {{"before", eval_summary(before)},
            {"after", eval_summary(after)},
            {"chosen_sign", result.report.chosen_sign},
            {"backprop_count", result.report.backprop_count}},
           start);
}

struct SweepPoint {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double a_r = 0.0;
    double e_f = 0.0;
    int sign = 1;
    [[nodiscard]] double score() const { return a_r + e_f; }
};

/// argmax of A_R + E_F; ties go to the smaller lambda2, then the smaller lambda1.
inline std::size_t best_sweep_point(const std::vector<SweepPoint>& points) {
    require(!points.empty(), "empty sweep");
    std::size_t best = 0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        const auto& p = points[i];
        const auto& b = points[best];
        if (p.score() > b.score() ||
            (p.score() == b.score() &&
             (p.lambda2 < b.lambda2 || (p.lambda2 == b.lambda2 && p.lambda1 < b.lambda1)))) {
            best = i;
        }
    }
    return best;
}

inline std::vector<SweepPoint> run_sweep(const nn::MlpModel& model, const data::MnemonicCodebook& book,
                                         const data::LabeledDataset& scoring, const data::ClassPartition& partition,
                                         const std::vector<double>& lambda1, const std::vector<double>& lambda2,
                                         std::size_t workers) {
    std::vector<SweepPoint> points;
    for (double l2 : lambda2) {
        for (double l1 : lambda1) {
            points.push_back({l1, l2});
        }
    }
    parallel_for(points.size(), workers, [&](std::size_t i) {
        auto& p = points[i];
        const auto r = unlearn::forget(model, book, partition, p.lambda1, p.lambda2);
        const auto e = eval::forgetting_capability(r.model, scoring, partition);
        p.a_r = e.a_r;
        p.e_f = e.e_f;
        p.sign = r.report.chosen_sign;
    });
    return points;
}

inline void cmd_sweep(const ExperimentConfig& c) {
    validate(c, true);
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto bundle = obtain_model(c, d, out);
    const data::ClassPartition partition(d.train.num_classes, c.forget.classes);
    const auto scoring = c.sweep.scoring == "codes" ? bundle.codebook.as_dataset() : d.test;
    const auto points =
        run_sweep(bundle.model, bundle.codebook, scoring, partition, c.sweep.lambda1, c.sweep.lambda2, c.workers);
    std::string csv = "lambda1,lambda2,a_r,e_f,score,chosen_sign\n";
    for (const auto& p : points) {
        csv += format_double(p.lambda1) + "," + format_double(p.lambda2) + "," + format_double(p.a_r) + "," +
               format_double(p.e_f) + "," + format_double(p.score()) + "," + std::to_string(p.sign) + "\n";
    }
    const auto& best = points[best_sweep_point(points)];
    out.add_text("sweep.csv", csv);
    finish("sweep", c, out,
           {{"scoring", c.sweep.scoring},
            {"points", points.size()},
            {"best", {{"lambda1", best.lambda1}, {"lambda2", best.lambda2}, {"a_r", best.a_r}, {"e_f", best.e_f}}}},
           start);
}

inline void cmd_tmix_study(const ExperimentConfig& c) {
    validate(c);
    require(!c.tmix_values.empty(), "tmix_values must be nonempty");
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    const data::ClassPartition partition(d.train.num_classes, c.forget.classes);
    const auto book = make_codebook(c, d.train.feature_dim());
    struct Row {
        double t_mix = 0.0, accuracy = 0.0, a_r = 0.0, e_f = 0.0;
        std::optional<double> fim_error;
    };
    std::vector<Row> rows(c.tmix_values.size());
    parallel_for(rows.size(), c.workers, [&](std::size_t i) {
        Row& row = rows[i];
        row.t_mix = c.tmix_values[i];
        const auto trained = train_model(c, d, book, row.t_mix);
        row.accuracy = nn::accuracy(trained.model, d.test.inputs, d.test.labels);
        const auto r = unlearn::forget(trained.model, book, partition, c.forget.lambda1, c.forget.lambda2);
        const auto e = eval::forgetting_capability(r.model, d.test, partition);
        row.a_r = e.a_r;
        row.e_f = e.e_f;
        if (row.t_mix > 0.0) {
            const auto all = unlearn::sample_per_class(d.train, partition.forget(), std::nullopt, 0);
            const auto oracle = unlearn::estimate_fim_diagonal(trained.model, all.samples, partition.forget(),
                                                               unlearn::FimSource::oracle);
            row.fim_error =
                unlearn::fim_error(unlearn::fim_from_codebook(trained.model, book, partition.forget()), oracle);
        }
    });
    std::string csv = "t_mix,test_accuracy,a_r,e_f,fim_error\n";
    json table = json::array();
    for (const auto& r : rows) {
        csv += format_double(r.t_mix) + "," + format_double(r.accuracy) + "," + format_double(r.a_r) + "," +
               format_double(r.e_f) + "," + (r.fim_error ? format_double(*r.fim_error) : std::string("n/a")) + "\n";
        table.push_back({{"t_mix", r.t_mix},
                         {"test_accuracy", r.accuracy},
                         {"a_r", r.a_r},
                         {"e_f", r.e_f},
                         {"fim_error", r.fim_error ? json(*r.fim_error) : json("n/a")}});
    }
    out.add_text("tmix_study.csv", csv);
    finish("tmix-study", c, out, {{"rows", std::move(table)}}, start);
}

inline void cmd_fim_study(const ExperimentConfig& c) {
    validate(c);
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto bundle = obtain_model(c, d, out);
    auto classes = c.forget.classes;
    std::sort(classes.begin(), classes.end());
    const auto study = eval::fim_approximation_study(bundle.model, d.train, bundle.codebook, classes,
                                                     c.fim_study.sample_counts, c.fim_study.seeds);
    out.add_json("fim_study.json", to_json(study));
    out.add_text("fim_curve.csv", curve_csv(study.data_curve));
    json curve = json::array();
    for (const auto& p : study.data_curve) {
        curve.push_back({{"n", p.x}, {"mean", p.mean}, {"std", p.std}});
    }
    finish("fim-study", c, out, {{"mnemonic_error", study.mnemonic_error}, {"data_curve", std::move(curve)}}, start);
}

inline void cmd_mia(const ExperimentConfig& c) {
    validate(c);
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto bundle = obtain_model(c, d, out);
    const data::ClassPartition partition(d.train.num_classes, c.forget.classes);
    const auto result = unlearn::forget(bundle.model, bundle.codebook, partition, c.forget.lambda1, c.forget.lambda2);
    json per_class = json::array();
    std::string csv = "model,class,split,loss\n";
    for (int k : partition.forget()) {
        per_class.push_back({{"class", k},
                             {"auc_before", eval::mia_auc(bundle.model, d.train, d.test, k)},
                             {"auc_after", eval::mia_auc(result.model, d.train, d.test, k)}});
        for (const nn::MlpModel* m : {static_cast<const nn::MlpModel*>(&bundle.model), &result.model}) {
            const auto dist = eval::loss_distribution(*m, d.train, d.test, k);
            for (std::size_t i = 0; i < dist.losses.size(); ++i) {
                csv += std::string(m == &bundle.model ? "before" : "after") + "," + std::to_string(k) + "," +
                       (dist.membership[i] == eval::Membership::train ? "train" : "test") + "," +
                       format_double(dist.losses[i]) + "\n";
            }
        }
    }
    out.add_text("mia_losses.csv", csv);
    finish("mia", c, out, {{"classes", std::move(per_class)}}, start);
}

inline void cmd_backdoor(const ExperimentConfig& c) {
    validate(c);
    require(!c.backdoor.ratios.empty(), "backdoor.ratios must be nonempty");
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto bundle = obtain_model(c, d, out);
    const auto points = eval::backdoor_probe(bundle.model, bundle.codebook, d.test, c.backdoor.trigger_class,
                                             c.backdoor.ratios);
    std::vector<eval::CurvePoint> curve;
    for (const auto& p : points) {
        curve.push_back({p.ratio, p.accuracy, 0.0, 1, {p.accuracy}, false});
    }
    out.add_text("backdoor.csv", curve_csv(curve));
    finish("backdoor", c, out, {{"trigger_class", c.backdoor.trigger_class}, {"points", to_json(points)}}, start);
}

inline void cmd_laplace(const ExperimentConfig& c) {
    validate(c);
    const auto start = Clock::now();
    const auto d = load_data(c);
    OutputSet out(c.out);
    auto bundle = obtain_model(c, d, out);
    const data::ClassPartition partition(d.train.num_classes, c.forget.classes);
    const auto layers = eval::laplace_diagnostic(bundle.model, d.train, bundle.codebook, partition, c.t_mix);
    finish("laplace", c, out, {{"t_mix", c.t_mix}, {"layers", to_json(layers)}}, start);
}

/// Plain-language description of what a command's numbers stand for.
inline std::string analog_of(const std::string& command) {
    if (command == "train") return "test accuracy after training with mnemonic codes";
    if (command == "forget") return "one-shot class forgetting from codes (A_R, E_F)";
    if (command == "forget-with-data") return "forgetting with Fisher diagonals from training data";
    if (command == "sweep") return "(lambda1, lambda2) search maximizing A_R + E_F";
    if (command == "tmix-study") return "accuracy and forgetting across t_mix";
    if (command == "fim-study") return "Fisher diagonal error against the oracle";
    if (command == "mia") return "loss-based membership inference on the forgotten class";
    if (command == "backdoor") return "test accuracy with code mixed into the input";
    if (command == "laplace") return "per-layer gradient magnitudes at the trained weights";
    if (command == "acceptance") return "acceptance criterion";
    if (command == "report") return "summary";
    return "other";
}

namespace detail {

inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            flatten(v, prefix.empty() ? k : prefix + "." + k, out);
        }
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
        }
    } else if (j.is_number_float()) {
        out.emplace_back(prefix, format_double(j.get<double>()));
    } else if (j.is_string()) {
        out.emplace_back(prefix, j.get<std::string>());
    } else {
        out.emplace_back(prefix, j.dump());
    }
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string q = "\"";
    for (char ch : s) {
        q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    }
    return q + "\"";
}

}  // namespace detail

/// Summary of a manifest: one row per (run, metric). Missing files become warnings.
struct ReportSummary {
    std::string markdown;
    std::string csv;
    std::vector<std::string> warnings;
    std::size_t rows = 0;
};

inline ReportSummary summarize_manifest(const RunManifest& manifest, const std::filesystem::path& dir) {
    ReportSummary s;
    s.csv = "run,command,analog,metric,value\n";
    std::string table;
    for (std::size_t i = 0; i < manifest.runs.size(); ++i) {
        const auto& run = manifest.runs[i];
        if (run.command == "report") {
            continue;
        }
        for (const auto& f : run.files) {
            if (!std::filesystem::exists(dir / f)) {
                s.warnings.push_back("run " + std::to_string(i) + " (" + run.command + "): missing file " + f);
            }
        }
        std::vector<std::pair<std::string, std::string>> metrics;
        detail::flatten(run.metrics, "", metrics);
        for (const auto& [key, value] : metrics) {
            s.csv += std::to_string(i) + "," + run.command + "," + detail::csv_field(analog_of(run.command)) + "," +
                     detail::csv_field(key) + "," + detail::csv_field(value) + "\n";
            table += "| " + std::to_string(i) + " | " + run.command + " | " + analog_of(run.command) + " | " + key +
                     " | " + value + " |\n";
            ++s.rows;
        }
    }
    s.markdown = "# Run summary\n\ncode version: " + manifest.code_version + "\n\n";
    if (s.rows == 0) {
        s.markdown += "No results.\n";
    } else {
        s.markdown += "| run | command | measures | metric | value |\n|---|---|---|---|---|\n" + table;
    }
    if (!s.warnings.empty()) {
        s.markdown += "\n## Warnings\n\n";
        for (const auto& w : s.warnings) {
            s.markdown += "- " + w + "\n";
        }
    }
    return s;
}

inline ReportSummary cmd_report(const ExperimentConfig& c) {
    const auto start = Clock::now();
    const std::filesystem::path manifest_path =
        c.manifest.empty() ? std::filesystem::path(c.out) / kManifestName : std::filesystem::path(c.manifest);
    const auto manifest = load_manifest(manifest_path);
    auto summary = summarize_manifest(manifest, manifest_path.parent_path());
    OutputSet out(c.out);
    out.add_text("summary.md", summary.markdown);
    out.add_text("summary.csv", summary.csv);
    auto run = make_run("report", c, start);
    run.metrics = {{"rows", summary.rows}, {"warnings", summary.warnings}};
    out.commit(std::move(run));
    for (const auto& w : summary.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    return summary;
}

}  // namespace mnemo::harness
