#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnemo/core/binary_io.hpp"
#include "mnemo/core/error.hpp"
#include "mnemo/train/trainer.hpp"

namespace mnemo::harness {

using json = nlohmann::ordered_json;

inline constexpr const char* kDataDirEnv = "MNEMO_DATA_DIR";

struct DatasetSpec {
    std::string kind = "synthetic";  // "mnist" or "synthetic"
    std::string path;                // mnist directory; empty means $MNEMO_DATA_DIR
    std::size_t classes = 10;
    std::size_t per_class = 200;
    std::size_t dim = 20;
    double spread = 1.0;
};

struct ForgetSpec {
    double lambda1 = 1e-3;
    double lambda2 = 10.0;
    std::vector<int> classes{0};
    std::optional<std::size_t> samples_per_class;  // forget-with-data; empty means all
};

struct SweepSpec {
    std::vector<double> lambda1;
    std::vector<double> lambda2;
    std::string scoring = "test";  // "test" or "codes"
};

struct FimStudySpec {
    std::vector<std::size_t> sample_counts{1, 10, 100, 1000};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
};

struct BackdoorSpec {
    std::vector<double> ratios{0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
    int trigger_class = 0;
};

/// One experiment. Built from a profile, then a JSON config file, then
/// command-line overrides, each later source replacing individual keys.
struct ExperimentConfig {
    std::string profile = "quick";
    std::uint64_t seed = 0;
    std::string out = "runs/default";
    std::size_t workers = 1;
    DatasetSpec dataset;
    std::vector<std::size_t> hidden{32, 16};
    double t_mix = 0.1;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double weight_decay = 5e-4;
    std::string schedule = "constant";
    std::size_t codes_per_class = 1;
    ForgetSpec forget;
    SweepSpec sweep;
    std::vector<double> tmix_values{0.0, 0.1, 0.3, 0.5, 0.8};
    FimStudySpec fim_study;
    BackdoorSpec backdoor;
    std::string checkpoint;  // use this model instead of training
    std::string codebook;    // codebook belonging to `checkpoint`
    std::string manifest;    // input of `report`; empty means <out>/manifest.json

    [[nodiscard]] std::filesystem::path data_dir() const {
        if (!dataset.path.empty()) {
            return dataset.path;
        }
        if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') {
            return env;
        }
        return "data/mnist";
    }

    [[nodiscard]] std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t num_classes) const {
        std::vector<std::size_t> dims{input_dim};
        dims.insert(dims.end(), hidden.begin(), hidden.end());
        dims.push_back(num_classes);
        return dims;
    }

    /// `train_samples` sizes the cosine schedule.
    [[nodiscard]] train::TrainConfig train_config(double mix, std::size_t train_samples) const {
        train::TrainConfig tc;
        tc.t_mix = mix;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.seed = seed;
        tc.sgd.learning_rate = learning_rate;
        tc.sgd.weight_decay = weight_decay;
        if (schedule == "cosine") {
            tc.sgd.schedule = nn::LrSchedule::cosine(epochs * ((train_samples + batch_size - 1) / batch_size));
        }
        return tc;
    }

    [[nodiscard]] std::size_t num_classes() const { return dataset.kind == "mnist" ? 10 : dataset.classes; }
};

namespace detail {

inline std::vector<double> decades(int lo, int hi) {
    std::vector<double> out;
    for (int e = lo; e <= hi; ++e) {
        out.push_back(std::stod("1e" + std::to_string(e)));
    }
    return out;
}

}  // namespace detail

/// Built-in profiles: "quick" (synthetic, seconds), "mnist-desk" (784-256-128-10,
/// 20 epochs) and "mnist-full" (same with 200 epochs).
inline json profile_defaults(const std::string& name) {
    json grid = {{"lambda1", detail::decades(-6, 0)}, {"lambda2", detail::decades(-1, 5)}, {"scoring", "test"}};
    if (name == "quick") {
        return {{"profile", name},
                {"dataset", {{"kind", "synthetic"}, {"classes", 10}, {"per_class", 200}, {"dim", 20}, {"spread", 1.0}}},
                {"model", {{"hidden", {32, 16}}}},
                {"train",
                 {{"t_mix", 0.1}, {"epochs", 10}, {"batch_size", 32}, {"learning_rate", 0.05}, {"weight_decay", 5e-4}}},
                {"forget", {{"lambda1", 1.0}, {"lambda2", 10.0}}},  // sweep optimum for this profile
                {"sweep", grid},
                {"fim_study", {{"sample_counts", {1, 10, 50, 200}}, {"seeds", {0, 1, 2, 3, 4}}}}};
    }
    if (name == "mnist-desk" || name == "mnist-full") {
        return {{"profile", name},
                {"dataset", {{"kind", "mnist"}}},
                {"model", {{"hidden", {256, 128}}}},
                {"train",
                 {{"t_mix", 0.1},
                  {"epochs", name == "mnist-full" ? 200 : 20},
                  {"batch_size", 128},
                  {"learning_rate", 0.01},
                  {"weight_decay", 5e-4}}},
                {"sweep", grid},
                {"fim_study", {{"sample_counts", {1, 10, 100, 1000}}, {"seeds", {0, 1, 2, 3, 4}}}}};
    }
    throw ValidationError("unknown profile '" + name + "' (expected quick, mnist-desk or mnist-full)");
}

namespace detail {

template <class T>
void read(const json& j, const char* key, T& dst) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return;
    }
    try {
        dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
}

inline void check_lambdas(const std::vector<double>& grid, const char* what) {
    require(!grid.empty(), std::string("sweep grid ") + what + " is empty");
    for (double v : grid) {
        require(v > 0.0 && std::isfinite(v), std::string("sweep grid ") + what + " must be positive");
    }
}

}  // namespace detail

/// Fills an ExperimentConfig from a merged JSON document; unknown top-level
/// keys are rejected.
inline ExperimentConfig config_from_json(const json& j) {
    static const std::vector<std::string> known{"profile", "seed",    "out",        "workers",   "dataset",
                                                "model",   "train",   "forget",     "sweep",     "tmix_values",
                                                "fim_study", "backdoor", "checkpoint", "codebook", "manifest"};
    require(j.is_object(), "config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        require(std::find(known.begin(), known.end(), key) != known.end(), "unknown config key '" + key + "'");
    }
    ExperimentConfig c;
    detail::read(j, "profile", c.profile);
    detail::read(j, "seed", c.seed);
    detail::read(j, "out", c.out);
    detail::read(j, "workers", c.workers);
    detail::read(j, "checkpoint", c.checkpoint);
    detail::read(j, "codebook", c.codebook);
    detail::read(j, "manifest", c.manifest);
    detail::read(j, "tmix_values", c.tmix_values);
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::read(d, "kind", c.dataset.kind);
        detail::read(d, "path", c.dataset.path);
        detail::read(d, "classes", c.dataset.classes);
        detail::read(d, "per_class", c.dataset.per_class);
        detail::read(d, "dim", c.dataset.dim);
        detail::read(d, "spread", c.dataset.spread);
    }
    if (j.contains("model")) {
        detail::read(j.at("model"), "hidden", c.hidden);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::read(t, "t_mix", c.t_mix);
        detail::read(t, "epochs", c.epochs);
        detail::read(t, "batch_size", c.batch_size);
        detail::read(t, "learning_rate", c.learning_rate);
        detail::read(t, "weight_decay", c.weight_decay);
        detail::read(t, "schedule", c.schedule);
        detail::read(t, "codes_per_class", c.codes_per_class);
    }
    if (j.contains("forget")) {
        const auto& f = j.at("forget");
        detail::read(f, "lambda1", c.forget.lambda1);
        detail::read(f, "lambda2", c.forget.lambda2);
        detail::read(f, "classes", c.forget.classes);
        if (f.contains("samples_per_class") && !f.at("samples_per_class").is_null()) {
            std::size_t n = 0;
            detail::read(f, "samples_per_class", n);
            c.forget.samples_per_class = n;
        }
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::read(s, "lambda1", c.sweep.lambda1);
        detail::read(s, "lambda2", c.sweep.lambda2);
        detail::read(s, "scoring", c.sweep.scoring);
    }
    if (j.contains("fim_study")) {
        detail::read(j.at("fim_study"), "sample_counts", c.fim_study.sample_counts);
        detail::read(j.at("fim_study"), "seeds", c.fim_study.seeds);
    }
    if (j.contains("backdoor")) {
        detail::read(j.at("backdoor"), "ratios", c.backdoor.ratios);
        detail::read(j.at("backdoor"), "trigger_class", c.backdoor.trigger_class);
    }
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    return {{"profile", c.profile},
            {"seed", c.seed},
            {"out", c.out},
            {"workers", c.workers},
            {"dataset",
             {{"kind", c.dataset.kind},
              {"path", c.dataset.path},
              {"classes", c.dataset.classes},
              {"per_class", c.dataset.per_class},
              {"dim", c.dataset.dim},
              {"spread", c.dataset.spread}}},
            {"model", {{"hidden", c.hidden}}},
            {"train",
             {{"t_mix", c.t_mix},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"schedule", c.schedule},
              {"codes_per_class", c.codes_per_class}}},
            {"forget",
             {{"lambda1", c.forget.lambda1},
              {"lambda2", c.forget.lambda2},
              {"classes", c.forget.classes},
              {"samples_per_class", c.forget.samples_per_class ? json(*c.forget.samples_per_class) : json(nullptr)}}},
            {"sweep", {{"lambda1", c.sweep.lambda1}, {"lambda2", c.sweep.lambda2}, {"scoring", c.sweep.scoring}}},
            {"tmix_values", c.tmix_values},
            {"fim_study", {{"sample_counts", c.fim_study.sample_counts}, {"seeds", c.fim_study.seeds}}},
            {"backdoor", {{"ratios", c.backdoor.ratios}, {"trigger_class", c.backdoor.trigger_class}}},
            {"checkpoint", c.checkpoint},
            {"codebook", c.codebook},
            {"manifest", c.manifest}};
}

/// Checks that apply to every command. `needs_sweep` adds the grid checks.
inline void validate(const ExperimentConfig& c, bool needs_sweep = false) {
    require(c.dataset.kind == "mnist" || c.dataset.kind == "synthetic",
            "dataset.kind must be 'mnist' or 'synthetic', got '" + c.dataset.kind + "'");
    if (c.dataset.kind == "mnist") {
        require(std::filesystem::is_directory(c.data_dir()), "MNIST directory not found: " + c.data_dir().string());
    }
    if (c.dataset.kind == "synthetic") {
        require(c.dataset.classes >= 2, "dataset.classes must be at least 2");
        require(c.dataset.per_class >= 1 && c.dataset.dim >= 1, "dataset.per_class and dataset.dim must be positive");
    }
    require(c.workers >= 1, "workers must be at least 1");
    require(c.t_mix >= 0.0 && c.t_mix <= 1.0, "train.t_mix must lie in [0, 1]");
    require(c.epochs >= 1 && c.batch_size >= 1, "train.epochs and train.batch_size must be positive");
    require(c.learning_rate > 0.0 && c.weight_decay >= 0.0, "learning_rate must be positive, weight_decay nonnegative");
    require(c.schedule == "constant" || c.schedule == "cosine", "train.schedule must be 'constant' or 'cosine'");
    require(c.codes_per_class >= 1, "train.codes_per_class must be at least 1");
    for (std::size_t h : c.hidden) {
        require(h >= 1, "hidden layer widths must be positive");
    }
    require(c.forget.lambda1 > 0.0 && c.forget.lambda2 > 0.0, "forget.lambda1 and forget.lambda2 must be positive");
    require(!c.forget.classes.empty(), "forget.classes must be nonempty");
    for (int k : c.forget.classes) {
        require(k >= 0 && static_cast<std::size_t>(k) < c.num_classes(),
                "forget class " + std::to_string(k) + " is outside [0, " + std::to_string(c.num_classes()) + ")");
    }
    require(!c.forget.samples_per_class || *c.forget.samples_per_class >= 1, "forget.samples_per_class must be >= 1");
    for (double t : c.tmix_values) {
        require(t >= 0.0 && t <= 1.0, "tmix_values must lie in [0, 1]");
    }
    for (double r : c.backdoor.ratios) {
        require(r >= 0.0 && r <= 1.0, "backdoor.ratios must lie in [0, 1]");
    }
    require(c.backdoor.trigger_class >= 0 && static_cast<std::size_t>(c.backdoor.trigger_class) < c.num_classes(),
            "backdoor.trigger_class is out of range");
    for (std::size_t n : c.fim_study.sample_counts) {
        require(n >= 1, "fim_study.sample_counts must be positive");
    }
    require(!c.fim_study.seeds.empty(), "fim_study.seeds must be nonempty");
    for (const auto* p : {&c.checkpoint, &c.codebook}) {
        require(p->empty() || std::filesystem::exists(*p), "file not found: " + *p);
    }
    require(c.codebook.empty() || !c.checkpoint.empty(), "codebook given without checkpoint");
    if (needs_sweep) {
        detail::check_lambdas(c.sweep.lambda1, "lambda1");
        detail::check_lambdas(c.sweep.lambda2, "lambda2");
        require(c.sweep.scoring == "test" || c.sweep.scoring == "codes", "sweep.scoring must be 'test' or 'codes'");
    }
}

/// Sets a dotted key ("train.epochs") in a JSON document; the value is parsed as
/// JSON when possible and kept as a string otherwise.
inline void set_dotted(json& doc, const std::string& key, const std::string& raw) {
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        require(!part.empty(), "malformed override key '" + key + "'");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) {
            (*node)[part] = json::object();
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

/// Merges profile < config file < overrides. `profile_flag` wins over the
/// profile named in the file.
inline ExperimentConfig resolve_config(const std::optional<std::filesystem::path>& config_file,
                                       const std::optional<std::string>& profile_flag, const json& overrides) {
    json file = json::object();
    if (config_file) {
        require(std::filesystem::exists(*config_file), "config file not found: " + config_file->string());
        const auto bytes = io::read_file(*config_file);
        file = json::parse(bytes.begin(), bytes.end(), nullptr, false);
        if (file.is_discarded()) {
            throw ParseError("config file is not valid JSON: " + config_file->string());
        }
        require(file.is_object(), "config file must hold a JSON object: " + config_file->string());
    }
    std::string profile = "quick";
    if (file.contains("profile") && file.at("profile").is_string()) {
        profile = file.at("profile").get<std::string>();
    }
    if (profile_flag) {
        profile = *profile_flag;
    }
    json merged = profile_defaults(profile);
    merged.merge_patch(file);
    merged.merge_patch(overrides);
    merged["profile"] = profile;
    return config_from_json(merged);
}

}  // namespace mnemo::harness
