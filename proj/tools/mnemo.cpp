// mnemo: train, forget and evaluate MLPs with mnemonic codes.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mnemo/harness/commands.hpp"

namespace {

using mnemo::harness::ExperimentConfig;
using mnemo::harness::json;

struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> profile;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> workers;
    std::optional<std::string> checkpoint;
    std::optional<std::string> codebook;
    std::optional<std::string> data_dir;
    std::optional<std::string> manifest;
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    std::optional<double> t_mix;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> samples_per_class;
    std::vector<int> forget_classes;
    std::vector<std::string> set;
};

json overrides_from(const Flags& f) {
    json o = json::object();
    auto put = [&](const std::string& key, const json& v) { mnemo::harness::set_dotted(o, key, v.dump()); };
    if (f.seed) put("seed", *f.seed);
    if (f.out) put("out", *f.out);
    if (f.workers) put("workers", *f.workers);
    if (f.checkpoint) put("checkpoint", *f.checkpoint);
    if (f.codebook) put("codebook", *f.codebook);
    if (f.data_dir) put("dataset.path", *f.data_dir);
    if (f.manifest) put("manifest", *f.manifest);
    if (f.lambda1) put("forget.lambda1", *f.lambda1);
    if (f.lambda2) put("forget.lambda2", *f.lambda2);
    if (f.t_mix) put("train.t_mix", *f.t_mix);
    if (f.epochs) put("train.epochs", *f.epochs);
    if (f.samples_per_class) put("forget.samples_per_class", *f.samples_per_class);
    if (!f.forget_classes.empty()) put("forget.classes", f.forget_classes);
    for (const auto& kv : f.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw mnemo::ValidationError("--set expects KEY=VALUE, got '" + kv + "'");
        }
        mnemo::harness::set_dotted(o, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Class forgetting with mnemonic codes: training, forgetting and evaluation harness"};
    app.require_subcommand(1);
    Flags flags;

    const std::map<std::string, std::pair<std::string, std::function<void(const ExperimentConfig&)>>> commands{
        {"train", {"Train a model with mnemonic codes", mnemo::harness::cmd_train}},
        {"forget", {"Forget classes using mnemonic codes", mnemo::harness::cmd_forget}},
        {"forget-with-data", {"Forget classes using training data", mnemo::harness::cmd_forget_with_data}},
        {"sweep", {"Grid search over (lambda1, lambda2)", mnemo::harness::cmd_sweep}},
        {"tmix-study", {"Train and forget across t_mix values", mnemo::harness::cmd_tmix_study}},
        {"fim-study", {"Fisher diagonal error against the oracle", mnemo::harness::cmd_fim_study}},
        {"mia", {"Membership inference before and after forgetting", mnemo::harness::cmd_mia}},
        {"backdoor", {"Accuracy with code mixed into test inputs", mnemo::harness::cmd_backdoor}},
        {"laplace", {"Per-layer gradient magnitudes", mnemo::harness::cmd_laplace}},
        {"report", {"Summarize a run manifest",
                    [](const ExperimentConfig& c) { (void)mnemo::harness::cmd_report(c); }}},
    };

    for (const auto& [name, entry] : commands) {
        auto* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", flags.config, "JSON experiment config");
        sub->add_option("--profile", flags.profile, "quick, mnist-desk or mnist-full");
        sub->add_option("--seed", flags.seed, "Global seed");
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--workers", flags.workers, "Parallel workers for sweep and tmix-study");
        sub->add_option("--checkpoint", flags.checkpoint, "Use this model instead of training one");
        sub->add_option("--codebook", flags.codebook, "Codebook of --checkpoint (regenerated from the seed if absent)");
        sub->add_option("--data-dir", flags.data_dir, std::string("MNIST directory (default $") +
                                                          mnemo::harness::kDataDirEnv + ")");
        sub->add_option("--manifest", flags.manifest, "Manifest to summarize (report)");
        sub->add_option("--lambda1", flags.lambda1, "Perturbation cap lambda1");
        sub->add_option("--lambda2", flags.lambda2, "Perturbation cap lambda2");
        sub->add_option("--forget-class", flags.forget_classes, "Class to forget (repeatable)");
        sub->add_option("--samples-per-class", flags.samples_per_class, "forget-with-data sample count");
        sub->add_option("--t-mix", flags.t_mix, "Code replacement probability");
        sub->add_option("--epochs", flags.epochs, "Training epochs");
        sub->add_option("--set", flags.set, "Override any config key, e.g. --set train.batch_size=64");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const auto* sub = app.get_subcommands().front();
        const auto config = mnemo::harness::resolve_config(
            flags.config ? std::optional<std::filesystem::path>(*flags.config) : std::nullopt, flags.profile,
            overrides_from(flags));
        commands.at(sub->get_name()).second(config);
        std::cout << sub->get_name() << ": wrote results to " << config.out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
