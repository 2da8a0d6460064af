#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

#include "mnemo/eval/backdoor.hpp"
#include "mnemo/eval/fim_study.hpp"
#include "mnemo/eval/laplace.hpp"
#include "mnemo/eval/metrics.hpp"
#include "mnemo/train/trainer.hpp"
#include "mnemo/unlearn/forget.hpp"

namespace mnemo::harness {

using json = nlohmann::ordered_json;

inline json to_json(const train::TrainRecord& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"test_accuracy", e.test_accuracy ? json(*e.test_accuracy) : json(nullptr)},
                          {"replacements", e.replacements},
                          {"steps", e.steps}});
    }
    return {{"samples", r.samples},
            {"replacement_count", r.replacement_count},
            {"backprop_count", r.backprop_count},
            {"wall_time_seconds", r.wall_time},
            {"epochs", std::move(epochs)}};
}

inline json to_json(const unlearn::ForgetReport& r) {
    json alpha = json::array();
    for (const auto& a : r.alpha) {
        alpha.push_back({{"layer", a.layer}, {"alpha", a.alpha}, {"max_eta", a.max_eta}});
    }
    return {{"chosen_sign", r.chosen_sign},
            {"score_plus", r.score_plus},
            {"score_minus", r.score_minus},
            {"lambda1", r.lambda1},
            {"lambda2", r.lambda2},
            {"epsilon", r.epsilon},
            {"fim_source", unlearn::to_string(r.source)},
            {"forget_classes", r.forget_classes},
            {"samples_per_class", r.samples_per_class},
            {"backprop_count", r.backprop_count},
            {"eval_forward_passes", r.eval_forward_passes},
            {"inexact_parameters", r.inexact_parameters},
            {"wall_time_seconds", r.wall_time},
            {"alpha", std::move(alpha)},
            {"notes", r.notes}};
}

inline json to_json(const eval::EvalReport& r) {
    return {{"dataset", r.dataset},
            {"method", r.method},
            {"forget_classes", r.forget_classes},
            {"a_r", r.a_r},
            {"a_f", r.a_f},
            {"e_f", r.e_f},
            {"forget_time_seconds", r.forget_time},
            {"backprop_count", r.backprop_count}};
}

inline json to_json(const eval::CurvePoint& p) {
    return {{"x", p.x}, {"mean", p.mean}, {"std", p.std}, {"seed_count", p.seed_count}, {"values", p.values},
            {"capped", p.capped}};
}

inline json to_json(const eval::FimStudy& s) {
    json curve = json::array();
    for (const auto& p : s.data_curve) {
        curve.push_back(to_json(p));
    }
    return {{"class_set", s.class_set}, {"mnemonic_error", s.mnemonic_error}, {"data_curve", std::move(curve)},
            {"notes", s.notes}};
}

inline json to_json(const std::vector<eval::LayerGradientMagnitude>& layers) {
    json out = json::array();
    for (const auto& m : layers) {
        out.push_back({{"layer", m.layer},
                       {"full", m.full},
                       {"forget", m.forget},
                       {"remain", m.remain},
                       {"forget_ratio", m.forget_ratio},
                       {"remain_ratio", m.remain_ratio}});
    }
    return out;
}

inline json to_json(const std::vector<eval::BackdoorPoint>& points) {
    json out = json::array();
    for (const auto& p : points) {
        out.push_back({{"ratio", p.ratio}, {"accuracy", p.accuracy}});
    }
    return out;
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

inline std::string epochs_csv(const train::TrainRecord& r) {
    std::string out = "epoch,train_loss,test_accuracy,replacements\n";
    for (const auto& e : r.epochs) {
        out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
               (e.test_accuracy ? format_double(*e.test_accuracy) : std::string()) + "," +
               std::to_string(e.replacements) + "\n";
    }
    return out;
}

inline std::string curve_csv(const std::vector<eval::CurvePoint>& curve) {
    std::string out = "x,mean,std,seed_count\n";
    for (const auto& p : curve) {
        out += format_double(p.x) + "," + format_double(p.mean) + "," + format_double(p.std) + "," +
               std::to_string(p.seed_count) + "\n";
    }
    return out;
}

}  // namespace mnemo::harness
