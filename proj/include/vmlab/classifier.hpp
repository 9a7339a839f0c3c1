#pragma once

// Deterministic multi-task linear classifier over hashed token n-grams: one
// softmax head for the dispatch kind, one for the block role, shared feature
// space, per-feature adaptive-gradient updates.

#include "vmlab/dataset.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace vmlab {

struct FeatureConfig {
    std::vector<int> ngram_orders = {1, 2};
    std::uint32_t hash_dim = 1u << 18; // power of two
    bool signed_hashing = true;
};

// sorted by bucket, one entry per bucket
using FeatureVector = std::vector<std::pair<std::uint32_t, double>>;

FeatureVector featurize(const std::vector<std::string> &tokens, const FeatureConfig &config);

struct TrainMeta {
    std::uint64_t seed = 42;
    int epochs = 5;
    double learning_rate = 0.1;
};

struct Model {
    FeatureConfig config;
    TrainMeta train_meta;
    // row-major [class][bucket]
    std::vector<double> main_weights; // 3 x hash_dim
    std::array<double, kDispatchKindCount> main_bias{};
    std::vector<double> sub_weights; // 6 x hash_dim
    std::array<double, kRoleCount> sub_bias{};
};

Model train(const std::vector<DatasetRecord> &records, const FeatureConfig &config = {},
            const TrainMeta &hyper = {});

struct Prediction {
    DispatchKind main = DispatchKind::Switch;
    Role sub = Role::NonVm;
    std::array<double, kDispatchKindCount> main_scores{};
    std::array<double, kRoleCount> sub_scores{};
};

Prediction predict(const Model &model, const std::vector<std::string> &tokens);

// Summed cross-entropy of both heads; the training objective, exposed for
// gradient checking and monitoring.
double total_loss(const Model &model, const std::vector<DatasetRecord> &records);

struct ClassMetrics {
    Role cls = Role::NonVm;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::size_t support = 0;
    bool precision_defined = true; // false when the class was never predicted
};

struct EvalReport {
    std::array<ClassMetrics, kRoleCount> per_class;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double main_accuracy = 0;
    double sub_accuracy = 0;
    std::size_t count = 0;
};

// 2pr/(p+r), zero when p+r == 0
double f1_score(double precision, double recall);

struct EvalOutcome {
    DispatchKind main_truth = DispatchKind::Switch;
    DispatchKind main_pred = DispatchKind::Switch;
    Role sub_truth = Role::NonVm;
    Role sub_pred = Role::NonVm;
};

// metric arithmetic over already-made predictions
EvalReport evaluate_outcomes(const std::vector<EvalOutcome> &outcomes);

EvalReport evaluate(const Model &model, const std::vector<DatasetRecord> &test_records);

std::string report_to_text(const EvalReport &report);
std::string report_to_csv(const EvalReport &report);

void save_model(const Model &model, const std::string &path);
Model load_model(const std::string &path);

} // namespace vmlab
