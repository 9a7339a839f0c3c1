#include <doctest.h>

#include "support.hpp"
#include "vmlab/classifier.hpp"
#include "vmlab/errors.hpp"

#include <cmath>

using namespace vmlab;

namespace {

DatasetRecord rec(DispatchKind kind, Role role, std::vector<std::string> tokens,
                  const std::string &id) {
    DatasetRecord r;
    r.id = id;
    r.main_label = kind;
    r.sub_label = role;
    r.tokens = std::move(tokens);
    r.meta = RecordMeta{"p", 0, 0, 0};
    return r;
}

// small linearly separable corpus: each (kind, role) pair has its own token
std::vector<DatasetRecord> toy_corpus(int per_cell) {
    std::vector<DatasetRecord> records;
    int n = 0;
    for (DispatchKind kind : all_dispatch_kinds())
        for (Role role : all_roles())
            for (int i = 0; i < per_cell; ++i) {
                std::vector<std::string> toks = {"k" + dispatch_kind_name(kind),
                                                 "r" + role_name(role),
                                                 "w" + std::to_string(i % 3)};
                records.push_back(rec(kind, role, toks, "id" + std::to_string(n++)));
            }
    return records;
}

} // namespace

TEST_CASE("featurize: empty token list is the zero vector") {
    CHECK(featurize({}, FeatureConfig{}).empty());
}

TEST_CASE("featurize: unigrams and bigrams with total mass three") {
    auto x = featurize({"a", "b"}, FeatureConfig{});
    CHECK(x.size() == 3); // {a}, {b}, {a b}
    double mass = 0;
    for (const auto &[bucket, v] : x) {
        (void)bucket;
        mass += std::abs(v);
    }
    CHECK(mass == doctest::Approx(3.0));
}

TEST_CASE("featurize validates its configuration") {
    FeatureConfig bad_dim;
    bad_dim.hash_dim = 300;
    CHECK_THROWS_AS(featurize({"a"}, bad_dim), std::invalid_argument);
    FeatureConfig no_orders;
    no_orders.ngram_orders = {};
    CHECK_THROWS_AS(featurize({"a"}, no_orders), std::invalid_argument);
}

TEST_CASE("featurize is deterministic across calls") {
    std::vector<std::string> toks = {"load", "t1", "code", "vpc", "7"};
    CHECK(featurize(toks, FeatureConfig{}) == featurize(toks, FeatureConfig{}));
}

TEST_CASE("hash collisions stay near the birthday estimate") {
    FeatureConfig config;
    std::set<std::uint32_t> buckets;
    const int m = 100000;
    for (int i = 0; i < m; ++i) {
        auto x = featurize({"tok" + std::to_string(i)}, config);
        REQUIRE(x.size() == 1);
        buckets.insert(x[0].first);
    }
    double d = static_cast<double>(config.hash_dim);
    double expected_distinct = d * (1.0 - std::pow(1.0 - 1.0 / d, m));
    double got_collisions = m - static_cast<double>(buckets.size());
    double expected_collisions = m - expected_distinct;
    CHECK(std::abs(got_collisions - expected_collisions) / expected_collisions < 0.10);
}

TEST_CASE("f1 arithmetic") {
    CHECK(f1_score(0.9983, 0.9993) == doctest::Approx(0.9988).epsilon(1e-4));
    CHECK(f1_score(1.0, 1.0) == doctest::Approx(1.0));
    CHECK(f1_score(0.0, 0.0) == 0.0);
    CHECK(f1_score(0.5, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("single-class degenerate input trains and predicts that class") {
    std::vector<DatasetRecord> records;
    for (int i = 0; i < 8; ++i)
        records.push_back(rec(DispatchKind::Direct, Role::VmEnd,
                              {"alpha", "beta", std::to_string(i)}, "r" + std::to_string(i)));
    Model model = train(records);
    int hits = 0;
    for (const auto &r : records)
        if (predict(model, r.tokens).sub == Role::VmEnd)
            ++hits;
    CHECK(hits == 8);
    auto report = evaluate(model, records);
    CHECK(report.sub_accuracy == doctest::Approx(1.0));
}

TEST_CASE("training is bit-deterministic per seed") {
    auto records = toy_corpus(4);
    Model a = train(records);
    Model b = train(records);
    CHECK(a.main_weights == b.main_weights);
    CHECK(a.sub_weights == b.sub_weights);
    CHECK(a.main_bias == b.main_bias);
    CHECK(a.sub_bias == b.sub_bias);

    TrainMeta other;
    other.seed = 43;
    Model c = train(records, FeatureConfig{}, other);
    CHECK(a.sub_weights != c.sub_weights);
}

TEST_CASE("training is independent of input record order") {
    auto records = toy_corpus(4);
    auto reversed = records;
    std::reverse(reversed.begin(), reversed.end());
    Model a = train(records);
    Model b = train(reversed);
    CHECK(a.main_weights == b.main_weights);
    CHECK(a.sub_weights == b.sub_weights);
}

TEST_CASE("analytic gradients match central finite differences") {
    auto records = toy_corpus(1); // 18 records; use the first 10
    records.resize(10);

    Model model = train(records, FeatureConfig{}, TrainMeta{42, 1, 0.1});

    // analytic full-batch gradient of the summed softmax losses
    auto softmax_probs = [](std::vector<double> z) {
        double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0;
        for (auto &v : z) {
            v = std::exp(v - zmax);
            sum += v;
        }
        for (auto &v : z)
            v /= sum;
        return z;
    };
    const std::uint32_t dim = model.config.hash_dim;
    std::map<std::pair<int, std::uint32_t>, double> main_grad, sub_grad;
    for (const auto &r : records) {
        auto x = featurize(r.tokens, model.config);
        std::vector<double> zm(kDispatchKindCount), zs(kRoleCount);
        for (int c = 0; c < kDispatchKindCount; ++c) {
            zm[c] = model.main_bias[static_cast<std::size_t>(c)];
            for (auto &[bucket, v] : x)
                zm[c] += model.main_weights[static_cast<std::size_t>(c) * dim + bucket] * v;
        }
        for (int c = 0; c < kRoleCount; ++c) {
            zs[c] = model.sub_bias[static_cast<std::size_t>(c)];
            for (auto &[bucket, v] : x)
                zs[c] += model.sub_weights[static_cast<std::size_t>(c) * dim + bucket] * v;
        }
        auto pm = softmax_probs(zm);
        auto ps = softmax_probs(zs);
        for (int c = 0; c < kDispatchKindCount; ++c) {
            double err = pm[c] - (c == static_cast<int>(r.main_label) ? 1.0 : 0.0);
            for (auto &[bucket, v] : x)
                main_grad[{c, bucket}] += err * v;
        }
        for (int c = 0; c < kRoleCount; ++c) {
            double err = ps[c] - (c == static_cast<int>(r.sub_label) ? 1.0 : 0.0);
            for (auto &[bucket, v] : x)
                sub_grad[{c, bucket}] += err * v;
        }
    }

    const double h = 1e-5;
    int checked = 0;
    for (const auto &[key, g] : main_grad) {
        if (checked >= 6)
            break;
        auto idx = static_cast<std::size_t>(key.first) * dim + key.second;
        Model plus = model, minus = model;
        plus.main_weights[idx] += h;
        minus.main_weights[idx] -= h;
        double numeric = (total_loss(plus, records) - total_loss(minus, records)) / (2 * h);
        REQUIRE(std::abs(numeric - g) / std::max(1.0, std::abs(g)) < 1e-4);
        ++checked;
    }
    for (const auto &[key, g] : sub_grad) {
        if (checked >= 12)
            break;
        auto idx = static_cast<std::size_t>(key.first) * dim + key.second;
        Model plus = model, minus = model;
        plus.sub_weights[idx] += h;
        minus.sub_weights[idx] -= h;
        double numeric = (total_loss(plus, records) - total_loss(minus, records)) / (2 * h);
        REQUIRE(std::abs(numeric - g) / std::max(1.0, std::abs(g)) < 1e-4);
        ++checked;
    }
    CHECK(checked == 12);
}

TEST_CASE("training accuracy beats the majority baseline") {
    auto records = toy_corpus(6);
    Model model = train(records);
    auto report = evaluate(model, records);
    double majority = 1.0 / 6.0; // balanced cells
    CHECK(report.sub_accuracy >= majority);
    CHECK(report.sub_accuracy == doctest::Approx(1.0)); // separable by construction
}

TEST_CASE("prediction on an empty token list is defined") {
    auto records = toy_corpus(2);
    Model model = train(records);
    auto pred = predict(model, {});
    CHECK(static_cast<int>(pred.main) >= 0);
    CHECK(static_cast<int>(pred.sub) >= 0);
}

TEST_CASE("evaluation matches a hand-built confusion matrix on 30 records") {
    // five truth records per class; mistakes planted by hand:
    //   HANDLER: one predicted VM        VM: two predicted HANDLER
    //   VM-END: one predicted NON-VM     others perfect
    std::vector<EvalOutcome> outcomes;
    auto add = [&](Role truth, Role pred, DispatchKind mt, DispatchKind mp) {
        outcomes.push_back(EvalOutcome{mt, mp, truth, pred});
    };
    for (int i = 0; i < 5; ++i)
        add(Role::DispatchStart, Role::DispatchStart, DispatchKind::Switch, DispatchKind::Switch);
    for (int i = 0; i < 4; ++i)
        add(Role::Handler, Role::Handler, DispatchKind::Direct, DispatchKind::Direct);
    add(Role::Handler, Role::Vm, DispatchKind::Direct, DispatchKind::Indirect);
    for (int i = 0; i < 3; ++i)
        add(Role::Vm, Role::Vm, DispatchKind::Indirect, DispatchKind::Indirect);
    for (int i = 0; i < 2; ++i)
        add(Role::Vm, Role::Handler, DispatchKind::Indirect, DispatchKind::Direct);
    for (int i = 0; i < 5; ++i)
        add(Role::VmStart, Role::VmStart, DispatchKind::Switch, DispatchKind::Switch);
    for (int i = 0; i < 4; ++i)
        add(Role::VmEnd, Role::VmEnd, DispatchKind::Switch, DispatchKind::Switch);
    add(Role::VmEnd, Role::NonVm, DispatchKind::Switch, DispatchKind::Switch);
    for (int i = 0; i < 5; ++i)
        add(Role::NonVm, Role::NonVm, DispatchKind::Direct, DispatchKind::Direct);
    REQUIRE(outcomes.size() == 30);

    auto report = evaluate_outcomes(outcomes);

    // hand-computed expectations
    auto cls = [&](Role r) { return report.per_class[static_cast<std::size_t>(r)]; };
    CHECK(cls(Role::DispatchStart).precision == 1.0);
    CHECK(cls(Role::DispatchStart).recall == 1.0);
    CHECK(cls(Role::Handler).precision == 4.0 / 6.0);
    CHECK(cls(Role::Handler).recall == 4.0 / 5.0);
    CHECK(cls(Role::Handler).f1 ==
          doctest::Approx(2.0 * (4.0 / 6.0) * (4.0 / 5.0) / (4.0 / 6.0 + 4.0 / 5.0)));
    CHECK(cls(Role::Vm).precision == 3.0 / 4.0);
    CHECK(cls(Role::Vm).recall == 3.0 / 5.0);
    CHECK(cls(Role::VmEnd).precision == 1.0);
    CHECK(cls(Role::VmEnd).recall == 4.0 / 5.0);
    CHECK(cls(Role::NonVm).precision == 5.0 / 6.0);
    CHECK(cls(Role::NonVm).recall == 1.0);
    for (Role r : all_roles())
        CHECK(cls(r).support == 5);

    CHECK(report.sub_accuracy == doctest::Approx(26.0 / 30.0));
    CHECK(report.main_accuracy == doctest::Approx(27.0 / 30.0));

    double macro = 0;
    for (Role r : all_roles())
        macro += cls(r).f1;
    CHECK(report.macro_f1 == doctest::Approx(macro / 6.0));
    std::size_t support_sum = 0;
    for (Role r : all_roles())
        support_sum += cls(r).support;
    CHECK(support_sum == report.count);
}

TEST_CASE("precision of a never-predicted class reports zero with a flag") {
    std::vector<EvalOutcome> outcomes = {
        EvalOutcome{DispatchKind::Switch, DispatchKind::Switch, Role::Handler, Role::Vm},
        EvalOutcome{DispatchKind::Switch, DispatchKind::Switch, Role::Vm, Role::Vm},
    };
    auto report = evaluate_outcomes(outcomes);
    const auto &handler = report.per_class[static_cast<std::size_t>(Role::Handler)];
    CHECK_FALSE(handler.precision_defined);
    CHECK(handler.precision == 0.0);
    CHECK(handler.f1 == 0.0);
}

TEST_CASE("model persistence round trip") {
    testsupport::TempDir dir("vmlab_model_test");
    auto records = toy_corpus(3);
    Model model = train(records);
    auto path = (dir.path / "model.bin").string();
    save_model(model, path);
    Model loaded = load_model(path);
    CHECK(loaded.main_weights == model.main_weights);
    CHECK(loaded.sub_weights == model.sub_weights);
    CHECK(loaded.main_bias == model.main_bias);
    CHECK(loaded.sub_bias == model.sub_bias);
    CHECK(loaded.config.hash_dim == model.config.hash_dim);
    CHECK(loaded.train_meta.seed == model.train_meta.seed);
    for (const auto &r : records) {
        auto a = predict(model, r.tokens);
        auto b = predict(loaded, r.tokens);
        CHECK(a.main == b.main);
        CHECK(a.sub == b.sub);
    }
    CHECK_THROWS(load_model((dir.path / "missing.bin").string()));
}

TEST_CASE("report rendering includes every class row") {
    auto records = toy_corpus(2);
    Model model = train(records);
    auto report = evaluate(model, records);
    auto text = report_to_text(report);
    auto csv = report_to_csv(report);
    for (Role r : all_roles()) {
        CHECK(text.find(role_name(r)) != std::string::npos);
        CHECK(csv.find(role_name(r)) != std::string::npos);
    }
    CHECK(testsupport::count_lines_with_prefix(csv, "") == 8); // header + 6 classes + macro
}
