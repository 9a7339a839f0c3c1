#include "vmlab/classifier.hpp"
#include "vmlab/errors.hpp"
#include "vmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vmlab {

namespace {

void check_config(const FeatureConfig &config) {
    if (config.ngram_orders.empty())
        throw std::invalid_argument("ngram_orders must be non-empty");
    for (int k : config.ngram_orders)
        if (k < 1)
            throw std::invalid_argument("ngram order must be >= 1");
    if (config.hash_dim == 0 || (config.hash_dim & (config.hash_dim - 1)) != 0)
        throw std::invalid_argument("hash_dim must be a power of two");
}

} // namespace

FeatureVector featurize(const std::vector<std::string> &tokens, const FeatureConfig &config) {
    check_config(config);
    FeatureVector out;
    for (int k : config.ngram_orders) {
        if (tokens.size() < static_cast<std::size_t>(k))
            continue;
        for (std::size_t i = 0; i + static_cast<std::size_t>(k) <= tokens.size(); ++i) {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
                h = fnv1a(tokens[i + j], h);
                h = fnv1a_byte(0x1f, h);
            }
            auto bucket = static_cast<std::uint32_t>(h & (config.hash_dim - 1));
            double sign = (config.signed_hashing && (h >> 63)) ? -1.0 : 1.0;
            out.emplace_back(bucket, sign);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const auto &a, const auto &b) { return a.first < b.first; });
    FeatureVector merged;
    for (const auto &[bucket, v] : out) {
        if (!merged.empty() && merged.back().first == bucket)
            merged.back().second += v;
        else
            merged.emplace_back(bucket, v);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const auto &e) { return e.second == 0.0; }),
                 merged.end());
    return merged;
}

namespace {

template <std::size_t C>
std::array<double, C> head_scores(const std::vector<double> &weights,
                                  const std::array<double, C> &bias, std::uint32_t dim,
                                  const FeatureVector &x) {
    std::array<double, C> z = bias;
    for (const auto &[bucket, v] : x)
        for (std::size_t c = 0; c < C; ++c)
            z[c] += weights[c * dim + bucket] * v;
    return z;
}

template <std::size_t C> std::array<double, C> softmax(std::array<double, C> z) {
    double zmax = z[0];
    for (double v : z)
        zmax = std::max(zmax, v);
    double sum = 0;
    for (auto &v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (auto &v : z)
        v /= sum;
    return z;
}

template <std::size_t C> std::size_t argmax(const std::array<double, C> &z) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
        if (z[c] > z[best])
            best = c;
    return best;
}

// one adagrad step for one head on one example
template <std::size_t C>
void head_update(std::vector<double> &weights, std::array<double, C> &bias,
                 std::vector<double> &grad_acc, std::array<double, C> &bias_acc,
                 std::uint32_t dim, const FeatureVector &x, std::size_t label, double lr) {
    constexpr double eps = 1e-8;
    auto p = softmax(head_scores(weights, bias, dim, x));
    for (std::size_t c = 0; c < C; ++c) {
        double err = p[c] - (c == label ? 1.0 : 0.0);
        for (const auto &[bucket, v] : x) {
            double g = err * v;
            double &acc = grad_acc[c * dim + bucket];
            acc += g * g;
            weights[c * dim + bucket] -= lr * g / std::sqrt(acc + eps);
        }
        bias_acc[c] += err * err;
        bias[c] -= lr * err / std::sqrt(bias_acc[c] + eps);
    }
}

} // namespace

Model train(const std::vector<DatasetRecord> &records, const FeatureConfig &config,
            const TrainMeta &hyper) {
    if (records.empty())
        throw EmptyInput("train: no records");
    check_config(config);

    Model model;
    model.config = config;
    model.train_meta = hyper;
    const std::uint32_t dim = config.hash_dim;
    model.main_weights.assign(static_cast<std::size_t>(kDispatchKindCount) * dim, 0.0);
    model.sub_weights.assign(static_cast<std::size_t>(kRoleCount) * dim, 0.0);

    // canonical order first so training is independent of input order
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (records[a].id != records[b].id)
            return records[a].id < records[b].id;
        return a < b;
    });

    std::vector<FeatureVector> features(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        features[i] = featurize(records[i].tokens, config);

    std::vector<double> main_acc(model.main_weights.size(), 0.0);
    std::vector<double> sub_acc(model.sub_weights.size(), 0.0);
    std::array<double, kDispatchKindCount> main_bias_acc{};
    std::array<double, kRoleCount> sub_bias_acc{};

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::vector<std::size_t> perm = order;
        Rng rng(mix_seed(hyper.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(perm);
        for (std::size_t i : perm) {
            const auto &x = features[i];
            head_update(model.main_weights, model.main_bias, main_acc, main_bias_acc, dim, x,
                        static_cast<std::size_t>(records[i].main_label), hyper.learning_rate);
            head_update(model.sub_weights, model.sub_bias, sub_acc, sub_bias_acc, dim, x,
                        static_cast<std::size_t>(records[i].sub_label), hyper.learning_rate);
        }
    }
    return model;
}

Prediction predict(const Model &model, const std::vector<std::string> &tokens) {
    auto x = featurize(tokens, model.config);
    Prediction pred;
    pred.main_scores = head_scores(model.main_weights, model.main_bias, model.config.hash_dim, x);
    pred.sub_scores = head_scores(model.sub_weights, model.sub_bias, model.config.hash_dim, x);
    pred.main = static_cast<DispatchKind>(argmax(pred.main_scores));
    pred.sub = static_cast<Role>(argmax(pred.sub_scores));
    return pred;
}

double total_loss(const Model &model, const std::vector<DatasetRecord> &records) {
    double loss = 0;
    for (const auto &r : records) {
        auto x = featurize(r.tokens, model.config);
        auto pm = softmax(head_scores(model.main_weights, model.main_bias, model.config.hash_dim, x));
        auto ps = softmax(head_scores(model.sub_weights, model.sub_bias, model.config.hash_dim, x));
        loss -= std::log(std::max(pm[static_cast<std::size_t>(r.main_label)], 1e-300));
        loss -= std::log(std::max(ps[static_cast<std::size_t>(r.sub_label)], 1e-300));
    }
    return loss;
}

double f1_score(double precision, double recall) {
    double denom = precision + recall;
    return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

EvalReport evaluate_outcomes(const std::vector<EvalOutcome> &outcomes) {
    if (outcomes.empty())
        throw EmptyInput("evaluate: no outcomes");

    EvalReport rep;
    rep.count = outcomes.size();

    std::array<std::array<std::size_t, kRoleCount>, kRoleCount> confusion{}; // [truth][pred]
    std::size_t main_hits = 0, sub_hits = 0;
    for (const auto &o : outcomes) {
        confusion[static_cast<std::size_t>(o.sub_truth)][static_cast<std::size_t>(o.sub_pred)]++;
        if (o.main_truth == o.main_pred)
            ++main_hits;
        if (o.sub_truth == o.sub_pred)
            ++sub_hits;
    }
    rep.main_accuracy = static_cast<double>(main_hits) / static_cast<double>(outcomes.size());
    rep.sub_accuracy = static_cast<double>(sub_hits) / static_cast<double>(outcomes.size());

    for (std::size_t c = 0; c < kRoleCount; ++c) {
        std::size_t tp = confusion[c][c];
        std::size_t fp = 0, fn = 0, support = 0;
        for (std::size_t o = 0; o < kRoleCount; ++o) {
            if (o != c) {
                fp += confusion[o][c];
                fn += confusion[c][o];
            }
            support += confusion[c][o];
        }
        ClassMetrics &m = rep.per_class[c];
        m.cls = static_cast<Role>(c);
        m.support = support;
        m.precision_defined = tp + fp > 0;
        m.precision = m.precision_defined ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        m.f1 = f1_score(m.precision, m.recall);
        rep.macro_precision += m.precision;
        rep.macro_recall += m.recall;
        rep.macro_f1 += m.f1;
    }
    rep.macro_precision /= kRoleCount;
    rep.macro_recall /= kRoleCount;
    rep.macro_f1 /= kRoleCount;
    return rep;
}

EvalReport evaluate(const Model &model, const std::vector<DatasetRecord> &test_records) {
    if (test_records.empty())
        throw EmptyInput("evaluate: no records");
    std::vector<EvalOutcome> outcomes;
    outcomes.reserve(test_records.size());
    for (const auto &r : test_records) {
        auto pred = predict(model, r.tokens);
        outcomes.push_back(EvalOutcome{r.main_label, pred.main, r.sub_label, pred.sub});
    }
    return evaluate_outcomes(outcomes);
}

std::string report_to_text(const EvalReport &report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %10s %10s\n", "Class", "Precision",
                  "Recall", "F1-score", "Support");
    out << line;
    for (const auto &m : report.per_class) {
        std::snprintf(line, sizeof(line), "%-16s %10.4f %10.4f %10.4f %10zu%s\n",
                      role_name(m.cls).c_str(), m.precision, m.recall, m.f1, m.support,
                      m.precision_defined ? "" : "  (no predictions)");
        out << line;
    }
    std::snprintf(line, sizeof(line), "%-16s %10.4f %10.4f %10.4f %10zu\n", "Macro avg",
                  report.macro_precision, report.macro_recall, report.macro_f1, report.count);
    out << line;
    std::snprintf(line, sizeof(line), "main-label accuracy %.4f\nsub-label accuracy  %.4f\n",
                  report.main_accuracy, report.sub_accuracy);
    out << line;
    return out.str();
}

std::string report_to_csv(const EvalReport &report) {
    std::ostringstream out;
    out << "class,precision,recall,f1,support\n";
    char line[160];
    for (const auto &m : report.per_class) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%zu\n", role_name(m.cls).c_str(),
                      m.precision, m.recall, m.f1, m.support);
        out << line;
    }
    std::snprintf(line, sizeof(line), "macro,%.6f,%.6f,%.6f,%zu\n", report.macro_precision,
                  report.macro_recall, report.macro_f1, report.count);
    out << line;
    return out.str();
}

namespace {

constexpr char kMagic[4] = {'V', 'M', 'L', 'B'};
constexpr std::uint32_t kVersion = 1;

template <typename T> void put(std::ostream &out, const T &v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T> T get(std::istream &in) {
    T v{};
    in.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!in)
        throw std::runtime_error("truncated model file");
    return v;
}

void put_doubles(std::ostream &out, const double *p, std::size_t n) {
    out.write(reinterpret_cast<const char *>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream &in, double *p, std::size_t n) {
    in.read(reinterpret_cast<char *>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in)
        throw std::runtime_error("truncated model file");
}

} // namespace

void save_model(const Model &model, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, model.config.hash_dim);
    put(out, static_cast<std::uint32_t>(model.config.ngram_orders.size()));
    for (int k : model.config.ngram_orders)
        put(out, static_cast<std::uint32_t>(k));
    put(out, static_cast<std::uint8_t>(model.config.signed_hashing ? 1 : 0));
    put(out, model.train_meta.seed);
    put(out, static_cast<std::uint32_t>(model.train_meta.epochs));
    put(out, model.train_meta.learning_rate);
    put_doubles(out, model.main_weights.data(), model.main_weights.size());
    put_doubles(out, model.main_bias.data(), model.main_bias.size());
    put_doubles(out, model.sub_weights.data(), model.sub_weights.size());
    put_doubles(out, model.sub_bias.data(), model.sub_bias.size());
}

Model load_model(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a model file: " + path);
    if (get<std::uint32_t>(in) != kVersion)
        throw std::runtime_error("unsupported model version");
    Model model;
    model.config.hash_dim = get<std::uint32_t>(in);
    auto n_orders = get<std::uint32_t>(in);
    model.config.ngram_orders.clear();
    for (std::uint32_t i = 0; i < n_orders; ++i)
        model.config.ngram_orders.push_back(static_cast<int>(get<std::uint32_t>(in)));
    model.config.signed_hashing = get<std::uint8_t>(in) != 0;
    model.train_meta.seed = get<std::uint64_t>(in);
    model.train_meta.epochs = static_cast<int>(get<std::uint32_t>(in));
    model.train_meta.learning_rate = get<double>(in);
    check_config(model.config);
    model.main_weights.resize(static_cast<std::size_t>(kDispatchKindCount) * model.config.hash_dim);
    model.sub_weights.resize(static_cast<std::size_t>(kRoleCount) * model.config.hash_dim);
    get_doubles(in, model.main_weights.data(), model.main_weights.size());
    get_doubles(in, model.main_bias.data(), model.main_bias.size());
    get_doubles(in, model.sub_weights.data(), model.sub_weights.size());
    get_doubles(in, model.sub_bias.data(), model.sub_bias.size());
    return model;
}

} // namespace vmlab
