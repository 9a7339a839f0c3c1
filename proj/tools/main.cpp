// vmlab command line: the full generate/label/preprocess/train/evaluate
// pipeline plus the individual stages as scriptable subcommands.

#include "vmlab/errors.hpp"
#include "vmlab/pipeline.hpp"
#include "vmlab/rng.hpp"
#include "vmlab/viz.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace {

using namespace vmlab;

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

// flat `key=value` lines, `#` comments; unknown keys are errors
std::map<std::string, std::string> read_config_file(const std::string &path) {
    std::map<std::string, std::string> out;
    std::istringstream in(slurp(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos)
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(line_no, "expected key=value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

void apply_config_file(PipelineConfig &config, const std::string &path) {
    for (const auto &[key, value] : read_config_file(path)) {
        if (key == "out") {
            config.out_dir = value;
        } else if (key == "seed") {
            config.seed = std::stoull(value);
            config.hyper.seed = config.seed;
        } else if (key == "per_class") {
            config.per_class = std::stoull(value);
        } else if (key == "random_programs") {
            config.random_programs = std::stoi(value);
        } else if (key == "random_min_size") {
            config.random_min_size = std::stoi(value);
        } else if (key == "random_max_size") {
            config.random_max_size = std::stoi(value);
        } else if (key == "budget") {
            config.budget = std::stoi(value);
        } else if (key == "tokenizer") {
            auto mode = tokenizer_mode_from_name(value);
            if (!mode)
                throw std::invalid_argument("bad tokenizer '" + value + "'");
            config.tokenizer = *mode;
        } else if (key == "train_fraction") {
            config.split_spec.train_fraction = std::stod(value);
            config.split_spec.test_fraction = 1.0 - config.split_spec.train_fraction;
        } else if (key == "epochs") {
            config.hyper.epochs = std::stoi(value);
        } else if (key == "lr") {
            config.hyper.learning_rate = std::stod(value);
        } else if (key == "min_fanout") {
            config.labeler.min_fanout = std::stoi(value);
        } else if (key == "programs") {
            config.programs = split_list(value);
        } else if (key == "kinds") {
            config.kinds.clear();
            for (const auto &name : split_list(value)) {
                auto kind = dispatch_kind_from_name(name);
                if (!kind)
                    throw std::invalid_argument("bad dispatch kind '" + name + "'");
                config.kinds.push_back(*kind);
            }
        } else if (key == "opt_levels") {
            config.opt_levels.clear();
            for (const auto &o : split_list(value))
                config.opt_levels.push_back(std::stoi(o));
        } else if (key == "gate_macro_f1") {
            config.gate_macro_f1 = std::stod(value);
        } else if (key == "gate_main_accuracy") {
            config.gate_main_accuracy = std::stod(value);
        } else if (key == "gate_reduction") {
            config.gate_reduction = std::stod(value);
        } else {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }
}

// builtin name, `random:SEED:SIZE`, or a path to a program text file
SourceProgram resolve_program(const std::string &spec) {
    for (const auto &p : builtin_programs())
        if (p.name == spec)
            return p;
    if (spec.rfind("random:", 0) == 0) {
        auto rest = spec.substr(7);
        auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("expected random:SEED:SIZE");
        return random_program(std::stoull(rest.substr(0, colon)),
                              std::stoi(rest.substr(colon + 1)));
    }
    return program_from_text(slurp(spec));
}

DispatchKind resolve_kind(const std::string &name) {
    auto kind = dispatch_kind_from_name(name);
    if (!kind)
        throw std::invalid_argument("unknown dispatch kind '" + name + "'");
    return *kind;
}

TokenizerMode resolve_tokenizer(const std::string &name) {
    auto mode = tokenizer_mode_from_name(name);
    if (!mode)
        throw std::invalid_argument("unknown tokenizer '" + name + "'");
    return *mode;
}

void emit_or_print(const std::string &out_path, const std::string &content) {
    if (out_path.empty())
        std::cout << content;
    else
        spill(out_path, content);
}

int cmd_virtualize(const std::string &program_spec, const std::string &kind_name, int opt,
                   std::uint64_t seed, bool markers, const std::string &out_path) {
    SourceProgram program = resolve_program(program_spec);
    VmArtifact art = virtualize(program, resolve_kind(kind_name), opt, seed);
    CfgDocument doc = artifact_to_document(art);
    if (markers)
        doc.cfg = insert_markers(art);
    emit_or_print(out_path, emit_cfg(doc));
    return 0;
}

int cmd_label(const std::string &in_path, int min_fanout, const std::string &out_path) {
    CfgDocument doc = parse_cfg(slurp(in_path));
    LabelerParams params{min_fanout};
    RoleMap pred = label_structures(doc.cfg, params);

    CfgDocument out = doc;
    out.labels.clear();
    for (const auto &[id, role] : pred)
        out.labels[id].push_back(LabelSpan{role_name(role), -1, -1});

    std::ostringstream text;
    text << emit_cfg(out);
    if (!doc.labels.empty()) {
        // score against the truth labels carried by the input
        VmArtifact art;
        art.cfg = doc.cfg;
        art.truth = truth_from_document(doc);
        DetectionRow row = score_against_truth(pred, art);
        auto tick = [](bool b) { return b ? "yes" : "no"; };
        text << "# detection vmstart=" << tick(row.vm_start) << " dispatch=" << tick(row.dispatch)
             << " handler=" << tick(row.handler) << " vmend=" << tick(row.vm_end) << "\n";
    }
    emit_or_print(out_path, text.str());
    return 0;
}

int cmd_preprocess(const std::string &in_path, int budget, const std::string &tokenizer,
                   const std::string &out_path) {
    CfgDocument doc = parse_cfg(slurp(in_path));
    if (doc.labels.empty())
        throw std::invalid_argument(in_path + " carries no LABEL lines");
    const std::string *kind_name = doc.meta_value("kind");
    if (!kind_name)
        throw std::invalid_argument(in_path + " carries no `META kind`");
    const std::string *opt_str = doc.meta_value("opt");
    const std::string *seed_str = doc.meta_value("seed");

    VmArtifact art;
    art.cfg = doc.cfg;
    art.truth = truth_from_document(doc);
    art.kind = resolve_kind(*kind_name);
    art.opt_level = opt_str ? std::stoi(*opt_str) : 0;
    art.seed = seed_str ? std::stoull(*seed_str) : 0;

    auto segs = segments_for_artifact(art, resolve_tokenizer(tokenizer), budget);
    std::vector<DatasetRecord> records;
    records.reserve(segs.size());
    for (const auto &s : segs)
        records.push_back(record_from_segment(s));
    emit_or_print(out_path, records_to_jsonl(records));
    return 0;
}

int cmd_viz(const std::string &in_path, const std::string &labels, bool full,
            const std::string &out_path) {
    CfgDocument doc = parse_cfg(slurp(in_path));
    RoleMap roles;
    DotOptions options;
    if (full)
        options.max_instrs = 0;
    if (labels == "truth") {
        if (doc.labels.empty())
            throw std::invalid_argument(in_path + " carries no LABEL lines");
        VmArtifact art;
        art.cfg = doc.cfg;
        art.truth = truth_from_document(doc);
        for (const auto &b : doc.cfg.blocks) {
            auto role = pure_role(art, b.id);
            if (role) {
                roles[b.id] = *role;
            } else {
                // mixed block: first span's color, dashed border
                auto spans = art.truth.at(b.id);
                std::sort(spans.begin(), spans.end(),
                          [](const TruthSpan &x, const TruthSpan &y) { return x.begin < y.begin; });
                roles[b.id] = spans.front().role;
                options.dashed_ids.insert(b.id);
            }
        }
    } else if (labels == "pred") {
        roles = label_structures(doc.cfg);
    } else {
        throw std::invalid_argument("--labels must be pred or truth");
    }
    emit_or_print(out_path, emit_dot(doc.cfg, roles, ColorScheme{}, options));
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"virtualization-obfuscation lab: generate, label, and classify VM structures"};
    app.require_subcommand(1);

    std::string program_spec = "factorial", kind_name = "switch", tokenizer = "subword";
    std::string in_path, out_path, csv_path, model_path, data_path, labels = "pred";
    std::string out_dir, config_path;
    int opt = 0, min_fanout = 3, budget = 512, epochs = 5;
    int random_programs = 300, random_min = 48, random_max = 160;
    std::uint64_t seed = 42;
    std::size_t per_class = 600;
    double lr = 0.1, train_fraction = 0.8;
    bool markers = false, full = false;

    auto *virt = app.add_subcommand("virtualize", "generate one virtualized artifact");
    virt->add_option("--program", program_spec, "builtin name, random:SEED:SIZE, or file path");
    virt->add_option("--kind", kind_name, "switch|direct|indirect");
    virt->add_option("--opt", opt, "optimization level 0|1")->check(CLI::Range(0, 1));
    virt->add_option("--seed", seed, "artifact seed");
    virt->add_flag("--markers", markers, "insert role marker calls into the emitted blocks");
    virt->add_option("--out", out_path, "output file (stdout when omitted)");

    auto *label = app.add_subcommand("label", "predict structural roles for an interchange file");
    label->add_option("--in", in_path, "interchange file")->required();
    label->add_option("--min-fanout", min_fanout, "dispatcher fan-out threshold");
    label->add_option("--out", out_path, "output file (stdout when omitted)");

    auto *prep = app.add_subcommand("preprocess", "segment a labeled artifact into JSONL records");
    prep->add_option("--in", in_path, "interchange file with LABEL lines")->required();
    prep->add_option("--budget", budget, "token budget per segment");
    prep->add_option("--tokenizer", tokenizer, "subword|normalized");
    prep->add_option("--out", out_path, "output file (stdout when omitted)");

    auto *dataset = app.add_subcommand("dataset", "build a balanced train/test corpus");
    dataset->add_option("--out", out_dir, "output directory")->required();
    dataset->add_option("--per-class", per_class, "records per (main, sub) cell");
    dataset->add_option("--random-programs", random_programs, "generated programs in the corpus");
    dataset->add_option("--budget", budget, "token budget per segment");
    dataset->add_option("--tokenizer", tokenizer, "subword|normalized");
    dataset->add_option("--split", train_fraction, "train fraction")->check(CLI::Range(0.0, 1.0));
    dataset->add_option("--seed", seed, "corpus seed");

    auto *train_cmd = app.add_subcommand("train", "train the multi-task classifier");
    train_cmd->add_option("--data", data_path, "training JSONL")->required();
    train_cmd->add_option("--out", model_path, "model output path")->required();
    train_cmd->add_option("--epochs", epochs, "training epochs");
    train_cmd->add_option("--lr", lr, "learning rate");
    train_cmd->add_option("--seed", seed, "shuffle seed");

    auto *eval_cmd = app.add_subcommand("eval", "evaluate a model on a JSONL corpus");
    eval_cmd->add_option("--model", model_path, "model path")->required();
    eval_cmd->add_option("--data", data_path, "evaluation JSONL")->required();
    eval_cmd->add_option("--csv", csv_path, "also write the per-class table as CSV");

    auto *viz = app.add_subcommand("viz", "emit a color-coded DOT graph");
    viz->add_option("--in", in_path, "interchange file")->required();
    viz->add_option("--labels", labels, "pred|truth");
    viz->add_flag("--full", full, "render every instruction instead of the first three");
    viz->add_option("--out", out_path, "output file (stdout when omitted)");

    auto *bench = app.add_subcommand("bench-table", "detection matrix for the benchmark programs");
    bench->add_option("--seed", seed, "artifact seed");
    bench->add_option("--min-fanout", min_fanout, "dispatcher fan-out threshold");
    bench->add_option("--csv", csv_path, "also write the matrix as CSV");

    auto *pipe = app.add_subcommand("pipeline", "run every stage and write a manifest");
    pipe->add_option("--config", config_path, "flat key=value config file");
    auto *p_out = pipe->add_option("--out", out_dir, "output directory");
    auto *p_seed = pipe->add_option("--seed", seed, "base seed");
    auto *p_per_class = pipe->add_option("--per-class", per_class, "records per (main, sub) cell");
    auto *p_random =
        pipe->add_option("--random-programs", random_programs, "generated programs in the corpus");
    auto *p_min = pipe->add_option("--random-min-size", random_min, "smallest generated program");
    auto *p_max = pipe->add_option("--random-max-size", random_max, "largest generated program");
    auto *p_budget = pipe->add_option("--budget", budget, "token budget per segment");
    auto *p_tok = pipe->add_option("--tokenizer", tokenizer, "subword|normalized");
    auto *p_split =
        pipe->add_option("--split", train_fraction, "train fraction")->check(CLI::Range(0.0, 1.0));
    auto *p_epochs = pipe->add_option("--epochs", epochs, "training epochs");
    auto *p_lr = pipe->add_option("--lr", lr, "learning rate");
    auto *p_fanout = pipe->add_option("--min-fanout", min_fanout, "dispatcher fan-out threshold");

    CLI11_PARSE(app, argc, argv);

    try {
        if (virt->parsed())
            return cmd_virtualize(program_spec, kind_name, opt, seed, markers, out_path);
        if (label->parsed())
            return cmd_label(in_path, min_fanout, out_path);
        if (prep->parsed())
            return cmd_preprocess(in_path, budget, tokenizer, out_path);
        if (viz->parsed())
            return cmd_viz(in_path, labels, full, out_path);

        if (dataset->parsed() || pipe->parsed()) {
            PipelineConfig config;
            if (pipe->parsed() && !config_path.empty())
                apply_config_file(config, config_path);
            // explicit flags override config-file values
            auto passed = [&](const CLI::Option *o) { return o == nullptr || o->count() > 0; };
            if (dataset->parsed() || passed(p_seed)) {
                config.seed = seed;
                config.hyper.seed = seed;
            }
            if (dataset->parsed() || passed(p_per_class))
                config.per_class = per_class;
            if (dataset->parsed() || passed(p_random))
                config.random_programs = random_programs;
            if (pipe->parsed()) {
                if (passed(p_min))
                    config.random_min_size = random_min;
                if (passed(p_max))
                    config.random_max_size = random_max;
                if (passed(p_epochs))
                    config.hyper.epochs = epochs;
                if (passed(p_lr))
                    config.hyper.learning_rate = lr;
                if (passed(p_fanout))
                    config.labeler.min_fanout = min_fanout;
                if (passed(p_tok))
                    config.tokenizer = resolve_tokenizer(tokenizer);
                if (passed(p_budget))
                    config.budget = budget;
                if (passed(p_split)) {
                    config.split_spec.train_fraction = train_fraction;
                    config.split_spec.test_fraction = 1.0 - train_fraction;
                }
                if (passed(p_out))
                    config.out_dir = out_dir;
            } else {
                config.tokenizer = resolve_tokenizer(tokenizer);
                config.budget = budget;
                config.split_spec.train_fraction = train_fraction;
                config.split_spec.test_fraction = 1.0 - train_fraction;
                config.out_dir = out_dir;
            }
            validate(config);

            if (dataset->parsed()) {
                std::filesystem::create_directories(out_dir);
                auto artifacts = generate_artifacts(config);
                auto corpus = build_corpus(artifacts, config.per_class, config.budget,
                                           config.tokenizer, mix_seed(config.seed, "corpus"));
                SplitSpec split_spec = config.split_spec;
                split_spec.seed = mix_seed(config.seed, "split");
                auto [train_set, test_set] = split(corpus.records, split_spec);
                write_records(train_set, out_dir + "/train.jsonl");
                write_records(test_set, out_dir + "/test.jsonl");
                std::ostringstream manifest;
                for (const auto &cell : corpus.cells)
                    manifest << dispatch_kind_name(cell.main_label) << "."
                             << role_name(cell.sub_label) << " available=" << cell.available
                             << " selected=" << cell.selected << "\n";
                manifest << "train " << train_set.size() << "\n";
                manifest << "test " << test_set.size() << "\n";
                spill(out_dir + "/manifest.txt", manifest.str());
                std::cout << manifest.str();
                return 0;
            }

            PipelineResult result = run_pipeline(config);
            std::cout << result.manifest;
            if (!result.ok) {
                std::cerr << "pipeline gates failed\n";
                return 1;
            }
            return 0;
        }

        if (train_cmd->parsed()) {
            auto records = read_records(data_path);
            TrainMeta hyper{seed, epochs, lr};
            Model model = train(records, FeatureConfig{}, hyper);
            save_model(model, model_path);
            std::cout << "trained on " << records.size() << " records -> " << model_path << "\n";
            return 0;
        }
        if (eval_cmd->parsed()) {
            Model model = load_model(model_path);
            auto records = read_records(data_path);
            EvalReport report = evaluate(model, records);
            std::cout << report_to_text(report);
            if (!csv_path.empty())
                spill(csv_path, report_to_csv(report));
            return 0;
        }
        if (bench->parsed()) {
            auto cells = bench_rows(seed, LabelerParams{min_fanout});
            std::cout << bench_table_text(cells);
            if (!csv_path.empty())
                spill(csv_path, bench_table_csv(cells));
            return 0;
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
