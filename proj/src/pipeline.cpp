#include "vmlab/pipeline.hpp"
#include "vmlab/errors.hpp"
#include "vmlab/rng.hpp"
#include "vmlab/viz.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace vmlab {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
}

std::string lower_kind(DispatchKind k) {
    std::string s = dispatch_kind_name(k);
    for (auto &c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

const char *mark(bool ok) { return ok ? "ok" : "miss"; }

} // namespace

void validate(const PipelineConfig &config) {
    if (config.kinds.empty())
        throw std::invalid_argument("no dispatch kinds selected");
    if (config.opt_levels.empty())
        throw std::invalid_argument("no opt levels selected");
    for (int o : config.opt_levels)
        if (o != 0 && o != 1)
            throw std::invalid_argument("opt levels must be 0 or 1");
    if (config.programs.empty() && config.random_programs == 0)
        throw std::invalid_argument("no programs selected");
    if (config.random_programs < 0)
        throw std::invalid_argument("random_programs must be >= 0");
    if (config.random_min_size < 8 || config.random_max_size > 512 ||
        config.random_min_size > config.random_max_size)
        throw std::invalid_argument("random size range must lie inside [8, 512]");
    if (config.budget < 8)
        throw std::invalid_argument("budget must be >= 8");
    if (config.per_class == 0)
        throw std::invalid_argument("per_class must be > 0");
}

std::uint64_t artifact_seed(std::uint64_t base, const std::string &program, DispatchKind kind,
                            int opt) {
    return mix_seed(base, program + "/" + dispatch_kind_name(kind) + "/" + std::to_string(opt));
}

std::vector<BenchCell> bench_rows(std::uint64_t seed, const LabelerParams &params) {
    std::vector<BenchCell> cells;
    for (const auto &program : builtin_programs()) {
        for (DispatchKind kind : all_dispatch_kinds()) {
            for (int opt : {0, 1}) {
                auto art = virtualize(program, kind, opt,
                                      artifact_seed(seed, program.name, kind, opt));
                auto pred = label_structures(art.cfg, params);
                cells.push_back(BenchCell{program.name, kind, opt,
                                          score_against_truth(pred, art)});
            }
        }
    }
    return cells;
}

namespace {

const BenchCell &cell_at(const std::vector<BenchCell> &cells, const std::string &program,
                         DispatchKind kind, int opt) {
    for (const auto &c : cells)
        if (c.program == program && c.kind == kind && c.opt == opt)
            return c;
    throw std::out_of_range("bench cell missing");
}

bool role_bit(const DetectionRow &row, int role_idx) {
    switch (role_idx) {
    case 0: return row.vm_start;
    case 1: return row.dispatch;
    case 2: return row.handler;
    default: return row.vm_end;
    }
}

const std::array<std::string, 4> kBenchRoles = {"VM-START", "DISPATCH", "HANDLER", "VM-END"};

} // namespace

std::string bench_table_text(const std::vector<BenchCell> &cells) {
    std::set<std::string> program_set;
    for (const auto &c : cells)
        program_set.insert(c.program);

    std::ostringstream out;
    char line[200];
    std::snprintf(line, sizeof(line), "%-12s %-14s | %-8s %-8s %-8s | %-8s %-8s %-8s\n",
                  "program", "role", "opt0/sw", "opt0/di", "opt0/in", "opt1/sw", "opt1/di",
                  "opt1/in");
    out << line;
    out << std::string(92, '-') << "\n";
    for (const auto &program : program_set) {
        for (int role = 0; role < 4; ++role) {
            std::ostringstream row;
            std::snprintf(line, sizeof(line), "%-12s %-14s |", program.c_str(),
                          kBenchRoles[static_cast<std::size_t>(role)].c_str());
            row << line;
            for (int opt : {0, 1}) {
                for (DispatchKind kind : all_dispatch_kinds()) {
                    bool ok = role_bit(cell_at(cells, program, kind, opt).row, role);
                    row << " " << (ok ? "✓" : "✗") << std::string(7, ' ');
                    if (kind == DispatchKind::Indirect && opt == 0)
                        row << "|";
                }
            }
            out << row.str() << "\n";
        }
    }
    return out.str();
}

std::string bench_table_csv(const std::vector<BenchCell> &cells) {
    std::set<std::string> program_set;
    for (const auto &c : cells)
        program_set.insert(c.program);
    std::ostringstream out;
    out << "program,role,opt0_switch,opt0_direct,opt0_indirect,opt1_switch,opt1_direct,"
           "opt1_indirect\n";
    for (const auto &program : program_set) {
        for (int role = 0; role < 4; ++role) {
            out << program << "," << kBenchRoles[static_cast<std::size_t>(role)];
            for (int opt : {0, 1})
                for (DispatchKind kind : all_dispatch_kinds())
                    out << "," << (role_bit(cell_at(cells, program, kind, opt).row, role) ? "yes" : "no");
            out << "\n";
        }
    }
    return out.str();
}

bool bench_matches_reference_pattern(const std::vector<BenchCell> &cells) {
    for (const auto &c : cells) {
        DetectionRow want;
        if (c.opt == 0)
            want = DetectionRow{true, true, true, true};
        else
            want = DetectionRow{false, true, true, false};
        if (!(c.row == want))
            return false;
    }
    return !cells.empty();
}

std::vector<VmArtifact> generate_artifacts(const PipelineConfig &config) {
    std::vector<SourceProgram> programs;
    for (const auto &name : config.programs)
        programs.push_back(builtin_program(name));
    for (int i = 0; i < config.random_programs; ++i) {
        std::uint64_t pseed = mix_seed(config.seed, "program/" + std::to_string(i));
        int span = config.random_max_size - config.random_min_size + 1;
        int size = config.random_min_size + static_cast<int>(pseed % static_cast<std::uint64_t>(span));
        programs.push_back(random_program(pseed, size));
    }

    std::vector<VmArtifact> artifacts;
    for (const auto &program : programs) {
        for (DispatchKind kind : config.kinds) {
            bool want0 = std::find(config.opt_levels.begin(), config.opt_levels.end(), 0) !=
                         config.opt_levels.end();
            bool want1 = std::find(config.opt_levels.begin(), config.opt_levels.end(), 1) !=
                         config.opt_levels.end();
            VmArtifact base = virtualize(program, kind, 0,
                                         artifact_seed(config.seed, program.name, kind, 0));
            if (want1) {
                VmArtifact opt = optimize(base);
                opt.seed = artifact_seed(config.seed, program.name, kind, 1);
                artifacts.push_back(std::move(opt));
            }
            if (want0)
                artifacts.push_back(std::move(base));
        }
    }
    return artifacts;
}

PipelineResult run_pipeline(const PipelineConfig &config) {
    validate(config);
    if (config.out_dir.empty())
        throw std::invalid_argument("pipeline needs an output directory");

    fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir / "artifacts");
    fs::create_directories(out_dir / "viz");

    PipelineResult result;
    std::ostringstream man;

    man << "config.budget " << config.budget << "\n";
    {
        std::ostringstream kinds;
        for (std::size_t i = 0; i < config.kinds.size(); ++i)
            kinds << (i ? "," : "") << dispatch_kind_name(config.kinds[i]);
        man << "config.kinds " << kinds.str() << "\n";
    }
    man << "config.labeler.min_fanout " << config.labeler.min_fanout << "\n";
    {
        std::ostringstream opts;
        for (std::size_t i = 0; i < config.opt_levels.size(); ++i)
            opts << (i ? "," : "") << config.opt_levels[i];
        man << "config.opt_levels " << opts.str() << "\n";
    }
    man << "config.per_class " << config.per_class << "\n";
    {
        std::ostringstream progs;
        for (std::size_t i = 0; i < config.programs.size(); ++i)
            progs << (i ? "," : "") << config.programs[i];
        man << "config.programs " << progs.str() << "\n";
    }
    man << "config.random_max_size " << config.random_max_size << "\n";
    man << "config.random_min_size " << config.random_min_size << "\n";
    man << "config.random_programs " << config.random_programs << "\n";
    man << "config.seed " << config.seed << "\n";
    man << "config.split.seed " << config.split_spec.seed << "\n";
    man << "config.split.test " << fmt(config.split_spec.test_fraction) << "\n";
    man << "config.split.train " << fmt(config.split_spec.train_fraction) << "\n";
    man << "config.tokenizer " << tokenizer_mode_name(config.tokenizer) << "\n";
    man << "config.train.epochs " << config.hyper.epochs << "\n";
    man << "config.train.lr " << fmt(config.hyper.learning_rate) << "\n";
    man << "config.train.seed " << config.hyper.seed << "\n";

    // stage 1-3: virtualize the benchmarks, label, score
    result.bench = bench_rows(config.seed, config.labeler);
    for (const auto &program : builtin_programs()) {
        for (DispatchKind kind : all_dispatch_kinds()) {
            for (int opt : {0, 1}) {
                auto art = virtualize(program, kind, opt,
                                      artifact_seed(config.seed, program.name, kind, opt));
                std::string stem = program.name + "_" + lower_kind(kind) + "_opt" +
                                   std::to_string(opt);
                write_file(out_dir / "artifacts" / (stem + ".cfg"),
                           emit_cfg(artifact_to_document(art)));
                auto pred = label_structures(art.cfg, config.labeler);
                write_file(out_dir / "viz" / (stem + ".dot"), emit_dot(art.cfg, pred));
            }
        }
    }
    write_file(out_dir / "bench_table.txt", bench_table_text(result.bench));
    write_file(out_dir / "bench_table.csv", bench_table_csv(result.bench));
    for (const auto &c : result.bench) {
        man << "bench." << c.program << "." << dispatch_kind_name(c.kind) << ".opt" << c.opt
            << " vmstart=" << mark(c.row.vm_start) << " dispatch=" << mark(c.row.dispatch)
            << " handler=" << mark(c.row.handler) << " vmend=" << mark(c.row.vm_end) << "\n";
    }
    bool bench_ok = bench_matches_reference_pattern(result.bench);

    // stage 4: preprocess (reduction statistics over every generated function)
    auto artifacts = generate_artifacts(config);
    double ratio_sum = 0;
    std::size_t ratio_count = 0;
    for (const auto &art : artifacts) {
        auto segs = segments_for_artifact(art, config.tokenizer, config.budget);
        if (segs.empty())
            continue;
        std::int64_t stream = 0;
        for (const auto &s : segs)
            stream += static_cast<std::int64_t>(s.tokens.size());
        ratio_sum += reduction_stats(segs, stream);
        ++ratio_count;
    }
    result.reduction_ratio = ratio_count ? ratio_sum / static_cast<double>(ratio_count) : 0.0;
    man << "preprocess.functions " << ratio_count << "\n";
    man << "preprocess.reduction_definition mean over functions of 1 - mean_segment_tokens / "
           "function_stream_tokens\n";
    man << "preprocess.reduction_ratio " << fmt(result.reduction_ratio) << "\n";

    // stage 5: dataset
    auto corpus = build_corpus(artifacts, config.per_class, config.budget, config.tokenizer,
                               mix_seed(config.seed, "corpus"));
    for (const auto &cell : corpus.cells) {
        man << "corpus.cell." << dispatch_kind_name(cell.main_label) << "."
            << role_name(cell.sub_label) << " available=" << cell.available
            << " selected=" << cell.selected
            << (cell.selected < config.per_class ? " shortfall" : "") << "\n";
    }
    SplitSpec split_spec = config.split_spec;
    split_spec.seed = mix_seed(config.seed, "split");
    auto [train_set, test_set] = split(corpus.records, split_spec);
    man << "corpus.test " << test_set.size() << "\n";
    man << "corpus.total " << corpus.records.size() << "\n";
    man << "corpus.train " << train_set.size() << "\n";
    write_records(train_set, (out_dir / "train.jsonl").string());
    write_records(test_set, (out_dir / "test.jsonl").string());

    // stage 6: train
    TrainMeta hyper = config.hyper;
    Model model = train(train_set, FeatureConfig{}, hyper);
    save_model(model, (out_dir / "model.bin").string());

    // stage 7: evaluate
    result.report = evaluate(model, test_set);
    write_file(out_dir / "eval_report.txt", report_to_text(result.report));
    write_file(out_dir / "eval_report.csv", report_to_csv(result.report));
    for (const auto &m : result.report.per_class) {
        man << "eval.class." << role_name(m.cls) << " precision=" << fmt(m.precision)
            << " recall=" << fmt(m.recall) << " f1=" << fmt(m.f1) << " support=" << m.support
            << "\n";
    }
    man << "eval.macro_f1 " << fmt(result.report.macro_f1) << "\n";
    man << "eval.main_accuracy " << fmt(result.report.main_accuracy) << "\n";
    man << "eval.sub_accuracy " << fmt(result.report.sub_accuracy) << "\n";

    // stage 8: viz is written above alongside the benchmark artifacts

    bool reduction_ok = result.reduction_ratio >= config.gate_reduction;
    bool f1_ok = result.report.macro_f1 >= config.gate_macro_f1;
    bool acc_ok = result.report.main_accuracy >= config.gate_main_accuracy;
    man << "gate.bench_pattern " << (bench_ok ? "pass" : "fail") << "\n";
    man << "gate.macro_f1 " << (f1_ok ? "pass" : "fail") << "\n";
    man << "gate.main_accuracy " << (acc_ok ? "pass" : "fail") << "\n";
    man << "gate.reduction " << (reduction_ok ? "pass" : "fail") << "\n";
    result.ok = bench_ok && reduction_ok && f1_ok && acc_ok;
    man << "result " << (result.ok ? "pass" : "fail") << "\n";

    result.manifest = man.str();
    write_file(out_dir / "manifest.txt", result.manifest);
    return result;
}

} // namespace vmlab
