#pragma once

// End-to-end orchestration: artifact generation, labeling benchmark, corpus
// construction, training, evaluation, visualization, and the reproducibility
// manifest.

#include "vmlab/classifier.hpp"
#include "vmlab/dataset.hpp"
#include "vmlab/labeler.hpp"
#include "vmlab/preprocess.hpp"

#include <string>
#include <vector>

namespace vmlab {

struct PipelineConfig {
    std::vector<std::string> programs = {"bubble_sort", "factorial", "fibonacci"};
    int random_programs = 300;
    int random_min_size = 48;
    int random_max_size = 160;
    std::vector<DispatchKind> kinds = {DispatchKind::Switch, DispatchKind::Direct,
                                       DispatchKind::Indirect};
    std::vector<int> opt_levels = {0, 1};
    int budget = 512;
    TokenizerMode tokenizer = TokenizerMode::Subword;
    std::size_t per_class = 600;
    SplitSpec split_spec;
    std::uint64_t seed = 42;
    TrainMeta hyper;
    LabelerParams labeler;
    std::string out_dir;

    // exit gates
    double gate_macro_f1 = 0.95;
    double gate_main_accuracy = 0.85;
    double gate_reduction = 0.90;
};

void validate(const PipelineConfig &config); // throws std::invalid_argument

struct BenchCell {
    std::string program;
    DispatchKind kind = DispatchKind::Switch;
    int opt = 0;
    DetectionRow row;
};

// 3 benchmark programs x kinds x opt levels, labeled and scored against truth.
std::vector<BenchCell> bench_rows(std::uint64_t seed, const LabelerParams &params = {});
std::string bench_table_text(const std::vector<BenchCell> &cells);
std::string bench_table_csv(const std::vector<BenchCell> &cells);

// true when opt 0 detects all four roles and opt 1 detects exactly dispatch
// and handler
bool bench_matches_reference_pattern(const std::vector<BenchCell> &cells);

// deterministic per (config.seed, name, kind, opt)
std::uint64_t artifact_seed(std::uint64_t base, const std::string &program, DispatchKind kind,
                            int opt);

std::vector<VmArtifact> generate_artifacts(const PipelineConfig &config);

struct PipelineResult {
    bool ok = false;
    std::string manifest;
    std::vector<BenchCell> bench;
    double reduction_ratio = 0;
    EvalReport report;
};

// Runs every stage and writes artifacts, corpus, model, reports, DOT files,
// and manifest.txt under config.out_dir.
PipelineResult run_pipeline(const PipelineConfig &config);

} // namespace vmlab
