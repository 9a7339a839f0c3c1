#pragma once

// Balanced corpus construction, stratified splitting, and the JSON Lines
// record format.

#include "vmlab/preprocess.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vmlab {

struct RecordMeta {
    std::string program;
    int opt = 0;
    std::uint64_t seed = 0;
    int chunk = 0;

    bool operator==(const RecordMeta &) const = default;
};

struct DatasetRecord {
    std::string id; // content hash, stable across runs
    DispatchKind main_label = DispatchKind::Switch;
    Role sub_label = Role::NonVm;
    std::vector<std::string> tokens;
    RecordMeta meta;

    bool operator==(const DatasetRecord &) const = default;
};

struct SplitSpec {
    double train_fraction = 0.8;
    double test_fraction = 0.2;
    std::uint64_t seed = 42;
};

// Availability accounting per (main, sub) cell; selected < requested marks a
// shortfall.
struct CellCount {
    DispatchKind main_label = DispatchKind::Switch;
    Role sub_label = Role::NonVm;
    std::size_t available = 0;
    std::size_t selected = 0;
};

struct CorpusBuild {
    std::vector<DatasetRecord> records;
    std::vector<CellCount> cells; // all 18 cells, fixed enum order
};

DatasetRecord record_from_segment(const Segment &seg);

// min(per_class, available) records per (main, sub) cell, sampled uniformly
// without replacement; deterministic per seed.
CorpusBuild build_corpus(const std::vector<VmArtifact> &artifacts, std::size_t per_class,
                         int budget, TokenizerMode mode, std::uint64_t seed);

// Stratified by (main, sub) with largest-remainder rounding per cell.
std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>>
split(const std::vector<DatasetRecord> &records, const SplitSpec &spec);

void write_records(const std::vector<DatasetRecord> &records, const std::string &path);
std::string records_to_jsonl(const std::vector<DatasetRecord> &records);
std::vector<DatasetRecord> read_records(const std::string &path);
std::vector<DatasetRecord> records_from_jsonl(const std::string &text);

} // namespace vmlab
