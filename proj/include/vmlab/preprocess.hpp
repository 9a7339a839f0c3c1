#pragma once

// Tokenization of block pseudo-assembly and the merge/split step that turns
// labeled blocks into model-sized segments.

#include "vmlab/labels.hpp"
#include "vmlab/virtualizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vmlab {

enum class TokenizerMode {
    Subword,    // lowercase, punctuation split, 6-char chunks with ## continuation
    Normalized, // mnemonic kept; operands collapsed to REG/IMM/ADDR/MEM; markers dropped
};

const std::string &tokenizer_mode_name(TokenizerMode m);
std::optional<TokenizerMode> tokenizer_mode_from_name(const std::string &s);

std::vector<std::string> tokenize(const std::vector<std::string> &instrs, TokenizerMode mode);

// One same-role row in layout order: a whole block at opt 0, a truth span of
// a mixed block at opt 1.
struct LabeledRow {
    std::vector<std::string> tokens;
    Role role = Role::NonVm;
    int block_id = 0;
};

std::vector<LabeledRow> rows_from_truth(const Cfg &cfg,
                                        const std::map<int, std::vector<TruthSpan>> &truth,
                                        TokenizerMode mode);

struct Segment {
    std::vector<std::string> tokens;
    Role sub_label = Role::NonVm;
    DispatchKind main_label = DispatchKind::Switch;
    std::string program;
    int opt = 0;
    std::uint64_t seed = 0;
    int block_begin = 0; // first and last block id of the merged run
    int block_end = 0;
    int chunk = 0; // index within the run after budget splitting
};

// Adjacent same-role runs are concatenated, then any run over the budget is
// split greedily into exact-budget chunks with a short tail.
std::vector<Segment> segment_and_merge(const std::vector<LabeledRow> &rows, int budget);

std::vector<Segment> segments_for_artifact(const VmArtifact &artifact, TokenizerMode mode,
                                           int budget);

// 1 - mean(segment length) / full_stream_len
double reduction_stats(const std::vector<Segment> &segments, std::int64_t full_stream_len);

} // namespace vmlab
