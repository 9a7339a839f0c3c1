#include "vmlab/preprocess.hpp"
#include "vmlab/errors.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace vmlab {

const std::string &tokenizer_mode_name(TokenizerMode m) {
    static const std::string sub = "subword", norm = "normalized";
    return m == TokenizerMode::Subword ? sub : norm;
}

std::optional<TokenizerMode> tokenizer_mode_from_name(const std::string &s) {
    if (s == "subword")
        return TokenizerMode::Subword;
    if (s == "normalized")
        return TokenizerMode::Normalized;
    return std::nullopt;
}

namespace {

constexpr std::size_t kChunkLen = 6;
const std::string kMarkerPrefix = "__vmlab_";

bool word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

void subword_tokenize(const std::string &instr, std::vector<std::string> &out) {
    std::string lowered = instr;
    for (auto &c : lowered)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    std::size_t i = 0;
    while (i < lowered.size()) {
        if (!word_char(lowered[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < lowered.size() && word_char(lowered[j]))
            ++j;
        std::string word = lowered.substr(i, j - i);
        if (word.size() <= kChunkLen) {
            out.push_back(std::move(word));
        } else {
            for (std::size_t k = 0; k < word.size(); k += kChunkLen)
                out.push_back("##" + word.substr(k, kChunkLen));
        }
        i = j;
    }
}

bool all_digits(const std::string &s, std::size_t from) {
    if (from >= s.size())
        return false;
    for (std::size_t i = from; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i])))
            return false;
    return true;
}

bool is_register(const std::string &t) {
    if (t == "vpc" || t == "sp" || t == "fp" || t == "rv")
        return true;
    if (t.size() >= 2 && (t[0] == 'r' || t[0] == 't' || t[0] == 'a'))
        return all_digits(t, 1);
    return false;
}

bool is_immediate(const std::string &t) {
    std::size_t from = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    return all_digits(t, from);
}

void normalized_tokenize(const std::string &instr, std::vector<std::string> &out) {
    std::istringstream ss(instr);
    std::string tok;
    bool first = true;
    while (ss >> tok) {
        // shed list punctuation but keep brackets, they mark memory operands
        while (!tok.empty() && (tok.back() == ',' || tok.back() == ';' || tok.back() == ')'))
            tok.pop_back();
        while (!tok.empty() && tok.front() == '(')
            tok.erase(tok.begin());
        if (tok.empty())
            continue;
        std::string lowered = tok;
        for (auto &c : lowered)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (first) {
            out.push_back(lowered);
            first = false;
            continue;
        }
        if (tok.rfind(kMarkerPrefix, 0) == 0)
            continue; // marker symbols vanish
        if (tok.front() == '[' || (lowered[0] == 'm' && all_digits(lowered, 1)))
            out.push_back("MEM");
        else if ((lowered[0] == 'l' && all_digits(lowered, 1)) || tok.rfind("__", 0) == 0)
            out.push_back("ADDR");
        else if (is_register(lowered))
            out.push_back("REG");
        else if (is_immediate(lowered))
            out.push_back("IMM");
        else
            out.push_back(lowered);
    }
}

} // namespace

std::vector<std::string> tokenize(const std::vector<std::string> &instrs, TokenizerMode mode) {
    std::vector<std::string> out;
    for (const auto &instr : instrs) {
        if (mode == TokenizerMode::Subword)
            subword_tokenize(instr, out);
        else
            normalized_tokenize(instr, out);
    }
    return out;
}

std::vector<LabeledRow> rows_from_truth(const Cfg &cfg,
                                        const std::map<int, std::vector<TruthSpan>> &truth,
                                        TokenizerMode mode) {
    std::vector<LabeledRow> rows;
    for (const auto &b : cfg.blocks) {
        auto it = truth.find(b.id);
        if (it == truth.end())
            throw ValidationError("no truth spans for block " + std::to_string(b.id));
        std::vector<TruthSpan> spans = it->second;
        std::sort(spans.begin(), spans.end(),
                  [](const TruthSpan &x, const TruthSpan &y) { return x.begin < y.begin; });
        for (const auto &s : spans) {
            if (s.begin < 0 || s.end > static_cast<int>(b.instrs.size()) || s.begin > s.end)
                throw ValidationError("bad truth span on block " + std::to_string(b.id));
            std::vector<std::string> slice(b.instrs.begin() + s.begin, b.instrs.begin() + s.end);
            rows.push_back(LabeledRow{tokenize(slice, mode), s.role, b.id});
        }
    }
    return rows;
}

std::vector<Segment> segment_and_merge(const std::vector<LabeledRow> &rows, int budget) {
    if (budget < 8)
        throw std::invalid_argument("budget must be >= 8");

    std::vector<Segment> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        const Role role = rows[i].role;
        std::vector<std::string> run;
        int block_begin = rows[i].block_id;
        int block_end = rows[i].block_id;
        while (i < rows.size() && rows[i].role == role) {
            run.insert(run.end(), rows[i].tokens.begin(), rows[i].tokens.end());
            block_end = rows[i].block_id;
            ++i;
        }
        if (run.empty())
            continue;
        int chunk = 0;
        for (std::size_t off = 0; off < run.size(); off += static_cast<std::size_t>(budget)) {
            Segment seg;
            std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(budget), run.size() - off);
            seg.tokens.assign(run.begin() + static_cast<std::ptrdiff_t>(off),
                              run.begin() + static_cast<std::ptrdiff_t>(off + len));
            seg.sub_label = role;
            seg.block_begin = block_begin;
            seg.block_end = block_end;
            seg.chunk = chunk++;
            out.push_back(std::move(seg));
        }
    }
    return out;
}

std::vector<Segment> segments_for_artifact(const VmArtifact &artifact, TokenizerMode mode,
                                           int budget) {
    auto rows = rows_from_truth(artifact.cfg, artifact.truth, mode);
    auto segs = segment_and_merge(rows, budget);
    for (auto &s : segs) {
        s.main_label = artifact.kind;
        s.program = artifact.cfg.name;
        s.opt = artifact.opt_level;
        s.seed = artifact.seed;
    }
    return segs;
}

double reduction_stats(const std::vector<Segment> &segments, std::int64_t full_stream_len) {
    if (segments.empty())
        throw EmptyInput("reduction_stats: no segments");
    if (full_stream_len <= 0)
        throw std::invalid_argument("reduction_stats: full_stream_len must be positive");
    double total = 0;
    for (const auto &s : segments)
        total += static_cast<double>(s.tokens.size());
    double mean = total / static_cast<double>(segments.size());
    return 1.0 - mean / static_cast<double>(full_stream_len);
}

} // namespace vmlab
