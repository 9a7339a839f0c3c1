#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here recomputes results by a route different from the library code it
// checks.

#include "vmlab/cfg.hpp"
#include "vmlab/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport {

// Random graph with up to max_blocks blocks and arbitrary fan-out. Block ids
// are sometimes non-dense to exercise id handling.
inline vmlab::Cfg random_cfg(std::uint64_t seed, int max_blocks = 50) {
    vmlab::Rng rng(seed);
    int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_blocks)));
    int id_stride = rng.below(4) == 0 ? 3 : 1;

    vmlab::Cfg cfg;
    cfg.name = "g" + std::to_string(seed);
    std::vector<int> ids;
    for (int i = 0; i < n; ++i)
        ids.push_back(i * id_stride);
    cfg.entry = ids.front();

    const char *words[] = {"mov", "add",  "cmp",  "jmp",   "load", "store",
                           "r1",  "r2",   "t3",   "vpc",   "13",   "-7",
                           "[vregs+2]", "l4", "__helper", "x"};
    for (int i = 0; i < n; ++i) {
        vmlab::BasicBlock b;
        b.id = ids[static_cast<std::size_t>(i)];
        int instr_count = static_cast<int>(rng.below(5));
        for (int k = 0; k < instr_count; ++k) {
            std::ostringstream ins;
            int toks = 1 + static_cast<int>(rng.below(3));
            for (int t = 0; t < toks; ++t)
                ins << (t ? " " : "") << words[rng.below(16)];
            b.instrs.push_back(ins.str());
        }
        int degree = static_cast<int>(rng.below(5));
        std::set<int> chosen;
        for (int e = 0; e < degree; ++e)
            chosen.insert(ids[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)))]);
        b.succs.assign(chosen.begin(), chosen.end());
        cfg.blocks.push_back(std::move(b));
    }
    return cfg;
}

inline vmlab::CfgDocument random_document(std::uint64_t seed) {
    vmlab::Rng rng(seed);
    vmlab::CfgDocument doc;
    doc.cfg = random_cfg(seed);
    if (rng.below(2))
        doc.meta.emplace_back("kind", "SWITCH");
    if (rng.below(2))
        doc.meta.emplace_back("seed", std::to_string(seed));
    for (const auto &b : doc.cfg.blocks) {
        if (rng.below(3) == 0)
            doc.labels[b.id].push_back(vmlab::LabelSpan{"HANDLER", -1, -1});
        else if (rng.below(4) == 0 && !b.instrs.empty()) {
            int mid = static_cast<int>(b.instrs.size()) / 2;
            doc.labels[b.id].push_back(vmlab::LabelSpan{"NON-VM", 0, mid});
            doc.labels[b.id].push_back(
                vmlab::LabelSpan{"VM", mid, static_cast<int>(b.instrs.size())});
        }
    }
    return doc;
}

// oracle: blocks reachable from `from` by BFS over an explicit edge list
inline std::set<int> reachable_oracle(const vmlab::Cfg &cfg, int from, bool reversed) {
    std::vector<std::pair<int, int>> edges;
    for (const auto &b : cfg.blocks)
        for (int s : b.succs)
            edges.emplace_back(reversed ? s : b.id, reversed ? b.id : s);
    std::set<int> seen{from};
    bool grew = true;
    while (grew) {
        grew = false;
        for (auto [src, dst] : edges)
            if (seen.count(src) && !seen.count(dst)) {
                seen.insert(dst);
                grew = true;
            }
    }
    return seen;
}

// oracle: the SCC of `id` as forward \cap backward reachability
inline std::set<int> scc_oracle(const vmlab::Cfg &cfg, int id) {
    auto fwd = reachable_oracle(cfg, id, false);
    auto bwd = reachable_oracle(cfg, id, true);
    std::set<int> both;
    for (int b : fwd)
        if (bwd.count(b))
            both.insert(b);
    both.insert(id);
    return both;
}

// oracle: first block in layout order attaining the maximum out-degree
inline int first_max_out_degree_oracle(const vmlab::Cfg &cfg) {
    int best = -1;
    std::size_t best_degree = 0;
    for (const auto &b : cfg.blocks) {
        if (b.succs.size() > best_degree || best < 0) {
            best_degree = b.succs.size();
            best = b.id;
        }
    }
    return best;
}

// count lines in interchange/DOT text matching a prefix
inline int count_lines_with_prefix(const std::string &text, const std::string &prefix) {
    std::istringstream in(text);
    std::string line;
    int count = 0;
    while (std::getline(in, line))
        if (line.rfind(prefix, 0) == 0)
            ++count;
    return count;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string &name) {
        path = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

inline std::string slurp_file(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace testsupport
