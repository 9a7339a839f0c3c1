#pragma once

// Control-flow-graph data model and the line-based interchange format shared
// by every other module. Graphs are plain values; all queries are const.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vmlab {

struct BasicBlock {
    int id = 0;
    std::vector<std::string> instrs; // one pseudo-assembly instruction per entry
    std::vector<int> succs;          // ordered, no duplicates

    bool operator==(const BasicBlock &) const = default;
};

struct Cfg {
    std::string name;
    int entry = 0;
    std::vector<BasicBlock> blocks; // layout order

    bool operator==(const Cfg &) const = default;

    bool has_block(int id) const;
    const BasicBlock &block(int id) const; // throws BlockNotFound
    std::size_t index_of(int id) const;    // position in layout order
};

// One role annotation over an instruction range [begin, end); begin == end == -1
// means "whole block".
struct LabelSpan {
    std::string role;
    int begin = -1;
    int end = -1;

    bool whole_block() const { return begin < 0; }
    bool operator==(const LabelSpan &) const = default;
};

// A parsed interchange file: the graph plus optional META and LABEL records.
struct CfgDocument {
    Cfg cfg;
    std::vector<std::pair<std::string, std::string>> meta; // insertion order
    std::map<int, std::vector<LabelSpan>> labels;

    bool operator==(const CfgDocument &) const = default;

    const std::string *meta_value(const std::string &key) const;
};

struct SccResult {
    std::vector<int> members; // sorted ascending
    bool trivial = false;     // singleton without a self-loop
};

int out_degree(const Cfg &cfg, int id);
std::set<int> predecessors(const Cfg &cfg, int id);
SccResult scc_of(const Cfg &cfg, int id);

// Blocks not reachable from the entry, in layout order. They are legal but
// flagged so callers can decide what to do with them.
std::vector<int> unreachable_blocks(const Cfg &cfg);

// Structural checks shared by parse and the generators: unique ids, edges
// resolve, no duplicate successors. Throws ValidationError.
void validate(const Cfg &cfg);

CfgDocument parse_cfg(const std::string &text);
std::string emit_cfg(const CfgDocument &doc);

} // namespace vmlab
