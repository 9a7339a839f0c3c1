#include "vmlab/cfg.hpp"
#include "vmlab/errors.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace vmlab {

namespace {

std::unordered_map<int, std::size_t> index_map(const Cfg &cfg) {
    std::unordered_map<int, std::size_t> m;
    m.reserve(cfg.blocks.size());
    for (std::size_t i = 0; i < cfg.blocks.size(); ++i)
        m.emplace(cfg.blocks[i].id, i);
    return m;
}

} // namespace

bool Cfg::has_block(int id) const {
    for (const auto &b : blocks)
        if (b.id == id)
            return true;
    return false;
}

const BasicBlock &Cfg::block(int id) const {
    for (const auto &b : blocks)
        if (b.id == id)
            return b;
    throw BlockNotFound(id);
}

std::size_t Cfg::index_of(int id) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].id == id)
            return i;
    throw BlockNotFound(id);
}

const std::string *CfgDocument::meta_value(const std::string &key) const {
    for (const auto &[k, v] : meta)
        if (k == key)
            return &v;
    return nullptr;
}

int out_degree(const Cfg &cfg, int id) {
    return static_cast<int>(cfg.block(id).succs.size());
}

std::set<int> predecessors(const Cfg &cfg, int id) {
    if (!cfg.has_block(id))
        throw BlockNotFound(id);
    std::set<int> preds;
    for (const auto &b : cfg.blocks)
        for (int s : b.succs)
            if (s == id)
                preds.insert(b.id);
    return preds;
}

SccResult scc_of(const Cfg &cfg, int id) {
    if (!cfg.has_block(id))
        throw BlockNotFound(id);
    auto idx = index_map(cfg);

    // forward reachability from id
    std::unordered_set<int> fwd;
    std::vector<int> work{id};
    while (!work.empty()) {
        int cur = work.back();
        work.pop_back();
        for (int s : cfg.blocks[idx.at(cur)].succs)
            if (fwd.insert(s).second)
                work.push_back(s);
    }

    // backward reachability via reversed adjacency
    std::unordered_map<int, std::vector<int>> rev;
    for (const auto &b : cfg.blocks)
        for (int s : b.succs)
            rev[s].push_back(b.id);
    std::unordered_set<int> bwd;
    work.push_back(id);
    while (!work.empty()) {
        int cur = work.back();
        work.pop_back();
        auto it = rev.find(cur);
        if (it == rev.end())
            continue;
        for (int p : it->second)
            if (bwd.insert(p).second)
                work.push_back(p);
    }

    SccResult res;
    for (const auto &b : cfg.blocks)
        if ((b.id == id) || (fwd.count(b.id) && bwd.count(b.id)))
            res.members.push_back(b.id);
    std::sort(res.members.begin(), res.members.end());

    if (res.members.size() == 1) {
        const auto &succs = cfg.block(id).succs;
        bool self_loop = std::find(succs.begin(), succs.end(), id) != succs.end();
        res.trivial = !self_loop;
    }
    return res;
}

std::vector<int> unreachable_blocks(const Cfg &cfg) {
    if (cfg.blocks.empty())
        return {};
    auto idx = index_map(cfg);
    std::unordered_set<int> seen{cfg.entry};
    std::vector<int> work{cfg.entry};
    while (!work.empty()) {
        int cur = work.back();
        work.pop_back();
        for (int s : cfg.blocks[idx.at(cur)].succs)
            if (seen.insert(s).second)
                work.push_back(s);
    }
    std::vector<int> dead;
    for (const auto &b : cfg.blocks)
        if (!seen.count(b.id))
            dead.push_back(b.id);
    return dead;
}

void validate(const Cfg &cfg) {
    std::unordered_set<int> ids;
    for (const auto &b : cfg.blocks) {
        if (b.id < 0)
            throw ValidationError("negative block id " + std::to_string(b.id));
        if (!ids.insert(b.id).second)
            throw ValidationError("duplicate block id " + std::to_string(b.id));
    }
    if (!cfg.blocks.empty() && !ids.count(cfg.entry))
        throw ValidationError("entry block " + std::to_string(cfg.entry) + " does not exist");
    for (const auto &b : cfg.blocks) {
        std::unordered_set<int> seen;
        for (int s : b.succs) {
            if (!ids.count(s))
                throw ValidationError("edge " + std::to_string(b.id) + " -> " + std::to_string(s) +
                                      " targets a missing block");
            if (!seen.insert(s).second)
                throw ValidationError("duplicate edge " + std::to_string(b.id) + " -> " +
                                      std::to_string(s));
        }
    }
}

namespace {

std::vector<std::string> split_ws(const std::string &line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok)
        out.push_back(tok);
    return out;
}

int parse_int(const std::string &tok, int line_no, const char *what) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size())
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception &) {
        throw ParseError(line_no, std::string("bad ") + what + " '" + tok + "'");
    }
}

// LABEL items are either `ROLE` or `ROLE@begin:end`
LabelSpan parse_label_item(const std::string &item, int line_no) {
    LabelSpan span;
    auto at = item.find('@');
    if (at == std::string::npos) {
        span.role = item;
        return span;
    }
    span.role = item.substr(0, at);
    auto rest = item.substr(at + 1);
    auto colon = rest.find(':');
    if (colon == std::string::npos)
        throw ParseError(line_no, "label span missing ':' in '" + item + "'");
    span.begin = parse_int(rest.substr(0, colon), line_no, "span begin");
    span.end = parse_int(rest.substr(colon + 1), line_no, "span end");
    if (span.begin < 0 || span.end < span.begin)
        throw ParseError(line_no, "bad span range in '" + item + "'");
    return span;
}

} // namespace

CfgDocument parse_cfg(const std::string &text) {
    CfgDocument doc;
    bool saw_func = false;
    bool saw_edge = false;
    bool have_entry = false;
    BasicBlock *cur = nullptr;
    std::map<int, std::vector<int>> succs_of; // keep edge order per source

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;

        auto toks = split_ws(line);
        const std::string &kw = toks[0];

        if (kw == "FUNC") {
            if (saw_func)
                throw ParseError(line_no, "duplicate FUNC record");
            if (toks.size() < 2)
                throw ParseError(line_no, "FUNC needs a name");
            auto pos = line.find("FUNC") + 4;
            pos = line.find_first_not_of(" \t", pos);
            doc.cfg.name = line.substr(pos);
            saw_func = true;
        } else if (kw == "BLOCK") {
            if (!saw_func)
                throw ParseError(line_no, "BLOCK before FUNC");
            if (saw_edge)
                throw ParseError(line_no, "BLOCK after EDGE records");
            if (toks.size() != 2)
                throw ParseError(line_no, "BLOCK needs exactly one id");
            int id = parse_int(toks[1], line_no, "block id");
            if (id < 0)
                throw ParseError(line_no, "negative block id");
            doc.cfg.blocks.push_back(BasicBlock{id, {}, {}});
            cur = &doc.cfg.blocks.back();
            if (!have_entry) {
                doc.cfg.entry = id;
                have_entry = true;
            }
        } else if (kw == "INS") {
            if (!cur)
                throw ParseError(line_no, "INS outside of a BLOCK");
            if (saw_edge)
                throw ParseError(line_no, "INS after EDGE records");
            auto pos = line.find("INS") + 3;
            pos = line.find_first_not_of(" \t", pos);
            cur->instrs.push_back(pos == std::string::npos ? "" : line.substr(pos));
        } else if (kw == "EDGE") {
            if (toks.size() != 3)
                throw ParseError(line_no, "EDGE needs <src> <dst>");
            saw_edge = true;
            int src = parse_int(toks[1], line_no, "edge source");
            int dst = parse_int(toks[2], line_no, "edge target");
            succs_of[src].push_back(dst);
        } else if (kw == "LABEL") {
            if (toks.size() < 3)
                throw ParseError(line_no, "LABEL needs <id> <role>...");
            int id = parse_int(toks[1], line_no, "label block id");
            for (std::size_t i = 2; i < toks.size(); ++i)
                doc.labels[id].push_back(parse_label_item(toks[i], line_no));
        } else if (kw == "META") {
            if (toks.size() < 3)
                throw ParseError(line_no, "META needs <key> <value>");
            auto pos = line.find(toks[1], line.find("META") + 4);
            pos = line.find_first_not_of(" \t", pos + toks[1].size());
            doc.meta.emplace_back(toks[1], line.substr(pos));
        } else {
            throw ParseError(line_no, "unknown record '" + kw + "'");
        }
    }

    if (!saw_func)
        throw ParseError(line_no, "missing FUNC record");

    for (auto &b : doc.cfg.blocks) {
        auto it = succs_of.find(b.id);
        if (it != succs_of.end())
            b.succs = std::move(it->second);
        succs_of.erase(b.id);
    }
    if (!succs_of.empty())
        throw ValidationError("EDGE from missing block " + std::to_string(succs_of.begin()->first));

    validate(doc.cfg);
    for (const auto &[id, spans] : doc.labels) {
        (void)spans;
        if (!doc.cfg.has_block(id))
            throw ValidationError("LABEL for missing block " + std::to_string(id));
    }
    return doc;
}

std::string emit_cfg(const CfgDocument &doc) {
    std::ostringstream out;
    out << "FUNC " << doc.cfg.name << "\n";
    for (const auto &[k, v] : doc.meta)
        out << "META " << k << " " << v << "\n";
    for (const auto &b : doc.cfg.blocks) {
        out << "BLOCK " << b.id << "\n";
        for (const auto &ins : b.instrs)
            out << "INS " << ins << "\n";
    }
    for (const auto &b : doc.cfg.blocks)
        for (int s : b.succs)
            out << "EDGE " << b.id << " " << s << "\n";
    for (const auto &b : doc.cfg.blocks) {
        auto it = doc.labels.find(b.id);
        if (it == doc.labels.end())
            continue;
        out << "LABEL " << b.id;
        for (const auto &span : it->second) {
            out << " " << span.role;
            if (!span.whole_block())
                out << "@" << span.begin << ":" << span.end;
        }
        out << "\n";
    }
    return out.str();
}

} // namespace vmlab
