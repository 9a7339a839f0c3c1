#include "vmlab/dataset.hpp"
#include "vmlab/errors.hpp"
#include "vmlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vmlab {

DatasetRecord record_from_segment(const Segment &seg) {
    DatasetRecord rec;
    rec.main_label = seg.main_label;
    rec.sub_label = seg.sub_label;
    rec.tokens = seg.tokens;
    rec.meta = RecordMeta{seg.program, seg.opt, seg.seed, seg.chunk};

    std::uint64_t h = fnv1a(dispatch_kind_name(seg.main_label));
    h = fnv1a(role_name(seg.sub_label), h);
    for (const auto &t : rec.tokens) {
        h = fnv1a(t, h);
        h = fnv1a_byte(0x1f, h);
    }
    h = fnv1a(seg.program, h);
    h = fnv1a(std::to_string(seg.opt), h);
    h = fnv1a(std::to_string(seg.seed), h);
    h = fnv1a(std::to_string(seg.chunk), h);
    h = fnv1a(std::to_string(seg.block_begin), h);
    h = fnv1a(std::to_string(seg.block_end), h);

    std::ostringstream hex;
    hex << std::hex;
    hex.width(16);
    hex.fill('0');
    hex << h;
    rec.id = hex.str();
    return rec;
}

CorpusBuild build_corpus(const std::vector<VmArtifact> &artifacts, std::size_t per_class,
                         int budget, TokenizerMode mode, std::uint64_t seed) {
    if (artifacts.empty())
        throw EmptyInput("build_corpus: no artifacts");

    // pools per (main, sub) cell, in artifact order (deterministic)
    std::array<std::array<std::vector<DatasetRecord>, kRoleCount>, kDispatchKindCount> pools;
    for (const auto &art : artifacts) {
        for (const auto &seg : segments_for_artifact(art, mode, budget)) {
            DatasetRecord rec = record_from_segment(seg);
            pools[static_cast<std::size_t>(rec.main_label)][static_cast<std::size_t>(rec.sub_label)]
                .push_back(std::move(rec));
        }
    }

    CorpusBuild out;
    for (DispatchKind kind : all_dispatch_kinds()) {
        for (Role role : all_roles()) {
            auto &pool = pools[static_cast<std::size_t>(kind)][static_cast<std::size_t>(role)];
            Rng rng(mix_seed(seed, dispatch_kind_name(kind) + "/" + role_name(role)));
            rng.shuffle(pool);
            std::size_t take = std::min(per_class, pool.size());
            CellCount cell{kind, role, pool.size(), take};
            out.cells.push_back(cell);
            for (std::size_t i = 0; i < take; ++i)
                out.records.push_back(std::move(pool[i]));
        }
    }
    return out;
}

std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>>
split(const std::vector<DatasetRecord> &records, const SplitSpec &spec) {
    if (records.empty())
        throw EmptyInput("split: no records");
    if (std::abs(spec.train_fraction + spec.test_fraction - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1.0");

    std::vector<DatasetRecord> train, test;
    for (DispatchKind kind : all_dispatch_kinds()) {
        for (Role role : all_roles()) {
            std::vector<DatasetRecord> cell;
            for (const auto &r : records)
                if (r.main_label == kind && r.sub_label == role)
                    cell.push_back(r);
            if (cell.empty())
                continue;
            Rng rng(mix_seed(spec.seed, dispatch_kind_name(kind) + "/" + role_name(role)));
            rng.shuffle(cell);

            // largest-remainder rounding between the two parts; ties favor train
            const double n = static_cast<double>(cell.size());
            std::size_t train_n = static_cast<std::size_t>(std::floor(spec.train_fraction * n));
            std::size_t test_n = static_cast<std::size_t>(std::floor(spec.test_fraction * n));
            std::size_t leftover = cell.size() - train_n - test_n;
            double train_rem = spec.train_fraction * n - std::floor(spec.train_fraction * n);
            double test_rem = spec.test_fraction * n - std::floor(spec.test_fraction * n);
            while (leftover-- > 0) {
                if (train_rem >= test_rem) {
                    ++train_n;
                    train_rem = 0;
                } else {
                    ++test_n;
                    test_rem = 0;
                }
            }
            for (std::size_t i = 0; i < cell.size(); ++i)
                (i < train_n ? train : test).push_back(std::move(cell[i]));
        }
    }
    return {std::move(train), std::move(test)};
}

namespace {

using nlohmann::json;

json record_to_json(const DatasetRecord &r) {
    json j;
    j["id"] = r.id;
    j["main_label"] = dispatch_kind_name(r.main_label);
    j["sub_label"] = role_name(r.sub_label);
    j["tokens"] = r.tokens;
    j["meta"] = {{"program", r.meta.program},
                 {"opt", r.meta.opt},
                 {"seed", r.meta.seed},
                 {"chunk", r.meta.chunk}};
    return j;
}

DatasetRecord record_from_json(const json &j, int line_no) {
    for (const char *key : {"id", "main_label", "sub_label", "tokens", "meta"})
        if (!j.contains(key))
            throw ParseError(line_no, std::string("record missing field '") + key + "'");
    DatasetRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        auto kind = dispatch_kind_from_name(j.at("main_label").get<std::string>());
        auto role = role_from_name(j.at("sub_label").get<std::string>());
        if (!kind)
            throw ParseError(line_no, "bad main_label");
        if (!role)
            throw ParseError(line_no, "bad sub_label");
        r.main_label = *kind;
        r.sub_label = *role;
        r.tokens = j.at("tokens").get<std::vector<std::string>>();
        const json &m = j.at("meta");
        r.meta.program = m.at("program").get<std::string>();
        r.meta.opt = m.at("opt").get<int>();
        r.meta.seed = m.at("seed").get<std::uint64_t>();
        r.meta.chunk = m.at("chunk").get<int>();
    } catch (const ParseError &) {
        throw;
    } catch (const std::exception &e) {
        throw ParseError(line_no, std::string("bad record: ") + e.what());
    }
    if (r.tokens.empty())
        throw ParseError(line_no, "record has no tokens");
    return r;
}

} // namespace

std::string records_to_jsonl(const std::vector<DatasetRecord> &records) {
    std::ostringstream out;
    for (const auto &r : records)
        out << record_to_json(r).dump() << "\n";
    return out.str();
}

void write_records(const std::vector<DatasetRecord> &records, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out << records_to_jsonl(records);
}

std::vector<DatasetRecord> records_from_jsonl(const std::string &text) {
    std::vector<DatasetRecord> records;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ParseError(line_no, "invalid JSON");
        records.push_back(record_from_json(j, line_no));
    }
    return records;
}

std::vector<DatasetRecord> read_records(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return records_from_jsonl(buf.str());
}

} // namespace vmlab
