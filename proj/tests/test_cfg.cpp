#include <doctest.h>

#include "support.hpp"
#include "vmlab/cfg.hpp"
#include "vmlab/errors.hpp"
#include "vmlab/virtualizer.hpp"

using namespace vmlab;

namespace {

Cfg chain_abc() {
    Cfg cfg;
    cfg.name = "chain";
    cfg.entry = 0;
    cfg.blocks = {BasicBlock{0, {"jmp l1"}, {1}}, BasicBlock{1, {"jmp l2"}, {2}},
                  BasicBlock{2, {"ret"}, {}}};
    return cfg;
}

} // namespace

TEST_CASE("out_degree basics") {
    Cfg cfg;
    cfg.name = "f";
    cfg.entry = 1;
    cfg.blocks = {BasicBlock{1, {}, {2, 3, 4}}, BasicBlock{2, {}, {}}, BasicBlock{3, {}, {}},
                  BasicBlock{4, {}, {}}};
    CHECK(out_degree(cfg, 1) == 3);
    CHECK(out_degree(cfg, 2) == 0);
    CHECK_THROWS_AS(out_degree(cfg, 99), BlockNotFound);
}

TEST_CASE("dispatcher out-degree equals EDGE records in the interchange file") {
    auto art = virtualize(builtin_program("factorial"), DispatchKind::Switch, 0, 11);
    auto text = emit_cfg(artifact_to_document(art));

    int disp = -1;
    for (const auto &[id, spans] : art.truth)
        if (spans.size() == 1 && spans.front().role == Role::DispatchStart)
            disp = id;
    REQUIRE(disp >= 0);

    int edge_lines = testsupport::count_lines_with_prefix(text, "EDGE " + std::to_string(disp) + " ");
    CHECK(out_degree(art.cfg, disp) == edge_lines);
    CHECK(edge_lines == art.bytecode.handler_count + 1);
}

TEST_CASE("predecessors") {
    Cfg cfg = chain_abc();
    CHECK(predecessors(cfg, 0).empty());
    CHECK(predecessors(cfg, 1) == std::set<int>{0});
    CHECK_THROWS_AS(predecessors(cfg, 7), BlockNotFound);
}

TEST_CASE("dispatcher predecessors match a brute-force scan over emitted edges") {
    auto art = virtualize(builtin_program("fibonacci"), DispatchKind::Switch, 0, 3);
    auto text = emit_cfg(artifact_to_document(art));

    // oracle: collect EDGE lines targeting the dispatcher
    std::set<int> oracle;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string kw;
        int src = 0, dst = 0;
        if (ss >> kw >> src >> dst && kw == "EDGE" && dst == 2)
            oracle.insert(src);
    }
    CHECK(predecessors(art.cfg, 2) == oracle);
    CHECK(oracle.count(1) == 1); // the VM entry block feeds the dispatcher
}

TEST_CASE("scc_of basics") {
    Cfg cfg = chain_abc();
    auto scc = scc_of(cfg, 1);
    CHECK(scc.members == std::vector<int>{1});
    CHECK(scc.trivial);

    Cfg cyc;
    cyc.name = "cyc";
    cyc.entry = 0;
    cyc.blocks = {BasicBlock{0, {}, {1}}, BasicBlock{1, {}, {0}}};
    auto both = scc_of(cyc, 0);
    CHECK(both.members == std::vector<int>{0, 1});
    CHECK_FALSE(both.trivial);

    CHECK_THROWS_AS(scc_of(cfg, 42), BlockNotFound);
}

TEST_CASE("self-loop singleton is not trivial") {
    Cfg cfg;
    cfg.name = "loop";
    cfg.entry = 0;
    cfg.blocks = {BasicBlock{0, {}, {0}}};
    auto scc = scc_of(cfg, 0);
    CHECK(scc.members == std::vector<int>{0});
    CHECK_FALSE(scc.trivial);
}

TEST_CASE("dispatcher SCC equals the reachability-intersection oracle") {
    for (DispatchKind kind : all_dispatch_kinds()) {
        auto art = virtualize(builtin_program("factorial"), kind, 0, 5);
        auto scc = scc_of(art.cfg, 2);
        auto oracle = testsupport::scc_oracle(art.cfg, 2);
        CHECK(std::set<int>(scc.members.begin(), scc.members.end()) == oracle);
    }
}

TEST_CASE("scc_of matches the oracle on random graphs") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Cfg cfg = testsupport::random_cfg(seed);
        const auto &probe = cfg.blocks[seed % cfg.blocks.size()];
        auto scc = scc_of(cfg, probe.id);
        auto oracle = testsupport::scc_oracle(cfg, probe.id);
        REQUIRE(std::set<int>(scc.members.begin(), scc.members.end()) == oracle);
    }
}

TEST_CASE("empty function round-trips byte-identically") {
    CfgDocument doc;
    doc.cfg.name = "empty";
    doc.cfg.entry = 0;
    doc.cfg.blocks = {BasicBlock{0, {}, {}}};
    auto text = emit_cfg(doc);
    CHECK(text == "FUNC empty\nBLOCK 0\n");
    auto parsed = parse_cfg(text);
    CHECK(parsed == doc);
    CHECK(emit_cfg(parsed) == text);
}

TEST_CASE("a generated artifact with dozens of blocks round-trips structurally") {
    auto art = virtualize(builtin_program("bubble_sort"), DispatchKind::Switch, 0, 9);
    CHECK(art.cfg.blocks.size() >= 20);
    auto doc = artifact_to_document(art);
    auto parsed = parse_cfg(emit_cfg(doc));
    CHECK(parsed == doc);
}

TEST_CASE("dangling edge is a validation error") {
    CHECK_THROWS_AS(parse_cfg("FUNC f\nBLOCK 0\nEDGE 0 1\n"), ValidationError);
    CHECK_THROWS_AS(parse_cfg("FUNC f\nBLOCK 0\nEDGE 9 0\n"), ValidationError);
}

TEST_CASE("parse errors carry line numbers") {
    try {
        parse_cfg("FUNC f\nBLOCK 0\nWHAT is this\n");
        FAIL("expected ParseError");
    } catch (const ParseError &e) {
        CHECK(e.line == 3);
    }
    CHECK_THROWS_AS(parse_cfg("BLOCK 0\n"), ParseError);         // block before FUNC
    CHECK_THROWS_AS(parse_cfg("FUNC f\nINS mov\n"), ParseError); // INS outside block
    CHECK_THROWS_AS(parse_cfg("FUNC f\nBLOCK x\n"), ParseError); // bad id
    CHECK_THROWS_AS(parse_cfg("FUNC f\nBLOCK 0\nBLOCK 0\n"), ValidationError);
    CHECK_THROWS_AS(parse_cfg("FUNC f\nBLOCK 0\nEDGE 0 0\nBLOCK 1\n"), ParseError);
}

TEST_CASE("random documents round-trip and edge records count out-degrees") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto doc = testsupport::random_document(seed);
        auto text = emit_cfg(doc);
        auto parsed = parse_cfg(text);
        REQUIRE(parsed == doc);
        REQUIRE(emit_cfg(parsed) == text);

        int degree_sum = 0;
        for (const auto &b : doc.cfg.blocks)
            degree_sum += out_degree(doc.cfg, b.id);
        REQUIRE(degree_sum == testsupport::count_lines_with_prefix(text, "EDGE "));
    }
}

TEST_CASE("unreachable blocks are flagged, not rejected") {
    auto doc = parse_cfg("FUNC f\nBLOCK 0\nBLOCK 1\nBLOCK 2\nEDGE 0 1\n");
    CHECK(unreachable_blocks(doc.cfg) == std::vector<int>{2});
    CHECK(unreachable_blocks(chain_abc()).empty());
}

TEST_CASE("comments and blank lines are ignored") {
    auto doc = parse_cfg("# header\nFUNC f\n\nBLOCK 0\n# note\nINS mov r1 5\n");
    CHECK(doc.cfg.blocks.size() == 1);
    CHECK(doc.cfg.blocks[0].instrs == std::vector<std::string>{"mov r1 5"});
}
