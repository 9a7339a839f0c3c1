#include <doctest.h>

#include "support.hpp"
#include "vmlab/errors.hpp"
#include "vmlab/viz.hpp"

using namespace vmlab;

TEST_CASE("empty graph renders a bare digraph with header comments") {
    Cfg cfg;
    cfg.name = "empty";
    auto dot = emit_dot(cfg, {});
    CHECK(dot.find("digraph G {") != std::string::npos);
    CHECK(dot.rfind("// function: empty", 0) == 0);
    CHECK(is_valid_dot(dot));
    CHECK(testsupport::count_lines_with_prefix(dot, "  \"") == 0);
}

TEST_CASE("node and edge statement counts match the graph") {
    auto art = virtualize(builtin_program("fibonacci"), DispatchKind::Indirect, 0, 12);
    RoleMap truth;
    for (const auto &b : art.cfg.blocks)
        truth[b.id] = *pure_role(art, b.id);
    auto dot = emit_dot(art.cfg, truth);
    CHECK(is_valid_dot(dot));

    int node_lines = 0, edge_lines = 0;
    std::istringstream in(dot);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("[label=") != std::string::npos)
            ++node_lines;
        if (line.find(" -> ") != std::string::npos)
            ++edge_lines;
    }
    int expected_edges = 0;
    for (const auto &b : art.cfg.blocks)
        expected_edges += static_cast<int>(b.succs.size());
    CHECK(node_lines == static_cast<int>(art.cfg.blocks.size()));
    CHECK(edge_lines == expected_edges);
}

TEST_CASE("exactly one red node whose fan-out matches the dispatcher") {
    auto art = virtualize(builtin_program("factorial"), DispatchKind::Switch, 0, 3);
    RoleMap truth;
    for (const auto &b : art.cfg.blocks)
        truth[b.id] = *pure_role(art, b.id);
    auto dot = emit_dot(art.cfg, truth);

    std::string red_node;
    int red_count = 0;
    std::istringstream in(dot);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find("fillcolor=\"red\"") != std::string::npos) {
            ++red_count;
            auto q1 = line.find('"');
            auto q2 = line.find('"', q1 + 1);
            red_node = line.substr(q1, q2 - q1 + 1);
        }
    }
    REQUIRE(red_count == 1);

    int red_out = 0;
    std::istringstream in2(dot);
    while (std::getline(in2, line))
        if (line.rfind("  " + red_node + " -> ", 0) == 0)
            ++red_out;
    CHECK(red_out == out_degree(art.cfg, 2));
}

TEST_CASE("a missing role is rejected") {
    Cfg cfg;
    cfg.name = "f";
    cfg.entry = 0;
    cfg.blocks = {BasicBlock{0, {}, {1}}, BasicBlock{1, {}, {}}};
    RoleMap partial{{0, Role::NonVm}};
    CHECK_THROWS_AS(emit_dot(cfg, partial), IncompleteRoleMap);
}

TEST_CASE("identical inputs render byte-identically") {
    auto art = virtualize(builtin_program("bubble_sort"), DispatchKind::Direct, 0, 8);
    RoleMap truth;
    for (const auto &b : art.cfg.blocks)
        truth[b.id] = *pure_role(art, b.id);
    CHECK(emit_dot(art.cfg, truth) == emit_dot(art.cfg, truth));
}

TEST_CASE("labels truncate to three instructions unless asked not to") {
    Cfg cfg;
    cfg.name = "t";
    cfg.entry = 0;
    cfg.blocks = {BasicBlock{0, {"a 1", "b 2", "c 3", "d 4", "e 5"}, {}}};
    RoleMap roles{{0, Role::Vm}};

    auto truncated = emit_dot(cfg, roles);
    CHECK(truncated.find("\\n...") != std::string::npos);
    CHECK(truncated.find("d 4") == std::string::npos);

    DotOptions full;
    full.max_instrs = 0;
    auto complete = emit_dot(cfg, roles, ColorScheme{}, full);
    CHECK(complete.find("d 4") != std::string::npos);
    CHECK(complete.find("\\n...") == std::string::npos);
}

TEST_CASE("mixed blocks can render with a dashed border") {
    Cfg cfg;
    cfg.name = "m";
    cfg.entry = 0;
    cfg.blocks = {BasicBlock{0, {"x", "y"}, {}}};
    RoleMap roles{{0, Role::NonVm}};
    DotOptions options;
    options.dashed_ids = {0};
    auto dot = emit_dot(cfg, roles, ColorScheme{}, options);
    CHECK(dot.find("style=\"filled,dashed\"") != std::string::npos);
    CHECK(is_valid_dot(dot));
}

TEST_CASE("quotes and backslashes in instructions are escaped") {
    Cfg cfg;
    cfg.name = "q";
    cfg.entry = 0;
    cfg.blocks = {BasicBlock{0, {"mov \"x\" y\\z"}, {}}};
    RoleMap roles{{0, Role::NonVm}};
    auto dot = emit_dot(cfg, roles);
    CHECK(dot.find("\\\"x\\\"") != std::string::npos);
    CHECK(is_valid_dot(dot));
}

TEST_CASE("the checker rejects malformed statements") {
    CHECK_FALSE(is_valid_dot("digraph G {\nthis is not dot\n}\n"));
    CHECK_FALSE(is_valid_dot("\"a\" -> \"b\";\n")); // no digraph header
    CHECK(is_valid_dot("digraph G {\n  \"a\" -> \"b\";\n  \"a\" [label=\"x\"];\n}\n"));
}
