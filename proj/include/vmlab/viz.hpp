#pragma once

// Color-coded Graphviz DOT rendering of a role-annotated CFG.

#include "vmlab/cfg.hpp"
#include "vmlab/labeler.hpp"

#include <map>
#include <set>
#include <string>

namespace vmlab {

struct ColorScheme {
    std::map<Role, std::string> colors = {
        {Role::DispatchStart, "red"},   {Role::Handler, "orange"},
        {Role::Vm, "lightblue"},        {Role::VmStart, "green"},
        {Role::VmEnd, "purple"},        {Role::NonVm, "gray"},
    };
};

struct DotOptions {
    int max_instrs = 3;       // node label truncation; <= 0 renders every instruction
    std::set<int> dashed_ids; // mixed-role blocks render with a dashed border
};

// One filled node per block, one edge per CFG edge, deterministic order.
// Throws IncompleteRoleMap when a block has no role.
std::string emit_dot(const Cfg &cfg, const RoleMap &roles, const ColorScheme &scheme = {},
                     const DotOptions &options = {});

// Minimal structural check for the DOT subset emit_dot produces.
bool is_valid_dot(const std::string &text);

} // namespace vmlab
