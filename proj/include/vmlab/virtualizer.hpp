#pragma once

// Compiles a SourceProgram to bytecode and fabricates the interpreter's CFG
// under three dispatch shapes, with instruction-level ground-truth role spans,
// a chain-merging optimizer, marker insertion, and a reference interpreter.

#include "vmlab/cfg.hpp"
#include "vmlab/labels.hpp"
#include "vmlab/toy_ir.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace vmlab {

// One virtual instruction. Field packing by source opcode:
//   CONST  [dst, imm, -]      MOV [dst, src, -]
//   ALU    [dst, lhs, rhs]    LT/EQ same
//   LOAD   [dst, mode, addr]  STORE [mode, addr, src]   (mode 0 = register indirect, 1 = direct cell)
//   JMP    [target, -, -]     JZ  [cond, target, -]
//   OUT    [src, -, -]        RET/EXIT unused
struct Vop {
    int opcode = 0; // virtual opcode class id
    std::array<std::int64_t, 3> fields{};

    bool operator==(const Vop &) const = default;
};

struct BytecodeProgram {
    std::vector<Vop> vops;
    int vpc0 = 0;
    int handler_count = 0;          // distinct virtual opcode classes, exit class included
    std::vector<int> class_opcodes; // class id -> Opcode value; the exit class maps to -1

    bool operator==(const BytecodeProgram &) const = default;

    int exit_class() const { return handler_count - 1; }
};

struct TruthSpan {
    int begin = 0;
    int end = 0; // half-open
    Role role = Role::NonVm;

    bool operator==(const TruthSpan &) const = default;
};

struct VmArtifact {
    Cfg cfg;
    DispatchKind kind = DispatchKind::Switch;
    int opt_level = 0;
    std::map<int, std::vector<TruthSpan>> truth; // block id -> covering spans
    BytecodeProgram bytecode;
    std::uint64_t seed = 0;
};

// One class per distinct source opcode (in opcode order) plus a trailing exit
// class; the vop stream is the program 1:1 with an exit vop appended.
BytecodeProgram compile_bytecode(const SourceProgram &program);

VmArtifact virtualize(const SourceProgram &program, DispatchKind kind, int opt_level,
                      std::uint64_t seed);

// Executes the bytecode. Mirrors eval() step for step, including its traps.
std::vector<std::int64_t> interpret(const VmArtifact &artifact,
                                    const std::vector<std::int64_t> &inputs,
                                    std::int64_t step_budget);

// Chain merging: folds every single-successor block into its successor when
// that successor has exactly one predecessor. Produces mixed-role blocks.
VmArtifact optimize(const VmArtifact &artifact);

Cfg insert_markers(const VmArtifact &artifact);
Cfg strip_markers(const Cfg &cfg);

// The role of a block when all its spans agree; nullopt for mixed blocks.
std::optional<Role> pure_role(const VmArtifact &artifact, int block_id);

// Interchange bridging: META kind/opt/seed plus LABEL spans.
CfgDocument artifact_to_document(const VmArtifact &artifact);
std::map<int, std::vector<TruthSpan>> truth_from_document(const CfgDocument &doc);

} // namespace vmlab
