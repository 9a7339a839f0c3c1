#pragma once

// Minimal register IR: the pre-obfuscation programs, their evaluator (the
// semantic oracle for the virtualizer), the three benchmark programs, and a
// seeded random-program generator.

#include <cstdint>
#include <string>
#include <vector>

namespace vmlab {

enum class Opcode {
    Const, Mov, Add, Sub, Mul, Div, Mod, Lt, Eq,
    Load, Store, Jmp, Jz, Out, Ret,
};

inline constexpr int kOpcodeCount = 15;
inline constexpr int kRegCount = 16;
inline constexpr int kMemCells = 256;

const std::string &opcode_name(Opcode op);

struct Operand {
    enum class Kind { Reg, Imm, Target, Mem };
    Kind kind = Kind::Imm;
    std::int64_t value = 0;

    static Operand reg(int r) { return {Kind::Reg, r}; }
    static Operand imm(std::int64_t v) { return {Kind::Imm, v}; }
    static Operand target(int t) { return {Kind::Target, t}; }
    static Operand mem(int m) { return {Kind::Mem, m}; }

    bool operator==(const Operand &) const = default;
};

struct Instr {
    Opcode op = Opcode::Ret;
    std::vector<Operand> args;

    bool operator==(const Instr &) const = default;
};

struct SourceProgram {
    std::string name;
    std::vector<Instr> instrs;
    int inputs = 0; // count of registers preloaded from the input list

    bool operator==(const SourceProgram &) const = default;
};

// Operand-shape and range checks; throws ValidationError.
// Shapes: CONST r,imm | MOV r,r | ALU/LT/EQ r,r,r | LOAD r,(r|m) |
// STORE (r|m),r | JMP t | JZ r,t | OUT r | RET
void validate(const SourceProgram &p);

// Runs the program; returns the OUT values in emission order.
// Throws TimeoutError, TrapDivZero, TrapBounds.
std::vector<std::int64_t> eval(const SourceProgram &p, const std::vector<std::int64_t> &inputs,
                               std::int64_t step_budget);

// bubble_sort, factorial, fibonacci
std::vector<SourceProgram> builtin_programs();
SourceProgram builtin_program(const std::string &name); // throws std::invalid_argument

// Deterministic generator: straight-line arithmetic, forward skips, and
// counted loops only, so every output terminates. size in [8, 512] is the
// exact instruction count of the result.
SourceProgram random_program(std::uint64_t seed, int size);

std::string program_to_text(const SourceProgram &p);
SourceProgram program_from_text(const std::string &text); // throws ParseError

} // namespace vmlab
