#include "vmlab/toy_ir.hpp"
#include "vmlab/errors.hpp"
#include "vmlab/rng.hpp"

#include <array>
#include <limits>
#include <sstream>

namespace vmlab {

const std::string &opcode_name(Opcode op) {
    static const std::array<std::string, kOpcodeCount> names = {
        "CONST", "MOV", "ADD", "SUB", "MUL", "DIV", "MOD", "LT", "EQ",
        "LOAD", "STORE", "JMP", "JZ", "OUT", "RET"};
    return names[static_cast<std::size_t>(op)];
}

namespace {

using K = Operand::Kind;

void check_operand(const Operand &o, K kind, int n_instrs, const std::string &ctx) {
    if (o.kind != kind)
        throw ValidationError(ctx + ": wrong operand kind");
    switch (kind) {
    case K::Reg:
        if (o.value < 0 || o.value >= kRegCount)
            throw ValidationError(ctx + ": register out of range");
        break;
    case K::Mem:
        if (o.value < 0 || o.value >= kMemCells)
            throw ValidationError(ctx + ": memory index out of range");
        break;
    case K::Target:
        if (o.value < 0 || o.value >= n_instrs)
            throw ValidationError(ctx + ": jump target out of range");
        break;
    case K::Imm:
        break;
    }
}

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

} // namespace

void validate(const SourceProgram &p) {
    const int n = static_cast<int>(p.instrs.size());
    if (n == 0)
        throw ValidationError(p.name + ": empty program");
    if (p.inputs < 0 || p.inputs > kRegCount)
        throw ValidationError(p.name + ": bad input count");

    bool has_ret = false;
    for (int i = 0; i < n; ++i) {
        const Instr &ins = p.instrs[i];
        const std::string ctx = p.name + "[" + std::to_string(i) + "] " + opcode_name(ins.op);
        auto need = [&](std::size_t count) {
            if (ins.args.size() != count)
                throw ValidationError(ctx + ": wrong operand count");
        };
        switch (ins.op) {
        case Opcode::Const:
            need(2);
            check_operand(ins.args[0], K::Reg, n, ctx);
            check_operand(ins.args[1], K::Imm, n, ctx);
            break;
        case Opcode::Mov:
            need(2);
            check_operand(ins.args[0], K::Reg, n, ctx);
            check_operand(ins.args[1], K::Reg, n, ctx);
            break;
        case Opcode::Add: case Opcode::Sub: case Opcode::Mul:
        case Opcode::Div: case Opcode::Mod: case Opcode::Lt: case Opcode::Eq:
            need(3);
            for (int a = 0; a < 3; ++a)
                check_operand(ins.args[a], K::Reg, n, ctx);
            break;
        case Opcode::Load:
            need(2);
            check_operand(ins.args[0], K::Reg, n, ctx);
            if (ins.args[1].kind == K::Mem)
                check_operand(ins.args[1], K::Mem, n, ctx);
            else
                check_operand(ins.args[1], K::Reg, n, ctx);
            break;
        case Opcode::Store:
            need(2);
            if (ins.args[0].kind == K::Mem)
                check_operand(ins.args[0], K::Mem, n, ctx);
            else
                check_operand(ins.args[0], K::Reg, n, ctx);
            check_operand(ins.args[1], K::Reg, n, ctx);
            break;
        case Opcode::Jmp:
            need(1);
            check_operand(ins.args[0], K::Target, n, ctx);
            break;
        case Opcode::Jz:
            need(2);
            check_operand(ins.args[0], K::Reg, n, ctx);
            check_operand(ins.args[1], K::Target, n, ctx);
            break;
        case Opcode::Out:
            need(1);
            check_operand(ins.args[0], K::Reg, n, ctx);
            break;
        case Opcode::Ret:
            need(0);
            has_ret = true;
            break;
        }
    }
    if (!has_ret)
        throw ValidationError(p.name + ": no RET instruction");
}

std::vector<std::int64_t> eval(const SourceProgram &p, const std::vector<std::int64_t> &inputs,
                               std::int64_t step_budget) {
    if (static_cast<int>(inputs.size()) != p.inputs)
        throw std::invalid_argument(p.name + ": expected " + std::to_string(p.inputs) + " inputs");

    std::array<std::int64_t, kRegCount> regs{};
    std::vector<std::int64_t> mem(kMemCells, 0);
    for (std::size_t i = 0; i < inputs.size(); ++i)
        regs[i] = inputs[i];

    std::vector<std::int64_t> outputs;
    const int n = static_cast<int>(p.instrs.size());
    std::int64_t pc = 0;
    std::int64_t steps = 0;

    auto mem_index = [&](const Operand &o) -> std::int64_t {
        std::int64_t idx = (o.kind == K::Mem) ? o.value : regs[static_cast<std::size_t>(o.value)];
        if (idx < 0 || idx >= kMemCells)
            throw TrapBounds("memory access out of range: " + std::to_string(idx));
        return idx;
    };

    for (;;) {
        if (steps >= step_budget)
            throw TimeoutError();
        ++steps;
        if (pc < 0 || pc >= n)
            throw TrapBounds("pc out of range: " + std::to_string(pc));
        const Instr &ins = p.instrs[static_cast<std::size_t>(pc)];
        auto reg = [&](int a) -> std::int64_t & {
            return regs[static_cast<std::size_t>(ins.args[static_cast<std::size_t>(a)].value)];
        };
        switch (ins.op) {
        case Opcode::Const: reg(0) = ins.args[1].value; break;
        case Opcode::Mov:   reg(0) = reg(1); break;
        case Opcode::Add:   reg(0) = wrap_add(reg(1), reg(2)); break;
        case Opcode::Sub:   reg(0) = wrap_sub(reg(1), reg(2)); break;
        case Opcode::Mul:   reg(0) = wrap_mul(reg(1), reg(2)); break;
        case Opcode::Div: {
            std::int64_t d = reg(2);
            if (d == 0)
                throw TrapDivZero();
            std::int64_t a = reg(1);
            reg(0) = (a == std::numeric_limits<std::int64_t>::min() && d == -1) ? a : a / d;
            break;
        }
        case Opcode::Mod: {
            std::int64_t d = reg(2);
            if (d == 0)
                throw TrapDivZero();
            std::int64_t a = reg(1);
            reg(0) = (a == std::numeric_limits<std::int64_t>::min() && d == -1) ? 0 : a % d;
            break;
        }
        case Opcode::Lt: reg(0) = reg(1) < reg(2) ? 1 : 0; break;
        case Opcode::Eq: reg(0) = reg(1) == reg(2) ? 1 : 0; break;
        case Opcode::Load:
            reg(0) = mem[static_cast<std::size_t>(mem_index(ins.args[1]))];
            break;
        case Opcode::Store:
            mem[static_cast<std::size_t>(mem_index(ins.args[0]))] =
                regs[static_cast<std::size_t>(ins.args[1].value)];
            break;
        case Opcode::Jmp:
            pc = ins.args[0].value;
            continue;
        case Opcode::Jz:
            if (reg(0) == 0) {
                pc = ins.args[1].value;
                continue;
            }
            break;
        case Opcode::Out:
            outputs.push_back(reg(0));
            break;
        case Opcode::Ret:
            return outputs;
        }
        ++pc;
    }
}

namespace {

Instr mk(Opcode op, std::vector<Operand> args) { return Instr{op, std::move(args)}; }

SourceProgram make_factorial() {
    using O = Operand;
    SourceProgram p;
    p.name = "factorial";
    p.inputs = 1;
    p.instrs = {
        mk(Opcode::Const, {O::reg(1), O::imm(1)}),
        mk(Opcode::Const, {O::reg(2), O::imm(1)}),
        mk(Opcode::Jz, {O::reg(0), O::target(6)}),
        mk(Opcode::Mul, {O::reg(1), O::reg(1), O::reg(0)}),
        mk(Opcode::Sub, {O::reg(0), O::reg(0), O::reg(2)}),
        mk(Opcode::Jmp, {O::target(2)}),
        mk(Opcode::Out, {O::reg(1)}),
        mk(Opcode::Ret, {}),
    };
    return p;
}

SourceProgram make_fibonacci() {
    using O = Operand;
    SourceProgram p;
    p.name = "fibonacci";
    p.inputs = 1;
    p.instrs = {
        mk(Opcode::Const, {O::reg(1), O::imm(0)}),
        mk(Opcode::Const, {O::reg(2), O::imm(1)}),
        mk(Opcode::Const, {O::reg(3), O::imm(1)}),
        mk(Opcode::Jz, {O::reg(0), O::target(9)}),
        mk(Opcode::Add, {O::reg(4), O::reg(1), O::reg(2)}),
        mk(Opcode::Mov, {O::reg(1), O::reg(2)}),
        mk(Opcode::Mov, {O::reg(2), O::reg(4)}),
        mk(Opcode::Sub, {O::reg(0), O::reg(0), O::reg(3)}),
        mk(Opcode::Jmp, {O::target(3)}),
        mk(Opcode::Out, {O::reg(1)}),
        mk(Opcode::Ret, {}),
    };
    return p;
}

// Sorts the eight-element preset [5,1,4,2,8,3,7,6] held in mem[0..7] and
// OUTs the cells in order.
SourceProgram make_bubble_sort() {
    using O = Operand;
    SourceProgram p;
    p.name = "bubble_sort";
    p.inputs = 0;
    const std::array<std::int64_t, 8> preset = {5, 1, 4, 2, 8, 3, 7, 6};
    for (int i = 0; i < 8; ++i) {
        p.instrs.push_back(mk(Opcode::Const, {O::reg(1), O::imm(preset[static_cast<std::size_t>(i)])}));
        p.instrs.push_back(mk(Opcode::Store, {O::mem(i), O::reg(1)}));
    }
    // 16: n=8, 17: one=1, 18: i=0
    p.instrs.push_back(mk(Opcode::Const, {O::reg(0), O::imm(8)}));
    p.instrs.push_back(mk(Opcode::Const, {O::reg(1), O::imm(1)}));
    p.instrs.push_back(mk(Opcode::Const, {O::reg(2), O::imm(0)}));
    // outer loop: 19..36
    p.instrs.push_back(mk(Opcode::Lt, {O::reg(3), O::reg(2), O::reg(0)})); // 19
    p.instrs.push_back(mk(Opcode::Jz, {O::reg(3), O::target(37)}));        // 20
    p.instrs.push_back(mk(Opcode::Const, {O::reg(4), O::imm(0)}));         // 21: j=0
    p.instrs.push_back(mk(Opcode::Sub, {O::reg(5), O::reg(0), O::reg(2)})); // 22
    p.instrs.push_back(mk(Opcode::Sub, {O::reg(5), O::reg(5), O::reg(1)})); // 23: bound=n-i-1
    p.instrs.push_back(mk(Opcode::Lt, {O::reg(6), O::reg(4), O::reg(5)})); // 24
    p.instrs.push_back(mk(Opcode::Jz, {O::reg(6), O::target(35)}));        // 25
    p.instrs.push_back(mk(Opcode::Load, {O::reg(7), O::reg(4)}));          // 26: mem[j]
    p.instrs.push_back(mk(Opcode::Add, {O::reg(8), O::reg(4), O::reg(1)})); // 27
    p.instrs.push_back(mk(Opcode::Load, {O::reg(9), O::reg(8)}));          // 28: mem[j+1]
    p.instrs.push_back(mk(Opcode::Lt, {O::reg(10), O::reg(9), O::reg(7)})); // 29
    p.instrs.push_back(mk(Opcode::Jz, {O::reg(10), O::target(33)}));       // 30
    p.instrs.push_back(mk(Opcode::Store, {O::reg(4), O::reg(9)}));         // 31: swap
    p.instrs.push_back(mk(Opcode::Store, {O::reg(8), O::reg(7)}));         // 32
    p.instrs.push_back(mk(Opcode::Add, {O::reg(4), O::reg(4), O::reg(1)})); // 33: j++
    p.instrs.push_back(mk(Opcode::Jmp, {O::target(24)}));                  // 34
    p.instrs.push_back(mk(Opcode::Add, {O::reg(2), O::reg(2), O::reg(1)})); // 35: i++
    p.instrs.push_back(mk(Opcode::Jmp, {O::target(19)}));                  // 36
    // output phase: 37..44
    p.instrs.push_back(mk(Opcode::Const, {O::reg(2), O::imm(0)}));         // 37
    p.instrs.push_back(mk(Opcode::Lt, {O::reg(3), O::reg(2), O::reg(0)})); // 38
    p.instrs.push_back(mk(Opcode::Jz, {O::reg(3), O::target(44)}));        // 39
    p.instrs.push_back(mk(Opcode::Load, {O::reg(7), O::reg(2)}));          // 40
    p.instrs.push_back(mk(Opcode::Out, {O::reg(7)}));                      // 41
    p.instrs.push_back(mk(Opcode::Add, {O::reg(2), O::reg(2), O::reg(1)})); // 42
    p.instrs.push_back(mk(Opcode::Jmp, {O::target(38)}));                  // 43
    p.instrs.push_back(mk(Opcode::Ret, {}));                               // 44
    return p;
}

} // namespace

std::vector<SourceProgram> builtin_programs() {
    return {make_bubble_sort(), make_factorial(), make_fibonacci()};
}

SourceProgram builtin_program(const std::string &name) {
    for (auto &p : builtin_programs())
        if (p.name == name)
            return p;
    throw std::invalid_argument("unknown builtin program '" + name + "'");
}

namespace {

// Register conventions inside generated programs: r12/r13 are loop counters,
// r15 holds the constant 1, everything else is a value register.
constexpr int kOuterCounter = 12;
constexpr int kOne = 15;
const std::array<int, 13> kPool = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 14};

class ProgramBuilder {
  public:
    ProgramBuilder(std::uint64_t seed, int size) : rng_(seed), size_(size) {}

    SourceProgram build() {
        using O = Operand;
        out_.push_back(mk(Opcode::Const, {O::reg(kOne), O::imm(1)}));
        // one counted loop always: keeps every program branching and looping
        emit_loop(remaining() - 2);
        while (remaining() > 2)
            emit_feature(remaining() - 2);
        out_.push_back(mk(Opcode::Out, {O::reg(pool_reg())}));
        out_.push_back(mk(Opcode::Ret, {}));

        SourceProgram p;
        p.name = "random";
        p.inputs = 0;
        p.instrs = std::move(out_);
        return p;
    }

  private:
    int remaining() const { return size_ - static_cast<int>(out_.size()); }
    int pool_reg() { return kPool[static_cast<std::size_t>(rng_.below(kPool.size()))]; }

    void emit_straight(int budget) {
        using O = Operand;
        // one instruction drawn from the straight-line menu; div/mod cost 2
        switch (rng_.below(8)) {
        case 0:
            out_.push_back(mk(Opcode::Const, {O::reg(pool_reg()), O::imm(rng_.range(-999, 999))}));
            break;
        case 1: {
            Opcode alu[] = {Opcode::Add, Opcode::Sub, Opcode::Mul};
            out_.push_back(mk(alu[rng_.below(3)],
                              {O::reg(pool_reg()), O::reg(pool_reg()), O::reg(pool_reg())}));
            break;
        }
        case 2:
            if (budget >= 2) {
                int d = pool_reg();
                out_.push_back(mk(Opcode::Const, {O::reg(d), O::imm(rng_.range(1, 9))}));
                out_.push_back(mk(rng_.below(2) ? Opcode::Mod : Opcode::Div,
                                  {O::reg(pool_reg()), O::reg(pool_reg()), O::reg(d)}));
            } else {
                out_.push_back(mk(Opcode::Mov, {O::reg(pool_reg()), O::reg(pool_reg())}));
            }
            break;
        case 3:
            out_.push_back(mk(rng_.below(2) ? Opcode::Lt : Opcode::Eq,
                              {O::reg(pool_reg()), O::reg(pool_reg()), O::reg(pool_reg())}));
            break;
        case 4:
            out_.push_back(mk(Opcode::Store,
                              {O::mem(static_cast<int>(rng_.below(kMemCells))), O::reg(pool_reg())}));
            break;
        case 5:
            out_.push_back(mk(Opcode::Load,
                              {O::reg(pool_reg()), O::mem(static_cast<int>(rng_.below(kMemCells)))}));
            break;
        case 6:
            out_.push_back(mk(Opcode::Out, {O::reg(pool_reg())}));
            break;
        default:
            out_.push_back(mk(Opcode::Mov, {O::reg(pool_reg()), O::reg(pool_reg())}));
            break;
        }
    }

    // CONST rc c ; body ; SUB rc rc r15 ; JZ rc exit ; JMP top
    void emit_loop(int budget) {
        using O = Operand;
        if (budget < 5)
            return;
        int body = static_cast<int>(rng_.range(1, std::min<std::int64_t>(4, budget - 4)));
        int rc = kOuterCounter;
        out_.push_back(mk(Opcode::Const, {O::reg(rc), O::imm(rng_.range(2, 6))}));
        int top = static_cast<int>(out_.size());
        for (int i = 0; i < body;) {
            int before = static_cast<int>(out_.size());
            emit_straight(body - i);
            i += static_cast<int>(out_.size()) - before;
        }
        out_.push_back(mk(Opcode::Sub, {O::reg(rc), O::reg(rc), O::reg(kOne)}));
        int jz_at = static_cast<int>(out_.size());
        out_.push_back(mk(Opcode::Jz, {O::reg(rc), O::target(jz_at + 2)}));
        out_.push_back(mk(Opcode::Jmp, {O::target(top)}));
    }

    // LT/EQ rc ra rb ; JZ rc after ; body
    void emit_skip(int budget) {
        using O = Operand;
        if (budget < 3)
            return;
        int body = static_cast<int>(rng_.range(1, std::min<std::int64_t>(3, budget - 2)));
        int rc = pool_reg();
        out_.push_back(mk(rng_.below(2) ? Opcode::Lt : Opcode::Eq,
                          {O::reg(rc), O::reg(pool_reg()), O::reg(pool_reg())}));
        int jz_at = static_cast<int>(out_.size());
        out_.push_back(mk(Opcode::Jz, {O::reg(rc), O::target(jz_at + body + 1)}));
        for (int i = 0; i < body;) {
            int before = static_cast<int>(out_.size());
            emit_straight(body - i);
            i += static_cast<int>(out_.size()) - before;
        }
    }

    void emit_feature(int budget) {
        switch (rng_.below(6)) {
        case 0:
            if (budget >= 5) {
                emit_loop(budget);
                return;
            }
            break;
        case 1:
            if (budget >= 3) {
                emit_skip(budget);
                return;
            }
            break;
        default:
            break;
        }
        emit_straight(budget);
    }

    Rng rng_;
    int size_;
    std::vector<Instr> out_;
};

} // namespace

SourceProgram random_program(std::uint64_t seed, int size) {
    if (size < 8 || size > 512)
        throw std::invalid_argument("random_program size must be in [8, 512]");
    SourceProgram p = ProgramBuilder(seed, size).build();
    p.name = "random_" + std::to_string(seed);
    validate(p);
    return p;
}

namespace {

std::string operand_to_text(const Instr &ins, std::size_t i) {
    const Operand &o = ins.args[i];
    switch (o.kind) {
    case K::Reg: return "r" + std::to_string(o.value);
    case K::Mem: return "m" + std::to_string(o.value);
    default: return std::to_string(o.value);
    }
}

} // namespace

std::string program_to_text(const SourceProgram &p) {
    std::ostringstream out;
    out << "NAME " << p.name << "\n";
    out << "INPUTS " << p.inputs << "\n";
    for (const auto &ins : p.instrs) {
        out << opcode_name(ins.op);
        for (std::size_t i = 0; i < ins.args.size(); ++i)
            out << " " << operand_to_text(ins, i);
        out << "\n";
    }
    return out.str();
}

SourceProgram program_from_text(const std::string &text) {
    SourceProgram p;
    p.name = "program";
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        std::istringstream ss(line);
        std::string op;
        if (!(ss >> op))
            continue;
        if (op == "NAME") {
            ss >> p.name;
            continue;
        }
        if (op == "INPUTS") {
            if (!(ss >> p.inputs))
                throw ParseError(line_no, "INPUTS needs a count");
            continue;
        }
        int code = -1;
        for (int i = 0; i < kOpcodeCount; ++i)
            if (opcode_name(static_cast<Opcode>(i)) == op)
                code = i;
        if (code < 0)
            throw ParseError(line_no, "unknown opcode '" + op + "'");
        Instr ins;
        ins.op = static_cast<Opcode>(code);
        std::string tok;
        while (ss >> tok) {
            Operand o;
            try {
                if (tok[0] == 'r') {
                    o = Operand::reg(std::stoi(tok.substr(1)));
                } else if (tok[0] == 'm') {
                    o = Operand::mem(std::stoi(tok.substr(1)));
                } else {
                    std::int64_t v = std::stoll(tok);
                    bool is_target = ins.op == Opcode::Jmp ||
                                     (ins.op == Opcode::Jz && ins.args.size() == 1);
                    o = is_target ? Operand::target(static_cast<int>(v)) : Operand::imm(v);
                }
            } catch (const std::exception &) {
                throw ParseError(line_no, "bad operand '" + tok + "'");
            }
            ins.args.push_back(o);
        }
        p.instrs.push_back(std::move(ins));
    }
    validate(p);
    return p;
}

} // namespace vmlab
