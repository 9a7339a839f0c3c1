#include "vmlab/virtualizer.hpp"
#include "vmlab/errors.hpp"
#include "vmlab/rng.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <sstream>

namespace vmlab {

BytecodeProgram compile_bytecode(const SourceProgram &program) {
    validate(program);

    // class ids follow source opcode order; the exit class comes last
    std::array<int, kOpcodeCount> class_of;
    class_of.fill(-1);
    for (const auto &ins : program.instrs)
        class_of[static_cast<std::size_t>(ins.op)] = 0;
    BytecodeProgram bc;
    for (int op = 0; op < kOpcodeCount; ++op) {
        if (class_of[static_cast<std::size_t>(op)] == 0) {
            class_of[static_cast<std::size_t>(op)] = static_cast<int>(bc.class_opcodes.size());
            bc.class_opcodes.push_back(op);
        }
    }
    bc.class_opcodes.push_back(-1); // exit class
    bc.handler_count = static_cast<int>(bc.class_opcodes.size());
    bc.vpc0 = 0;

    using K = Operand::Kind;
    for (const auto &ins : program.instrs) {
        Vop v;
        v.opcode = class_of[static_cast<std::size_t>(ins.op)];
        switch (ins.op) {
        case Opcode::Load:
            v.fields = {ins.args[0].value, ins.args[1].kind == K::Mem ? 1 : 0, ins.args[1].value};
            break;
        case Opcode::Store:
            v.fields = {ins.args[0].kind == K::Mem ? 1 : 0, ins.args[0].value, ins.args[1].value};
            break;
        default:
            for (std::size_t i = 0; i < ins.args.size() && i < 3; ++i)
                v.fields[i] = ins.args[i].value;
            break;
        }
        bc.vops.push_back(v);
    }
    // trailing exit vop: RET transfers here, fall-through lands here
    bc.vops.push_back(Vop{bc.exit_class(), {}});
    return bc;
}

namespace {

// Fixed block positions shared by all three shapes.
constexpr int kPrologueId = 0;
constexpr int kVmStartId = 1;
constexpr int kDispatchId = 2;

int stride_of(DispatchKind kind) {
    switch (kind) {
    case DispatchKind::Switch: return 8;
    case DispatchKind::Direct: return 4;
    case DispatchKind::Indirect: return 12;
    }
    return 8;
}

bool branchy(Opcode op) { return op == Opcode::Lt || op == Opcode::Eq || op == Opcode::Jz; }

std::string lbl(int id) { return "l" + std::to_string(id); }

// Emits the per-kind pseudo-assembly. The dialect is a small register machine:
// scratch registers t0..t9, virtual pc `vpc`, memory regions code/vregs/mem/
// htab/frame/jtab, labels l<block-id>.
class TextEmitter {
  public:
    TextEmitter(DispatchKind kind, std::uint64_t seed) : kind_(kind) {
        Rng rng(seed);
        frame_size_ = 16 + 8 * static_cast<int>(rng.below(13));
        scratch_shift_ = static_cast<int>(rng.below(3));
    }

    int frame_size() const { return frame_size_; }

    // scratch registers t1..t6 shift by a seed-chosen offset; t0/t9 are fixed
    std::string t(int i) const { return "t" + std::to_string(i + scratch_shift_); }

    // operand field f of the current vop, as seen from the handler
    std::string field(int f) const {
        switch (kind_) {
        case DispatchKind::Switch: return "[code+vpc-" + std::to_string(7 - f) + "]";
        case DispatchKind::Direct: return "[code+vpc+" + std::to_string(1 + f) + "]";
        case DispatchKind::Indirect: return "[code+vpc-" + std::to_string(11 - f) + "]";
        }
        return "";
    }

    std::vector<std::string> prologue(int inputs) const {
        std::vector<std::string> ins;
        ins.push_back("add sp sp -" + std::to_string(frame_size_));
        for (int i = 0; i < inputs; ++i)
            ins.push_back("store [frame+" + std::to_string(i) + "] a" + std::to_string(i));
        ins.push_back("mov t0 code");
        if (kind_ == DispatchKind::Direct)
            ins.push_back("call __vm_reloc");
        else if (kind_ == DispatchKind::Indirect)
            ins.push_back("mov t1 htab");
        ins.push_back("jmp " + lbl(kVmStartId));
        return ins;
    }

    std::vector<std::string> vm_start(int inputs, const std::vector<int> &head_ids) const {
        std::vector<std::string> ins;
        ins.push_back("mov vpc 0");
        ins.push_back("mov t0 0");
        for (int r = 0; r < kRegCount; ++r)
            ins.push_back("store [vregs+" + std::to_string(r) + "] t0");
        for (int i = 0; i < inputs; ++i) {
            ins.push_back("load t1 [frame+" + std::to_string(i) + "]");
            ins.push_back("store [vregs+" + std::to_string(i) + "] t1");
        }
        if (kind_ == DispatchKind::Direct) {
            // rebase the address-coded stream onto the handler block addresses
            ins.push_back("mov t1 " + lbl(head_ids.front()));
            for (int j = 0; j < 3; ++j) {
                std::string cell = "[code+" + std::to_string(j * 4) + "]";
                ins.push_back("load t2 " + cell);
                ins.push_back("add t2 t2 t1");
                ins.push_back("store " + cell + " t2");
            }
        } else if (kind_ == DispatchKind::Indirect) {
            for (std::size_t c = 0; c < head_ids.size(); ++c)
                ins.push_back("store [htab+" + std::to_string(c) + "] " + lbl(head_ids[c]));
        }
        ins.push_back("jmp " + lbl(kDispatchId));
        return ins;
    }

    std::vector<std::string> dispatcher(int handler_count, int vmend_id) const {
        switch (kind_) {
        case DispatchKind::Switch:
            return {"load t0 [code+vpc]",
                    "add vpc vpc 8",
                    "cmp t0 " + std::to_string(handler_count),
                    "jcc ge " + lbl(vmend_id),
                    "jmp [jtab+t0]"};
        case DispatchKind::Direct:
            return {"load t0 [code+vpc]",
                    "cmp t0 0",
                    "jcc eq " + lbl(vmend_id),
                    "jmp t0"};
        case DispatchKind::Indirect:
            return {"load t0 [code+vpc]",
                    "cmp t0 " + std::to_string(handler_count),
                    "jcc ge " + lbl(vmend_id),
                    "load t1 [htab+t0]",
                    "add vpc vpc 12",
                    "jmp t1"};
        }
        return {};
    }

    // common tail returning control to the dispatcher; `advance` is false for
    // handlers that assign vpc absolutely
    void tail(std::vector<std::string> &ins, bool advance = true) const {
        if (kind_ == DispatchKind::Direct && advance)
            ins.push_back("add vpc vpc 4");
        ins.push_back("jmp " + lbl(kDispatchId));
    }

    std::vector<std::string> vm_end(int epilogue_id) const {
        std::vector<std::string> ins;
        ins.push_back("load t0 [vregs+15]");
        ins.push_back("mov rv t0");
        if (kind_ == DispatchKind::Direct) {
            ins.push_back("mov t9 0");
            ins.push_back("store [code+0] t9");
        } else if (kind_ == DispatchKind::Indirect) {
            ins.push_back("mov t9 0");
            ins.push_back("store [htab+0] t9");
        }
        ins.push_back("jmp " + lbl(epilogue_id));
        return ins;
    }

    std::vector<std::string> epilogue() const {
        return {"add sp sp " + std::to_string(frame_size_), "ret"};
    }

  private:
    DispatchKind kind_;
    int frame_size_;
    int scratch_shift_;
};

struct PendingBlock {
    std::vector<std::string> instrs;
    std::vector<int> succs;
    Role role = Role::NonVm;
};

} // namespace

VmArtifact virtualize(const SourceProgram &program, DispatchKind kind, int opt_level,
                      std::uint64_t seed) {
    if (opt_level != 0 && opt_level != 1)
        throw std::invalid_argument("opt_level must be 0 or 1");

    VmArtifact art;
    art.kind = kind;
    art.opt_level = 0;
    art.seed = seed;
    art.bytecode = compile_bytecode(program);
    const BytecodeProgram &bc = art.bytecode;
    const int stride = stride_of(kind);
    TextEmitter em(kind, seed);

    // Count handler blocks first so every label in the emitted text is final:
    // the LT/EQ/JZ handlers carry two interior blocks.
    int handler_blocks = 0;
    std::vector<int> head_ids(static_cast<std::size_t>(bc.handler_count));
    for (int c = 0; c < bc.handler_count; ++c) {
        head_ids[static_cast<std::size_t>(c)] = kDispatchId + 1 + handler_blocks;
        int op = bc.class_opcodes[static_cast<std::size_t>(c)];
        bool interior = op >= 0 && branchy(static_cast<Opcode>(op));
        handler_blocks += interior ? 3 : 1;
    }
    const int vmend_id = kDispatchId + 1 + handler_blocks;
    const int epilogue_id = vmend_id + 1;
    const std::int64_t exit_offset =
        static_cast<std::int64_t>(program.instrs.size()) * stride;

    std::vector<PendingBlock> pending;
    pending.push_back({em.prologue(program.inputs), {kVmStartId}, Role::NonVm});
    pending.push_back({em.vm_start(program.inputs, head_ids), {kDispatchId}, Role::VmStart});
    {
        PendingBlock disp{em.dispatcher(bc.handler_count, vmend_id), {}, Role::DispatchStart};
        disp.succs = head_ids;
        disp.succs.push_back(vmend_id); // exit edge last
        pending.push_back(std::move(disp));
    }

    for (int c = 0; c < bc.handler_count; ++c) {
        const int head = head_ids[static_cast<std::size_t>(c)];
        const int op_val = bc.class_opcodes[static_cast<std::size_t>(c)];
        if (op_val < 0) { // exit class: leave the loop
            pending.push_back({{"mov t9 0", "jmp " + lbl(vmend_id)}, {vmend_id}, Role::Handler});
            continue;
        }
        const Opcode op = static_cast<Opcode>(op_val);
        std::vector<std::string> ins;
        switch (op) {
        case Opcode::Const:
            ins = {"load " + em.t(1) + " " + em.field(0), "load " + em.t(2) + " " + em.field(1),
                   "store [vregs+" + em.t(1) + "] " + em.t(2)};
            em.tail(ins);
            break;
        case Opcode::Mov:
            ins = {"load " + em.t(1) + " " + em.field(0), "load " + em.t(2) + " " + em.field(1),
                   "load " + em.t(3) + " [vregs+" + em.t(2) + "]",
                   "store [vregs+" + em.t(1) + "] " + em.t(3)};
            em.tail(ins);
            break;
        case Opcode::Add: case Opcode::Sub: case Opcode::Mul:
        case Opcode::Div: case Opcode::Mod: {
            std::string mn = opcode_name(op);
            for (auto &ch : mn)
                ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            ins = {"load " + em.t(1) + " " + em.field(0), "load " + em.t(2) + " " + em.field(1),
                   "load " + em.t(3) + " " + em.field(2),
                   "load " + em.t(4) + " [vregs+" + em.t(2) + "]",
                   "load " + em.t(5) + " [vregs+" + em.t(3) + "]",
                   mn + " " + em.t(4) + " " + em.t(4) + " " + em.t(5),
                   "store [vregs+" + em.t(1) + "] " + em.t(4)};
            em.tail(ins);
            break;
        }
        case Opcode::Lt: case Opcode::Eq: {
            const std::string cc = op == Opcode::Lt ? "lt" : "eq";
            ins = {"load " + em.t(1) + " " + em.field(0), "load " + em.t(2) + " " + em.field(1),
                   "load " + em.t(3) + " " + em.field(2),
                   "load " + em.t(4) + " [vregs+" + em.t(2) + "]",
                   "load " + em.t(5) + " [vregs+" + em.t(3) + "]",
                   "cmp " + em.t(4) + " " + em.t(5), "jcc " + cc + " " + lbl(head + 1)};
            pending.push_back({std::move(ins), {head + 1, head + 2}, Role::Handler});
            // taken / fallthrough interiors write the flag and loop back
            std::vector<std::string> taken = {"mov " + em.t(6) + " 1",
                                              "store [vregs+" + em.t(1) + "] " + em.t(6)};
            em.tail(taken);
            pending.push_back({std::move(taken), {kDispatchId}, Role::Vm});
            std::vector<std::string> fall = {"mov " + em.t(6) + " 0",
                                             "store [vregs+" + em.t(1) + "] " + em.t(6)};
            em.tail(fall);
            pending.push_back({std::move(fall), {kDispatchId}, Role::Vm});
            continue;
        }
        case Opcode::Load:
            ins = {"load " + em.t(1) + " " + em.field(0), "load " + em.t(2) + " " + em.field(2),
                   "load " + em.t(3) + " [mem+" + em.t(2) + "]",
                   "store [vregs+" + em.t(1) + "] " + em.t(3)};
            em.tail(ins);
            break;
        case Opcode::Store:
            ins = {"load " + em.t(1) + " " + em.field(1), "load " + em.t(2) + " " + em.field(2),
                   "load " + em.t(3) + " [vregs+" + em.t(2) + "]",
                   "store [mem+" + em.t(1) + "] " + em.t(3)};
            em.tail(ins);
            break;
        case Opcode::Jmp:
            ins = {"load " + em.t(1) + " " + em.field(0), "mov vpc " + em.t(1)};
            em.tail(ins, /*advance=*/false);
            break;
        case Opcode::Jz: {
            ins = {"load " + em.t(1) + " " + em.field(0),
                   "load " + em.t(2) + " [vregs+" + em.t(1) + "]",
                   "load " + em.t(3) + " " + em.field(1), "cmp " + em.t(2) + " 0",
                   "jcc z " + lbl(head + 1)};
            pending.push_back({std::move(ins), {head + 1, head + 2}, Role::Handler});
            // taken path assigns vpc absolutely; under indirect dispatch the
            // hub advance is pre-compensated
            std::vector<std::string> taken = {"mov vpc " + em.t(3)};
            if (kind == DispatchKind::Indirect)
                taken.push_back("sub vpc vpc 12");
            em.tail(taken, /*advance=*/false);
            pending.push_back({std::move(taken), {kDispatchId}, Role::Vm});
            std::vector<std::string> fall;
            em.tail(fall);
            pending.push_back({std::move(fall), {kDispatchId}, Role::Vm});
            continue;
        }
        case Opcode::Out:
            ins = {"load " + em.t(1) + " " + em.field(0),
                   "load " + em.t(2) + " [vregs+" + em.t(1) + "]", "mov a0 " + em.t(2),
                   "call __out"};
            em.tail(ins);
            break;
        case Opcode::Ret:
            ins = {"mov vpc " + std::to_string(exit_offset)};
            em.tail(ins, /*advance=*/false);
            break;
        }
        pending.push_back({std::move(ins), {kDispatchId}, Role::Handler});
    }

    pending.push_back({em.vm_end(epilogue_id), {epilogue_id}, Role::VmEnd});
    pending.push_back({em.epilogue(), {}, Role::NonVm});

    art.cfg.name = program.name;
    art.cfg.entry = kPrologueId;
    for (std::size_t i = 0; i < pending.size(); ++i) {
        BasicBlock b;
        b.id = static_cast<int>(i);
        b.instrs = std::move(pending[i].instrs);
        b.succs = std::move(pending[i].succs);
        art.truth[b.id] = {TruthSpan{0, static_cast<int>(b.instrs.size()), pending[i].role}};
        art.cfg.blocks.push_back(std::move(b));
    }
    validate(art.cfg);

    return opt_level == 1 ? optimize(art) : art;
}

std::vector<std::int64_t> interpret(const VmArtifact &artifact,
                                    const std::vector<std::int64_t> &inputs,
                                    std::int64_t step_budget) {
    const BytecodeProgram &bc = artifact.bytecode;
    std::array<std::int64_t, kRegCount> regs{};
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (i >= kRegCount)
            throw std::invalid_argument("too many inputs");
        regs[i] = inputs[i];
    }
    std::vector<std::int64_t> mem(kMemCells, 0);
    std::vector<std::int64_t> outputs;

    std::int64_t vpc = bc.vpc0;
    std::int64_t steps = 0;
    const auto n = static_cast<std::int64_t>(bc.vops.size());

    auto wrap = [](std::uint64_t v) { return static_cast<std::int64_t>(v); };
    auto mem_at = [&](std::int64_t mode, std::int64_t val) -> std::int64_t & {
        std::int64_t idx = mode ? val : regs[static_cast<std::size_t>(val)];
        if (idx < 0 || idx >= kMemCells)
            throw TrapBounds("memory access out of range: " + std::to_string(idx));
        return mem[static_cast<std::size_t>(idx)];
    };

    for (;;) {
        if (steps >= step_budget)
            throw TimeoutError();
        ++steps;
        if (vpc < 0 || vpc >= n)
            throw TrapBounds("vpc out of range: " + std::to_string(vpc));
        const Vop &v = bc.vops[static_cast<std::size_t>(vpc)];
        const int op_val = bc.class_opcodes[static_cast<std::size_t>(v.opcode)];
        if (op_val < 0)
            return outputs; // exit class
        auto f = [&](int i) { return v.fields[static_cast<std::size_t>(i)]; };
        auto r = [&](int i) -> std::int64_t & { return regs[static_cast<std::size_t>(f(i))]; };
        switch (static_cast<Opcode>(op_val)) {
        case Opcode::Const: r(0) = f(1); break;
        case Opcode::Mov:   r(0) = r(1); break;
        case Opcode::Add:
            r(0) = wrap(static_cast<std::uint64_t>(r(1)) + static_cast<std::uint64_t>(r(2)));
            break;
        case Opcode::Sub:
            r(0) = wrap(static_cast<std::uint64_t>(r(1)) - static_cast<std::uint64_t>(r(2)));
            break;
        case Opcode::Mul:
            r(0) = wrap(static_cast<std::uint64_t>(r(1)) * static_cast<std::uint64_t>(r(2)));
            break;
        case Opcode::Div: {
            std::int64_t d = r(2);
            if (d == 0)
                throw TrapDivZero();
            std::int64_t a = r(1);
            r(0) = (a == std::numeric_limits<std::int64_t>::min() && d == -1) ? a : a / d;
            break;
        }
        case Opcode::Mod: {
            std::int64_t d = r(2);
            if (d == 0)
                throw TrapDivZero();
            std::int64_t a = r(1);
            r(0) = (a == std::numeric_limits<std::int64_t>::min() && d == -1) ? 0 : a % d;
            break;
        }
        case Opcode::Lt: r(0) = r(1) < r(2) ? 1 : 0; break;
        case Opcode::Eq: r(0) = r(1) == r(2) ? 1 : 0; break;
        case Opcode::Load:  r(0) = mem_at(f(1), f(2)); break;
        case Opcode::Store: mem_at(f(0), f(1)) = regs[static_cast<std::size_t>(f(2))]; break;
        case Opcode::Jmp:
            vpc = f(0);
            continue;
        case Opcode::Jz:
            if (r(0) == 0) {
                vpc = f(1);
                continue;
            }
            break;
        case Opcode::Out: outputs.push_back(r(0)); break;
        case Opcode::Ret: return outputs;
        }
        ++vpc;
    }
}

namespace {

void append_spans(std::vector<TruthSpan> &dst, const std::vector<TruthSpan> &src, int offset) {
    for (TruthSpan s : src) {
        s.begin += offset;
        s.end += offset;
        if (s.begin == s.end)
            continue;
        if (!dst.empty() && dst.back().role == s.role && dst.back().end == s.begin)
            dst.back().end = s.end;
        else
            dst.push_back(s);
    }
}

} // namespace

VmArtifact optimize(const VmArtifact &artifact) {
    if (artifact.opt_level != 0)
        throw std::invalid_argument("optimize expects an opt-0 artifact");

    VmArtifact out = artifact;
    out.opt_level = 1;
    Cfg &cfg = out.cfg;

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
            BasicBlock &a = cfg.blocks[i];
            if (a.succs.size() != 1)
                continue;
            const int b_id = a.succs[0];
            if (b_id == a.id || b_id == cfg.entry)
                continue;
            if (predecessors(cfg, b_id).size() != 1)
                continue;

            const std::size_t bi = cfg.index_of(b_id);
            BasicBlock b = std::move(cfg.blocks[bi]);

            std::vector<TruthSpan> spans = out.truth[a.id];
            // branch merging drops the explicit jump between the two blocks
            if (!a.instrs.empty() && a.instrs.back() == "jmp l" + std::to_string(b_id)) {
                a.instrs.pop_back();
                if (!spans.empty()) {
                    spans.back().end -= 1;
                    if (spans.back().begin == spans.back().end)
                        spans.pop_back();
                }
            }
            const int offset = static_cast<int>(a.instrs.size());
            a.instrs.insert(a.instrs.end(), b.instrs.begin(), b.instrs.end());
            append_spans(spans, out.truth[b.id], offset);
            out.truth[a.id] = std::move(spans);
            out.truth.erase(b.id);
            a.succs = std::move(b.succs);
            cfg.blocks.erase(cfg.blocks.begin() + static_cast<std::ptrdiff_t>(bi));
            changed = true;
            break;
        }
    }
    return out;
}

Cfg insert_markers(const VmArtifact &artifact) {
    Cfg cfg = artifact.cfg;
    for (auto &b : cfg.blocks) {
        auto it = artifact.truth.find(b.id);
        if (it == artifact.truth.end())
            continue;
        std::vector<TruthSpan> spans = it->second;
        std::sort(spans.begin(), spans.end(),
                  [](const TruthSpan &x, const TruthSpan &y) { return x.begin < y.begin; });
        for (auto s = spans.rbegin(); s != spans.rend(); ++s)
            b.instrs.insert(b.instrs.begin() + s->begin, "call __vmlab_" + role_name(s->role));
    }
    return cfg;
}

Cfg strip_markers(const Cfg &cfg) {
    Cfg out = cfg;
    for (auto &b : out.blocks) {
        std::vector<std::string> kept;
        kept.reserve(b.instrs.size());
        for (const auto &ins : b.instrs) {
            std::istringstream ss(ins);
            std::string first, second;
            ss >> first >> second;
            if (first == "call" && second.rfind("__vmlab_", 0) == 0)
                continue;
            kept.push_back(ins);
        }
        b.instrs = std::move(kept);
    }
    return out;
}

std::optional<Role> pure_role(const VmArtifact &artifact, int block_id) {
    auto it = artifact.truth.find(block_id);
    if (it == artifact.truth.end() || it->second.empty())
        return std::nullopt;
    Role r = it->second.front().role;
    for (const auto &s : it->second)
        if (s.role != r)
            return std::nullopt;
    return r;
}

CfgDocument artifact_to_document(const VmArtifact &artifact) {
    CfgDocument doc;
    doc.cfg = artifact.cfg;
    doc.meta.emplace_back("kind", dispatch_kind_name(artifact.kind));
    doc.meta.emplace_back("opt", std::to_string(artifact.opt_level));
    doc.meta.emplace_back("seed", std::to_string(artifact.seed));
    for (const auto &[id, spans] : artifact.truth) {
        auto &out = doc.labels[id];
        if (spans.size() == 1) {
            out.push_back(LabelSpan{role_name(spans.front().role), -1, -1});
        } else {
            for (const auto &s : spans)
                out.push_back(LabelSpan{role_name(s.role), s.begin, s.end});
        }
    }
    return doc;
}

std::map<int, std::vector<TruthSpan>> truth_from_document(const CfgDocument &doc) {
    std::map<int, std::vector<TruthSpan>> truth;
    for (const auto &[id, spans] : doc.labels) {
        const auto len = static_cast<int>(doc.cfg.block(id).instrs.size());
        for (const auto &s : spans) {
            auto role = role_from_name(s.role);
            if (!role)
                throw ValidationError("unknown role '" + s.role + "' on block " + std::to_string(id));
            if (s.whole_block())
                truth[id].push_back(TruthSpan{0, len, *role});
            else
                truth[id].push_back(TruthSpan{s.begin, s.end, *role});
        }
    }
    return truth;
}

} // namespace vmlab
