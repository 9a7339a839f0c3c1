#include "vmlab/labeler.hpp"
#include "vmlab/errors.hpp"

#include <algorithm>

namespace vmlab {

std::optional<int> identify_dispatcher(const Cfg &cfg, const LabelerParams &params) {
    if (params.min_fanout < 2)
        throw std::invalid_argument("min_fanout must be >= 2");
    int best = -1;
    int best_degree = 0;
    for (const auto &b : cfg.blocks) {
        int n = static_cast<int>(b.succs.size());
        if (n > best_degree) {
            best_degree = n;
            best = b.id;
        }
    }
    if (best < 0 || best_degree < params.min_fanout)
        return std::nullopt;
    return best;
}

std::set<int> vm_region(const Cfg &cfg, int dispatcher) {
    auto scc = scc_of(cfg, dispatcher);
    std::set<int> region(scc.members.begin(), scc.members.end());
    for (int s : cfg.block(dispatcher).succs)
        region.insert(s);
    region.insert(dispatcher);
    return region;
}

RoleMap label_structures(const Cfg &cfg, const LabelerParams &params) {
    RoleMap roles;
    for (const auto &b : cfg.blocks)
        roles[b.id] = Role::NonVm;

    auto dispatcher = identify_dispatcher(cfg, params);
    if (!dispatcher)
        return roles;
    const int disp = *dispatcher;

    auto scc = scc_of(cfg, disp);
    std::set<int> in_scc(scc.members.begin(), scc.members.end());
    std::set<int> region = vm_region(cfg, disp);

    auto leaves_region = [&](int id) {
        for (int s : cfg.block(id).succs)
            if (!region.count(s))
                return true;
        return false;
    };

    roles[disp] = Role::DispatchStart;

    // The dispatcher's exit path is its last successor edge when that block
    // does not loop back; a multiway dispatch lowers its bounds-check/default
    // case as the trailing edge.
    const auto &dsuccs = cfg.block(disp).succs;
    int exit_block = -1;
    if (!dsuccs.empty() && !in_scc.count(dsuccs.back()) && dsuccs.back() != disp)
        exit_block = dsuccs.back();

    for (int s : dsuccs) {
        if (s == disp || s == exit_block)
            continue;
        if (!leaves_region(s))
            roles[s] = Role::Handler;
    }

    for (int p : predecessors(cfg, disp))
        if (!region.count(p))
            roles[p] = Role::VmStart;

    for (int id : region) {
        if (roles[id] != Role::NonVm && roles[id] != Role::DispatchStart)
            continue;
        if (id == disp)
            continue;
        if (id == exit_block || leaves_region(id))
            roles[id] = Role::VmEnd;
        else
            roles[id] = Role::Vm;
    }
    return roles;
}

DetectionRow score_against_truth(const RoleMap &pred, const VmArtifact &artifact) {
    auto check = [&](Role role) {
        std::set<int> predicted;
        for (const auto &[id, r] : pred)
            if (r == role)
                predicted.insert(id);
        std::set<int> truth_pure;
        for (const auto &[id, spans] : artifact.truth) {
            (void)spans;
            if (pure_role(artifact, id) == role)
                truth_pure.insert(id);
        }
        return !predicted.empty() && predicted == truth_pure;
    };

    DetectionRow row;
    row.vm_start = check(Role::VmStart);
    row.dispatch = check(Role::DispatchStart);
    row.handler = check(Role::Handler);
    row.vm_end = check(Role::VmEnd);
    return row;
}

} // namespace vmlab
