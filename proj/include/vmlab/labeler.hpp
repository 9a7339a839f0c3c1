#pragma once

// Structural identification over a bare Cfg (no ground-truth access) and the
// scoring of those predictions against artifact truth.

#include "vmlab/cfg.hpp"
#include "vmlab/labels.hpp"
#include "vmlab/virtualizer.hpp"

#include <map>
#include <optional>
#include <set>

namespace vmlab {

struct LabelerParams {
    int min_fanout = 3; // must be >= 2
};

using RoleMap = std::map<int, Role>;

// First block in layout order whose out-degree strictly exceeds every earlier
// block's; nullopt when the maximum falls below min_fanout.
std::optional<int> identify_dispatcher(const Cfg &cfg, const LabelerParams &params = {});

// SCC of the dispatcher plus its direct successors.
std::set<int> vm_region(const Cfg &cfg, int dispatcher);

// Total role assignment; all NON-VM when no dispatcher qualifies.
RoleMap label_structures(const Cfg &cfg, const LabelerParams &params = {});

// One detection verdict per scored role: true when the predicted block set is
// non-empty, every predicted block is pure in truth with that role, and every
// pure truth block of that role was predicted.
struct DetectionRow {
    bool vm_start = false;
    bool dispatch = false;
    bool handler = false;
    bool vm_end = false;

    bool operator==(const DetectionRow &) const = default;
};

DetectionRow score_against_truth(const RoleMap &pred, const VmArtifact &artifact);

} // namespace vmlab
