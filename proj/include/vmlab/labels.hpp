#pragma once

#include <array>
#include <optional>
#include <string>

namespace vmlab {

// Structural role of a basic block inside a virtualized function.
enum class Role {
    DispatchStart,
    Handler,
    Vm,
    VmStart,
    VmEnd,
    NonVm,
};

inline constexpr int kRoleCount = 6;

inline constexpr std::array<Role, kRoleCount> all_roles() {
    return {Role::DispatchStart, Role::Handler, Role::Vm,
            Role::VmStart,       Role::VmEnd,   Role::NonVm};
}

inline const std::string &role_name(Role r) {
    static const std::array<std::string, kRoleCount> names = {
        "DISPATCH-START", "HANDLER", "VM", "VM-START", "VM-END", "NON-VM"};
    return names[static_cast<std::size_t>(r)];
}

inline std::optional<Role> role_from_name(const std::string &s) {
    for (Role r : all_roles())
        if (role_name(r) == s)
            return r;
    return std::nullopt;
}

// Dispatch strategy of the generated interpreter.
enum class DispatchKind {
    Switch,
    Direct,
    Indirect,
};

inline constexpr int kDispatchKindCount = 3;

inline constexpr std::array<DispatchKind, kDispatchKindCount> all_dispatch_kinds() {
    return {DispatchKind::Switch, DispatchKind::Direct, DispatchKind::Indirect};
}

inline const std::string &dispatch_kind_name(DispatchKind k) {
    static const std::array<std::string, kDispatchKindCount> names = {"SWITCH", "DIRECT", "INDIRECT"};
    return names[static_cast<std::size_t>(k)];
}

inline std::optional<DispatchKind> dispatch_kind_from_name(std::string s) {
    for (auto &c : s)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (DispatchKind k : all_dispatch_kinds())
        if (dispatch_kind_name(k) == s)
            return k;
    return std::nullopt;
}

} // namespace vmlab
