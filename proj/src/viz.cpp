#include "vmlab/viz.hpp"
#include "vmlab/errors.hpp"

#include <sstream>

namespace vmlab {

namespace {

std::string escape(const std::string &s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\')
            out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

} // namespace

std::string emit_dot(const Cfg &cfg, const RoleMap &roles, const ColorScheme &scheme,
                     const DotOptions &options) {
    std::ostringstream out;
    out << "// function: " << cfg.name << "\n";
    out << "// blocks: " << cfg.blocks.size() << "\n";
    out << "digraph G {\n";
    if (!cfg.blocks.empty())
        out << "  node [shape=box, style=filled];\n";
    for (const auto &b : cfg.blocks) {
        auto it = roles.find(b.id);
        if (it == roles.end())
            throw IncompleteRoleMap(b.id);
        std::ostringstream label;
        label << "B" << b.id << " [" << role_name(it->second) << "]";
        const std::size_t limit = options.max_instrs <= 0
                                      ? b.instrs.size()
                                      : std::min<std::size_t>(b.instrs.size(),
                                                              static_cast<std::size_t>(options.max_instrs));
        for (std::size_t i = 0; i < limit; ++i)
            label << "\\n" << escape(b.instrs[i]);
        if (limit < b.instrs.size())
            label << "\\n...";
        out << "  \"b" << b.id << "\" [label=\"" << label.str() << "\", fillcolor=\""
            << scheme.colors.at(it->second) << "\"";
        if (options.dashed_ids.count(b.id))
            out << ", style=\"filled,dashed\"";
        out << "];\n";
    }
    for (const auto &b : cfg.blocks)
        for (int s : b.succs)
            out << "  \"b" << b.id << "\" -> \"b" << s << "\";\n";
    out << "}\n";
    return out.str();
}

namespace {

// statements accepted: node `"x" [attrs];`, edge `"x" -> "y";`, attr defaults
// `node [attrs];`, comments, braces
bool valid_statement(const std::string &line) {
    std::string s = line;
    auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos)
        return true;
    s = s.substr(first);
    if (s.rfind("//", 0) == 0)
        return true;
    if (s == "}" || s.rfind("digraph", 0) == 0)
        return true;
    if (s.back() != ';')
        return false;
    s.pop_back();

    auto read_id = [&](std::size_t pos, std::size_t &end) -> bool {
        if (pos >= s.size())
            return false;
        if (s[pos] == '"') {
            end = s.find('"', pos + 1);
            while (end != std::string::npos && s[end - 1] == '\\')
                end = s.find('"', end + 1);
            if (end == std::string::npos)
                return false;
            ++end;
            return true;
        }
        end = pos;
        while (end < s.size() && (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '_'))
            ++end;
        return end > pos;
    };

    std::size_t end = 0;
    if (!read_id(0, end))
        return false;
    auto rest_at = s.find_first_not_of(" \t", end);
    if (rest_at == std::string::npos)
        return true; // bare node
    if (s.compare(rest_at, 2, "->") == 0) {
        std::size_t id2_at = s.find_first_not_of(" \t", rest_at + 2);
        if (id2_at == std::string::npos)
            return false;
        std::size_t end2 = 0;
        if (!read_id(id2_at, end2))
            return false;
        return s.find_first_not_of(" \t", end2) == std::string::npos;
    }
    if (s[rest_at] == '[')
        return s.back() == ']';
    return false;
}

} // namespace

bool is_valid_dot(const std::string &text) {
    std::istringstream in(text);
    std::string line;
    bool saw_open = false, saw_close = false;
    while (std::getline(in, line)) {
        if (line.find("digraph") != std::string::npos && line.find('{') != std::string::npos)
            saw_open = true;
        auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line.substr(first) == "}")
            saw_close = true;
        if (!valid_statement(line))
            return false;
    }
    return saw_open && saw_close;
}

} // namespace vmlab
