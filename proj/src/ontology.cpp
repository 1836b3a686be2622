#include "necho/ontology.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace necho {

std::size_t LabelVector::popcount() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

RowVector LabelVector::as_row() const {
    RowVector r(static_cast<Index>(bits.size()));
    for (std::size_t i = 0; i < bits.size(); ++i) r(static_cast<Index>(i)) = bits[i];
    return r;
}

Ontology::Ontology(std::vector<std::string> leaf_codes, std::vector<std::string> parent_codes,
                   std::vector<Index> parent_of)
    : leaf_codes_(std::move(leaf_codes)),
      parent_codes_(std::move(parent_codes)),
      parent_of_(std::move(parent_of)) {
    if (parent_of_.size() != leaf_codes_.size())
        throw HierarchyError("parent map covers " + std::to_string(parent_of_.size()) + " of " +
                             std::to_string(leaf_codes_.size()) + " leaves");
    if (parent_codes_.size() >= leaf_codes_.size())
        throw HierarchyError("parent space (" + std::to_string(parent_codes_.size()) +
                             ") must be smaller than leaf space (" +
                             std::to_string(leaf_codes_.size()) + ")");
    children_.assign(parent_codes_.size(), {});
    for (std::size_t i = 0; i < leaf_codes_.size(); ++i) {
        if (!leaf_lookup_.emplace(leaf_codes_[i], static_cast<Index>(i)).second)
            throw HierarchyError("duplicate leaf code " + leaf_codes_[i]);
        const Index p = parent_of_[i];
        if (p < 0 || p >= num_parents())
            throw HierarchyError("leaf " + leaf_codes_[i] + " has out-of-range parent");
        children_[static_cast<std::size_t>(p)].push_back(static_cast<Index>(i));
    }
    for (std::size_t j = 0; j < parent_codes_.size(); ++j)
        if (!parent_lookup_.emplace(parent_codes_[j], static_cast<Index>(j)).second)
            throw HierarchyError("duplicate parent code " + parent_codes_[j]);
}

Ontology Ontology::balanced(Index n_parents, Index children_per_parent) {
    if (n_parents < 1 || children_per_parent < 2)
        throw ConfigError("balanced ontology needs >= 1 parent and >= 2 children per parent");
    std::vector<std::string> leaves, parents;
    std::vector<Index> parent_of;
    char buf[32];
    for (Index p = 0; p < n_parents; ++p) {
        std::snprintf(buf, sizeof buf, "P%02lld", static_cast<long long>(p));
        parents.emplace_back(buf);
    }
    for (Index i = 0; i < n_parents * children_per_parent; ++i) {
        std::snprintf(buf, sizeof buf, "L%03lld", static_cast<long long>(i));
        leaves.emplace_back(buf);
        parent_of.push_back(i / children_per_parent);
    }
    return Ontology(std::move(leaves), std::move(parents), std::move(parent_of));
}

Index Ontology::leaf_index(const std::string& code) const {
    auto it = leaf_lookup_.find(code);
    if (it == leaf_lookup_.end()) throw std::out_of_range("unknown leaf code " + code);
    return it->second;
}

Index Ontology::parent_index(const std::string& code) const {
    auto it = parent_lookup_.find(code);
    if (it == parent_lookup_.end()) throw std::out_of_range("unknown parent code " + code);
    return it->second;
}

std::vector<Index> Ontology::orphan_parents() const {
    std::vector<Index> out;
    for (std::size_t j = 0; j < children_.size(); ++j)
        if (children_[j].empty()) out.push_back(static_cast<Index>(j));
    return out;
}

ParsedOntology parse_ontology(std::istream& in) {
    std::vector<std::string> leaves, parents;
    std::vector<Index> parent_of;
    std::unordered_map<std::string, Index> leaf_ix, parent_ix;

    auto intern_parent = [&](const std::string& id) {
        auto [it, fresh] = parent_ix.emplace(id, static_cast<Index>(parents.size()));
        if (fresh) parents.push_back(id);
        return it->second;
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        std::vector<std::string> tok;
        for (std::string t; fields >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok[0] == "@parent") {
            if (tok.size() != 2)
                throw HierarchyError("line " + std::to_string(lineno) + ": @parent takes one id");
            intern_parent(tok[1]);
            continue;
        }
        if (tok.size() != 2)
            throw HierarchyError("line " + std::to_string(lineno) + ": expected 'leaf parent', got " +
                                 std::to_string(tok.size()) + " fields");
        const Index p = intern_parent(tok[1]);
        auto [it, fresh] = leaf_ix.emplace(tok[0], static_cast<Index>(leaves.size()));
        if (fresh) {
            leaves.push_back(tok[0]);
            parent_of.push_back(p);
        } else if (parent_of[static_cast<std::size_t>(it->second)] != p) {
            throw HierarchyError("line " + std::to_string(lineno) + ": leaf " + tok[0] +
                                 " mapped to both " +
                                 parents[static_cast<std::size_t>(parent_of[static_cast<std::size_t>(it->second)])] +
                                 " and " + tok[1]);
        }
    }

    ParsedOntology out{Ontology(std::move(leaves), std::move(parents), std::move(parent_of)), {}};
    for (const Index j : out.ontology.orphan_parents())
        out.warnings.push_back("parent " + out.ontology.parent_code(j) + " has no children");
    return out;
}

ParsedOntology parse_ontology_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ontology file " + path.string());
    return parse_ontology(in);
}

void emit_ontology(const Ontology& ont, std::ostream& out) {
    out << "# leaf_id parent_id\n";
    Index introduced = 0;  // parents [0, introduced) have appeared
    for (Index i = 0; i < ont.num_leaves(); ++i) {
        const Index p = ont.parent_of(i);
        for (; introduced < p; ++introduced) out << "@parent " << ont.parent_code(introduced) << "\n";
        if (introduced == p) ++introduced;
        out << ont.leaf_code(i) << " " << ont.parent_code(p) << "\n";
    }
    for (; introduced < ont.num_parents(); ++introduced)
        out << "@parent " << ont.parent_code(introduced) << "\n";
}

void write_ontology_file(const Ontology& ont, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write ontology file " + path.string());
    emit_ontology(ont, out);
}

namespace {
void check_codes(std::span<const Index> codes, const Ontology& ont) {
    for (const Index c : codes)
        if (c < 0 || c >= ont.num_leaves())
            throw std::out_of_range("leaf index " + std::to_string(c) + " outside [0, " +
                                    std::to_string(ont.num_leaves()) + ")");
}
}  // namespace

LabelVector leaf_label_vector(std::span<const Index> codes, const Ontology& ont) {
    check_codes(codes, ont);
    LabelVector v{std::vector<std::uint8_t>(static_cast<std::size_t>(ont.num_leaves()), 0), LabelSpace::Leaf};
    for (const Index c : codes) v.bits[static_cast<std::size_t>(c)] = 1;
    return v;
}

LabelVector ancestor_label_vector(std::span<const Index> codes, const Ontology& ont) {
    check_codes(codes, ont);
    LabelVector v{std::vector<std::uint8_t>(static_cast<std::size_t>(ont.num_parents()), 0),
                  LabelSpace::Parent};
    for (const Index c : codes) v.bits[static_cast<std::size_t>(ont.parent_of(c))] = 1;
    return v;
}

}  // namespace necho
