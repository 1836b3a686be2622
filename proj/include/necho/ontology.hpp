#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "necho/types.hpp"

namespace necho {

class HierarchyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class LabelSpace { Leaf, Parent };

/// Multi-hot vector over the leaf space C or the parent space A.
struct LabelVector {
    std::vector<std::uint8_t> bits;
    LabelSpace space = LabelSpace::Leaf;

    std::size_t size() const { return bits.size(); }
    std::size_t popcount() const;
    RowVector as_row() const;
    bool operator==(const LabelVector&) const = default;
};

/// Two-level diagnosis hierarchy: every leaf code has exactly one parent.
///
/// Leaves and parents live in dense index spaces; string ids are kept only
/// for I/O.
class Ontology {
  public:
    Ontology() = default;
    /// Validates: parent_of total and in range, |A| < |C|, unique ids.
    Ontology(std::vector<std::string> leaf_codes, std::vector<std::string> parent_codes,
             std::vector<Index> parent_of);

    /// `n_parents` groups of `children_per_parent` leaves each; leaf j belongs
    /// to parent j / children_per_parent. Ids are "L###" and "P##".
    static Ontology balanced(Index n_parents, Index children_per_parent);

    Index num_leaves() const { return static_cast<Index>(leaf_codes_.size()); }
    Index num_parents() const { return static_cast<Index>(parent_codes_.size()); }

    Index parent_of(Index leaf) const { return parent_of_.at(static_cast<std::size_t>(leaf)); }
    const std::vector<Index>& parent_map() const { return parent_of_; }
    const std::vector<Index>& children(Index parent) const {
        return children_.at(static_cast<std::size_t>(parent));
    }

    const std::string& leaf_code(Index i) const { return leaf_codes_.at(static_cast<std::size_t>(i)); }
    const std::string& parent_code(Index j) const { return parent_codes_.at(static_cast<std::size_t>(j)); }
    const std::vector<std::string>& leaf_codes() const { return leaf_codes_; }
    const std::vector<std::string>& parent_codes() const { return parent_codes_; }

    Index leaf_index(const std::string& code) const;
    Index parent_index(const std::string& code) const;

    /// Parents with no children (tolerated, but they can never be predicted).
    std::vector<Index> orphan_parents() const;

    bool operator==(const Ontology& other) const {
        return leaf_codes_ == other.leaf_codes_ && parent_codes_ == other.parent_codes_ &&
               parent_of_ == other.parent_of_;
    }

  private:
    std::vector<std::string> leaf_codes_;
    std::vector<std::string> parent_codes_;
    std::vector<Index> parent_of_;
    std::vector<std::vector<Index>> children_;
    std::unordered_map<std::string, Index> leaf_lookup_;
    std::unordered_map<std::string, Index> parent_lookup_;
};

struct ParsedOntology {
    Ontology ontology;
    std::vector<std::string> warnings;
};

/// Hierarchy edge file: UTF-8 text, one "leaf_id parent_id" edge per line
/// (whitespace or comma separated). '#' starts a comment. "@parent id"
/// declares a parent without adding an edge. Indices follow first
/// appearance. Repeated edges are ignored; a leaf with two different parents
/// is a HierarchyError; childless parents produce a warning.
ParsedOntology parse_ontology(std::istream& in);
ParsedOntology parse_ontology_file(const std::filesystem::path& path);

/// Canonical form: edges in leaf-index order, with "@parent" lines where
/// needed so that parsing reproduces the same indices.
void emit_ontology(const Ontology& ont, std::ostream& out);
void write_ontology_file(const Ontology& ont, const std::filesystem::path& path);

LabelVector leaf_label_vector(std::span<const Index> codes, const Ontology& ont);
LabelVector ancestor_label_vector(std::span<const Index> codes, const Ontology& ont);

}  // namespace necho
