#pragma once

#include <memory>
#include <string>

namespace stepforge::env {

// Immutable propositional formula over atoms A..Z, falsum and the
// connectives ->, ∧, ∨. Value type backed by a shared node; copies are
// cheap and thread-safe.
class Formula {
  public:
    enum class Kind { Atom, Falsum, Implies, And, Or };

    static Formula atom(char name);
    static Formula falsum();
    static Formula implies(Formula lhs, Formula rhs);
    static Formula conj(Formula lhs, Formula rhs);
    static Formula disj(Formula lhs, Formula rhs);

    Kind kind() const { return node_->kind; }
    char atom_name() const { return node_->atom; }
    Formula lhs() const { return Formula(node_->lhs); }
    Formula rhs() const { return Formula(node_->rhs); }

    bool is_atom() const { return kind() == Kind::Atom; }
    bool is_falsum() const { return kind() == Kind::Falsum; }
    bool is_implies() const { return kind() == Kind::Implies; }
    bool is_and() const { return kind() == Kind::And; }
    bool is_or() const { return kind() == Kind::Or; }

    bool operator==(const Formula& other) const;
    bool operator!=(const Formula& other) const { return !(*this == other); }

    // Node count (atoms and falsum count 1, connectives 1 + children).
    int size() const;
    // Leaf depth: atoms and falsum have depth 1.
    int depth() const;

    // Canonical serialization: " -> " (right-assoc, lowest precedence),
    // " ∨ ", " ∧ " (left-assoc), "⊥", minimal parentheses. parse(str()) == *this.
    std::string str() const;

  private:
    struct Node {
        Kind kind;
        char atom = 0;
        std::shared_ptr<const Node> lhs, rhs;
    };

    explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

// Parses the canonical syntax plus ASCII alternatives: "/\", "&" for ∧;
// "\/", "|" for ∨; "→" for ->; "~", "¬" for negation (sugar for X -> ⊥);
// "_|_", "False" for ⊥. Atoms are single uppercase letters.
// Throws ParseError with a 0-based byte offset on malformed input.
Formula parse_formula(const std::string& text);

}  // namespace stepforge::env
