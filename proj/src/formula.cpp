#include "stepforge/formula.hpp"

#include <sstream>

#include "stepforge/errors.hpp"

namespace stepforge::env {

Formula Formula::atom(char name) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Atom;
    n->atom = name;
    return Formula(std::move(n));
}

Formula Formula::falsum() {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Falsum;
    return Formula(std::move(n));
}

Formula Formula::implies(Formula lhs, Formula rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Implies;
    n->lhs = lhs.node_;
    n->rhs = rhs.node_;
    return Formula(std::move(n));
}

Formula Formula::conj(Formula lhs, Formula rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::And;
    n->lhs = lhs.node_;
    n->rhs = rhs.node_;
    return Formula(std::move(n));
}

Formula Formula::disj(Formula lhs, Formula rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Or;
    n->lhs = lhs.node_;
    n->rhs = rhs.node_;
    return Formula(std::move(n));
}

bool Formula::operator==(const Formula& other) const {
    if (node_ == other.node_) return true;
    if (kind() != other.kind()) return false;
    switch (kind()) {
        case Kind::Atom: return atom_name() == other.atom_name();
        case Kind::Falsum: return true;
        default: return lhs() == other.lhs() && rhs() == other.rhs();
    }
}

int Formula::size() const {
    switch (kind()) {
        case Kind::Atom:
        case Kind::Falsum: return 1;
        default: return 1 + lhs().size() + rhs().size();
    }
}

int Formula::depth() const {
    switch (kind()) {
        case Kind::Atom:
        case Kind::Falsum: return 1;
        default: return 1 + std::max(lhs().depth(), rhs().depth());
    }
}

// Precedence: -> is 1 (right-assoc), ∨ is 2, ∧ is 3 (both left-assoc),
// atoms and ⊥ are 4. A child is parenthesized when its precedence is below
// what its position requires, which makes the printer injective.
static int precedence(Formula::Kind k) {
    switch (k) {
        case Formula::Kind::Implies: return 1;
        case Formula::Kind::Or: return 2;
        case Formula::Kind::And: return 3;
        default: return 4;
    }
}

static void print_rec(const Formula& f, int min_prec, std::string& out) {
    int prec = precedence(f.kind());
    bool parens = prec < min_prec;
    if (parens) out += '(';
    switch (f.kind()) {
        case Formula::Kind::Atom: out += f.atom_name(); break;
        case Formula::Kind::Falsum: out += "⊥"; break;
        case Formula::Kind::Implies:
            print_rec(f.lhs(), prec + 1, out);
            out += " -> ";
            print_rec(f.rhs(), prec, out);
            break;
        case Formula::Kind::Or:
            print_rec(f.lhs(), prec, out);
            out += " ∨ ";
            print_rec(f.rhs(), prec + 1, out);
            break;
        case Formula::Kind::And:
            print_rec(f.lhs(), prec, out);
            out += " ∧ ";
            print_rec(f.rhs(), prec + 1, out);
            break;
    }
    if (parens) out += ')';
}

std::string Formula::str() const {
    std::string out;
    print_rec(*this, 0, out);
    return out;
}

namespace {

// Recursive-descent parser. Grammar, loosest binding first:
//   formula := or_term ("->" formula)?
//   or_term := and_term ("∨" and_term)*
//   and_term := unary ("∧" unary)*
//   unary := "¬" unary | primary        (¬x is sugar for x -> ⊥)
//   primary := atom | "⊥" | "(" formula ")"
class Parser {
  public:
    explicit Parser(const std::string& text) : text_(text) {}

    Formula run() {
        Formula f = formula();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return f;
    }

  private:
    const std::string& text_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool eat(const char* tok) {
        std::size_t len = std::char_traits<char>::length(tok);
        if (text_.compare(pos_, len, tok) == 0) {
            pos_ += len;
            return true;
        }
        return false;
    }

    Formula formula() {
        Formula lhs = or_term();
        skip_ws();
        if (eat("->") || eat("→")) return Formula::implies(lhs, formula());
        return lhs;
    }

    Formula or_term() {
        Formula lhs = and_term();
        for (;;) {
            skip_ws();
            if (eat("∨") || eat("\\/") || eat("|")) {
                lhs = Formula::disj(lhs, and_term());
            } else {
                return lhs;
            }
        }
    }

    Formula and_term() {
        Formula lhs = unary();
        for (;;) {
            skip_ws();
            if (eat("∧") || eat("/\\") || eat("&")) {
                lhs = Formula::conj(lhs, unary());
            } else {
                return lhs;
            }
        }
    }

    Formula unary() {
        skip_ws();
        if (eat("¬") || eat("~")) return Formula::implies(unary(), Formula::falsum());
        return primary();
    }

    Formula primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("expected a formula", pos_);
        if (eat("(")) {
            Formula f = formula();
            skip_ws();
            if (!eat(")")) throw ParseError("expected ')'", pos_);
            return f;
        }
        if (eat("⊥") || eat("_|_") || eat("False")) return Formula::falsum();
        char c = text_[pos_];
        if (c >= 'A' && c <= 'Z') {
            ++pos_;
            return Formula::atom(c);
        }
        throw ParseError("expected a formula", pos_);
    }
};

}  // namespace

Formula parse_formula(const std::string& text) { return Parser(text).run(); }

}  // namespace stepforge::env
