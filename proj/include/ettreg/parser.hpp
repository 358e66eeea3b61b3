#ifndef ETTREG_PARSER_HPP
#define ETTREG_PARSER_HPP

#include <cctype>
#include <charconv>
#include <string>
#include <string_view>

#include "ettreg/formula.hpp"

namespace ettreg {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line, int col)
        : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                             std::to_string(col) + ": " + msg),
          line(line),
          col(col) {}
    int line;
    int col;
};

namespace detail {

// Recursive-descent parser for the property grammar (see docs/grammar.md).
// Negation is threaded through the descent as a polarity flag, so the
// returned tree is already in negation normal form: De Morgan swaps the
// connectives and a negated atom flips its comparator.
class PropertyParser {
public:
    explicit PropertyParser(std::string_view text) : text_(text) {}

    Formula parse() {
        Formula f = parse_or(false);
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input after property");
        return f;
    }

private:
    Formula parse_or(bool neg) {
        Formula f = parse_and(neg);
        while (try_consume("||")) {
            Formula rhs = parse_and(neg);
            f = neg ? Formula::conj(std::move(f), std::move(rhs))
                    : Formula::disj(std::move(f), std::move(rhs));
        }
        return f;
    }

    Formula parse_and(bool neg) {
        Formula f = parse_unary(neg);
        while (try_consume("&&")) {
            Formula rhs = parse_unary(neg);
            f = neg ? Formula::disj(std::move(f), std::move(rhs))
                    : Formula::conj(std::move(f), std::move(rhs));
        }
        return f;
    }

    Formula parse_unary(bool neg) {
        skip_ws();
        if (try_consume("!")) return parse_unary(!neg);
        if (try_consume("(")) {
            Formula f = parse_or(neg);
            expect(")");
            return f;
        }
        return parse_atom(neg);
    }

    Formula parse_atom(bool neg) {
        LinearAtom atom;
        parse_affine(atom);

        skip_ws();
        if (try_consume(">")) {
            atom.cmp = Cmp::Greater;
        } else if (try_consume("<")) {
            atom.cmp = Cmp::Less;
        } else {
            fail("expected '>' or '<'");
        }
        atom.threshold = parse_number();
        if (neg) {
            atom.cmp = atom.cmp == Cmp::Greater ? Cmp::Less : Cmp::Greater;
        }

        skip_ws();
        if (!try_consume("@rhomax")) fail("missing @rhomax declaration");
        expect("(");
        atom.rho_max = parse_number();
        expect(")");
        if (!(atom.rho_max > 0.0)) fail("@rhomax must be positive");

        skip_ws();
        if (try_consume("@signals")) {
            expect("(");
            skip_ws();
            if (!try_consume(")")) {
                do {
                    const std::string name = parse_ident();
                    if (!atom.coeffs.count(name) || atom.coeffs.at(name) == 0.0) {
                        fail("unknown state name in @signals: " + name);
                    }
                    atom.signals.push_back(name);
                } while (try_consume(","));
                expect(")");
            }
            std::sort(atom.signals.begin(), atom.signals.end());
            atom.signals.erase(
                std::unique(atom.signals.begin(), atom.signals.end()),
                atom.signals.end());
        }

        atom.index = atom_count_++;
        return Formula::atom(std::move(atom));
    }

    // affine := [sign] term (('+'|'-') term)*, term := number ['*' ident] | ident
    void parse_affine(LinearAtom& atom) {
        double sign = 1.0;
        skip_ws();
        if (try_consume("-")) sign = -1.0;
        parse_term(atom, sign);
        for (;;) {
            skip_ws();
            if (try_consume("+")) {
                parse_term(atom, 1.0);
            } else if (peek_is_minus_term()) {
                expect("-");
                parse_term(atom, -1.0);
            } else {
                break;
            }
        }
    }

    void parse_term(LinearAtom& atom, double sign) {
        skip_ws();
        if (pos_ < text_.size() &&
            (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
             text_[pos_] == '.')) {
            const double value = parse_number();
            skip_ws();
            if (try_consume("*")) {
                atom.coeffs[parse_ident()] += sign * value;
            } else {
                atom.offset += sign * value;
            }
        } else {
            atom.coeffs[parse_ident()] += sign;
        }
    }

    // A '-' only continues the affine expression; '>' '<' end it, so no
    // lookahead conflict exists, but keep the guard for clearer errors.
    bool peek_is_minus_term() {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == '-';
    }

    double parse_number() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E' ||
                ((text_[pos_] == '+' || text_[pos_] == '-') &&
                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
            ++pos_;
        }
        double value = 0.0;
        const auto res =
            std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != text_.data() + pos_ || pos_ == start) {
            pos_ = start;
            fail("expected a number");
        }
        return value;
    }

    std::string parse_ident() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < text_.size() &&
            (std::isalpha(static_cast<unsigned char>(text_[pos_])) ||
             text_[pos_] == '_')) {
            ++pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                    text_[pos_] == '_')) {
                ++pos_;
            }
        }
        if (pos_ == start) fail("expected an identifier");
        return std::string(text_.substr(start, pos_ - start));
    }

    void skip_ws() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool try_consume(std::string_view token) {
        skip_ws();
        if (text_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    void expect(std::string_view token) {
        if (!try_consume(token)) fail("expected '" + std::string(token) + "'");
    }

    [[noreturn]] void fail(const std::string& msg) const {
        int line = 1, col = 1;
        for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(msg, line, col);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int atom_count_ = 0;
};

} // namespace detail

/// Parses a property text into a formula in negation normal form. Atoms are
/// numbered left to right; policy parameters refer to these indices.
inline Formula parse_property(std::string_view text) {
    return detail::PropertyParser(text).parse();
}

} // namespace ettreg

#endif
