#ifndef ETTREG_FORMULA_HPP
#define ETTREG_FORMULA_HPP

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ettreg/interval.hpp"

namespace ettreg {

using StateVector = std::map<std::string, double>;
using StateIntervalVector = std::map<std::string, Interval>;

struct MissingStateError : std::runtime_error {
    explicit MissingStateError(const std::string& name)
        : std::runtime_error("state not present in state vector: " + name) {}
};

enum class Cmp { Greater, Less };

/// Affine inequality p(x) > c or p(x) < c with p(x) = sum(coeff_i * x_i) +
/// offset. Carries the atom's declared maximum robustness and the set of
/// measurable signals whose trigger thresholds it regulates.
struct LinearAtom {
    std::map<std::string, double> coeffs;
    double offset = 0.0;
    Cmp cmp = Cmp::Greater;
    double threshold = 0.0;
    double rho_max = 1.0;
    std::vector<std::string> signals;  // sorted, unique
    int index = 0;                     // position among the formula's atoms

    bool binds(const std::string& signal) const {
        return std::binary_search(signals.begin(), signals.end(), signal);
    }

    double p(const StateVector& x) const {
        double acc = offset;
        for (const auto& [name, coeff] : coeffs) {
            auto it = x.find(name);
            if (it == x.end()) throw MissingStateError(name);
            acc += coeff * it->second;
        }
        return acc;
    }

    Interval p(const StateIntervalVector& dx) const {
        Interval acc(offset);
        for (const auto& [name, coeff] : coeffs) {
            auto it = dx.find(name);
            if (it == dx.end()) throw MissingStateError(name);
            acc = acc + scale(coeff, it->second);
        }
        return acc;
    }

    double robustness(const StateVector& x) const {
        const double v = p(x);
        return cmp == Cmp::Greater ? v - threshold : threshold - v;
    }

    Interval robustness(const StateIntervalVector& dx) const {
        const Interval v = p(dx);
        return cmp == Cmp::Greater ? v - Interval(threshold)
                                   : Interval(threshold) - v;
    }

    friend bool operator==(const LinearAtom& a, const LinearAtom& b) {
        return a.coeffs == b.coeffs && a.offset == b.offset && a.cmp == b.cmp &&
               a.threshold == b.threshold && a.rho_max == b.rho_max &&
               a.signals == b.signals && a.index == b.index;
    }
};

/// Propositional formula over linear atoms, in negation normal form: parsing
/// absorbs every negation into its atom by flipping the comparator, so the
/// tree only ever contains Atom, And and Or nodes.
class Formula {
public:
    enum class Kind { Atom, And, Or };

    static Formula atom(LinearAtom a) {
        Formula f;
        f.kind_ = Kind::Atom;
        f.atom_ = std::make_shared<const LinearAtom>(std::move(a));
        return f;
    }
    static Formula conj(Formula lhs, Formula rhs) {
        return combine(Kind::And, std::move(lhs), std::move(rhs));
    }
    static Formula disj(Formula lhs, Formula rhs) {
        return combine(Kind::Or, std::move(lhs), std::move(rhs));
    }

    Kind kind() const { return kind_; }
    bool is_atom() const { return kind_ == Kind::Atom; }
    const LinearAtom& as_atom() const { return *atom_; }
    const Formula& lhs() const { return *lhs_; }
    const Formula& rhs() const { return *rhs_; }

    /// Atoms in left-to-right order.
    void collect_atoms(std::vector<const LinearAtom*>& out) const {
        if (is_atom()) {
            out.push_back(atom_.get());
            return;
        }
        lhs_->collect_atoms(out);
        rhs_->collect_atoms(out);
    }
    std::vector<const LinearAtom*> atoms() const {
        std::vector<const LinearAtom*> out;
        collect_atoms(out);
        return out;
    }

    friend bool operator==(const Formula& a, const Formula& b) {
        if (a.kind_ != b.kind_) return false;
        if (a.kind_ == Kind::Atom) return *a.atom_ == *b.atom_;
        return *a.lhs_ == *b.lhs_ && *a.rhs_ == *b.rhs_;
    }

private:
    static Formula combine(Kind k, Formula lhs, Formula rhs) {
        Formula f;
        f.kind_ = k;
        f.lhs_ = std::make_shared<const Formula>(std::move(lhs));
        f.rhs_ = std::make_shared<const Formula>(std::move(rhs));
        return f;
    }

    Kind kind_ = Kind::Atom;
    std::shared_ptr<const LinearAtom> atom_;
    std::shared_ptr<const Formula> lhs_, rhs_;
};

/// Quantitative satisfaction degree: atoms measure the margin to their
/// threshold, conjunction takes the min, disjunction the max.
inline double robustness(const Formula& phi, const StateVector& x) {
    switch (phi.kind()) {
        case Formula::Kind::Atom:
            return phi.as_atom().robustness(x);
        case Formula::Kind::And:
            return std::min(robustness(phi.lhs(), x), robustness(phi.rhs(), x));
        case Formula::Kind::Or:
            return std::max(robustness(phi.lhs(), x), robustness(phi.rhs(), x));
    }
    return 0.0;
}

/// Interval image of the robustness over a box of possible states. Valid
/// because min and max are monotone in both bounds.
inline Interval robustness_interval(const Formula& phi,
                                    const StateIntervalVector& dx) {
    switch (phi.kind()) {
        case Formula::Kind::Atom:
            return phi.as_atom().robustness(dx);
        case Formula::Kind::And: {
            const Interval a = robustness_interval(phi.lhs(), dx);
            const Interval b = robustness_interval(phi.rhs(), dx);
            return Interval(std::min(a.lo, b.lo), std::min(a.hi, b.hi));
        }
        case Formula::Kind::Or: {
            const Interval a = robustness_interval(phi.lhs(), dx);
            const Interval b = robustness_interval(phi.rhs(), dx);
            return Interval(std::max(a.lo, b.lo), std::max(a.hi, b.hi));
        }
    }
    return Interval();
}

/// Robustness clamped at zero and scaled into [0, 1] by the atom's declared
/// maximum, making criticality comparable across atoms.
inline double normalized_robustness(const LinearAtom& atom, const StateVector& x) {
    return std::max(atom.robustness(x), 0.0) / atom.rho_max;
}

inline double normalized_robustness_rec(const Formula& phi, const StateVector& x) {
    switch (phi.kind()) {
        case Formula::Kind::Atom:
            return normalized_robustness(phi.as_atom(), x);
        case Formula::Kind::And:
            return std::min(normalized_robustness_rec(phi.lhs(), x),
                            normalized_robustness_rec(phi.rhs(), x));
        case Formula::Kind::Or:
            return std::max(normalized_robustness_rec(phi.lhs(), x),
                            normalized_robustness_rec(phi.rhs(), x));
    }
    return 0.0;
}

/// Worst-case variant: normalizes the lower robustness bound over the box.
inline double wc_normalized_robustness(const LinearAtom& atom,
                                       const StateIntervalVector& dx) {
    return std::max(atom.robustness(dx).lo, 0.0) / atom.rho_max;
}

inline double wc_normalized_robustness_rec(const Formula& phi,
                                           const StateIntervalVector& dx) {
    switch (phi.kind()) {
        case Formula::Kind::Atom:
            return wc_normalized_robustness(phi.as_atom(), dx);
        case Formula::Kind::And:
            return std::min(wc_normalized_robustness_rec(phi.lhs(), dx),
                            wc_normalized_robustness_rec(phi.rhs(), dx));
        case Formula::Kind::Or:
            return std::max(wc_normalized_robustness_rec(phi.lhs(), dx),
                            wc_normalized_robustness_rec(phi.rhs(), dx));
    }
    return 0.0;
}

inline void collect_signals(const Formula& phi, std::set<std::string>& out) {
    if (phi.is_atom()) {
        out.insert(phi.as_atom().signals.begin(), phi.as_atom().signals.end());
        return;
    }
    collect_signals(phi.lhs(), out);
    collect_signals(phi.rhs(), out);
}

inline std::set<std::string> signals_of(const Formula& phi) {
    std::set<std::string> out;
    collect_signals(phi, out);
    return out;
}

inline std::set<std::string> states_of(const Formula& phi) {
    std::set<std::string> out;
    for (const LinearAtom* a : phi.atoms()) {
        for (const auto& [name, coeff] : a->coeffs) {
            (void)coeff;
            out.insert(name);
        }
    }
    return out;
}

/// Same tree with every disjunction replaced by a conjunction; used to
/// monitor what regulation loses when the or-relaxation is switched off.
inline Formula replace_or_with_and(const Formula& phi) {
    if (phi.is_atom()) return phi;
    Formula lhs = replace_or_with_and(phi.lhs());
    Formula rhs = replace_or_with_and(phi.rhs());
    return Formula::conj(std::move(lhs), std::move(rhs));
}

namespace detail {

inline void format_number(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

inline void print_atom(std::ostream& os, const LinearAtom& a) {
    bool first = true;
    for (const auto& [name, coeff] : a.coeffs) {
        if (!first) os << (coeff < 0.0 ? " - " : " + ");
        const double mag = first ? coeff : std::abs(coeff);
        format_number(os, mag);
        os << '*' << name;
        first = false;
    }
    if (a.offset != 0.0 || first) {
        if (!first) os << (a.offset < 0.0 ? " - " : " + ");
        format_number(os, first ? a.offset : std::abs(a.offset));
        first = false;
    }
    os << (a.cmp == Cmp::Greater ? " > " : " < ");
    format_number(os, a.threshold);
    os << " @rhomax(";
    format_number(os, a.rho_max);
    os << ')';
    if (!a.signals.empty()) {
        os << " @signals(";
        for (std::size_t i = 0; i < a.signals.size(); ++i) {
            if (i) os << ", ";
            os << a.signals[i];
        }
        os << ')';
    }
}

} // namespace detail

/// Canonical text form; parses back to an identical tree.
inline std::string to_text(const Formula& phi) {
    std::ostringstream os;
    switch (phi.kind()) {
        case Formula::Kind::Atom:
            detail::print_atom(os, phi.as_atom());
            break;
        case Formula::Kind::And:
            os << '(' << to_text(phi.lhs()) << ") && (" << to_text(phi.rhs()) << ')';
            break;
        case Formula::Kind::Or:
            os << '(' << to_text(phi.lhs()) << ") || (" << to_text(phi.rhs()) << ')';
            break;
    }
    return os.str();
}

} // namespace ettreg

#endif
