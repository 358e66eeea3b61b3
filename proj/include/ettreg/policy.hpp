#ifndef ETTREG_POLICY_HPP
#define ETTREG_POLICY_HPP

#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ettreg/formula.hpp"

namespace ettreg {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kUnboundedEtt = std::numeric_limits<double>::infinity();

/// Per-signal trigger thresholds. A missing signal (or an explicit infinity)
/// means the policy places no constraint on it.
using EttAssignment = std::map<std::string, double>;

inline double ett_of(const EttAssignment& a, const std::string& signal) {
    auto it = a.find(signal);
    return it == a.end() ? kUnboundedEtt : it->second;
}

/// Final threshold when several properties constrain overlapping signals:
/// per-signal minimum, an unconstrained signal yields to any constrained one.
inline EttAssignment combine_min(std::span<const EttAssignment> assignments) {
    if (assignments.empty()) {
        throw ConfigError("combine_min requires at least one assignment");
    }
    EttAssignment out;
    for (const EttAssignment& a : assignments) {
        for (const auto& [signal, delta] : a) {
            auto [it, inserted] = out.emplace(signal, delta);
            if (!inserted && delta < it->second) it->second = delta;
        }
    }
    return out;
}

inline EttAssignment combine_min(const EttAssignment& a, const EttAssignment& b) {
    const EttAssignment pair[2] = {a, b};
    return combine_min(std::span<const EttAssignment>(pair, 2));
}

enum class PolicyKind { TimeTriggered, ConstantEtt, RhoEtt, RhoEttWc };

/// Regulation parameters of one atom. Either the per-signal epsilons are
/// given directly, or they are synthesized from the (lambda, eps_rho) split
/// via synthesize_epsilon; exactly one of the two forms must be present.
struct AtomParams {
    std::map<std::string, double> eps;
    std::map<std::string, double> lambdas;
    double eps_rho = 1.0;
};

struct PropertyParams {
    std::vector<AtomParams> atoms;  // indexed by LinearAtom::index

    const AtomParams& for_atom(const LinearAtom& atom) const {
        if (atom.index < 0 || static_cast<std::size_t>(atom.index) >= atoms.size()) {
            throw ConfigError("no regulation parameters for atom " +
                              std::to_string(atom.index));
        }
        return atoms[atom.index];
    }
};

struct PolicyConfig {
    PolicyKind kind = PolicyKind::TimeTriggered;
    EttAssignment constant_delta;            // ConstantEtt
    std::vector<PropertyParams> properties;  // RhoEtt / RhoEttWc, per property
    double eta = 0.0;                        // robustness margin for feasibility
    bool or_as_and = false;                  // regulate with || treated as &&
};

/// Robustness-proportional threshold for one atom: delta+ = max(rho, 0) / eps
/// per bound signal. Signals the atom does not bind are left unconstrained.
inline EttAssignment rho_ett_atom(const LinearAtom& atom, const StateVector& x,
                                  const std::map<std::string, double>& eps) {
    const double rho_plus = std::max(atom.robustness(x), 0.0);
    EttAssignment out;
    for (const std::string& signal : atom.signals) {
        auto it = eps.find(signal);
        if (it == eps.end()) {
            throw ConfigError("missing epsilon for bound signal " + signal);
        }
        if (!(it->second > 0.0)) {
            throw ConfigError("epsilon must be positive for signal " + signal);
        }
        out[signal] = rho_plus / it->second;
    }
    return out;
}

/// Epsilon synthesis that guarantees sign agreement between monitored and
/// true robustness: eps_yi = 2|alpha_i| * lambda_i * eps_rho with
/// sum(1/lambda) = 1 and eps_rho >= 1. The 2|alpha_i| factor is the
/// sensitivity of the robustness-interval width to that signal's threshold.
inline std::map<std::string, double> synthesize_epsilon(
    const LinearAtom& atom, const std::map<std::string, double>& lambdas,
    double eps_rho) {
    if (!(eps_rho >= 1.0)) {
        throw ConfigError("eps_rho must be at least 1");
    }
    for (const auto& [state, coeff] : atom.coeffs) {
        if (coeff != 0.0 && !atom.binds(state)) {
            throw ConfigError("state " + state +
                              " is relevant to the atom but not measurable");
        }
    }
    double inv_sum = 0.0;
    for (const std::string& signal : atom.signals) {
        auto it = lambdas.find(signal);
        if (it == lambdas.end()) {
            throw ConfigError("missing lambda for signal " + signal);
        }
        if (!(it->second > 0.0)) {
            throw ConfigError("lambda must be positive for signal " + signal);
        }
        inv_sum += 1.0 / it->second;
    }
    if (std::abs(inv_sum - 1.0) > 1e-9) {
        throw ConfigError("lambda reciprocals must sum to 1");
    }
    std::map<std::string, double> out;
    for (const std::string& signal : atom.signals) {
        out[signal] = 2.0 * std::abs(atom.coeffs.at(signal)) *
                      lambdas.at(signal) * eps_rho;
    }
    return out;
}

/// Atom parameters with the epsilon/lambda/eps_rho triple fully determined.
struct ResolvedAtomParams {
    std::map<std::string, double> eps;
    std::map<std::string, double> lambdas;
    double eps_rho = 1.0;
};

/// Accepts either parameterization of a worst-case atom. Direct epsilons are
/// decomposed back into the unique (lambda, eps_rho) pair implied by the
/// sum(1/lambda) = 1 constraint, which must leave eps_rho >= 1.
inline ResolvedAtomParams resolve_wc_params(const LinearAtom& atom,
                                            const AtomParams& params) {
    ResolvedAtomParams r;
    if (!params.lambdas.empty()) {
        r.lambdas = params.lambdas;
        r.eps_rho = params.eps_rho;
        r.eps = synthesize_epsilon(atom, r.lambdas, r.eps_rho);
        return r;
    }
    if (params.eps.empty()) {
        throw ConfigError("worst-case policy needs lambdas or direct epsilons");
    }
    for (const auto& [state, coeff] : atom.coeffs) {
        if (coeff != 0.0 && !atom.binds(state)) {
            throw ConfigError("state " + state +
                              " is relevant to the atom but not measurable");
        }
    }
    double inv_eps_rho = 0.0;
    for (const std::string& signal : atom.signals) {
        auto it = params.eps.find(signal);
        if (it == params.eps.end()) {
            throw ConfigError("missing epsilon for bound signal " + signal);
        }
        inv_eps_rho += 2.0 * std::abs(atom.coeffs.at(signal)) / it->second;
    }
    r.eps_rho = 1.0 / inv_eps_rho;
    if (!(r.eps_rho >= 1.0 - 1e-9)) {
        throw ConfigError("direct epsilons imply eps_rho < 1");
    }
    for (const std::string& signal : atom.signals) {
        const double e = params.eps.at(signal);
        r.eps[signal] = e;
        r.lambdas[signal] =
            e / (2.0 * std::abs(atom.coeffs.at(signal)) * r.eps_rho);
    }
    return r;
}

/// Worst-case threshold of one atom from the predicted state box:
/// delta = max(rho_lower, 0) / (2|alpha_i| lambda_i eps_rho).
inline EttAssignment wc_ett_atom(const LinearAtom& atom,
                                 const StateIntervalVector& dx_pred,
                                 const std::map<std::string, double>& lambdas,
                                 double eps_rho) {
    const std::map<std::string, double> eps =
        synthesize_epsilon(atom, lambdas, eps_rho);
    const double rho_lower_plus = std::max(atom.robustness(dx_pred).lo, 0.0);
    EttAssignment out;
    for (const std::string& signal : atom.signals) {
        out[signal] = rho_lower_plus / eps.at(signal);
    }
    return out;
}

namespace detail {

// Relaxed per-atom threshold: delta_in(y) = (rho+ + max(beta - zeta, 0) *
// rho_max) / eps_y. The second term is the slack granted by a more robust
// disjunction sibling, translated back into the atom's own units.
inline EttAssignment atom_refined(const LinearAtom& atom, double rho_plus,
                                  double zeta_atom, double beta,
                                  const std::map<std::string, double>& eps) {
    EttAssignment out;
    const double numerator =
        rho_plus + std::max(beta - zeta_atom, 0.0) * atom.rho_max;
    for (const std::string& signal : atom.signals) {
        auto it = eps.find(signal);
        if (it == eps.end()) {
            throw ConfigError("missing epsilon for bound signal " + signal);
        }
        if (!(it->second > 0.0)) {
            throw ConfigError("epsilon must be positive for signal " + signal);
        }
        out[signal] = numerator / it->second;
    }
    return out;
}

inline EttAssignment refine_rec(const Formula& phi, const StateVector& x,
                                const PropertyParams& params, double beta) {
    switch (phi.kind()) {
        case Formula::Kind::Atom: {
            const LinearAtom& atom = phi.as_atom();
            return atom_refined(atom, std::max(atom.robustness(x), 0.0),
                                normalized_robustness(atom, x), beta,
                                params.for_atom(atom).eps);
        }
        case Formula::Kind::And:
            return combine_min(refine_rec(phi.lhs(), x, params, beta),
                               refine_rec(phi.rhs(), x, params, beta));
        case Formula::Kind::Or: {
            const double zl = normalized_robustness_rec(phi.lhs(), x);
            const double zr = normalized_robustness_rec(phi.rhs(), x);
            return combine_min(
                refine_rec(phi.lhs(), x, params, std::max(beta, zr)),
                refine_rec(phi.rhs(), x, params, std::max(beta, zl)));
        }
    }
    return {};
}

inline EttAssignment wc_refine_rec(const Formula& phi,
                                   const StateIntervalVector& dx,
                                   const PropertyParams& params, double beta) {
    switch (phi.kind()) {
        case Formula::Kind::Atom: {
            const LinearAtom& atom = phi.as_atom();
            const ResolvedAtomParams rp =
                resolve_wc_params(atom, params.for_atom(atom));
            return atom_refined(atom, std::max(atom.robustness(dx).lo, 0.0),
                                wc_normalized_robustness(atom, dx), beta,
                                rp.eps);
        }
        case Formula::Kind::And:
            return combine_min(wc_refine_rec(phi.lhs(), dx, params, beta),
                               wc_refine_rec(phi.rhs(), dx, params, beta));
        case Formula::Kind::Or: {
            const double zl = wc_normalized_robustness_rec(phi.lhs(), dx);
            const double zr = wc_normalized_robustness_rec(phi.rhs(), dx);
            return combine_min(
                wc_refine_rec(phi.lhs(), dx, params, std::max(beta, zr)),
                wc_refine_rec(phi.rhs(), dx, params, std::max(beta, zl)));
        }
    }
    return {};
}

} // namespace detail

/// Refinement across one propositional operator joining exactly two atoms.
/// The disjunction relaxes the less critical atom by the normalized
/// robustness gap; the conjunction refines both atoms independently.
inline EttAssignment refine_pair(const Formula& phi, const StateVector& x,
                                 const PropertyParams& params) {
    if (phi.kind() == Formula::Kind::Atom || !phi.lhs().is_atom() ||
        !phi.rhs().is_atom()) {
        throw ConfigError("refine_pair needs a connective over two atoms");
    }
    const LinearAtom& a1 = phi.lhs().as_atom();
    const LinearAtom& a2 = phi.rhs().as_atom();
    const double z1 = normalized_robustness(a1, x);
    const double z2 = normalized_robustness(a2, x);
    const double beta =
        phi.kind() == Formula::Kind::Or ? std::max(z1, z2) : 0.0;
    return combine_min(
        detail::atom_refined(a1, std::max(a1.robustness(x), 0.0), z1, beta,
                             params.for_atom(a1).eps),
        detail::atom_refined(a2, std::max(a2.robustness(x), 0.0), z2, beta,
                             params.for_atom(a2).eps));
}

/// Full refinement over an arbitrary formula in negation normal form. The
/// slack value beta starts at the whole property's normalized robustness and
/// grows at each disjunction by the sibling's normalized robustness.
inline EttAssignment refine_arbitrary(const Formula& phi, const StateVector& x,
                                      const PropertyParams& params) {
    return detail::refine_rec(phi, x, params,
                              normalized_robustness_rec(phi, x));
}

/// Worst-case counterpart of refine_arbitrary; works on the predicted state
/// box and keeps the sign-detection guarantee of the epsilon synthesis.
inline EttAssignment wc_refine_arbitrary(const Formula& phi,
                                         const StateIntervalVector& dx_pred,
                                         const PropertyParams& params) {
    return detail::wc_refine_rec(phi, dx_pred, params,
                                 wc_normalized_robustness_rec(phi, dx_pred));
}

/// Constant-threshold baseline; the same assignment at every step.
inline EttAssignment cett(const PolicyConfig& config) {
    if (config.kind != PolicyKind::ConstantEtt) {
        throw ConfigError("cett called for a non-constant policy");
    }
    for (const auto& [signal, delta] : config.constant_delta) {
        if (delta < 0.0) {
            throw ConfigError("constant threshold negative for " + signal);
        }
    }
    return config.constant_delta;
}

} // namespace ettreg

#endif
