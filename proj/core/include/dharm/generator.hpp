#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dharm/harmonic.hpp"

namespace dharm {

struct GeneratorSettings {
    /// |df/ds(j)| below tol times max |df/ds| counts as a Neumann zero.
    double neumann_tol = 1e-6;
    /// Jumps of df/ds off the atoms of m, and increments over m-null cells,
    /// above tol times max |df/ds| rule out a derivative against m.
    double shape_tol = 1e-6;
    /// Relative tolerance of the closed-form boundary identities.
    double cross_check_tol = 1e-6;
    HarmonicSettings harmonic;
};

/// Lf = (1/2) d/dm df/ds at the grid nodes: central differences of df/ds
/// against the continuous part of m, jumps divided by the atom at interior
/// atoms, and (1/2) df/ds(l) / m({l}), -(1/2) df/ds(r) / m({r}) at closed
/// endpoints carrying atoms (0/0 := 0). The ds-derivative columns hold
/// central differences of Lf in s. Throws not_in_domain_shape when df/ds
/// jumps off the atoms or moves across a cell without m-mass.
GridFunction generator_apply(const GridFunction& f, const GeneratorSettings& settings = {});

/// df/ds at a closed endpoint from the interior: quadratic extrapolation in the
/// s-distance over the three nodes next to the endpoint (the left limit at r,
/// the right limit at l).
double boundary_derivative(const GridFunction& f, Side side);

struct DomainCheck {
    bool in_domain = false;
    bool in_form_domain = false;
    bool shape_ok = false;
    /// int (Lf)^2 dm over the grid, endpoint atoms included.
    double lf_l2_squared = 0.0;
    /// df/ds at reflecting endpoints without atoms (the Neumann data).
    std::optional<double> neumann_l, neumann_r;
    std::vector<std::string> violations;
};

/// Membership in the domain of the L2 generator: f in the form domain, a
/// square-integrable (1/2) d/dm df/ds, and df/ds(j) = 0 at every reflecting
/// endpoint j without an atom.
DomainCheck in_generator_domain(const GridFunction& f, const GeneratorSettings& settings = {});

struct BoundaryConstants {
    double C = 0.0;
    /// Boundary ds-derivatives of u, u+ and u- at the endpoints of I_e.
    std::optional<double> du_l, du_r;
    std::optional<double> du_plus_l, du_minus_l, du_plus_r, du_minus_r;
    std::optional<double> c_l, c_r;
    /// Largest relative disagreement between grid values and closed forms.
    double cross_check_error = 0.0;
};

/// C and the c-constants from the basis grid, cross-checked against the
/// closed forms u-(l) = 0, u+(l) = C u(l), du-/ds(l) = 1/u(l),
/// du+/ds(l) = C du/ds(l) - 1/u(l) and their mirrors at r. Throws
/// cross_check_failed beyond settings.cross_check_tol.
BoundaryConstants boundary_constants(const HarmonicBasis& basis, const GeneratorSettings& settings = {});
BoundaryConstants boundary_constants(const DiffusionSpec& spec, double alpha, const GeneratorSettings& settings = {});

struct GeneratorVerdict {
    double alpha = 0.0;
    std::string effective;  // I_e, e.g. "[0, 1)"
    double m_atom_l = 0.0;
    double m_atom_r = 0.0;
    BoundaryConstants constants;
    /// du+/ds(r) du-/ds(l) - du-/ds(r) du+/ds(l) when I_e = [l, r].
    std::optional<double> determinant;
    /// Candidates are the normalized basis of H_alpha, with their verdicts.
    std::vector<std::string> candidate_names;
    std::vector<bool> candidate_in_domain;
    /// Lf at the endpoint atoms, one entry per candidate (0 without an atom).
    std::vector<double> atom_values_l, atom_values_r;
    /// H_alpha intersected with the domain of the generator.
    std::string subspace;
    int dim = 0;
    std::vector<GridFunction> members;
    std::vector<std::string> member_names;
};

/// The alpha-harmonic functions in the generator domain, by the case of I_e
/// and the endpoint atoms. Requires alpha > 0.
GeneratorVerdict harmonic_in_domain(const DiffusionSpec& spec, double alpha, const GeneratorSettings& settings = {});
GeneratorVerdict harmonic_in_domain(const HarmonicBasis& basis, const GeneratorSettings& settings = {});

/// int f g dm over the grid, endpoint and interior atoms included.
double l2_inner(const GridFunction& f, const GridFunction& g);
/// (1/2) int (df/ds)(dg/ds) ds over the grid.
double form_inner(const GridFunction& f, const GridFunction& g);

}  // namespace dharm
