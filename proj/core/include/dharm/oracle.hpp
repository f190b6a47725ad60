#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "dharm/boundary.hpp"

namespace dharm {

enum class OracleMethod { fd, mc };

std::string_view to_string(OracleMethod method) noexcept;

struct OracleEstimate {
    double value = 0.0;
    /// 95% confidence half-width for MC; Richardson error estimate for FD.
    double half_width = 0.0;
    OracleMethod method = OracleMethod::fd;
    std::size_t n_paths = 0;  // MC only
    std::size_t mesh = 0;     // cells of the finest mesh used
    /// Bias bound of the MC mean: capped paths plus the estimated mesh error (0 for FD).
    double bias_bound = 0.0;
    /// Standard error of the MC mean (0 for FD).
    double std_error = 0.0;
};

/// How the mesh ends on one side of the exit problem.
enum class EndCondition {
    dirichlet_one,   // target endpoint: u = 1
    dirichlet_zero,  // reachable non-target endpoint or absorbing cutoff: u = 0
    reflecting,      // reflecting cutoff: du/ds = 0
};

/// How x, atoms and breakpoints enter the mesh.
enum class MeshPolicy {
    /// They split the shells and every piece is subdivided, so halving the
    /// subdivision nests the meshes (FD refinement and Richardson).
    nested,
    /// Only the shells are subdivided; x and atoms are inserted afterwards and a
    /// shell node closer than a quarter cell to one is dropped. No cell is then
    /// much shorter than its neighbours, which would trap the walk.
    walk,
};

struct ChainSettings {
    /// Cells per geometric shell of the base mesh.
    int subdivisions = 32;
    /// Shells toward a finite reachable endpoint before the last segment.
    int closed_depth = 16;
    /// Relative change below which a moving cutoff is accepted.
    double cutoff_tol = 1e-10;
    MeshPolicy policy = MeshPolicy::nested;
};

/// Nearest-neighbour birth-death chain on a mesh of the closure of (l, r).
/// Node i holds an exponential time of mean hold[i] and then jumps up with
/// probability p_up[i]; jumps are martingale steps in the natural scale.
/// The same mesh carries the lumped linear finite-element discretization of
/// (1/2) d/dm d/ds u = alpha u, whose system is the chain's Laplace functional.
class ChainApproximation {
public:
    std::vector<double> x;
    std::vector<double> ds;    // s(x[i+1]) - s(x[i])
    std::vector<double> mass;  // lumped hat mass int phi_i dm, atoms included
    std::vector<double> hold;  // mean holding time per node
    std::vector<double> p_up;  // probability of jumping to i + 1
    EndCondition left = EndCondition::dirichlet_zero;
    EndCondition right = EndCondition::dirichlet_zero;
    std::size_t start = 0;     // node of the starting point

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
    [[nodiscard]] bool absorbing(std::size_t i) const noexcept;
    /// Value fixed at an absorbing node.
    [[nodiscard]] double boundary_value(std::size_t i) const noexcept;
    /// p_up ds[i] - (1 - p_up) ds[i-1] at an interior node.
    [[nodiscard]] double expected_displacement(std::size_t i) const noexcept;
    /// E[e^{-alpha tau}; exit at the target] at every node by the exact linear system.
    [[nodiscard]] std::vector<double> solve(double alpha) const;
};

/// Chain for the functional x -> E_x[e^{-alpha tau}; X_tau = target] with x a node.
/// Truncated sides (entrance, natural, or reachable at infinity) end at the cutoff
/// given by depth, counted in approach shells.
ChainApproximation build_chain(const DiffusionSpec& spec, const BoundaryReport& report, double alpha, Side target,
                               double x, const ChainSettings& settings, int left_depth, int right_depth);

/// Solves (up + down + kill) u_i = up u_{i+1} + down u_{i-1} + rhs_i with all
/// coefficients nonnegative (down[0] = up[n-1] = 0). The elimination adds only
/// nonnegative terms, so it stays accurate when up or down is within rounding of 1.
std::vector<double> solve_birth_death(std::vector<double> up, std::vector<double> down, std::vector<double> kill,
                                      std::vector<double> rhs);

/// FD value on a fixed mesh (subdivisions per shell), with the cutoffs moved
/// until the value settles. Used for convergence-order studies.
double fd_solve(const DiffusionSpec& spec, double alpha, Side target, double x, const ChainSettings& settings = {});

/// u solving the boundary-value problem with 1 at the target endpoint, 0 at a
/// reachable other endpoint, reflecting at an entrance cutoff and absorbing at a
/// natural cutoff. Richardson-extrapolated from two meshes.
OracleEstimate fd_exit_functional(const DiffusionSpec& spec, double alpha, Side target, double x,
                                  const ChainSettings& settings = {});

struct McSettings {
    ChainSettings chain{4, 4, 1e-10, MeshPolicy::walk};
    /// At alpha = 0 only the embedded walk matters, and a martingale walk in s
    /// has the same exit law on every mesh; the base mesh is refined this much.
    int zero_alpha_subdivisions = 1;
    /// For alpha > 0 the walk mesh is doubled until the chain's estimated
    /// discretization error is below this fraction of sqrt(v (1 - v) / n_paths),
    /// up to max_subdivisions cells per shell. The remaining estimate joins bias_bound.
    double discretization_fraction = 0.25;
    int max_subdivisions = 64;
    /// Paths are stopped once their discount weight falls below this value; the
    /// stopped paths contribute 0 and their bias is at most this value.
    double weight_floor = 1e-6;
    std::uint64_t max_steps = 50'000'000;
    unsigned threads = 0;  // 0: hardware concurrency
};

/// Simulates the chain from x until exit, weighting each hold by its conditional
/// discount 1 / (1 + alpha hold). Returns mean +- 1.96 standard errors. At
/// alpha = 0 on a recurrent side the exact chain solve is returned with method FD.
OracleEstimate mc_exit_functional(const DiffusionSpec& spec, double alpha, Side target, double x,
                                  std::size_t n_paths, std::uint64_t seed, const McSettings& settings = {});

/// Hitting probabilities at alpha = 0 in closed form from the scale function:
/// (s(r) - s(x)) / (s(r) - s(l)) for l, the mirror for r, and 1 in the
/// recurrent branches. Throws case_mismatch when I_e does not contain the side.
double hitting_probability(const DiffusionSpec& spec, double x, Side side);

/// Counter-based SplitMix64 stream whose key is mixed from (seed, path), so a
/// path draws the same numbers whichever thread runs it.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path) noexcept;
    std::uint64_t next() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace dharm
