#include "dharm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>

namespace dharm {

namespace {

constexpr int kFirstCutoff = 4;
constexpr int kCutoffStep = 2;
constexpr double kEps = std::numeric_limits<double>::epsilon();

struct SidePlan {
    bool truncated = false;
    EndCondition cond = EndCondition::dirichlet_zero;
};

SidePlan plan_side(const BoundaryReport& report, double alpha, Side target, Side side) {
    const auto& end = report.at(side);
    if (!end.cls) throw Error(ErrorCode::convergence_undecided, std::string(to_string(side)) + " endpoint class undecided");
    const BoundaryClass cls = *end.cls;
    const bool reachable = cls == BoundaryClass::regular || cls == BoundaryClass::exit;
    const bool finite = std::isfinite(end.location);
    if (side == target) {
        if (!reachable)
            throw Error(ErrorCode::domain_error, "target endpoint " + std::string(to_string(side)) + " is " +
                                                     std::string(to_string(cls)) + " and is never reached");
        if (!finite) throw Error(ErrorCode::domain_error, "target endpoint must be finite");
        return {false, EndCondition::dirichlet_one};
    }
    if (reachable) return {!finite, EndCondition::dirichlet_zero};
    if (cls == BoundaryClass::entrance) return {true, EndCondition::reflecting};
    // Natural: absorbing cutoff, except at alpha = 0 with infinite scale, where
    // the walk never drifts off and the target is hit with probability one.
    if (alpha == 0.0 && !std::isfinite(end.signed_scale())) return {true, EndCondition::reflecting};
    return {true, EndCondition::dirichlet_zero};
}

struct CellData {
    double ds = 0.0;
    double wl = 0.0;  // int (s - s(a)) dm over (a, b]
    double wr = 0.0;  // int (s(b) - s) dm over (a, b]
};

/// Weighted masses of a cell ending at a finite endpoint, summed over pieces
/// graded geometrically toward it. Only the weight facing the interior is
/// required finite: the endpoint node itself is absorbing.
CellData graded_cell(const DiffusionSpec& spec, double a, double b, bool toward_right) {
    const double end = toward_right ? b : a;
    const double start = toward_right ? a : b;
    std::vector<double> cuts{start};
    const double d = end - start;
    for (int k = 1; k <= 200; ++k) {
        const double q = end - d * std::ldexp(1.0, -k);
        if (q == cuts.back() || std::abs(end - q) <= 1024.0 * kEps * std::abs(end)) break;
        const double prev = cuts.back();
        for (int j = 1; j <= 4; ++j) cuts.push_back(prev + (q - prev) * j / 4.0);
    }
    cuts.push_back(end);
    if (!toward_right) std::reverse(cuts.begin(), cuts.end());
    const std::size_t pieces = cuts.size() - 1;
    std::vector<double> dS(pieces), dM(pieces), wr(pieces);
    const auto& md = spec.speed.continuous_part();
    for (std::size_t k = 0; k < pieces; ++k) {
        const double lo = cuts[k], hi = cuts[k + 1];
        dS[k] = spec.scale.increment(lo, hi);
        dM[k] = md.integral(lo, hi);
        const bool sliver = toward_right ? k + 1 == pieces : k == 0;
        if (!std::isfinite(dM[k]) && sliver) {
            // Infinite mass within rounding distance of an exit end: its weight
            // against the vanishing scale is below resolution.
            dM[k] = 0.0;
            wr[k] = 0.0;
            continue;
        }
        const double w = sliver ? kInf : weighted_mass_to_right(spec, lo, hi);
        wr[k] = std::isfinite(w) ? w : 0.5 * dS[k] * dM[k];
    }
    CellData c;
    c.ds = spec.scale.increment(a, b);
    double tail = 0.0;
    for (std::size_t k = pieces; k-- > 0;) {
        c.wr += wr[k] + dM[k] * tail;
        tail += dS[k];
    }
    double head = 0.0;
    for (std::size_t k = 0; k < pieces; ++k) {
        c.wl += dS[k] * dM[k] - wr[k] + dM[k] * head;
        head += dS[k];
    }
    return c;
}

/// Cell integrals shared between nested meshes.
class CellCache {
public:
    explicit CellCache(const DiffusionSpec& spec) : spec_(spec) {}

    const CellData& get(double a, double b) {
        const auto key = std::make_pair(a, b);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        const auto& interval = spec_.interval;
        const bool at_l = a == interval.l, at_r = b == interval.r;
        CellData c;
        if (at_l || at_r) {
            c = graded_cell(spec_, a, b, at_r);
        } else {
            c.ds = spec_.scale.increment(a, b);
            c.wl = weighted_mass_from_left(spec_, a, b);
            c.wr = weighted_mass_to_right(spec_, a, b);
        }
        const bool ok = c.ds > 0.0 && std::isfinite(c.ds) && (at_l || std::isfinite(c.wl)) &&
                        (at_r || std::isfinite(c.wr));
        if (!ok)
            throw Error(ErrorCode::singular_mesh, "mesh cell (" + format_number(a) + ", " + format_number(b) +
                                                      "] has no finite positive scale or weighted mass");
        return cache_.emplace(key, c).first->second;
    }

private:
    const DiffusionSpec& spec_;
    std::map<std::pair<double, double>, CellData> cache_;
};

struct Problem {
    const DiffusionSpec& spec;
    double alpha;
    Side target;
    double x;
    SidePlan left;
    SidePlan right;
    std::vector<double> points_left;
    std::vector<double> points_right;
};

Problem make_problem(const DiffusionSpec& spec, const BoundaryReport& report, double alpha, Side target, double x) {
    Problem p{spec, alpha, target, x, plan_side(report, alpha, target, Side::left),
              plan_side(report, alpha, target, Side::right), {}, {}};
    const LimitOptions opts;
    p.points_left = approach_points(spec.interval, spec.e(), Side::left, opts.max_steps);
    p.points_right = approach_points(spec.interval, spec.e(), Side::right, opts.max_steps);
    return p;
}

int max_depth(const Problem& p, Side side) {
    return static_cast<int>((side == Side::left ? p.points_left : p.points_right).size());
}

ChainApproximation assemble(const Problem& p, const ChainSettings& settings, int left_depth, int right_depth,
                            CellCache& cache) {
    const auto& interval = p.spec.interval;
    const double e = p.spec.e();
    std::vector<double> base{e};
    double lo = 0.0, hi = 0.0;
    for (Side side : {Side::left, Side::right}) {
        const auto& plan = side == Side::left ? p.left : p.right;
        const auto& points = side == Side::left ? p.points_left : p.points_right;
        const int wanted = plan.truncated ? (side == Side::left ? left_depth : right_depth) : settings.closed_depth;
        const auto depth = static_cast<std::size_t>(std::clamp(wanted, 1, static_cast<int>(points.size())));
        if (points.empty()) throw Error(ErrorCode::singular_mesh, "no approach points toward " + std::string(to_string(side)));
        base.insert(base.end(), points.begin(), points.begin() + static_cast<std::ptrdiff_t>(depth));
        double edge = points[depth - 1];
        if (!plan.truncated) {
            edge = interval.endpoint(side);
            base.push_back(edge);
        }
        (side == Side::left ? lo : hi) = edge;
    }
    auto inside = [&](double q) { return q > lo && q < hi; };
    std::vector<double> inserts;
    if (inside(p.x)) inserts.push_back(p.x);
    for (const auto& atom : p.spec.speed.atoms())
        if (inside(atom.x)) inserts.push_back(atom.x);
    const bool nested = settings.policy == MeshPolicy::nested;
    if (nested) {
        for (double q : p.spec.scale.measure().breakpoints())
            if (inside(q)) inserts.push_back(q);
        for (double q : p.spec.speed.continuous_part().breakpoints())
            if (inside(q)) inserts.push_back(q);
        base.insert(base.end(), inserts.begin(), inserts.end());
    }
    std::sort(base.begin(), base.end());
    base.erase(std::unique(base.begin(), base.end()), base.end());

    ChainApproximation chain;
    auto& x = chain.x;
    x.push_back(base.front());
    for (std::size_t i = 0; i + 1 < base.size(); ++i) {
        const double a = base[i], b = base[i + 1];
        for (int k = 1; k <= settings.subdivisions; ++k) {
            const double q = k == settings.subdivisions ? b : a + (b - a) * k / settings.subdivisions;
            if (q > x.back()) x.push_back(q);
        }
    }
    if (!nested) {
        std::vector<bool> fixed(x.size(), false);
        fixed.front() = fixed.back() = true;
        std::sort(inserts.begin(), inserts.end());
        for (double q : inserts) {
            const auto pos = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), q) - x.begin());
            if (x[pos] == q) {
                fixed[pos] = true;
                continue;
            }
            const double quarter = 0.25 * (x[pos] - x[pos - 1]);
            if (!fixed[pos] && x[pos] - q < quarter) {
                x[pos] = q;
                fixed[pos] = true;
            } else if (!fixed[pos - 1] && q - x[pos - 1] < quarter) {
                x[pos - 1] = q;
                fixed[pos - 1] = true;
            } else {
                x.insert(x.begin() + static_cast<std::ptrdiff_t>(pos), q);
                fixed.insert(fixed.begin() + static_cast<std::ptrdiff_t>(pos), true);
            }
        }
    }
    const std::size_t n = x.size();
    if (n < 3) throw Error(ErrorCode::singular_mesh, "mesh has fewer than three nodes");

    std::vector<const CellData*> cells(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) cells[i] = &cache.get(x[i], x[i + 1]);
    chain.ds.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) chain.ds[i] = cells[i]->ds;
    chain.left = p.left.cond;
    chain.right = p.right.cond;
    chain.mass.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (chain.absorbing(i)) continue;
        if (i > 0) chain.mass[i] += cells[i - 1]->wl / cells[i - 1]->ds;
        if (i + 1 < n) chain.mass[i] += cells[i]->wr / cells[i]->ds;
    }
    // weighted_mass_to_right leaves out an atom sitting at the left end of its cell.
    if (!chain.absorbing(0)) chain.mass[0] += p.spec.speed.atom_at(x[0]);

    chain.hold.assign(n, 0.0);
    chain.p_up.assign(n, 0.5);
    for (std::size_t i = 0; i < n; ++i) {
        if (chain.absorbing(i)) continue;
        if (!(chain.mass[i] > 0.0))
            throw Error(ErrorCode::singular_mesh, "speed measure gives no mass around x = " + format_number(x[i]));
        if (i == 0) {
            chain.p_up[i] = 1.0;
            chain.hold[i] = 2.0 * chain.ds[0] * chain.mass[i];
        } else if (i + 1 == n) {
            chain.p_up[i] = 0.0;
            chain.hold[i] = 2.0 * chain.ds[n - 2] * chain.mass[i];
        } else {
            const double hl = chain.ds[i - 1], hr = chain.ds[i];
            chain.p_up[i] = hl / (hl + hr);
            chain.hold[i] = 2.0 * hl * hr * chain.mass[i] / (hl + hr);
        }
    }
    chain.start = static_cast<std::size_t>(std::lower_bound(x.begin(), x.end(), p.x) - x.begin());
    if (chain.start >= n) chain.start = n - 1;
    return chain;
}

struct Settled {
    ChainApproximation chain;
    double value = 0.0;
    int left_depth = 0;
    int right_depth = 0;
    double cutoff_change = 0.0;  // last change seen when a cutoff could not settle
};

double value_at_start(const ChainApproximation& chain, double alpha) { return chain.solve(alpha)[chain.start]; }

/// Pushes the truncated cutoffs outward until the value at x changes by less
/// than the tolerance, or the approach sequence (or finite arithmetic) ends.
Settled settle(const Problem& p, const ChainSettings& settings, CellCache& cache) {
    const bool moving = p.left.truncated || p.right.truncated;
    Settled out;
    // The first cutoff must lie beyond x.
    int depth = kFirstCutoff;
    if (p.left.truncated)
        while (depth < max_depth(p, Side::left) && p.points_left[static_cast<std::size_t>(depth - 1)] >= p.x) ++depth;
    if (p.right.truncated)
        while (depth < max_depth(p, Side::right) && p.points_right[static_cast<std::size_t>(depth - 1)] <= p.x) ++depth;
    const int limit = std::max(p.left.truncated ? max_depth(p, Side::left) : 0,
                               p.right.truncated ? max_depth(p, Side::right) : 0);
    out.chain = assemble(p, settings, depth, depth, cache);
    out.value = value_at_start(out.chain, p.alpha);
    out.left_depth = out.right_depth = depth;
    if (!moving) return out;
    out.cutoff_change = kInf;
    while (depth < limit) {
        const int next = std::min(depth + kCutoffStep, limit);
        ChainApproximation chain;
        double value = 0.0;
        try {
            chain = assemble(p, settings, next, next, cache);
            value = value_at_start(chain, p.alpha);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::singular_mesh) throw;
            break;
        }
        if (!std::isfinite(value)) break;
        const double change = std::abs(value - out.value);
        out.chain = std::move(chain);
        out.value = value;
        out.left_depth = out.right_depth = depth = next;
        out.cutoff_change = change;
        if (change <= settings.cutoff_tol * std::max(std::abs(value), 1e-300)) {
            out.cutoff_change = change;
            return out;
        }
    }
    return out;
}

/// Value for x on or outside a mesh end, where the functional is fixed.
std::optional<double> trivial_value(const DiffusionSpec& spec, Side target, double x) {
    const auto& interval = spec.interval;
    if (x == interval.endpoint(target)) return 1.0;
    if (x == interval.endpoint(opposite(target))) return 0.0;
    if (!interval.in_interior(x))
        throw Error(ErrorCode::domain_error, "x = " + format_number(x) + " is outside " + describe(interval));
    return std::nullopt;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::string_view to_string(OracleMethod method) noexcept { return method == OracleMethod::fd ? "FD" : "MC"; }

bool ChainApproximation::absorbing(std::size_t i) const noexcept {
    if (i == 0) return left != EndCondition::reflecting;
    if (i + 1 == x.size()) return right != EndCondition::reflecting;
    return false;
}

double ChainApproximation::boundary_value(std::size_t i) const noexcept {
    const EndCondition c = i == 0 ? left : right;
    return c == EndCondition::dirichlet_one ? 1.0 : 0.0;
}

double ChainApproximation::expected_displacement(std::size_t i) const noexcept {
    return p_up[i] * ds[i] - (1.0 - p_up[i]) * ds[i - 1];
}

std::vector<double> ChainApproximation::solve(double alpha) const {
    const std::size_t n = x.size();
    std::vector<double> up(n, 0.0), down(n, 0.0), kill(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (absorbing(i)) {
            kill[i] = 1.0;
            rhs[i] = boundary_value(i);
            continue;
        }
        kill[i] = alpha * hold[i];
        if (i == 0 || i + 1 == n) {
            (i == 0 ? up : down)[i] = 1.0;
        } else {
            // Both probabilities from the cell widths: 1 - p_up loses all digits
            // when one neighbour sits within rounding of the node.
            up[i] = ds[i - 1] / (ds[i - 1] + ds[i]);
            down[i] = ds[i] / (ds[i - 1] + ds[i]);
        }
    }
    return solve_birth_death(std::move(up), std::move(down), std::move(kill), std::move(rhs));
}

std::vector<double> solve_birth_death(std::vector<double> up, std::vector<double> down, std::vector<double> kill,
                                      std::vector<double> rhs) {
    const std::size_t n = up.size();
    // excess[i] = pivot[i] - up[i] stays a sum of nonnegative terms.
    std::vector<double> excess(n), pivot(n);
    for (std::size_t i = 0; i < n; ++i) {
        excess[i] = kill[i];
        if (i > 0) {
            excess[i] += down[i] * excess[i - 1] / pivot[i - 1];
            rhs[i] += down[i] * rhs[i - 1] / pivot[i - 1];
        }
        pivot[i] = up[i] + excess[i];
    }
    std::vector<double> out(n);
    out[n - 1] = rhs[n - 1] / pivot[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = (rhs[i] + up[i] * out[i + 1]) / pivot[i];
    return out;
}

ChainApproximation build_chain(const DiffusionSpec& spec, const BoundaryReport& report, double alpha, Side target,
                               double x, const ChainSettings& settings, int left_depth, int right_depth) {
    const Problem p = make_problem(spec, report, alpha, target, x);
    CellCache cache(spec);
    return assemble(p, settings, left_depth, right_depth, cache);
}

double fd_solve(const DiffusionSpec& spec, double alpha, Side target, double x, const ChainSettings& settings) {
    if (auto v = trivial_value(spec, target, x)) return *v;
    const Problem p = make_problem(spec, boundary_report(spec), alpha, target, x);
    CellCache cache(spec);
    return settle(p, settings, cache).value;
}

OracleEstimate fd_exit_functional(const DiffusionSpec& spec, double alpha, Side target, double x,
                                  const ChainSettings& settings) {
    OracleEstimate out;
    out.method = OracleMethod::fd;
    if (auto v = trivial_value(spec, target, x)) {
        out.value = *v;
        return out;
    }
    const Problem p = make_problem(spec, boundary_report(spec), alpha, target, x);
    CellCache cache(spec);
    const Settled coarse = settle(p, settings, cache);
    ChainSettings fine_settings = settings;
    fine_settings.subdivisions *= 2;
    const ChainApproximation fine = assemble(p, fine_settings, coarse.left_depth, coarse.right_depth, cache);
    const double fine_value = value_at_start(fine, alpha);
    // Second-order scheme: the fine error is about a third of the mesh difference.
    const double correction = (fine_value - coarse.value) / 3.0;
    out.value = fine_value + correction;
    out.half_width = std::abs(correction) + (std::isfinite(coarse.cutoff_change) ? coarse.cutoff_change : 0.0);
    out.mesh = fine.size() - 1;
    return out;
}

OracleEstimate mc_exit_functional(const DiffusionSpec& spec, double alpha, Side target, double x,
                                  std::size_t n_paths, std::uint64_t seed, const McSettings& settings) {
    if (n_paths < 1000) throw Error(ErrorCode::domain_error, "at least 1000 paths are required");
    OracleEstimate out;
    out.method = OracleMethod::mc;
    out.n_paths = n_paths;
    if (auto v = trivial_value(spec, target, x)) {
        out.value = *v;
        return out;
    }
    const Problem p = make_problem(spec, boundary_report(spec), alpha, target, x);
    CellCache cache(spec);
    ChainSettings chain_settings = settings.chain;
    if (alpha == 0.0) chain_settings.subdivisions = settings.zero_alpha_subdivisions;
    Settled settled = settle(p, chain_settings, cache);
    // With discounting the walk's law depends on the mesh. The mesh is doubled
    // until the chain's own second-order error estimate falls below a fraction
    // of the standard error a Bernoulli-sized sample would have.
    double discretization = 0.0;
    if (alpha > 0.0) {
        for (;;) {
            ChainSettings finer = chain_settings;
            finer.subdivisions *= 2;
            Settled refined = settle(p, finer, cache);
            discretization = std::abs(settled.value - refined.value) * 4.0 / 3.0;
            const double v = std::clamp(settled.value, 0.0, 1.0);
            const double expected_se = std::sqrt(std::max(v * (1.0 - v), 1e-12) / static_cast<double>(n_paths));
            if (discretization <= settings.discretization_fraction * expected_se ||
                finer.subdivisions > settings.max_subdivisions)
                break;
            chain_settings = finer;
            settled = std::move(refined);
        }
    }
    const ChainApproximation& chain = settled.chain;
    out.mesh = chain.size() - 1;

    // A reflecting side at alpha = 0 never discounts or kills the walk, so no
    // finite time cap bounds the bias; the exact chain solve is returned instead.
    if (alpha == 0.0 && (chain.left == EndCondition::reflecting || chain.right == EndCondition::reflecting)) {
        out.method = OracleMethod::fd;
        out.n_paths = 0;
        out.value = settled.value;
        return out;
    }

    const std::size_t n = chain.size();
    std::vector<double> discount(n, 1.0), stop_value(n, -1.0);
    // Jump up when the top 53 random bits fall below p_up scaled to 2^53.
    std::vector<std::uint64_t> up_below(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        discount[i] = 1.0 / (1.0 + alpha * chain.hold[i]);
        if (chain.absorbing(i)) stop_value[i] = chain.boundary_value(i);
        up_below[i] = static_cast<std::uint64_t>(std::ldexp(chain.p_up[i], 53));
    }

    std::vector<double> values(n_paths, 0.0);
    std::vector<unsigned char> capped(n_paths, 0);
    std::vector<unsigned char> overrun(n_paths, 0);
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t path = begin; path < end; ++path) {
            PathRng rng(seed, path);
            std::size_t i = chain.start;
            double weight = 1.0;
            std::uint64_t steps = 0;
            for (;;) {
                if (stop_value[i] >= 0.0) {
                    values[path] = weight * stop_value[i];
                    break;
                }
                weight *= discount[i];
                if (weight < settings.weight_floor) {
                    capped[path] = 1;
                    break;
                }
                if (++steps > settings.max_steps) {
                    overrun[path] = 1;
                    break;
                }
                i = (rng.next() >> 11) < up_below[i] ? i + 1 : i - 1;
            }
        }
    };
    unsigned threads = settings.threads != 0 ? settings.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_paths / 1000 + 1));
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_paths + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk, end = std::min(n_paths, begin + chunk);
        if (begin < end) pool.emplace_back(run, begin, end);
    }
    for (auto& th : pool) th.join();

    if (std::any_of(overrun.begin(), overrun.end(), [](unsigned char c) { return c != 0; }))
        throw Error(ErrorCode::bias_unbounded, "paths exceeded " + std::to_string(settings.max_steps) +
                                                   " steps without exit or discount below the floor");
    // Reductions in path order keep the result independent of the thread count.
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(n_paths);
    double sq = 0.0;
    for (double v : values) sq += (v - mean) * (v - mean);
    const double var = sq / static_cast<double>(n_paths - 1);
    std::size_t n_capped = 0;
    for (unsigned char c : capped) n_capped += c;
    out.value = mean;
    out.std_error = std::sqrt(var / static_cast<double>(n_paths));
    out.half_width = 1.96 * out.std_error;
    out.bias_bound =
        settings.weight_floor * static_cast<double>(n_capped) / static_cast<double>(n_paths) + discretization;
    return out;
}

double hitting_probability(const DiffusionSpec& spec, double x, Side side) {
    const Interval ie = effective_interval(spec);
    const bool has_l = ie.includes_l, has_r = ie.includes_r;
    if (!has_l && !has_r) throw Error(ErrorCode::case_mismatch, "I_e is open; no hitting law applies");
    if (!ie.includes(side))
        throw Error(ErrorCode::case_mismatch, std::string(to_string(side)) + " endpoint is not in I_e = " + describe(ie));
    const bool in_ie = ie.in_interior(x) || (x == ie.l && has_l) || (x == ie.r && has_r);
    if (!in_ie) throw Error(ErrorCode::domain_error, "x = " + format_number(x) + " is not in I_e = " + describe(ie));
    const Side other = opposite(side);
    const double far = ie.endpoint(other);
    if (!ie.includes(other)) {
        // s(x) to the far endpoint; infinite scale there is the recurrent branch.
        const double rest = side == Side::left ? spec.scale.increment(x, far) : spec.scale.increment(far, x);
        if (!std::isfinite(rest)) return 1.0;
    }
    const double total = spec.scale.increment(ie.l, ie.r);
    const double num = side == Side::left ? spec.scale.increment(x, ie.r) : spec.scale.increment(ie.l, x);
    if (!std::isfinite(total) && !std::isfinite(num)) return 1.0;
    return num / total;
}

PathRng::PathRng(std::uint64_t seed, std::uint64_t path) noexcept
    : key_(mix64(mix64(seed) ^ (path * kGolden + 0x632be59bd9b4e019ULL))) {}

std::uint64_t PathRng::next() noexcept { return mix64(key_ + ++counter_ * kGolden); }

double PathRng::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

}  // namespace dharm
