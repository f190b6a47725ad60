#include "dharm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>

namespace dharm {

namespace {

GaussRule compute_rule(std::size_t n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

struct Panel {
    double a;
    double b;
    double value;
    double error;
    bool operator<(const Panel& other) const { return error < other.error; }
};

constexpr std::size_t kPanelPoints = 10;

double panel_sum(const std::function<double(double)>& f, double a, double b, bool& bad) {
    const auto& rule = gauss_legendre(kPanelPoints);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double v = f(mid + half * rule.nodes[i]);
        if (!std::isfinite(v)) bad = true;
        sum += rule.weights[i] * v;
    }
    return sum * half;
}

}  // namespace

const GaussRule& gauss_legendre(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
    return it->second;
}

double integrate_fixed(const std::function<double(double)>& f, double a, double b, std::size_t n) {
    const auto& rule = gauss_legendre(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return sum * half;
}

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureOptions& opts) {
    QuadratureResult result;
    if (a == b) return result;
    bool bad = false;
    auto refine = [&](double lo, double hi) {
        const double m = 0.5 * (lo + hi);
        const double left = panel_sum(f, lo, m, bad);
        const double right = panel_sum(f, m, hi, bad);
        return std::pair{Panel{lo, m, left, 0.0}, Panel{m, hi, right, 0.0}};
    };

    std::priority_queue<Panel> queue;
    const double whole = panel_sum(f, a, b, bad);
    {
        auto [l, r] = refine(a, b);
        const double err = std::abs(whole - (l.value + r.value));
        l.error = r.error = 0.5 * err;
        queue.push(l);
        queue.push(r);
    }
    double total = 0.0;
    double total_err = 0.0;
    auto recompute = [&] {
        total = 0.0;
        total_err = 0.0;
        auto copy = queue;
        while (!copy.empty()) {
            total += copy.top().value;
            total_err += copy.top().error;
            copy.pop();
        }
    };
    recompute();
    std::size_t count = 2;
    while (!bad && total_err > std::max(opts.abs_tol, opts.rel_tol * std::abs(total))) {
        if (count >= opts.max_intervals) {
            result.converged = false;
            break;
        }
        Panel worst = queue.top();
        queue.pop();
        if (worst.b - worst.a <= 4.0 * std::numeric_limits<double>::epsilon() *
                                      std::max(std::abs(worst.a), std::abs(worst.b))) {
            // Panel at floating-point resolution; accept its contribution as is.
            worst.error = 0.0;
            queue.push(worst);
            recompute();
            continue;
        }
        auto [l, r] = refine(worst.a, worst.b);
        const double err = std::abs(worst.value - (l.value + r.value));
        l.error = r.error = 0.5 * err;
        total += l.value + r.value - worst.value;
        total_err += l.error + r.error - worst.error;
        queue.push(l);
        queue.push(r);
        ++count;
        if (count % 64 == 0) recompute();
    }
    recompute();
    result.value = total;
    result.error = total_err;
    result.non_finite = bad || !std::isfinite(total);
    if (result.non_finite) {
        result.value = std::numeric_limits<double>::infinity();
        result.converged = false;
    }
    return result;
}

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, const QuadratureOptions& opts) {
    QuadratureResult total;
    if (a == b) return total;
    if (a > b) {
        auto r = integrate(f, b, a, breakpoints, opts);
        r.value = -r.value;
        return r;
    }
    std::vector<double> cuts{a};
    for (double p : breakpoints)
        if (p > a && p < b) cuts.push_back(p);
    cuts.push_back(b);

    const bool infinite = std::isinf(a) || std::isinf(b);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        QuadratureResult piece;
        if (!infinite) {
            piece = integrate_adaptive(f, cuts[i], cuts[i + 1], opts);
        } else {
            // x = t / (1 - |t|), dx/dt = 1 / (1 - |t|)^2
            auto to_t = [](double x) {
                if (std::isinf(x)) return x > 0 ? 1.0 : -1.0;
                return x / (1.0 + std::abs(x));
            };
            auto g = [&f](double t) {
                const double d = 1.0 - std::abs(t);
                const double x = t / d;
                const double v = f(x);
                if (v == 0.0) return 0.0;
                return v / (d * d);
            };
            piece = integrate_adaptive(g, to_t(cuts[i]), to_t(cuts[i + 1]), opts);
        }
        total.value += piece.value;
        total.error += piece.error;
        total.converged = total.converged && piece.converged;
        total.non_finite = total.non_finite || piece.non_finite;
    }
    if (total.non_finite) total.value = std::numeric_limits<double>::infinity();
    return total;
}

}  // namespace dharm
