#include "catsel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace catsel {

namespace {

// 53-bit uniform, bit-identical across platforms (same construction as the
// homodyne sampler's).
double uniform53(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Knuth's product method, chunked so e^{-lambda} never underflows. Sums of
// independent Poisson draws are Poisson, so chunking is exact.
long poisson_draw(std::mt19937_64& rng, double lambda) {
    if (lambda < 0.0) throw UsageError("poisson_draw: negative mean");
    long n = 0;
    while (lambda > 60.0) {
        n += poisson_draw(rng, 60.0);
        lambda -= 60.0;
    }
    const double limit = std::exp(-lambda);
    double p = 1.0;
    long k = 0;
    do {
        ++k;
        p *= uniform53(rng);
    } while (p > limit);
    return n + k - 1;
}

} // namespace

PureState cat_state(Complex beta, Complex delta_beta, int cutoff, double eps_trunc) {
    PureState displaced = coherent_state(beta + delta_beta, cutoff, eps_trunc, "t");
    PureState base = coherent_state(beta, cutoff, eps_trunc, "t");
    const double xi = std::exp(-0.5 * std::norm(delta_beta));

    PureState cat;
    cat.layout = displaced.layout;
    cat.amps = displaced.amps - xi * base.amps;
    double norm = cat.amps.norm();
    if (norm < 1e-8)
        throw UsageError("cat state degenerates as delta_beta -> 0 (norm " + std::to_string(norm) +
                         ")");
    cat.amps /= norm;
    return cat;
}

FidelityScanResult fidelity_scan(const DensityOperator& rho, double lo, double hi,
                                 int resolution) {
    if (resolution < 2) throw UsageError("fidelity_scan: resolution must be at least 2");
    if (!(lo < hi) || lo < 0.0) throw UsageError("fidelity_scan: need 0 <= lo < hi");

    const int dim = rho.dim();
    // Cats are built on their own (larger) cutoff; only the first dim
    // amplitudes meet rho, which has no support beyond its cutoff.
    const int cat_cutoff = std::max(dim - 1, suggested_cutoff(2.0 * hi));

    FidelityScanResult result;
    result.lo = lo;
    result.hi = hi;
    result.resolution = resolution;
    result.best_fidelity = -1.0;

    const double step = (hi - lo) / (resolution - 1);
    Vec head(dim);
    for (int i = 0; i < resolution; ++i) {
        const double b = lo + i * step;
        for (int j = 0; j < resolution; ++j) {
            const double d = lo + j * step;
            PureState cat;
            try {
                cat = cat_state(b, d, cat_cutoff);
            } catch (const UsageError&) {
                continue; // degenerate corner of the grid
            }
            head = cat.amps.head(dim);
            const double f = (head.adjoint() * rho.matrix * head)(0).real();
            if (f > result.best_fidelity) {
                result.best_fidelity = f;
                result.best_beta = b;
                result.best_delta_beta = d;
            }
        }
    }
    if (result.best_fidelity < 0.0)
        throw UsageError("fidelity_scan: every grid cell was degenerate");
    return result;
}

FluctuationResult intensity_fluctuation_state(const FluctuationSpec& spec) {
    if (spec.alpha0 <= 0.0) throw UsageError("fluctuations: alpha0 must be positive");
    if (spec.n_nodes < 1) throw UsageError("fluctuations: need at least one node");

    // The selection rule freezes at the nominal amplitude; per-node c would
    // hop between integers as alpha crosses sqrt(2 (c + 1)) and make the
    // mixture discontinuous in sigma_tilde.
    const double n0_fix = spec.ps.resolved_n0(HhgSpec{spec.alpha0, spec.delta_alpha, spec.harmonics});
    PostSelectionSpec node_ps = spec.ps;
    node_ps.n0 = n0_fix;
    node_ps.c = spec.ps.resolved_c(n0_fix);
    node_ps.sigma2 = spec.ps.resolved_sigma2(n0_fix);

    // One set of cutoffs for every node, sized by the largest amplitude.
    const double a_max = spec.alpha0 + 4.0 * std::max(spec.sigma_tilde, 0.0);
    const HhgSpec proto{Complex(a_max), Complex(spec.delta_alpha), spec.harmonics};

    std::vector<double> nodes, weights;
    if (spec.sigma_tilde <= 0.0 || spec.n_nodes == 1) {
        nodes = {spec.alpha0};
        weights = {1.0};
    } else {
        for (int i = 0; i < spec.n_nodes; ++i) {
            double a = spec.alpha0 - 4.0 * spec.sigma_tilde +
                       8.0 * spec.sigma_tilde * i / (spec.n_nodes - 1);
            nodes.push_back(std::max(a, 0.0));
        }
        double total = 0.0;
        for (double a : nodes) {
            double u = (a - spec.alpha0) / spec.sigma_tilde;
            weights.push_back(std::exp(-0.5 * u * u));
            total += weights.back();
        }
        for (double& w : weights) w /= total;
    }

    FluctuationResult out;
    Mat rho_acc;
    double trace_acc = 0.0;

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        HhgSpec hhg = proto;
        hhg.alpha = Complex(nodes[i]);
        hhg.cutoff_t = proto.resolved_cutoff_t();
        hhg.cutoff_r = proto.resolved_cutoff_r();
        hhg.cutoff_q = proto.resolved_cutoff_q();

        SelectionResult sel;
        try {
            sel = run_postselection(hhg, node_ps);
        } catch (const EmptySelectionError&) {
            continue;
        } catch (const DegenerateSelectionError&) {
            continue;
        }

        if (rho_acc.size() == 0) rho_acc = Mat::Zero(sel.rho.dim(), sel.rho.dim());
        const double w = weights[i] * sel.success;
        rho_acc.noalias() += w * sel.rho.matrix;
        trace_acc += w;
        out.mean_success += weights[i] * sel.success;
        ++out.nodes_used;
    }

    if (!(trace_acc > 0.0))
        throw DegenerateSelectionError("every fluctuation node was rejected by the selection");
    out.rho = DensityOperator{rho_acc / trace_acc};
    return out;
}

CorrelationMap correlation_map(const HhgSpec& hhg, long n_shots, std::uint64_t seed,
                               const std::vector<DiagonalFilter>& filters) {
    if (n_shots < 1) throw UsageError("correlation_map: need at least one shot");
    for (const DiagonalFilter& f : filters)
        if (!f.kappas.empty() && f.kappas.size() != hhg.harmonics.size())
            throw UsageError("correlation_map: filter kappas length does not match harmonics");

    const double lambda_r = std::norm((hhg.alpha + hhg.delta_alpha) / std::sqrt(2.0));
    std::vector<double> lambda_q;
    for (const Harmonic& h : hhg.harmonics) lambda_q.push_back(std::norm(h.chi));

    std::mt19937_64 rng(seed);

    CorrelationMap map;
    for (const Harmonic& h : hhg.harmonics) map.harmonic_orders.push_back(h.order);
    map.acceptance.assign(filters.size(), 0.0);
    map.shots.reserve(n_shots);

    for (long i = 0; i < n_shots; ++i) {
        ShotRecord rec;
        rec.shot = i;
        rec.n_r = static_cast<int>(poisson_draw(rng, lambda_r));
        rec.ms.resize(hhg.harmonics.size());
        double xuv = 0.0;
        for (std::size_t q = 0; q < hhg.harmonics.size(); ++q) {
            rec.ms[q] = static_cast<int>(poisson_draw(rng, lambda_q[q]));
            xuv += rec.ms[q];
        }
        rec.i_ir = rec.n_r;
        rec.i_xuv = xuv;

        rec.accepted.resize(filters.size());
        for (std::size_t f = 0; f < filters.size(); ++f) {
            double weighted = rec.n_r;
            for (std::size_t q = 0; q < rec.ms.size(); ++q) {
                double kappa = filters[f].kappas.empty() ? hhg.harmonics[q].order
                                                         : filters[f].kappas[q];
                weighted += kappa * rec.ms[q];
            }
            bool ok = std::abs(weighted - filters[f].center) <= filters[f].half_width + 1e-12;
            rec.accepted[f] = ok;
            if (ok) map.acceptance[f] += 1.0;
        }
        map.mean_i_ir += rec.i_ir;
        map.mean_i_xuv += rec.i_xuv;
        map.shots.push_back(std::move(rec));
    }

    for (double& a : map.acceptance) a /= static_cast<double>(n_shots);
    map.mean_i_ir /= static_cast<double>(n_shots);
    map.mean_i_xuv /= static_cast<double>(n_shots);
    return map;
}

void write_csv(const CorrelationMap& map, std::ostream& os) {
    os << "i,n_r";
    for (int q : map.harmonic_orders) os << ",m_" << q;
    os << ",I_IR,I_XUV";
    std::size_t n_filters = map.shots.empty() ? map.acceptance.size() : map.shots[0].accepted.size();
    for (std::size_t f = 0; f < n_filters; ++f) os << ",accepted_filter_" << f;
    os << '\n';
    for (const ShotRecord& rec : map.shots) {
        os << rec.shot << ',' << rec.n_r;
        for (int m : rec.ms) os << ',' << m;
        os << ',' << rec.i_ir << ',' << rec.i_xuv;
        for (bool a : rec.accepted) os << ',' << (a ? 1 : 0);
        os << '\n';
    }
}

} // namespace catsel
