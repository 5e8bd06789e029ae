#include "catsel/postselect.hpp"

#include <cmath>

namespace catsel {

namespace {

// Half-width of the admission band. Kept closed at both ends; the epsilon
// absorbs float noise when kappa sums land exactly on the edge.
constexpr double kBandHalfWidth = 0.5;
constexpr double kBandEps = 1e-12;

Complex split_amplitude(const HhgSpec& spec) { return (spec.alpha + spec.delta_alpha) / std::sqrt(2.0); }

} // namespace

int HhgSpec::resolved_cutoff_t() const {
    return cutoff_t >= 0 ? cutoff_t : suggested_cutoff(std::abs(split_amplitude(*this)));
}

int HhgSpec::resolved_cutoff_r() const {
    if (cutoff_r >= 0) return cutoff_r;
    // The reflected mode enters only through the admission band, but its
    // cutoff must cover counts up to c + 1/2 or the band itself gets clipped.
    int stat = suggested_cutoff(std::abs(split_amplitude(*this)));
    int band = static_cast<int>(std::floor(n0() / 2.0 + kBandHalfWidth)) + 1;
    return std::max(stat, band);
}

int HhgSpec::resolved_cutoff_q() const {
    if (cutoff_q >= 0) return cutoff_q;
    double chi_max = 0.0;
    for (const Harmonic& h : harmonics) chi_max = std::max(chi_max, std::abs(h.chi));
    return suggested_cutoff(chi_max);
}

ModeLayout HhgSpec::layout() const {
    std::vector<int> dims{resolved_cutoff_t() + 1, resolved_cutoff_r() + 1};
    std::vector<std::string> labels{"t", "r"};
    for (const Harmonic& h : harmonics) {
        dims.push_back(resolved_cutoff_q() + 1);
        labels.push_back("q" + std::to_string(h.order));
    }
    return ModeLayout(std::move(dims), std::move(labels));
}

double PostSelectionSpec::resolved_c(double n0_value) const {
    return c ? *c : std::floor(n0_value / 2.0);
}

double PostSelectionSpec::resolved_sigma2(double n0_value) const {
    return sigma2 > 0.0 ? sigma2 : n0_value / 2.0;
}

double PostSelectionSpec::resolved_n0(const HhgSpec& hhg) const { return n0 ? *n0 : hhg.n0(); }

std::vector<double> PostSelectionSpec::resolved_kappas(const HhgSpec& hhg) const {
    std::vector<double> out;
    if (kappas.empty()) {
        for (const Harmonic& h : hhg.harmonics) out.push_back(static_cast<double>(h.order));
    } else {
        if (kappas.size() != hhg.harmonics.size())
            throw UsageError("kappas length does not match harmonic count");
        out = kappas;
    }
    if (efficiency <= 0.0 || efficiency > 1.0)
        throw UsageError("detector efficiency must lie in (0, 1]");
    for (double& k : out) k *= efficiency;
    return out;
}

PureState build_hhg_state(const HhgSpec& spec) {
    for (std::size_t i = 0; i < spec.harmonics.size(); ++i) {
        if (spec.harmonics[i].order <= 0) throw UsageError("harmonic order must be positive");
        if (i > 0 && spec.harmonics[i].order <= spec.harmonics[i - 1].order)
            throw UsageError("harmonic orders must be strictly increasing");
    }

    Complex split = split_amplitude(spec);
    std::vector<PureState> factors;
    factors.push_back(coherent_state(split, spec.resolved_cutoff_t(), spec.eps_trunc, "t"));
    factors.push_back(coherent_state(split, spec.resolved_cutoff_r(), spec.eps_trunc, "r"));
    for (const Harmonic& h : spec.harmonics)
        factors.push_back(coherent_state(h.chi, spec.resolved_cutoff_q(), spec.eps_trunc,
                                         "q" + std::to_string(h.order)));
    return tensor(factors);
}

DiagonalSet enumerate_diagonal(const HhgSpec& hhg, const PostSelectionSpec& ps) {
    const int cutoff_t = hhg.resolved_cutoff_t();
    const int cutoff_r = hhg.resolved_cutoff_r();
    const int cutoff_q = hhg.resolved_cutoff_q();
    const int n_harm = static_cast<int>(hhg.harmonics.size());

    const double n0 = ps.resolved_n0(hhg);
    const double c = ps.resolved_c(n0);
    const double s2 = ps.resolved_sigma2(n0);
    const std::vector<double> kappas = ps.resolved_kappas(hhg);
    if (!ps.exact && s2 <= 0.0) throw UsageError("fuzzy selection needs sigma2 > 0");

    DiagonalSet out;
    std::vector<int> ms(n_harm, 0);

    auto admit = [&](int n_r) {
        double weighted = n_r;
        double energy = n0 - n_r;
        for (int i = 0; i < n_harm; ++i) {
            weighted += kappas[i] * ms[i];
            energy -= hhg.harmonics[i].order * ms[i];
        }
        if (std::abs(weighted - c) > kBandHalfWidth + kBandEps) return;

        Eigen::VectorXd w = Eigen::VectorXd::Zero(cutoff_t + 1);
        if (ps.exact) {
            // round-half-up to the nearest Fock level of the energy balance
            int target = static_cast<int>(std::floor(energy + 0.5));
            if (target < 0 || target > cutoff_t) {
                ++out.dropped;
                return;
            }
            w[target] = 1.0;
        } else {
            bool any = false;
            for (int n = 0; n <= cutoff_t; ++n) {
                double g = std::exp(-(n - energy) * (n - energy) / (2.0 * s2));
                if (g >= ps.weight_floor) {
                    w[n] = g;
                    any = true;
                }
            }
            if (!any) {
                ++out.dropped;
                return;
            }
        }
        out.tuples.push_back(DiagonalTuple{n_r, ms, std::move(w)});
    };

    // odometer over the harmonic counts, innermost loop over n_r
    while (true) {
        for (int n_r = 0; n_r <= cutoff_r; ++n_r) admit(n_r);
        int i = n_harm - 1;
        while (i >= 0 && ms[i] == cutoff_q) ms[i--] = 0;
        if (i < 0) break;
        ++ms[i];
    }
    return out;
}

SelectionResult apply_postselection(const PureState& state, const DiagonalSet& diag) {
    if (diag.tuples.empty())
        throw EmptySelectionError("no measurement tuple satisfies the admission rule");

    const ModeLayout& layout = state.layout;
    const int t_mode = layout.mode_index("t");
    if (t_mode != 0) throw UsageError("transmitted mode must come first in the layout");
    const int dim_t = layout.dims[0];

    long stride = layout.total_dim() / dim_t; // distance between n_t and n_t + 1

    Mat rho = Mat::Zero(dim_t, dim_t);
    double success = 0.0;
    std::vector<int> occ(layout.n_modes());
    Vec phi(dim_t);

    for (const DiagonalTuple& tup : diag.tuples) {
        if (tup.weights.size() != dim_t)
            throw UsageError("tuple weight length does not match the transmitted cutoff");
        occ[0] = 0;
        occ[1] = tup.n_r;
        for (std::size_t i = 0; i < tup.ms.size(); ++i) occ[2 + i] = tup.ms[i];
        long offset = layout.flat_index(occ);

        for (int n = 0; n < dim_t; ++n) phi[n] = tup.weights[n] * state.amps[offset + n * stride];
        double p = phi.squaredNorm();
        if (p == 0.0) continue;
        rho.noalias() += phi * phi.adjoint();
        success += p;
    }

    if (!(success > 0.0))
        throw DegenerateSelectionError("all admitted tuples carry zero weight");
    if (!std::isfinite(success)) throw NumericalError("selection trace is not finite");

    SelectionResult result;
    result.rho = DensityOperator{rho / success};
    result.success = success / state.norm2();
    result.tuple_count = static_cast<long>(diag.tuples.size());
    result.dropped = diag.dropped;
    return result;
}

PostSelectionSpec apply_detector_efficiency(PostSelectionSpec ps, double eta) {
    if (eta <= 0.0 || eta > 1.0) throw UsageError("detector efficiency must lie in (0, 1]");
    ps.efficiency *= eta;
    if (ps.efficiency <= 0.0 || ps.efficiency > 1.0)
        throw UsageError("combined detector efficiency must lie in (0, 1]");
    return ps;
}

SelectionResult run_postselection(const HhgSpec& hhg, const PostSelectionSpec& ps) {
    return apply_postselection(build_hhg_state(hhg), enumerate_diagonal(hhg, ps));
}

} // namespace catsel
