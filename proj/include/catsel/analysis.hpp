#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "catsel/postselect.hpp"

namespace catsel {

// Normalized superposition (|beta + delta_beta> - xi |beta>)/N with
// xi = exp(-|delta_beta|^2 / 2). Degenerate when delta_beta ~ 0 (N -> 0).
PureState cat_state(Complex beta, Complex delta_beta, int cutoff, double eps_trunc = 1e-6);

struct FidelityScanResult {
    double best_beta = 0.0;
    double best_delta_beta = 0.0;
    double best_fidelity = 0.0;
    double lo = 0.0, hi = 0.0;
    int resolution = 0;
};

// Exhaustive grid scan of <cat(b, d)| rho |cat(b, d)> over real b, d in
// [lo, hi], axis-uniform 'resolution' points each, endpoints included.
// Ties resolve to the lexicographically smaller (b, d) so results are
// grid-order independent. Degenerate grid cells are skipped.
FidelityScanResult fidelity_scan(const DensityOperator& rho, double lo = 1e-3, double hi = 3.0,
                                 int resolution = 100);

struct FluctuationSpec {
    double alpha0 = 2.0;
    double delta_alpha = -0.3;
    std::vector<Harmonic> harmonics;
    double sigma_tilde = 0.0; // std dev of the driving amplitude
    int n_nodes = 21;         // quadrature nodes across +-4 sigma_tilde
    PostSelectionSpec ps;     // exact flag, kappas, overrides
};

struct FluctuationResult {
    DensityOperator rho;
    double mean_success = 0.0;
    int nodes_used = 0;
};

// Gaussian mixture over the driving amplitude. The selection rule (n0, c,
// sigma2) is frozen from alpha0 once; only the optical state varies per
// node. Node weights are renormalized after clipping alpha >= 0, and each
// node enters the mixture weighted by its own acceptance probability.
FluctuationResult intensity_fluctuation_state(const FluctuationSpec& spec);

struct DiagonalFilter {
    double center = 0.0;
    double half_width = 0.5;
    std::vector<double> kappas; // empty: kappa_q = q
};

struct ShotRecord {
    long shot = 0;
    int n_r = 0;
    std::vector<int> ms;
    double i_ir = 0.0;  // counts at the IR detector, i.e. n_r
    double i_xuv = 0.0; // total harmonic photon count, sum_q m_q
    std::vector<bool> accepted;
};

struct CorrelationMap {
    std::vector<ShotRecord> shots;
    std::vector<double> acceptance; // per filter
    std::vector<int> harmonic_orders;
    double mean_i_ir = 0.0;
    double mean_i_xuv = 0.0;

    // Scale for plotting both intensities on one axis (y-axis times the
    // mean-intensity ratio); 0 when no harmonic photons were seen.
    double axis_ratio() const { return mean_i_xuv > 0.0 ? mean_i_ir / mean_i_xuv : 0.0; }
};

// Independent Poisson draws n_r ~ |(alpha+delta_alpha)/sqrt(2)|^2 and
// m_q ~ |chi_q|^2, classified against each filter's admission band.
CorrelationMap correlation_map(const HhgSpec& hhg, long n_shots, std::uint64_t seed,
                               const std::vector<DiagonalFilter>& filters);

// CSV: i, n_r, m_<q>..., I_IR, I_XUV, accepted_filter_<k>...
void write_csv(const CorrelationMap& map, std::ostream& os);

} // namespace catsel
