#pragma once

#include <optional>
#include <vector>

#include "catsel/fock.hpp"

namespace catsel {

struct Harmonic {
    int order = 0;   // photon cost of one harmonic photon, in driving-frequency quanta
    Complex chi;     // coherent amplitude of the harmonic mode
};

// Parameters of the field state after harmonic generation and the 50:50
// split of the driving mode: |t> and |r> carry (alpha+delta_alpha)/sqrt(2),
// each harmonic q carries |chi_q>.
struct HhgSpec {
    Complex alpha;
    Complex delta_alpha;
    std::vector<Harmonic> harmonics;

    int cutoff_t = -1; // -1: suggested_cutoff of the relevant amplitude
    int cutoff_r = -1;
    int cutoff_q = -1; // shared by all harmonic modes
    double eps_trunc = 1e-6;

    double n0() const { return std::norm(alpha); }
    int resolved_cutoff_t() const;
    int resolved_cutoff_r() const;
    int resolved_cutoff_q() const;
    ModeLayout layout() const; // [t, r, q<order>...]
};

// Admission rule and weighting of the photon-count filter. The measured
// counts (n_r, {m_q}) are admitted when |n_r + sum kappa_q m_q - c| <= 1/2;
// kappa re-shapes that admission rule only. The energy balance that centers
// the transmitted-mode weight always uses the true photon cost q.
struct PostSelectionSpec {
    std::vector<double> kappas;     // per harmonic; empty => kappa_q = q
    std::optional<double> c;        // admission constant; default floor(n0/2)
    bool exact = true;              // exact: single rounded target; fuzzy: Gaussian weights
    double sigma2 = -1.0;           // fuzzy width; <=0 => n0/2
    double efficiency = 1.0;        // detector efficiency eta, scales kappas
    double weight_floor = 1e-8;     // prune Gaussian weights below this
    std::optional<double> n0;       // energy-budget override (fluctuation studies)

    double resolved_c(double n0_value) const;
    double resolved_sigma2(double n0_value) const;
    double resolved_n0(const HhgSpec& hhg) const;
    std::vector<double> resolved_kappas(const HhgSpec& hhg) const; // includes efficiency
};

// One admitted measurement outcome and its weight profile over n_t.
struct DiagonalTuple {
    int n_r = 0;
    std::vector<int> ms;
    Eigen::VectorXd weights; // length cutoff_t + 1; one-hot in exact mode
};

struct DiagonalSet {
    std::vector<DiagonalTuple> tuples;
    long dropped = 0; // admitted by the band but with no representable target
};

struct SelectionResult {
    DensityOperator rho;     // trace-normalized transmitted-mode state
    double success = 0.0;    // pre-normalization trace = post-selection probability
    long tuple_count = 0;
    long dropped = 0;
};

PureState build_hhg_state(const HhgSpec& spec);

// Enumerate the admission band. Never throws on emptiness; the caller decides
// whether an empty set is an error (apply_postselection does).
DiagonalSet enumerate_diagonal(const HhgSpec& hhg, const PostSelectionSpec& ps);

// Project a multimode state (layout [t, r, q...]) onto the admitted tuples and
// reduce to the transmitted mode: rho_t = N^-1 sum_tuples |phi><phi| with
// phi[n_t] = weight(n_t) * <n_t, n_r, m|state>. Coherences in n_t survive
// within a tuple, never across tuples.
SelectionResult apply_postselection(const PureState& state, const DiagonalSet& diag);

// eta in (0,1]: kappas scale by eta, everything else unchanged.
PostSelectionSpec apply_detector_efficiency(PostSelectionSpec ps, double eta);

// Convenience: build_hhg_state + enumerate_diagonal + apply_postselection.
SelectionResult run_postselection(const HhgSpec& hhg, const PostSelectionSpec& ps);

} // namespace catsel
