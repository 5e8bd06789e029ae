#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "catsel/errors.hpp"

namespace catsel {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Ordered set of truncated Fock modes. dims[i] is the dimension of mode i
// (cutoff + 1); flat indexing is row-major over the mode order, so the last
// mode varies fastest.
struct ModeLayout {
    std::vector<int> dims;
    std::vector<std::string> labels;

    ModeLayout() = default;
    ModeLayout(std::vector<int> d, std::vector<std::string> l);

    int n_modes() const { return static_cast<int>(dims.size()); }
    long total_dim() const;
    long flat_index(std::span<const int> occupation) const;
    void occupation_of(long flat, std::vector<int>& out) const;
    int mode_index(const std::string& label) const; // throws UsageError on unknown label
};

// Pure state over a ModeLayout. Single-mode states are the one-mode case.
struct PureState {
    ModeLayout layout;
    Vec amps;

    // 1 - sum|c_n|^2 of the untruncated distribution, reported by
    // coherent_state before renormalization; 0 for exactly representable states.
    double truncation_deficit = 0.0;

    long dim() const { return amps.size(); }
    double norm2() const { return amps.squaredNorm(); }
};

// Single-mode density operator. Produced trace-normalized by everything here.
struct DensityOperator {
    Mat matrix;

    int dim() const { return static_cast<int>(matrix.rows()); }
    double trace_real() const { return matrix.trace().real(); }
};

// Cutoff heuristic covering the Poisson bulk plus a generous tail.
int suggested_cutoff(double abs_alpha);

// Truncated coherent state, amplitudes c_n = e^{-|a|^2/2} a^n / sqrt(n!),
// renormalized after truncation. Throws TruncationError (naming a workable
// cutoff) if the pre-renormalization deficit exceeds eps_trunc.
PureState coherent_state(Complex alpha, int cutoff, double eps_trunc = 1e-6,
                         const std::string& label = "mode");

// Fock basis state |n>.
PureState fock_state(int n, int cutoff, const std::string& label = "mode");

// Tensor product of single- or multi-mode factors; layouts concatenate.
PureState tensor(const std::vector<PureState>& factors);

// Reduce a pure multimode state to the kept mode. The result's trace equals
// the squared norm of the input (no hidden renormalization).
DensityOperator partial_trace(const PureState& state, const std::string& keep);

// Same reduction for an explicit full density matrix over `layout`. Meant for
// small dimensions (oracles, tests); scales as total_dim^2.
DensityOperator partial_trace(const Mat& rho_full, const ModeLayout& layout,
                              const std::string& keep);

double purity(const DensityOperator& rho);

// <psi| rho |psi>; both sides must share the dimension.
double fidelity_with_pure(const DensityOperator& rho, const PureState& psi);

// Hermiticity / positivity / trace checks used by tests and the CLI's
// numerical-failure exit path.
double hermiticity_residual(const DensityOperator& rho);
double min_eigenvalue(const DensityOperator& rho);

} // namespace catsel
