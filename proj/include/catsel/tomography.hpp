#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "catsel/wigner.hpp"

namespace catsel {

// Quadrature operator x(phi) = (a e^{i phi} + a† e^{-i phi})/sqrt(2) in the
// truncated Fock basis: Hermitian tridiagonal, off-diagonal sqrt(n+1)/sqrt(2).
struct QuadratureEigensystem {
    double phase = 0.0;
    Eigen::VectorXd eigenvalues; // ascending
    Mat eigenvectors;            // columns match eigenvalues
};

QuadratureEigensystem quadrature_eigensystem(double phase, int cutoff);

// Homodyne outcomes live either on the internal sqrt(2) axes or on the plain
// x = <a + a†> axes. Kernel cutoffs and grid extents are interpreted in the
// selected convention; plain-axis values are sqrt(2) times larger and the
// reconstructed W is half as tall (unit Jacobian bookkeeping).
enum class QuadConvention { internal, plain };

inline double quad_scale(QuadConvention c) { return c == QuadConvention::internal ? 1.0 : std::sqrt(2.0); }

struct HomodyneRecord {
    double phi = 0.0;
    std::vector<double> outcomes;
};

struct HomodyneTrace {
    std::vector<HomodyneRecord> records;
    std::uint64_t seed = 0;
    std::string state_descriptor;
    QuadConvention convention = QuadConvention::internal;
};

// N_phi angles uniformly over [0, pi), half-open so phi = pi never
// double-counts phi = 0.
std::vector<double> uniform_phases(int n_phi);

// Draw n_shots outcomes per phase from p_i = <v_i| rho |v_i>. Streams are
// per-angle (seeded from {seed, angle index}), so traces are reproducible
// bit-for-bit and independent of angle evaluation order. The eigenbasis
// cutoff may exceed the state's (rho is then zero-padded); a dense outcome
// spectrum matters more for reconstruction quality than state support.
HomodyneTrace sample_homodyne(const DensityOperator& rho, const std::vector<double>& phases,
                              int n_shots, std::uint64_t seed,
                              QuadConvention convention = QuadConvention::internal,
                              int eigen_cutoff = -1, const std::string& descriptor = "");

// Band-limited backprojection kernel (k_c z sin + cos - 1)/z^2 with an even
// power series below |k_c z| = 0.1; continuous across the switch to 1e-12.
double radon_kernel(double z, double k_c);

// Adaptive-quadrature oracle for the defining integral of radon_kernel.
double radon_kernel_quadrature(double z, double k_c, double tol = 1e-10);

enum class RadonVariant { per_sample, per_angle_mean };

struct RadonConfig {
    double k_c = 2.0;
    RadonVariant variant = RadonVariant::per_sample;
    double extent = 6.0;
    int npts = 201;
};

// Filtered backprojection of a homodyne trace. Outcome values, k_c and grid
// axes all live in the trace's convention.
WignerGrid inverse_radon(const HomodyneTrace& trace, const RadonConfig& config);

// <A,B>_F after Frobenius normalization of both; 1 iff proportional with
// positive factor. Grids must share dimensions.
double frobenius_similarity(const WignerGrid& a, const WignerGrid& b);

// Express an internal-convention exact Wigner grid on plain axes (values
// halve, axes stretch by sqrt(2)); for comparing against reconstructions.
WignerGrid to_plain_convention(const WignerGrid& internal_grid);

// CSV: '#' JSON header line (seed, descriptor, convention), then a column
// header, then one row per outcome: angle_index, phi, shot_index, outcome.
void write_csv(const HomodyneTrace& trace, std::ostream& os);
HomodyneTrace read_trace_csv(std::istream& is);

} // namespace catsel
