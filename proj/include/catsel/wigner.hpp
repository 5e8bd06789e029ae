#pragma once

#include <iosfwd>

#include "catsel/fock.hpp"

namespace catsel {

// Phase-space convention: x = <a + a†>/sqrt(2), so the vacuum is an isotropic
// Gaussian with variance 1/2 and a coherent state alpha peaks at
// (sqrt(2) Re alpha, sqrt(2) Im alpha) with peak value 1/pi.
struct WignerGrid {
    Eigen::VectorXd x; // axis values, ascending, uniform
    Eigen::VectorXd p;
    Eigen::MatrixXd values; // values(i,j) = W(x[i], p[j])

    double dx() const { return x.size() > 1 ? x[1] - x[0] : 0.0; }
    double dp() const { return p.size() > 1 ? p[1] - p[0] : 0.0; }
    double integral() const { return values.sum() * dx() * dp(); }
};

struct WignerMetrics {
    double w_min = 0.0, w_max = 0.0;
    double x_at_min = 0.0, p_at_min = 0.0;
    double x_at_max = 0.0, p_at_max = 0.0;
    double visibility = 0.0;        // |w_min / w_max|
    double negativity_volume = 0.0; // sum over negative cells of |W| dx dp
};

WignerGrid wigner_of_density(const DensityOperator& rho, const Eigen::VectorXd& x_axis,
                             const Eigen::VectorXd& p_axis);
WignerGrid wigner_of_density(const DensityOperator& rho, double extent = 6.0, int npts = 201);

WignerMetrics wigner_metrics(const WignerGrid& grid);

// Max |W(x,p) - W(rotated by 90 degrees)| on a grid symmetric about the
// origin; the rotation maps the grid onto itself. Fock-diagonal states are
// rotation invariant, so this residual doubles as a diagonality probe.
double rotation_residual_90(const WignerGrid& grid);

// CSV schema: one "x," header row carrying the p axis, then one row per x
// value: x, W(x, p_0), W(x, p_1), ...
void write_csv(const WignerGrid& grid, std::ostream& os);
WignerGrid read_wigner_csv(std::istream& is);

} // namespace catsel
