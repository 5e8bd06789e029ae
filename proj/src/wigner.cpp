#include "catsel/wigner.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace catsel {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Density-matrix entries below this cannot move W at double precision.
constexpr double kEntryFloor = 1e-18;

// One upper diagonal of rho with its support extent.
struct Diagonal {
    int k = 0;
    int n_count = 0; // entries 0 .. n_count-1 participate
    std::vector<double> re, im;
};

std::vector<Diagonal> active_diagonals(const Mat& rho) {
    const int dim = static_cast<int>(rho.rows());
    std::vector<Diagonal> diags;
    for (int k = 0; k < dim; ++k) {
        Diagonal d;
        d.k = k;
        d.re.resize(dim - k);
        d.im.resize(dim - k);
        int last = -1;
        for (int n = 0; n + k < dim; ++n) {
            Complex v = rho(n, n + k);
            d.re[n] = v.real();
            d.im[n] = v.imag();
            if (std::abs(v.real()) > kEntryFloor || std::abs(v.imag()) > kEntryFloor) last = n;
        }
        if (last < 0) continue;
        d.n_count = last + 1;
        diags.push_back(std::move(d));
    }
    return diags;
}

// Sum over one diagonal of (-1)^n rho-weight(n) S_n^k(y), where
// S_n^k = sqrt(n!/(n+k)!) y^{k/2} e^{-y/2} L_n^k(y). The S_n^k stay O(1)
// for all n, k, y, so nothing here can overflow even at cutoff ~ 150.
double diagonal_sum(const Diagonal& d, double y, double cos_kt, double sin_kt) {
    const int k = d.k;
    double s_prev; // S_0^k
    if (y > 0.0)
        s_prev = std::exp(-0.5 * y + 0.5 * k * std::log(y) - 0.5 * std::lgamma(k + 1.0));
    else
        s_prev = (k == 0) ? 1.0 : 0.0;

    auto weight = [&](int n) { return d.re[n] * cos_kt - d.im[n] * sin_kt; };

    double acc = weight(0) * s_prev;
    if (d.n_count == 1) return acc;

    double s_cur = s_prev * (1.0 + k - y) / std::sqrt(1.0 + k); // S_1^k
    acc -= weight(1) * s_cur;                                   // (-1)^1

    double sign = 1.0; // (-1)^{n+1} for the next n
    for (int n = 1; n + 1 < d.n_count; ++n) {
        double s_next = std::sqrt((n + 1.0) / (n + 1.0 + k)) *
                        ((2.0 * n + k + 1.0 - y) * s_cur - std::sqrt(n * (n + k * 1.0)) * s_prev) /
                        (n + 1.0);
        acc += sign * weight(n + 1) * s_next;
        sign = -sign;
        s_prev = s_cur;
        s_cur = s_next;
    }
    return acc;
}

} // namespace

WignerGrid wigner_of_density(const DensityOperator& rho, const Eigen::VectorXd& x_axis,
                             const Eigen::VectorXd& p_axis) {
    if (rho.dim() == 0) throw UsageError("wigner_of_density: empty density matrix");
    if (x_axis.size() == 0 || p_axis.size() == 0)
        throw UsageError("wigner_of_density: empty axis");

    std::vector<Diagonal> diags = active_diagonals(rho.matrix);

    WignerGrid grid;
    grid.x = x_axis;
    grid.p = p_axis;
    grid.values.resize(x_axis.size(), p_axis.size());

    for (long i = 0; i < x_axis.size(); ++i) {
        const double x = x_axis[i];
        for (long j = 0; j < p_axis.size(); ++j) {
            const double p = p_axis[j];
            const double y = 2.0 * (x * x + p * p);
            const double theta = std::atan2(p, x);
            const double ct = std::cos(theta), st = std::sin(theta);

            // rotate e^{ik theta} incrementally across the diagonals
            double cos_kt = 1.0, sin_kt = 0.0;
            int k_have = 0;
            double w = 0.0;
            for (const Diagonal& d : diags) {
                while (k_have < d.k) {
                    double c2 = cos_kt * ct - sin_kt * st;
                    sin_kt = sin_kt * ct + cos_kt * st;
                    cos_kt = c2;
                    ++k_have;
                }
                double term = diagonal_sum(d, y, cos_kt, sin_kt);
                w += (d.k == 0) ? term : 2.0 * term;
            }
            grid.values(i, j) = w / kPi;
        }
    }
    return grid;
}

WignerGrid wigner_of_density(const DensityOperator& rho, double extent, int npts) {
    if (npts < 2) throw UsageError("wigner_of_density: need at least two grid points");
    Eigen::VectorXd axis = Eigen::VectorXd::LinSpaced(npts, -extent, extent);
    return wigner_of_density(rho, axis, axis);
}

WignerMetrics wigner_metrics(const WignerGrid& grid) {
    WignerMetrics m;
    Eigen::Index imin = 0, jmin = 0, imax = 0, jmax = 0;
    m.w_min = grid.values.minCoeff(&imin, &jmin);
    m.w_max = grid.values.maxCoeff(&imax, &jmax);
    m.x_at_min = grid.x[imin];
    m.p_at_min = grid.p[jmin];
    m.x_at_max = grid.x[imax];
    m.p_at_max = grid.p[jmax];
    m.visibility = m.w_max > 0.0 ? std::abs(m.w_min / m.w_max) : 0.0;
    m.negativity_volume = -grid.values.cwiseMin(0.0).sum() * grid.dx() * grid.dp();
    return m;
}

double rotation_residual_90(const WignerGrid& grid) {
    const long n = grid.x.size();
    if (grid.p.size() != n)
        throw UsageError("rotation residual needs a square grid");
    for (long i = 0; i < n; ++i) {
        if (std::abs(grid.x[i] - grid.p[i]) > 1e-12 ||
            std::abs(grid.x[i] + grid.x[n - 1 - i]) > 1e-9)
            throw UsageError("rotation residual needs identical axes symmetric about zero");
    }
    // A quarter turn of the state sends W(x, p) to W(p, -x); on a symmetric
    // grid that is an index permutation, no interpolation involved.
    double resid = 0.0;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
            resid = std::max(resid, std::abs(grid.values(i, j) - grid.values(j, n - 1 - i)));
    return resid;
}

void write_csv(const WignerGrid& grid, std::ostream& os) {
    char buf[32];
    os << "x";
    for (long j = 0; j < grid.p.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", grid.p[j]);
        os << ',' << buf;
    }
    os << '\n';
    for (long i = 0; i < grid.x.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", grid.x[i]);
        os << buf;
        for (long j = 0; j < grid.p.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", grid.values(i, j));
            os << ',' << buf;
        }
        os << '\n';
    }
}

WignerGrid read_wigner_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw UsageError("wigner csv: missing header");
    std::vector<double> pvals;
    {
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ','); // "x" corner
        while (std::getline(ss, cell, ',')) pvals.push_back(std::stod(cell));
    }
    if (pvals.empty()) throw UsageError("wigner csv: header has no p axis");

    std::vector<double> xvals;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        xvals.push_back(std::stod(cell));
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != pvals.size()) throw UsageError("wigner csv: ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw UsageError("wigner csv: no data rows");

    WignerGrid grid;
    grid.p = Eigen::Map<Eigen::VectorXd>(pvals.data(), pvals.size());
    grid.x = Eigen::Map<Eigen::VectorXd>(xvals.data(), xvals.size());
    grid.values.resize(xvals.size(), pvals.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < pvals.size(); ++j)
            grid.values(i, j) = rows[i][j];
    return grid;
}

} // namespace catsel
