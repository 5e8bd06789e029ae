#include "catsel/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace catsel {

ModeLayout::ModeLayout(std::vector<int> d, std::vector<std::string> l)
    : dims(std::move(d)), labels(std::move(l)) {
    if (labels.size() != dims.size())
        throw UsageError("mode layout needs one label per dimension");
    for (int dim : dims)
        if (dim < 1) throw UsageError("mode dimension must be positive");
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] == labels[j])
                throw UsageError("duplicate mode label '" + labels[i] + "'");
}

long ModeLayout::total_dim() const {
    long total = 1;
    for (int dim : dims) total *= dim;
    return total;
}

long ModeLayout::flat_index(std::span<const int> occupation) const {
    if (occupation.size() != dims.size())
        throw UsageError("occupation length does not match mode count");
    long flat = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (occupation[i] < 0 || occupation[i] >= dims[i])
            throw UsageError("occupation out of range for mode '" + labels[i] + "'");
        flat = flat * dims[i] + occupation[i];
    }
    return flat;
}

void ModeLayout::occupation_of(long flat, std::vector<int>& out) const {
    out.resize(dims.size());
    for (std::size_t i = dims.size(); i-- > 0;) {
        out[i] = static_cast<int>(flat % dims[i]);
        flat /= dims[i];
    }
}

int ModeLayout::mode_index(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw UsageError("unknown mode label '" + label + "'");
    return static_cast<int>(it - labels.begin());
}

int suggested_cutoff(double abs_alpha) {
    double n0 = abs_alpha * abs_alpha;
    return static_cast<int>(std::ceil(n0 + 6.0 * abs_alpha + 10.0));
}

PureState coherent_state(Complex alpha, int cutoff, double eps_trunc, const std::string& label) {
    if (cutoff < 0) throw UsageError("coherent_state: negative cutoff");

    // log-domain magnitudes keep alpha ~ 10 representable; phase by repeated
    // multiplication is fine at these sizes.
    const double a = std::abs(alpha);
    const double n0 = a * a;
    Vec amps(cutoff + 1);
    double log_mag = -0.5 * n0; // log |c_0|
    Complex phase(1.0, 0.0);
    Complex unit = (a > 0.0) ? alpha / a : Complex(1.0, 0.0);
    double captured = 0.0;
    for (int n = 0; n <= cutoff; ++n) {
        if (n > 0) {
            log_mag += std::log(a) - 0.5 * std::log(static_cast<double>(n));
            phase *= unit;
        }
        double mag = std::exp(log_mag);
        amps[n] = mag * phase;
        captured += mag * mag;
    }

    double deficit = std::max(0.0, 1.0 - captured);
    if (deficit > eps_trunc) {
        // A Poisson(n0) tail is comfortably inside mean + 6 sd + constant.
        int needed = suggested_cutoff(a);
        throw TruncationError("coherent state |alpha|=" + std::to_string(a) +
                                  " loses " + std::to_string(deficit) + " past cutoff " +
                                  std::to_string(cutoff) + "; use cutoff >= " +
                                  std::to_string(needed),
                              needed);
    }

    PureState state;
    state.layout = ModeLayout({cutoff + 1}, {label});
    state.amps = amps / std::sqrt(captured);
    state.truncation_deficit = deficit;
    return state;
}

PureState fock_state(int n, int cutoff, const std::string& label) {
    if (n < 0 || n > cutoff) throw UsageError("fock_state: n outside [0, cutoff]");
    PureState state;
    state.layout = ModeLayout({cutoff + 1}, {label});
    state.amps = Vec::Zero(cutoff + 1);
    state.amps[n] = 1.0;
    return state;
}

PureState tensor(const std::vector<PureState>& factors) {
    if (factors.empty()) throw UsageError("tensor: no factors");

    PureState out = factors[0];
    for (std::size_t f = 1; f < factors.size(); ++f) {
        const PureState& next = factors[f];
        Vec combined(out.amps.size() * next.amps.size());
        long k = 0;
        for (long i = 0; i < out.amps.size(); ++i)
            for (long j = 0; j < next.amps.size(); ++j) combined[k++] = out.amps[i] * next.amps[j];
        out.amps = std::move(combined);
        out.layout.dims.insert(out.layout.dims.end(), next.layout.dims.begin(),
                               next.layout.dims.end());
        out.layout.labels.insert(out.layout.labels.end(), next.layout.labels.begin(),
                                 next.layout.labels.end());
        out.truncation_deficit += next.truncation_deficit;
    }
    // re-run the constructor checks (duplicate labels in particular)
    out.layout = ModeLayout(out.layout.dims, out.layout.labels);
    return out;
}

DensityOperator partial_trace(const PureState& state, const std::string& keep) {
    const ModeLayout& layout = state.layout;
    const int k = layout.mode_index(keep);
    const int d_keep = layout.dims[k];

    // Row-major flat index splits as (before, kept, after): stride of the kept
    // mode is the product of the dims after it.
    long stride = 1;
    for (std::size_t i = k + 1; i < layout.dims.size(); ++i) stride *= layout.dims[i];
    long outer = layout.total_dim() / (stride * d_keep);

    Mat rho = Mat::Zero(d_keep, d_keep);
    for (long b = 0; b < outer; ++b) {
        for (long a = 0; a < stride; ++a) {
            long base = b * d_keep * stride + a;
            for (int i = 0; i < d_keep; ++i) {
                Complex ci = state.amps[base + i * stride];
                if (ci == Complex(0.0, 0.0)) continue;
                for (int j = 0; j < d_keep; ++j)
                    rho(i, j) += ci * std::conj(state.amps[base + j * stride]);
            }
        }
    }
    return DensityOperator{std::move(rho)};
}

DensityOperator partial_trace(const Mat& rho_full, const ModeLayout& layout,
                              const std::string& keep) {
    if (rho_full.rows() != layout.total_dim() || rho_full.cols() != layout.total_dim())
        throw UsageError("partial_trace: matrix does not match layout");
    const int k = layout.mode_index(keep);
    const int d_keep = layout.dims[k];

    long stride = 1;
    for (std::size_t i = k + 1; i < layout.dims.size(); ++i) stride *= layout.dims[i];
    long outer = layout.total_dim() / (stride * d_keep);

    Mat rho = Mat::Zero(d_keep, d_keep);
    for (long b = 0; b < outer; ++b)
        for (long a = 0; a < stride; ++a) {
            long base = b * d_keep * stride + a;
            for (int i = 0; i < d_keep; ++i)
                for (int j = 0; j < d_keep; ++j)
                    rho(i, j) += rho_full(base + i * stride, base + j * stride);
        }
    return DensityOperator{std::move(rho)};
}

double purity(const DensityOperator& rho) {
    return (rho.matrix * rho.matrix).trace().real();
}

double fidelity_with_pure(const DensityOperator& rho, const PureState& psi) {
    if (psi.dim() != rho.dim())
        throw UsageError("fidelity_with_pure: dimension mismatch (" + std::to_string(rho.dim()) +
                         " vs " + std::to_string(psi.dim()) + ")");
    return (psi.amps.adjoint() * rho.matrix * psi.amps)(0).real();
}

double hermiticity_residual(const DensityOperator& rho) {
    return (rho.matrix - rho.matrix.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const DensityOperator& rho) {
    Eigen::SelfAdjointEigenSolver<Mat> solver(rho.matrix, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigenvalue computation failed");
    return solver.eigenvalues().minCoeff();
}

} // namespace catsel
