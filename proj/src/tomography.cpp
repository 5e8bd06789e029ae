#include "catsel/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace catsel {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 53-bit uniform in [0, 1) straight from the generator's high bits: identical
// across platforms, unlike std::uniform_real_distribution.
double uniform53(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

std::mt19937_64 stream_for_angle(std::uint64_t seed, int angle_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(angle_index)};
    return std::mt19937_64(seq);
}

const char* to_string(QuadConvention c) {
    return c == QuadConvention::internal ? "internal" : "plain";
}

QuadConvention convention_from_string(const std::string& s) {
    if (s == "internal") return QuadConvention::internal;
    if (s == "plain") return QuadConvention::plain;
    throw UsageError("unknown quadrature convention '" + s + "'");
}

} // namespace

QuadratureEigensystem quadrature_eigensystem(double phase, int cutoff) {
    if (cutoff < 0) throw UsageError("quadrature_eigensystem: negative cutoff");
    Mat h = Mat::Zero(cutoff + 1, cutoff + 1);
    const Complex ephi = std::polar(1.0, phase);
    for (int n = 0; n < cutoff; ++n) {
        Complex v = ephi * std::sqrt((n + 1.0) / 2.0);
        h(n, n + 1) = v;
        h(n + 1, n) = std::conj(v);
    }
    Eigen::SelfAdjointEigenSolver<Mat> solver(h);
    if (solver.info() != Eigen::Success)
        throw NumericalError("quadrature eigensystem did not converge");
    QuadratureEigensystem out;
    out.phase = phase;
    out.eigenvalues = solver.eigenvalues();
    out.eigenvectors = solver.eigenvectors();
    return out;
}

std::vector<double> uniform_phases(int n_phi) {
    if (n_phi < 1) throw UsageError("uniform_phases: need at least one angle");
    std::vector<double> phases(n_phi);
    for (int m = 0; m < n_phi; ++m) phases[m] = m * kPi / n_phi;
    return phases;
}

HomodyneTrace sample_homodyne(const DensityOperator& rho, const std::vector<double>& phases,
                              int n_shots, std::uint64_t seed, QuadConvention convention,
                              int eigen_cutoff, const std::string& descriptor) {
    if (phases.empty()) throw UsageError("sample_homodyne: no phases");
    if (n_shots < 1) throw UsageError("sample_homodyne: need at least one shot");
    const int dim = rho.dim();
    const int ecut = eigen_cutoff >= 0 ? eigen_cutoff : dim - 1;
    if (ecut + 1 < dim)
        throw UsageError("sample_homodyne: eigenbasis cutoff below the state's support");
    const double scale = quad_scale(convention);

    HomodyneTrace trace;
    trace.seed = seed;
    trace.state_descriptor = descriptor;
    trace.convention = convention;
    trace.records.reserve(phases.size());

    for (std::size_t a = 0; a < phases.size(); ++a) {
        if (phases[a] < 0.0 || phases[a] >= kPi)
            throw UsageError("sample_homodyne: phases live in [0, pi)");
        QuadratureEigensystem eig = quadrature_eigensystem(phases[a], ecut);

        // outcome probabilities <v_i| rho |v_i>, restricted to the state's support
        Mat top = eig.eigenvectors.topRows(dim);
        Mat mixed = rho.matrix * top; // dim x (ecut+1)
        Eigen::VectorXd probs(ecut + 1);
        for (int i = 0; i <= ecut; ++i)
            probs[i] = std::max(0.0, (top.col(i).adjoint() * mixed.col(i))(0).real());
        double total = probs.sum();
        if (!std::isfinite(total) || std::abs(total - 1.0) > 1e-6)
            throw NumericalError("homodyne outcome probabilities do not sum to one (" +
                                 std::to_string(total) + ")");

        Eigen::VectorXd cdf(ecut + 1);
        double run = 0.0;
        for (int i = 0; i <= ecut; ++i) {
            run += probs[i];
            cdf[i] = run;
        }

        std::mt19937_64 rng = stream_for_angle(seed, static_cast<int>(a));
        HomodyneRecord rec;
        rec.phi = phases[a];
        rec.outcomes.resize(n_shots);
        for (int s = 0; s < n_shots; ++s) {
            double u = uniform53(rng) * total;
            const double* begin = cdf.data();
            const double* it = std::upper_bound(begin, begin + ecut + 1, u);
            int idx = std::min<int>(static_cast<int>(it - begin), ecut);
            rec.outcomes[s] = scale * eig.eigenvalues[idx];
        }
        trace.records.push_back(std::move(rec));
    }
    return trace;
}

double radon_kernel(double z, double k_c) {
    const double u = k_c * z;
    if (std::abs(u) > 0.1) return (u * std::sin(u) + std::cos(u) - 1.0) / (z * z);
    // small-argument even series; eight terms reach full double precision at
    // the 0.1 switch point
    double acc = 0.0;
    double fact = 1.0; // (2j)!
    double kpow = 1.0; // k_c^{2j}
    double zpow = 1.0; // z^{2j-2}, starts at z^0
    const double k2 = k_c * k_c, z2 = z * z;
    double sign = 1.0;
    for (int j = 1; j <= 8; ++j) {
        fact *= (2.0 * j - 1.0) * (2.0 * j);
        kpow *= k2;
        if (j > 1) zpow *= z2;
        acc += sign * kpow * zpow * (2.0 * j - 1.0) / fact;
        sign = -sign;
    }
    return acc;
}

namespace {

double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(double z, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
    auto f = [z](double xi) { return xi * std::cos(xi * z); };
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(a, m, fa, flm, fm);
    double right = simpson(m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(z, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(z, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

} // namespace

double radon_kernel_quadrature(double z, double k_c, double tol) {
    auto f = [z](double xi) { return xi * std::cos(xi * z); };
    double a = 0.0, b = k_c;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = simpson(a, b, fa, fm, fb);
    return adaptive_simpson(z, a, b, fa, fm, fb, whole, tol, 50);
}

WignerGrid inverse_radon(const HomodyneTrace& trace, const RadonConfig& config) {
    if (trace.records.empty()) throw UsageError("inverse_radon: empty trace");
    if (config.npts < 2) throw UsageError("inverse_radon: need at least two grid points");
    if (config.k_c <= 0.0) throw UsageError("inverse_radon: kernel cutoff must be positive");

    const int n = config.npts;
    Eigen::VectorXd axis = Eigen::VectorXd::LinSpaced(n, -config.extent, config.extent);

    WignerGrid grid;
    grid.x = axis;
    grid.p = axis;
    grid.values = Eigen::MatrixXd::Zero(n, n);

    long total_shots = 0;
    for (const HomodyneRecord& rec : trace.records) {
        if (rec.outcomes.empty()) throw UsageError("inverse_radon: angle with no outcomes");
        total_shots += static_cast<long>(rec.outcomes.size());
    }

    for (const HomodyneRecord& rec : trace.records) {
        // Outcomes repeat quadrature eigenvalues exactly, so collapsing them
        // into a value histogram turns the per-shot sum into a sum over at
        // most (cutoff + 1) distinct values. std::map keeps the iteration
        // order a function of the values alone. The angle-mean variant is the
        // degenerate histogram: one kernel per angle, placed at the mean.
        std::map<double, long> hist;
        double shot_norm;
        if (config.variant == RadonVariant::per_sample) {
            for (double v : rec.outcomes) ++hist[v];
            shot_norm = static_cast<double>(total_shots);
        } else {
            double mean = 0.0;
            for (double v : rec.outcomes) mean += v;
            hist[mean / static_cast<double>(rec.outcomes.size())] = 1;
            shot_norm = static_cast<double>(trace.records.size());
        }

        const double c = std::cos(rec.phi), s = std::sin(rec.phi);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double proj = axis[i] * c + axis[j] * s;
                double acc = 0.0;
                for (const auto& [value, count] : hist)
                    acc += static_cast<double>(count) * radon_kernel(proj - value, config.k_c);
                grid.values(i, j) += acc / shot_norm;
            }
        }
    }
    grid.values *= 1.0 / (2.0 * kPi * kPi);
    return grid;
}

double frobenius_similarity(const WignerGrid& a, const WignerGrid& b) {
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
        throw UsageError("frobenius_similarity: grid shapes differ");
    double na = a.values.norm(), nb = b.values.norm();
    if (na == 0.0 || nb == 0.0)
        throw UsageError("frobenius_similarity: zero-norm grid");
    return (a.values.array() * b.values.array()).sum() / (na * nb);
}

WignerGrid to_plain_convention(const WignerGrid& internal_grid) {
    WignerGrid out;
    out.x = internal_grid.x * std::sqrt(2.0);
    out.p = internal_grid.p * std::sqrt(2.0);
    out.values = internal_grid.values * 0.5;
    return out;
}

void write_csv(const HomodyneTrace& trace, std::ostream& os) {
    nlohmann::json header;
    header["seed"] = trace.seed;
    header["state"] = trace.state_descriptor;
    header["convention"] = to_string(trace.convention);
    header["n_angles"] = trace.records.size();
    os << "# " << header.dump() << '\n';
    os << "angle_index,phi,shot_index,outcome\n";
    char buf[32];
    for (std::size_t a = 0; a < trace.records.size(); ++a) {
        const HomodyneRecord& rec = trace.records[a];
        for (std::size_t s = 0; s < rec.outcomes.size(); ++s) {
            os << a << ',';
            std::snprintf(buf, sizeof buf, "%.17g", rec.phi);
            os << buf << ',' << s << ',';
            std::snprintf(buf, sizeof buf, "%.17g", rec.outcomes[s]);
            os << buf << '\n';
        }
    }
}

HomodyneTrace read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.size() < 2 || line[0] != '#')
        throw UsageError("homodyne csv: missing header line");
    nlohmann::json header = nlohmann::json::parse(line.substr(1));

    HomodyneTrace trace;
    trace.seed = header.value("seed", 0ULL);
    trace.state_descriptor = header.value("state", std::string{});
    trace.convention = convention_from_string(header.value("convention", std::string{"internal"}));

    if (!std::getline(is, line) || line.rfind("angle_index", 0) != 0)
        throw UsageError("homodyne csv: missing column header");

    long last_angle = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        long angle = std::stol(cell);
        std::getline(ss, cell, ',');
        double phi = std::stod(cell);
        std::getline(ss, cell, ','); // shot index, implied by row order
        std::getline(ss, cell, ',');
        double outcome = std::stod(cell);

        if (angle == last_angle + 1) {
            trace.records.push_back(HomodyneRecord{phi, {}});
            last_angle = angle;
        } else if (angle != last_angle) {
            throw UsageError("homodyne csv: angle indices out of order");
        }
        trace.records.back().outcomes.push_back(outcome);
    }
    if (trace.records.empty()) throw UsageError("homodyne csv: no data rows");
    return trace;
}

} // namespace catsel
