#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "catsel/wigner.hpp"

using namespace catsel;

namespace {

constexpr double kPi = 3.14159265358979323846;

DensityOperator pure_density(const PureState& psi) {
    return DensityOperator{psi.amps * psi.amps.adjoint()};
}

// Well-conditioned random mixed state from a handful of random pure states.
DensityOperator random_density(int dim, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    Mat rho = Mat::Zero(dim, dim);
    for (int k = 0; k < 3; ++k) {
        Vec v(dim);
        for (int i = 0; i < dim; ++i) v[i] = Complex(gauss(rng), gauss(rng));
        v.normalize();
        rho += (k + 1.0) * (v * v.adjoint());
    }
    rho /= rho.trace().real();
    return DensityOperator{rho};
}

} // namespace

TEST_SUITE("wigner") {

TEST_CASE("landmark values") {
    SUBCASE("vacuum peaks at 1/pi") {
        WignerGrid g = wigner_of_density(pure_density(fock_state(0, 10)), 5.0, 101);
        CHECK(g.values(50, 50) == doctest::Approx(1.0 / kPi).epsilon(1e-12));
        CHECK(std::abs(g.integral() - 1.0) < 1e-6);
    }
    SUBCASE("single photon dips to -1/pi") {
        DensityOperator one = pure_density(fock_state(1, 10));
        WignerGrid g = wigner_of_density(one, 5.0, 101);
        CHECK(g.values(50, 50) == doctest::Approx(-1.0 / kPi).epsilon(1e-12));
        // closed form (1/pi)(2r^2 - 1)e^{-r^2} away from the origin
        Eigen::VectorXd xs(1), ps(1);
        xs[0] = 0.7;
        ps[0] = -0.3;
        double r2 = 0.7 * 0.7 + 0.3 * 0.3;
        WignerGrid point = wigner_of_density(one, xs, ps);
        CHECK(point.values(0, 0) ==
              doctest::Approx((2.0 * r2 - 1.0) * std::exp(-r2) / kPi).epsilon(1e-12));
    }
    SUBCASE("coherent state is the displaced vacuum Gaussian") {
        Complex alpha(0.8, 0.5);
        DensityOperator rho = pure_density(coherent_state(alpha, 30));
        double cx = std::sqrt(2.0) * alpha.real();
        double cp = std::sqrt(2.0) * alpha.imag();
        for (auto [x, p] : {std::pair{cx, cp}, {cx + 0.9, cp - 0.4}, {0.0, 0.0}}) {
            Eigen::VectorXd xs(1), ps(1);
            xs[0] = x;
            ps[0] = p;
            WignerGrid g = wigner_of_density(rho, xs, ps);
            double want = std::exp(-(x - cx) * (x - cx) - (p - cp) * (p - cp)) / kPi;
            CHECK(g.values(0, 0) == doctest::Approx(want).epsilon(1e-9));
        }
    }
    SUBCASE("coherent 1.2 peaks on the x axis") {
        WignerGrid g = wigner_of_density(pure_density(coherent_state(Complex(1.2), 40)), 6.0, 201);
        WignerMetrics m = wigner_metrics(g);
        CHECK(m.w_max == doctest::Approx(1.0 / kPi).epsilon(1e-3));
        CHECK(m.x_at_max == doctest::Approx(1.697).epsilon(5e-2));
        CHECK(std::abs(m.p_at_max) < 0.05);
        CHECK(m.w_min > -1e-12);
    }
}

TEST_CASE("grid-level invariants across state families") {
    std::vector<DensityOperator> states;
    states.push_back(pure_density(coherent_state(Complex(1.0, -0.6), 35)));
    states.push_back(random_density(12, 7));
    // an even cat: coherences on every second diagonal
    {
        PureState plus = coherent_state(Complex(1.5), 25);
        PureState minus = coherent_state(Complex(-1.5), 25);
        PureState cat;
        cat.layout = plus.layout;
        cat.amps = plus.amps + minus.amps;
        cat.amps /= cat.amps.norm();
        states.push_back(pure_density(cat));
    }

    for (std::size_t i = 0; i < states.size(); ++i) {
        CAPTURE(i);
        const DensityOperator& rho = states[i];
        WignerGrid g = wigner_of_density(rho, 6.0, 161);
        CHECK(g.values.cwiseAbs().maxCoeff() <= 1.0 / kPi + 1e-8);
        CHECK(std::abs(g.integral() - 1.0) < 0.05);
        double overlap = 2.0 * kPi * g.values.squaredNorm() * g.dx() * g.dp();
        CHECK(overlap == doctest::Approx(purity(rho)).epsilon(0.02));
    }
}

TEST_CASE("rotational symmetry of number-diagonal states") {
    Mat diag = Mat::Zero(8, 8);
    diag(0, 0) = 0.3;
    diag(1, 1) = 0.25;
    diag(3, 3) = 0.45;
    WignerGrid g = wigner_of_density(DensityOperator{diag}, 5.0, 81);
    CHECK(rotation_residual_90(g) < 1e-6);

    // a displaced state is not rotation invariant
    WignerGrid h = wigner_of_density(pure_density(coherent_state(Complex(1.0), 25)), 5.0, 81);
    CHECK(rotation_residual_90(h) > 1e-2);

    // asymmetric grids are rejected rather than silently mis-rotated
    WignerGrid bad = g;
    bad.x.array() += 0.5;
    CHECK_THROWS_AS(rotation_residual_90(bad), UsageError);
}

TEST_CASE("translation covariance") {
    Complex alpha(0.9, -0.7);
    double sx = std::sqrt(2.0) * alpha.real();
    double sp = std::sqrt(2.0) * alpha.imag();

    Eigen::VectorXd base = Eigen::VectorXd::LinSpaced(41, -2.0, 2.0);
    WignerGrid vac = wigner_of_density(pure_density(fock_state(0, 30)), base, base);
    WignerGrid coh = wigner_of_density(pure_density(coherent_state(alpha, 30)),
                                       base.array() + sx, base.array() + sp);
    CHECK((vac.values - coh.values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("metrics report extremes and negativity mass") {
    DensityOperator one = pure_density(fock_state(1, 10));
    WignerGrid g = wigner_of_density(one, 6.0, 241);
    WignerMetrics m = wigner_metrics(g);

    CHECK(m.w_min == doctest::Approx(-1.0 / kPi).epsilon(1e-6));
    CHECK(std::abs(m.x_at_min) < 1e-12);
    CHECK(std::abs(m.p_at_min) < 1e-12);
    CHECK(m.w_max > 0.0);
    CHECK(m.visibility == doctest::Approx(std::abs(m.w_min / m.w_max)).epsilon(1e-12));
    // closed form: integral of |W| over the negative disk r < 1/sqrt(2)
    double want = 2.0 * std::exp(-0.5) - 1.0;
    CHECK(m.negativity_volume == doctest::Approx(want).epsilon(5e-3));
}

TEST_CASE("csv round trip") {
    WignerGrid g = wigner_of_density(random_density(6, 3), 4.0, 33);
    std::stringstream ss;
    write_csv(g, ss);
    WignerGrid back = read_wigner_csv(ss);
    CHECK((back.x - g.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.p - g.p).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.values - g.values).cwiseAbs().maxCoeff() == 0.0);
}

} // TEST_SUITE
