#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "catsel/postselect.hpp"

using namespace catsel;

namespace {

// Independent re-derivation of the selection rule, spelled out from scratch:
// admission |n_r + sum kappa_q m_q - c| <= 1/2 (closed), energy balance
// x = n0 - sum q m_q - n_r, exact target floor(x + 1/2), fuzzy Gaussian over
// n_t with floor pruning. Defaults c = floor(n0/2), sigma2 = n0/2,
// kappa_q = eta q. Nothing here calls enumerate_diagonal.
double oracle_weight(int n_t, int n_r, const std::vector<int>& ms, const HhgSpec& hhg,
                     const PostSelectionSpec& ps) {
    const double n0 = ps.n0 ? *ps.n0 : std::norm(hhg.alpha);
    const double c = ps.c ? *ps.c : std::floor(n0 / 2.0);
    const double s2 = ps.sigma2 > 0.0 ? ps.sigma2 : n0 / 2.0;

    double balance = n_r;
    double energy = n0 - n_r;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        double kappa = ps.kappas.empty() ? hhg.harmonics[i].order : ps.kappas[i];
        balance += ps.efficiency * kappa * ms[i];
        energy -= hhg.harmonics[i].order * ms[i];
    }
    if (std::abs(balance - c) > 0.5 + 1e-12) return 0.0;

    if (ps.exact) return n_t == static_cast<int>(std::floor(energy + 0.5)) ? 1.0 : 0.0;
    double g = std::exp(-(n_t - energy) * (n_t - energy) / (2.0 * s2));
    return g >= ps.weight_floor ? g : 0.0;
}

// Oracle path 1: scale the full amplitude vector by the diagonal selection
// weights, then reduce with the generic matrix partial trace.
DensityOperator oracle_select(const HhgSpec& hhg, const PostSelectionSpec& ps, double* success) {
    PureState state = build_hhg_state(hhg);
    const ModeLayout& layout = state.layout;
    Vec scaled = state.amps;
    std::vector<int> occ;
    for (long f = 0; f < layout.total_dim(); ++f) {
        layout.occupation_of(f, occ);
        std::vector<int> ms(occ.begin() + 2, occ.end());
        scaled[f] *= oracle_weight(occ[0], occ[1], ms, hhg, ps);
    }
    double trace = scaled.squaredNorm();
    if (success) *success = trace / state.norm2();
    PureState sel{layout, scaled, 0.0};
    DensityOperator rho = partial_trace(sel, "t");
    rho.matrix /= trace;
    return rho;
}

// Oracle path 2: literally build the selection operator as a dense matrix on
// the full tensor space and sandwich the full density matrix with it.
DensityOperator oracle_select_matrix(const HhgSpec& hhg, const PostSelectionSpec& ps) {
    PureState state = build_hhg_state(hhg);
    const ModeLayout& layout = state.layout;
    const long dim = layout.total_dim();

    Mat op = Mat::Zero(dim, dim);
    std::vector<int> occ;
    for (long f = 0; f < dim; ++f) {
        layout.occupation_of(f, occ);
        std::vector<int> ms(occ.begin() + 2, occ.end());
        op(f, f) = oracle_weight(occ[0], occ[1], ms, hhg, ps);
    }
    Mat rho_full = state.amps * state.amps.adjoint();
    Mat sandwiched = op * rho_full * op.adjoint();
    DensityOperator rho = partial_trace(sandwiched, layout, "t");
    rho.matrix /= rho.matrix.trace().real();
    return rho;
}

HhgSpec small_spec() {
    HhgSpec hhg;
    hhg.alpha = Complex(1.2);
    hhg.delta_alpha = Complex(-0.3);
    hhg.harmonics = {{3, Complex(0.4)}, {5, Complex(0.3)}};
    hhg.cutoff_t = 4;
    hhg.cutoff_r = 4;
    hhg.cutoff_q = 3;
    hhg.eps_trunc = 1.0; // deliberately tiny cutoffs; deficits are fine here
    return hhg;
}

} // namespace

TEST_SUITE("postselect") {

TEST_CASE("hhg state construction") {
    SUBCASE("split amplitude reaches both output arms") {
        HhgSpec hhg;
        hhg.alpha = Complex(1.2);
        hhg.delta_alpha = Complex(-0.3);
        hhg.harmonics = {{13, Complex(0.3 / std::sqrt(13.0))}, {15, Complex(0.3 / std::sqrt(15.0))}};
        PureState state = build_hhg_state(hhg);
        CHECK(state.layout.labels ==
              std::vector<std::string>{"t", "r", "q13", "q15"});

        PureState expected = coherent_state(Complex(0.9 / std::sqrt(2.0)),
                                            hhg.resolved_cutoff_t());
        DensityOperator rho_t = partial_trace(state, "t");
        CHECK(fidelity_with_pure(rho_t, expected) > 1.0 - 1e-10);
        CHECK(std::abs(std::abs(Complex(0.9 / std::sqrt(2.0))) - 0.6364) < 1e-4);
    }
    SUBCASE("harmonic mean photon number follows chi") {
        // amplitudes of the correlation-map regime
        PureState q13 = coherent_state(Complex(15.0 / std::sqrt(13.0)), 60);
        double mean = 0.0;
        for (int n = 0; n < q13.dim(); ++n) mean += n * std::norm(q13.amps[n]);
        CHECK(std::abs(mean - 225.0 / 13.0) < 1e-3);
    }
    SUBCASE("harmonic orders must increase") {
        HhgSpec hhg;
        hhg.alpha = Complex(1.0);
        hhg.harmonics = {{5, Complex(0.1)}, {3, Complex(0.1)}};
        CHECK_THROWS_AS(build_hhg_state(hhg), UsageError);
        hhg.harmonics = {{3, Complex(0.1)}, {3, Complex(0.1)}};
        CHECK_THROWS_AS(build_hhg_state(hhg), UsageError);
    }
}

TEST_CASE("diagonal enumeration follows the admission band") {
    HhgSpec hhg;
    hhg.alpha = Complex(3.0);
    hhg.delta_alpha = Complex(-1.0);
    hhg.harmonics = {{3, Complex(1.0 / std::sqrt(3.0))}};

    auto tuple_set = [](const DiagonalSet& diag) {
        std::set<std::pair<int, int>> set;
        for (const DiagonalTuple& t : diag.tuples) set.insert({t.n_r, t.ms[0]});
        return set;
    };

    SUBCASE("unit slope counts partitions of c") {
        PostSelectionSpec ps;
        ps.kappas = {1.0};
        ps.c = 4.0;
        ps.exact = false; // keep every band member; exact mode would drop
                          // the tuples whose energy target is negative
        DiagonalSet diag = enumerate_diagonal(hhg, ps);
        CHECK(tuple_set(diag) ==
              std::set<std::pair<int, int>>{{4, 0}, {3, 1}, {2, 2}, {1, 3}, {0, 4}});
    }
    SUBCASE("steep slope excludes harmonic counts") {
        PostSelectionSpec ps;
        ps.kappas = {13.0};
        ps.c = 4.0;
        DiagonalSet diag = enumerate_diagonal(hhg, ps);
        CHECK(tuple_set(diag) == std::set<std::pair<int, int>>{{4, 0}});
    }
    SUBCASE("half-integer c admits both neighbors") {
        PostSelectionSpec ps;
        ps.c = 4.5; // kappa defaults to q = 3
        DiagonalSet diag = enumerate_diagonal(hhg, ps);
        CHECK(tuple_set(diag) ==
              std::set<std::pair<int, int>>{{4, 0}, {5, 0}, {1, 1}, {2, 1}});
    }
    SUBCASE("weights stay within (0, 1]") {
        PostSelectionSpec ps;
        ps.exact = false;
        DiagonalSet diag = enumerate_diagonal(hhg, ps);
        REQUIRE(!diag.tuples.empty());
        for (const DiagonalTuple& t : diag.tuples) {
            CHECK(t.weights.maxCoeff() <= 1.0);
            bool has_positive = false;
            for (long i = 0; i < t.weights.size(); ++i) {
                CHECK(t.weights[i] >= 0.0);
                if (t.weights[i] > 0.0) {
                    has_positive = true;
                    CHECK(t.weights[i] >= ps.weight_floor);
                }
            }
            CHECK(has_positive);
        }
    }
}

TEST_CASE("selection agrees with the dense oracles at small cutoffs") {
    HhgSpec hhg = small_spec();

    PostSelectionSpec exact;
    PostSelectionSpec fuzzy;
    fuzzy.exact = false;

    PostSelectionSpec shifted;
    shifted.c = 2.0;
    shifted.kappas = {2.0, 4.0};
    shifted.exact = false;
    shifted.efficiency = 0.5;

    for (const PostSelectionSpec& ps : {exact, fuzzy, shifted}) {
        CAPTURE(ps.exact);
        double oracle_succ = 0.0;
        DensityOperator want = oracle_select(hhg, ps, &oracle_succ);
        DensityOperator want2 = oracle_select_matrix(hhg, ps);
        SelectionResult got = run_postselection(hhg, ps);

        CHECK((got.rho.matrix - want.matrix).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((got.rho.matrix - want2.matrix).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(got.success - oracle_succ) < 1e-10);
    }
}

TEST_CASE("exact selection is diagonal in the number basis") {
    HhgSpec hhg;
    hhg.alpha = Complex(3.0);
    hhg.delta_alpha = Complex(-1.0);
    hhg.harmonics = {{3, Complex(1.0 / std::sqrt(3.0))}};

    PostSelectionSpec ps;
    ps.kappas = {1.0}; // admits several tuples with distinct targets

    SelectionResult sel = run_postselection(hhg, ps);
    Mat off = sel.rho.matrix;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() < 1e-12);
    // (1,3) and (0,4) balance to negative photon targets and must be dropped
    CHECK(sel.dropped == 2);
    CHECK(sel.tuple_count == 3);
}

TEST_CASE("selection probability is a probability") {
    HhgSpec hhg = small_spec();
    for (bool exact : {true, false}) {
        PostSelectionSpec ps;
        ps.exact = exact;
        SelectionResult sel = run_postselection(hhg, ps);
        CHECK(sel.success > 0.0);
        CHECK(sel.success <= 1.0);
        CHECK(std::abs(sel.rho.trace_real() - 1.0) < 1e-12);
        CHECK(hermiticity_residual(sel.rho) < 1e-14);
    }
}

TEST_CASE("widening the selection approaches the plain coherent state") {
    HhgSpec hhg;
    hhg.alpha = Complex(3.0);
    hhg.delta_alpha = Complex(-1.0);
    hhg.harmonics = {{3, Complex(1.0 / std::sqrt(3.0))}};

    // tuple support never shrinks as sigma grows
    long prev = -1;
    for (double s2 : {0.001, 0.1, 4.5, 1e12}) {
        PostSelectionSpec ps;
        ps.exact = false;
        ps.sigma2 = s2;
        DiagonalSet diag = enumerate_diagonal(hhg, ps);
        long kept = static_cast<long>(diag.tuples.size());
        CHECK(kept >= prev);
        prev = kept;
    }

    // at sigma = 1e6 every weight is 1 and the state collapses back to the
    // unconditioned coherent state
    PostSelectionSpec wide;
    wide.exact = false;
    wide.sigma2 = 1e12;
    SelectionResult sel = run_postselection(hhg, wide);
    PureState coherent = coherent_state(Complex(2.0 / std::sqrt(2.0)), hhg.resolved_cutoff_t());
    CHECK(fidelity_with_pure(sel.rho, coherent) > 1.0 - 1e-4);
}

TEST_CASE("no-depletion input passes through the wide selection unchanged") {
    HhgSpec hhg;
    hhg.alpha = Complex(2.0);
    hhg.delta_alpha = Complex(0.0);
    hhg.harmonics = {{13, Complex(0.0)}};

    PostSelectionSpec wide;
    wide.exact = false;
    wide.sigma2 = 1e12;
    SelectionResult sel = run_postselection(hhg, wide);
    PureState coherent = coherent_state(Complex(2.0 / std::sqrt(2.0)), hhg.resolved_cutoff_t());
    CHECK(fidelity_with_pure(sel.rho, coherent) > 1.0 - 1e-6);
}

TEST_CASE("slope weighting changes purity in the two-harmonic regime") {
    HhgSpec hhg;
    hhg.alpha = Complex(3.0);
    hhg.delta_alpha = Complex(-1.0);
    hhg.harmonics = {{3, Complex(1.0 / std::sqrt(3.0))}, {5, Complex(1.0 / std::sqrt(5.0))}};

    PostSelectionSpec energy_weighted;
    energy_weighted.exact = false; // kappa_q = q by default

    PostSelectionSpec count_weighted;
    count_weighted.exact = false;
    count_weighted.kappas = {1.0, 1.0};

    double pur_q = purity(run_postselection(hhg, energy_weighted).rho);
    double pur_1 = purity(run_postselection(hhg, count_weighted).rho);
    CHECK(pur_q >= pur_1);
    CHECK(pur_q > 0.99); // single surviving target
    CHECK(pur_1 < 0.9);  // several competing targets mix
}

TEST_CASE("detector efficiency rescales slopes only") {
    PostSelectionSpec ps;
    ps.kappas = {15.0, 5.0};
    ps.c = 7.0;

    PostSelectionSpec scaled = apply_detector_efficiency(ps, 0.2);
    HhgSpec hhg;
    hhg.alpha = Complex(1.0);
    hhg.harmonics = {{15, Complex(0.1)}, {5, Complex(0.1)}};

    std::vector<double> eff = scaled.resolved_kappas(hhg);
    CHECK(eff[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(eff[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(*scaled.c == 7.0);

    PostSelectionSpec unchanged = apply_detector_efficiency(ps, 1.0);
    CHECK(unchanged.resolved_kappas(hhg) == ps.resolved_kappas(hhg));

    CHECK_THROWS_AS(apply_detector_efficiency(ps, 0.0), UsageError);
    CHECK_THROWS_AS(apply_detector_efficiency(ps, 1.2), UsageError);
}

TEST_CASE("impossible selections fail loudly") {
    HhgSpec hhg = small_spec();

    SUBCASE("band beyond every cutoff admits nothing") {
        PostSelectionSpec ps;
        ps.c = 500.0;
        DiagonalSet diag = enumerate_diagonal(hhg, ps);
        CHECK(diag.tuples.empty());
        CHECK_THROWS_AS(apply_postselection(build_hhg_state(hhg), diag), EmptySelectionError);
    }
    SUBCASE("targets beyond the transmitted cutoff are dropped and counted") {
        HhgSpec tight;
        tight.alpha = Complex(3.0);
        tight.delta_alpha = Complex(-1.0);
        tight.harmonics = {{3, Complex(1.0 / std::sqrt(3.0))}};
        tight.cutoff_t = 2;    // targets sit at n_t = 5
        tight.eps_trunc = 1.0; // the brutal cutoff is the point here

        PostSelectionSpec ps; // exact, c = 4
        DiagonalSet diag = enumerate_diagonal(tight, ps);
        CHECK(diag.tuples.empty());
        CHECK(diag.dropped == 2);
        CHECK_THROWS_AS(apply_postselection(build_hhg_state(tight), diag),
                        EmptySelectionError);
    }
}

} // TEST_SUITE
