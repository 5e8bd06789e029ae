// catsel command-line front end. One flat JSON config drives every
// experiment kind; all artifacts land in --out together with a manifest
// that echoes the fully resolved parameters. Nothing is written to disk
// until the whole computation has succeeded, so a failing run leaves no
// partial outputs behind.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "catsel/analysis.hpp"
#include "catsel/errors.hpp"
#include "catsel/fock.hpp"
#include "catsel/postselect.hpp"
#include "catsel/serialize.hpp"
#include "catsel/tomography.hpp"
#include "catsel/wigner.hpp"

namespace {

using nlohmann::json;
using namespace catsel;

constexpr const char* kVersion = "0.1.0";
constexpr std::uint64_t kDefaultSeed = 20250816ULL;

// ---------------------------------------------------------------------------
// Config access. Every failure names the offending key so a typo in a recipe
// is a one-glance fix.

[[noreturn]] void bad_key(const std::string& key, const std::string& expected) {
    throw UsageError("config key \"" + key + "\" must be " + expected);
}

double num_at(const json& cfg, const std::string& key, double fallback) {
    if (!cfg.contains(key)) return fallback;
    const json& v = cfg.at(key);
    if (!v.is_number()) bad_key(key, "a number");
    return v.get<double>();
}

double req_num(const json& cfg, const std::string& key) {
    if (!cfg.contains(key)) throw UsageError("config key \"" + key + "\" is required");
    return num_at(cfg, key, 0.0);
}

long int_at(const json& cfg, const std::string& key, long fallback, long min_value) {
    if (!cfg.contains(key)) return fallback;
    const json& v = cfg.at(key);
    if (!v.is_number_integer() || v.get<long>() < min_value)
        bad_key(key, "an integer >= " + std::to_string(min_value));
    return v.get<long>();
}

bool bool_at(const json& cfg, const std::string& key, bool fallback) {
    if (!cfg.contains(key)) return fallback;
    const json& v = cfg.at(key);
    if (!v.is_boolean()) bad_key(key, "a boolean");
    return v.get<bool>();
}

std::string str_at(const json& cfg, const std::string& key, const std::string& fallback) {
    if (!cfg.contains(key)) return fallback;
    const json& v = cfg.at(key);
    if (!v.is_string()) bad_key(key, "a string");
    return v.get<std::string>();
}

// Complex amplitudes are a bare number or an [re, im] pair.
Complex complex_at(const json& cfg, const std::string& key, Complex fallback) {
    if (!cfg.contains(key)) return fallback;
    const json& v = cfg.at(key);
    if (v.is_number()) return Complex(v.get<double>(), 0.0);
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
        return Complex(v[0].get<double>(), v[1].get<double>());
    bad_key(key, "a number or an [re, im] pair");
}

std::vector<double> num_list_at(const json& cfg, const std::string& key) {
    const json& v = cfg.at(key);
    if (!v.is_array() || v.empty()) bad_key(key, "a non-empty array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
        if (!e.is_number()) bad_key(key, "a non-empty array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Schema. One flat key space shared by all kinds; each kind accepts the
// subset below, and anything else is rejected by name.

std::set<std::string> allowed_keys(const std::string& kind) {
    std::set<std::string> keys = {"kind", "seed"};
    auto add = [&keys](std::initializer_list<const char*> ks) {
        for (const char* k : ks) keys.insert(k);
    };
    const std::initializer_list<const char*> state_block = {
        "alpha",      "delta_alpha", "harmonics", "kappas",   "c",        "exact",
        "sigma2",     "efficiency",  "weight_floor", "cutoff_t", "cutoff_r", "cutoff_q",
        "eps_trunc"};
    const std::initializer_list<const char*> grid_block = {"extent", "npts"};
    const std::initializer_list<const char*> sampling_block = {"source", "n_shots", "n_angles",
                                                               "convention", "eigen_cutoff"};

    if (kind == "state") {
        add(state_block);
    } else if (kind == "wigner") {
        add(state_block), add(grid_block), add({"upsample"});
    } else if (kind == "diagonal-sweep") {
        add(state_block), add(grid_block), add({"sweep"});
    } else if (kind == "fidelity-scan") {
        add(state_block), add({"scan_lo", "scan_hi", "scan_res"});
    } else if (kind == "homodyne") {
        add(state_block), add(sampling_block);
    } else if (kind == "radon") {
        add(state_block), add(grid_block), add(sampling_block);
        add({"k_c", "variant", "trace_file"});
    } else if (kind == "kc-sweep") {
        add(state_block), add(grid_block), add(sampling_block), add({"variant", "kc_list"});
    } else if (kind == "shots-sweep") {
        add(state_block), add(grid_block);
        add({"source", "n_angles", "convention", "eigen_cutoff"});
        add({"k_c", "variant", "shots_list", "export_grids"});
    } else if (kind == "fluctuations") {
        add(state_block), add(grid_block);
        add({"sigma_tilde", "sigma_tilde_list", "n_nodes", "export_grids"});
    } else if (kind == "correlate") {
        add({"alpha", "delta_alpha", "harmonics", "n_shots", "filters"});
    } else {
        throw UsageError(
            "unknown experiment kind \"" + kind +
            "\"; expected one of state, wigner, diagonal-sweep, fidelity-scan, homodyne, "
            "radon, kc-sweep, shots-sweep, fluctuations, correlate");
    }
    return keys;
}

void check_keys(const json& cfg, const std::string& kind) {
    const std::set<std::string> keys = allowed_keys(kind);
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
        if (!keys.count(it.key()))
            throw UsageError("unknown config key \"" + it.key() + "\" for kind \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// Builders from config to module specs.

// Entries are a bare order (chi defaults to |delta_alpha|/sqrt(q)) or
// [order, chi] / [order, chi_re, chi_im].
std::vector<Harmonic> harmonics_from(const json& cfg, Complex delta_alpha) {
    if (!cfg.contains("harmonics")) throw UsageError("config key \"harmonics\" is required");
    const json& v = cfg.at("harmonics");
    if (!v.is_array() || v.empty()) bad_key("harmonics", "a non-empty array");
    std::vector<Harmonic> out;
    for (const json& e : v) {
        Harmonic h;
        if (e.is_number_integer()) {
            h.order = e.get<int>();
            if (h.order < 1) bad_key("harmonics", "made of orders >= 1");
            h.chi = Complex(std::abs(delta_alpha) / std::sqrt(static_cast<double>(h.order)), 0.0);
        } else if (e.is_array() && (e.size() == 2 || e.size() == 3) && e[0].is_number_integer()) {
            h.order = e[0].get<int>();
            if (!e[1].is_number() || (e.size() == 3 && !e[2].is_number()))
                bad_key("harmonics", "entries of the form order or [order, chi_re(, chi_im)]");
            h.chi = Complex(e[1].get<double>(), e.size() == 3 ? e[2].get<double>() : 0.0);
        } else {
            bad_key("harmonics", "entries of the form order or [order, chi_re(, chi_im)]");
        }
        out.push_back(h);
    }
    return out;
}

HhgSpec hhg_from(const json& cfg) {
    HhgSpec h;
    if (!cfg.contains("alpha")) throw UsageError("config key \"alpha\" is required");
    h.alpha = complex_at(cfg, "alpha", Complex());
    h.delta_alpha = complex_at(cfg, "delta_alpha", Complex());
    h.harmonics = harmonics_from(cfg, h.delta_alpha);
    h.cutoff_t = static_cast<int>(int_at(cfg, "cutoff_t", -1, 0));
    h.cutoff_r = static_cast<int>(int_at(cfg, "cutoff_r", -1, 0));
    h.cutoff_q = static_cast<int>(int_at(cfg, "cutoff_q", -1, 0));
    h.eps_trunc = num_at(cfg, "eps_trunc", 1e-6);
    if (h.eps_trunc <= 0.0) bad_key("eps_trunc", "a positive number");
    return h;
}

PostSelectionSpec ps_from(const json& cfg) {
    PostSelectionSpec ps;
    if (cfg.contains("kappas")) ps.kappas = num_list_at(cfg, "kappas");
    if (cfg.contains("c")) ps.c = req_num(cfg, "c");
    ps.exact = bool_at(cfg, "exact", true);
    ps.sigma2 = num_at(cfg, "sigma2", -1.0);
    if (cfg.contains("sigma2") && ps.sigma2 <= 0.0) bad_key("sigma2", "a positive number");
    ps.efficiency = num_at(cfg, "efficiency", 1.0);
    ps.weight_floor = num_at(cfg, "weight_floor", 1e-8);
    if (ps.weight_floor < 0.0) bad_key("weight_floor", "a number >= 0");
    return ps;
}

QuadConvention convention_from(const json& cfg) {
    const std::string s = str_at(cfg, "convention", "internal");
    if (s == "internal") return QuadConvention::internal;
    if (s == "plain") return QuadConvention::plain;
    bad_key("convention", "\"internal\" or \"plain\"");
}

const char* convention_name(QuadConvention c) {
    return c == QuadConvention::internal ? "internal" : "plain";
}

RadonVariant variant_from(const json& cfg) {
    const std::string s = str_at(cfg, "variant", "per_sample");
    if (s == "per_sample") return RadonVariant::per_sample;
    if (s == "per_angle_mean") return RadonVariant::per_angle_mean;
    bad_key("variant", "\"per_sample\" or \"per_angle_mean\"");
}

struct GridSpec {
    double extent = 6.0;
    int npts = 201;
};

GridSpec grid_from(const json& cfg) {
    GridSpec g;
    g.extent = num_at(cfg, "extent", 6.0);
    if (g.extent <= 0.0) bad_key("extent", "a positive number");
    g.npts = static_cast<int>(int_at(cfg, "npts", 201, 2));
    return g;
}

// ---------------------------------------------------------------------------
// Artifact sink: rendered bytes are held in memory and flushed only after
// the run finished, keeping failed runs free of partial outputs.

struct Sink {
    std::filesystem::path dir;
    std::vector<std::pair<std::string, std::string>> files;

    void add(std::string name, std::string bytes) {
        files.emplace_back(std::move(name), std::move(bytes));
    }

    std::vector<std::string> flush() const {
        std::filesystem::create_directories(dir);
        std::vector<std::string> names;
        for (const auto& [name, bytes] : files) {
            std::ofstream out(dir / name, std::ios::binary);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
            names.push_back(name);
        }
        return names;
    }
};

// ---------------------------------------------------------------------------
// Renderers. CSV writers live with their modules; JSON mirrors the same data
// for --format json.

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json grid_to_json(const WignerGrid& g) {
    json j;
    j["x"] = std::vector<double>(g.x.data(), g.x.data() + g.x.size());
    j["p"] = std::vector<double>(g.p.data(), g.p.data() + g.p.size());
    json rows = json::array();
    for (Eigen::Index i = 0; i < g.values.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < g.values.cols(); ++k) row.push_back(g.values(i, k));
        rows.push_back(std::move(row));
    }
    j["values"] = std::move(rows);
    return j;
}

std::string render_grid(const WignerGrid& g, const std::string& fmt) {
    if (fmt == "json") return dump(grid_to_json(g));
    std::ostringstream os;
    write_csv(g, os);
    return os.str();
}

std::string render_trace(const HomodyneTrace& t, const std::string& fmt) {
    if (fmt == "json") {
        json j;
        j["seed"] = t.seed;
        j["state"] = t.state_descriptor;
        j["convention"] = convention_name(t.convention);
        json recs = json::array();
        for (const HomodyneRecord& r : t.records)
            recs.push_back(json{{"phi", r.phi}, {"outcomes", r.outcomes}});
        j["records"] = std::move(recs);
        return dump(j);
    }
    std::ostringstream os;
    write_csv(t, os);
    return os.str();
}

std::string render_shots(const CorrelationMap& m, const std::string& fmt) {
    if (fmt == "json") {
        json j;
        j["harmonic_orders"] = m.harmonic_orders;
        json cols = json::array();
        cols.push_back("i"), cols.push_back("n_r");
        for (int q : m.harmonic_orders) cols.push_back("m_" + std::to_string(q));
        cols.push_back("I_IR"), cols.push_back("I_XUV");
        for (std::size_t k = 0; k < m.acceptance.size(); ++k)
            cols.push_back("accepted_filter_" + std::to_string(k));
        j["columns"] = std::move(cols);
        json rows = json::array();
        for (const ShotRecord& rec : m.shots) {
            json row = json::array();
            row.push_back(rec.shot), row.push_back(rec.n_r);
            for (int v : rec.ms) row.push_back(v);
            row.push_back(rec.i_ir), row.push_back(rec.i_xuv);
            for (bool a : rec.accepted) row.push_back(a ? 1 : 0);
            rows.push_back(std::move(row));
        }
        j["rows"] = std::move(rows);
        return dump(j);
    }
    std::ostringstream os;
    write_csv(m, os);
    return os.str();
}

std::string data_ext(const std::string& fmt) { return fmt == "json" ? ".json" : ".csv"; }

json metrics_to_json(const WignerGrid& g) {
    const WignerMetrics m = wigner_metrics(g);
    json j;
    j["w_min"] = m.w_min;
    j["w_max"] = m.w_max;
    j["at_min"] = {m.x_at_min, m.p_at_min};
    j["at_max"] = {m.x_at_max, m.p_at_max};
    j["visibility"] = m.visibility;
    j["negativity_volume"] = m.negativity_volume;
    j["integral"] = g.integral();
    return j;
}

void warn_if_clipped(const WignerGrid& g, const GridSpec& gs) {
    const double mass = g.integral();
    if (std::abs(mass - 1.0) > 0.05)
        std::fprintf(stderr,
                     "warning: Wigner grid captures integral %.4f (extent %g, npts %d); "
                     "widen the extent or refine the grid\n",
                     mass, gs.extent, gs.npts);
}

// Export-only cosmetic smoothing: separable Catmull-Rom refinement by an
// integer factor. The simulation never sees interpolated values.
WignerGrid upsample_grid(const WignerGrid& g, int factor) {
    auto refine_axis = [factor](const Eigen::VectorXd& a) {
        const Eigen::Index m = (a.size() - 1) * factor + 1;
        return Eigen::VectorXd(Eigen::VectorXd::LinSpaced(m, a(0), a(a.size() - 1)));
    };
    auto catmull = [](double p0, double p1, double p2, double p3, double t) {
        return 0.5 * (2.0 * p1 + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                      (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
    };
    auto refine_columns = [&](const Eigen::MatrixXd& v) {
        const Eigen::Index n = v.rows();
        Eigen::MatrixXd out((n - 1) * factor + 1, v.cols());
        for (Eigen::Index j = 0; j < v.cols(); ++j)
            for (Eigen::Index i = 0; i < out.rows(); ++i) {
                const Eigen::Index seg = std::min(i / factor, n - 2);
                const double t = static_cast<double>(i - seg * factor) / factor;
                const Eigen::Index i0 = std::max<Eigen::Index>(seg - 1, 0);
                const Eigen::Index i3 = std::min<Eigen::Index>(seg + 2, n - 1);
                out(i, j) = catmull(v(i0, j), v(seg, j), v(seg + 1, j), v(i3, j), t);
            }
        return out;
    };
    WignerGrid fine;
    fine.x = refine_axis(g.x);
    fine.p = refine_axis(g.p);
    fine.values = refine_columns(refine_columns(g.values).transpose()).transpose();
    return fine;
}

// Resolved-parameter echo for the manifest; this is the block that makes a
// run auditable without re-deriving defaults by hand.
json resolved_selection(const HhgSpec& h, const PostSelectionSpec& ps) {
    const double n0 = ps.resolved_n0(h);
    json r;
    r["alpha"] = {h.alpha.real(), h.alpha.imag()};
    r["delta_alpha"] = {h.delta_alpha.real(), h.delta_alpha.imag()};
    json hs = json::array();
    for (const Harmonic& q : h.harmonics)
        hs.push_back(json::array({q.order, q.chi.real(), q.chi.imag()}));
    r["harmonics"] = std::move(hs);
    r["n0"] = n0;
    r["c"] = ps.resolved_c(n0);
    r["exact"] = ps.exact;
    r["sigma2"] = ps.resolved_sigma2(n0);
    r["kappas"] = ps.resolved_kappas(h);
    r["efficiency"] = ps.efficiency;
    r["weight_floor"] = ps.weight_floor;
    r["cutoff_t"] = h.resolved_cutoff_t();
    r["cutoff_r"] = h.resolved_cutoff_r();
    r["cutoff_q"] = h.resolved_cutoff_q();
    return r;
}

// States the sampling kinds can measure: the post-selected output (default)
// or a plain coherent state of amplitude alpha, handy for calibration runs.
struct Source {
    DensityOperator rho;
    std::string descriptor;
    json resolved;
};

Source source_from(const json& cfg) {
    const std::string kind = str_at(cfg, "source", "selected");
    if (kind == "selected") {
        const HhgSpec hhg = hhg_from(cfg);
        const PostSelectionSpec ps = ps_from(cfg);
        const SelectionResult sel = run_postselection(hhg, ps);
        json r = resolved_selection(hhg, ps);
        r["source"] = "selected";
        r["success"] = sel.success;
        r["tuple_count"] = sel.tuple_count;
        r["dropped"] = sel.dropped;
        return {sel.rho, "selected", std::move(r)};
    }
    if (kind == "coherent") {
        if (!cfg.contains("alpha")) throw UsageError("config key \"alpha\" is required");
        const Complex alpha = complex_at(cfg, "alpha", Complex());
        const int cutoff = static_cast<int>(
            int_at(cfg, "cutoff_t", suggested_cutoff(std::abs(alpha)), 0));
        const PureState psi = coherent_state(alpha, cutoff, num_at(cfg, "eps_trunc", 1e-6));
        DensityOperator rho;
        rho.matrix = psi.amps * psi.amps.adjoint();
        json r;
        r["source"] = "coherent";
        r["alpha"] = {alpha.real(), alpha.imag()};
        r["cutoff"] = cutoff;
        return {std::move(rho), "coherent", std::move(r)};
    }
    bad_key("source", "\"selected\" or \"coherent\"");
}

// Exact Wigner function on the reconstruction's own grid, for similarity
// scoring. Plain-convention reconstructions compare against the rescaled
// exact grid so both live on identical axes.
WignerGrid exact_grid_like(const DensityOperator& rho, const GridSpec& gs, QuadConvention conv) {
    if (conv == QuadConvention::plain)
        return to_plain_convention(wigner_of_density(rho, gs.extent / std::sqrt(2.0), gs.npts));
    return wigner_of_density(rho, gs.extent, gs.npts);
}

std::string sanitize_label(const std::string& label) {
    if (label.empty()) throw UsageError("sweep labels must not be empty");
    for (char ch : label)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-')
            throw UsageError("sweep label \"" + label + "\" may use only [A-Za-z0-9_-]");
    return label;
}

// ---------------------------------------------------------------------------
// Experiment kinds.

json run_state(const json& cfg, const std::string& fmt, Sink& sink) {
    (void)fmt; // a density operator is always exported as JSON
    const HhgSpec hhg = hhg_from(cfg);
    const PostSelectionSpec ps = ps_from(cfg);
    const SelectionResult sel = run_postselection(hhg, ps);

    sink.add("state.json", to_json(sel.rho));
    json summary = resolved_selection(hhg, ps);
    summary["success"] = sel.success;
    summary["tuple_count"] = sel.tuple_count;
    summary["dropped"] = sel.dropped;
    summary["purity"] = purity(sel.rho);
    summary["dim"] = sel.rho.dim();
    sink.add("summary.json", dump(summary));
    std::printf("selected state: dim=%d success=%.6g purity=%.6g tuples=%ld\n",
                static_cast<int>(sel.rho.dim()), sel.success, purity(sel.rho), sel.tuple_count);
    return summary;
}

json run_wigner(const json& cfg, const std::string& fmt, Sink& sink) {
    const HhgSpec hhg = hhg_from(cfg);
    const PostSelectionSpec ps = ps_from(cfg);
    const GridSpec gs = grid_from(cfg);
    const long upsample = int_at(cfg, "upsample", 1, 1);

    const SelectionResult sel = run_postselection(hhg, ps);
    const WignerGrid grid = wigner_of_density(sel.rho, gs.extent, gs.npts);
    warn_if_clipped(grid, gs);

    json metrics = metrics_to_json(grid);
    metrics["rotation_residual_90"] = rotation_residual_90(grid);
    metrics["purity"] = purity(sel.rho);
    metrics["success"] = sel.success;
    metrics["tuple_count"] = sel.tuple_count;
    metrics["dropped"] = sel.dropped;

    sink.add("wigner" + data_ext(fmt), render_grid(grid, fmt));
    if (upsample > 1)
        sink.add("wigner_upsampled" + data_ext(fmt),
                 render_grid(upsample_grid(grid, static_cast<int>(upsample)), fmt));
    sink.add("metrics.json", dump(metrics));

    json summary = resolved_selection(hhg, ps);
    summary["extent"] = gs.extent;
    summary["npts"] = gs.npts;
    std::printf("wigner: w_min=%.6g at (%.3f, %.3f), visibility=%.4g, success=%.4g\n",
                metrics["w_min"].get<double>(), metrics["at_min"][0].get<double>(),
                metrics["at_min"][1].get<double>(), metrics["visibility"].get<double>(),
                sel.success);
    return summary;
}

json run_diagonal_sweep(const json& cfg, const std::string& fmt, Sink& sink) {
    const HhgSpec hhg = hhg_from(cfg);
    const GridSpec gs = grid_from(cfg);
    if (!cfg.contains("sweep") || !cfg.at("sweep").is_array() || cfg.at("sweep").empty())
        bad_key("sweep", "a non-empty array of selection variants");

    json rows = json::array();
    int index = 0;
    for (const json& entry : cfg.at("sweep")) {
        if (!entry.is_object()) bad_key("sweep", "an array of objects");
        static const std::set<std::string> variant_keys = {
            "label", "kappas", "c", "exact", "sigma2", "efficiency", "weight_floor"};
        for (auto it = entry.begin(); it != entry.end(); ++it)
            if (!variant_keys.count(it.key()))
                throw UsageError("unknown sweep key \"" + it.key() + "\"");

        // Variant entries override the top-level selection block.
        json merged = cfg;
        merged.erase("sweep");
        for (auto it = entry.begin(); it != entry.end(); ++it)
            if (it.key() != "label") merged[it.key()] = it.value();
        const PostSelectionSpec ps = ps_from(merged);
        const std::string label =
            sanitize_label(str_at(entry, "label", "variant_" + std::to_string(index)));

        const SelectionResult sel = run_postselection(hhg, ps);
        const WignerGrid grid = wigner_of_density(sel.rho, gs.extent, gs.npts);
        warn_if_clipped(grid, gs);
        sink.add("wigner_" + label + data_ext(fmt), render_grid(grid, fmt));

        json row = metrics_to_json(grid);
        row["label"] = label;
        row["selection"] = resolved_selection(hhg, ps);
        row["success"] = sel.success;
        row["purity"] = purity(sel.rho);
        row["tuple_count"] = sel.tuple_count;
        row["dropped"] = sel.dropped;
        std::printf("variant %-16s w_min=%.6g purity=%.6g success=%.4g\n", label.c_str(),
                    row["w_min"].get<double>(), row["purity"].get<double>(), sel.success);
        rows.push_back(std::move(row));
        ++index;
    }
    sink.add("sweep.json", dump(rows));

    json summary;
    summary["variants"] = rows.size();
    summary["extent"] = gs.extent;
    summary["npts"] = gs.npts;
    return summary;
}

json run_fidelity_scan(const json& cfg, const std::string& fmt, Sink& sink) {
    (void)fmt;
    const HhgSpec hhg = hhg_from(cfg);
    const PostSelectionSpec ps = ps_from(cfg);
    const double lo = num_at(cfg, "scan_lo", 1e-3);
    const double hi = num_at(cfg, "scan_hi", 3.0);
    const long res = int_at(cfg, "scan_res", 100, 2);
    if (!(lo < hi)) bad_key("scan_hi", "greater than scan_lo");

    const SelectionResult sel = run_postselection(hhg, ps);
    const FidelityScanResult scan = fidelity_scan(sel.rho, lo, hi, static_cast<int>(res));

    json out;
    out["grid"] = {{"lo", scan.lo}, {"hi", scan.hi}, {"resolution", scan.resolution}};
    out["best"] = {{"beta", scan.best_beta},
                   {"delta_beta", scan.best_delta_beta},
                   {"fidelity", scan.best_fidelity}};
    out["selection"] = resolved_selection(hhg, ps);
    out["success"] = sel.success;
    out["purity"] = purity(sel.rho);
    sink.add("scan.json", dump(out));
    std::printf("best cat fit: beta=%.6g delta_beta=%.6g fidelity=%.6g\n", scan.best_beta,
                scan.best_delta_beta, scan.best_fidelity);
    return out;
}

json run_homodyne(const json& cfg, const std::string& fmt, Sink& sink, std::uint64_t seed) {
    const Source src = source_from(cfg);
    const long n_shots = int_at(cfg, "n_shots", 100, 1);
    const long n_angles = int_at(cfg, "n_angles", 20, 1);
    const QuadConvention conv = convention_from(cfg);
    const long eigen_cutoff = int_at(cfg, "eigen_cutoff", -1, 0);

    const HomodyneTrace trace =
        sample_homodyne(src.rho, uniform_phases(static_cast<int>(n_angles)),
                        static_cast<int>(n_shots), seed, conv, static_cast<int>(eigen_cutoff),
                        src.descriptor);
    sink.add("trace" + data_ext(fmt), render_trace(trace, fmt));

    json summary;
    summary["state"] = src.resolved;
    summary["n_shots"] = n_shots;
    summary["n_angles"] = n_angles;
    summary["convention"] = convention_name(conv);
    summary["seed"] = seed;
    sink.add("summary.json", dump(summary));
    std::printf("homodyne: %ld angles x %ld shots (%s convention)\n", n_angles, n_shots,
                convention_name(conv));
    return summary;
}

json run_radon(const json& cfg, const std::string& fmt, Sink& sink, std::uint64_t seed) {
    const GridSpec gs = grid_from(cfg);
    RadonConfig rc;
    rc.k_c = num_at(cfg, "k_c", 2.0);
    if (rc.k_c <= 0.0) bad_key("k_c", "a positive number");
    rc.variant = variant_from(cfg);
    rc.extent = gs.extent;
    rc.npts = gs.npts;

    HomodyneTrace trace;
    json summary;
    bool have_exact = false;
    WignerGrid exact;

    if (cfg.contains("trace_file")) {
        for (const char* k : {"source", "n_shots", "n_angles", "convention", "eigen_cutoff"})
            if (cfg.contains(k))
                throw UsageError(std::string("config key \"") + k +
                                 "\" does not apply when \"trace_file\" is given");
        const std::string path = str_at(cfg, "trace_file", "");
        std::ifstream in(path);
        if (!in) throw UsageError("cannot open trace_file \"" + path + "\"");
        trace = read_trace_csv(in);
        summary["trace_file"] = path;
    } else {
        const Source src = source_from(cfg);
        const long n_shots = int_at(cfg, "n_shots", 100, 1);
        const long n_angles = int_at(cfg, "n_angles", 20, 1);
        const QuadConvention conv = convention_from(cfg);
        const long eigen_cutoff = int_at(cfg, "eigen_cutoff", -1, 0);
        trace = sample_homodyne(src.rho, uniform_phases(static_cast<int>(n_angles)),
                                static_cast<int>(n_shots), seed, conv,
                                static_cast<int>(eigen_cutoff), src.descriptor);
        sink.add("trace" + data_ext(fmt), render_trace(trace, fmt));
        exact = exact_grid_like(src.rho, gs, conv);
        have_exact = true;
        summary["state"] = src.resolved;
        summary["n_shots"] = n_shots;
        summary["n_angles"] = n_angles;
        summary["convention"] = convention_name(conv);
    }

    const WignerGrid grid = inverse_radon(trace, rc);
    sink.add("wigner" + data_ext(fmt), render_grid(grid, fmt));

    json metrics = metrics_to_json(grid);
    metrics["k_c"] = rc.k_c;
    metrics["variant"] = cfg.contains("variant") ? cfg.at("variant").get<std::string>()
                                                 : std::string("per_sample");
    if (have_exact) metrics["similarity"] = frobenius_similarity(exact, grid);
    sink.add("metrics.json", dump(metrics));

    summary["k_c"] = rc.k_c;
    summary["extent"] = gs.extent;
    summary["npts"] = gs.npts;
    std::printf("reconstruction: w_min=%.6g%s\n", metrics["w_min"].get<double>(),
                have_exact
                    ? (" similarity=" + std::to_string(metrics["similarity"].get<double>())).c_str()
                    : "");
    return summary;
}

json run_kc_sweep(const json& cfg, const std::string& fmt, Sink& sink, std::uint64_t seed) {
    const GridSpec gs = grid_from(cfg);
    if (!cfg.contains("kc_list")) throw UsageError("config key \"kc_list\" is required");
    const std::vector<double> kcs = num_list_at(cfg, "kc_list");
    for (double k : kcs)
        if (k <= 0.0) bad_key("kc_list", "an array of positive numbers");

    const Source src = source_from(cfg);
    const long n_shots = int_at(cfg, "n_shots", 100, 1);
    const long n_angles = int_at(cfg, "n_angles", 20, 1);
    const QuadConvention conv = convention_from(cfg);
    const long eigen_cutoff = int_at(cfg, "eigen_cutoff", -1, 0);

    // One trace, many kernels: the sweep isolates the filter artifact.
    const HomodyneTrace trace =
        sample_homodyne(src.rho, uniform_phases(static_cast<int>(n_angles)),
                        static_cast<int>(n_shots), seed, conv, static_cast<int>(eigen_cutoff),
                        src.descriptor);
    sink.add("trace" + data_ext(fmt), render_trace(trace, fmt));
    const WignerGrid exact = exact_grid_like(src.rho, gs, conv);

    RadonConfig rc;
    rc.variant = variant_from(cfg);
    rc.extent = gs.extent;
    rc.npts = gs.npts;

    json rows = json::array();
    for (std::size_t i = 0; i < kcs.size(); ++i) {
        rc.k_c = kcs[i];
        const WignerGrid grid = inverse_radon(trace, rc);
        char name[64];
        std::snprintf(name, sizeof name, "wigner_kc_%zu", i);
        sink.add(name + data_ext(fmt), render_grid(grid, fmt));
        json row = metrics_to_json(grid);
        row["k_c"] = kcs[i];
        row["file"] = name + data_ext(fmt);
        row["similarity"] = frobenius_similarity(exact, grid);
        std::printf("k_c=%-8g w_min=%.6g similarity=%.4f\n", kcs[i],
                    row["w_min"].get<double>(), row["similarity"].get<double>());
        rows.push_back(std::move(row));
    }
    sink.add("sweep.json", dump(rows));

    json summary;
    summary["state"] = src.resolved;
    summary["n_shots"] = n_shots;
    summary["n_angles"] = n_angles;
    summary["convention"] = convention_name(conv);
    summary["kc_list"] = kcs;
    return summary;
}

json run_shots_sweep(const json& cfg, const std::string& fmt, Sink& sink, std::uint64_t seed) {
    const GridSpec gs = grid_from(cfg);
    if (!cfg.contains("shots_list")) throw UsageError("config key \"shots_list\" is required");
    const json& sl = cfg.at("shots_list");
    if (!sl.is_array() || sl.empty()) bad_key("shots_list", "a non-empty array of integers >= 1");
    std::vector<long> shots;
    for (const json& e : sl) {
        if (!e.is_number_integer() || e.get<long>() < 1)
            bad_key("shots_list", "a non-empty array of integers >= 1");
        shots.push_back(e.get<long>());
    }

    const Source src = source_from(cfg);
    const long n_angles = int_at(cfg, "n_angles", 20, 1);
    const QuadConvention conv = convention_from(cfg);
    const long eigen_cutoff = int_at(cfg, "eigen_cutoff", -1, 0);
    const bool export_grids = bool_at(cfg, "export_grids", false);
    const WignerGrid exact = exact_grid_like(src.rho, gs, conv);

    RadonConfig rc;
    rc.k_c = num_at(cfg, "k_c", 2.0);
    if (rc.k_c <= 0.0) bad_key("k_c", "a positive number");
    rc.variant = variant_from(cfg);
    rc.extent = gs.extent;
    rc.npts = gs.npts;

    json rows = json::array();
    for (long n : shots) {
        // Same seed for every count: per-angle substreams make shorter runs
        // prefixes of longer ones, so the sweep shows pure shot-noise decay.
        const HomodyneTrace trace =
            sample_homodyne(src.rho, uniform_phases(static_cast<int>(n_angles)),
                            static_cast<int>(n), seed, conv, static_cast<int>(eigen_cutoff),
                            src.descriptor);
        const WignerGrid grid = inverse_radon(trace, rc);
        json row = metrics_to_json(grid);
        row["n_shots"] = n;
        row["similarity"] = frobenius_similarity(exact, grid);
        if (export_grids) {
            const std::string name = "wigner_shots_" + std::to_string(n) + data_ext(fmt);
            sink.add(name, render_grid(grid, fmt));
            row["file"] = name;
        }
        std::printf("n_shots=%-8ld w_min=%.6g similarity=%.4f\n", n, row["w_min"].get<double>(),
                    row["similarity"].get<double>());
        rows.push_back(std::move(row));
    }
    sink.add("sweep.json", dump(rows));

    json summary;
    summary["state"] = src.resolved;
    summary["n_angles"] = n_angles;
    summary["convention"] = convention_name(conv);
    summary["k_c"] = rc.k_c;
    summary["shots_list"] = shots;
    return summary;
}

json run_fluctuations(const json& cfg, const std::string& fmt, Sink& sink) {
    const GridSpec gs = grid_from(cfg);
    if (!cfg.contains("alpha")) throw UsageError("config key \"alpha\" is required");
    if (!cfg.at("alpha").is_number()) bad_key("alpha", "a real number for fluctuation sweeps");
    if (cfg.contains("delta_alpha") && !cfg.at("delta_alpha").is_number())
        bad_key("delta_alpha", "a real number for fluctuation sweeps");

    FluctuationSpec spec;
    spec.alpha0 = req_num(cfg, "alpha");
    spec.delta_alpha = num_at(cfg, "delta_alpha", 0.0);
    spec.harmonics = harmonics_from(cfg, Complex(spec.delta_alpha, 0.0));
    spec.n_nodes = static_cast<int>(int_at(cfg, "n_nodes", 21, 1));
    spec.ps = ps_from(cfg);

    std::vector<double> widths;
    if (cfg.contains("sigma_tilde_list")) {
        if (cfg.contains("sigma_tilde"))
            throw UsageError("give either \"sigma_tilde\" or \"sigma_tilde_list\", not both");
        widths = num_list_at(cfg, "sigma_tilde_list");
    } else {
        widths.push_back(num_at(cfg, "sigma_tilde", 0.0));
    }
    for (double w : widths)
        if (w < 0.0) bad_key("sigma_tilde", "a number >= 0");
    const bool export_grids = bool_at(cfg, "export_grids", true);

    json rows = json::array();
    for (std::size_t i = 0; i < widths.size(); ++i) {
        spec.sigma_tilde = widths[i];
        const FluctuationResult res = intensity_fluctuation_state(spec);
        const WignerGrid grid = wigner_of_density(res.rho, gs.extent, gs.npts);
        warn_if_clipped(grid, gs);
        json row = metrics_to_json(grid);
        row["sigma_tilde"] = widths[i];
        row["mean_success"] = res.mean_success;
        row["nodes_used"] = res.nodes_used;
        row["purity"] = purity(res.rho);
        if (export_grids) {
            const std::string name = "wigner_sigma_" + std::to_string(i) + data_ext(fmt);
            sink.add(name, render_grid(grid, fmt));
            row["file"] = name;
        }
        std::printf("sigma_tilde=%-8g w_min=%.6g nodes=%d success=%.4g\n", widths[i],
                    row["w_min"].get<double>(), res.nodes_used, res.mean_success);
        rows.push_back(std::move(row));
    }
    sink.add("fluctuations.json", dump(rows));

    json summary;
    summary["alpha0"] = spec.alpha0;
    summary["delta_alpha"] = spec.delta_alpha;
    summary["sigma_tilde_list"] = widths;
    summary["n_nodes"] = spec.n_nodes;
    summary["extent"] = gs.extent;
    summary["npts"] = gs.npts;
    return summary;
}

json run_correlate(const json& cfg, const std::string& fmt, Sink& sink, std::uint64_t seed) {
    const HhgSpec hhg = hhg_from(cfg);
    const long n_shots = int_at(cfg, "n_shots", 10000, 1);

    std::vector<DiagonalFilter> filters;
    if (cfg.contains("filters")) {
        const json& fs = cfg.at("filters");
        if (!fs.is_array()) bad_key("filters", "an array of filter objects");
        for (const json& f : fs) {
            if (!f.is_object() || !f.contains("center"))
                bad_key("filters", "made of objects with at least a \"center\"");
            static const std::set<std::string> filter_keys = {"center", "half_width", "kappas"};
            for (auto it = f.begin(); it != f.end(); ++it)
                if (!filter_keys.count(it.key()))
                    throw UsageError("unknown filter key \"" + it.key() + "\"");
            DiagonalFilter df;
            df.center = req_num(f, "center");
            df.half_width = num_at(f, "half_width", 0.5);
            if (df.half_width <= 0.0) bad_key("half_width", "a positive number");
            if (f.contains("kappas")) df.kappas = num_list_at(f, "kappas");
            filters.push_back(std::move(df));
        }
    }

    const CorrelationMap map = correlation_map(hhg, n_shots, seed, filters);
    sink.add("shots" + data_ext(fmt), render_shots(map, fmt));

    json summary;
    summary["n_shots"] = n_shots;
    summary["harmonic_orders"] = map.harmonic_orders;
    summary["acceptance"] = map.acceptance;
    summary["mean_i_ir"] = map.mean_i_ir;
    summary["mean_i_xuv"] = map.mean_i_xuv;
    summary["axis_ratio"] = map.axis_ratio();
    summary["seed"] = seed;
    sink.add("summary.json", dump(summary));
    std::printf("correlation: mean I_IR=%.4f mean I_XUV=%.4f over %ld shots\n", map.mean_i_ir,
                map.mean_i_xuv, n_shots);
    return summary;
}

// ---------------------------------------------------------------------------

json dispatch(const std::string& kind, const json& cfg, const std::string& fmt, Sink& sink,
              std::uint64_t seed) {
    if (kind == "state") return run_state(cfg, fmt, sink);
    if (kind == "wigner") return run_wigner(cfg, fmt, sink);
    if (kind == "diagonal-sweep") return run_diagonal_sweep(cfg, fmt, sink);
    if (kind == "fidelity-scan") return run_fidelity_scan(cfg, fmt, sink);
    if (kind == "homodyne") return run_homodyne(cfg, fmt, sink, seed);
    if (kind == "radon") return run_radon(cfg, fmt, sink, seed);
    if (kind == "kc-sweep") return run_kc_sweep(cfg, fmt, sink, seed);
    if (kind == "shots-sweep") return run_shots_sweep(cfg, fmt, sink, seed);
    if (kind == "fluctuations") return run_fluctuations(cfg, fmt, sink);
    if (kind == "correlate") return run_correlate(cfg, fmt, sink, seed);
    throw UsageError("unknown experiment kind \"" + kind + "\"");
}

std::filesystem::path find_recipe(const std::string& name) {
    std::string base = name;
    if (base.size() < 5 || base.substr(base.size() - 5) != ".json") base += ".json";

    std::vector<std::filesystem::path> dirs;
    if (const char* env = std::getenv("CATSEL_RECIPES")) dirs.emplace_back(env);
    dirs.emplace_back("recipes");
    std::error_code ec;
    const auto exe = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (!ec) {
        dirs.push_back(exe.parent_path() / "recipes");
        dirs.push_back(exe.parent_path().parent_path() / "recipes");
    }

    std::string searched;
    for (const auto& d : dirs) {
        const auto candidate = d / base;
        if (std::filesystem::exists(candidate)) return candidate;
        if (!searched.empty()) searched += ", ";
        searched += d.string();
    }
    throw UsageError("recipe \"" + name + "\" not found (searched: " + searched + ")");
}

} // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("CATSEL_THREADS")) {
        const int n = std::atoi(threads);
        if (n > 0) Eigen::setNbThreads(n);
    }

    CLI::App app{"catsel: post-selected harmonic-generation states, Wigner analysis and "
                 "homodyne reconstruction"};
    std::string config_path, recipe, out_dir = "out", format = "csv";
    std::uint64_t seed = kDefaultSeed;
    app.add_option("--config", config_path, "path to a JSON experiment config");
    app.add_option("--recipe", recipe, "name of a config shipped under recipes/");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    CLI::Option* seed_opt =
        app.add_option("--seed", seed, "RNG seed; overrides the config's \"seed\"");
    app.add_option("--format", format, "format for grid/trace/shot artifacts")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    app.footer("Set CATSEL_THREADS to bound the linear-algebra thread count.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (config_path.empty() == recipe.empty())
            throw UsageError("pass exactly one of --config or --recipe");
        const std::filesystem::path path =
            recipe.empty() ? std::filesystem::path(config_path) : find_recipe(recipe);

        std::ifstream in(path);
        if (!in) throw UsageError("cannot open config \"" + path.string() + "\"");
        json cfg;
        try {
            cfg = json::parse(in);
        } catch (const json::parse_error& e) {
            throw UsageError("config is not valid JSON: " + std::string(e.what()));
        }
        if (!cfg.is_object()) throw UsageError("config root must be a JSON object");
        const std::string kind = str_at(cfg, "kind", "");
        if (kind.empty()) throw UsageError("config key \"kind\" is required");
        check_keys(cfg, kind);

        if (!*seed_opt && cfg.contains("seed")) {
            if (!cfg.at("seed").is_number_unsigned()) bad_key("seed", "an unsigned integer");
            seed = cfg.at("seed").get<std::uint64_t>();
        }

        Sink sink{out_dir, {}};
        const json resolved = dispatch(kind, cfg, format, sink, seed);
        const std::vector<std::string> outputs = sink.flush();

        json manifest;
        manifest["kind"] = kind;
        manifest["config"] = cfg;
        manifest["resolved"] = resolved;
        manifest["seed"] = seed;
        manifest["format"] = format;
        manifest["outputs"] = outputs;
        manifest["versions"] = {
            {"catsel", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION}};
        manifest["runtime_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::ofstream mf(std::filesystem::path(out_dir) / "manifest.json");
        mf << manifest.dump(2) << "\n";
        if (!mf) throw std::runtime_error("cannot write manifest.json");
        return 0;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const TruncationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const EmptySelectionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const DegenerateSelectionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
