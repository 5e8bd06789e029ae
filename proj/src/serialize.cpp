#include "catsel/serialize.hpp"

#include <ostream>

#include <json.hpp>

namespace catsel {

namespace {

using nlohmann::json;

json complex_array(const Complex* data, long count) {
    json arr = json::array();
    for (long i = 0; i < count; ++i) arr.push_back({data[i].real(), data[i].imag()});
    return arr;
}

Complex parse_complex(const json& pair) {
    if (!pair.is_array() || pair.size() != 2)
        throw UsageError("state json: complex entries must be [re, im] pairs");
    return Complex(pair[0].get<double>(), pair[1].get<double>());
}

json parse_text(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw UsageError("state json: malformed document");
    return j;
}

ModeLayout layout_from(const json& j) {
    if (!j.contains("dims")) throw UsageError("state json: missing 'dims'");
    std::vector<int> dims = j.at("dims").get<std::vector<int>>();
    std::vector<std::string> labels;
    if (j.contains("labels")) {
        labels = j.at("labels").get<std::vector<std::string>>();
    } else {
        for (std::size_t i = 0; i < dims.size(); ++i) labels.push_back("mode" + std::to_string(i));
    }
    return ModeLayout(std::move(dims), std::move(labels));
}

} // namespace

std::string to_json(const PureState& state) {
    json j;
    j["dims"] = state.layout.dims;
    j["labels"] = state.layout.labels;
    j["amplitudes"] = complex_array(state.amps.data(), state.amps.size());
    return j.dump();
}

std::string to_json(const DensityOperator& rho) {
    json j;
    j["dims"] = std::vector<int>{rho.dim()};
    // Eigen stores column-major; emit row-major as the schema expects.
    json rows = json::array();
    for (int i = 0; i < rho.dim(); ++i)
        for (int k = 0; k < rho.dim(); ++k)
            rows.push_back({rho.matrix(i, k).real(), rho.matrix(i, k).imag()});
    j["matrix"] = std::move(rows);
    return j.dump();
}

PureState pure_state_from_json(const std::string& text) {
    json j = parse_text(text);
    PureState state;
    state.layout = layout_from(j);
    if (!j.contains("amplitudes")) throw UsageError("state json: missing 'amplitudes'");
    const json& amps = j.at("amplitudes");
    if (static_cast<long>(amps.size()) != state.layout.total_dim())
        throw UsageError("state json: amplitude count does not match dims");
    state.amps.resize(amps.size());
    for (std::size_t i = 0; i < amps.size(); ++i) state.amps[i] = parse_complex(amps[i]);
    return state;
}

DensityOperator density_from_json(const std::string& text) {
    json j = parse_text(text);
    ModeLayout layout = layout_from(j);
    if (layout.n_modes() != 1) throw UsageError("state json: density operators are single-mode");
    const long dim = layout.total_dim();
    if (!j.contains("matrix")) throw UsageError("state json: missing 'matrix'");
    const json& m = j.at("matrix");
    if (static_cast<long>(m.size()) != dim * dim)
        throw UsageError("state json: matrix entry count does not match dims");
    DensityOperator rho;
    rho.matrix.resize(dim, dim);
    for (long i = 0; i < dim; ++i)
        for (long k = 0; k < dim; ++k) rho.matrix(i, k) = parse_complex(m[i * dim + k]);
    return rho;
}

void write_json(const PureState& state, std::ostream& os) { os << to_json(state) << '\n'; }
void write_json(const DensityOperator& rho, std::ostream& os) { os << to_json(rho) << '\n'; }

} // namespace catsel
