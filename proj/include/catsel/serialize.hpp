#pragma once

#include <iosfwd>
#include <string>

#include "catsel/fock.hpp"

namespace catsel {

// JSON state schema: {"dims": [...], "labels": [...], "amplitudes": [[re, im], ...]}
// row-major over the flattened tensor index. Density operators use "matrix"
// with dim*dim row-major entries instead of "amplitudes".
std::string to_json(const PureState& state);
std::string to_json(const DensityOperator& rho);

PureState pure_state_from_json(const std::string& text);
DensityOperator density_from_json(const std::string& text);

void write_json(const PureState& state, std::ostream& os);
void write_json(const DensityOperator& rho, std::ostream& os);

} // namespace catsel
