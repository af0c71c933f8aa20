#pragma once

#include <iosfwd>
#include <string>

#include "psicalc/symbol.hpp"

namespace psicalc {

/// Symbol record as JSON text:
///   {"format": "psicalc-symbol", "version": 1,
///    "manifold": {"dim", "grid", "directions"}, "fiber",
///    "terms": [{"degree", "re": [...], "im": [...]}, ...]}
/// Samples are ordered (point, direction, row, column), row-major within a matrix.
/// Only values are stored; jets are dropped.
std::string symbol_to_json(const ClassicalSymbol& p);
ClassicalSymbol symbol_from_json(const std::string& text);

void export_symbol(const ClassicalSymbol& p, std::ostream& out);

}  // namespace psicalc
