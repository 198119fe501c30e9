#pragma once

#include <string>

#include "otlab/lp_transport.hpp"
#include "otlab/semidiscrete.hpp"

namespace otlab {

/// JSON array of {"point": [...], "weight": w}. Reading normalizes nothing:
/// weights must already sum to one.
std::string measure_to_json(const DiscreteMeasure& m);
DiscreteMeasure measure_from_json(const std::string& text);
void write_measure(const DiscreteMeasure& m, const std::string& path);
DiscreteMeasure read_measure(const std::string& path);

/// First line: JSON object {"rows": f, "cols": g}. Then one "i j mass" line
/// per entry, numbers printed with 17 significant digits.
void write_plan(const DiscretePlan& plan, const std::string& path);
DiscretePlan read_plan(const std::string& path);

/// Sites, potentials, power weights, masses, barycenters, second moments
/// and diameters of a semi-discrete solve.
std::string semidiscrete_to_json(const SemiDiscreteResult& r);

std::string read_text(const std::string& path);
void write_text(const std::string& text, const std::string& path);

}  // namespace otlab
