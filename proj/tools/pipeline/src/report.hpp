#pragma once

#include "openscr/pipeline.hpp"

namespace openscr::pipeline {

/// Collates occasion, interval, selection, survival and salinity-band
/// tables plus plot-ready series under <output_dir>/report.
void write_report(const RunConfig& config);

}  // namespace openscr::pipeline
