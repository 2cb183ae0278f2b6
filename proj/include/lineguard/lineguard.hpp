#pragma once

// Umbrella header for the lineguard calibration and triage library.

#include "lineguard/conformal.hpp"
#include "lineguard/csv.hpp"
#include "lineguard/dwa.hpp"
#include "lineguard/errors.hpp"
#include "lineguard/metrics.hpp"
#include "lineguard/model_io.hpp"
#include "lineguard/report.hpp"
#include "lineguard/scored_case.hpp"
#include "lineguard/split.hpp"
#include "lineguard/synth.hpp"
#include "lineguard/taxonomy.hpp"
#include "lineguard/taxonomy_io.hpp"
#include "lineguard/triage.hpp"
