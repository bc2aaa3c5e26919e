#pragma once

// Umbrella header for the kinex library. I/O helpers (CSV/JSON writers)
// live in kinex/io.hpp and are included separately by consumers that need
// them, to keep the JSON dependency out of purely numerical translation
// units.

#include "kinex/acceptance.hpp"
#include "kinex/cdf.hpp"
#include "kinex/density.hpp"
#include "kinex/errors.hpp"
#include "kinex/gamma.hpp"
#include "kinex/grid.hpp"
#include "kinex/laplace.hpp"
#include "kinex/mixed.hpp"
#include "kinex/numerics.hpp"
#include "kinex/operators.hpp"
#include "kinex/simulation.hpp"
#include "kinex/version.hpp"
