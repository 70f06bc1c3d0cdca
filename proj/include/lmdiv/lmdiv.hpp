#pragma once

// Umbrella header for the library. The command line lives in lmdiv/cli.hpp
// and additionally needs CLI11 and nlohmann/json.

#include "lmdiv/poly.hpp"
#include "lmdiv/quadrature.hpp"
#include "lmdiv/distributions.hpp"
#include "lmdiv/lmoments.hpp"
#include "lmdiv/divergence.hpp"
#include "lmdiv/models.hpp"
#include "lmdiv/dual.hpp"
#include "lmdiv/nelder_mead.hpp"
#include "lmdiv/estimator.hpp"
#include "lmdiv/sim.hpp"
