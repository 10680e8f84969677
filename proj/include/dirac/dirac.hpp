#pragma once

#include "dirac/analytic.hpp"
#include "dirac/config.hpp"
#include "dirac/curves.hpp"
#include "dirac/dirac_sim.hpp"
#include "dirac/error.hpp"
#include "dirac/implied_vol.hpp"
#include "dirac/instruments.hpp"
#include "dirac/ou_state.hpp"
#include "dirac/rng.hpp"
