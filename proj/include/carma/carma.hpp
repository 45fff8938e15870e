#pragma once

// Umbrella header.

#include "carma/auction.hpp"
#include "carma/budget.hpp"
#include "carma/cli.hpp"
#include "carma/io.hpp"
#include "carma/model.hpp"
#include "carma/oracle.hpp"
#include "carma/sim.hpp"
#include "carma/strategy.hpp"
#include "carma/valuation.hpp"
