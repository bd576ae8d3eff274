#pragma once

#include "jkmap/error.hpp"
#include "jkmap/rng.hpp"
#include "jkmap/order_statistics.hpp"
#include "jkmap/csv.hpp"
#include "jkmap/finite_types.hpp"
#include "jkmap/spaces.hpp"
#include "jkmap/population.hpp"
#include "jkmap/exact_finite.hpp"
#include "jkmap/binomial.hpp"
#include "jkmap/mc_engine.hpp"
#include "jkmap/diagnostics.hpp"
#include "jkmap/scenario.hpp"
#include "jkmap/io.hpp"
#include "jkmap/run.hpp"
