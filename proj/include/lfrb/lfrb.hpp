#pragma once

// Umbrella header: conductivity-parametrized lead-field approximation by
// greedy reduced-basis selection, with generators, estimation, and the
// polynomial comparison baseline.

#include "lfrb/common.hpp"
#include "lfrb/model.hpp"
#include "lfrb/io.hpp"
#include "lfrb/numerics.hpp"
#include "lfrb/reduced_basis.hpp"
#include "lfrb/generators.hpp"
#include "lfrb/estimation.hpp"
#include "lfrb/poly_baseline.hpp"
#include "lfrb/storage.hpp"
#include "lfrb/bench.hpp"
