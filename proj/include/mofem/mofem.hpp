#pragma once

// Umbrella header for the mofem library.

#include "mofem/discretization.hpp"
#include "mofem/errors.hpp"
#include "mofem/fem1d.hpp"
#include "mofem/geometry.hpp"
#include "mofem/harness.hpp"
#include "mofem/io.hpp"
#include "mofem/models.hpp"
#include "mofem/quadrature.hpp"
#include "mofem/solvers.hpp"
#include "mofem/sylvester.hpp"
#include "mofem/timestepping.hpp"
