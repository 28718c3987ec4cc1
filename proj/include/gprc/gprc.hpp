#pragma once

// Parameter inference for ordinary and partial differential equations from
// noisy observations of the solution: joint Gaussian-process modeling of the
// solution and its equation residual, Picard linearization for nonlinear
// equations, and Metropolis-Hastings sampling of the parameter posterior.

#include "gprc/errors.hpp"
#include "gprc/gp.hpp"
#include "gprc/inference.hpp"
#include "gprc/io.hpp"
#include "gprc/kernels.hpp"
#include "gprc/linearization.hpp"
#include "gprc/multi_index.hpp"
#include "gprc/operators.hpp"
#include "gprc/optimize.hpp"
#include "gprc/parallel.hpp"
#include "gprc/problems.hpp"
