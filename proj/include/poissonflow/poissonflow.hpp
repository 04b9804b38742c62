#pragma once

// Umbrella header for the discrete-distribution calculus: mass functions,
// thinning and Poisson smoothing, log-concavity classes, entropy
// functionals, and the mean-preserving flow toward the Poisson.

#include "poissonflow/cli.hpp"
#include "poissonflow/concavity.hpp"
#include "poissonflow/errors.hpp"
#include "poissonflow/flow.hpp"
#include "poissonflow/functionals.hpp"
#include "poissonflow/pmf.hpp"
#include "poissonflow/transforms.hpp"
