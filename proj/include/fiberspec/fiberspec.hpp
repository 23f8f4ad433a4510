#pragma once

// Umbrella header: truncated Fock space, discretized transverse field,
// fiber Hamiltonian assembly, spectral solvers, identity diagnostics, and
// the run configuration / caching layer.

#include "fiberspec/cache.hpp"
#include "fiberspec/config.hpp"
#include "fiberspec/diagnostics.hpp"
#include "fiberspec/errors.hpp"
#include "fiberspec/field.hpp"
#include "fiberspec/fock.hpp"
#include "fiberspec/lanczos.hpp"
#include "fiberspec/minres.hpp"
#include "fiberspec/quadrature.hpp"
#include "fiberspec/runner.hpp"
#include "fiberspec/sparse.hpp"
#include "fiberspec/spectral.hpp"
#include "fiberspec/util.hpp"
