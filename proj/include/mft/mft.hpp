#pragma once

#include "mft/error.hpp"
#include "mft/numerics.hpp"
#include "mft/io.hpp"
#include "mft/robin_spectral.hpp"
#include "mft/euler_lagrange.hpp"
#include "mft/quasipotential.hpp"
#include "mft/dynamics.hpp"
#include "mft/rate_functional.hpp"
#include "mft/microscopic_sim.hpp"
