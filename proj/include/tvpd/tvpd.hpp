#pragma once
/// @file tvpd.hpp
/// @brief Umbrella header.

#include "tvpd/tensors.hpp"
#include "tvpd/mesh.hpp"
#include "tvpd/fractional.hpp"
#include "tvpd/constitutive.hpp"
#include "tvpd/problem.hpp"
#include "tvpd/state.hpp"
#include "tvpd/dissipation.hpp"
#include "tvpd/damage_step.hpp"
#include "tvpd/coupled_step.hpp"
#include "tvpd/stepper.hpp"
#include "tvpd/audit.hpp"
#include "tvpd/contdep.hpp"
#include "tvpd/sweep.hpp"
#include "tvpd/config.hpp"
#include "tvpd/io.hpp"
