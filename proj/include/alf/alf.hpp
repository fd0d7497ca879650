#pragma once

#include "alf/config.hpp"
#include "alf/engine.hpp"
#include "alf/environments.hpp"
#include "alf/genome.hpp"
#include "alf/network.hpp"
#include "alf/operators.hpp"
#include "alf/population.hpp"
#include "alf/rng.hpp"
#include "alf/speciation.hpp"
#include "alf/statistics.hpp"
