#pragma once
#include <glinfer/errors.hpp>
#include <glinfer/linalg.hpp>
#include <glinfer/penalty.hpp>
#include <glinfer/path.hpp>
#include <glinfer/polytope.hpp>
#include <glinfer/ic.hpp>
#include <glinfer/tg.hpp>
#include <glinfer/contrast.hpp>
#include <glinfer/rng.hpp>
#include <glinfer/stats.hpp>
#include <glinfer/sim.hpp>
