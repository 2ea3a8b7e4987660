#pragma once

#include "arcdrift/errors.hpp"
#include "arcdrift/types.hpp"
#include "arcdrift/tension.hpp"
#include "arcdrift/rng.hpp"
#include "arcdrift/parallel.hpp"
#include "arcdrift/field.hpp"
#include "arcdrift/manifold.hpp"
#include "arcdrift/sim.hpp"
#include "arcdrift/controller.hpp"
#include "arcdrift/cluster.hpp"
#include "arcdrift/diagnostics.hpp"
#include "arcdrift/container.hpp"
#include "arcdrift/config.hpp"
#include "arcdrift/report.hpp"
