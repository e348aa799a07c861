#pragma once

#include "perron_radius/graph_model.hpp"
#include "perron_radius/inner_flow.hpp"
#include "perron_radius/log.hpp"
#include "perron_radius/objective.hpp"
#include "perron_radius/outer_solver.hpp"
#include "perron_radius/spectral_core.hpp"
