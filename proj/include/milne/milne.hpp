#pragma once

// Everything in one include.

#include "artifacts.hpp"
#include "commands.hpp"
#include "errors.hpp"
#include "field_io.hpp"
#include "gmres.hpp"
#include "grid.hpp"
#include "halfspace.hpp"
#include "profiles.hpp"
#include "regularize.hpp"
#include "run_config.hpp"
#include "solver.hpp"
#include "study.hpp"
