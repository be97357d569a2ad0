#pragma once

#include "uiga/common.hpp"
#include "uiga/quadrature.hpp"
#include "uiga/splines.hpp"
#include "uiga/geometry.hpp"
#include "uiga/cutcell.hpp"
#include "uiga/trace.hpp"
#include "uiga/multimesh.hpp"
#include "uiga/problem.hpp"
#include "uiga/stabilization.hpp"
#include "uiga/assembly.hpp"
#include "uiga/linsolve.hpp"
#include "uiga/harness/manufactured.hpp"
#include "uiga/harness/fixtures.hpp"
#include "uiga/harness/study.hpp"
#include "uiga/harness/config.hpp"
