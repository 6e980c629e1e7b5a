#pragma once

#include "hardy/capacity.hpp"
#include "hardy/error.hpp"
#include "hardy/grid.hpp"
#include "hardy/io.hpp"
#include "hardy/lorentz.hpp"
#include "hardy/mazya.hpp"
#include "hardy/optimize.hpp"
#include "hardy/pipeline.hpp"
#include "hardy/potential.hpp"
#include "hardy/quadrature.hpp"
#include "hardy/rayleigh.hpp"
#include "hardy/rearrange.hpp"
