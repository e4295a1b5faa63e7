#pragma once

#include "ldhole/errors.hpp"
#include "ldhole/parallel.hpp"
#include "ldhole/points.hpp"
#include "ldhole/kernels.hpp"
#include "ldhole/geometry.hpp"
#include "ldhole/qp.hpp"
#include "ldhole/primal.hpp"
#include "ldhole/dual.hpp"
#include "ldhole/isotropic.hpp"
#include "ldhole/shapes.hpp"
#include "ldhole/rng.hpp"
#include "ldhole/mc.hpp"
#include "ldhole/io.hpp"
