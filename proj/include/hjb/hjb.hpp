#pragma once

#include "hjb/geometry.hpp"
#include "hjb/quadrature.hpp"
#include "hjb/mesh.hpp"
#include "hjb/fespace.hpp"
#include "hjb/problem.hpp"
#include "hjb/sparse.hpp"
#include "hjb/linsolve.hpp"
#include "hjb/assembly.hpp"
#include "hjb/howard.hpp"
#include "hjb/adapt.hpp"
#include "hjb/bench.hpp"
