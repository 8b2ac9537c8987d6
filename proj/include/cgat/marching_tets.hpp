#pragma once

#include <functional>

#include "cgat/mesh.hpp"

namespace cgat {

using ScalarFunction = std::function<double(const Vec3&)>;

/// Polygonizes the zero level set of `field` (negative inside) over the box
/// [lo, hi] sampled at `spacing`, splitting every grid cube into six
/// tetrahedra around its main diagonal. Shared edge crossings are welded,
/// faces wind counter-clockwise seen from outside. The surface must not
/// touch the box boundary for the result to be closed.
Mesh marching_tetrahedra(const ScalarFunction& field, const Vec3& lo, const Vec3& hi, double spacing);

}  // namespace cgat
