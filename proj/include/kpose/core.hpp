#pragma once

#include "kpose/core/error.hpp"
#include "kpose/core/geometry.hpp"
#include "kpose/core/io.hpp"
#include "kpose/core/kd_tree.hpp"
#include "kpose/core/mesh.hpp"
#include "kpose/core/normals.hpp"
#include "kpose/core/parallel.hpp"
#include "kpose/core/point_cloud.hpp"
#include "kpose/core/random.hpp"
#include "kpose/core/rigid_transform.hpp"
