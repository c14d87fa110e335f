#pragma once

#include "visage/error.hpp"
#include "visage/transcript.hpp"
#include "visage/viseme.hpp"
#include "visage/coarticulation.hpp"
#include "visage/expression.hpp"
#include "visage/headpose.hpp"
#include "visage/mesh.hpp"
#include "visage/calibration.hpp"
#include "visage/engine.hpp"
