#pragma once

#include "replab/error.hpp"
#include "replab/geometry.hpp"
#include "replab/grasp.hpp"
#include "replab/scene.hpp"
#include "replab/camera.hpp"
#include "replab/arm.hpp"
#include "replab/calibration.hpp"
#include "replab/perception.hpp"
#include "replab/scorer.hpp"
#include "replab/planners.hpp"
#include "replab/cell_config.hpp"
#include "replab/benchmark.hpp"
#include "replab/dataset.hpp"
#include "replab/experiments.hpp"
#include "replab/reaching.hpp"
#include "replab/report.hpp"
