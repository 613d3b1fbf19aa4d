#pragma once

// Data-driven forward-kinematics models of hysteretic actuators (GMM/GMR)
// and hysteresis-compensated inverse kinematics by branch-switching
// iterative search, with a synthetic backlash plant as ground truth.

#include "hystkin/dataset.hpp"
#include "hystkin/errors.hpp"
#include "hystkin/gmm.hpp"
#include "hystkin/gmr.hpp"
#include "hystkin/hysteresis.hpp"
#include "hystkin/model_io.hpp"
#include "hystkin/simulator.hpp"
#include "hystkin/svg.hpp"
