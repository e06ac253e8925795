#pragma once

#include "schedopt/adjoint.hpp"
#include "schedopt/csv.hpp"
#include "schedopt/error.hpp"
#include "schedopt/experiments.hpp"
#include "schedopt/kalman_bucy.hpp"
#include "schedopt/models.hpp"
#include "schedopt/optimizer.hpp"
#include "schedopt/rng.hpp"
#include "schedopt/schedule.hpp"
#include "schedopt/sde.hpp"
#include "schedopt/svg.hpp"
#include "schedopt/zakai.hpp"
